#include "cg_engine.hpp"

#include "adapter.hpp"
#include "error.hpp"
#include "gold_cg.hpp"

#include <algorithm>
#include <unordered_set>

#include <json.hpp>

using json = nlohmann::json;

namespace cground {

void GeneratorConfig::validate() const {
    if (!use_doc && !use_conv) {
        throw Error(ErrorCode::Config, "generator needs at least one context source (doc or conv)");
    }
}

namespace {

void append_unique(std::vector<Proposition>& out, std::unordered_set<std::string>& seen,
                   const std::vector<Proposition>& props, int turn) {
    for (const auto& p : props) {
        if (seen.insert(p.normalized()).second) out.emplace_back(p.surface(), turn);
    }
}

const Turn* turn_of(const std::shared_ptr<const Conversation>& gold, int turn_no) {
    if (!gold || turn_no < 0 || static_cast<std::size_t>(turn_no) >= gold->turns.size()) return nullptr;
    return &gold->turns[static_cast<std::size_t>(turn_no)];
}

}  // namespace

std::vector<Proposition> OracleGenerator::generate(const ConversationContext& ctx, const GeneratorConfig&) const {
    const Turn* t = turn_of(gold_, ctx.turn_index());
    if (!t || !t->gold_cg) {
        throw Error(ErrorCode::InvalidArgument,
                    "oracle generator: no gold CG for turn " + std::to_string(ctx.turn_index()));
    }
    std::vector<Proposition> out;
    for (const auto& p : *t->gold_cg) out.emplace_back(p.surface(), ctx.turn_index());
    return out;
}

std::vector<Proposition> RuleGenerator::generate(const ConversationContext& ctx, const GeneratorConfig& config) const {
    config.validate();
    const int turn = ctx.turn_index();
    auto props_of = [&](std::string_view text) {
        if (normalize_text(text).empty()) return std::vector<Proposition>{};
        return extract_propositions(annotator_->annotate(text), turn);
    };
    std::vector<Proposition> out;
    std::unordered_set<std::string> seen;
    if (config.include_current_question) {
        append_unique(out, seen, props_of(ctx.current_question), turn);
        if (config.use_conv && !ctx.history.empty()) {
            append_unique(out, seen, props_of(ctx.history.back().question), turn);
            append_unique(out, seen, props_of(ctx.history.back().answer), turn);
        }
        if (config.use_doc && ctx.doc && turn == 0) {
            append_unique(out, seen, props_of(ctx.doc->title), turn);
            append_unique(out, seen, props_of(ctx.doc->first_sentence), turn);
        }
    } else {
        if (config.use_conv) {
            for (auto it = ctx.history.rbegin(); it != ctx.history.rend(); ++it) {
                append_unique(out, seen, props_of(it->question), turn);
                append_unique(out, seen, props_of(it->answer), turn);
            }
        }
        if (config.use_doc && ctx.doc) {
            append_unique(out, seen, props_of(ctx.doc->title), turn);
            append_unique(out, seen, props_of(ctx.doc->first_sentence), turn);
        }
    }
    return out;
}

std::vector<Proposition> ExternalGenerator::generate(const ConversationContext& ctx,
                                                     const GeneratorConfig& config) const {
    config.validate();
    json history = json::array();
    if (config.use_conv) {
        for (const auto& qa : ctx.history) history.push_back({{"question", qa.question}, {"answer", qa.answer}});
    }
    json doc = nullptr;
    if (config.use_doc && ctx.doc) doc = {{"title", ctx.doc->title}, {"first_sentence", ctx.doc->first_sentence}};
    json payload = {{"doc", doc},
                    {"history", history},
                    {"question", config.include_current_question ? ctx.current_question : std::string{}}};
    auto body = client_->call_ok("generate_cg", payload);
    std::vector<Proposition> out;
    std::unordered_set<std::string> seen;
    try {
        for (const auto& s : body.at("propositions")) {
            auto surface = s.get<std::string>();
            if (normalize_text(surface).empty()) continue;
            Proposition p(surface, ctx.turn_index());
            if (seen.insert(p.normalized()).second) out.push_back(std::move(p));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Backend, std::string("generate_cg: malformed response payload: ") + e.what());
    }
    return out;
}

CommonGround OracleSelector::select(CommonGround cg, const SelectionQuery& query) const {
    const Turn* t = turn_of(gold_, query.turn_no);
    const auto answer_tokens = t && t->answer ? match_tokens(*t->answer) : std::vector<std::string>{};
    for (std::size_t i = 0; i < cg.size(); ++i) {
        const bool keep = contains_token_run(answer_tokens, match_tokens(cg.entries()[i].proposition.surface()));
        cg.set_status(i, keep ? CgStatus::Selected : CgStatus::Retained);
    }
    return cg;
}

CommonGround GoldTurnSelector::select(CommonGround cg, const SelectionQuery& query) const {
    std::unordered_set<std::string> gold;
    if (const Turn* t = turn_of(gold_, query.turn_no); t && t->gold_cg) {
        for (const auto& p : *t->gold_cg) gold.insert(p.normalized());
    }
    for (std::size_t i = 0; i < cg.size(); ++i) {
        cg.set_status(i, gold.count(cg.entries()[i].proposition.normalized()) ? CgStatus::Selected
                                                                               : CgStatus::Retained);
    }
    return cg;
}

double overlap_score(const Proposition& proposition, const std::vector<std::string>& tokens) {
    const auto ptoks = content_tokens(proposition.surface());
    if (ptoks.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& t : ptoks) {
        if (std::find(tokens.begin(), tokens.end(), t) != tokens.end()) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ptoks.size());
}

CommonGround RuleSelector::select(CommonGround cg, const SelectionQuery& query) const {
    const auto q_tokens = content_tokens(query.question);
    std::vector<std::string> prev_q_tokens;
    std::vector<std::string> prev_a_tokens;
    if (query.previous) {
        prev_q_tokens = content_tokens(query.previous->question);
        prev_a_tokens = content_tokens(query.previous->answer);
    }

    const std::size_t n = cg.size();
    std::vector<bool> in_question(n);
    std::vector<bool> in_previous(n);
    std::vector<bool> entity(n);
    bool question_names_entity = false;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = cg.entries()[i].proposition;
        in_question[i] = overlap_score(p, q_tokens) > 0.0;
        entity[i] = is_entity_bearing(p);
        // answers resolve the previous question; only the entities they name stay topical
        in_previous[i] = overlap_score(p, prev_q_tokens) > 0.0 || (entity[i] && overlap_score(p, prev_a_tokens) > 0.0);
        if (in_question[i] && entity[i]) question_names_entity = true;
    }

    for (std::size_t i = 0; i < n; ++i) {
        // an entity the question replaces ("what about in the US?") is not carried over
        const bool carried = in_previous[i] && !(entity[i] && question_names_entity);
        cg.set_status(i, in_question[i] || carried ? CgStatus::Selected : CgStatus::Retained);
    }

    // A personal pronoun points back at the conversation's first entity.
    const auto words = match_tokens(query.question);
    if (std::any_of(words.begin(), words.end(), [](const std::string& w) { return is_personal_pronoun(w); })) {
        for (std::size_t i = 0; i < n; ++i) {
            if (entity[i]) {
                cg.set_status(i, CgStatus::Selected);
                break;
            }
        }
    }
    return cg;
}

CommonGround ExternalSelector::select(CommonGround cg, const SelectionQuery& query) const {
    const std::string digest = CommonGround::render(cg.full());
    for (std::size_t i = 0; i < cg.size(); ++i) {
        json payload = {{"proposition", cg.entries()[i].proposition.surface()},
                        {"question", query.question},
                        {"context_digest", digest}};
        auto body = client_->call_ok("classify", payload);
        int label = 0;
        try {
            label = body.at("label").get<int>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Backend, std::string("classify: malformed response payload: ") + e.what());
        }
        if (label != 0 && label != 1) throw Error(ErrorCode::Backend, "classify: label must be 0 or 1");
        cg.set_status(i, label == 1 ? CgStatus::Selected : CgStatus::Retained);
    }
    return cg;
}

CgSession::CgSession(std::optional<DocumentContext> doc, std::shared_ptr<const Generator> generator,
                     std::shared_ptr<const Selector> selector, GeneratorConfig config)
    : generator_(std::move(generator)), selector_(std::move(selector)), config_(config) {
    config_.validate();
    ctx_.doc = std::move(doc);
}

StepResult CgSession::step(const std::string& question, const AnswerFn& answer_fn) {
    ctx_.current_question = question;
    StepResult result;
    result.generated = generator_->generate(ctx_, config_);

    CommonGround next = cg_;
    for (const auto& p : result.generated) next.add(Proposition(p.surface(), turn()));

    SelectionQuery query{question, turn(), std::nullopt};
    if (!ctx_.history.empty()) query.previous = ctx_.history.back();
    next = selector_->select(std::move(next), query);

    result.answer = answer_fn ? answer_fn(ctx_, next) : std::string{};
    cg_ = next;
    result.cg = std::move(next);
    ctx_.history.push_back({question, result.answer});
    ctx_.current_question.clear();
    return result;
}

}  // namespace cground
