#include "gold_cg.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

using json = nlohmann::json;

namespace cground {

Conversation build_gold_cg(Conversation conversation, const Annotator& annotator) {
    for (auto& turn : conversation.turns) {
        turn.gold_cg = extract_propositions(annotator.annotate(turn.effective_rewrite()), turn.turn_no);
    }
    return conversation;
}

Conversation enrich_with_doc(Conversation conversation, const DocSource& doc_source) {
    if (auto it = doc_source.find(conversation.conversation_id); it != doc_source.end()) {
        conversation.doc = it->second;
    }
    return conversation;
}

DocSource parse_doc_source(std::string_view text) {
    DocSource out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            auto j = json::parse(line);
            out[j.at("conversation_id").get<std::string>()] =
                DocumentContext{j.at("doc_title").get<std::string>(), j.at("doc_first_sentence").get<std::string>()};
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Parse, "doc source line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

DocSource load_doc_source(const std::filesystem::path& path) {
    return parse_doc_source(read_file(path));
}

double enrichment_coverage(const std::vector<Conversation>& conversations) {
    std::size_t total = 0;
    std::size_t enriched = 0;
    for (const auto& c : conversations) {
        total += c.turns.size();
        if (c.doc) enriched += c.turns.size();
    }
    return total == 0 ? 0.0 : static_cast<double>(enriched) / static_cast<double>(total);
}

CommonGround gold_cg_full(const Conversation& conversation, std::size_t turn_index) {
    CommonGround cg;
    for (std::size_t i = 0; i <= turn_index && i < conversation.turns.size(); ++i) {
        const auto& t = conversation.turns[i];
        if (!t.gold_cg) continue;
        for (const auto& p : *t.gold_cg) cg.add(p);
    }
    return cg;
}

bool occurs_in_answer(const Proposition& proposition, std::string_view answer) {
    return contains_token_run(match_tokens(answer), match_tokens(proposition.surface()));
}

SelectorExamples build_selector_examples(const Conversation& conversation) {
    SelectorExamples out;
    for (std::size_t n = 0; n < conversation.turns.size(); ++n) {
        const auto& turn = conversation.turns[n];
        if (!turn.gold_cg) {
            throw Error(ErrorCode::InvalidArgument, "conversation " + conversation.conversation_id + " turn " +
                                                        std::to_string(turn.turn_no) + " has no gold_cg");
        }
        if (!turn.answer) {
            out.warnings.push_back("conversation " + conversation.conversation_id + " turn " +
                                   std::to_string(turn.turn_no) + ": missing answer, skipped");
            continue;
        }
        const CommonGround full = gold_cg_full(conversation, n);
        const std::string digest = CommonGround::render(full.full());
        const auto answer_tokens = match_tokens(*turn.answer);
        for (const auto& entry : full.entries()) {
            const auto& p = entry.proposition;
            SelectorExample ex{p, turn.question, digest, 0, conversation.conversation_id, turn.turn_no};
            ex.label = contains_token_run(answer_tokens, match_tokens(p.surface())) ? 1 : 0;
            out.examples.push_back(std::move(ex));
        }
    }
    return out;
}

std::string serialize_selector_examples(const std::vector<SelectorExample>& examples) {
    std::string out;
    for (const auto& ex : examples) {
        json j = {{"proposition", ex.proposition.surface()},
                  {"question", ex.question},
                  {"context_digest", ex.context_digest},
                  {"label", ex.label},
                  {"conversation_id", ex.conversation_id},
                  {"turn_no", ex.turn_no}};
        out += j.dump(-1, ' ', false, json::error_handler_t::strict);
        out += '\n';
    }
    return out;
}

std::pair<std::vector<Conversation>, std::vector<Conversation>> split_train_validation(
    const std::vector<Conversation>& conversations, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "split fraction must lie strictly between 0 and 1");
    }
    const std::size_t n = conversations.size();
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "split needs at least 2 conversations");

    // Fisher-Yates with an explicit draw so the permutation does not depend
    // on the standard library's distribution implementation.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::uint64_t bound = i + 1;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t draw;
        do {
            draw = rng();
        } while (draw >= limit);
        std::swap(order[i], order[static_cast<std::size_t>(draw % bound)]);
    }
    // both sides stay non-empty
    const auto n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n - 1);
    std::vector<bool> in_val(n, false);
    for (std::size_t i = 0; i < n_val; ++i) in_val[order[i]] = true;

    std::vector<Conversation> train;
    std::vector<Conversation> validation;
    for (std::size_t i = 0; i < n; ++i) {
        (in_val[i] ? validation : train).push_back(conversations[i]);
    }
    return {std::move(train), std::move(validation)};
}

}  // namespace cground
