#include "context_setups.hpp"

#include "adapter.hpp"
#include "error.hpp"

#include <array>
#include <cctype>

#include <json.hpp>

using json = nlohmann::json;

namespace cground {

namespace {

struct SetupInfo {
    Setup setup;
    const char* name;
    const char* display;
};

constexpr std::array<SetupInfo, 9> kSetups = {{
    {Setup::Original, "original", "original"},
    {Setup::Concat, "concat", "concat."},
    {Setup::Rewrite, "rewrite", "rewrite"},
    {Setup::Summary, "summary", "summary"},
    {Setup::Cg, "cg", "CG"},
    {Setup::CgFull, "cg_full", "CG-full"},
    {Setup::CgFullCg, "cg_full_cg", "CG-full/CG"},
    {Setup::RewriteG, "rewrite_g", "rewrite-g"},
    {Setup::CgG, "cg_g", "CG-g"},
}};

const SetupInfo& info(Setup setup) {
    for (const auto& i : kSetups) {
        if (i.setup == setup) return i;
    }
    return kSetups.front();
}

json context_payload(const ConversationContext& ctx) {
    json history = json::array();
    for (const auto& qa : ctx.history) history.push_back({{"question", qa.question}, {"answer", qa.answer}});
    json doc = nullptr;
    if (ctx.doc) doc = {{"title", ctx.doc->title}, {"first_sentence", ctx.doc->first_sentence}};
    return {{"doc", doc}, {"history", history}};
}

std::string previous_turn(const ConversationContext& ctx) {
    if (ctx.history.empty()) return {};
    const auto& last = ctx.history.back();
    return last.question + " " + last.answer;
}

}  // namespace

const char* setup_name(Setup setup) noexcept { return info(setup).name; }
const char* setup_display_name(Setup setup) noexcept { return info(setup).display; }

std::optional<Setup> setup_from_name(std::string_view name) {
    for (const auto& i : kSetups) {
        if (name == i.name) return i.setup;
    }
    return std::nullopt;
}

const std::vector<Setup>& all_setups() {
    static const std::vector<Setup> setups = [] {
        std::vector<Setup> v;
        for (const auto& i : kSetups) v.push_back(i.setup);
        return v;
    }();
    return setups;
}

bool setup_uses_cg(Setup setup) noexcept {
    return setup == Setup::Cg || setup == Setup::CgFull || setup == Setup::CgFullCg || setup == Setup::CgG;
}

std::string truncate_left(std::string_view text, int max_tokens) {
    if (max_tokens <= 0) return std::string(text);
    int seen = 0;
    std::size_t i = text.size();
    while (i > 0) {
        while (i > 0 && std::isspace(static_cast<unsigned char>(text[i - 1]))) --i;
        if (i == 0) break;
        std::size_t start = i;
        while (start > 0 && !std::isspace(static_cast<unsigned char>(text[start - 1]))) --start;
        if (++seen == max_tokens) return std::string(text.substr(start));
        i = start;
    }
    return std::string(text);
}

std::string fallback_summary(const ConversationContext& ctx) {
    std::string out = ctx.doc ? ctx.doc->first_sentence : std::string{};
    if (!ctx.history.empty() && !ctx.history.back().answer.empty()) {
        if (!out.empty()) out += ' ';
        out += ctx.history.back().answer;
    }
    return out;
}

QueryFormulation formulate(Setup setup, const ConversationContext& ctx, const CommonGround& cg,
                           const FormulationServices& services, const FormulationOptions& options) {
    const std::string& q = ctx.current_question;
    std::string retriever;
    std::string reader;
    switch (setup) {
        case Setup::Original:
            retriever = q;
            break;
        case Setup::Concat:
            retriever = render_concatenation({ctx.doc ? ctx.doc->render() : std::string{}, previous_turn(ctx), q});
            break;
        case Setup::Rewrite:
        case Setup::RewriteG:
            if (!services.rewrite) {
                throw Error(ErrorCode::Config, std::string("setup '") + setup_name(setup) + "' needs a rewrite service");
            }
            retriever = services.rewrite(ctx);
            break;
        case Setup::Summary:
            if (!services.summarize) {
                throw Error(ErrorCode::Config, "setup 'summary' needs a summarization service");
            }
            retriever = render_concatenation({services.summarize(ctx), q});
            break;
        case Setup::Cg:
            retriever = render_concatenation({CommonGround::render(cg.selected()), q});
            break;
        case Setup::CgFull:
            retriever = render_concatenation({CommonGround::render(cg.full()), q});
            break;
        case Setup::CgFullCg:
        case Setup::CgG:
            retriever = render_concatenation({CommonGround::render(cg.full()), q});
            reader = render_concatenation({CommonGround::render(cg.selected()), q});
            break;
    }
    if (reader.empty()) reader = retriever;
    return {setup, std::move(retriever), truncate_left(reader, options.max_reader_tokens)};
}

TextService external_rewriter(std::shared_ptr<AdapterClient> client) {
    return [client = std::move(client)](const ConversationContext& ctx) {
        auto payload = context_payload(ctx);
        payload["question"] = ctx.current_question;
        auto body = client->call_ok("rewrite", payload);
        if (!body.contains("rewrite") || !body["rewrite"].is_string()) {
            throw Error(ErrorCode::Backend, "rewrite: response payload lacks a string 'rewrite'");
        }
        return body["rewrite"].get<std::string>();
    };
}

TextService external_summarizer(std::shared_ptr<AdapterClient> client) {
    return [client = std::move(client)](const ConversationContext& ctx) {
        auto body = client->call_ok("summarize", context_payload(ctx));
        if (!body.contains("summary") || !body["summary"].is_string()) {
            throw Error(ErrorCode::Backend, "summarize: response payload lacks a string 'summary'");
        }
        return body["summary"].get<std::string>();
    };
}

}  // namespace cground
