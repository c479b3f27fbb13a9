#include "pipeline.hpp"

#include "error.hpp"

#include <future>

using json = nlohmann::json;

namespace cground {

namespace {

const char* const kRoles[] = {"annotator", "generator", "selector", "reader", "rewriter", "summarizer"};

void expect_one_of(const std::string& role, const std::string& value, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed) {
        if (value == a) return;
    }
    std::string list;
    for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
    throw Error(ErrorCode::Config, role + " backend '" + value + "' is not one of: " + list);
}

std::shared_ptr<const Conversation> require_gold(const std::shared_ptr<const Conversation>& gold, const char* role) {
    if (!gold) {
        throw Error(ErrorCode::Config, std::string("oracle ") + role + " needs gold annotations; none available here");
    }
    return gold;
}

}  // namespace

BackendConfig BackendConfig::from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "backend config must be a JSON object");
    BackendConfig c;
    try {
        for (const char* role : kRoles) {
            if (j.contains(role)) {
                std::string value = j.at(role).get<std::string>();
                if (std::string_view(role) == "annotator") c.annotator = value;
                else if (std::string_view(role) == "generator") c.generator = value;
                else if (std::string_view(role) == "selector") c.selector = value;
                else if (std::string_view(role) == "reader") c.reader = value;
                else if (std::string_view(role) == "rewriter") c.rewriter = value;
                else c.summarizer = value;
            }
        }
        c.include_determiners = j.value("include_determiners", c.include_determiners);
        if (j.contains("generator_config")) {
            const auto& g = j.at("generator_config");
            c.generator_config.use_doc = g.value("use_doc", c.generator_config.use_doc);
            c.generator_config.use_conv = g.value("use_conv", c.generator_config.use_conv);
            c.generator_config.include_current_question =
                g.value("include_current_question", c.generator_config.include_current_question);
        }
        if (j.contains("adapters")) {
            for (const auto& [role, endpoint] : j.at("adapters").items()) {
                c.adapters[role] = EndpointConfig::from_json(endpoint);
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, std::string("backend config: ") + e.what());
    }
    c.validate();
    return c;
}

json BackendConfig::to_json() const {
    json adapters_json = json::object();
    for (const auto& [role, e] : adapters) {
        json ej = {{"timeout_ms", e.timeout.count()}, {"max_in_flight", e.max_in_flight}};
        if (!e.command.empty()) ej["command"] = e.command;
        if (!e.url.empty()) ej["url"] = e.url;
        if (!e.echo_fixtures.empty()) ej["echo_fixtures"] = e.echo_fixtures;
        adapters_json[role] = ej;
    }
    return {{"annotator", annotator},
            {"generator", generator},
            {"selector", selector},
            {"reader", reader},
            {"rewriter", rewriter},
            {"summarizer", summarizer},
            {"include_determiners", include_determiners},
            {"generator_config",
             {{"use_doc", generator_config.use_doc},
              {"use_conv", generator_config.use_conv},
              {"include_current_question", generator_config.include_current_question}}},
            {"adapters", adapters_json}};
}

void BackendConfig::validate() const {
    expect_one_of("annotator", annotator, {"reference", "external"});
    expect_one_of("generator", generator, {"oracle", "rule", "external"});
    expect_one_of("selector", selector, {"oracle", "rule", "external"});
    expect_one_of("reader", reader, {"lexical", "external"});
    expect_one_of("rewriter", rewriter, {"none", "oracle", "external"});
    expect_one_of("summarizer", summarizer, {"none", "fallback", "external"});
    generator_config.validate();
    const std::pair<const char*, const std::string*> roles[] = {{"annotator", &annotator}, {"generator", &generator},
                                                                {"selector", &selector},   {"reader", &reader},
                                                                {"rewriter", &rewriter},   {"summarizer", &summarizer}};
    for (const auto& [role, value] : roles) {
        if (*value == "external" && !adapters.count(role)) {
            throw Error(ErrorCode::Config, std::string("external ") + role + " needs adapters." + role);
        }
    }
}

Backends::Backends(BackendConfig config) : config_(std::move(config)) {
    config_.validate();
    for (const auto& [role, endpoint] : config_.adapters) clients_[role] = make_adapter_client(endpoint);
    ChunkPolicy policy{config_.include_determiners};
    annotator_ = std::shared_ptr<const Annotator>(
        make_annotator(config_.annotator, config_.annotator == "external" ? client("annotator") : nullptr, policy));
    if (config_.reader == "external") {
        reader_ = std::make_shared<ExternalReader>(client("reader"));
    } else {
        reader_ = std::make_shared<LexicalReader>(annotator_);
    }
}

std::shared_ptr<AdapterClient> Backends::client(const std::string& role) const {
    auto it = clients_.find(role);
    if (it == clients_.end()) throw Error(ErrorCode::Config, "no adapter configured for " + role);
    return it->second;
}

std::shared_ptr<const Generator> Backends::generator(std::shared_ptr<const Conversation> gold) const {
    if (config_.generator == "oracle") return std::make_shared<OracleGenerator>(require_gold(gold, "generator"));
    if (config_.generator == "external") return std::make_shared<ExternalGenerator>(client("generator"));
    return std::make_shared<RuleGenerator>(annotator_);
}

std::shared_ptr<const Selector> Backends::selector(std::shared_ptr<const Conversation> gold) const {
    if (config_.selector == "oracle") return std::make_shared<OracleSelector>(require_gold(gold, "selector"));
    if (config_.selector == "external") return std::make_shared<ExternalSelector>(client("selector"));
    return std::make_shared<RuleSelector>();
}

FormulationServices Backends::services(std::shared_ptr<const Conversation> gold) const {
    FormulationServices s;
    if (config_.rewriter == "oracle") {
        auto conv = require_gold(gold, "rewriter");
        s.rewrite = [conv](const ConversationContext& ctx) {
            const auto n = static_cast<std::size_t>(ctx.turn_index());
            if (n >= conv->turns.size()) throw Error(ErrorCode::InvalidArgument, "oracle rewriter: turn out of range");
            return conv->turns[n].effective_rewrite();
        };
    } else if (config_.rewriter == "external") {
        s.rewrite = external_rewriter(client("rewriter"));
    }
    if (config_.summarizer == "fallback") {
        s.summarize = fallback_summary;
    } else if (config_.summarizer == "external") {
        s.summarize = external_summarizer(client("summarizer"));
    }
    return s;
}

PipelineTrace retrieve_and_read(const QueryFormulation& formulation, const Bm25Index& index,
                                const PassageReader& reader, const PipelineOptions& options) {
    PipelineTrace trace;
    trace.formulation = formulation;
    trace.ranked = index.search(formulation.retriever_query, options.bm25);

    // Remote readers are latency bound; their passages are read concurrently.
    const auto policy = dynamic_cast<const ExternalReader*>(&reader) ? std::launch::async : std::launch::deferred;
    std::vector<std::future<std::vector<AnswerCandidate>>> reads;
    reads.reserve(trace.ranked.size());
    for (const auto& rp : trace.ranked) {
        reads.push_back(std::async(policy, [&reader, &rp, &formulation] {
            return reader.read(rp.passage, formulation.reader_query);
        }));
    }
    for (std::size_t i = 0; i < reads.size(); ++i) {
        for (auto& c : reads[i].get()) trace.candidates.emplace_back(trace.ranked[i], std::move(c));
    }
    return trace;
}

PipelineAnswer answer_from(const PipelineTrace& trace, const FusionOptions& fusion) {
    PipelineAnswer out;
    out.ranked_candidates = fuse(trace.candidates, fusion);
    if (!out.ranked_candidates.empty()) out.text = out.ranked_candidates.front().text;
    return out;
}

}  // namespace cground
