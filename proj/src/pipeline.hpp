#pragma once

// One retriever-reader pass for a formulated query, plus the backend
// configuration shared by the benchmark and the live session service.

#include "adapter.hpp"
#include "annotation.hpp"
#include "cg_engine.hpp"
#include "context_setups.hpp"
#include "reading.hpp"
#include "retrieval.hpp"

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cground {

/// Backend names and adapter endpoints. JSON shape:
/// {"annotator": "reference", "generator": "rule", "selector": "rule",
///  "reader": "lexical", "rewriter": "none", "summarizer": "fallback",
///  "include_determiners": true, "generator_config": {...},
///  "adapters": {"generator": {endpoint}, ...}}
struct BackendConfig {
    std::string annotator = "reference";  // reference | external
    std::string generator = "rule";       // oracle | rule | external
    std::string selector = "rule";        // oracle | rule | external
    std::string reader = "lexical";       // lexical | external
    std::string rewriter = "none";        // none | oracle | external
    std::string summarizer = "fallback";  // none | fallback | external
    bool include_determiners = true;
    GeneratorConfig generator_config;
    std::map<std::string, EndpointConfig> adapters;

    static BackendConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

/// Instantiated backends. Oracle generator/selector/rewriter are bound per
/// conversation because they replay its gold annotations.
class Backends {
public:
    explicit Backends(BackendConfig config);

    const BackendConfig& config() const noexcept { return config_; }
    std::shared_ptr<const Annotator> annotator() const { return annotator_; }
    std::shared_ptr<const PassageReader> reader() const { return reader_; }

    /// `gold` may be null for live sessions; oracle backends then raise Error(Config).
    std::shared_ptr<const Generator> generator(std::shared_ptr<const Conversation> gold) const;
    std::shared_ptr<const Selector> selector(std::shared_ptr<const Conversation> gold) const;
    FormulationServices services(std::shared_ptr<const Conversation> gold) const;

private:
    std::shared_ptr<AdapterClient> client(const std::string& role) const;

    BackendConfig config_;
    std::shared_ptr<const Annotator> annotator_;
    std::shared_ptr<const PassageReader> reader_;
    std::map<std::string, std::shared_ptr<AdapterClient>> clients_;
};

struct PipelineOptions {
    Bm25Params bm25;
    FusionOptions fusion;
    FormulationOptions formulation;
};

/// Retrieval and reading results for one query; fusion is applied separately
/// so that mu can be varied without re-running either stage.
struct PipelineTrace {
    QueryFormulation formulation;
    std::vector<RankedPassage> ranked;
    std::vector<std::pair<RankedPassage, AnswerCandidate>> candidates;
};

PipelineTrace retrieve_and_read(const QueryFormulation& formulation, const Bm25Index& index,
                                const PassageReader& reader, const PipelineOptions& options);

struct PipelineAnswer {
    std::string text;  // empty when no passage yields a span
    std::vector<AnswerCandidate> ranked_candidates;
};

PipelineAnswer answer_from(const PipelineTrace& trace, const FusionOptions& fusion);

}  // namespace cground
