#pragma once

// Answer and retrieval metrics, mu tuning and the benchmark runner.

#include "context_setups.hpp"
#include "core_model.hpp"
#include "pipeline.hpp"
#include "retrieval.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace cground {

struct EvalRecord {
    std::string conversation_id;
    int turn_no = 0;
    Setup setup = Setup::Original;
    std::string predicted_answer;
    std::string gold_answer;
    std::vector<std::string> ranked_passage_ids;
    std::vector<std::string> gold_passage_ids;
    double mu = 0.0;
    double fused = 0.0;
    std::string retriever_query;
    std::string reader_query;

    bool gold_missing() const noexcept { return gold_passage_ids.empty(); }
};

nlohmann::json to_json(const EvalRecord& record);

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace. Matches the SQuAD/QReCC evaluation scripts.
std::string normalize_answer(std::string_view text);

/// Token-multiset F1 on normalized text. Both empty -> 1; one empty -> 0.
double token_f1(std::string_view prediction, std::string_view gold);

/// Mean reciprocal rank of the first gold passage (0 when absent).
double mrr(const std::vector<EvalRecord>& records);

/// Fraction of records with a gold passage in the top k. Throws on k < 1.
double recall_at_k(const std::vector<EvalRecord>& records, int k);

double mean_f1(const std::vector<EvalRecord>& records);

struct MetricsReport {
    double f1 = 0.0;
    double mrr = 0.0;
    std::map<int, double> recall_at;
    int n_turns = 0;
    int n_missing_gold = 0;  // records without any gold passage, counted as misses
    double mu = 0.0;
};

MetricsReport compute_metrics(const std::vector<EvalRecord>& records, const std::vector<int>& ks = {10, 20});

/// 0.00, 0.05, ..., 1.00.
std::vector<double> default_mu_grid();

using RecordsForMu = std::function<std::vector<EvalRecord>(double mu)>;

/// Grid value with the highest mean F1; ties go to the smaller mu.
double tune_mu(const RecordsForMu& records_for_mu, std::vector<double> grid);

/// A passage is gold when its source_url equals the turn's answer_source.
/// When no passage matches by URL, passages containing the normalized gold
/// answer as a token run are gold instead.
class GoldPassageFinder {
public:
    explicit GoldPassageFinder(const Bm25Index& index);
    std::vector<std::string> find(const Turn& turn) const;

private:
    const Bm25Index& index_;
    std::unordered_map<std::string, std::vector<std::string>> by_url_;
};

struct BenchOptions {
    PipelineOptions pipeline;
    bool system_history = false;  // feed predicted answers back as history
    int threads = 0;              // 0: hardware concurrency
};

/// Runs one setup over a dataset. With gold history, retrieval and reading
/// do not depend on mu and are computed once; records(mu) then only re-fuses.
class SetupEvaluator {
public:
    SetupEvaluator(const std::vector<Conversation>& conversations, Setup setup, const Bm25Index& index,
                   const Backends& backends, BenchOptions options);
    ~SetupEvaluator();

    std::vector<EvalRecord> records(double mu);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct SetupOutcome {
    Setup setup = Setup::Original;
    std::optional<MetricsReport> report;
    std::string error;  // set when the setup could not run
    std::vector<EvalRecord> records;
};

/// Setups missing from `mu` use `default_mu`. A failing setup is reported
/// and the others still run.
std::vector<SetupOutcome> run_benchmark(const std::vector<Conversation>& conversations, const Bm25Index& index,
                                        const std::vector<Setup>& setups, const Backends& backends,
                                        const std::map<Setup, double>& mu, double default_mu,
                                        const BenchOptions& options);

/// Aligned text table: F1, MRR, R@10, R@20 scaled by 100 with 2 decimals.
std::string format_results_table(const std::vector<SetupOutcome>& outcomes);
nlohmann::json results_to_json(const std::vector<SetupOutcome>& outcomes);

/// mu files map setup names to values: {"cg": 0.35, ...}.
std::map<Setup, double> load_mu_file(const std::filesystem::path& path);
void save_mu_file(const std::map<Setup, double>& mu, const std::filesystem::path& path);

}  // namespace cground
