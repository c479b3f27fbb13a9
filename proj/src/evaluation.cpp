#include "evaluation.hpp"

#include "annotation.hpp"
#include "error.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

using json = nlohmann::json;

namespace cground {

namespace {

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> answer_tokens(std::string_view text) { return split_ws(normalize_answer(text)); }

int first_gold_rank(const EvalRecord& r) {
    for (std::size_t i = 0; i < r.ranked_passage_ids.size(); ++i) {
        if (std::find(r.gold_passage_ids.begin(), r.gold_passage_ids.end(), r.ranked_passage_ids[i]) !=
            r.gold_passage_ids.end()) {
            return static_cast<int>(i) + 1;
        }
    }
    return 0;
}

// Runs fn(i) for i in [0, n) on a small worker pool; rethrows the first failure.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mu);
                    if (!failure) failure = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

json to_json(const EvalRecord& r) {
    return {{"conversation_id", r.conversation_id},
            {"turn_no", r.turn_no},
            {"setup", setup_name(r.setup)},
            {"predicted_answer", r.predicted_answer},
            {"gold_answer", r.gold_answer},
            {"ranked_passage_ids", r.ranked_passage_ids},
            {"gold_passage_ids", r.gold_passage_ids},
            {"mu", r.mu},
            {"fused", r.fused},
            {"retriever_query", r.retriever_query},
            {"reader_query", r.reader_query}};
}

std::string normalize_answer(std::string_view text) {
    std::string lowered;
    lowered.reserve(text.size());
    for (char c : text) {
        auto uc = static_cast<unsigned char>(c);
        if (uc < 128 && std::ispunct(uc)) continue;
        lowered.push_back(static_cast<char>(std::tolower(uc)));
    }
    std::string out;
    for (auto& tok : split_ws(lowered)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

double token_f1(std::string_view prediction, std::string_view gold) {
    const auto p = answer_tokens(prediction);
    const auto g = answer_tokens(gold);
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    std::unordered_map<std::string, int> counts;
    for (const auto& t : g) ++counts[t];
    int common = 0;
    for (const auto& t : p) {
        if (auto it = counts.find(t); it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(p.size());
    const double recall = static_cast<double>(common) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

double mrr(const std::vector<EvalRecord>& records) {
    if (records.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : records) {
        if (int rank = first_gold_rank(r); rank > 0) sum += 1.0 / rank;
    }
    return sum / static_cast<double>(records.size());
}

double recall_at_k(const std::vector<EvalRecord>& records, int k) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "recall@k needs k >= 1");
    if (records.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& r : records) {
        int rank = first_gold_rank(r);
        if (rank > 0 && rank <= k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

double mean_f1(const std::vector<EvalRecord>& records) {
    if (records.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : records) sum += token_f1(r.predicted_answer, r.gold_answer);
    return sum / static_cast<double>(records.size());
}

MetricsReport compute_metrics(const std::vector<EvalRecord>& records, const std::vector<int>& ks) {
    MetricsReport m;
    m.f1 = mean_f1(records);
    m.mrr = mrr(records);
    for (int k : ks) m.recall_at[k] = recall_at_k(records, k);
    m.n_turns = static_cast<int>(records.size());
    m.n_missing_gold = static_cast<int>(
        std::count_if(records.begin(), records.end(), [](const EvalRecord& r) { return r.gold_missing(); }));
    if (!records.empty()) m.mu = records.front().mu;
    return m;
}

std::vector<double> default_mu_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
    return grid;
}

double tune_mu(const RecordsForMu& records_for_mu, std::vector<double> grid) {
    if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "mu grid is empty");
    for (double mu : grid) {
        if (!(mu >= 0.0 && mu <= 1.0)) throw Error(ErrorCode::InvalidArgument, "mu grid values must lie in [0, 1]");
    }
    std::sort(grid.begin(), grid.end());
    double best_mu = grid.front();
    double best_f1 = -1.0;
    for (double mu : grid) {
        const double f1 = mean_f1(records_for_mu(mu));
        if (f1 > best_f1) {
            best_f1 = f1;
            best_mu = mu;
        }
    }
    return best_mu;
}

GoldPassageFinder::GoldPassageFinder(const Bm25Index& index) : index_(index) {
    for (const auto& p : index.passages()) {
        if (p.source_url && !p.source_url->empty()) by_url_[*p.source_url].push_back(p.passage_id);
    }
}

std::vector<std::string> GoldPassageFinder::find(const Turn& turn) const {
    if (turn.answer_source) {
        if (auto it = by_url_.find(*turn.answer_source); it != by_url_.end()) {
            auto ids = it->second;
            std::sort(ids.begin(), ids.end());
            return ids;
        }
    }
    if (!turn.answer) return {};
    const auto needle = answer_tokens(*turn.answer);
    if (needle.empty()) return {};

    // Narrow the scan to passages holding the answer's rarest indexed term.
    const std::vector<Bm25Index::Posting>* rarest = nullptr;
    for (const auto& term : analyze(*turn.answer, index_.analyzer())) {
        const auto* list = index_.postings(term);
        if (!list) return {};
        if (!rarest || list->size() < rarest->size()) rarest = list;
    }
    std::vector<std::string> ids;
    auto check = [&](std::size_t doc) {
        const auto& p = index_.passage(doc);
        if (contains_token_run(answer_tokens(p.text), needle)) ids.push_back(p.passage_id);
    };
    if (rarest) {
        for (const auto& posting : *rarest) check(posting.doc);
    } else {
        for (std::size_t d = 0; d < index_.size(); ++d) check(d);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

struct SetupEvaluator::Impl {
    struct TurnTrace {
        std::string conversation_id;
        int turn_no = 0;
        std::string gold_answer;
        std::vector<std::string> gold_ids;
        PipelineTrace trace;
        std::string predicted;  // system-history runs only
    };

    std::vector<std::shared_ptr<const Conversation>> conversations;
    Setup setup;
    const Bm25Index& index;
    const Backends& backends;
    BenchOptions options;
    std::vector<std::vector<std::vector<std::string>>> gold_ids;  // [conversation][turn]
    std::optional<std::vector<std::vector<TurnTrace>>> cached;

    Impl(const std::vector<Conversation>& convs, Setup s, const Bm25Index& idx, const Backends& b, BenchOptions o)
        : setup(s), index(idx), backends(b), options(std::move(o)) {
        GoldPassageFinder finder(index);
        for (const auto& c : convs) {
            conversations.push_back(std::make_shared<const Conversation>(c));
            auto& per_turn = gold_ids.emplace_back();
            for (const auto& t : c.turns) per_turn.push_back(finder.find(t));
        }
    }

    std::vector<TurnTrace> run_conversation(std::size_t ci, double mu) const {
        const auto& gold = conversations[ci];
        FormulationServices services = backends.services(gold);
        if (setup == Setup::RewriteG) {
            services.rewrite = [gold](const ConversationContext& ctx) {
                return gold->turns.at(static_cast<std::size_t>(ctx.turn_index())).effective_rewrite();
            };
        }
        std::optional<CgSession> session;
        if (setup_uses_cg(setup)) {
            std::shared_ptr<const Generator> gen;
            std::shared_ptr<const Selector> sel;
            if (setup == Setup::CgG) {
                gen = std::make_shared<OracleGenerator>(gold);
                sel = std::make_shared<GoldTurnSelector>(gold);
            } else {
                gen = backends.generator(gold);
                sel = backends.selector(gold);
            }
            session.emplace(gold->doc, gen, sel, backends.config().generator_config);
        }
        const FusionOptions fusion{mu, options.pipeline.fusion.raw_scores};

        std::vector<TurnTrace> out;
        std::vector<QaPair> history;
        for (std::size_t n = 0; n < gold->turns.size(); ++n) {
            const Turn& turn = gold->turns[n];
            TurnTrace tt;
            tt.conversation_id = gold->conversation_id;
            tt.turn_no = turn.turn_no;
            tt.gold_answer = turn.answer.value_or("");
            tt.gold_ids = gold_ids[ci][n];
            auto run = [&](const ConversationContext& ctx, const CommonGround& cg) {
                auto f = formulate(setup, ctx, cg, services, options.pipeline.formulation);
                tt.trace = retrieve_and_read(f, index, *backends.reader(), options.pipeline);
                if (!options.system_history) return tt.gold_answer;
                tt.predicted = answer_from(tt.trace, fusion).text;
                return tt.predicted;
            };
            if (session) {
                session->step(turn.question, run);
            } else {
                ConversationContext ctx{gold->doc, history, turn.question};
                auto answer = run(ctx, CommonGround{});
                history.push_back({turn.question, answer});
            }
            // Turns without a gold answer shape the context but are not scored.
            if (turn.answer) out.push_back(std::move(tt));
        }
        return out;
    }

    std::vector<std::vector<TurnTrace>> run_all(double mu) const {
        std::vector<std::vector<TurnTrace>> all(conversations.size());
        parallel_for(conversations.size(), options.threads, [&](std::size_t i) { all[i] = run_conversation(i, mu); });
        return all;
    }

    std::vector<EvalRecord> records(double mu) {
        if (!(mu >= 0.0 && mu <= 1.0)) throw Error(ErrorCode::InvalidArgument, "fusion weight mu must lie in [0, 1]");
        std::vector<std::vector<TurnTrace>> fresh;
        const std::vector<std::vector<TurnTrace>>* traces = nullptr;
        if (options.system_history) {
            fresh = run_all(mu);
            traces = &fresh;
        } else {
            if (!cached) cached = run_all(mu);
            traces = &*cached;
        }
        const FusionOptions fusion{mu, options.pipeline.fusion.raw_scores};
        std::vector<EvalRecord> out;
        for (const auto& conv : *traces) {
            for (const auto& tt : conv) {
                EvalRecord r;
                r.conversation_id = tt.conversation_id;
                r.turn_no = tt.turn_no;
                r.setup = setup;
                r.gold_answer = tt.gold_answer;
                r.gold_passage_ids = tt.gold_ids;
                r.mu = mu;
                for (const auto& rp : tt.trace.ranked) r.ranked_passage_ids.push_back(rp.passage.passage_id);
                auto answer = answer_from(tt.trace, fusion);
                r.predicted_answer = answer.text;
                if (!answer.ranked_candidates.empty()) r.fused = answer.ranked_candidates.front().fused;
                r.retriever_query = tt.trace.formulation.retriever_query;
                r.reader_query = tt.trace.formulation.reader_query;
                out.push_back(std::move(r));
            }
        }
        return out;
    }
};

SetupEvaluator::SetupEvaluator(const std::vector<Conversation>& conversations, Setup setup, const Bm25Index& index,
                               const Backends& backends, BenchOptions options)
    : impl_(std::make_unique<Impl>(conversations, setup, index, backends, std::move(options))) {}

SetupEvaluator::~SetupEvaluator() = default;

std::vector<EvalRecord> SetupEvaluator::records(double mu) { return impl_->records(mu); }

std::vector<SetupOutcome> run_benchmark(const std::vector<Conversation>& conversations, const Bm25Index& index,
                                        const std::vector<Setup>& setups, const Backends& backends,
                                        const std::map<Setup, double>& mu, double default_mu,
                                        const BenchOptions& options) {
    std::vector<SetupOutcome> out;
    for (Setup s : setups) {
        SetupOutcome o;
        o.setup = s;
        try {
            auto it = mu.find(s);
            SetupEvaluator eval(conversations, s, index, backends, options);
            o.records = eval.records(it == mu.end() ? default_mu : it->second);
            o.report = compute_metrics(o.records);
        } catch (const Error& e) {
            o.error = std::string(error_code_name(e.code())) + ": " + e.what();
        }
        out.push_back(std::move(o));
    }
    return out;
}

std::string format_results_table(const std::vector<SetupOutcome>& outcomes) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %8s %8s %8s %8s %6s\n", "setup", "F1", "MRR", "R@10", "R@20", "mu");
    os << line;
    for (const auto& o : outcomes) {
        if (!o.report) {
            std::snprintf(line, sizeof line, "%-12s  error: ", setup_display_name(o.setup));
            os << line << o.error << '\n';
            continue;
        }
        const auto& m = *o.report;
        auto at = [&](int k) { return m.recall_at.count(k) ? m.recall_at.at(k) : 0.0; };
        std::snprintf(line, sizeof line, "%-12s %8s %8s %8s %8s %6s\n", setup_display_name(o.setup),
                      fixed2(100 * m.f1).c_str(), fixed2(100 * m.mrr).c_str(), fixed2(100 * at(10)).c_str(),
                      fixed2(100 * at(20)).c_str(), fixed2(m.mu).c_str());
        os << line;
    }
    return os.str();
}

json results_to_json(const std::vector<SetupOutcome>& outcomes) {
    json results = json::object();
    for (const auto& o : outcomes) {
        if (!o.report) {
            results[setup_name(o.setup)] = {{"error", o.error}};
            continue;
        }
        const auto& m = *o.report;
        json recall = json::object();
        for (const auto& [k, v] : m.recall_at) recall[std::to_string(k)] = v;
        results[setup_name(o.setup)] = {{"f1", m.f1},         {"mrr", m.mrr},
                                        {"recall_at", recall}, {"n_turns", m.n_turns},
                                        {"mu", m.mu},         {"n_missing_gold", m.n_missing_gold}};
    }
    return results;
}

std::map<Setup, double> load_mu_file(const std::filesystem::path& path) {
    std::map<Setup, double> out;
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, "mu file " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::Parse, "mu file " + path.string() + " must hold a JSON object");
    for (const auto& [name, value] : j.items()) {
        auto s = setup_from_name(name);
        if (!s) throw Error(ErrorCode::Parse, "mu file: unknown setup '" + name + "'");
        if (!value.is_number()) throw Error(ErrorCode::Parse, "mu file: value for '" + name + "' is not a number");
        const double mu = value.get<double>();
        if (!(mu >= 0.0 && mu <= 1.0)) throw Error(ErrorCode::InvalidArgument, "mu file: '" + name + "' outside [0, 1]");
        out[*s] = mu;
    }
    return out;
}

void save_mu_file(const std::map<Setup, double>& mu, const std::filesystem::path& path) {
    json j = json::object();
    for (const auto& [s, v] : mu) j[setup_name(s)] = v;
    write_file(path, j.dump(2) + "\n");
}

}  // namespace cground
