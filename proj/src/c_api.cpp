#include "cground/cground.h"

#include "adapter.hpp"
#include "annotation.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "gold_cg.hpp"
#include "retrieval.hpp"
#include "service.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <new>
#include <string>

#include <json.hpp>

using json = nlohmann::json;
using namespace cground;

struct cg_index {
    std::shared_ptr<const Bm25Index> index;
};

struct cg_service {
    std::shared_ptr<const Bm25Index> index;
    std::unique_ptr<SessionManager> sessions;
    std::mutex http_mu;
    HttpService* http = nullptr;  // set while cg_service_serve runs
};

namespace {

thread_local std::string t_last_error;

cg_status status_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return CG_ERR_INVALID_ARGUMENT;
        case ErrorCode::Parse: return CG_ERR_PARSE;
        case ErrorCode::Integrity: return CG_ERR_INTEGRITY;
        case ErrorCode::Io: return CG_ERR_IO;
        case ErrorCode::NotFound: return CG_ERR_NOT_FOUND;
        case ErrorCode::Config: return CG_ERR_CONFIG;
        case ErrorCode::Backend: return CG_ERR_BACKEND;
        case ErrorCode::Timeout: return CG_ERR_TIMEOUT;
    }
    return CG_ERR_INTERNAL;
}

template <typename Fn>
cg_status try_(Fn&& fn) {
    t_last_error.clear();
    try {
        fn();
        return CG_OK;
    } catch (const Error& e) {
        t_last_error = e.what();
        return status_of(e.code());
    } catch (const json::exception& e) {
        t_last_error = e.what();
        return CG_ERR_PARSE;
    } catch (const std::bad_alloc&) {
        t_last_error = "out of memory";
        return CG_ERR_INTERNAL;
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return CG_ERR_INTERNAL;
    } catch (...) {
        t_last_error = "unknown failure";
        return CG_ERR_INTERNAL;
    }
}

template <typename T>
T& deref(T* p, const char* what) {
    if (!p) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
    return *p;
}

std::string arg(const char* s, const char* what) { return std::string(&deref(s, what)); }

void put_string(char** out, const std::string& s) {
    char* buf = static_cast<char*>(std::malloc(s.size() + 1));
    if (!buf) throw std::bad_alloc();
    std::memcpy(buf, s.c_str(), s.size() + 1);
    *out = buf;
}

json parse_json_arg(const char* text, const char* what) {
    if (!text) return json::object();
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string(what) + ": " + e.what());
    }
}

Bm25Params bm25_from(const json& j) {
    Bm25Params p;
    if (j.is_object()) {
        p.k1 = j.value("k1", p.k1);
        p.b = j.value("b", p.b);
        p.top_n = j.value("top_n", p.top_n);
    }
    p.validate();
    return p;
}

struct BenchInputs {
    std::vector<Conversation> conversations;
    std::shared_ptr<const Bm25Index> index;
    std::unique_ptr<Backends> backends;
    BenchOptions options;
};

BenchInputs bench_inputs(const json& req, const char* dataset_key) {
    if (!req.is_object()) throw Error(ErrorCode::InvalidArgument, "request must be a JSON object");
    BenchInputs in;
    if (!req.contains(dataset_key)) throw Error(ErrorCode::InvalidArgument, std::string("missing '") + dataset_key + "'");
    if (!req.contains("index")) throw Error(ErrorCode::InvalidArgument, "missing 'index'");
    in.conversations = load_dataset(req.at(dataset_key).get<std::string>());
    in.index = std::make_shared<const Bm25Index>(Bm25Index::load(req.at("index").get<std::string>()));
    in.backends = std::make_unique<Backends>(BackendConfig::from_json(req.value("backends", json::object())));
    in.options.pipeline.bm25 = bm25_from(req.value("bm25", json::object()));
    in.options.pipeline.fusion.raw_scores = req.value("fusion_raw", false);
    in.options.pipeline.formulation.max_reader_tokens = req.value("max_reader_tokens", 384);
    const auto history = req.value("history", std::string("gold"));
    if (history != "gold" && history != "system") {
        throw Error(ErrorCode::InvalidArgument, "history must be 'gold' or 'system'");
    }
    in.options.system_history = history == "system";
    in.options.threads = req.value("threads", 0);
    return in;
}

Setup setup_arg(const std::string& name) {
    auto s = setup_from_name(name);
    if (!s) throw Error(ErrorCode::InvalidArgument, "unknown setup '" + name + "'");
    return *s;
}

}  // namespace

extern "C" {

const char* cg_version(void) { return "1.0.0"; }

const char* cg_status_string(cg_status status) {
    switch (status) {
        case CG_OK: return "ok";
        case CG_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case CG_ERR_PARSE: return "parse_error";
        case CG_ERR_INTEGRITY: return "integrity_error";
        case CG_ERR_IO: return "io_error";
        case CG_ERR_NOT_FOUND: return "not_found";
        case CG_ERR_CONFIG: return "config_error";
        case CG_ERR_BACKEND: return "backend_error";
        case CG_ERR_TIMEOUT: return "timeout";
        case CG_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* cg_last_error(void) { return t_last_error.c_str(); }

void cg_string_free(char* s) { std::free(s); }

cg_status cg_build_gold_cg(const char* in_path, const char* doc_source_path, const char* out_path,
                           const char* backends_json, char** report_json) {
    return try_([&] {
        auto in = arg(in_path, "in_path");
        auto out = arg(out_path, "out_path");
        Backends backends(BackendConfig::from_json(parse_json_arg(backends_json, "backends_json")));
        auto conversations = load_dataset(in);
        if (doc_source_path) {
            auto docs = load_doc_source(doc_source_path);
            for (auto& c : conversations) c = enrich_with_doc(std::move(c), docs);
        }
        std::size_t turns = 0;
        for (auto& c : conversations) {
            c = build_gold_cg(std::move(c), *backends.annotator());
            turns += c.turns.size();
        }
        save_dataset(conversations, out);
        if (report_json) {
            put_string(report_json, json{{"conversations", conversations.size()},
                                         {"turns", turns},
                                         {"doc_coverage", enrichment_coverage(conversations)},
                                         {"out", out}}
                                        .dump());
        }
    });
}

cg_status cg_build_selector_data(const char* in_path, const char* out_path, char** report_json) {
    return try_([&] {
        auto conversations = load_dataset(arg(in_path, "in_path"));
        auto out = arg(out_path, "out_path");
        std::vector<SelectorExample> all;
        json warnings = json::array();
        for (const auto& c : conversations) {
            auto ex = build_selector_examples(c);
            for (auto& e : ex.examples) all.push_back(std::move(e));
            for (auto& w : ex.warnings) warnings.push_back(std::move(w));
        }
        write_file(out, serialize_selector_examples(all));
        std::size_t positives = 0;
        for (const auto& e : all) positives += e.label == 1;
        if (report_json) {
            put_string(report_json,
                       json{{"examples", all.size()}, {"positives", positives}, {"warnings", warnings}, {"out", out}}
                           .dump());
        }
    });
}

cg_status cg_split(const char* in_path, double fraction, uint64_t seed, const char* train_out,
                   const char* validation_out, char** report_json) {
    return try_([&] {
        auto conversations = load_dataset(arg(in_path, "in_path"));
        auto train_path = arg(train_out, "train_out");
        auto validation_path = arg(validation_out, "validation_out");
        auto [train, validation] = split_train_validation(conversations, fraction, seed);
        save_dataset(train, train_path);
        save_dataset(validation, validation_path);
        if (report_json) {
            json ids = json::array();
            for (const auto& c : validation) ids.push_back(c.conversation_id);
            put_string(report_json, json{{"train", train.size()},
                                         {"validation", validation.size()},
                                         {"validation_ids", ids},
                                         {"seed", seed},
                                         {"fraction", fraction}}
                                        .dump());
        }
    });
}

cg_status cg_index_build(const char* collection_path, const char* options_json, cg_index** out) {
    return try_([&] {
        auto& slot = deref(out, "out");
        auto opts = parse_json_arg(options_json, "options_json");
        AnalyzerOptions analyzer;
        analyzer.stem = opts.value("stem", false);
        analyzer.remove_stopwords = opts.value("remove_stopwords", false);
        auto passages = load_passages(arg(collection_path, "collection_path"));
        slot = new cg_index{std::make_shared<const Bm25Index>(Bm25Index::build(std::move(passages), analyzer))};
    });
}

cg_status cg_index_load(const char* path, cg_index** out) {
    return try_([&] {
        auto& slot = deref(out, "out");
        slot = new cg_index{std::make_shared<const Bm25Index>(Bm25Index::load(arg(path, "path")))};
    });
}

cg_status cg_index_save(const cg_index* index, const char* path) {
    return try_([&] { deref(index, "index").index->save(arg(path, "path")); });
}

cg_status cg_index_stats(const cg_index* index, char** stats_json) {
    return try_([&] {
        const auto& idx = *deref(index, "index").index;
        put_string(&deref(stats_json, "stats_json"), json{{"passages", idx.size()},
                                                          {"terms", idx.term_count()},
                                                          {"avg_doc_len", idx.avg_doc_len()},
                                                          {"stem", idx.analyzer().stem},
                                                          {"remove_stopwords", idx.analyzer().remove_stopwords}}
                                                         .dump());
    });
}

cg_status cg_index_search(const cg_index* index, const char* query, const char* params_json, char** results_json) {
    return try_([&] {
        const auto& idx = *deref(index, "index").index;
        auto params = bm25_from(parse_json_arg(params_json, "params_json"));
        json results = json::array();
        for (const auto& rp : idx.search(arg(query, "query"), params)) {
            results.push_back({{"passage_id", rp.passage.passage_id},
                               {"rank", rp.rank},
                               {"s_ret", rp.s_ret},
                               {"s_ret_norm", rp.s_ret_norm}});
        }
        put_string(&deref(results_json, "results_json"), results.dump());
    });
}

void cg_index_free(cg_index* index) { delete index; }

cg_status cg_bench(const char* request_json, char** report_json) {
    return try_([&] {
        auto req = parse_json_arg(&deref(request_json, "request_json"), "request_json");
        auto in = bench_inputs(req, "dataset");
        std::vector<Setup> setups;
        if (req.contains("setups")) {
            for (const auto& s : req.at("setups")) setups.push_back(setup_arg(s.get<std::string>()));
        } else {
            setups = all_setups();
        }
        if (setups.empty()) throw Error(ErrorCode::InvalidArgument, "no setups requested");
        std::map<Setup, double> mu;
        if (req.contains("mu_file")) mu = load_mu_file(req.at("mu_file").get<std::string>());
        if (req.contains("mu")) {
            for (const auto& [name, v] : req.at("mu").items()) mu[setup_arg(name)] = v.get<double>();
        }
        const double default_mu = req.value("default_mu", 0.5);
        auto outcomes = run_benchmark(in.conversations, *in.index, setups, *in.backends, mu, default_mu, in.options);
        if (req.contains("emit_records")) {
            std::string lines;
            for (const auto& o : outcomes) {
                for (const auto& r : o.records) lines += to_json(r).dump() + "\n";
            }
            write_file(req.at("emit_records").get<std::string>(), lines);
        }
        json report = {{"results", results_to_json(outcomes)}, {"table", format_results_table(outcomes)}};
        if (req.contains("out")) write_file(req.at("out").get<std::string>(), report.dump(2) + "\n");
        if (report_json) put_string(report_json, report.dump());
    });
}

cg_status cg_tune_mu(const char* request_json, char** result_json) {
    return try_([&] {
        auto req = parse_json_arg(&deref(request_json, "request_json"), "request_json");
        auto in = bench_inputs(req, "validation");
        if (!req.contains("setup")) throw Error(ErrorCode::InvalidArgument, "missing 'setup'");
        const Setup setup = setup_arg(req.at("setup").get<std::string>());
        auto grid = req.contains("grid") ? req.at("grid").get<std::vector<double>>() : default_mu_grid();
        SetupEvaluator eval(in.conversations, setup, *in.index, *in.backends, in.options);
        json f1_by_mu = json::array();
        const double best = tune_mu(
            [&](double mu) {
                auto records = eval.records(mu);
                f1_by_mu.push_back({{"mu", mu}, {"f1", mean_f1(records)}});
                return records;
            },
            grid);
        if (req.contains("mu_file")) {
            const std::filesystem::path path = req.at("mu_file").get<std::string>();
            std::map<Setup, double> mu;
            if (std::filesystem::exists(path)) mu = load_mu_file(path);
            mu[setup] = best;
            save_mu_file(mu, path);
        }
        if (result_json) {
            put_string(result_json, json{{"setup", setup_name(setup)}, {"mu", best}, {"f1_by_mu", f1_by_mu}}.dump());
        }
    });
}

cg_status cg_service_create(const char* config_json, const cg_index* index, cg_service** out) {
    return try_([&] {
        auto& slot = deref(out, "out");
        auto config = ServiceConfig::from_json(parse_json_arg(config_json, "config_json"));
        config.apply_env();
        config.validate();
        std::shared_ptr<const Bm25Index> idx;
        if (index) {
            idx = index->index;
        } else {
            if (config.index_path.empty()) throw Error(ErrorCode::Config, "service config names no index");
            idx = std::make_shared<const Bm25Index>(Bm25Index::load(config.index_path));
        }
        auto svc = std::make_unique<cg_service>();
        svc->index = idx;
        svc->sessions = std::make_unique<SessionManager>(std::move(config), idx);
        slot = svc.release();
    });
}

cg_status cg_service_open_session(cg_service* service, const char* body_json, char** session_id) {
    return try_([&] {
        auto& svc = deref(service, "service");
        auto& out = deref(session_id, "session_id");
        auto body = parse_json_arg(body_json, "body_json");
        if (!body.is_object()) throw Error(ErrorCode::InvalidArgument, "session body must be a JSON object");
        std::optional<DocumentContext> doc;
        if (body.contains("doc_title") || body.contains("doc_first_sentence")) {
            doc = DocumentContext{body.value("doc_title", std::string{}), body.value("doc_first_sentence", std::string{})};
        }
        put_string(&out, svc.sessions->create(std::move(doc)));
    });
}

cg_status cg_service_ask(cg_service* service, const char* session_id, const char* question, char** response_json) {
    return try_([&] {
        auto& svc = deref(service, "service");
        auto response = svc.sessions->ask(arg(session_id, "session_id"), arg(question, "question"));
        put_string(&deref(response_json, "response_json"), response.dump());
    });
}

cg_status cg_service_get_session(cg_service* service, const char* session_id, char** transcript_json) {
    return try_([&] {
        auto& svc = deref(service, "service");
        auto t = svc.sessions->transcript(arg(session_id, "session_id"));
        put_string(&deref(transcript_json, "transcript_json"), t.dump());
    });
}

cg_status cg_service_close_session(cg_service* service, const char* session_id) {
    return try_([&] { deref(service, "service").sessions->remove(arg(session_id, "session_id")); });
}

cg_status cg_service_expire_idle(cg_service* service, size_t* expired) {
    return try_([&] {
        auto n = deref(service, "service").sessions->expire_idle();
        if (expired) *expired = n;
    });
}

cg_status cg_service_serve(cg_service* service, const char* host, int port) {
    return try_([&] {
        auto& svc = deref(service, "service");
        const auto& config = svc.sessions->config();
        HttpService http(*svc.sessions);
        {
            std::lock_guard lock(svc.http_mu);
            if (svc.http) throw Error(ErrorCode::InvalidArgument, "service is already serving");
            svc.http = &http;
        }
        const std::string h = host ? host : config.host;
        const int p = port >= 0 ? port : config.port;
        const bool ok = http.listen(h, p);
        {
            std::lock_guard lock(svc.http_mu);
            svc.http = nullptr;
        }
        if (!ok) throw Error(ErrorCode::Io, "cannot listen on " + h + ":" + std::to_string(p));
    });
}

cg_status cg_service_stop(cg_service* service) {
    return try_([&] {
        auto& svc = deref(service, "service");
        std::lock_guard lock(svc.http_mu);
        if (svc.http) svc.http->stop();
    });
}

void cg_service_free(cg_service* service) { delete service; }

cg_status cg_adapter_call(const char* endpoint_json, const char* request_line, char** response_line) {
    return try_([&] {
        auto endpoint = EndpointConfig::from_json(parse_json_arg(&deref(endpoint_json, "endpoint_json"), "endpoint_json"));
        auto request = parse_request(arg(request_line, "request_line"));
        auto client = make_adapter_client(endpoint);
        put_string(&deref(response_line, "response_line"), serialize_response(client->call(request)));
    });
}

cg_status cg_adapter_echo_serve_stdio(const char* fixtures_path) {
    return try_([&] {
        auto backend = EchoBackend::from_file(arg(fixtures_path, "fixtures_path"));
        std::ios::sync_with_stdio(false);
        serve_stdio(backend, std::cin, std::cout);
    });
}

}  // extern "C"
