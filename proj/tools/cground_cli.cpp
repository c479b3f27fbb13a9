// cground: command-line front end over the C API.

#include "cground/cground.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>
#include <unistd.h>

using json = nlohmann::json;

namespace {

struct CliFailure {
    cg_status status;
    std::string message;
};

void check(cg_status status) {
    if (status != CG_OK) throw CliFailure{status, cg_last_error()};
}

std::string take(char* s) {
    std::unique_ptr<char, decltype(&cg_string_free)> owned(s, cg_string_free);
    return s ? std::string(s) : std::string{};
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CliFailure{CG_ERR_IO, "cannot open " + path};
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw CliFailure{CG_ERR_PARSE, path + ": " + e.what()};
    }
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Backend selection shared by bench, tune-mu, chat and serve.
struct BackendFlags {
    std::string config;
    std::string annotator, generator, selector, reader, rewriter, summarizer;
    bool no_determiners = false;

    void add_to(CLI::App* app, bool with_services) {
        app->add_option("--config", config, "JSON file with backend/service settings");
        app->add_option("--annotator", annotator, "reference | external");
        app->add_option("--generator", generator, "oracle | rule | external");
        app->add_option("--selector", selector, "oracle | rule | external");
        app->add_option("--reader", reader, "lexical | external");
        if (with_services) {
            app->add_option("--rewriter", rewriter, "none | oracle | external");
            app->add_option("--summarizer", summarizer, "none | fallback | external");
        }
        app->add_flag("--no-determiners", no_determiners, "drop leading determiners from propositions");
    }

    json resolve() const {
        json j = config.empty() ? json::object() : read_json_file(config);
        auto set = [&](const char* key, const std::string& v) {
            if (!v.empty()) j[key] = v;
        };
        set("annotator", annotator);
        set("generator", generator);
        set("selector", selector);
        set("reader", reader);
        set("rewriter", rewriter);
        set("summarizer", summarizer);
        if (no_determiners) j["include_determiners"] = false;
        return j;
    }
};

void print_cg_line(const json& response, bool color) {
    std::cout << "cg:";
    for (const auto& e : response.at("cg").at("entries")) {
        const bool selected = e.at("status") == "selected";
        const std::string surface = e.at("surface").get<std::string>();
        if (selected) {
            std::cout << "  [x] " << surface;
        } else if (color) {
            std::cout << "  \033[2m[ ] " << surface << "\033[0m";
        } else {
            std::cout << "  [ ] " << surface;
        }
    }
    std::cout << '\n';
}

int run_chat(const json& config, const std::string& doc_title, const std::string& doc_sentence) {
    cg_service* svc = nullptr;
    check(cg_service_create(config.dump().c_str(), nullptr, &svc));
    std::unique_ptr<cg_service, decltype(&cg_service_free)> guard(svc, cg_service_free);
    json body = json::object();
    if (!doc_title.empty()) body["doc_title"] = doc_title;
    if (!doc_sentence.empty()) body["doc_first_sentence"] = doc_sentence;
    char* raw_id = nullptr;
    check(cg_service_open_session(svc, body.dump().c_str(), &raw_id));
    const std::string session = take(raw_id);

    const bool interactive = isatty(STDIN_FILENO) != 0;
    const bool color = isatty(STDOUT_FILENO) != 0;
    std::string line;
    for (;;) {
        if (interactive) std::cout << "> " << std::flush;
        if (!std::getline(std::cin, line)) break;
        if (line == ":quit" || line == ":q") break;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        char* raw = nullptr;
        const cg_status st = cg_service_ask(svc, session.c_str(), line.c_str(), &raw);
        if (st != CG_OK) {
            std::cout << "error: " << cg_status_string(st) << ": " << cg_last_error() << '\n';
            continue;
        }
        const json response = json::parse(take(raw));
        const auto answer = response.at("answer").get<std::string>();
        std::cout << "answer: " << (answer.empty() ? "(no answer found)" : answer) << '\n';
        print_cg_line(response, color);
    }
    return 0;
}

int run_serve(const json& config, const std::string& host, int port) {
    // Signals are handled on a dedicated thread so that stopping the server
    // happens outside signal context.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    cg_service* svc = nullptr;
    check(cg_service_create(config.dump().c_str(), nullptr, &svc));
    std::unique_ptr<cg_service, decltype(&cg_service_free)> guard(svc, cg_service_free);
    std::thread waiter([svc, set] {
        int sig = 0;
        sigwait(&set, &sig);
        cg_service_stop(svc);
    });
    std::cerr << "serving on " << (host.empty() ? std::string("configured host") : host) << ":"
              << (port >= 0 ? std::to_string(port) : std::string("configured port")) << '\n';
    const cg_status st = cg_service_serve(svc, host.empty() ? nullptr : host.c_str(), port);
    if (st != CG_OK) {
        const std::string msg = cg_last_error();
        pthread_kill(waiter.native_handle(), SIGTERM);
        waiter.join();
        throw CliFailure{st, msg};
    }
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Common-ground conversational QA toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cg_version()));

    // build-gold-cg
    std::string gold_in, gold_docs, gold_out;
    BackendFlags gold_flags;
    auto* gold = app.add_subcommand("build-gold-cg", "Attach gold propositions (and docs) to every turn");
    gold->add_option("--in", gold_in, "canonical dataset (JSON-lines)")->required();
    gold->add_option("--doc-source", gold_docs, "JSON-lines: conversation_id, doc_title, doc_first_sentence");
    gold->add_option("--out", gold_out, "enriched dataset")->required();
    gold->add_option("--annotator", gold_flags.annotator, "reference | external");
    gold->add_option("--config", gold_flags.config, "JSON file with annotator settings");
    gold->add_flag("--no-determiners", gold_flags.no_determiners, "drop leading determiners");

    // build-selector-data
    std::string sel_in, sel_out;
    auto* sel = app.add_subcommand("build-selector-data", "Derive selector training labels");
    sel->add_option("--in", sel_in, "enriched dataset")->required();
    sel->add_option("--out", sel_out, "selector examples (JSON-lines)")->required();

    // split
    std::string split_in, split_train, split_val;
    double split_fraction = 0.2;
    std::uint64_t split_seed = 42;
    auto* split = app.add_subcommand("split", "Split conversations into train and validation");
    split->add_option("--in", split_in, "dataset")->required();
    split->add_option("--fraction", split_fraction, "validation fraction")->capture_default_str();
    split->add_option("--seed", split_seed, "shuffle seed")->capture_default_str();
    split->add_option("--train-out", split_train, "default: <in>.train.jsonl");
    split->add_option("--validation-out", split_val, "default: <in>.validation.jsonl");

    // index
    std::string idx_collection, idx_out;
    bool idx_stem = false, idx_stop = false;
    auto* index = app.add_subcommand("index", "Build and persist a BM25 index");
    index->add_option("--collection", idx_collection, "passages (JSON-lines)")->required();
    index->add_option("--out", idx_out, "index file")->required();
    index->add_flag("--stem", idx_stem, "Porter stemming");
    index->add_flag("--stopwords", idx_stop, "remove stopwords");

    // search
    std::string search_index, search_query;
    int search_top = 20;
    auto* search = app.add_subcommand("search", "Query a persisted index");
    search->add_option("--index", search_index, "index file")->required();
    search->add_option("--query", search_query, "query text")->required();
    search->add_option("--top-n", search_top, "results")->capture_default_str();

    // bench / tune-mu share the pipeline flags
    struct PipelineFlags {
        std::string index, history = "gold", emit_records;
        bool fusion_raw = false;
        int max_reader_tokens = 384, threads = 0;
        double k1 = 0.82, b = 0.68;
        int top_n = 20;
        BackendFlags backends;
        void add_to(CLI::App* app) {
            app->add_option("--index", index, "index file")->required();
            app->add_option("--history", history, "gold | system answers in the history")->capture_default_str();
            app->add_flag("--fusion-raw", fusion_raw, "fuse raw instead of min-max normalized scores");
            app->add_option("--max-reader-tokens", max_reader_tokens, "reader input budget")->capture_default_str();
            app->add_option("--threads", threads, "worker threads (0: all cores)");
            app->add_option("--k1", k1, "BM25 k1")->capture_default_str();
            app->add_option("--b", b, "BM25 b")->capture_default_str();
            app->add_option("--top-n", top_n, "passages retrieved")->capture_default_str();
            backends.add_to(app, true);
        }
        json request() const {
            json r = {{"index", index},
                      {"history", history},
                      {"fusion_raw", fusion_raw},
                      {"max_reader_tokens", max_reader_tokens},
                      {"threads", threads},
                      {"bm25", {{"k1", k1}, {"b", b}, {"top_n", top_n}}},
                      {"backends", backends.resolve()}};
            if (!emit_records.empty()) r["emit_records"] = emit_records;
            return r;
        }
    };

    PipelineFlags bench_flags;
    std::string bench_dataset, bench_setups, bench_mu_file, bench_out;
    double bench_default_mu = 0.5;
    bool bench_json = false;
    auto* bench = app.add_subcommand("bench", "Evaluate setups and print a results table");
    bench->add_option("--dataset", bench_dataset, "evaluation dataset")->required();
    bench->add_option("--setups", bench_setups, "comma-separated setups (default: all)");
    bench->add_option("--mu-file", bench_mu_file, "tuned mu per setup");
    bench->add_option("--default-mu", bench_default_mu, "mu for setups missing from the mu file")->capture_default_str();
    bench->add_option("--out", bench_out, "write the JSON report here");
    bench->add_option("--emit-records", bench_flags.emit_records, "write per-turn records (JSON-lines)");
    bench->add_flag("--json", bench_json, "print the JSON report instead of the table");
    bench_flags.add_to(bench);

    PipelineFlags tune_flags;
    std::string tune_setup, tune_validation, tune_grid, tune_mu_file;
    auto* tune = app.add_subcommand("tune-mu", "Pick mu maximizing validation F1");
    tune->add_option("--setup", tune_setup, "setup name")->required();
    tune->add_option("--validation", tune_validation, "validation dataset")->required();
    tune->add_option("--grid", tune_grid, "comma-separated mu values (default 0:0.05:1)");
    tune->add_option("--mu-file", tune_mu_file, "merge the tuned value into this file");
    tune_flags.add_to(tune);

    // chat
    BackendFlags chat_flags;
    std::string chat_index, chat_setup, chat_doc_title, chat_doc_sentence;
    double chat_mu = -1;
    auto* chat = app.add_subcommand("chat", "Interactive conversation showing the common ground");
    chat->add_option("--index", chat_index, "index file");
    chat->add_option("--setup", chat_setup, "query setup (default cg)");
    chat->add_option("--mu", chat_mu, "fusion weight");
    chat->add_option("--doc-title", chat_doc_title, "document title");
    chat->add_option("--doc-first-sentence", chat_doc_sentence, "document first sentence");
    chat_flags.add_to(chat, false);

    // serve
    BackendFlags serve_flags;
    std::string serve_index, serve_host, serve_log;
    int serve_port = -1;
    auto* serve = app.add_subcommand("serve", "HTTP session API");
    serve->add_option("--index", serve_index, "index file");
    serve->add_option("--host", serve_host, "bind address");
    serve->add_option("--port", serve_port, "port");
    serve->add_option("--session-log", serve_log, "append transcripts (JSON-lines)");
    serve_flags.add_to(serve, false);

    // adapter-echo
    std::string echo_fixtures;
    auto* echo = app.add_subcommand("adapter-echo", "Serve canned adapter responses over stdio");
    echo->add_option("--fixtures", echo_fixtures, "fixture file (JSON-lines)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << json{{"error", {{"code", "usage"}, {"message", e.what()}}}}.dump() << '\n';
        return 2;
    }

    try {
        char* raw = nullptr;
        if (*gold) {
            const json backends = gold_flags.resolve();
            check(cg_build_gold_cg(gold_in.c_str(), gold_docs.empty() ? nullptr : gold_docs.c_str(), gold_out.c_str(),
                                   backends.dump().c_str(), &raw));
            std::cout << take(raw) << '\n';
        } else if (*sel) {
            check(cg_build_selector_data(sel_in.c_str(), sel_out.c_str(), &raw));
            std::cout << take(raw) << '\n';
        } else if (*split) {
            auto stem = split_in;
            if (auto dot = stem.rfind(".jsonl"); dot != std::string::npos && dot + 6 == stem.size()) stem.resize(dot);
            if (split_train.empty()) split_train = stem + ".train.jsonl";
            if (split_val.empty()) split_val = stem + ".validation.jsonl";
            check(cg_split(split_in.c_str(), split_fraction, split_seed, split_train.c_str(), split_val.c_str(), &raw));
            std::cout << take(raw) << '\n';
        } else if (*index) {
            cg_index* idx = nullptr;
            const json opts = {{"stem", idx_stem}, {"remove_stopwords", idx_stop}};
            check(cg_index_build(idx_collection.c_str(), opts.dump().c_str(), &idx));
            std::unique_ptr<cg_index, decltype(&cg_index_free)> guard(idx, cg_index_free);
            check(cg_index_save(idx, idx_out.c_str()));
            check(cg_index_stats(idx, &raw));
            std::cout << take(raw) << '\n';
        } else if (*search) {
            cg_index* idx = nullptr;
            check(cg_index_load(search_index.c_str(), &idx));
            std::unique_ptr<cg_index, decltype(&cg_index_free)> guard(idx, cg_index_free);
            const json params = {{"top_n", search_top}};
            check(cg_index_search(idx, search_query.c_str(), params.dump().c_str(), &raw));
            std::cout << take(raw) << '\n';
        } else if (*bench) {
            json req = bench_flags.request();
            req["dataset"] = bench_dataset;
            req["default_mu"] = bench_default_mu;
            if (!bench_setups.empty()) req["setups"] = split_list(bench_setups);
            if (!bench_mu_file.empty()) req["mu_file"] = bench_mu_file;
            if (!bench_out.empty()) req["out"] = bench_out;
            check(cg_bench(req.dump().c_str(), &raw));
            const json report = json::parse(take(raw));
            if (bench_json) {
                std::cout << report.dump() << '\n';
            } else {
                std::cout << report.at("table").get<std::string>();
            }
        } else if (*tune) {
            json req = tune_flags.request();
            req["setup"] = tune_setup;
            req["validation"] = tune_validation;
            if (!tune_grid.empty()) {
                json grid = json::array();
                for (const auto& v : split_list(tune_grid)) {
                    try {
                        grid.push_back(std::stod(v));
                    } catch (const std::exception&) {
                        throw CliFailure{CG_ERR_INVALID_ARGUMENT, "grid value '" + v + "' is not a number"};
                    }
                }
                req["grid"] = grid;
            }
            if (!tune_mu_file.empty()) req["mu_file"] = tune_mu_file;
            check(cg_tune_mu(req.dump().c_str(), &raw));
            std::cout << take(raw) << '\n';
        } else if (*chat) {
            json config = chat_flags.resolve();
            if (!chat_index.empty()) config["index"] = chat_index;
            if (!chat_setup.empty()) config["setup"] = chat_setup;
            if (chat_mu >= 0) config["mu"] = chat_mu;
            return run_chat(config, chat_doc_title, chat_doc_sentence);
        } else if (*serve) {
            json config = serve_flags.resolve();
            if (!serve_index.empty()) config["index"] = serve_index;
            if (!serve_log.empty()) config["session_log"] = serve_log;
            return run_serve(config, serve_host, serve_port);
        } else if (*echo) {
            check(cg_adapter_echo_serve_stdio(echo_fixtures.c_str()));
        }
    } catch (const CliFailure& f) {
        std::cerr << json{{"error", {{"code", cg_status_string(f.status)}, {"message", f.message}}}}.dump() << '\n';
        return static_cast<int>(f.status);
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump() << '\n';
        return static_cast<int>(CG_ERR_INTERNAL);
    }
    return 0;
}
