#include "service.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <thread>

#include <httplib.h>

using json = nlohmann::json;

namespace cground {

namespace {

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

double parse_double(const std::string& text, const char* what) {
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::Config, std::string(what) + ": '" + text + "' is not a number");
}

long parse_long(const std::string& text, const char* what) {
    try {
        std::size_t used = 0;
        long v = std::stol(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::Config, std::string(what) + ": '" + text + "' is not an integer");
}

std::int64_t unix_ms(std::chrono::system_clock::time_point t) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

std::string random_session_id() {
    static std::mutex mu;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mu);
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                  static_cast<unsigned long long>(rng()));
    return buf;
}

json cg_entries(const CommonGround& cg) {
    json entries = json::array();
    for (const auto& e : cg.entries()) {
        entries.push_back({{"surface", e.proposition.surface()},
                           {"origin_turn", e.proposition.origin_turn()},
                           {"status", cg_status_name(e.status)}});
    }
    return entries;
}

json surfaces(const std::vector<Proposition>& view) {
    json out = json::array();
    for (const auto& p : view) out.push_back(p.surface());
    return out;
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "service config must be a JSON object");
    ServiceConfig c;
    c.backends = BackendConfig::from_json(j);
    try {
        c.index_path = j.value("index", c.index_path);
        if (j.contains("setup")) {
            auto name = j.at("setup").get<std::string>();
            auto s = setup_from_name(name);
            if (!s) throw Error(ErrorCode::Config, "unknown setup '" + name + "'");
            c.setup = *s;
        }
        c.mu = j.value("mu", c.mu);
        if (j.contains("bm25")) {
            const auto& b = j.at("bm25");
            c.bm25.k1 = b.value("k1", c.bm25.k1);
            c.bm25.b = b.value("b", c.bm25.b);
            c.bm25.top_n = b.value("top_n", c.bm25.top_n);
        }
        c.formulation.max_reader_tokens = j.value("max_reader_tokens", c.formulation.max_reader_tokens);
        c.fusion_raw = j.value("fusion_raw", c.fusion_raw);
        c.session_ttl = std::chrono::seconds(j.value("session_ttl_s", static_cast<long>(c.session_ttl.count())));
        c.session_log = j.value("session_log", c.session_log);
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, std::string("service config: ") + e.what());
    }
    return c;
}

json ServiceConfig::to_json() const {
    json j = backends.to_json();
    j["index"] = index_path;
    j["setup"] = setup_name(setup);
    j["mu"] = mu;
    j["bm25"] = {{"k1", bm25.k1}, {"b", bm25.b}, {"top_n", bm25.top_n}};
    j["max_reader_tokens"] = formulation.max_reader_tokens;
    j["fusion_raw"] = fusion_raw;
    j["session_ttl_s"] = session_ttl.count();
    j["session_log"] = session_log;
    j["host"] = host;
    j["port"] = port;
    return j;
}

void ServiceConfig::apply_env() {
    if (auto v = env("CGROUND_INDEX")) index_path = *v;
    if (auto v = env("CGROUND_SETUP")) {
        auto s = setup_from_name(*v);
        if (!s) throw Error(ErrorCode::Config, "CGROUND_SETUP: unknown setup '" + *v + "'");
        setup = *s;
    }
    if (auto v = env("CGROUND_MU")) mu = parse_double(*v, "CGROUND_MU");
    if (auto v = env("CGROUND_ANNOTATOR")) backends.annotator = *v;
    if (auto v = env("CGROUND_GENERATOR")) backends.generator = *v;
    if (auto v = env("CGROUND_SELECTOR")) backends.selector = *v;
    if (auto v = env("CGROUND_READER")) backends.reader = *v;
    if (auto v = env("CGROUND_SESSION_TTL_S")) session_ttl = std::chrono::seconds(parse_long(*v, "CGROUND_SESSION_TTL_S"));
    if (auto v = env("CGROUND_SESSION_LOG")) session_log = *v;
    if (auto v = env("CGROUND_HOST")) host = *v;
    if (auto v = env("CGROUND_PORT")) port = static_cast<int>(parse_long(*v, "CGROUND_PORT"));
}

void ServiceConfig::validate() const {
    backends.validate();
    if (!(mu >= 0.0 && mu <= 1.0)) throw Error(ErrorCode::Config, "mu must lie in [0, 1]");
    bm25.validate();
    if (session_ttl.count() <= 0) throw Error(ErrorCode::Config, "session_ttl_s must be positive");
    if (setup == Setup::RewriteG || setup == Setup::CgG) {
        throw Error(ErrorCode::Config, std::string("setup '") + setup_name(setup) + "' needs gold data; not available live");
    }
    if (backends.generator == "oracle" || backends.selector == "oracle" || backends.rewriter == "oracle") {
        throw Error(ErrorCode::Config, "oracle backends replay gold annotations and cannot serve live sessions");
    }
    if (port < 0 || port > 65535) throw Error(ErrorCode::Config, "port out of range");
}

struct SessionManager::Impl {
    struct Session {
        std::mutex mu;
        std::string id;
        std::optional<DocumentContext> doc;
        CgSession cg;
        std::vector<json> transcript;
        std::chrono::system_clock::time_point created_at;
        std::atomic<Clock::rep> last_active;
        std::atomic<std::int64_t> last_active_wall;

        Session(std::string sid, std::optional<DocumentContext> d, CgSession s)
            : id(std::move(sid)), doc(d), cg(std::move(s)), created_at(std::chrono::system_clock::now()),
              last_active(Clock::now().time_since_epoch().count()), last_active_wall(unix_ms(created_at)) {}

        void touch() {
            last_active = Clock::now().time_since_epoch().count();
            last_active_wall = unix_ms(std::chrono::system_clock::now());
        }
    };

    ServiceConfig config;
    std::shared_ptr<const Bm25Index> index;
    Backends backends;
    std::shared_ptr<const Generator> generator;
    std::shared_ptr<const Selector> selector;
    FormulationServices services;
    PipelineOptions pipeline;

    mutable std::shared_mutex sessions_mu;
    std::map<std::string, std::shared_ptr<Session>> sessions;

    std::mutex log_mu;
    std::ofstream log;

    Impl(ServiceConfig c, std::shared_ptr<const Bm25Index> idx)
        : config(std::move(c)), index(std::move(idx)), backends((config.validate(), config.backends)) {
        if (!index) throw Error(ErrorCode::Config, "service needs an index");
        generator = backends.generator(nullptr);
        selector = backends.selector(nullptr);
        services = backends.services(nullptr);
        pipeline.bm25 = config.bm25;
        pipeline.fusion = {config.mu, config.fusion_raw};
        pipeline.formulation = config.formulation;
        if (!config.session_log.empty()) {
            log.open(config.session_log, std::ios::app);
            if (!log) throw Error(ErrorCode::Io, "cannot open session log " + config.session_log);
        }
    }

    std::shared_ptr<Session> find(const std::string& id) const {
        std::shared_lock lock(sessions_mu);
        auto it = sessions.find(id);
        if (it == sessions.end()) throw Error(ErrorCode::NotFound, "unknown session '" + id + "'");
        return it->second;
    }

    void append_log(const json& line) {
        if (!log.is_open()) return;
        std::lock_guard lock(log_mu);
        log << line.dump() << '\n';
        log.flush();
    }
};

SessionManager::SessionManager(ServiceConfig config, std::shared_ptr<const Bm25Index> index)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(index))) {}

SessionManager::~SessionManager() = default;

const ServiceConfig& SessionManager::config() const noexcept { return impl_->config; }

std::string SessionManager::create(std::optional<DocumentContext> doc) {
    expire_idle();
    CgSession cg(doc, impl_->generator, impl_->selector, impl_->config.backends.generator_config);
    std::unique_lock lock(impl_->sessions_mu);
    std::string id;
    do {
        id = random_session_id();
    } while (impl_->sessions.count(id));
    impl_->sessions.emplace(id, std::make_shared<Impl::Session>(id, std::move(doc), std::move(cg)));
    return id;
}

json SessionManager::ask(const std::string& session_id, const std::string& question) {
    if (normalize_text(question).empty()) throw Error(ErrorCode::InvalidArgument, "question must not be empty");
    auto session = impl_->find(session_id);
    std::lock_guard turn_lock(session->mu);
    session->touch();

    PipelineTrace trace;
    PipelineAnswer answer;
    auto answer_fn = [&](const ConversationContext& ctx, const CommonGround& cg) {
        auto f = formulate(impl_->config.setup, ctx, cg, impl_->services, impl_->pipeline.formulation);
        trace = retrieve_and_read(f, *impl_->index, *impl_->backends.reader(), impl_->pipeline);
        answer = answer_from(trace, impl_->pipeline.fusion);
        return answer.text;
    };
    const int turn_no = session->cg.turn();
    auto step = session->cg.step(question, answer_fn);

    json passages = json::array();
    for (const auto& rp : trace.ranked) {
        passages.push_back({{"passage_id", rp.passage.passage_id}, {"rank", rp.rank}, {"s_ret_norm", rp.s_ret_norm}});
    }
    json response = {{"answer", step.answer},
                     {"answer_passage_id", answer.ranked_candidates.empty()
                                               ? json(nullptr)
                                               : json(answer.ranked_candidates.front().passage_id)},
                     {"passages", passages},
                     {"cg", {{"entries", cg_entries(step.cg)}}},
                     {"mu", impl_->config.mu},
                     {"turn_no", turn_no}};

    json turn = response;
    turn["question"] = question;
    turn["cg_full"] = surfaces(step.cg.full());
    turn["cg_selected"] = surfaces(step.cg.selected());
    turn["retriever_query"] = trace.formulation.retriever_query;
    turn["reader_query"] = trace.formulation.reader_query;
    session->transcript.push_back(turn);
    session->touch();

    json log_line = turn;
    log_line["session_id"] = session_id;
    impl_->append_log(log_line);
    return response;
}

json SessionManager::transcript(const std::string& session_id) const {
    auto session = impl_->find(session_id);
    std::lock_guard lock(session->mu);
    json doc = nullptr;
    if (session->doc) doc = {{"doc_title", session->doc->title}, {"doc_first_sentence", session->doc->first_sentence}};
    return {{"session_id", session->id},
            {"doc", doc},
            {"created_at_ms", unix_ms(session->created_at)},
            {"last_active_ms", session->last_active_wall.load()},
            {"setup", setup_name(impl_->config.setup)},
            {"transcript", session->transcript}};
}

void SessionManager::remove(const std::string& session_id) {
    std::unique_lock lock(impl_->sessions_mu);
    if (impl_->sessions.erase(session_id) == 0) {
        throw Error(ErrorCode::NotFound, "unknown session '" + session_id + "'");
    }
}

std::size_t SessionManager::expire_idle(Clock::time_point now) {
    const auto ttl = std::chrono::duration_cast<Clock::duration>(impl_->config.session_ttl);
    std::unique_lock lock(impl_->sessions_mu);
    return std::erase_if(impl_->sessions, [&](const auto& kv) {
        const Clock::time_point last{Clock::duration{kv.second->last_active.load()}};
        return now - last > ttl;
    });
}

std::size_t SessionManager::session_count() const {
    std::shared_lock lock(impl_->sessions_mu);
    return impl_->sessions.size();
}

int http_status_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NotFound: return 404;
        case ErrorCode::InvalidArgument:
        case ErrorCode::Parse: return 400;
        case ErrorCode::Backend:
        case ErrorCode::Timeout: return 502;
        default: return 500;
    }
}

json error_body(ErrorCode code, const std::string& message, const std::string& field) {
    json e = {{"code", error_code_name(code)}, {"message", message}};
    if (!field.empty()) e["field"] = field;
    return {{"error", e}};
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message, const std::string& field = {}) {
    send_json(res, http_status_for(code), error_body(code, message, field));
}

// Parses a JSON object body; an empty body counts as {} when allowed.
std::optional<json> object_body(const httplib::Request& req, httplib::Response& res, bool allow_empty) {
    if (req.body.empty() && allow_empty) return json::object();
    json body;
    try {
        body = json::parse(req.body);
    } catch (const json::exception& e) {
        send_error(res, ErrorCode::Parse, std::string("body is not valid JSON: ") + e.what(), "body");
        return std::nullopt;
    }
    if (!body.is_object()) {
        send_error(res, ErrorCode::InvalidArgument, "body must be a JSON object", "body");
        return std::nullopt;
    }
    return body;
}

std::optional<std::string> string_field(const json& body, const char* name, bool required, httplib::Response& res) {
    if (!body.contains(name) || body[name].is_null()) {
        if (required) send_error(res, ErrorCode::InvalidArgument, std::string("missing field '") + name + "'", name);
        return std::nullopt;
    }
    if (!body[name].is_string()) {
        send_error(res, ErrorCode::InvalidArgument, std::string("field '") + name + "' must be a string", name);
        return std::nullopt;
    }
    return body[name].get<std::string>();
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        send_error(res, e.code(), e.what());
    } catch (const std::exception& e) {
        send_json(res, 500, {{"error", {{"code", "internal"}, {"message", e.what()}}}});
    }
}

}  // namespace

void install_routes(httplib::Server& server, SessionManager& sessions) {
    server.Post("/v1/sessions", [&sessions](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto body = object_body(req, res, true);
            if (!body) return;
            const bool has_title = body->contains("doc_title") && !(*body)["doc_title"].is_null();
            const bool has_sentence = body->contains("doc_first_sentence") && !(*body)["doc_first_sentence"].is_null();
            std::optional<DocumentContext> doc;
            if (has_title || has_sentence) {
                auto title = string_field(*body, "doc_title", false, res);
                if (has_title && !title) return;
                auto sentence = string_field(*body, "doc_first_sentence", false, res);
                if (has_sentence && !sentence) return;
                doc = DocumentContext{title.value_or(""), sentence.value_or("")};
            }
            send_json(res, 201, {{"session_id", sessions.create(std::move(doc))}});
        });
    });
    server.Post(R"(/v1/sessions/([^/]+)/ask)", [&sessions](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto body = object_body(req, res, false);
            if (!body) return;
            auto question = string_field(*body, "question", true, res);
            if (!question) return;
            if (normalize_text(*question).empty()) {
                send_error(res, ErrorCode::InvalidArgument, "field 'question' must not be empty", "question");
                return;
            }
            send_json(res, 200, sessions.ask(req.matches[1], *question));
        });
    });
    server.Get(R"(/v1/sessions/([^/]+))", [&sessions](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, sessions.transcript(req.matches[1])); });
    });
    server.Delete(R"(/v1/sessions/([^/]+))", [&sessions](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            sessions.remove(req.matches[1]);
            send_json(res, 200, {{"deleted", std::string(req.matches[1])}});
        });
    });
}

struct HttpService::Impl {
    SessionManager& sessions;
    httplib::Server server;
    std::thread janitor;
    std::mutex mu;
    std::condition_variable cv;
    bool stopping = false;

    explicit Impl(SessionManager& s) : sessions(s) {
        install_routes(server, sessions);
        const auto ttl = std::chrono::duration_cast<std::chrono::milliseconds>(sessions.config().session_ttl);
        const auto period = std::clamp(ttl / 4, std::chrono::milliseconds(50), std::chrono::milliseconds(30000));
        janitor = std::thread([this, period] {
            std::unique_lock lock(mu);
            while (!cv.wait_for(lock, period, [this] { return stopping; })) sessions.expire_idle();
        });
    }

    ~Impl() {
        {
            std::lock_guard lock(mu);
            stopping = true;
        }
        cv.notify_all();
        janitor.join();
    }
};

HttpService::HttpService(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {}

HttpService::~HttpService() { stop(); }

bool HttpService::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int HttpService::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool HttpService::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpService::stop() { impl_->server.stop(); }

}  // namespace cground
