#pragma once

// Live conversations: in-memory sessions, each owning a CG state machine,
// answered through the retriever-reader pipeline. Exposed over HTTP:
//   POST   /v1/sessions            {doc_title?, doc_first_sentence?} -> {session_id}
//   POST   /v1/sessions/{id}/ask   {question} -> {answer, passages, cg, mu}
//   GET    /v1/sessions/{id}       transcript
//   DELETE /v1/sessions/{id}

#include "context_setups.hpp"
#include "error.hpp"
#include "pipeline.hpp"
#include "retrieval.hpp"

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace cground {

struct ServiceConfig {
    std::string index_path;
    BackendConfig backends;
    Setup setup = Setup::Cg;
    double mu = 0.5;
    Bm25Params bm25;
    FormulationOptions formulation;
    bool fusion_raw = false;
    std::chrono::seconds session_ttl{1800};
    std::string session_log;  // JSON-lines transcript log; empty disables it
    std::string host = "127.0.0.1";
    int port = 8080;

    /// Backend keys ("generator", "selector", ...) sit at the top level.
    static ServiceConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    /// CGROUND_INDEX, CGROUND_SETUP, CGROUND_MU, CGROUND_ANNOTATOR,
    /// CGROUND_GENERATOR, CGROUND_SELECTOR, CGROUND_READER,
    /// CGROUND_SESSION_TTL_S, CGROUND_SESSION_LOG, CGROUND_HOST, CGROUND_PORT.
    void apply_env();
    void validate() const;
};

class SessionManager {
public:
    using Clock = std::chrono::steady_clock;

    SessionManager(ServiceConfig config, std::shared_ptr<const Bm25Index> index);
    ~SessionManager();

    const ServiceConfig& config() const noexcept;

    std::string create(std::optional<DocumentContext> doc);
    /// Asks on one session are serialized; distinct sessions run concurrently.
    /// Throws Error(NotFound) for unknown sessions.
    nlohmann::json ask(const std::string& session_id, const std::string& question);
    nlohmann::json transcript(const std::string& session_id) const;
    void remove(const std::string& session_id);

    /// Drops sessions idle for longer than the TTL; returns how many.
    std::size_t expire_idle(Clock::time_point now = Clock::now());
    std::size_t session_count() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Registers the /v1/sessions routes on `server`.
void install_routes(httplib::Server& server, SessionManager& sessions);

/// HTTP status for an error code: 404 not found, 400 bad input, 502 backend
/// or timeout, 500 otherwise.
int http_status_for(ErrorCode code) noexcept;

/// {"error": {"code", "message", "field"?}}
nlohmann::json error_body(ErrorCode code, const std::string& message, const std::string& field = {});

/// Serves until stop() is called from another thread. Also expires idle sessions.
class HttpService {
public:
    explicit HttpService(SessionManager& sessions);
    ~HttpService();

    /// Blocks. Returns false when the socket could not be bound.
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port, returns it; serve with listen_after_bind().
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace cground
