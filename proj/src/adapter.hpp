#pragma once

// Wire protocol for out-of-process models. Every message is one JSON object
// per line carrying "v": 1. Transports: child process over stdio, HTTP POST,
// or an in-process fixture-backed echo backend used by tests.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include <json.hpp>

namespace cground {

inline constexpr int kProtocolVersion = 1;

enum class AdapterTask { GenerateCg, Classify, Rewrite, Summarize, Read, Annotate };

const char* adapter_task_name(AdapterTask task) noexcept;
std::optional<AdapterTask> adapter_task_from_name(std::string_view name);

struct AdapterRequest {
    AdapterTask task = AdapterTask::GenerateCg;
    std::string request_id;
    nlohmann::json payload = nlohmann::json::object();

    bool operator==(const AdapterRequest&) const = default;
};

enum class AdapterErrorKind { None, Remote, Timeout, Transport, Malformed };

const char* adapter_error_kind_name(AdapterErrorKind kind) noexcept;

struct AdapterResponse {
    std::string request_id;
    bool ok = false;
    nlohmann::json payload = nlohmann::json::object();
    AdapterErrorKind error_kind = AdapterErrorKind::None;
    std::string error_message;

    static AdapterResponse success(std::string id, nlohmann::json payload);
    static AdapterResponse failure(std::string id, AdapterErrorKind kind, std::string message);

    bool operator==(const AdapterResponse&) const = default;
};

std::string serialize_request(const AdapterRequest& request);
std::string serialize_response(const AdapterResponse& response);
/// Throws Error(Parse) on malformed or wrong-version messages.
AdapterRequest parse_request(std::string_view line);
AdapterResponse parse_response(std::string_view line);

/// Stable digest of a payload (FNV-1a over its key-sorted serialization).
std::string payload_digest(const nlohmann::json& payload);

class Transport {
public:
    virtual ~Transport() = default;
    /// Must return within `timeout` (plus scheduling slack) and never throw.
    virtual AdapterResponse roundtrip(const AdapterRequest& request, std::chrono::milliseconds timeout) = 0;
};

/// Canned responses keyed by (task, payload digest). Fixture lines:
/// {"task", "payload" | "digest", "response" | "error", "delay_ms"?}.
/// Recorded sessions ({"request", "response"} lines) load the same way.
class EchoBackend {
public:
    EchoBackend() = default;
    static EchoBackend from_file(const std::filesystem::path& path);
    static EchoBackend from_text(std::string_view text);

    void add(AdapterTask task, const nlohmann::json& payload, nlohmann::json response,
             std::chrono::milliseconds delay = {});
    void add_error(AdapterTask task, const nlohmann::json& payload, std::string message);

    /// Response ignoring any configured delay.
    AdapterResponse handle(const AdapterRequest& request) const;
    std::chrono::milliseconds delay_for(const AdapterRequest& request) const;

private:
    struct Entry {
        std::optional<nlohmann::json> response;
        std::string error;
        std::chrono::milliseconds delay{0};
    };
    static std::string key(AdapterTask task, std::string_view digest);
    std::map<std::string, Entry> entries_;
};

/// Serves the stdio protocol from `in` to `out` until EOF. Each request is
/// handled on its own thread so delayed entries do not block others.
void serve_stdio(const EchoBackend& backend, std::istream& in, std::ostream& out);

class EchoTransport final : public Transport {
public:
    explicit EchoTransport(std::shared_ptr<const EchoBackend> backend) : backend_(std::move(backend)) {}
    AdapterResponse roundtrip(const AdapterRequest& request, std::chrono::milliseconds timeout) override;

private:
    std::shared_ptr<const EchoBackend> backend_;
};

/// Spawns `/bin/sh -c command` and pipelines requests over its stdin/stdout,
/// demultiplexing responses by request_id.
class SubprocessTransport final : public Transport {
public:
    explicit SubprocessTransport(const std::string& command);
    ~SubprocessTransport() override;
    SubprocessTransport(const SubprocessTransport&) = delete;
    SubprocessTransport& operator=(const SubprocessTransport&) = delete;

    AdapterResponse roundtrip(const AdapterRequest& request, std::chrono::milliseconds timeout) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// POSTs each request to `url` and parses the response body.
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(std::string url);
    AdapterResponse roundtrip(const AdapterRequest& request, std::chrono::milliseconds timeout) override;

private:
    std::string base_;
    std::string path_;
};

/// Appends {"request", "response"} lines for later replay via EchoBackend.
class RecordingTransport final : public Transport {
public:
    RecordingTransport(std::unique_ptr<Transport> inner, std::ostream& log) : inner_(std::move(inner)), log_(log) {}
    AdapterResponse roundtrip(const AdapterRequest& request, std::chrono::milliseconds timeout) override;

private:
    std::unique_ptr<Transport> inner_;
    std::ostream& log_;
    std::mutex mu_;
};

struct EndpointConfig {
    std::string command;        // child process, stdio framing
    std::string url;            // HTTP POST
    std::string echo_fixtures;  // in-process echo backend
    std::chrono::milliseconds timeout{30000};
    int max_in_flight = 8;

    static EndpointConfig from_json(const nlohmann::json& j);
};

class AdapterClient {
public:
    AdapterClient(std::unique_ptr<Transport> transport, std::chrono::milliseconds timeout, int max_in_flight = 8);
    ~AdapterClient();

    AdapterResponse call(const AdapterRequest& request);
    AdapterResponse call(AdapterTask task, nlohmann::json payload);

    /// Payload of a successful response; otherwise throws Error(Backend or Timeout)
    /// carrying the adapter diagnostics.
    nlohmann::json call_ok(std::string_view task, nlohmann::json payload);

    std::string next_request_id();

private:
    struct Gate;
    std::unique_ptr<Transport> transport_;
    std::chrono::milliseconds timeout_;
    std::unique_ptr<Gate> gate_;
    std::string id_prefix_;
    std::atomic<std::uint64_t> counter_{0};
};

std::shared_ptr<AdapterClient> make_adapter_client(const EndpointConfig& config);

/// Number of adapter calls issued by any client in this process.
std::uint64_t adapter_call_count() noexcept;

}  // namespace cground
