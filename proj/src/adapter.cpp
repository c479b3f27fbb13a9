#include "adapter.hpp"

#include "core_model.hpp"
#include "error.hpp"

#include <condition_variable>
#include <cstdio>
#include <future>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>

extern char** environ;

using json = nlohmann::json;

namespace cground {

namespace {
std::atomic<std::uint64_t> g_call_count{0};
}

std::uint64_t adapter_call_count() noexcept { return g_call_count.load(); }

const char* adapter_task_name(AdapterTask task) noexcept {
    switch (task) {
        case AdapterTask::GenerateCg: return "generate_cg";
        case AdapterTask::Classify: return "classify";
        case AdapterTask::Rewrite: return "rewrite";
        case AdapterTask::Summarize: return "summarize";
        case AdapterTask::Read: return "read";
        case AdapterTask::Annotate: return "annotate";
    }
    return "unknown";
}

std::optional<AdapterTask> adapter_task_from_name(std::string_view name) {
    for (auto t : {AdapterTask::GenerateCg, AdapterTask::Classify, AdapterTask::Rewrite, AdapterTask::Summarize,
                   AdapterTask::Read, AdapterTask::Annotate}) {
        if (name == adapter_task_name(t)) return t;
    }
    return std::nullopt;
}

const char* adapter_error_kind_name(AdapterErrorKind kind) noexcept {
    switch (kind) {
        case AdapterErrorKind::None: return "none";
        case AdapterErrorKind::Remote: return "remote";
        case AdapterErrorKind::Timeout: return "timeout";
        case AdapterErrorKind::Transport: return "transport";
        case AdapterErrorKind::Malformed: return "malformed";
    }
    return "none";
}

namespace {
std::optional<AdapterErrorKind> error_kind_from_name(std::string_view name) {
    for (auto k : {AdapterErrorKind::Remote, AdapterErrorKind::Timeout, AdapterErrorKind::Transport,
                   AdapterErrorKind::Malformed}) {
        if (name == adapter_error_kind_name(k)) return k;
    }
    return std::nullopt;
}

json parse_message(std::string_view line, const char* what) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Parse, std::string(what) + ": " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::Parse, std::string(what) + ": not a JSON object");
    auto v = j.find("v");
    if (v == j.end() || !v->is_number_integer() || v->get<int>() != kProtocolVersion) {
        throw Error(ErrorCode::Parse, std::string(what) + ": missing or unsupported protocol version");
    }
    auto id = j.find("request_id");
    if (id == j.end() || !id->is_string()) throw Error(ErrorCode::Parse, std::string(what) + ": missing request_id");
    return j;
}
}  // namespace

AdapterResponse AdapterResponse::success(std::string id, json payload) {
    AdapterResponse r;
    r.request_id = std::move(id);
    r.ok = true;
    r.payload = std::move(payload);
    return r;
}

AdapterResponse AdapterResponse::failure(std::string id, AdapterErrorKind kind, std::string message) {
    AdapterResponse r;
    r.request_id = std::move(id);
    r.ok = false;
    r.payload = json::object();
    r.error_kind = kind;
    r.error_message = std::move(message);
    return r;
}

std::string serialize_request(const AdapterRequest& request) {
    json j = {{"v", kProtocolVersion},
              {"task", adapter_task_name(request.task)},
              {"request_id", request.request_id},
              {"payload", request.payload}};
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string serialize_response(const AdapterResponse& response) {
    json j = {{"v", kProtocolVersion}, {"request_id", response.request_id}};
    if (response.ok) {
        j["status"] = "ok";
        j["payload"] = response.payload;
    } else {
        j["status"] = "error";
        j["error_message"] = response.error_message;
        j["error_kind"] = adapter_error_kind_name(response.error_kind);
    }
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

AdapterRequest parse_request(std::string_view line) {
    json j = parse_message(line, "request");
    AdapterRequest r;
    auto task = j.find("task");
    if (task == j.end() || !task->is_string()) throw Error(ErrorCode::Parse, "request: missing task");
    auto t = adapter_task_from_name(task->get<std::string>());
    if (!t) throw Error(ErrorCode::Parse, "request: unknown task '" + task->get<std::string>() + "'");
    r.task = *t;
    r.request_id = j["request_id"].get<std::string>();
    auto payload = j.find("payload");
    if (payload == j.end() || !payload->is_object()) throw Error(ErrorCode::Parse, "request: payload must be an object");
    r.payload = *payload;
    return r;
}

AdapterResponse parse_response(std::string_view line) {
    json j = parse_message(line, "response");
    AdapterResponse r;
    r.request_id = j["request_id"].get<std::string>();
    auto status = j.find("status");
    if (status == j.end() || !status->is_string()) throw Error(ErrorCode::Parse, "response: missing status");
    if (*status == "ok") {
        auto payload = j.find("payload");
        if (payload == j.end() || !payload->is_object()) {
            throw Error(ErrorCode::Parse, "response: payload must be an object");
        }
        r.ok = true;
        r.payload = *payload;
    } else if (*status == "error") {
        r.ok = false;
        r.error_message = j.value("error_message", std::string{});
        r.error_kind = AdapterErrorKind::Remote;
        if (auto k = j.find("error_kind"); k != j.end() && k->is_string()) {
            if (auto kind = error_kind_from_name(k->get<std::string>())) r.error_kind = *kind;
        }
    } else {
        throw Error(ErrorCode::Parse, "response: status must be 'ok' or 'error'");
    }
    return r;
}

std::string payload_digest(const json& payload) {
    const std::string s = payload.dump(-1, ' ', false, json::error_handler_t::replace);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// ---------------------------------------------------------------- echo

std::string EchoBackend::key(AdapterTask task, std::string_view digest) {
    return std::string(adapter_task_name(task)) + ":" + std::string(digest);
}

void EchoBackend::add(AdapterTask task, const json& payload, json response, std::chrono::milliseconds delay) {
    entries_[key(task, payload_digest(payload))] = Entry{std::move(response), {}, delay};
}

void EchoBackend::add_error(AdapterTask task, const json& payload, std::string message) {
    entries_[key(task, payload_digest(payload))] = Entry{std::nullopt, std::move(message), {}};
}

EchoBackend EchoBackend::from_text(std::string_view text) {
    EchoBackend backend;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::Parse, "fixture line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            if (j.contains("request")) {
                // recorded session line
                auto req = parse_request(j.at("request").dump());
                auto resp = parse_response(j.at("response").dump());
                Entry e;
                if (resp.ok) {
                    e.response = resp.payload;
                } else {
                    e.error = resp.error_message;
                }
                backend.entries_[key(req.task, payload_digest(req.payload))] = std::move(e);
                continue;
            }
            auto task = adapter_task_from_name(j.at("task").get<std::string>());
            if (!task) throw Error(ErrorCode::Parse, "unknown task");
            std::string digest = j.contains("digest") ? j["digest"].get<std::string>() : payload_digest(j.at("payload"));
            Entry e;
            if (j.contains("error")) {
                e.error = j["error"].get<std::string>();
            } else {
                e.response = j.at("response");
            }
            e.delay = std::chrono::milliseconds(j.value("delay_ms", 0));
            backend.entries_[key(*task, digest)] = std::move(e);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Parse, "fixture line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::Parse, "fixture line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return backend;
}

EchoBackend EchoBackend::from_file(const std::filesystem::path& path) {
    return from_text(read_file(path));
}

AdapterResponse EchoBackend::handle(const AdapterRequest& request) const {
    auto it = entries_.find(key(request.task, payload_digest(request.payload)));
    if (it == entries_.end()) {
        return AdapterResponse::failure(request.request_id, AdapterErrorKind::Remote,
                                        std::string("no fixture for task ") + adapter_task_name(request.task) +
                                            " digest " + payload_digest(request.payload));
    }
    if (!it->second.response) {
        return AdapterResponse::failure(request.request_id, AdapterErrorKind::Remote, it->second.error);
    }
    return AdapterResponse::success(request.request_id, *it->second.response);
}

std::chrono::milliseconds EchoBackend::delay_for(const AdapterRequest& request) const {
    auto it = entries_.find(key(request.task, payload_digest(request.payload)));
    return it == entries_.end() ? std::chrono::milliseconds(0) : it->second.delay;
}

void serve_stdio(const EchoBackend& backend, std::istream& in, std::ostream& out) {
    std::mutex out_mu;
    std::vector<std::thread> workers;
    auto emit = [&](const AdapterResponse& r) {
        std::lock_guard lock(out_mu);
        out << serialize_response(r) << '\n' << std::flush;
    };
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        AdapterRequest req;
        try {
            req = parse_request(line);
        } catch (const Error& e) {
            std::string id;
            try {
                auto j = json::parse(line);
                if (j.is_object() && j.contains("request_id") && j["request_id"].is_string()) id = j["request_id"];
            } catch (...) {
            }
            emit(AdapterResponse::failure(id, AdapterErrorKind::Malformed, e.what()));
            continue;
        }
        workers.emplace_back([&backend, &emit, req] {
            auto delay = backend.delay_for(req);
            if (delay.count() > 0) std::this_thread::sleep_for(delay);
            emit(backend.handle(req));
        });
    }
    for (auto& w : workers) w.join();
}

AdapterResponse EchoTransport::roundtrip(const AdapterRequest& request, std::chrono::milliseconds timeout) {
    auto delay = backend_->delay_for(request);
    if (delay > timeout) {
        std::this_thread::sleep_for(timeout);
        return AdapterResponse::failure(request.request_id, AdapterErrorKind::Timeout,
                                        "echo backend did not answer within " + std::to_string(timeout.count()) + " ms");
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    // Round-trip through the wire format so the echo path exercises serialization.
    auto wire = serialize_response(backend_->handle(parse_request(serialize_request(request))));
    return parse_response(wire);
}

// ---------------------------------------------------------------- subprocess

struct SubprocessTransport::Impl {
    pid_t pid = -1;
    int to_child = -1;
    int from_child = -1;
    std::mutex write_mu;
    std::mutex mu;
    std::map<std::string, std::promise<AdapterResponse>> pending;
    bool dead = false;
    std::string dead_reason;
    std::thread reader;

    void fail_all(const std::string& reason) {
        std::lock_guard lock(mu);
        dead = true;
        dead_reason = reason;
        for (auto& [id, p] : pending) {
            p.set_value(AdapterResponse::failure(id, AdapterErrorKind::Transport, reason));
        }
        pending.clear();
    }

    void deliver(AdapterResponse r) {
        std::lock_guard lock(mu);
        auto it = pending.find(r.request_id);
        if (it == pending.end()) return;  // timed out earlier: dropped
        it->second.set_value(std::move(r));
        pending.erase(it);
    }

    void read_loop() {
        std::string buf;
        char chunk[4096];
        for (;;) {
            ssize_t n = ::read(from_child, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) break;
            buf.append(chunk, static_cast<std::size_t>(n));
            std::size_t pos;
            while ((pos = buf.find('\n')) != std::string::npos) {
                std::string line = buf.substr(0, pos);
                buf.erase(0, pos + 1);
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                try {
                    deliver(parse_response(line));
                } catch (const Error& e) {
                    std::string id;
                    try {
                        auto j = json::parse(line);
                        if (j.is_object() && j.contains("request_id") && j["request_id"].is_string()) id = j["request_id"];
                    } catch (...) {
                    }
                    if (!id.empty()) deliver(AdapterResponse::failure(id, AdapterErrorKind::Malformed, e.what()));
                }
            }
        }
        fail_all("adapter process closed its output");
    }
};

SubprocessTransport::SubprocessTransport(const std::string& command) : impl_(std::make_unique<Impl>()) {
    int in_pair[2];
    int out_pair[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0 ||
        ::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, out_pair) != 0) {
        throw Error(ErrorCode::Backend, "socketpair failed for adapter process");
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pair[1], 0);
    posix_spawn_file_actions_adddup2(&actions, out_pair[1], 1);
    std::string cmd = command;
    char sh[] = "/bin/sh";
    char dash_c[] = "-c";
    char* argv[] = {sh, dash_c, cmd.data(), nullptr};
    pid_t pid = -1;
    int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pair[1]);
    ::close(out_pair[1]);
    if (rc != 0) {
        ::close(in_pair[0]);
        ::close(out_pair[0]);
        throw Error(ErrorCode::Backend, "cannot spawn adapter command: " + command);
    }
    impl_->pid = pid;
    impl_->to_child = in_pair[0];
    impl_->from_child = out_pair[0];
    impl_->reader = std::thread([impl = impl_.get()] { impl->read_loop(); });
}

SubprocessTransport::~SubprocessTransport() {
    ::shutdown(impl_->to_child, SHUT_WR);
    bool exited = false;
    for (int i = 0; i < 100 && !exited; ++i) {
        int status = 0;
        if (::waitpid(impl_->pid, &status, WNOHANG) == impl_->pid) {
            exited = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (!exited) {
        ::kill(impl_->pid, SIGKILL);
        int status = 0;
        ::waitpid(impl_->pid, &status, 0);
    }
    ::shutdown(impl_->from_child, SHUT_RDWR);
    if (impl_->reader.joinable()) impl_->reader.join();
    ::close(impl_->to_child);
    ::close(impl_->from_child);
}

AdapterResponse SubprocessTransport::roundtrip(const AdapterRequest& request, std::chrono::milliseconds timeout) {
    std::future<AdapterResponse> fut;
    {
        std::lock_guard lock(impl_->mu);
        if (impl_->dead) {
            return AdapterResponse::failure(request.request_id, AdapterErrorKind::Transport, impl_->dead_reason);
        }
        if (impl_->pending.count(request.request_id)) {
            return AdapterResponse::failure(request.request_id, AdapterErrorKind::Transport,
                                            "duplicate in-flight request_id");
        }
        fut = impl_->pending[request.request_id].get_future();
    }
    std::string line = serialize_request(request) + "\n";
    {
        std::lock_guard lock(impl_->write_mu);
        std::size_t off = 0;
        while (off < line.size()) {
            ssize_t n = ::send(impl_->to_child, line.data() + off, line.size() - off, MSG_NOSIGNAL);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                std::lock_guard plock(impl_->mu);
                impl_->pending.erase(request.request_id);
                return AdapterResponse::failure(request.request_id, AdapterErrorKind::Transport,
                                                "cannot write to adapter process");
            }
            off += static_cast<std::size_t>(n);
        }
    }
    if (fut.wait_for(timeout) == std::future_status::ready) return fut.get();
    {
        std::lock_guard lock(impl_->mu);
        auto it = impl_->pending.find(request.request_id);
        if (it != impl_->pending.end()) {
            impl_->pending.erase(it);
            return AdapterResponse::failure(request.request_id, AdapterErrorKind::Timeout,
                                            "no response within " + std::to_string(timeout.count()) + " ms");
        }
    }
    return fut.get();  // delivered between wait_for and the lock
}

// ---------------------------------------------------------------- http

HttpTransport::HttpTransport(std::string url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw Error(ErrorCode::Config, "adapter url must include a scheme: " + url);
    auto slash = url.find('/', scheme + 3);
    base_ = slash == std::string::npos ? url : url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

AdapterResponse HttpTransport::roundtrip(const AdapterRequest& request, std::chrono::milliseconds timeout) {
    auto promise = std::make_shared<std::promise<AdapterResponse>>();
    auto fut = promise->get_future();
    std::thread([promise, base = base_, path = path_, body = serialize_request(request), id = request.request_id,
                 timeout] {
        AdapterResponse out;
        try {
            httplib::Client client(base);
            auto secs = timeout.count() / 1000;
            auto usecs = (timeout.count() % 1000) * 1000;
            client.set_connection_timeout(secs, usecs);
            client.set_read_timeout(secs, usecs);
            client.set_write_timeout(secs, usecs);
            auto res = client.Post(path, body, "application/json");
            if (!res) {
                out = AdapterResponse::failure(id, AdapterErrorKind::Transport,
                                               "http transport: " + httplib::to_string(res.error()));
            } else if (res->status != 200) {
                out = AdapterResponse::failure(id, AdapterErrorKind::Transport,
                                               "http status " + std::to_string(res->status));
            } else {
                try {
                    out = parse_response(res->body);
                } catch (const Error& e) {
                    out = AdapterResponse::failure(id, AdapterErrorKind::Malformed, e.what());
                }
            }
        } catch (const std::exception& e) {
            out = AdapterResponse::failure(id, AdapterErrorKind::Transport, e.what());
        }
        promise->set_value(std::move(out));
    }).detach();
    if (fut.wait_for(timeout) == std::future_status::ready) return fut.get();
    return AdapterResponse::failure(request.request_id, AdapterErrorKind::Timeout,
                                    "no response within " + std::to_string(timeout.count()) + " ms");
}

AdapterResponse RecordingTransport::roundtrip(const AdapterRequest& request, std::chrono::milliseconds timeout) {
    auto resp = inner_->roundtrip(request, timeout);
    json line = {{"request", json::parse(serialize_request(request))},
                 {"response", json::parse(serialize_response(resp))}};
    std::lock_guard lock(mu_);
    log_ << line.dump() << '\n';
    return resp;
}

// ---------------------------------------------------------------- client

EndpointConfig EndpointConfig::from_json(const json& j) {
    EndpointConfig c;
    if (!j.is_object()) throw Error(ErrorCode::Config, "adapter endpoint must be an object");
    c.command = j.value("command", std::string{});
    c.url = j.value("url", std::string{});
    c.echo_fixtures = j.value("echo_fixtures", std::string{});
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
    c.max_in_flight = j.value("max_in_flight", 8);
    const int kinds = !c.command.empty() + !c.url.empty() + !c.echo_fixtures.empty();
    if (kinds != 1) throw Error(ErrorCode::Config, "adapter endpoint needs exactly one of command, url, echo_fixtures");
    if (c.timeout.count() <= 0 || c.max_in_flight < 1) {
        throw Error(ErrorCode::Config, "adapter endpoint timeout_ms and max_in_flight must be positive");
    }
    return c;
}

struct AdapterClient::Gate {
    std::mutex mu;
    std::condition_variable cv;
    int available;
    explicit Gate(int n) : available(n) {}
};

AdapterClient::AdapterClient(std::unique_ptr<Transport> transport, std::chrono::milliseconds timeout,
                             int max_in_flight)
    : transport_(std::move(transport)), timeout_(timeout), gate_(std::make_unique<Gate>(max_in_flight)) {
    std::random_device rd;
    std::ostringstream os;
    os << std::hex << rd();
    id_prefix_ = os.str();
}

AdapterClient::~AdapterClient() = default;

std::string AdapterClient::next_request_id() {
    return id_prefix_ + "-" + std::to_string(counter_.fetch_add(1) + 1);
}

AdapterResponse AdapterClient::call(const AdapterRequest& request) {
    g_call_count.fetch_add(1);
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    {
        std::unique_lock lock(gate_->mu);
        if (!gate_->cv.wait_until(lock, deadline, [&] { return gate_->available > 0; })) {
            return AdapterResponse::failure(request.request_id, AdapterErrorKind::Timeout,
                                            "too many requests in flight");
        }
        --gate_->available;
    }
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (remaining.count() < 1) remaining = std::chrono::milliseconds(1);
    AdapterResponse resp = transport_->roundtrip(request, remaining);
    {
        std::lock_guard lock(gate_->mu);
        ++gate_->available;
    }
    gate_->cv.notify_one();
    if (resp.request_id != request.request_id) {
        return AdapterResponse::failure(request.request_id, AdapterErrorKind::Malformed,
                                        "response request_id does not echo the request");
    }
    return resp;
}

AdapterResponse AdapterClient::call(AdapterTask task, json payload) {
    return call(AdapterRequest{task, next_request_id(), std::move(payload)});
}

json AdapterClient::call_ok(std::string_view task, json payload) {
    auto t = adapter_task_from_name(task);
    if (!t) throw Error(ErrorCode::Config, "unknown adapter task '" + std::string(task) + "'");
    auto resp = call(*t, std::move(payload));
    if (!resp.ok) {
        auto code = resp.error_kind == AdapterErrorKind::Timeout ? ErrorCode::Timeout : ErrorCode::Backend;
        throw Error(code, std::string("adapter ") + std::string(task) + " " +
                              adapter_error_kind_name(resp.error_kind) + ": " + resp.error_message);
    }
    return resp.payload;
}

std::shared_ptr<AdapterClient> make_adapter_client(const EndpointConfig& config) {
    std::unique_ptr<Transport> transport;
    if (!config.command.empty()) {
        transport = std::make_unique<SubprocessTransport>(config.command);
    } else if (!config.url.empty()) {
        transport = std::make_unique<HttpTransport>(config.url);
    } else {
        transport = std::make_unique<EchoTransport>(
            std::make_shared<const EchoBackend>(EchoBackend::from_file(config.echo_fixtures)));
    }
    return std::make_shared<AdapterClient>(std::move(transport), config.timeout, config.max_in_flight);
}

}  // namespace cground
