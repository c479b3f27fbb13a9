#include "adapter.hpp"
#include "error.hpp"
#include "fixtures.hpp"

#include <doctest.h>
#include <httplib.h>

#include <future>
#include <random>
#include <sstream>
#include <thread>

using namespace cground;
using json = nlohmann::json;
using std::chrono::milliseconds;

namespace {

const std::string kEchoCommand =
    std::string("\"") + CGROUND_CLI + "\" adapter-echo --fixtures \"" + fixtures::data("echo_adapter.jsonl").string() + "\"";

json messi_generate_payload() { return {{"doc", nullptr}, {"history", json::array()}, {"question", "how old is Messi?"}}; }

template <class F>
long long elapsed_ms(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration_cast<milliseconds>(std::chrono::steady_clock::now() - t0).count();
}

std::string random_string(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces = {"a", "Z", " ", "\"", "\\", "\n", "\t", "é", "€", "😀", "{", "}", "0",
                                                    "\x01", "/"};
    std::string s;
    const auto n = rng() % 8;
    for (std::size_t i = 0; i < n; ++i) s += pieces[rng() % pieces.size()];
    return s;
}

json random_json(std::mt19937_64& rng, int depth) {
    switch (rng() % (depth > 2 ? 5 : 7)) {
        case 0: return nullptr;
        case 1: return static_cast<bool>(rng() % 2);
        case 2: return static_cast<std::int64_t>(rng()) >> (rng() % 60);
        case 3: return std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
        case 4: return random_string(rng);
        case 5: {
            json a = json::array();
            for (std::size_t i = 0; i < rng() % 4; ++i) a.push_back(random_json(rng, depth + 1));
            return a;
        }
        default: {
            json o = json::object();
            for (std::size_t i = 0; i < rng() % 4; ++i) o[random_string(rng)] = random_json(rng, depth + 1);
            return o;
        }
    }
}

json random_object(std::mt19937_64& rng) {
    json o = json::object();
    for (std::size_t i = 0; i < rng() % 5; ++i) o[random_string(rng)] = random_json(rng, 1);
    return o;
}

}  // namespace

TEST_CASE("task names") {
    for (auto t : {AdapterTask::GenerateCg, AdapterTask::Classify, AdapterTask::Rewrite, AdapterTask::Summarize,
                   AdapterTask::Read, AdapterTask::Annotate}) {
        CHECK(adapter_task_from_name(adapter_task_name(t)) == t);
    }
    CHECK(std::string(adapter_task_name(AdapterTask::GenerateCg)) == "generate_cg");
    CHECK_FALSE(adapter_task_from_name("train").has_value());
}

TEST_CASE("property: randomized round-trips are identities") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 1000; ++i) {
        AdapterRequest req{static_cast<AdapterTask>(rng() % 6), random_string(rng), random_object(rng)};
        const auto line = serialize_request(req);
        CHECK(line.find('\n') == std::string::npos);
        CHECK(parse_request(line) == req);
        AdapterResponse resp = rng() % 2 ? AdapterResponse::success(random_string(rng), random_object(rng))
                                         : AdapterResponse::failure(random_string(rng),
                                                                    static_cast<AdapterErrorKind>(1 + rng() % 4),
                                                                    random_string(rng));
        const auto rline = serialize_response(resp);
        CHECK(parse_response(rline) == resp);
        CHECK(serialize_response(parse_response(rline)) == rline);
    }
}

TEST_CASE("every message carries v:1 and malformed lines are rejected") {
    const auto line = serialize_request({AdapterTask::Classify, "r1", {{"x", 1}}});
    CHECK(json::parse(line).at("v") == 1);
    CHECK(json::parse(serialize_response(AdapterResponse::success("r1", json::object()))).at("v") == 1);
    for (const char* bad : {"", "not json", "[]", R"({"task":"classify","request_id":"r","payload":{}})",
                            R"({"v":2,"task":"classify","request_id":"r","payload":{}})",
                            R"({"v":1,"task":"train","request_id":"r","payload":{}})",
                            R"({"v":1,"task":"classify","payload":{}})",
                            R"({"v":1,"task":"classify","request_id":"r","payload":[]})"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse_request(bad), Error);
    }
    CHECK_THROWS_AS(parse_response(R"({"v":1,"request_id":"r","status":"maybe"})"), Error);
    CHECK_THROWS_AS(parse_response(R"({"v":1,"request_id":"r","status":"ok"})"), Error);
}

TEST_CASE("payload digest ignores key order") {
    CHECK(payload_digest(json::parse(R"({"a":1,"b":[1,2]})")) == payload_digest(json::parse(R"({"b":[1,2],"a":1})")));
    CHECK(payload_digest(json{{"a", 1}}) != payload_digest(json{{"a", 2}}));
}

TEST_CASE("echo backend") {
    const auto backend = EchoBackend::from_file(fixtures::data("echo_adapter.jsonl"));
    const auto hit = backend.handle({AdapterTask::GenerateCg, "x", messi_generate_payload()});
    REQUIRE(hit.ok);
    CHECK(hit.request_id == "x");
    CHECK(hit.payload.at("propositions") == json::array({"Messi"}));
    const auto miss = backend.handle({AdapterTask::GenerateCg, "y", {{"question", "other"}}});
    CHECK_FALSE(miss.ok);
    const auto err = backend.handle({AdapterTask::Classify, "z",
                                     {{"context_digest", "broken"}, {"proposition", "broken"}, {"question", "?"}}});
    CHECK_FALSE(err.ok);
    CHECK(err.error_kind == AdapterErrorKind::Remote);
    CHECK(err.error_message == "model crashed");
    CHECK(backend.delay_for({AdapterTask::Annotate, "d", {{"text", "slow"}}}) == milliseconds(400));
    CHECK_THROWS_AS(EchoBackend::from_text("{broken\n"), Error);
}

TEST_CASE("recorded sessions replay byte-identically") {
    auto backend = std::make_shared<EchoBackend>(EchoBackend::from_file(fixtures::data("echo_adapter.jsonl")));
    std::ostringstream log;
    AdapterClient client(std::make_unique<RecordingTransport>(std::make_unique<EchoTransport>(backend), log),
                         milliseconds(1000));
    std::vector<AdapterRequest> requests = {
        {AdapterTask::GenerateCg, "r1", messi_generate_payload()},
        {AdapterTask::Classify, "r2", {{"context_digest", "Messi"}, {"proposition", "Messi"}, {"question", "how old is Messi?"}}},
        {AdapterTask::Rewrite, "r3", {{"nothing", true}}}};
    std::vector<std::string> first;
    for (const auto& r : requests) first.push_back(serialize_response(client.call(r)));

    const auto replay = std::make_shared<EchoBackend>(EchoBackend::from_text(log.str()));
    EchoTransport again(replay);
    for (std::size_t i = 0; i < requests.size(); ++i) {
        CHECK(serialize_response(again.roundtrip(requests[i], milliseconds(1000))) == first[i]);
    }
}

TEST_CASE("echo transport honours timeouts") {
    auto backend = std::make_shared<EchoBackend>(EchoBackend::from_file(fixtures::data("echo_adapter.jsonl")));
    AdapterClient client(std::make_unique<EchoTransport>(backend), milliseconds(100));
    AdapterResponse resp;
    const auto ms = elapsed_ms([&] { resp = client.call(AdapterTask::Annotate, {{"text", "slow"}}); });
    CHECK_FALSE(resp.ok);
    CHECK(resp.error_kind == AdapterErrorKind::Timeout);
    CHECK(ms < 200);
    try {
        client.call_ok("annotate", {{"text", "slow"}});
        FAIL("expected timeout");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Timeout);
    }
}

TEST_CASE("subprocess transport against the echo model process") {
    const auto before = adapter_call_count();
    auto client = make_adapter_client(EndpointConfig::from_json({{"command", kEchoCommand}, {"timeout_ms", 3000}}));
    CHECK(client->call_ok("generate_cg", messi_generate_payload()).at("propositions") == json::array({"Messi"}));
    CHECK(adapter_call_count() == before + 1);

    const auto err = client->call(AdapterTask::Classify,
                                  {{"context_digest", "broken"}, {"proposition", "broken"}, {"question", "?"}});
    CHECK_FALSE(err.ok);
    CHECK(err.error_kind == AdapterErrorKind::Remote);

    // concurrent calls are matched to their own responses
    std::vector<std::future<AdapterResponse>> futures;
    for (int i = 0; i < 16; ++i) {
        futures.push_back(std::async(std::launch::async, [&, i] {
            return i % 2 ? client->call(AdapterTask::GenerateCg, messi_generate_payload())
                         : client->call(AdapterTask::Summarize,
                                        {{"doc", nullptr},
                                         {"history", json::array({{{"answer", "36 years"}, {"question", "how old is Messi?"}}})}});
        }));
    }
    for (int i = 0; i < 16; ++i) {
        const auto r = futures[static_cast<std::size_t>(i)].get();
        REQUIRE(r.ok);
        CHECK(r.payload.contains(i % 2 ? "propositions" : "summary"));
    }
}

TEST_CASE("subprocess timeouts leave the endpoint usable") {
    auto client = make_adapter_client(EndpointConfig::from_json({{"command", kEchoCommand}, {"timeout_ms", 150}}));
    // warm up: process start-up is not part of the budget under test
    REQUIRE(client->call(AdapterTask::GenerateCg, messi_generate_payload()).ok);
    AdapterResponse slow;
    const auto ms = elapsed_ms([&] { slow = client->call(AdapterTask::Annotate, {{"text", "slow"}}); });
    CHECK(slow.error_kind == AdapterErrorKind::Timeout);
    CHECK(ms < 250);
    CHECK(client->call(AdapterTask::GenerateCg, messi_generate_payload()).ok);
}

TEST_CASE("dead or unreachable endpoints fail fast with transport errors") {
    auto dead = make_adapter_client(EndpointConfig::from_json({{"command", "exit 0"}, {"timeout_ms", 2000}}));
    AdapterResponse r;
    const auto ms = elapsed_ms([&] { r = dead->call(AdapterTask::GenerateCg, messi_generate_payload()); });
    CHECK_FALSE(r.ok);
    CHECK((r.error_kind == AdapterErrorKind::Transport || r.error_kind == AdapterErrorKind::Timeout));
    CHECK(ms < 2100);

    auto http = make_adapter_client(EndpointConfig::from_json({{"url", "http://127.0.0.1:1/adapter"}, {"timeout_ms", 500}}));
    const auto hr = http->call(AdapterTask::GenerateCg, messi_generate_payload());
    CHECK_FALSE(hr.ok);
    CHECK(hr.error_kind == AdapterErrorKind::Transport);
    CHECK_THROWS_AS(http->call_ok("generate_cg", messi_generate_payload()), Error);
}

TEST_CASE("http transport carries the same payloads") {
    const auto backend = EchoBackend::from_file(fixtures::data("echo_adapter.jsonl"));
    httplib::Server server;
    server.Post("/adapter", [&](const httplib::Request& req, httplib::Response& res) {
        res.set_content(serialize_response(backend.handle(parse_request(req.body))), "application/json");
    });
    server.Post("/garbage", [](const httplib::Request&, httplib::Response& res) { res.set_content("nope", "text/plain"); });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const std::string base = "http://127.0.0.1:" + std::to_string(port);
    auto client = make_adapter_client(EndpointConfig::from_json({{"url", base + "/adapter"}, {"timeout_ms", 2000}}));
    CHECK(client->call_ok("generate_cg", messi_generate_payload()).at("propositions") == json::array({"Messi"}));
    auto garbage = make_adapter_client(EndpointConfig::from_json({{"url", base + "/garbage"}, {"timeout_ms", 2000}}));
    CHECK(garbage->call(AdapterTask::GenerateCg, messi_generate_payload()).error_kind == AdapterErrorKind::Malformed);

    server.stop();
    t.join();
}

TEST_CASE("endpoint configuration") {
    CHECK_THROWS_AS(EndpointConfig::from_json(json::object()), Error);
    CHECK_THROWS_AS(EndpointConfig::from_json({{"command", "x"}, {"url", "http://y"}}), Error);
    CHECK_THROWS_AS(EndpointConfig::from_json({{"command", "x"}, {"timeout_ms", 0}}), Error);
    const auto c = EndpointConfig::from_json({{"url", "http://h:1/p"}, {"timeout_ms", 250}, {"max_in_flight", 2}});
    CHECK(c.timeout == milliseconds(250));
    CHECK(c.max_in_flight == 2);
    CHECK_THROWS_AS(HttpTransport("no-scheme"), Error);
}

TEST_CASE("max in flight applies backpressure") {
    auto backend = std::make_shared<EchoBackend>();
    backend->add(AdapterTask::Annotate, {{"text", "x"}}, {{"tokens", json::array()}}, milliseconds(150));
    AdapterClient client(std::make_unique<EchoTransport>(backend), milliseconds(1000), 1);
    const auto ms = elapsed_ms([&] {
        auto a = std::async(std::launch::async, [&] { return client.call(AdapterTask::Annotate, {{"text", "x"}}); });
        auto b = std::async(std::launch::async, [&] { return client.call(AdapterTask::Annotate, {{"text", "x"}}); });
        CHECK(a.get().ok);
        CHECK(b.get().ok);
    });
    CHECK(ms >= 290);
}
