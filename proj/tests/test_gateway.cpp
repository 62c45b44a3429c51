#include "finqa/gateway.hpp"

#include "helpers.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <thread>

using namespace finqa;
using namespace finqa::gateway;
using nlohmann::json;

namespace {

ChatRequest simple_request(const std::string& tag = "BG:q17:0") {
    ChatRequest request;
    request.model = "scripted";
    request.messages = {{Role::User, "What is 2 + 2?"}};
    request.tag = tag;
    return request;
}

/// Backend that fails a fixed number of times before succeeding.
class FlakyBackend : public ChatBackend {
public:
    FlakyBackend(int failures, const char* error_kind)
        : failures_(failures), kind_(error_kind), profile_(ScriptedBackend::default_profile()) {}

    ChatResponse complete_once(const ChatRequest&) override {
        ++attempts;
        if (attempts <= failures_) {
            if (std::string(kind_) == "rate") throw RateLimitedError("slow down");
            if (std::string(kind_) == "net") throw NetworkError("connection reset");
            if (std::string(kind_) == "auth") throw AuthError("bad key");
            throw MalformedResponseError("unexpected body");
        }
        ChatResponse ok;
        ok.content = "recovered";
        return ok;
    }
    const BackendProfile& profile() const override { return profile_; }

    int attempts = 0;

private:
    int failures_;
    const char* kind_;
    BackendProfile profile_;
};

class FakeTransport : public HttpTransport {
public:
    HttpResult post(const std::string& url,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    const std::string& body) override {
        last_url = url;
        last_headers = headers;
        last_body = body;
        ++calls;
        return next;
    }

    HttpResult next{200, R"({"choices":[{"message":{"content":"hello"}}],)"
                         R"("usage":{"prompt_tokens":7,"completion_tokens":2}})"};
    std::string last_url;
    std::vector<std::pair<std::string, std::string>> last_headers;
    std::string last_body;
    int calls = 0;
};

BackendProfile http_profile(const std::string& auth_var = "") {
    BackendProfile profile;
    profile.name = "test-http";
    profile.endpoint = "https://api.example.test/v1";
    profile.auth_env_var = auth_var;
    profile.model = "test-model";
    return profile;
}

} // namespace

TEST_CASE("request defaults serialize as temperature 0.1 and max_tokens 1000") {
    for (int i = 0; i < 25; ++i) {
        ChatRequest request;
        request.model = "m" + std::to_string(i);
        for (int m = 0; m <= i % 3; ++m) {
            request.messages.push_back({Role::User, "message " + std::to_string(m)});
        }
        json payload = json::parse(serialize_request(request));
        CHECK(payload["temperature"].get<double>() == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(payload["max_tokens"].get<int>() == 1000);
        CHECK(payload["messages"].size() == request.messages.size());
    }
}

TEST_CASE("request validation enforces message shape") {
    ChatRequest request = simple_request();
    CHECK_NOTHROW(validate_request(request));

    SUBCASE("no messages") {
        request.messages.clear();
        CHECK_THROWS_AS(validate_request(request), InvalidRequestError);
    }
    SUBCASE("empty content") {
        request.messages[0].content.clear();
        CHECK_THROWS_AS(validate_request(request), InvalidRequestError);
    }
    SUBCASE("system message not first") {
        request.messages.push_back({Role::System, "system text"});
        CHECK_THROWS_AS(validate_request(request), InvalidRequestError);
    }
    SUBCASE("two system messages") {
        request.messages = {{Role::System, "one"}, {Role::System, "two"}, {Role::User, "hi"}};
        CHECK_THROWS_AS(validate_request(request), InvalidRequestError);
    }
    SUBCASE("temperature bounds") {
        request.temperature = 2.5;
        CHECK_THROWS_AS(validate_request(request), InvalidRequestError);
        request.temperature = -0.1;
        CHECK_THROWS_AS(validate_request(request), InvalidRequestError);
    }
    SUBCASE("max_tokens positive") {
        request.max_tokens = 0;
        CHECK_THROWS_AS(validate_request(request), InvalidRequestError);
    }
}

TEST_CASE("scripted backend returns the reply for its tag") {
    ScriptedBackend backend({{"BG:q17:0", "The computation gives 109. Final Answer: B"}});
    ChatResponse response = complete(backend, simple_request("BG:q17:0"));
    CHECK(response.content == "The computation gives 109. Final Answer: B");
    CHECK(response.prompt_tokens > 0);
    CHECK(response.completion_tokens == 7);
}

TEST_CASE("scripted backend with empty script raises ScriptMiss") {
    ScriptedBackend backend({});
    CHECK_THROWS_AS(complete(backend, simple_request()), ScriptMissError);
    // The miss is a MalformedResponse-class failure, so no retries happen.
    CHECK(backend.call_count() == 1);
}

TEST_CASE("scripted backend replays the same tag and logs every call") {
    ScriptedBackend backend({{"A", "x"}});
    ChatRequest request = simple_request("A");
    CHECK(complete(backend, request).content == "x");
    CHECK(complete(backend, request).content == "x");
    auto calls = backend.calls();
    REQUIRE(calls.size() == 2);
    CHECK(calls[0].tag == "A");
    CHECK(calls[1].tag == "A");
    CHECK(calls[0].serialized == calls[1].serialized);
}

TEST_CASE("scripted backend is a pure function of script and tag") {
    std::map<std::string, std::string> script{{"T", "same text"}};
    ScriptedBackend first(script);
    ScriptedBackend second(script);
    ChatResponse a = complete(first, simple_request("T"));
    ChatResponse b = complete(second, simple_request("T"));
    CHECK(a.content == b.content);
    CHECK(a.prompt_tokens == b.prompt_tokens);
    CHECK(a.completion_tokens == b.completion_tokens);
}

TEST_CASE("scripted backend log is consistent under concurrent use") {
    ScriptedBackend backend({{"A", "x"}, {"B", "y"}});
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&backend, t] {
            for (int i = 0; i < 50; ++i) {
                complete(backend, simple_request(t % 2 == 0 ? "A" : "B"));
            }
        });
    }
    for (auto& thread : threads) thread.join();
    CHECK(backend.call_count() == 400);
}

TEST_CASE("rate limits retry with increasing delays up to the cap") {
    std::vector<int> delays;
    RetryPolicy policy;
    policy.max_retries = 3;
    policy.initial_delay_ms = 1000;
    policy.factor = 2.0;
    policy.sleeper = [&](int ms) { delays.push_back(ms); };

    SUBCASE("recovers within the budget") {
        FlakyBackend backend(2, "rate");
        ChatResponse response = complete(backend, simple_request(), policy);
        CHECK(response.content == "recovered");
        CHECK(backend.attempts == 3);
        REQUIRE(delays.size() == 2);
        CHECK(delays[0] == 1000);
        CHECK(delays[1] == 2000);
    }
    SUBCASE("gives up after max retries") {
        FlakyBackend backend(10, "rate");
        CHECK_THROWS_AS(complete(backend, simple_request(), policy), RateLimitedError);
        CHECK(backend.attempts == 4);   // 1 initial + 3 retries
        CHECK(delays == std::vector<int>{1000, 2000, 4000});
    }
    SUBCASE("network errors are retried too") {
        FlakyBackend backend(1, "net");
        CHECK(complete(backend, simple_request(), policy).content == "recovered");
        CHECK(backend.attempts == 2);
    }
}

TEST_CASE("auth and malformed-response errors never retry") {
    std::vector<int> delays;
    RetryPolicy policy;
    policy.sleeper = [&](int ms) { delays.push_back(ms); };

    FlakyBackend auth_backend(10, "auth");
    CHECK_THROWS_AS(complete(auth_backend, simple_request(), policy), AuthError);
    CHECK(auth_backend.attempts == 1);

    FlakyBackend malformed_backend(10, "malformed");
    CHECK_THROWS_AS(complete(malformed_backend, simple_request(), policy),
                    MalformedResponseError);
    CHECK(malformed_backend.attempts == 1);
    CHECK(delays.empty());
}

TEST_CASE("http backend sends the wire payload with defaults and auth header") {
    ::setenv("FINQA_TEST_KEY", "sk-secret-123", 1);
    auto transport = std::make_shared<FakeTransport>();
    HttpBackend backend(http_profile("FINQA_TEST_KEY"), transport);

    ChatRequest request;
    request.messages = {{Role::System, "be terse"}, {Role::User, "hello"}};
    ChatResponse response = backend.complete_once(request);

    CHECK(transport->last_url == "https://api.example.test/v1/chat/completions");
    json payload = json::parse(transport->last_body);
    CHECK(payload["temperature"].get<double>() == doctest::Approx(0.1));
    CHECK(payload["max_tokens"].get<int>() == 1000);
    CHECK(payload["model"] == "test-model");   // filled from the profile
    REQUIRE(transport->last_headers.size() == 1);
    CHECK(transport->last_headers[0].first == "Authorization");
    CHECK(transport->last_headers[0].second == "Bearer sk-secret-123");
    CHECK(response.content == "hello");
    CHECK(response.prompt_tokens == 7);
    CHECK_FALSE(response.usage_missing);
}

TEST_CASE("http backend requires the auth env var when the profile names one") {
    ::unsetenv("FINQA_MISSING_KEY");
    auto transport = std::make_shared<FakeTransport>();
    HttpBackend backend(http_profile("FINQA_MISSING_KEY"), transport);
    CHECK_THROWS_AS(backend.complete_once(simple_request()), AuthError);
    CHECK(transport->calls == 0);
}

TEST_CASE("http backend maps status codes to error classes") {
    auto transport = std::make_shared<FakeTransport>();
    HttpBackend backend(http_profile(), transport);
    ChatRequest request = simple_request();

    transport->next = {401, "{}"};
    CHECK_THROWS_AS(backend.complete_once(request), AuthError);
    transport->next = {403, "{}"};
    CHECK_THROWS_AS(backend.complete_once(request), AuthError);
    transport->next = {429, "{}"};
    CHECK_THROWS_AS(backend.complete_once(request), RateLimitedError);
    transport->next = {400, R"({"error":{"message":"maximum context length exceeded"}})"};
    CHECK_THROWS_AS(backend.complete_once(request), ContextOverflowError);
    transport->next = {500, "{}"};
    CHECK_THROWS_AS(backend.complete_once(request), NetworkError);
    transport->next = {418, "teapot"};
    CHECK_THROWS_AS(backend.complete_once(request), MalformedResponseError);
    transport->next = {200, "not json"};
    CHECK_THROWS_AS(backend.complete_once(request), MalformedResponseError);
    transport->next = {200, R"({"choices":[]})"};
    CHECK_THROWS_AS(backend.complete_once(request), MalformedResponseError);
}

TEST_CASE("missing usage is recorded as zeros with a flag, never estimated") {
    auto transport = std::make_shared<FakeTransport>();
    transport->next = {200, R"({"choices":[{"message":{"content":"no usage here"}}]})"};
    HttpBackend backend(http_profile(), transport);
    ChatResponse response = backend.complete_once(simple_request());
    CHECK(response.usage_missing);
    CHECK(response.prompt_tokens == 0);
    CHECK(response.completion_tokens == 0);
}

TEST_CASE("trace sink redacts the bearer token") {
    ::setenv("FINQA_TEST_KEY", "sk-redact-me", 1);
    std::vector<std::string> lines;
    auto transport = std::make_shared<FakeTransport>();
    HttpBackend backend(http_profile("FINQA_TEST_KEY"), transport,
                        [&](const std::string& line) { lines.push_back(line); });
    backend.complete_once(simple_request());
    REQUIRE(lines.size() == 2);
    for (const auto& line : lines) {
        CHECK(line.find("sk-redact-me") == std::string::npos);
    }
}

TEST_CASE("backend config loads profiles and keeps secrets out of the file") {
    finqa::testing::TempDir dir("config");

    SUBCASE("valid config") {
        util::write_file(dir.file("ok.json"), R"({
            "backends": [
                {"name": "a", "endpoint": "https://x.test/v1", "auth_env_var": "K", "model": "m"},
                {"name": "b", "endpoint": "http://y.test", "model": "n",
                 "supports_system_prompt": false}
            ],
            "embedding": {"endpoint": "https://x.test/v1", "model": "all-MiniLM-L6-v2"}
        })");
        BackendConfig config = load_backend_config(dir.file("ok.json"));
        REQUIRE(config.backends.size() == 2);
        CHECK(config.backends[0].supports_system_prompt);
        CHECK_FALSE(config.backends[1].supports_system_prompt);
        REQUIRE(config.embedding.has_value());
        CHECK(config.embedding->model == "all-MiniLM-L6-v2");
        CHECK(find_backend(config, "b").name == "b");
        CHECK_THROWS_AS(find_backend(config, "zzz"), MissingDependencyError);
    }
    SUBCASE("inline secret rejected") {
        util::write_file(dir.file("bad.json"), R"({
            "backends": [{"name": "a", "endpoint": "https://x.test", "model": "m",
                          "api_key": "sk-oops"}]
        })");
        CHECK_THROWS_AS(load_backend_config(dir.file("bad.json")), SchemaError);
    }
    SUBCASE("malformed endpoint rejected") {
        util::write_file(dir.file("bad2.json"), R"({
            "backends": [{"name": "a", "endpoint": "ftp://x", "model": "m"}]
        })");
        CHECK_THROWS_AS(load_backend_config(dir.file("bad2.json")), SchemaError);
    }
}
