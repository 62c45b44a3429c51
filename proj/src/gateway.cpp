#include "finqa/gateway.hpp"

#include "finqa/util.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace finqa::gateway {

using nlohmann::json;

const char* role_name(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

void validate_request(const ChatRequest& request) {
    if (request.messages.empty()) throw InvalidRequestError("request has no messages");
    for (size_t i = 0; i < request.messages.size(); ++i) {
        const auto& m = request.messages[i];
        if (m.content.empty()) {
            throw InvalidRequestError("message " + std::to_string(i) + " has empty content");
        }
        if (m.role == Role::System && i != 0) {
            throw InvalidRequestError("system message must be first");
        }
    }
    size_t system_count = 0;
    for (const auto& m : request.messages) {
        if (m.role == Role::System) ++system_count;
    }
    if (system_count > 1) throw InvalidRequestError("at most one system message per request");
    if (request.temperature < 0.0 || request.temperature > 2.0) {
        throw InvalidRequestError("temperature out of range [0,2]");
    }
    if (request.max_tokens <= 0) throw InvalidRequestError("max_tokens must be positive");
}

std::string serialize_request(const ChatRequest& request) {
    json body;
    body["model"] = request.model;
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    body["messages"] = std::move(messages);
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    return body.dump();
}

ChatResponse complete(ChatBackend& backend, const ChatRequest& request, const RetryPolicy& policy) {
    validate_request(request);
    auto sleep_fn = policy.sleeper
        ? policy.sleeper
        : [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };

    int attempt = 0;
    double delay = static_cast<double>(policy.initial_delay_ms);
    for (;;) {
        try {
            return backend.complete_once(request);
        } catch (const AuthError&) {
            throw;
        } catch (const ContextOverflowError&) {
            throw;
        } catch (const MalformedResponseError&) {
            throw;
        } catch (const RateLimitedError&) {
            if (attempt >= policy.max_retries) throw;
        } catch (const NetworkError&) {
            if (attempt >= policy.max_retries) throw;
        }
        sleep_fn(static_cast<int>(delay));
        delay *= policy.factor;
        ++attempt;
    }
}

// ---------------------------------------------------------------------------
// Scripted backend

BackendProfile ScriptedBackend::default_profile() {
    BackendProfile p;
    p.name = "scripted";
    p.endpoint = "scripted://local";
    p.model = "scripted";
    p.supports_system_prompt = true;
    return p;
}

ScriptedBackend::ScriptedBackend(std::map<std::string, std::string> script, BackendProfile profile)
    : script_(std::move(script)), profile_(std::move(profile)) {}

ChatResponse ScriptedBackend::complete_once(const ChatRequest& request) {
    std::string serialized = serialize_request(request);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        log_.push_back({request.tag, request, serialized});
    }
    auto it = script_.find(request.tag);
    if (it == script_.end()) {
        throw ScriptMissError("no scripted reply for tag '" + request.tag + "'");
    }
    ChatResponse response;
    response.content = it->second;
    long long prompt_words = 0;
    for (const auto& m : request.messages) prompt_words += util::count_words(m.content);
    response.prompt_tokens = prompt_words;
    response.completion_tokens = util::count_words(response.content);
    response.latency_ms = 0;
    return response;
}

std::vector<ScriptedBackend::RecordedCall> ScriptedBackend::calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return log_;
}

size_t ScriptedBackend::call_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return log_.size();
}

// ---------------------------------------------------------------------------
// HTTP backend

namespace {

class HttplibTransport : public HttpTransport {
public:
    HttpResult post(const std::string& url,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    const std::string& body) override {
        auto split = url.find('/', url.find("//") + 2);
        std::string base = split == std::string::npos ? url : url.substr(0, split);
        std::string path = split == std::string::npos ? "/" : url.substr(split);

        httplib::Client client(base);
        client.set_connection_timeout(15, 0);
        client.set_read_timeout(120, 0);
        httplib::Headers hdrs;
        for (const auto& [k, v] : headers) hdrs.emplace(k, v);
        auto res = client.Post(path, hdrs, body, "application/json");
        if (!res) {
            throw NetworkError("transport failure posting to " + base + path + ": " +
                               httplib::to_string(res.error()));
        }
        return {res->status, res->body};
    }
};

bool looks_like_context_overflow(const std::string& body) {
    std::string lower = util::to_lower(body);
    return lower.find("context length") != std::string::npos ||
           lower.find("context_length") != std::string::npos ||
           lower.find("maximum context") != std::string::npos ||
           lower.find("too many tokens") != std::string::npos;
}

std::string redact_auth(std::string line, const std::string& secret) {
    if (secret.empty()) return line;
    for (size_t pos = line.find(secret); pos != std::string::npos; pos = line.find(secret, pos)) {
        line.replace(pos, secret.size(), "***");
    }
    return line;
}

} // namespace

std::shared_ptr<HttpTransport> make_httplib_transport() {
    return std::make_shared<HttplibTransport>();
}

HttpBackend::HttpBackend(BackendProfile profile, std::shared_ptr<HttpTransport> transport,
                         TraceSink trace)
    : profile_(std::move(profile)),
      transport_(transport ? std::move(transport) : make_httplib_transport()),
      trace_(std::move(trace)) {}

ChatResponse HttpBackend::complete_once(const ChatRequest& request) {
    std::string api_key;
    if (!profile_.auth_env_var.empty()) {
        const char* value = std::getenv(profile_.auth_env_var.c_str());
        if (value == nullptr || *value == '\0') {
            throw AuthError("environment variable " + profile_.auth_env_var +
                            " is not set for backend '" + profile_.name + "'");
        }
        api_key = value;
    }

    ChatRequest wire = request;
    if (wire.model.empty()) wire.model = profile_.model;
    std::string body = serialize_request(wire);

    std::vector<std::pair<std::string, std::string>> headers;
    if (!api_key.empty()) headers.emplace_back("Authorization", "Bearer " + api_key);

    std::string url = profile_.endpoint;
    while (!url.empty() && url.back() == '/') url.pop_back();
    url += "/chat/completions";

    if (trace_) trace_(redact_auth("POST " + url + " " + body, api_key));

    long long t0 = util::steady_ms();
    HttpResult result = transport_->post(url, headers, body);
    long long elapsed = util::steady_ms() - t0;

    if (trace_) {
        trace_(redact_auth("HTTP " + std::to_string(result.status) + " " + result.body, api_key));
    }

    if (result.status == 401 || result.status == 403) {
        throw AuthError("backend '" + profile_.name + "' rejected credentials (HTTP " +
                        std::to_string(result.status) + ")");
    }
    if (result.status == 429) {
        throw RateLimitedError("backend '" + profile_.name + "' rate limited the request");
    }
    if (result.status == 400 && looks_like_context_overflow(result.body)) {
        throw ContextOverflowError("prompt exceeds the backend context limit");
    }
    if (result.status >= 500) {
        throw NetworkError("backend '" + profile_.name + "' returned HTTP " +
                           std::to_string(result.status));
    }
    if (result.status != 200) {
        throw MalformedResponseError("backend '" + profile_.name + "' returned HTTP " +
                                     std::to_string(result.status) + ": " + result.body);
    }

    json payload;
    try {
        payload = json::parse(result.body);
    } catch (const json::exception& ex) {
        throw MalformedResponseError(std::string("response is not valid JSON: ") + ex.what());
    }
    if (!payload.contains("choices") || !payload["choices"].is_array() ||
        payload["choices"].empty()) {
        throw MalformedResponseError("response has no choices");
    }
    const auto& first = payload["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string()) {
        throw MalformedResponseError("response choice has no message content");
    }

    ChatResponse response;
    response.content = first["message"]["content"].get<std::string>();
    response.latency_ms = elapsed;
    if (payload.contains("usage") && payload["usage"].is_object()) {
        const auto& usage = payload["usage"];
        response.prompt_tokens = usage.value("prompt_tokens", 0LL);
        response.completion_tokens = usage.value("completion_tokens", 0LL);
        if (response.prompt_tokens < 0) response.prompt_tokens = 0;
        if (response.completion_tokens < 0) response.completion_tokens = 0;
    } else {
        // Never estimate usage; record zeros and flag it.
        response.usage_missing = true;
    }
    return response;
}

// ---------------------------------------------------------------------------
// Recording backend

ChatResponse RecordingBackend::complete_once(const ChatRequest& request) {
    std::string serialized = serialize_request(request);
    long long t0 = util::steady_ms();
    ChatResponse response = inner_.complete_once(request);
    long long elapsed = util::steady_ms() - t0;
    long long latency = response.latency_ms > 0 ? response.latency_ms : elapsed;
    entries_.push_back({request.tag, std::move(serialized), response.content,
                        response.prompt_tokens, response.completion_tokens, latency,
                        response.usage_missing});
    return response;
}

// ---------------------------------------------------------------------------
// Config

namespace {

void require_no_inline_secrets(const json& object, const std::string& where) {
    static const char* forbidden[] = {"api_key", "apikey", "key", "token", "secret"};
    for (const char* field : forbidden) {
        if (object.contains(field)) {
            throw SchemaError("config field '" + std::string(field) + "' at " + where +
                              " is not allowed; use auth_env_var and set the key in the environment");
        }
    }
}

void require_endpoint(const std::string& endpoint, const std::string& where) {
    if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0) {
        throw SchemaError("endpoint at " + where + " must start with http:// or https://");
    }
}

} // namespace

BackendConfig load_backend_config(const std::string& path) {
    json root;
    try {
        root = json::parse(util::read_file(path));
    } catch (const json::exception& ex) {
        throw SchemaError("config " + path + " is not valid JSON: " + ex.what());
    }
    if (!root.is_object() || !root.contains("backends") || !root["backends"].is_array()) {
        throw SchemaError("config " + path + " must be an object with a 'backends' array");
    }

    BackendConfig config;
    size_t i = 0;
    for (const auto& entry : root["backends"]) {
        std::string where = "/backends/" + std::to_string(i);
        if (!entry.is_object()) throw SchemaError(where + " must be an object");
        require_no_inline_secrets(entry, where);
        BackendProfile profile;
        profile.name = entry.value("name", "");
        profile.endpoint = entry.value("endpoint", "");
        profile.auth_env_var = entry.value("auth_env_var", "");
        profile.model = entry.value("model", "");
        profile.supports_system_prompt = entry.value("supports_system_prompt", true);
        if (profile.name.empty()) throw SchemaError(where + "/name is required");
        require_endpoint(profile.endpoint, where + "/endpoint");
        if (profile.model.empty()) throw SchemaError(where + "/model is required");
        config.backends.push_back(std::move(profile));
        ++i;
    }
    if (root.contains("embedding")) {
        const auto& e = root["embedding"];
        if (!e.is_object()) throw SchemaError("/embedding must be an object");
        require_no_inline_secrets(e, "/embedding");
        EmbeddingProfile profile;
        profile.endpoint = e.value("endpoint", "");
        profile.auth_env_var = e.value("auth_env_var", "");
        profile.model = e.value("model", std::string("all-MiniLM-L6-v2"));
        require_endpoint(profile.endpoint, "/embedding/endpoint");
        config.embedding = std::move(profile);
    }
    return config;
}

const BackendProfile& find_backend(const BackendConfig& config, const std::string& name) {
    for (const auto& profile : config.backends) {
        if (profile.name == name) return profile;
    }
    throw MissingDependencyError("no backend named '" + name + "' in config");
}

} // namespace finqa::gateway
