#pragma once

#include "finqa/errors.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace finqa::gateway {

enum class Role { System, User, Assistant };

const char* role_name(Role role);

struct ChatMessage {
    Role role = Role::User;
    std::string content;
};

/// One chat-completion request. Defaults follow the project-wide inference
/// settings: temperature 0.1, max_tokens 1000. `tag` identifies the call
/// (agent:question:pass) for scripted backends and logs; it is never sent
/// on the wire.
struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.1;
    int max_tokens = 1000;
    std::string tag;
};

/// Validates message shape (non-empty contents, at most one system message
/// and it must be first), temperature range [0,2], positive max_tokens.
/// Throws InvalidRequestError.
void validate_request(const ChatRequest& request);

/// Canonical OpenAI-style chat/completions JSON body. Also the digest source
/// for call records, so it must stay deterministic.
std::string serialize_request(const ChatRequest& request);

struct ChatResponse {
    std::string content;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long latency_ms = 0;
    bool usage_missing = false;
};

struct BackendProfile {
    std::string name;
    std::string endpoint;       // e.g. https://api.openai.com/v1
    std::string auth_env_var;   // name of the env var holding the key; empty = no auth
    std::string model;
    bool supports_system_prompt = true;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Single completion attempt. Retries live in complete().
    virtual ChatResponse complete_once(const ChatRequest& request) = 0;
    virtual const BackendProfile& profile() const = 0;
};

struct RetryPolicy {
    int max_retries = 3;
    int initial_delay_ms = 1000;
    double factor = 2.0;
    /// Injection point for tests; defaults to a real sleep.
    std::function<void(int delay_ms)> sleeper;
};

/// Validates, then runs the request with retry: RateLimited, NetworkError and
/// 5xx-class failures back off exponentially up to max_retries; AuthError,
/// ContextOverflow and MalformedResponse are rethrown immediately.
ChatResponse complete(ChatBackend& backend, const ChatRequest& request,
                      const RetryPolicy& policy = {});

/// Deterministic offline backend: replies come from a tag -> text script.
/// Every request is recorded verbatim; the log is safe to read concurrently.
/// Usage numbers are whitespace-token counts so cost accounting stays
/// meaningful in tests.
class ScriptedBackend : public ChatBackend {
public:
    struct RecordedCall {
        std::string tag;
        ChatRequest request;
        std::string serialized;
    };

    explicit ScriptedBackend(std::map<std::string, std::string> script,
                             BackendProfile profile = default_profile());

    ChatResponse complete_once(const ChatRequest& request) override;
    const BackendProfile& profile() const override { return profile_; }

    std::vector<RecordedCall> calls() const;
    size_t call_count() const;

    static BackendProfile default_profile();

private:
    std::map<std::string, std::string> script_;
    BackendProfile profile_;
    mutable std::mutex mutex_;
    std::vector<RecordedCall> log_;
};

struct HttpResult {
    int status = 0;
    std::string body;
};

/// Minimal transport seam so the HTTP backend can be tested without sockets.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResult post(const std::string& url,
                            const std::vector<std::pair<std::string, std::string>>& headers,
                            const std::string& body) = 0;
};

std::shared_ptr<HttpTransport> make_httplib_transport();

/// OpenAI-compatible chat-completions client. Auth is read from the env var
/// named in the profile at call time, never stored in config files.
class HttpBackend : public ChatBackend {
public:
    using TraceSink = std::function<void(const std::string& line)>;

    explicit HttpBackend(BackendProfile profile,
                         std::shared_ptr<HttpTransport> transport = nullptr,
                         TraceSink trace = nullptr);

    ChatResponse complete_once(const ChatRequest& request) override;
    const BackendProfile& profile() const override { return profile_; }

private:
    BackendProfile profile_;
    std::shared_ptr<HttpTransport> transport_;
    TraceSink trace_;
};

/// Records every successful completion that passes through it. The pipeline
/// wraps the real backend with this to build call records; failed attempts
/// never appear, so per-step call counts stay exact.
class RecordingBackend : public ChatBackend {
public:
    struct Entry {
        std::string tag;
        std::string request_json;
        std::string response_content;
        long long prompt_tokens = 0;
        long long completion_tokens = 0;
        long long latency_ms = 0;
        bool usage_missing = false;
    };

    explicit RecordingBackend(ChatBackend& inner) : inner_(inner) {}

    ChatResponse complete_once(const ChatRequest& request) override;
    const BackendProfile& profile() const override { return inner_.profile(); }

    const std::vector<Entry>& entries() const { return entries_; }

private:
    ChatBackend& inner_;
    std::vector<Entry> entries_;
};

struct EmbeddingProfile {
    std::string endpoint;
    std::string auth_env_var;
    std::string model = "all-MiniLM-L6-v2";
};

struct BackendConfig {
    std::vector<BackendProfile> backends;
    std::optional<EmbeddingProfile> embedding;
};

/// Loads a JSON config listing backend profiles. Rejects any attempt to put
/// key material in the file body: secrets go through auth_env_var only.
BackendConfig load_backend_config(const std::string& path);

const BackendProfile& find_backend(const BackendConfig& config, const std::string& name);

} // namespace finqa::gateway
