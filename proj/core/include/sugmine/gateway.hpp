#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sugmine/llm_error.hpp"
#include "sugmine/prompt.hpp"

namespace sugmine::llm {

using Millis = std::chrono::milliseconds;

struct LlmRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 512;
    Millis timeout{60000};
    /// Not sent on the wire; used for mock matching and call logs.
    std::optional<TemplateName> template_name;

    /// Content of the last user message, the mock's matching key.
    std::string user_content() const;
    /// {model, messages, temperature, max_tokens} in chat-completions shape.
    std::string to_wire_json() const;
    /// Throws ConfigError on an empty model, no messages, negative
    /// temperature or non-positive max_tokens.
    void validate() const;
};

struct LlmResponse {
    std::string content;
    std::string finish_reason;
    Millis latency{0};
    int attempt_count = 1;
};

/// One HTTP exchange as seen by the gateway.
struct RawReply {
    int status = 200;
    std::string body;
};

/// Transport to a chat-completions endpoint. Implementations throw
/// TransportError for connection failures and TimeoutError for timeouts.
class Backend {
public:
    virtual ~Backend() = default;
    virtual RawReply send(const LlmRequest& request) = 0;
};

/// POST {base_url}/v1/chat/completions. base_url may carry a path prefix,
/// e.g. "http://localhost:11434" or "http://proxy:8080/ollama". Plain HTTP only.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(std::string base_url);
    RawReply send(const LlmRequest& request) override;
    const std::string& base_url() const noexcept { return base_url_; }

private:
    std::string base_url_;
    std::string host_;
    std::string path_;
};

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Chat-completions JSON body wrapping one assistant message.
std::string completion_body(std::string_view content, std::string_view finish_reason = "stop");

/// In-process backend answering from canned responses keyed by template name
/// and the SHA-256 of the rendered user content. Never touches the network.
class MockBackend : public Backend {
public:
    struct Call {
        std::optional<TemplateName> template_name;
        std::string user_content;
    };

    void add(TemplateName name, std::string_view user_sha256, std::string response);
    void add_for_content(TemplateName name, std::string_view user_content, std::string response);
    /// Fallback reply for unmatched prompts. Without one, a miss throws MockMiss.
    void set_default(std::string response);

    /// JSONL lines of {"match": {"template_name", "user_sha256"}, "response"}.
    void load_fixtures(std::string_view jsonl, std::string_view source = "<fixtures>");
    void load_fixture_file(const std::filesystem::path& path);
    static std::string fixture_line(TemplateName name, std::string_view user_content, std::string_view response);

    RawReply send(const LlmRequest& request) override;

    std::vector<Call> calls() const;
    std::size_t call_count() const;
    std::size_t fixture_count() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> responses_;
    std::optional<std::string> default_;
    std::vector<Call> calls_;
};

struct RetryPolicy {
    int max_retries = 3;
    Millis initial_backoff{500};
    double multiplier = 2.0;
    Millis max_backoff{8000};

    /// Delay before retry number `retry` (1-based).
    Millis backoff(int retry) const;
    void validate() const;
};

struct GatewayConfig {
    std::string model = "gemma3:27b";
    double temperature = 0.0;
    int max_tokens = 512;
    Millis timeout{60000};
    RetryPolicy retry;
    std::size_t concurrency = 4;

    void validate() const;
};

/// Parses a chat-completions body. Throws ProtocolError.
LlmResponse parse_completion(std::string_view body);

/// Thread-safe front end: renders prompts, bounds in-flight requests and
/// applies the retry policy.
class Gateway {
public:
    Gateway(std::shared_ptr<Backend> backend, GatewayConfig config = {},
            PromptLibrary prompts = PromptLibrary::standard());

    /// Retries transport errors, 5xx and 429; other 4xx and timeouts fail at once.
    LlmResponse complete(const LlmRequest& request);

    LlmRequest make_request(TemplateName name, const Bindings& bindings) const;
    LlmResponse ask(TemplateName name, const Bindings& bindings) { return complete(make_request(name, bindings)); }

    const GatewayConfig& config() const noexcept { return config_; }
    const PromptLibrary& prompts() const noexcept { return prompts_; }
    /// Logical requests issued through complete().
    std::size_t request_count() const noexcept { return requests_.load(); }
    /// Backend sends including retries.
    std::size_t attempt_count() const noexcept { return attempts_.load(); }

private:
    class Slot;

    std::shared_ptr<Backend> backend_;
    GatewayConfig config_;
    PromptLibrary prompts_;
    std::mutex slot_mutex_;
    std::condition_variable slot_cv_;
    std::size_t in_flight_ = 0;
    std::atomic<std::size_t> requests_{0};
    std::atomic<std::size_t> attempts_{0};
};

}  // namespace sugmine::llm
