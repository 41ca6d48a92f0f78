#include "sugmine/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "sugmine/error.hpp"
#include "sugmine/text.hpp"

namespace sugmine::llm {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string mock_key(std::optional<TemplateName> name, std::string_view sha) {
    std::string key(name ? to_string(*name) : std::string_view("*"));
    key += ':';
    key += sha;
    return key;
}

bool is_hex_digest(std::string_view s) {
    return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

}  // namespace

std::string LlmRequest::user_content() const {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it)
        if (it->role == Role::user) return it->content;
    return {};
}

std::string LlmRequest::to_wire_json() const {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    nlohmann::ordered_json body;
    body["model"] = model;
    body["messages"] = std::move(msgs);
    body["temperature"] = temperature;
    body["max_tokens"] = max_tokens;
    body["stream"] = false;
    return body.dump();
}

void LlmRequest::validate() const {
    if (model.empty()) throw ConfigError("llm request: model must be non-empty");
    if (messages.empty()) throw ConfigError("llm request: no messages");
    if (!(temperature >= 0.0)) throw ConfigError("llm request: temperature must be >= 0");
    if (max_tokens <= 0) throw ConfigError("llm request: max_tokens must be positive");
    if (timeout.count() <= 0) throw ConfigError("llm request: timeout must be positive");
}

HttpBackend::HttpBackend(std::string base_url) : base_url_(std::move(base_url)) {
    std::string_view url = base_url_;
    while (!url.empty() && url.back() == '/') url.remove_suffix(1);
    constexpr std::string_view scheme = "http://";
    if (url.substr(0, scheme.size()) != scheme)
        throw ConfigError("llm base URL must start with http:// (got '" + base_url_ + "')");
    const auto slash = url.find('/', scheme.size());
    host_ = std::string(url.substr(0, slash));
    if (host_.size() == scheme.size()) throw ConfigError("llm base URL has no host: '" + base_url_ + "'");
    path_ = slash == std::string_view::npos ? std::string() : std::string(url.substr(slash));
    path_ += "/v1/chat/completions";
}

RawReply HttpBackend::send(const LlmRequest& request) {
    httplib::Client client(host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const auto start = Clock::now();
    auto res = client.Post(path_, request.to_wire_json(), "application/json");
    if (!res) {
        const auto err = res.error();
        const auto elapsed = Clock::now() - start;
        const std::string what = "llm transport: " + httplib::to_string(err) + " (" + host_ + path_ + ")";
        if (err == httplib::Error::ConnectionTimeout || (err == httplib::Error::Read && elapsed >= request.timeout))
            throw TimeoutError(what);
        throw TransportError(what);
    }
    return {res->status, res->body};
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string completion_body(std::string_view content, std::string_view finish_reason) {
    json body = {{"object", "chat.completion"},
                 {"choices",
                  json::array({{{"index", 0},
                                {"message", {{"role", "assistant"}, {"content", std::string(content)}}},
                                {"finish_reason", std::string(finish_reason)}}})}};
    return body.dump();
}

void MockBackend::add(TemplateName name, std::string_view user_sha256, std::string response) {
    if (!is_hex_digest(user_sha256)) throw ConfigError("mock: user_sha256 must be 64 lowercase hex digits");
    std::lock_guard lock(mutex_);
    responses_[mock_key(name, user_sha256)] = std::move(response);
}

void MockBackend::add_for_content(TemplateName name, std::string_view user_content, std::string response) {
    add(name, sha256_hex(user_content), std::move(response));
}

void MockBackend::set_default(std::string response) {
    std::lock_guard lock(mutex_);
    default_ = std::move(response);
}

void MockBackend::load_fixtures(std::string_view jsonl, std::string_view source) {
    std::istringstream in{std::string(jsonl)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const std::string where = std::string(source) + ":" + std::to_string(lineno) + ": ";
        try {
            const auto j = json::parse(line);
            const auto& match = j.at("match");
            const auto name = parse_template_name(match.at("template_name").get<std::string>());
            add(name, match.at("user_sha256").get<std::string>(), j.at("response").get<std::string>());
        } catch (const json::exception& e) {
            throw DataError(where + e.what());
        } catch (const ConfigError& e) {
            throw DataError(where + e.what());
        }
    }
}

void MockBackend::load_fixture_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open mock fixtures '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    load_fixtures(buf.str(), path.string());
}

std::string MockBackend::fixture_line(TemplateName name, std::string_view user_content, std::string_view response) {
    nlohmann::ordered_json j;
    j["match"] = {{"template_name", to_string(name)}, {"user_sha256", sha256_hex(user_content)}};
    j["response"] = std::string(response);
    return j.dump();
}

RawReply MockBackend::send(const LlmRequest& request) {
    const auto content = request.user_content();
    const auto sha = sha256_hex(content);
    std::lock_guard lock(mutex_);
    calls_.push_back({request.template_name, content});
    if (auto it = responses_.find(mock_key(request.template_name, sha)); it != responses_.end())
        return {200, completion_body(it->second)};
    if (default_) return {200, completion_body(*default_)};
    throw MockMiss("mock: no fixture for template '" +
                   std::string(request.template_name ? to_string(*request.template_name) : "?") +
                   "' user_sha256=" + sha);
}

std::vector<MockBackend::Call> MockBackend::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

std::size_t MockBackend::call_count() const {
    std::lock_guard lock(mutex_);
    return calls_.size();
}

std::size_t MockBackend::fixture_count() const {
    std::lock_guard lock(mutex_);
    return responses_.size();
}

Millis RetryPolicy::backoff(int retry) const {
    if (retry < 1) return Millis{0};
    const double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, retry - 1);
    return Millis{static_cast<Millis::rep>(std::min(ms, static_cast<double>(max_backoff.count())))};
}

void RetryPolicy::validate() const {
    if (max_retries < 0) throw ConfigError("retry: max_retries must be >= 0");
    if (initial_backoff.count() < 0 || max_backoff.count() < 0) throw ConfigError("retry: backoff must be >= 0");
    if (!(multiplier >= 1.0)) throw ConfigError("retry: multiplier must be >= 1");
}

void GatewayConfig::validate() const {
    if (model.empty()) throw ConfigError("gateway: model must be non-empty");
    if (!(temperature >= 0.0)) throw ConfigError("gateway: temperature must be >= 0");
    if (max_tokens <= 0) throw ConfigError("gateway: max_tokens must be positive");
    if (timeout.count() <= 0) throw ConfigError("gateway: timeout must be positive");
    if (concurrency < 1) throw ConfigError("gateway: concurrency must be >= 1");
    retry.validate();
}

LlmResponse parse_completion(std::string_view body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error&) {
        throw ProtocolError("llm response is not JSON", std::string(body));
    }
    try {
        const auto& choice = j.at("choices").at(0);
        LlmResponse out;
        if (auto fr = choice.find("finish_reason"); fr != choice.end() && fr->is_string()) out.finish_reason = *fr;
        const auto& content = choice.at("message").at("content");
        if (content.is_null()) {
            if (out.finish_reason.empty() || out.finish_reason == "stop")
                throw ProtocolError("llm response has no content", std::string(body));
            return out;
        }
        out.content = content.get<std::string>();
        return out;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("llm response has unexpected shape: ") + e.what(), std::string(body));
    }
}

class Gateway::Slot {
public:
    explicit Slot(Gateway& g) : g_(g) {
        std::unique_lock lock(g_.slot_mutex_);
        g_.slot_cv_.wait(lock, [&] { return g_.in_flight_ < g_.config_.concurrency; });
        ++g_.in_flight_;
    }
    ~Slot() {
        {
            std::lock_guard lock(g_.slot_mutex_);
            --g_.in_flight_;
        }
        g_.slot_cv_.notify_one();
    }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

private:
    Gateway& g_;
};

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayConfig config, PromptLibrary prompts)
    : backend_(std::move(backend)), config_(std::move(config)), prompts_(std::move(prompts)) {
    if (!backend_) throw ConfigError("gateway: backend must not be null");
    config_.validate();
}

LlmRequest Gateway::make_request(TemplateName name, const Bindings& bindings) const {
    LlmRequest req;
    req.model = config_.model;
    req.messages = render(prompts_.get(name), bindings);
    req.temperature = config_.temperature;
    req.max_tokens = config_.max_tokens;
    req.timeout = config_.timeout;
    req.template_name = name;
    return req;
}

LlmResponse Gateway::complete(const LlmRequest& request) {
    request.validate();
    ++requests_;
    Slot slot(*this);
    const int max_attempts = 1 + config_.retry.max_retries;
    const auto start = Clock::now();
    std::string last_error;
    for (int attempt = 1;; ++attempt) {
        ++attempts_;
        RawReply reply;
        try {
            reply = backend_->send(request);
        } catch (const TimeoutError& e) {
            throw TimeoutError(e.what(), attempt);
        } catch (const TransportError& e) {
            last_error = e.what();
            reply.status = -1;
        }
        if (reply.status >= 200 && reply.status < 300) {
            auto resp = parse_completion(reply.body);
            resp.attempt_count = attempt;
            resp.latency = std::chrono::duration_cast<Millis>(Clock::now() - start);
            return resp;
        }
        const bool retryable = reply.status == -1 || reply.status == 429 || reply.status >= 500;
        if (reply.status != -1) last_error = "llm endpoint returned HTTP " + std::to_string(reply.status);
        if (!retryable) throw HttpStatusError(last_error, reply.status, attempt);
        if (attempt >= max_attempts)
            throw TransportError(last_error + " (gave up after " + std::to_string(attempt) + " attempts)", attempt);
        std::this_thread::sleep_for(config_.retry.backoff(attempt));
    }
}

}  // namespace sugmine::llm
