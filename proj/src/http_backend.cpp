#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "hvqa/backends.hpp"
#include "hvqa/common.hpp"
#include "httplib.h"
#include "json.hpp"

namespace hvqa {

using json = nlohmann::json;

namespace {

// Releases one in-flight slot on scope exit.
class SlotGuard {
  public:
    explicit SlotGuard(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
    ~SlotGuard() { sem_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

  private:
    std::counting_semaphore<>& sem_;
};

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::string chat_request_body(const HttpBackendConfig& config, const ModelRequest& request) {
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", request.prompt}});
    if (!request.image_ref.empty()) {
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", request.image_ref}}}});
    }
    json body;
    body["model"] = config.model;
    body["messages"] = json::array({{{"role", "user"}, {"content", std::move(content)}}});
    // Greedy decoding is requested the way chat servers expect it.
    body["temperature"] = request.decode.greedy ? 0.0 : request.decode.temperature;
    body["top_p"] = request.decode.greedy ? 1.0 : request.decode.top_p;
    body["max_tokens"] = request.decode.max_new_tokens;
    return body.dump();
}

std::string parse_chat_response(std::string_view body) {
    try {
        const json j = json::parse(body);
        const json& content = j.at("choices").at(0).at("message").at("content");
        if (content.is_string()) return content.get<std::string>();
        std::string text;
        for (const auto& part : content) {
            if (part.value("type", "") == "text") text += part.at("text").get<std::string>();
        }
        return text;
    } catch (const json::exception& e) {
        throw BackendError(BackendError::Kind::kRefusal, std::string("unreadable chat response: ") + e.what());
    }
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
    : config_(std::move(config)), in_flight_(std::max(1, config_.max_in_flight)) {
    const auto scheme_end = config_.base_url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("http backend: base_url needs a scheme: " + config_.base_url);
    const auto path_start = config_.base_url.find('/', scheme_end + 3);
    scheme_host_port_ = config_.base_url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    if (config_.max_retries < 0) throw ConfigError("http backend: max_retries must be >= 0");
    if (!(config_.timeout_s > 0.0)) throw ConfigError("http backend: timeout_s must be > 0");
}

HttpChatBackend::~HttpChatBackend() = default;

std::string HttpChatBackend::descriptor() const { return "http:" + config_.model + "@" + config_.base_url; }

ModelResponse HttpChatBackend::invoke(const ModelRequest& request) {
    SlotGuard slot(in_flight_);
    const std::string body = chat_request_body(config_, request);
    const std::string path = path_prefix_ + "/chat/completions";

    httplib::Headers headers;
    if (const char* token = std::getenv(config_.api_key_env.c_str()); token != nullptr && *token != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    const auto timeout = std::chrono::duration<double>(config_.timeout_s);
    const auto whole = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout - whole);

    const int max_attempts = 1 + config_.max_retries;
    double backoff = config_.backoff_initial_ms;
    std::string last_error;
    BackendError::Kind last_kind = BackendError::Kind::kTransport;
    const auto t0 = std::chrono::steady_clock::now();
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        httplib::Client client(scheme_host_port_);
        client.set_connection_timeout(whole.count(), micros.count());
        client.set_read_timeout(whole.count(), micros.count());
        client.set_write_timeout(whole.count(), micros.count());

        const auto sent = std::chrono::steady_clock::now();
        auto result = client.Post(path, headers, body, "application/json");
        if (!result) {
            // httplib reports a read timeout as a plain read error.
            const bool timed_out = result.error() == httplib::Error::ConnectionTimeout ||
                                   std::chrono::steady_clock::now() - sent >= timeout;
            last_kind = timed_out ? BackendError::Kind::kTimeout : BackendError::Kind::kTransport;
            last_error = "transport error: " + httplib::to_string(result.error());
        } else if (result->status >= 200 && result->status < 300) {
            ModelResponse r;
            r.text = parse_chat_response(result->body);
            r.attempts = attempt;
            r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            return r;
        } else if (retryable_status(result->status)) {
            last_kind = result->status == 408 ? BackendError::Kind::kTimeout : BackendError::Kind::kTransport;
            last_error = "HTTP " + std::to_string(result->status);
        } else {
            throw BackendError(BackendError::Kind::kRefusal,
                               "HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 200), attempt);
        }
        if (attempt < max_attempts) {
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(backoff));
            backoff *= config_.backoff_multiplier;
        }
    }
    throw BackendError(last_kind, last_error + " after " + std::to_string(max_attempts) + " attempts", max_attempts);
}

}  // namespace hvqa
