#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hvqa/instances.hpp"

namespace hvqa {

struct DecodeConfig {
    int max_new_tokens = 1;
    bool greedy = true;
    double temperature = 1.0;
    double top_p = 1.0;

    void validate() const;
    friend bool operator==(const DecodeConfig&, const DecodeConfig&) = default;
};

struct ModelRequest {
    std::string prompt;
    std::string image_ref;
    DecodeConfig decode;
};

struct ModelResponse {
    std::string text;
    std::optional<std::map<char, double>> option_probabilities;
    double latency_ms = 0.0;
    int attempts = 1;
};

class BackendError : public std::runtime_error {
  public:
    enum class Kind { kTransport, kRefusal, kTimeout, kReplayMiss };

    BackendError(Kind kind, const std::string& message, int attempts = 1)
        : std::runtime_error(message), kind_(kind), attempts_(attempts) {}

    Kind kind() const { return kind_; }
    bool retryable() const { return kind_ == Kind::kTransport || kind_ == Kind::kTimeout; }
    int attempts() const { return attempts_; }

  private:
    Kind kind_;
    int attempts_;
};

std::string_view to_string(BackendError::Kind kind);

// Backends are invoked concurrently by the harness and must be thread-safe.
class ModelBackend {
  public:
    virtual ~ModelBackend() = default;
    virtual ModelResponse invoke(const ModelRequest& request) = 0;
    virtual std::string descriptor() const = 0;
};

ModelResponse invoke(ModelBackend& backend, const ModelRequest& request);

// Replay key: hash over prompt, image reference and decode settings.
std::string request_hash(const ModelRequest& request);

// Gold answers keyed by image reference; the mocks read prompts like a model
// would and look up what the right letter is.
class AnswerKey {
  public:
    explicit AnswerKey(std::vector<VqaInstance> instances);
    const VqaInstance& lookup(std::string_view image_ref) const;

  private:
    std::vector<VqaInstance> instances_;
    std::unordered_map<std::string, std::size_t> by_ref_;
};

// What a prompt asks: all levels (joint) or one level (step).
struct PromptTarget {
    bool joint = false;
    std::size_t level = 0;  // 0-based position in per_level, step prompts only
};
PromptTarget identify_prompt(const VqaInstance& instance, std::string_view prompt);

// Calls a user function; handy for scripting failures in tests.
class ScriptedBackend final : public ModelBackend {
  public:
    using Script = std::function<std::string(const ModelRequest&)>;
    explicit ScriptedBackend(Script script, std::string name = "scripted");
    ModelResponse invoke(const ModelRequest& request) override;
    std::string descriptor() const override { return name_; }

  private:
    Script script_;
    std::string name_;
};

// Always answers the gold letter(s).
std::unique_ptr<ModelBackend> make_gold_backend(std::shared_ptr<const AnswerKey> key);

// At each asked level: with probability `accuracy_with_parent` (when the
// Known-facts line names the gold label of the previous level) or
// `accuracy_without` (otherwise) the gold letter is emitted; else a letter is
// drawn uniformly from all offered letters, gold included. Outcomes are a pure
// function of (prompt, image_ref, level, seed).
std::unique_ptr<ModelBackend> mock_conditional(double accuracy_with_parent, double accuracy_without,
                                               std::uint64_t seed, std::shared_ptr<const AnswerKey> key);

struct ReplayRecord {
    std::string request_hash;
    std::string prompt;
    std::string text;
};

class ReplayBackend final : public ModelBackend {
  public:
    explicit ReplayBackend(const std::vector<ReplayRecord>& records);
    static ReplayBackend from_jsonl(std::string_view document);
    ModelResponse invoke(const ModelRequest& request) override;
    std::string descriptor() const override { return "replay"; }

  private:
    std::unordered_map<std::string, std::string> by_hash_;
};

// Forwards to another backend and keeps a replay log of every successful call.
class RecordingBackend final : public ModelBackend {
  public:
    explicit RecordingBackend(ModelBackend& inner) : inner_(inner) {}
    ModelResponse invoke(const ModelRequest& request) override;
    std::string descriptor() const override { return inner_.descriptor(); }
    // Sorted by request hash so logs are independent of call order.
    std::string to_jsonl() const;

  private:
    ModelBackend& inner_;
    mutable std::mutex mu_;
    std::map<std::string, ReplayRecord> records_;
};

struct HttpBackendConfig {
    std::string base_url = "http://127.0.0.1:8000/v1";
    std::string model = "default";
    std::string api_key_env = "HVQA_API_KEY";
    double timeout_s = 60.0;
    int max_retries = 3;  // retries after the first attempt
    double backoff_initial_ms = 500.0;
    double backoff_multiplier = 2.0;
    int max_in_flight = 4;
};

// POST {base_url}/chat/completions with an OpenAI-style body.
class HttpChatBackend final : public ModelBackend {
  public:
    explicit HttpChatBackend(HttpBackendConfig config);
    ~HttpChatBackend() override;
    ModelResponse invoke(const ModelRequest& request) override;
    std::string descriptor() const override;
    const HttpBackendConfig& config() const { return config_; }

  private:
    HttpBackendConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
    std::counting_semaphore<> in_flight_;
};

std::string chat_request_body(const HttpBackendConfig& config, const ModelRequest& request);
// Content of choices[0].message; accepts a string or a list of text parts.
std::string parse_chat_response(std::string_view body);

}  // namespace hvqa
