#include "hvqa/backends.hpp"

#include <chrono>
#include <cmath>

#include "hvqa/common.hpp"
#include "hvqa/prompting.hpp"
#include "json.hpp"

namespace hvqa {

using json = nlohmann::json;

void DecodeConfig::validate() const {
    if (max_new_tokens < 1) throw ConfigError("decode: max_new_tokens must be >= 1");
    if (!(temperature > 0.0)) throw ConfigError("decode: temperature must be > 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("decode: top_p must be in (0,1]");
}

std::string_view to_string(BackendError::Kind kind) {
    switch (kind) {
        case BackendError::Kind::kTransport: return "transport";
        case BackendError::Kind::kRefusal: return "refusal";
        case BackendError::Kind::kTimeout: return "timeout";
        case BackendError::Kind::kReplayMiss: return "replay_miss";
    }
    return "transport";
}

ModelResponse invoke(ModelBackend& backend, const ModelRequest& request) {
    if (request.prompt.empty()) throw std::invalid_argument("invoke: empty prompt");
    request.decode.validate();
    const auto t0 = std::chrono::steady_clock::now();
    ModelResponse response = backend.invoke(request);
    if (response.latency_ms <= 0.0) {
        response.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    return response;
}

std::string request_hash(const ModelRequest& request) {
    std::string key;
    key.reserve(request.prompt.size() + request.image_ref.size() + 96);
    key += request.prompt;
    key += '\0';
    key += request.image_ref;
    key += '\0';
    key += "max_new_tokens=" + std::to_string(request.decode.max_new_tokens);
    key += ";greedy=";
    key += request.decode.greedy ? "1" : "0";
    key += ";temperature=" + format_double(request.decode.temperature);
    key += ";top_p=" + format_double(request.decode.top_p);
    return to_hex(fnv1a64(key));
}

AnswerKey::AnswerKey(std::vector<VqaInstance> instances) : instances_(std::move(instances)) {
    for (std::size_t i = 0; i < instances_.size(); ++i) by_ref_.emplace(instances_[i].image_ref, i);
}

const VqaInstance& AnswerKey::lookup(std::string_view image_ref) const {
    auto it = by_ref_.find(std::string(image_ref));
    if (it == by_ref_.end()) {
        throw BackendError(BackendError::Kind::kRefusal, "unknown image reference '" + std::string(image_ref) + "'");
    }
    return instances_[it->second];
}

PromptTarget identify_prompt(const VqaInstance& instance, std::string_view prompt) {
    if (prompt.find("Return EXACTLY") != std::string_view::npos) return {true, 0};
    constexpr std::string_view kMarker = "in terms of ";
    const auto at = prompt.find(kMarker);
    if (at != std::string_view::npos) {
        const auto begin = at + kMarker.size();
        const auto end = prompt.find("?\n", begin);
        const auto name = prompt.substr(begin, end == std::string_view::npos ? end : end - begin);
        for (std::size_t i = 0; i < instance.per_level.size(); ++i) {
            if (instance.per_level[i].level_name == name) return {false, i};
        }
    }
    throw BackendError(BackendError::Kind::kRefusal, "prompt does not ask about any level of '" +
                                                         instance.instance_id + "'");
}

ScriptedBackend::ScriptedBackend(Script script, std::string name) : script_(std::move(script)), name_(std::move(name)) {}

ModelResponse ScriptedBackend::invoke(const ModelRequest& request) {
    ModelResponse r;
    r.text = script_(request);
    return r;
}

namespace {

class GoldBackend final : public ModelBackend {
  public:
    explicit GoldBackend(std::shared_ptr<const AnswerKey> key) : key_(std::move(key)) {}

    ModelResponse invoke(const ModelRequest& request) override {
        const VqaInstance& inst = key_->lookup(request.image_ref);
        const PromptTarget target = identify_prompt(inst, request.prompt);
        ModelResponse r;
        if (target.joint) {
            for (std::size_t i = 0; i < inst.per_level.size(); ++i) {
                if (i > 0) r.text += ' ';
                r.text += inst.per_level[i].gold_letter;
            }
        } else {
            r.text = std::string(1, inst.per_level[target.level].gold_letter);
        }
        return r;
    }

    std::string descriptor() const override { return "mock:gold"; }

  private:
    std::shared_ptr<const AnswerKey> key_;
};

double unit_interval(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

class ConditionalMock final : public ModelBackend {
  public:
    ConditionalMock(double with_parent, double without, std::uint64_t seed, std::shared_ptr<const AnswerKey> key)
        : with_parent_(with_parent), without_(without), seed_(seed), key_(std::move(key)) {}

    ModelResponse invoke(const ModelRequest& request) override {
        const VqaInstance& inst = key_->lookup(request.image_ref);
        const PromptTarget target = identify_prompt(inst, request.prompt);
        const std::uint64_t base = mix_seed(seed_, fnv1a64(request.image_ref, fnv1a64(request.prompt)));
        ModelResponse r;
        if (target.joint) {
            // No facts are known in a joint prompt, so every level runs unconditioned.
            for (std::size_t i = 0; i < inst.per_level.size(); ++i) {
                if (i > 0) r.text += ' ';
                r.text += answer(inst.per_level[i], without_, base, i);
            }
            return r;
        }
        const std::size_t level = target.level;
        double p = without_;
        if (level > 0) {
            const auto facts = parse_known_facts(request.prompt);
            for (const auto& [k, label] : facts) {
                if (static_cast<std::size_t>(k) == level && label == inst.per_level[level - 1].gold_label()) {
                    p = with_parent_;
                }
            }
        }
        const LevelQuestion& q = inst.per_level[level];
        r.text = std::string(1, answer(q, p, base, level));
        std::map<char, double> probs;
        const double spread = (1.0 - p) / static_cast<double>(q.options.size());
        for (char c : q.letters()) probs[c] = spread + (c == q.gold_letter ? p : 0.0);
        r.option_probabilities = std::move(probs);
        return r;
    }

    std::string descriptor() const override {
        return "mock:conditional(" + format_double(with_parent_) + "," + format_double(without_) +
               ",seed=" + std::to_string(seed_) + ")";
    }

  private:
    // Gold with probability p, otherwise a uniform draw over every offered letter.
    static char answer(const LevelQuestion& q, double p, std::uint64_t base, std::size_t level) {
        const std::uint64_t h = mix_seed(base, level);
        if (unit_interval(h) < p) return q.gold_letter;
        const std::string_view letters = q.letters();
        return letters[mix_seed(h, 0x5eed) % letters.size()];
    }

    double with_parent_;
    double without_;
    std::uint64_t seed_;
    std::shared_ptr<const AnswerKey> key_;
};

}  // namespace

std::unique_ptr<ModelBackend> make_gold_backend(std::shared_ptr<const AnswerKey> key) {
    return std::make_unique<GoldBackend>(std::move(key));
}

std::unique_ptr<ModelBackend> mock_conditional(double accuracy_with_parent, double accuracy_without,
                                               std::uint64_t seed, std::shared_ptr<const AnswerKey> key) {
    auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in_unit(accuracy_with_parent) || !in_unit(accuracy_without)) {
        throw ConfigError("mock_conditional: accuracies must lie in [0,1]");
    }
    if (!key) throw ConfigError("mock_conditional: answer key required");
    return std::make_unique<ConditionalMock>(accuracy_with_parent, accuracy_without, seed, std::move(key));
}

ReplayBackend::ReplayBackend(const std::vector<ReplayRecord>& records) {
    for (const auto& rec : records) by_hash_[rec.request_hash] = rec.text;
}

ReplayBackend ReplayBackend::from_jsonl(std::string_view document) {
    std::vector<ReplayRecord> records;
    for (const auto& line : split_lines(document)) {
        try {
            const json j = json::parse(line);
            records.push_back({j.at("request_hash").get<std::string>(), j.value("prompt", std::string()),
                               j.at("text").get<std::string>()});
        } catch (const json::exception& e) {
            throw ConfigError(std::string("malformed replay record: ") + e.what());
        }
    }
    return ReplayBackend(records);
}

ModelResponse ReplayBackend::invoke(const ModelRequest& request) {
    const std::string hash = request_hash(request);
    auto it = by_hash_.find(hash);
    if (it == by_hash_.end()) {
        throw BackendError(BackendError::Kind::kReplayMiss, "no logged response for request " + hash);
    }
    ModelResponse r;
    r.text = it->second;
    return r;
}

ModelResponse RecordingBackend::invoke(const ModelRequest& request) {
    ModelResponse r = inner_.invoke(request);
    const std::string hash = request_hash(request);
    std::lock_guard lock(mu_);
    records_[hash] = {hash, request.prompt, r.text};
    return r;
}

std::string RecordingBackend::to_jsonl() const {
    std::lock_guard lock(mu_);
    std::string out;
    for (const auto& [hash, rec] : records_) {
        out += json{{"request_hash", rec.request_hash}, {"prompt", rec.prompt}, {"text", rec.text}}.dump();
        out += '\n';
    }
    return out;
}

}  // namespace hvqa
