#include "hvqa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <mutex>
#include <thread>

#include "hvqa/common.hpp"
#include "hvqa/config.hpp"
#include "json.hpp"

namespace hvqa {

using json = nlohmann::json;

std::string_view to_string(Protocol protocol) {
    switch (protocol) {
        case Protocol::kJoint: return "joint";
        case Protocol::kIndependent: return "independent";
        case Protocol::kConditioned: return "conditioned";
    }
    return "joint";
}

Protocol protocol_from_string(std::string_view name) {
    if (name == "joint") return Protocol::kJoint;
    if (name == "independent") return Protocol::kIndependent;
    if (name == "conditioned") return Protocol::kConditioned;
    throw ConfigError("unknown protocol '" + std::string(name) + "' (expected joint|independent|conditioned)");
}

namespace {

struct CallResult {
    std::string text;
    int attempts = 0;
    double latency_ms = 0.0;
    std::optional<std::string> error;
};

CallResult call(ModelBackend& backend, const ModelRequest& request) {
    CallResult out;
    try {
        ModelResponse r = invoke(backend, request);
        out.text = std::move(r.text);
        out.attempts = r.attempts;
        out.latency_ms = r.latency_ms;
    } catch (const BackendError& e) {
        out.attempts = e.attempts();
        out.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
    return out;
}

void score_level(PredictionRecord& rec, const LevelQuestion& q, Letter letter) {
    std::optional<std::string> label;
    if (letter) label = q.label_for(*letter);
    rec.predicted_letters.push_back(label ? letter : std::nullopt);
    rec.correct_mask.push_back(label.has_value() && *label == q.gold_label());
    rec.predicted_labels.push_back(std::move(label));
    rec.level_indices.push_back(q.level_index);
    rec.singleton.push_back(q.options.size() == 1);
}

struct InstanceOutcome {
    PredictionRecord record;
    std::size_t calls = 0;
    double latency_ms = 0.0;
};

InstanceOutcome run_one(Protocol protocol, const VqaInstance& inst, ModelBackend& backend, const DecodeConfig& decode,
                        const HarnessOptions& options) {
    InstanceOutcome out;
    PredictionRecord& rec = out.record;
    rec.instance_id = inst.instance_id;
    rec.protocol = protocol;

    auto issue = [&](const std::string& prompt, const DecodeConfig& dc) {
        CallResult r = call(backend, {prompt, inst.image_ref, dc});
        ++out.calls;
        out.latency_ms += r.latency_ms;
        rec.attempts += r.attempts;
        if (r.error) rec.errors.push_back(*r.error);
        rec.transcripts.push_back({prompt, r.text});
        return r;
    };

    if (protocol == Protocol::kJoint) {
        const PromptBundle bundle = build_joint_prompt(inst);
        DecodeConfig dc = decode;
        // Room for L letters and the spaces between them.
        dc.max_new_tokens = std::max<int>(dc.max_new_tokens, static_cast<int>(2 * inst.per_level.size()));
        CallResult r = issue(bundle.text, dc);
        std::vector<Letter> letters(inst.per_level.size());
        if (!r.error) letters = parse_joint_answer(r.text, bundle.letter_vocabulary, options.parse).letters;
        for (std::size_t i = 0; i < inst.per_level.size(); ++i) score_level(rec, inst.per_level[i], letters[i]);
        return out;
    }

    std::vector<std::string> priors;
    for (std::size_t i = 0; i < inst.per_level.size(); ++i) {
        const auto& q = inst.per_level[i];
        const PromptBundle bundle = protocol == Protocol::kConditioned ? build_step_prompt(inst, i + 1, priors)
                                                                       : build_independent_prompt(inst, i + 1);
        CallResult r = issue(bundle.text, decode);
        Letter letter;
        if (!r.error) letter = parse_step_answer(r.text, bundle.letter_vocabulary.front(), options.parse).letters.front();
        score_level(rec, q, letter);
        if (protocol == Protocol::kConditioned) {
            if (options.gold_teacher_forcing) {
                priors.push_back(q.gold_label());
            } else {
                priors.push_back(rec.predicted_labels.back().value_or(std::string(kUnknownFact)));
            }
        }
    }
    return out;
}

std::string iso_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json decode_to_json(const DecodeConfig& d) {
    return {{"max_new_tokens", d.max_new_tokens}, {"greedy", d.greedy}, {"temperature", d.temperature},
            {"top_p", d.top_p}};
}

}  // namespace

RunLog run_protocol(Protocol protocol, const std::vector<VqaInstance>& instances, ModelBackend& backend,
                    const DecodeConfig& decode, const HarnessOptions& options) {
    decode.validate();
    if (instances.empty()) throw ValidationError("run: no instances");
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<InstanceOutcome> outcomes(instances.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (std::size_t i = next++; i < instances.size(); i = next++) {
            try {
                outcomes[i] = run_one(protocol, instances[i], backend, decode, options);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = instances.size();
            }
        }
    };
    const std::size_t n_threads =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, options.concurrency)), 1, instances.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    RunLog log;
    log.protocol = protocol;
    log.backend = backend.descriptor();
    log.decode = decode;
    log.seed = options.seed;
    log.gold_teacher_forcing = options.gold_teacher_forcing;
    log.config = options.config;
    std::uint64_t ids = fnv1a64(to_string(protocol));
    for (auto& o : outcomes) {
        ids = fnv1a64(o.record.instance_id, ids);
        log.calls += o.calls;
        log.timing.total_latency_ms += o.latency_ms;
        for (const auto& t : o.record.transcripts) {
            log.prompt_chars += t.prompt.size();
            log.response_chars += t.response.size();
        }
        log.records.push_back(std::move(o.record));
    }
    ids = fnv1a64(log.backend, ids);
    ids = fnv1a64(decode_to_json(decode).dump(), ids);
    ids = fnv1a64(options.config, ids);
    ids = mix_seed(ids, options.seed ^ (options.gold_teacher_forcing ? 0x9e37ULL : 0ULL));
    log.run_id = to_hex(ids);
    log.timing.created_at = iso_now();
    log.timing.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return log;
}

RunLog run_joint(const std::vector<VqaInstance>& instances, ModelBackend& backend, const DecodeConfig& decode,
                 const HarnessOptions& options) {
    return run_protocol(Protocol::kJoint, instances, backend, decode, options);
}

RunLog run_independent(const std::vector<VqaInstance>& instances, ModelBackend& backend, const DecodeConfig& decode,
                       const HarnessOptions& options) {
    return run_protocol(Protocol::kIndependent, instances, backend, decode, options);
}

RunLog run_conditioned(const std::vector<VqaInstance>& instances, ModelBackend& backend, const DecodeConfig& decode,
                       const HarnessOptions& options) {
    return run_protocol(Protocol::kConditioned, instances, backend, decode, options);
}

std::string run_log_to_jsonl(const RunLog& log) {
    json header;
    header["type"] = "header";
    header["run_id"] = log.run_id;
    header["protocol"] = to_string(log.protocol);
    header["backend"] = log.backend;
    header["decode"] = decode_to_json(log.decode);
    header["seed"] = log.seed;
    header["gold_teacher_forcing"] = log.gold_teacher_forcing;
    header["config"] = log.config.empty() ? json(nullptr) : json::parse(log.config);
    header["n_records"] = log.records.size();
    header["calls"] = log.calls;
    header["prompt_chars"] = log.prompt_chars;
    header["response_chars"] = log.response_chars;
    header["timing"] = {{"created_at", log.timing.created_at},
                        {"wall_ms", log.timing.wall_ms},
                        {"total_latency_ms", log.timing.total_latency_ms}};
    std::string out = header.dump() + "\n";
    for (const auto& rec : log.records) {
        json j;
        j["type"] = "record";
        j["instance_id"] = rec.instance_id;
        j["protocol"] = to_string(rec.protocol);
        json letters = json::array();
        json labels = json::array();
        for (std::size_t i = 0; i < rec.predicted_letters.size(); ++i) {
            letters.push_back(rec.predicted_letters[i] ? json(std::string(1, *rec.predicted_letters[i])) : json(nullptr));
            labels.push_back(rec.predicted_labels[i] ? json(*rec.predicted_labels[i]) : json(nullptr));
        }
        j["predicted_letters"] = std::move(letters);
        j["predicted_labels"] = std::move(labels);
        j["correct_mask"] = rec.correct_mask;
        j["level_indices"] = rec.level_indices;
        j["singleton"] = rec.singleton;
        json transcripts = json::array();
        for (const auto& t : rec.transcripts) transcripts.push_back({{"prompt", t.prompt}, {"response", t.response}});
        j["transcripts"] = std::move(transcripts);
        j["attempts"] = rec.attempts;
        j["errors"] = rec.errors;
        out += j.dump();
        out += '\n';
    }
    return out;
}

RunLog run_log_from_jsonl(std::string_view document) {
    const auto lines = split_lines(document);
    if (lines.empty()) throw ValidationError("run log is empty");
    RunLog log;
    try {
        const json header = json::parse(lines.front());
        if (header.value("type", "") != "header") throw ValidationError("run log: first line is not a header");
        log.run_id = header.at("run_id").get<std::string>();
        log.protocol = protocol_from_string(header.at("protocol").get<std::string>());
        log.backend = header.at("backend").get<std::string>();
        log.decode = decode_from_json(header.at("decode"));
        log.seed = header.at("seed").get<std::uint64_t>();
        log.gold_teacher_forcing = header.value("gold_teacher_forcing", false);
        if (!header.at("config").is_null()) log.config = header.at("config").dump();
        log.calls = header.at("calls").get<std::size_t>();
        log.prompt_chars = header.at("prompt_chars").get<std::size_t>();
        log.response_chars = header.at("response_chars").get<std::size_t>();
        const json& timing = header.at("timing");
        log.timing = {timing.at("created_at").get<std::string>(), timing.at("wall_ms").get<double>(),
                      timing.at("total_latency_ms").get<double>()};
        for (std::size_t n = 1; n < lines.size(); ++n) {
            const json j = json::parse(lines[n]);
            PredictionRecord rec;
            rec.instance_id = j.at("instance_id").get<std::string>();
            rec.protocol = protocol_from_string(j.at("protocol").get<std::string>());
            for (const auto& l : j.at("predicted_letters")) {
                rec.predicted_letters.push_back(l.is_null() ? Letter{} : Letter{l.get<std::string>().at(0)});
            }
            for (const auto& l : j.at("predicted_labels")) {
                rec.predicted_labels.push_back(l.is_null() ? std::nullopt
                                                           : std::optional<std::string>(l.get<std::string>()));
            }
            rec.correct_mask = j.at("correct_mask").get<std::vector<bool>>();
            rec.level_indices = j.at("level_indices").get<std::vector<int>>();
            rec.singleton = j.at("singleton").get<std::vector<bool>>();
            for (const auto& t : j.at("transcripts")) {
                rec.transcripts.push_back({t.at("prompt").get<std::string>(), t.at("response").get<std::string>()});
            }
            rec.attempts = j.at("attempts").get<int>();
            rec.errors = j.at("errors").get<std::vector<std::string>>();
            const std::size_t L = rec.correct_mask.size();
            if (L == 0 || rec.predicted_letters.size() != L || rec.predicted_labels.size() != L ||
                rec.level_indices.size() != L || rec.singleton.size() != L) {
                throw ValidationError("run log: record '" + rec.instance_id + "' has inconsistent level counts");
            }
            log.records.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed run log: ") + e.what());
    }
    if (log.records.size() != lines.size() - 1) throw ValidationError("run log: record count mismatch");
    return log;
}

}  // namespace hvqa
