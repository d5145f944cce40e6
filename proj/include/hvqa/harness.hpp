#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hvqa/backends.hpp"
#include "hvqa/instances.hpp"
#include "hvqa/prompting.hpp"

namespace hvqa {

enum class Protocol { kJoint, kIndependent, kConditioned };

std::string_view to_string(Protocol protocol);
Protocol protocol_from_string(std::string_view name);

struct Transcript {
    std::string prompt;
    std::string response;
    friend bool operator==(const Transcript&, const Transcript&) = default;
};

struct PredictionRecord {
    std::string instance_id;
    Protocol protocol = Protocol::kJoint;
    std::vector<Letter> predicted_letters;
    std::vector<std::optional<std::string>> predicted_labels;  // nullopt for FAIL
    std::vector<bool> correct_mask;
    std::vector<int> level_indices;  // taxonomy depth of each asked level
    std::vector<bool> singleton;     // level offered a single option
    std::vector<Transcript> transcripts;
    int attempts = 0;                 // backend attempts, retries included
    std::vector<std::string> errors;  // backend failures, one per failed call

    friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

// Wall-clock data; the only part of a run log allowed to differ between reruns.
struct RunTiming {
    std::string created_at;
    double wall_ms = 0.0;
    double total_latency_ms = 0.0;
};

struct RunLog {
    std::string run_id;
    Protocol protocol = Protocol::kJoint;
    std::string backend;
    DecodeConfig decode;
    std::uint64_t seed = 0;
    bool gold_teacher_forcing = false;
    std::string config;  // resolved config document (JSON text) echoed from the caller
    std::vector<PredictionRecord> records;
    std::size_t calls = 0;
    std::size_t prompt_chars = 0;
    std::size_t response_chars = 0;
    RunTiming timing;
};

struct HarnessOptions {
    int concurrency = 4;
    // Feed gold labels instead of the model's own answers as known facts.
    // For ablations only; the conditioned protocol proper never does this.
    bool gold_teacher_forcing = false;
    std::uint64_t seed = 0;
    ParseOptions parse;
    std::string config;
};

RunLog run_protocol(Protocol protocol, const std::vector<VqaInstance>& instances, ModelBackend& backend,
                    const DecodeConfig& decode, const HarnessOptions& options = {});

RunLog run_joint(const std::vector<VqaInstance>& instances, ModelBackend& backend, const DecodeConfig& decode,
                 const HarnessOptions& options = {});
RunLog run_independent(const std::vector<VqaInstance>& instances, ModelBackend& backend, const DecodeConfig& decode,
                       const HarnessOptions& options = {});
RunLog run_conditioned(const std::vector<VqaInstance>& instances, ModelBackend& backend, const DecodeConfig& decode,
                       const HarnessOptions& options = {});

// Header line followed by one record per line.
std::string run_log_to_jsonl(const RunLog& log);
RunLog run_log_from_jsonl(std::string_view document);

}  // namespace hvqa
