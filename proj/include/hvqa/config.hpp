#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "hvqa/backends.hpp"
#include "json.hpp"

namespace hvqa {

// Replaces ${NAME} with the environment variable NAME. An unset variable is a
// config error; "$${" escapes a literal "${".
std::string interpolate_env(std::string_view text);

// Parses a JSON config document after environment interpolation.
nlohmann::json parse_config(std::string_view text);
nlohmann::json load_config_file(const std::string& path);

// Backend built from a config object such as
//   {"type": "mock_conditional", "accuracy_with_parent": 0.9, "accuracy_without": 0.6, "seed": 7}
//   {"type": "gold"}
//   {"type": "replay", "log": "run.replay.jsonl"}
//   {"type": "http", "base_url": "...", "model": "...", "api_key_env": "...", "max_in_flight": 4}
// Mock backends answer from `instances`. A "record" path wraps the backend in
// a recorder whose log the caller writes out after the run.
struct BackendHandle {
    std::unique_ptr<ModelBackend> backend;
    std::unique_ptr<RecordingBackend> recorder;
    std::string record_path;

    ModelBackend& get() { return recorder ? static_cast<ModelBackend&>(*recorder) : *backend; }
};

BackendHandle make_backend(const nlohmann::json& config, const std::vector<VqaInstance>& instances);
HttpBackendConfig http_config_from_json(const nlohmann::json& config);
DecodeConfig decode_from_json(const nlohmann::json& config);

}  // namespace hvqa
