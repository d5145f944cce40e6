#include "hvqa/config.hpp"

#include <cstdlib>

#include "hvqa/common.hpp"

namespace hvqa {

using json = nlohmann::json;

std::string interpolate_env(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text.compare(i, 3, "$${") == 0) {
            out += "${";
            i += 3;
            continue;
        }
        if (text.compare(i, 2, "${") == 0) {
            const auto close = text.find('}', i + 2);
            if (close == std::string_view::npos) throw ConfigError("config: unterminated ${ at offset " + std::to_string(i));
            const std::string name(text.substr(i + 2, close - i - 2));
            const char* value = std::getenv(name.c_str());
            if (value == nullptr) throw ConfigError("config: environment variable '" + name + "' is not set");
            out += value;
            i = close + 1;
            continue;
        }
        out += text[i++];
    }
    return out;
}

json parse_config(std::string_view text) {
    try {
        return json::parse(interpolate_env(text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
}

json load_config_file(const std::string& path) { return parse_config(read_text_file(path)); }

HttpBackendConfig http_config_from_json(const json& j) {
    HttpBackendConfig c;
    try {
        c.base_url = j.value("base_url", c.base_url);
        c.model = j.value("model", c.model);
        c.api_key_env = j.value("api_key_env", c.api_key_env);
        c.timeout_s = j.value("timeout_s", c.timeout_s);
        c.max_retries = j.value("max_retries", c.max_retries);
        c.backoff_initial_ms = j.value("backoff_initial_ms", c.backoff_initial_ms);
        c.backoff_multiplier = j.value("backoff_multiplier", c.backoff_multiplier);
        c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("http backend config: ") + e.what());
    }
    if (c.max_in_flight < 1) throw ConfigError("http backend config: max_in_flight must be >= 1");
    return c;
}

DecodeConfig decode_from_json(const json& j) {
    DecodeConfig d;
    try {
        d.max_new_tokens = j.value("max_new_tokens", d.max_new_tokens);
        d.greedy = j.value("greedy", d.greedy);
        d.temperature = j.value("temperature", d.temperature);
        d.top_p = j.value("top_p", d.top_p);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("decode config: ") + e.what());
    }
    d.validate();
    return d;
}

BackendHandle make_backend(const json& config, const std::vector<VqaInstance>& instances) {
    BackendHandle h;
    std::string type;
    try {
        type = config.at("type").get<std::string>();
        if (type == "gold") {
            h.backend = make_gold_backend(std::make_shared<AnswerKey>(instances));
        } else if (type == "mock_conditional") {
            h.backend = mock_conditional(config.at("accuracy_with_parent").get<double>(),
                                         config.at("accuracy_without").get<double>(),
                                         config.value("seed", std::uint64_t{0}), std::make_shared<AnswerKey>(instances));
        } else if (type == "replay") {
            h.backend = std::make_unique<ReplayBackend>(
                ReplayBackend::from_jsonl(read_text_file(config.at("log").get<std::string>())));
        } else if (type == "http") {
            h.backend = std::make_unique<HttpChatBackend>(http_config_from_json(config));
        } else {
            throw ConfigError("backend: unknown type '" + type + "' (expected gold|mock_conditional|replay|http)");
        }
        if (config.contains("record")) {
            h.record_path = config.at("record").get<std::string>();
            h.recorder = std::make_unique<RecordingBackend>(*h.backend);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("backend config: ") + e.what());
    }
    return h;
}

}  // namespace hvqa
