#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hvqa/sekd/distill.hpp"
#include "json.hpp"

namespace hvqa::sekd {

// Everything the distill command needs, as read from a config document:
//   {"world": {...}, "pretrain": {...}, "distill": {...}, "weights": {...}, "seeds": [...]}
// Missing sections and fields keep their defaults.
struct ExperimentConfig {
    WorldConfig world;
    PretrainConfig pretrain;
    DistillConfig distill;
    std::vector<std::uint64_t> seeds = {42, 21, 87, 13, 100};
};

ExperimentConfig experiment_from_json(const nlohmann::json& doc);
nlohmann::json experiment_to_json(const ExperimentConfig& config);

}  // namespace hvqa::sekd
