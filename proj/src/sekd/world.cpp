#include "hvqa/sekd/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hvqa/common.hpp"

namespace hvqa::sekd {

namespace {

Eigen::VectorXd gaussian(int n, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = scale * normal(rng);
    return v;
}

TaxonomyTree build_tree(const WorldConfig& config) {
    static const std::vector<std::string> kRanks = {"kingdom", "phylum", "class", "order",
                                                    "family",  "genus",  "species"};
    std::vector<std::string> levels;
    for (int d = 0; d <= config.depth; ++d) {
        levels.push_back(d < static_cast<int>(kRanks.size()) ? kRanks[static_cast<std::size_t>(d)]
                                                              : "level" + std::to_string(d + 1));
    }
    std::vector<TaxNode> nodes{{"n", levels[0] + " root", 1, std::nullopt}};
    std::vector<std::size_t> frontier{0};
    for (int d = 1; d <= config.depth; ++d) {
        std::vector<std::size_t> next;
        for (auto parent : frontier) {
            for (int k = 0; k < kOptions; ++k) {
                const std::string id = nodes[parent].id + "." + std::to_string(k);
                next.push_back(nodes.size());
                nodes.push_back({id, levels[static_cast<std::size_t>(d)] + " " + std::to_string(k), d + 1,
                                 nodes[parent].id});
            }
        }
        frontier = std::move(next);
    }
    return TaxonomyTree::from_nodes("synthetic", std::move(levels), std::move(nodes));
}

}  // namespace

WorldConfig standard_world_config(std::uint64_t seed) {
    WorldConfig c;
    c.seed = seed;
    return c;
}

SyntheticWorld::SyntheticWorld(const WorldConfig& config) : config_(config), tree_(build_tree(config)) {
    if (config.depth < 1 || config.feature_dim < 1 || config.embed_dim < 1) {
        throw ConfigError("world: depth, feature_dim and embed_dim must be >= 1");
    }
    if (!(config.noise_scale > 0.0)) throw ConfigError("world: noise_scale must be > 0");
    if (!(config.shared_fraction >= 0.0 && config.shared_fraction <= 1.0)) {
        throw ConfigError("world: shared_fraction must lie in [0,1]");
    }
    const int D = config.depth;
    const int d = config.feature_dim;
    const int E = config.embed_dim;
    std::mt19937_64 rng(config.seed);

    // codes[l][parent rank][child rank]
    std::vector<std::vector<std::vector<Eigen::VectorXd>>> codes(static_cast<std::size_t>(D));
    for (auto& per_parent : codes) {
        per_parent.assign(kOptions, std::vector<Eigen::VectorXd>(kOptions));
        for (auto& row : per_parent) {
            for (auto& v : row) v = gaussian(d, 1.0 / std::sqrt(d), rng);
        }
    }
    const double a = std::sqrt(config.shared_fraction);
    const double b = std::sqrt(1.0 - config.shared_fraction);
    for (int l = 0; l < D; ++l) {
        for (int k = 0; k < kOptions; ++k) {
            const Eigen::VectorXd shared = gaussian(d, 1.0 / std::sqrt(d), rng);
            for (int p = 0; p < kOptions; ++p) {
                auto& v = codes[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)][static_cast<std::size_t>(k)];
                v = a * shared + b * v;
            }
        }
    }

    label_sem_.resize(E, label_rows());
    label_sem_.col(0) = gaussian(E, 1.0 / std::sqrt(E), rng);
    for (int l = 1; l <= D; ++l) {
        for (int k = 0; k < kOptions; ++k) label_sem_.col(label_row(l, k)) = gaussian(E, 1.0 / std::sqrt(E), rng);
    }

    std::size_t n_leaves = 1;
    for (int l = 0; l < D; ++l) n_leaves *= kOptions;
    leaf_means_.resize(d, static_cast<Eigen::Index>(n_leaves));
    std::vector<int> slots(static_cast<std::size_t>(D));
    for (std::size_t leaf = 0; leaf < n_leaves; ++leaf) {
        std::size_t rest = leaf;
        for (int l = D - 1; l >= 0; --l) {
            slots[static_cast<std::size_t>(l)] = static_cast<int>(rest % kOptions);
            rest /= kOptions;
        }
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
        for (int l = 0; l < D; ++l) {
            const int parent = l == 0 ? 0 : slots[static_cast<std::size_t>(l - 1)];
            mean += config.signal * codes[static_cast<std::size_t>(l)][static_cast<std::size_t>(parent)]
                                         [static_cast<std::size_t>(slots[static_cast<std::size_t>(l)])];
        }
        leaf_means_.col(static_cast<Eigen::Index>(leaf)) = mean;
    }
}

std::size_t SyntheticWorld::leaf_column(const std::vector<int>& slots) {
    std::size_t col = 0;
    for (int s : slots) col = col * kOptions + static_cast<std::size_t>(s);
    return col;
}

ToyExample SyntheticWorld::sample(std::mt19937_64& rng) const {
    std::uniform_int_distribution<int> pick(0, kOptions - 1);
    ToyExample ex;
    ex.slots.resize(static_cast<std::size_t>(config_.depth));
    for (auto& s : ex.slots) s = pick(rng);
    ex.x = leaf_means_.col(static_cast<Eigen::Index>(leaf_column(ex.slots))) +
           gaussian(config_.feature_dim, config_.noise_scale, rng);
    ex.slot_of_letter.resize(ex.slots.size());
    for (auto& perm : ex.slot_of_letter) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
    }
    return ex;
}

std::vector<ToyExample> SyntheticWorld::sample(std::size_t n, std::mt19937_64& rng) const {
    std::vector<ToyExample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample(rng));
    return out;
}

}  // namespace hvqa::sekd
