#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "hvqa/taxonomy.hpp"

namespace hvqa::sekd {

inline constexpr int kOptions = 4;

struct WorldConfig {
    int depth = 6;          // asked levels below the root
    int feature_dim = 16;   // d
    int embed_dim = 16;     // width of a label embedding
    double signal = 1.0;
    double noise_scale = 0.1;
    // Weight of the level-wide component in each child code; the rest is
    // specific to the parent, so deep levels are hard to read without it.
    double shared_fraction = 0.5;
    std::uint64_t seed = 42;
};

// One image stand-in: a feature vector and its gold path, plus the letter
// order the options were shown in at each level.
struct ToyExample {
    Eigen::VectorXd x;
    std::vector<int> slots;                             // gold child rank per level
    std::vector<std::array<int, kOptions>> slot_of_letter;  // letter j shows slot slot_of_letter[l][j]
};

// Complete 4-ary taxonomy with a lone root. Leaf means are sums of per-edge
// codes; options at each level are the children of the gold parent, so labels
// repeat across parents and a label names a (level, child rank) pair.
class SyntheticWorld {
  public:
    explicit SyntheticWorld(const WorldConfig& config);

    const WorldConfig& config() const { return config_; }
    const TaxonomyTree& tree() const { return tree_; }
    int depth() const { return config_.depth; }
    int feature_dim() const { return config_.feature_dim; }
    int embed_dim() const { return config_.embed_dim; }

    // Leaf means, one column per leaf; a leaf's column is its slots read as
    // base-4 digits, root level most significant.
    const Eigen::MatrixXd& leaf_means() const { return leaf_means_; }
    static std::size_t leaf_column(const std::vector<int>& slots);

    // Context rows: the root label, one row per (level, rank) label, then
    // UNKNOWN and one row per option letter.
    int label_rows() const { return 1 + config_.depth * kOptions; }
    int label_row(int level, int slot) const { return 1 + (level - 1) * kOptions + slot; }
    int unknown_row() const { return label_rows(); }
    int letter_row(int letter) const { return label_rows() + 1 + letter; }
    int context_rows() const { return label_rows() + 1 + kOptions; }

    // Initial label embeddings (embed_dim x label_rows).
    const Eigen::MatrixXd& label_semantics() const { return label_sem_; }

    ToyExample sample(std::mt19937_64& rng) const;
    std::vector<ToyExample> sample(std::size_t n, std::mt19937_64& rng) const;

  private:
    WorldConfig config_;
    TaxonomyTree tree_;
    Eigen::MatrixXd leaf_means_;
    Eigen::MatrixXd label_sem_;
};

// Reference-size world: six levels, four options, d = 16.
WorldConfig standard_world_config(std::uint64_t seed = 42);

}  // namespace hvqa::sekd
