#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hvqa/taxonomy.hpp"

namespace hvqa {

inline constexpr std::string_view kOptionLetters = "ABCD";
inline constexpr std::size_t kMaxOptions = 4;

struct LevelQuestion {
    int level_index = 1;  // taxonomy depth, 1-based
    std::string level_name;
    std::string question_text;
    std::vector<std::string> options;  // letter i <-> options[i]
    char gold_letter = 'A';

    std::optional<std::string> label_for(char letter) const;
    std::string_view letters() const { return kOptionLetters.substr(0, options.size()); }
    const std::string& gold_label() const { return options[static_cast<std::size_t>(gold_letter - 'A')]; }
    friend bool operator==(const LevelQuestion&, const LevelQuestion&) = default;
};

struct VqaInstance {
    std::string instance_id;
    std::string image_ref;
    TaxPath gold_path;
    std::vector<LevelQuestion> per_level;

    std::size_t depth() const { return per_level.size(); }
    friend bool operator==(const VqaInstance&, const VqaInstance&) = default;
};

enum class SamplerPolicy {
    kUniform,       // any same-level label other than the gold one
    kSiblingFirst,  // siblings first, then cousins under ever higher ancestors
    kWeighted,      // per-gold confusion weights (e.g. replayed from released choice sets)
};

std::string_view to_string(SamplerPolicy policy);
SamplerPolicy sampler_policy_from_string(std::string_view name);

struct DistractorSampler {
    SamplerPolicy policy = SamplerPolicy::kUniform;
    // gold label -> candidate label -> non-negative weight. Used by kWeighted.
    std::map<std::string, std::map<std::string, double>> weights;

    static DistractorSampler uniform() { return {SamplerPolicy::kUniform, {}}; }
    static DistractorSampler sibling_first() { return {SamplerPolicy::kSiblingFirst, {}}; }
    static DistractorSampler from_weights_json(std::string_view document);
};

class InstanceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// k distinct same-level labels, none equal to the gold label. Returns fewer
// than k only when the level is that small; throws when no candidate exists.
std::vector<std::string> sample_distractors(const TaxonomyTree& tree, std::string_view gold_id, std::size_t k,
                                            const DistractorSampler& sampler, std::uint64_t rng_seed);

struct BuildOptions {
    std::string instance_id;  // defaults to image_ref
    // When false, levels holding a single node (a lone kingdom root) get no question.
    bool ask_singleton_levels = true;
};

VqaInstance build_instance(const TaxonomyTree& tree, std::string_view leaf_id, std::string_view image_ref,
                           const DistractorSampler& sampler, std::uint64_t rng_seed, const BuildOptions& options = {});

std::string default_question_text(std::string_view level_name);

// n instances over leaves drawn uniformly with replacement. Ids are
// "inst-000001"...; image references name the leaf and the draw.
std::vector<VqaInstance> generate_instances(const TaxonomyTree& tree, std::size_t n, const DistractorSampler& sampler,
                                            std::uint64_t seed, bool ask_singleton_levels = true);

// Disjoint train/val/test id lists. val and test take floor(fraction * n)
// each; train takes the remainder.
struct SplitManifest {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};
SplitManifest split_ids(std::vector<std::string> ids, std::uint64_t seed, double val_fraction = 0.2,
                        double test_fraction = 0.2);

// Instance store: one JSON object per line.
std::string instance_to_json_line(const VqaInstance& instance);
VqaInstance instance_from_json_line(std::string_view line);
std::string write_instances(const std::vector<VqaInstance>& instances);
std::vector<VqaInstance> read_instances(std::string_view document);
std::vector<VqaInstance> read_instances_file(const std::string& path);

}  // namespace hvqa
