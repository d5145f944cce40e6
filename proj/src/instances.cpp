#include "hvqa/instances.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "hvqa/common.hpp"
#include "json.hpp"

namespace hvqa {

using json = nlohmann::json;

std::optional<std::string> LevelQuestion::label_for(char letter) const {
    const auto pos = kOptionLetters.find(letter);
    if (pos == std::string_view::npos || pos >= options.size()) return std::nullopt;
    return options[pos];
}

std::string_view to_string(SamplerPolicy policy) {
    switch (policy) {
        case SamplerPolicy::kUniform: return "uniform";
        case SamplerPolicy::kSiblingFirst: return "sibling";
        case SamplerPolicy::kWeighted: return "weighted";
    }
    return "uniform";
}

SamplerPolicy sampler_policy_from_string(std::string_view name) {
    if (name == "uniform") return SamplerPolicy::kUniform;
    if (name == "sibling") return SamplerPolicy::kSiblingFirst;
    if (name == "weighted") return SamplerPolicy::kWeighted;
    throw ConfigError("unknown sampler policy '" + std::string(name) + "' (expected uniform|sibling|weighted)");
}

DistractorSampler DistractorSampler::from_weights_json(std::string_view document) {
    DistractorSampler s;
    s.policy = SamplerPolicy::kWeighted;
    try {
        const json doc = json::parse(document);
        for (const auto& [gold, row] : doc.at("weights").items()) {
            for (const auto& [cand, w] : row.items()) {
                const double weight = w.get<double>();
                if (!(weight >= 0.0)) throw ConfigError("negative distractor weight for '" + gold + "'");
                s.weights[gold][cand] = weight;
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad distractor weights document: ") + e.what());
    }
    return s;
}

namespace {

// Levels up to the lowest common ancestor of two same-depth nodes.
int lca_distance(const TaxonomyTree& tree, std::size_t a, std::size_t b) {
    int dist = 0;
    while (a != b) {
        a = *tree.parent_of(a);
        b = *tree.parent_of(b);
        ++dist;
    }
    return dist;
}

}  // namespace

std::vector<std::string> sample_distractors(const TaxonomyTree& tree, std::string_view gold_id, std::size_t k,
                                            const DistractorSampler& sampler, std::uint64_t rng_seed) {
    if (k == 0) throw InstanceError("sample_distractors: k must be >= 1");
    const std::size_t gold = tree.index_of(gold_id);
    const TaxNode& gold_node = tree.nodes()[gold];

    // One candidate node per distinct label, excluding the gold label.
    std::vector<std::size_t> pool;
    std::set<std::string_view> seen{gold_node.label};
    for (auto idx : tree.nodes_at_depth(gold_node.depth)) {
        if (seen.insert(tree.nodes()[idx].label).second) pool.push_back(idx);
    }
    if (pool.empty()) {
        throw InstanceError("level '" + tree.levels()[static_cast<std::size_t>(gold_node.depth - 1)] +
                            "' has no labels besides '" + gold_node.label + "'");
    }

    std::mt19937_64 rng(mix_seed(rng_seed, fnv1a64(gold_id)));
    std::shuffle(pool.begin(), pool.end(), rng);

    std::vector<std::size_t> chosen;
    switch (sampler.policy) {
        case SamplerPolicy::kUniform:
            chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(k, pool.size())));
            break;
        case SamplerPolicy::kSiblingFirst: {
            std::vector<std::pair<int, std::size_t>> ranked;
            ranked.reserve(pool.size());
            for (auto idx : pool) ranked.emplace_back(lca_distance(tree, gold, idx), idx);
            std::stable_sort(ranked.begin(), ranked.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) chosen.push_back(ranked[i].second);
            break;
        }
        case SamplerPolicy::kWeighted: {
            std::vector<std::size_t> weighted;
            std::vector<double> w;
            auto row = sampler.weights.find(gold_node.label);
            if (row != sampler.weights.end()) {
                for (auto idx : pool) {
                    auto it = row->second.find(tree.nodes()[idx].label);
                    if (it != row->second.end() && it->second > 0.0) {
                        weighted.push_back(idx);
                        w.push_back(it->second);
                    }
                }
            }
            // Weighted draws without replacement, then uniform top-up from the rest.
            while (chosen.size() < k && !weighted.empty()) {
                std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
                const std::size_t j = pick(rng);
                chosen.push_back(weighted[j]);
                weighted.erase(weighted.begin() + static_cast<std::ptrdiff_t>(j));
                w.erase(w.begin() + static_cast<std::ptrdiff_t>(j));
            }
            for (auto idx : pool) {
                if (chosen.size() >= k) break;
                if (std::find(chosen.begin(), chosen.end(), idx) == chosen.end()) chosen.push_back(idx);
            }
            break;
        }
    }

    std::vector<std::string> labels;
    labels.reserve(chosen.size());
    for (auto idx : chosen) labels.push_back(tree.nodes()[idx].label);
    return labels;
}

std::string default_question_text(std::string_view level_name) {
    return "Based on taxonomy and the known facts above, where does the organism in the image fall in terms of " +
           std::string(level_name) + "?";
}

VqaInstance build_instance(const TaxonomyTree& tree, std::string_view leaf_id, std::string_view image_ref,
                           const DistractorSampler& sampler, std::uint64_t rng_seed, const BuildOptions& options) {
    VqaInstance inst;
    inst.instance_id = options.instance_id.empty() ? std::string(image_ref) : options.instance_id;
    inst.image_ref = std::string(image_ref);
    inst.gold_path = path_for_leaf(tree, leaf_id);

    std::mt19937_64 rng(mix_seed(rng_seed, fnv1a64(leaf_id)));
    for (std::size_t pos = 0; pos < inst.gold_path.size(); ++pos) {
        const std::string& node_id = inst.gold_path.node_ids[pos];
        const TaxNode& node = tree.node(node_id);
        if (!options.ask_singleton_levels && tree.is_singleton_level(node.depth)) continue;

        LevelQuestion q;
        q.level_index = node.depth;
        q.level_name = tree.levels()[static_cast<std::size_t>(node.depth - 1)];
        q.question_text = default_question_text(q.level_name);
        q.options.push_back(node.label);
        if (tree.nodes_at_depth(node.depth).size() > 1) {
            auto distractors = sample_distractors(tree, node_id, kMaxOptions - 1, sampler,
                                                  mix_seed(rng_seed, static_cast<std::uint64_t>(node.depth)));
            q.options.insert(q.options.end(), distractors.begin(), distractors.end());
        }
        std::shuffle(q.options.begin(), q.options.end(), rng);
        const auto gold_pos = std::find(q.options.begin(), q.options.end(), node.label) - q.options.begin();
        q.gold_letter = kOptionLetters[static_cast<std::size_t>(gold_pos)];
        inst.per_level.push_back(std::move(q));
    }
    if (inst.per_level.empty()) {
        throw InstanceError("instance for leaf '" + std::string(leaf_id) + "' would have no questions");
    }
    return inst;
}

std::vector<VqaInstance> generate_instances(const TaxonomyTree& tree, std::size_t n, const DistractorSampler& sampler,
                                            std::uint64_t seed, bool ask_singleton_levels) {
    const auto leaves = tree.leaves();
    std::mt19937_64 rng(mix_seed(seed, 0x1eaf));
    std::uniform_int_distribution<std::size_t> pick(0, leaves.size() - 1);
    std::vector<VqaInstance> out;
    out.reserve(n);
    for (std::size_t k = 1; k <= n; ++k) {
        const std::string& leaf = tree.nodes()[leaves[pick(rng)]].id;
        char id[32];
        std::snprintf(id, sizeof id, "inst-%06zu", k);
        BuildOptions options{id, ask_singleton_levels};
        out.push_back(build_instance(tree, leaf, "synthetic://" + leaf + "/" + std::to_string(k), sampler,
                                     mix_seed(seed, k), options));
    }
    return out;
}

SplitManifest split_ids(std::vector<std::string> ids, std::uint64_t seed, double val_fraction, double test_fraction) {
    if (val_fraction < 0.0 || test_fraction < 0.0 || val_fraction + test_fraction > 1.0) {
        throw ConfigError("split fractions must be non-negative and sum to at most 1");
    }
    std::mt19937_64 rng(mix_seed(seed, 0x5711));
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto n = static_cast<double>(ids.size());
    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * n + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * n + 1e-9));
    SplitManifest m;
    const auto train_end = ids.begin() + static_cast<std::ptrdiff_t>(ids.size() - n_val - n_test);
    const auto val_end = train_end + static_cast<std::ptrdiff_t>(n_val);
    m.train.assign(ids.begin(), train_end);
    m.val.assign(train_end, val_end);
    m.test.assign(val_end, ids.end());
    return m;
}

std::string instance_to_json_line(const VqaInstance& instance) {
    json j;
    j["instance_id"] = instance.instance_id;
    j["image_ref"] = instance.image_ref;
    j["gold_path"] = {{"node_ids", instance.gold_path.node_ids}, {"labels", instance.gold_path.labels}};
    json levels = json::array();
    for (const auto& q : instance.per_level) {
        levels.push_back({{"level_index", q.level_index},
                          {"level_name", q.level_name},
                          {"question_text", q.question_text},
                          {"options", q.options},
                          {"gold_letter", std::string(1, q.gold_letter)}});
    }
    j["per_level"] = std::move(levels);
    return j.dump();
}

VqaInstance instance_from_json_line(std::string_view line) {
    try {
        const json j = json::parse(line);
        VqaInstance inst;
        inst.instance_id = j.at("instance_id").get<std::string>();
        inst.image_ref = j.at("image_ref").get<std::string>();
        inst.gold_path.node_ids = j.at("gold_path").at("node_ids").get<std::vector<std::string>>();
        inst.gold_path.labels = j.at("gold_path").at("labels").get<std::vector<std::string>>();
        for (const auto& lq : j.at("per_level")) {
            LevelQuestion q;
            q.level_index = lq.at("level_index").get<int>();
            q.level_name = lq.at("level_name").get<std::string>();
            q.question_text = lq.at("question_text").get<std::string>();
            q.options = lq.at("options").get<std::vector<std::string>>();
            const auto letter = lq.at("gold_letter").get<std::string>();
            if (letter.size() != 1 || q.options.empty() || q.options.size() > kMaxOptions ||
                !q.label_for(letter[0])) {
                throw InstanceError("instance '" + inst.instance_id + "': gold letter outside rendered options");
            }
            q.gold_letter = letter[0];
            inst.per_level.push_back(std::move(q));
        }
        if (inst.per_level.empty()) throw InstanceError("instance '" + inst.instance_id + "' has no questions");
        return inst;
    } catch (const json::exception& e) {
        throw InstanceError(std::string("malformed instance record: ") + e.what());
    }
}

std::string write_instances(const std::vector<VqaInstance>& instances) {
    std::string out;
    for (const auto& inst : instances) {
        out += instance_to_json_line(inst);
        out += '\n';
    }
    return out;
}

std::vector<VqaInstance> read_instances(std::string_view document) {
    std::vector<VqaInstance> out;
    for (const auto& line : split_lines(document)) out.push_back(instance_from_json_line(line));
    return out;
}

std::vector<VqaInstance> read_instances_file(const std::string& path) { return read_instances(read_text_file(path)); }

}  // namespace hvqa
