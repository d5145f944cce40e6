#include "hvqa/taxonomy.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "hvqa/common.hpp"
#include "json.hpp"

namespace hvqa {

using json = nlohmann::json;

std::string_view to_string(TaxonomyError::Kind kind) {
    switch (kind) {
        case TaxonomyError::Kind::kMalformed: return "malformed";
        case TaxonomyError::Kind::kDuplicateId: return "duplicate-id";
        case TaxonomyError::Kind::kOrphan: return "orphan-node";
        case TaxonomyError::Kind::kCycle: return "cycle";
        case TaxonomyError::Kind::kRootCount: return "root-count";
        case TaxonomyError::Kind::kDepthGap: return "depth-gap";
        case TaxonomyError::Kind::kDuplicateSiblingLabel: return "duplicate-sibling-label";
        case TaxonomyError::Kind::kDepthExceedsLevels: return "depth-exceeds-levels";
        case TaxonomyError::Kind::kUnknownNode: return "unknown-node";
        case TaxonomyError::Kind::kNotALeaf: return "not-a-leaf";
    }
    return "unknown";
}

namespace {

[[noreturn]] void fail(TaxonomyError::Kind kind, const std::string& id, const std::string& what) {
    throw TaxonomyError(kind, id, std::string(to_string(kind)) + ": " + what);
}

}  // namespace

TaxonomyTree TaxonomyTree::from_nodes(std::string name, std::vector<std::string> levels,
                                      std::vector<TaxNode> nodes) {
    using K = TaxonomyError::Kind;
    if (levels.empty()) fail(K::kMalformed, "", "taxonomy declares no levels");
    if (nodes.empty()) fail(K::kMalformed, "", "taxonomy has no nodes");

    TaxonomyTree t;
    t.name_ = std::move(name);
    t.levels_ = std::move(levels);
    t.nodes_ = std::move(nodes);
    const std::size_t n = t.nodes_.size();

    for (std::size_t i = 0; i < n; ++i) {
        const auto& node = t.nodes_[i];
        if (node.id.empty()) fail(K::kMalformed, "", "node with empty id at position " + std::to_string(i));
        if (node.label.empty()) fail(K::kMalformed, node.id, "node '" + node.id + "' has an empty label");
        if (!t.index_.emplace(node.id, i).second) fail(K::kDuplicateId, node.id, "id '" + node.id + "' appears twice");
    }

    t.parent_.assign(n, std::nullopt);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& node = t.nodes_[i];
        if (!node.parent) continue;
        auto it = t.index_.find(*node.parent);
        if (it == t.index_.end()) {
            fail(K::kOrphan, node.id, "node '" + node.id + "' names missing parent '" + *node.parent + "'");
        }
        t.parent_[i] = it->second;
    }

    // Every parent exists, so a node that never reaches a parentless node sits on a cycle.
    enum : std::uint8_t { kUnvisited, kActive, kDone };
    std::vector<std::uint8_t> state(n, kUnvisited);
    for (std::size_t start = 0; start < n; ++start) {
        std::vector<std::size_t> chain;
        std::size_t cur = start;
        while (state[cur] == kUnvisited) {
            state[cur] = kActive;
            chain.push_back(cur);
            if (!t.parent_[cur]) break;
            cur = *t.parent_[cur];
        }
        if (state[cur] == kActive && t.parent_[cur]) {
            fail(K::kCycle, t.nodes_[cur].id, "parent chain of '" + t.nodes_[cur].id + "' loops back on itself");
        }
        for (auto idx : chain) state[idx] = kDone;
    }

    std::vector<std::size_t> roots;
    for (std::size_t i = 0; i < n; ++i) {
        if (!t.parent_[i]) roots.push_back(i);
    }
    if (roots.size() != 1) {
        fail(K::kRootCount, roots.empty() ? "" : t.nodes_[roots[1]].id,
             "expected exactly one root, found " + std::to_string(roots.size()));
    }
    t.root_ = roots.front();

    for (std::size_t i = 0; i < n; ++i) {
        const auto& node = t.nodes_[i];
        const int expected = t.parent_[i] ? t.nodes_[*t.parent_[i]].depth + 1 : 1;
        if (node.depth != expected) {
            fail(K::kDepthGap, node.id,
                 "node '" + node.id + "' has depth " + std::to_string(node.depth) + ", expected " +
                     std::to_string(expected));
        }
        if (node.depth > static_cast<int>(t.levels_.size())) {
            fail(K::kDepthExceedsLevels, node.id,
                 "node '" + node.id + "' at depth " + std::to_string(node.depth) + " but only " +
                     std::to_string(t.levels_.size()) + " levels are declared");
        }
        t.max_depth_ = std::max(t.max_depth_, node.depth);
    }

    t.children_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        if (t.parent_[i]) t.children_[*t.parent_[i]].push_back(i);
    }
    auto by_label = [&t](std::size_t a, std::size_t b) {
        if (t.nodes_[a].label != t.nodes_[b].label) return t.nodes_[a].label < t.nodes_[b].label;
        return t.nodes_[a].id < t.nodes_[b].id;
    };
    t.child_rank_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        auto& kids = t.children_[i];
        std::sort(kids.begin(), kids.end(), by_label);
        for (std::size_t k = 0; k < kids.size(); ++k) {
            if (k > 0 && t.nodes_[kids[k]].label == t.nodes_[kids[k - 1]].label) {
                fail(K::kDuplicateSiblingLabel, t.nodes_[kids[k]].id,
                     "label '" + t.nodes_[kids[k]].label + "' repeated under parent '" + t.nodes_[i].id + "'");
            }
            t.child_rank_[kids[k]] = k;
        }
    }

    t.by_depth_.assign(static_cast<std::size_t>(t.max_depth_) + 1, {});
    for (std::size_t i = 0; i < n; ++i) {
        t.by_depth_[static_cast<std::size_t>(t.nodes_[i].depth)].push_back(i);
    }
    for (auto& bucket : t.by_depth_) std::sort(bucket.begin(), bucket.end(), by_label);
    return t;
}

const TaxNode& TaxonomyTree::node(std::string_view id) const { return nodes_[index_of(id)]; }

std::size_t TaxonomyTree::index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) {
        fail(TaxonomyError::Kind::kUnknownNode, std::string(id), "no node with id '" + std::string(id) + "'");
    }
    return it->second;
}

bool TaxonomyTree::contains(std::string_view id) const { return index_.count(std::string(id)) > 0; }

std::optional<std::size_t> TaxonomyTree::parent_of(std::size_t index) const { return parent_[index]; }

const std::vector<std::size_t>& TaxonomyTree::nodes_at_depth(int depth) const {
    static const std::vector<std::size_t> kEmpty;
    if (depth < 1 || depth > max_depth_) return kEmpty;
    return by_depth_[static_cast<std::size_t>(depth)];
}

std::vector<std::size_t> TaxonomyTree::leaves() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (children_[i].empty()) out.push_back(i);
    }
    return out;
}

bool TaxonomyTree::is_singleton_level(int depth) const { return nodes_at_depth(depth).size() == 1; }

TaxonomyTree load_taxonomy(std::string_view document) {
    using K = TaxonomyError::Kind;
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        fail(K::kMalformed, "", std::string("not valid JSON: ") + e.what());
    }
    try {
        if (!doc.is_object()) fail(K::kMalformed, "", "top level must be an object");
        std::string name = doc.at("name").get<std::string>();
        auto levels = doc.at("levels").get<std::vector<std::string>>();
        std::vector<TaxNode> nodes;
        for (const auto& item : doc.at("nodes")) {
            TaxNode node;
            node.id = item.at("id").get<std::string>();
            node.label = item.at("label").get<std::string>();
            node.depth = item.at("depth").get<int>();
            if (item.contains("parent") && !item.at("parent").is_null()) {
                node.parent = item.at("parent").get<std::string>();
            }
            nodes.push_back(std::move(node));
        }
        return TaxonomyTree::from_nodes(std::move(name), std::move(levels), std::move(nodes));
    } catch (const json::exception& e) {
        fail(K::kMalformed, "", std::string("schema violation: ") + e.what());
    }
}

TaxonomyTree load_taxonomy_file(const std::string& path) { return load_taxonomy(read_text_file(path)); }

std::string serialize_taxonomy(const TaxonomyTree& tree) {
    json doc;
    doc["name"] = tree.name();
    doc["levels"] = tree.levels();
    json nodes = json::array();
    for (const auto& n : tree.nodes()) {
        json item;
        item["id"] = n.id;
        item["label"] = n.label;
        item["depth"] = n.depth;
        item["parent"] = n.parent ? json(*n.parent) : json(nullptr);
        nodes.push_back(std::move(item));
    }
    doc["nodes"] = std::move(nodes);
    return doc.dump(2) + "\n";
}

TaxPath path_for_leaf(const TaxonomyTree& tree, std::string_view leaf_id) {
    const std::size_t leaf = tree.index_of(leaf_id);
    if (!tree.is_leaf(leaf)) {
        fail(TaxonomyError::Kind::kNotALeaf, std::string(leaf_id), "node '" + std::string(leaf_id) + "' has children");
    }
    std::vector<std::size_t> chain{leaf};
    while (auto p = tree.parent_of(chain.back())) chain.push_back(*p);
    std::reverse(chain.begin(), chain.end());
    TaxPath path;
    for (auto idx : chain) {
        path.node_ids.push_back(tree.nodes()[idx].id);
        path.labels.push_back(tree.nodes()[idx].label);
    }
    return path;
}

std::vector<TaxNode> siblings_at(const TaxonomyTree& tree, std::string_view node_id) {
    const std::size_t idx = tree.index_of(node_id);
    const auto parent = tree.parent_of(idx);
    if (!parent) return {tree.nodes()[idx]};
    std::vector<TaxNode> out;
    for (auto k : tree.children_of(*parent)) out.push_back(tree.nodes()[k]);
    return out;
}

TaxonomyTree generate_regular_tree(std::string name, int depth, int branching,
                                   std::vector<std::string> level_names) {
    if (depth < 1 || branching < 1) throw ValidationError("generate_regular_tree: depth and branching must be >= 1");
    static const std::vector<std::string> kRanks = {"kingdom", "phylum", "class", "order",
                                                    "family",  "genus",  "species"};
    if (level_names.empty()) {
        for (int d = 0; d < depth; ++d) {
            level_names.push_back(d < static_cast<int>(kRanks.size()) ? kRanks[static_cast<std::size_t>(d)]
                                                                       : "level" + std::to_string(d + 1));
        }
    }
    if (static_cast<int>(level_names.size()) != depth) {
        throw ValidationError("generate_regular_tree: need one level name per depth");
    }

    std::vector<TaxNode> nodes;
    nodes.push_back({"n", level_names[0] + " root", 1, std::nullopt});
    std::vector<std::size_t> frontier{0};
    for (int d = 2; d <= depth; ++d) {
        std::vector<std::size_t> next;
        for (auto parent : frontier) {
            for (int k = 0; k < branching; ++k) {
                const std::string id = nodes[parent].id + "." + std::to_string(k);
                TaxNode child{id, level_names[static_cast<std::size_t>(d - 1)] + " " + id.substr(2), d,
                              nodes[parent].id};
                next.push_back(nodes.size());
                nodes.push_back(std::move(child));
            }
        }
        frontier = std::move(next);
    }
    return TaxonomyTree::from_nodes(std::move(name), std::move(level_names), std::move(nodes));
}

}  // namespace hvqa
