#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hvqa {

struct TaxNode {
    std::string id;
    std::string label;
    int depth = 1;
    std::optional<std::string> parent;

    friend bool operator==(const TaxNode&, const TaxNode&) = default;
};

// Root-to-leaf path; node_ids and labels are parallel.
struct TaxPath {
    std::vector<std::string> node_ids;
    std::vector<std::string> labels;

    std::size_t size() const { return node_ids.size(); }
    friend bool operator==(const TaxPath&, const TaxPath&) = default;
};

class TaxonomyError : public std::runtime_error {
  public:
    enum class Kind {
        kMalformed,
        kDuplicateId,
        kOrphan,
        kCycle,
        kRootCount,
        kDepthGap,
        kDuplicateSiblingLabel,
        kDepthExceedsLevels,
        kUnknownNode,
        kNotALeaf,
    };

    TaxonomyError(Kind kind, std::string node_id, const std::string& message)
        : std::runtime_error(message), kind_(kind), node_id_(std::move(node_id)) {}

    Kind kind() const { return kind_; }
    const std::string& node_id() const { return node_id_; }

  private:
    Kind kind_;
    std::string node_id_;
};

std::string_view to_string(TaxonomyError::Kind kind);

// Immutable, validated taxonomy tree. Construct through from_nodes() or
// load_taxonomy(); both run every structural check.
class TaxonomyTree {
  public:
    static TaxonomyTree from_nodes(std::string name, std::vector<std::string> levels,
                                   std::vector<TaxNode> nodes);

    const std::string& name() const { return name_; }
    const std::vector<std::string>& levels() const { return levels_; }
    const std::vector<TaxNode>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }

    const TaxNode& root() const { return nodes_[root_]; }
    const TaxNode& node(std::string_view id) const;
    std::size_t index_of(std::string_view id) const;
    bool contains(std::string_view id) const;

    // Children in label order.
    const std::vector<std::size_t>& children_of(std::size_t index) const { return children_[index]; }
    std::optional<std::size_t> parent_of(std::size_t index) const;
    bool is_leaf(std::size_t index) const { return children_[index].empty(); }

    // Node indices at a depth (1-based), in label order.
    const std::vector<std::size_t>& nodes_at_depth(int depth) const;
    std::vector<std::size_t> leaves() const;

    int max_depth() const { return max_depth_; }
    // A level whose depth holds exactly one node (e.g. a lone kingdom).
    bool is_singleton_level(int depth) const;
    // Position of a node among its parent's children (label order).
    std::size_t child_rank(std::size_t index) const { return child_rank_[index]; }

  private:
    TaxonomyTree() = default;

    std::string name_;
    std::vector<std::string> levels_;
    std::vector<TaxNode> nodes_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::optional<std::size_t>> parent_;
    std::vector<std::vector<std::size_t>> by_depth_;
    std::vector<std::size_t> child_rank_;
    std::size_t root_ = 0;
    int max_depth_ = 0;
};

TaxonomyTree load_taxonomy(std::string_view document);
TaxonomyTree load_taxonomy_file(const std::string& path);
std::string serialize_taxonomy(const TaxonomyTree& tree);

TaxPath path_for_leaf(const TaxonomyTree& tree, std::string_view leaf_id);

// All nodes sharing the node's parent, the node included, sorted by label.
std::vector<TaxNode> siblings_at(const TaxonomyTree& tree, std::string_view node_id);

// Complete tree with `branching` children per internal node and `depth`
// levels counting the root. Level names default to iNat-style ranks.
TaxonomyTree generate_regular_tree(std::string name, int depth, int branching,
                                   std::vector<std::string> level_names = {});

}  // namespace hvqa
