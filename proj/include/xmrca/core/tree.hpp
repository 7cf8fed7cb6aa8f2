#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "xmrca/core/schema.hpp"

namespace xmrca {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoParent = static_cast<NodeId>(-1);

struct TreeNode {
  NodeKey key;
  NodeId parent = kNoParent;
  std::vector<NodeId> children;
  std::size_t depth = 0;
  // Half-open range of positions in DimensionTree::leaves().
  std::size_t leaf_begin = 0;
  std::size_t leaf_end = 0;
};

// Aggregation tree over dimension-value combinations. The root is all-AGG;
// a node at depth d has the first d dimensions of the expansion order
// concrete. Node ids are assigned breadth-first with children in value
// order, so ids grow with depth and every subtree's leaves are contiguous.
//
// Immutable after build() and safe to share between threads.
class DimensionTree {
 public:
  // `expansion_order` permutes dimension indices; empty means schema order.
  // Throws kEmptyInput for no leaves and kSchemaViolation for keys that are
  // not concrete or use values outside the schema.
  static DimensionTree build(const DimensionSchema& schema, std::span<const NodeKey> leaf_keys,
                             std::vector<std::size_t> expansion_order = {});

  const DimensionSchema& schema() const { return schema_; }
  std::size_t size() const { return nodes_.size(); }
  NodeId root() const { return 0; }
  const TreeNode& node(NodeId id) const { return nodes_[id]; }
  const NodeKey& key(NodeId id) const { return nodes_[id].key; }
  // Number of layers below the root (the number of dimensions).
  std::size_t depth() const { return expansion_order_.size(); }
  std::span<const std::size_t> expansion_order() const { return expansion_order_; }

  bool is_leaf(NodeId id) const { return nodes_[id].children.empty(); }
  std::size_t num_leaves() const { return nodes_.size() - first_leaf_; }
  NodeId leaf_id(std::size_t position) const { return static_cast<NodeId>(first_leaf_ + position); }
  std::size_t leaf_position(NodeId leaf) const { return leaf - first_leaf_; }
  // Non-leaf nodes are exactly the ids below first_leaf().
  NodeId first_leaf() const { return static_cast<NodeId>(first_leaf_); }

  std::span<const NodeId> layer(std::size_t depth) const;
  std::size_t leaf_count(NodeId id) const { return nodes_[id].leaf_end - nodes_[id].leaf_begin; }
  bool is_ancestor_or_self(NodeId ancestor, NodeId node) const;
  NodeId ancestor_at_depth(NodeId node, std::size_t depth) const;

  std::optional<NodeId> find(const NodeKey& key) const;
  std::string label(NodeId id) const { return format_key(nodes_[id].key, schema_); }

 private:
  DimensionSchema schema_;
  std::vector<std::size_t> expansion_order_;
  std::vector<TreeNode> nodes_;
  std::vector<std::vector<NodeId>> layers_;
  std::size_t first_leaf_ = 0;
  std::unordered_map<NodeKey, NodeId, NodeKeyHash> index_;
};

}  // namespace xmrca
