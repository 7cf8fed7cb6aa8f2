#include "xmrca/core/tree.hpp"

#include <algorithm>
#include <numeric>

#include "xmrca/core/error.hpp"

namespace xmrca {

DimensionTree DimensionTree::build(const DimensionSchema& schema, std::span<const NodeKey> leaf_keys,
                                   std::vector<std::size_t> expansion_order) {
  if (leaf_keys.empty()) throw Error(ErrorCode::kEmptyInput, "no leaf keys");
  if (schema.size() == 0) throw Error(ErrorCode::kSchemaViolation, "schema has no dimensions");
  const std::size_t dims = schema.size();
  if (expansion_order.empty()) {
    expansion_order.resize(dims);
    std::iota(expansion_order.begin(), expansion_order.end(), std::size_t{0});
  }
  {
    auto sorted = expansion_order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t d = 0; d < dims; ++d) {
      if (sorted.size() != dims || sorted[d] != d) {
        throw Error(ErrorCode::kInvalidArgument, "expansion order is not a permutation of the dimensions");
      }
    }
  }
  for (const auto& key : leaf_keys) {
    if (key.size() != dims) throw Error(ErrorCode::kSchemaViolation, "leaf key has wrong arity");
    for (std::size_t d = 0; d < dims; ++d) {
      const int v = key.values[d];
      if (v == kAgg) throw Error(ErrorCode::kSchemaViolation, "leaf key is not fully concrete");
      if (v < 0 || static_cast<std::size_t>(v) >= schema.values(d).size()) {
        throw Error(ErrorCode::kSchemaViolation, "leaf key uses a value outside the schema");
      }
    }
  }

  // Lexicographic order under the expansion permutation.
  std::vector<NodeKey> leaves(leaf_keys.begin(), leaf_keys.end());
  auto less = [&](const NodeKey& a, const NodeKey& b) {
    for (std::size_t d : expansion_order) {
      if (a.values[d] != b.values[d]) return a.values[d] < b.values[d];
    }
    return false;
  };
  std::sort(leaves.begin(), leaves.end(), less);
  leaves.erase(std::unique(leaves.begin(), leaves.end()), leaves.end());

  DimensionTree tree;
  tree.schema_ = schema;
  tree.expansion_order_ = std::move(expansion_order);
  tree.layers_.resize(dims + 1);

  // For each leaf, the id of its ancestor in the previous layer.
  std::vector<NodeId> ancestor(leaves.size(), kNoParent);
  for (std::size_t depth = 0; depth <= dims; ++depth) {
    NodeId current = kNoParent;
    NodeKey current_key;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      NodeKey k = root_key(dims);
      for (std::size_t j = 0; j < depth; ++j) {
        const std::size_t d = tree.expansion_order_[j];
        k.values[d] = leaves[i].values[d];
      }
      if (current == kNoParent || k != current_key) {
        current = static_cast<NodeId>(tree.nodes_.size());
        current_key = k;
        TreeNode node;
        node.key = k;
        node.depth = depth;
        node.parent = ancestor[i];
        node.leaf_begin = i;
        node.leaf_end = i + 1;
        if (node.parent != kNoParent) tree.nodes_[node.parent].children.push_back(current);
        tree.index_.emplace(k, current);
        tree.layers_[depth].push_back(current);
        tree.nodes_.push_back(std::move(node));
      } else {
        tree.nodes_[current].leaf_end = i + 1;
      }
      ancestor[i] = current;
    }
  }
  tree.first_leaf_ = tree.layers_[dims].front();
  return tree;
}

std::span<const NodeId> DimensionTree::layer(std::size_t depth) const { return layers_.at(depth); }

bool DimensionTree::is_ancestor_or_self(NodeId ancestor, NodeId node) const {
  const auto& a = nodes_[ancestor];
  const auto& n = nodes_[node];
  return a.depth <= n.depth && a.leaf_begin <= n.leaf_begin && n.leaf_end <= a.leaf_end;
}

NodeId DimensionTree::ancestor_at_depth(NodeId node, std::size_t depth) const {
  while (nodes_[node].depth > depth) node = nodes_[node].parent;
  return node;
}

std::optional<NodeId> DimensionTree::find(const NodeKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

}  // namespace xmrca
