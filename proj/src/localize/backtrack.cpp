#include "xmrca/localize/backtrack.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "xmrca/core/error.hpp"

namespace xmrca {

std::vector<NodeId> compact(const DimensionTree& tree, std::span<const NodeId> nodes, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "backtrack threshold must lie in (0, 1]");
  }
  std::set<NodeId> chosen;
  for (NodeId id : nodes) {
    if (id >= tree.size()) throw Error(ErrorCode::kInvalidArgument, "node id outside the tree");
    chosen.insert(id);
  }
  // Drop members already covered by a shallower member.
  std::erase_if(chosen, [&](NodeId id) {
    for (NodeId a = tree.node(id).parent; a != kNoParent; a = tree.node(a).parent) {
      if (chosen.contains(a)) return true;
    }
    return false;
  });

  for (std::size_t layer = tree.depth(); layer-- > 0;) {
    // Covered leaf count per candidate parent at this layer.
    std::map<NodeId, std::size_t> covered;
    for (NodeId id : chosen) {
      if (tree.node(id).depth > layer) covered[tree.ancestor_at_depth(id, layer)] += tree.leaf_count(id);
    }
    bool added = false;
    for (const auto& [parent, count] : covered) {
      const double ratio = static_cast<double>(count) / static_cast<double>(tree.leaf_count(parent));
      if (ratio < threshold) continue;
      std::erase_if(chosen, [&](NodeId id) { return tree.is_ancestor_or_self(parent, id); });
      chosen.insert(parent);
      added = true;
    }
    if (!added) break;
  }
  return {chosen.begin(), chosen.end()};
}

std::vector<NodeId> backtrack(const DimensionTree& tree, std::span<const NodeId> leaves, double threshold) {
  for (NodeId id : leaves) {
    if (id >= tree.size() || !tree.is_leaf(id)) {
      throw Error(ErrorCode::kInvalidArgument, "backtrack input must contain only leaves");
    }
  }
  return compact(tree, leaves, threshold);
}

}  // namespace xmrca
