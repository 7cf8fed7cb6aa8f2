#pragma once

#include <span>
#include <vector>

#include "xmrca/core/tree.hpp"

namespace xmrca {

inline constexpr double kDefaultBacktrackThreshold = 0.6;

// Merges selected nodes into ancestors layer by layer from the deepest
// non-leaf layer upwards: a parent replaces its selected descendants when
// they cover at least `threshold` of its leaves. Stops at the first layer
// where no parent is added. Accepts any node set; nodes already covered by
// another member are dropped first. Result is sorted by node id.
std::vector<NodeId> compact(const DimensionTree& tree, std::span<const NodeId> nodes,
                            double threshold = kDefaultBacktrackThreshold);

// compact() for a set of leaves; throws kInvalidArgument for non-leaf input.
std::vector<NodeId> backtrack(const DimensionTree& tree, std::span<const NodeId> leaves,
                              double threshold = kDefaultBacktrackThreshold);

}  // namespace xmrca
