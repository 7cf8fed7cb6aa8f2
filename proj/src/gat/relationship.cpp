#include "xmrca/gat/relationship.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xmrca/core/error.hpp"

namespace xmrca {

void Relationship::edge_weights(std::span<const double>, std::size_t child_count, std::size_t,
                                std::span<double> weights) const {
  std::fill_n(weights.begin(), child_count, 1.0 / static_cast<double>(child_count));
}

void ExactRelationship::predict_parent(std::span<const double> children, std::size_t child_count, std::size_t,
                                       std::span<double> out) const {
  const std::size_t p = metrics_.num_fundamentals();
  for (std::size_t f = 0; f < p; ++f) {
    double sum = 0.0;
    for (std::size_t j = 0; j < child_count; ++j) sum += children[j * p + f];
    out[f] = metrics_.aggregation(f) == Aggregation::kSum ? sum : sum / static_cast<double>(child_count);
  }
  metrics_.compute_derived(out.first(metrics_.size()));
}

namespace {

void gather_children(const DimensionTree& tree, NodeId id, std::span<const double> values, std::size_t outputs,
                     std::size_t p, std::vector<double>& buffer) {
  const auto& children = tree.node(id).children;
  buffer.resize(children.size() * p);
  for (std::size_t j = 0; j < children.size(); ++j) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(children[j] * outputs), p,
                buffer.begin() + static_cast<std::ptrdiff_t>(j * p));
  }
}

void check_shapes(const Relationship& relationship, const DimensionTree& tree, std::span<const double> leaves) {
  if (leaves.size() != tree.num_leaves() * relationship.num_fundamentals()) {
    throw Error(ErrorCode::kInvalidArgument, "leaf table does not match tree and relationship");
  }
}

}  // namespace

TreePrediction propagate_tree(const Relationship& relationship, const DimensionTree& tree,
                              std::span<const double> leaf_fundamentals) {
  check_shapes(relationship, tree, leaf_fundamentals);
  const std::size_t p = relationship.num_fundamentals();
  TreePrediction pred;
  pred.outputs = relationship.num_outputs();
  pred.values.assign(tree.size() * pred.outputs, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t pos = 0; pos < tree.num_leaves(); ++pos) {
    std::copy_n(leaf_fundamentals.begin() + static_cast<std::ptrdiff_t>(pos * p), p,
                pred.values.begin() + static_cast<std::ptrdiff_t>(tree.leaf_id(pos) * pred.outputs));
  }
  std::vector<double> buffer;
  for (NodeId id = tree.first_leaf(); id-- > 0;) {
    gather_children(tree, id, pred.values, pred.outputs, p, buffer);
    const auto& node = tree.node(id);
    relationship.predict_parent(buffer, node.children.size(), node.depth + 1,
                                std::span<double>(pred.values).subspan(id * pred.outputs, pred.outputs));
  }
  return pred;
}

std::vector<double> leaf_importance(const Relationship& relationship, const DimensionTree& tree,
                                    std::span<const double> leaf_fundamentals) {
  const TreePrediction pred = propagate_tree(relationship, tree, leaf_fundamentals);
  const std::size_t p = relationship.num_fundamentals();
  std::vector<double> node_weight(tree.size(), 0.0);
  node_weight[tree.root()] = 1.0;
  std::vector<double> buffer;
  std::vector<double> weights;
  for (NodeId id = 0; id < tree.first_leaf(); ++id) {
    const auto& node = tree.node(id);
    gather_children(tree, id, pred.values, pred.outputs, p, buffer);
    weights.assign(node.children.size(), 0.0);
    relationship.edge_weights(buffer, node.children.size(), node.depth + 1, weights);
    for (std::size_t j = 0; j < node.children.size(); ++j) node_weight[node.children[j]] = node_weight[id] * weights[j];
  }
  std::vector<double> importance(tree.num_leaves());
  double total = 0.0;
  for (std::size_t pos = 0; pos < importance.size(); ++pos) {
    importance[pos] = node_weight[tree.leaf_id(pos)];
    total += importance[pos];
  }
  if (total > 0.0) {
    for (double& v : importance) v /= total;
  }
  return importance;
}

TreePropagator::TreePropagator(const Relationship& relationship, const DimensionTree& tree,
                               std::span<const double> leaf_fundamentals)
    : relationship_(relationship),
      tree_(tree),
      p_(relationship.num_fundamentals()),
      outputs_(relationship.num_outputs()),
      baseline_(propagate_tree(relationship, tree, leaf_fundamentals)),
      work_(baseline_.values),
      dirty_(tree.size(), 0),
      frontier_(tree.depth() + 1) {}

void TreePropagator::recompute(NodeId id) {
  gather_children(tree_, id, work_, outputs_, p_, gather_);
  const auto& node = tree_.node(id);
  const std::size_t base = id * outputs_;
  for (std::size_t o = 0; o < outputs_; ++o) undo_.emplace_back(base + o, work_[base + o]);
  relationship_.predict_parent(gather_, node.children.size(), node.depth + 1,
                               std::span<double>(work_).subspan(base, outputs_));
}

void TreePropagator::evaluate(std::span<const std::size_t> leaf_positions, std::span<const double> replacement,
                              std::span<double> root_out) {
  undo_.clear();
  for (auto& f : frontier_) f.clear();
  for (std::size_t pos : leaf_positions) {
    const NodeId leaf = tree_.leaf_id(pos);
    const std::size_t base = leaf * outputs_;
    for (std::size_t f = 0; f < p_; ++f) {
      undo_.emplace_back(base + f, work_[base + f]);
      work_[base + f] = replacement[pos * p_ + f];
    }
    const NodeId parent = tree_.node(leaf).parent;
    if (parent != kNoParent && !dirty_[parent]) {
      dirty_[parent] = 1;
      frontier_[tree_.node(parent).depth].push_back(parent);
    }
  }
  auto restore = [&] {
    for (auto it = undo_.rbegin(); it != undo_.rend(); ++it) work_[it->first] = it->second;
    for (auto& layer : frontier_) {
      for (NodeId id : layer) dirty_[id] = 0;
    }
  };
  try {
    for (std::size_t depth = tree_.depth(); depth-- > 0;) {
      auto& layer = frontier_[depth];
      // Ascending ids keep the evaluation order independent of input order.
      std::sort(layer.begin(), layer.end());
      for (NodeId id : layer) {
        recompute(id);
        const NodeId parent = tree_.node(id).parent;
        if (parent != kNoParent && !dirty_[parent]) {
          dirty_[parent] = 1;
          frontier_[depth - 1].push_back(parent);
        }
      }
    }
  } catch (...) {
    restore();
    throw;
  }
  const auto root = std::span<const double>(work_).subspan(tree_.root() * outputs_, outputs_);
  std::copy(root.begin(), root.end(), root_out.begin());
  restore();
}

}  // namespace xmrca
