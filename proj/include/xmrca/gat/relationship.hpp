#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xmrca/core/schema.hpp"
#include "xmrca/core/tree.hpp"

namespace xmrca {

// Maps the fundamental metrics of one parent's children to that parent's
// fundamental and derived metrics (P + Q outputs). Applied layer by layer it
// lifts leaf values to the root. Implementations are immutable and may be
// shared across threads.
class Relationship {
 public:
  virtual ~Relationship() = default;

  virtual std::size_t num_fundamentals() const = 0;
  virtual std::size_t num_outputs() const = 0;

  // `children` is row-major (child_count x num_fundamentals()); every child
  // sits at `child_depth`.
  virtual void predict_parent(std::span<const double> children, std::size_t child_count, std::size_t child_depth,
                              std::span<double> out) const = 0;

  // Importance of each child for its parent; non-negative, sums to 1.
  // Uniform unless overridden.
  virtual void edge_weights(std::span<const double> children, std::size_t child_count, std::size_t child_depth,
                            std::span<double> weights) const;
};

// Known aggregation (SUM/MEAN) followed by the derived formulas. Used as the
// oracle stand-in for a learned model.
class ExactRelationship final : public Relationship {
 public:
  explicit ExactRelationship(MetricSchema metrics) : metrics_(std::move(metrics)) {}

  std::size_t num_fundamentals() const override { return metrics_.num_fundamentals(); }
  std::size_t num_outputs() const override { return metrics_.size(); }
  void predict_parent(std::span<const double> children, std::size_t child_count, std::size_t child_depth,
                      std::span<double> out) const override;

  const MetricSchema& metrics() const { return metrics_; }

 private:
  MetricSchema metrics_;
};

// Per-node outputs (tree.size() x num_outputs()). Leaf rows hold the leaf
// fundamentals followed by NaN.
struct TreePrediction {
  std::size_t outputs = 0;
  std::vector<double> values;

  std::span<const double> row(NodeId id) const { return {values.data() + id * outputs, outputs}; }
};

// `leaf_fundamentals` is (tree.num_leaves() x P) in leaf-position order.
TreePrediction propagate_tree(const Relationship& relationship, const DimensionTree& tree,
                              std::span<const double> leaf_fundamentals);

// Bottom-up products of edge weights, renormalised to sum to 1 over leaves.
std::vector<double> leaf_importance(const Relationship& relationship, const DimensionTree& tree,
                                    std::span<const double> leaf_fundamentals);

// Caches a baseline propagation and re-evaluates the root after replacing the
// fundamentals of a few leaves, touching only their ancestors. Results are
// bitwise identical to a full propagate_tree on the modified inputs.
//
// Holds mutable scratch state: use one instance per thread.
class TreePropagator {
 public:
  TreePropagator(const Relationship& relationship, const DimensionTree& tree,
                 std::span<const double> leaf_fundamentals);

  const TreePrediction& baseline() const { return baseline_; }
  std::span<const double> baseline_root() const { return baseline_.row(tree_.root()); }

  // `replacement` is (num_leaves x P); rows of listed leaf positions are
  // substituted. Writes the root outputs into `root_out`.
  void evaluate(std::span<const std::size_t> leaf_positions, std::span<const double> replacement,
                std::span<double> root_out);

 private:
  void recompute(NodeId id);

  const Relationship& relationship_;
  const DimensionTree& tree_;
  std::size_t p_;
  std::size_t outputs_;
  TreePrediction baseline_;
  std::vector<double> work_;
  std::vector<double> gather_;
  std::vector<std::pair<std::size_t, double>> undo_;
  std::vector<std::uint8_t> dirty_;
  std::vector<std::vector<NodeId>> frontier_;
};

}  // namespace xmrca
