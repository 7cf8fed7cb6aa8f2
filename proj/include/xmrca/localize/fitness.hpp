#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xmrca/core/tree.hpp"
#include "xmrca/gat/relationship.hpp"

namespace xmrca {

// One bit per filtered candidate; 1 selects the candidate as a cause.
using Chromosome = std::vector<std::uint8_t>;

enum class ReplacementScope {
  // Every fundamental of a selected leaf takes its forecast.
  kAllFundamentals,
  // Only fundamentals set in the replacement mask take their forecast.
  kMaskedOnly,
};

enum class PenaltyNormalization {
  kLeaves,      // beta * |s| / number of tree leaves
  kCandidates,  // beta * |s| / number of candidates
  kNone,        // beta * |s|
};

struct FitnessConfig {
  double beta = 1.0;
  ReplacementScope scope = ReplacementScope::kAllFundamentals;
  PenaltyNormalization normalization = PenaltyNormalization::kLeaves;
  // Minimum |observed - forecast| at the root for an anomaly to exist.
  double anomaly_floor = 1e-9;
  // Shift the counterfactual root by observed - G(X(0)) so that an
  // imperfect model still scores the empty selection at exactly 1.
  bool anchor_to_observed = false;
};

// Counterfactual root evaluation for chromosomes over a fixed candidate list.
// Holds references to `relationship` and `tree`; keeps mutable scratch state,
// so use one instance per thread.
class FitnessContext {
 public:
  // `leaf_real` and `leaf_forecast` are (num_leaves x P) in leaf-position
  // order. `replace_mask` (same shape) is required for kMaskedOnly.
  // Throws kNoAnomaly when |observed_root - forecast_root| <= anomaly_floor.
  FitnessContext(const Relationship& relationship, const DimensionTree& tree, std::span<const double> leaf_real,
                 std::span<const double> leaf_forecast, std::vector<std::size_t> candidates,
                 std::size_t monitored, double observed_root, double forecast_root, FitnessConfig config,
                 std::span<const std::uint8_t> replace_mask = {});

  std::size_t size() const { return candidates_.size(); }
  std::span<const std::size_t> candidates() const { return candidates_; }
  const FitnessConfig& config() const { return config_; }
  double observed_root() const { return observed_root_; }
  double forecast_root() const { return forecast_root_; }

  // Monitored root value after replacing the selected leaves. NaN when the
  // counterfactual hits a formula domain error.
  double root_value(const Chromosome& s);
  // |root_value(s) - forecast| / |observed - forecast|; +inf on domain errors.
  double residual(const Chromosome& s);
  double penalty(const Chromosome& s) const;
  double fitness(const Chromosome& s) { return residual(s) + penalty(s); }
  double recovery(const Chromosome& s) { return 1.0 - residual(s); }
  double operator()(const Chromosome& s) { return fitness(s); }

  // Root value with an explicit list of leaf positions replaced.
  double root_value_for(std::span<const std::size_t> leaf_positions);

 private:
  const DimensionTree& tree_;
  std::vector<std::size_t> candidates_;
  std::size_t monitored_;
  double observed_root_;
  double forecast_root_;
  FitnessConfig config_;
  std::vector<double> replacement_;
  TreePropagator propagator_;
  double offset_ = 0.0;
  std::vector<std::size_t> selected_;
  std::vector<double> root_;
};

}  // namespace xmrca
