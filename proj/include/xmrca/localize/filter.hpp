#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xmrca/core/schema.hpp"
#include "xmrca/core/tree.hpp"
#include "xmrca/forecast/ar.hpp"

namespace xmrca {

enum class ThresholdMode {
  // score * num_leaves >= threshold: the threshold is a relative deviation
  // at uniform importance, so it does not shrink with tree size.
  kRelativeToUniform,
  // score >= threshold.
  kLiteral,
};

struct FilterConfig {
  double threshold = 0.1;
  ThresholdMode mode = ThresholdMode::kRelativeToUniform;
  // Denominator floor for relative deviations.
  double value_floor = 1e-8;
};

struct Candidate {
  std::size_t leaf_position = 0;
  NodeId node = 0;
  double deviation = 0.0;   // max relative deviation over the scored metrics
  double importance = 0.0;  // normalised to sum to 1 over leaves
  double score = 0.0;       // deviation * importance
};

// Scores every leaf. `values` is a node-major row (tree.size() x metrics)
// holding real values at the forecast's timestamp. The scored metrics are all
// fundamentals plus `monitored`; non-finite cells are skipped. The result is
// sorted by descending score, ties by leaf position.
std::vector<Candidate> score_leaves(const DimensionTree& tree, const MetricSchema& metrics,
                                    std::span<const double> values, const ForecastPanel& forecast,
                                    std::span<const double> importance, std::size_t monitored,
                                    const FilterConfig& config = {});

bool passes_filter(const Candidate& candidate, std::size_t num_leaves, const FilterConfig& config);

// score_leaves restricted to leaves passing the threshold. Throws
// kNoCandidates when nothing is left.
std::vector<Candidate> filter_candidates(const DimensionTree& tree, const MetricSchema& metrics,
                                         std::span<const double> values, const ForecastPanel& forecast,
                                         std::span<const double> importance, std::size_t monitored,
                                         const FilterConfig& config = {});

}  // namespace xmrca
