#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "xmrca/core/schema.hpp"
#include "xmrca/core/tree.hpp"
#include "xmrca/forecast/ar.hpp"

namespace xmrca {

inline constexpr double kJsSmoothing = 1e-12;

// Jensen-Shannon divergence in nats. Zero cells are replaced by 1e-12.
double js_divergence(std::span<const double> p, std::span<const double> q);

// Contribution of one cell to the divergence: the per-value surprise.
double js_term(double p, double q);

struct AdtributorConfig {
  double min_value_power = 0.3;  // per-value explanatory power threshold
  double min_set_power = 0.8;    // cumulative explanatory power threshold

  void validate() const;
};

struct AdtributorValue {
  int value = 0;
  double surprise = 0.0;
  double power = 0.0;
};

struct AdtributorDimension {
  std::size_t dimension = 0;
  std::vector<AdtributorValue> selected;
  double surprise = 0.0;
  double power = 0.0;
};

struct AdtributorResult {
  // Single-dimension keys (one concrete value, the rest AGG).
  std::vector<NodeKey> nodes;
  std::vector<AdtributorDimension> explanations;
  std::vector<std::string> warnings;
};

// Marginals per dimension value are built from leaf fundamentals, real and
// forecast. Surprise is the JS term of the normalised monitored values.
// Explanatory power of a value is the share of the root deviation removed
// by replacing its leaves' fundamentals with their forecasts. Returns the
// values of the most surprising dimension whose explanation set reaches
// min_set_power.
AdtributorResult adtributor(const DimensionTree& tree, const MetricSchema& metrics, std::span<const double> values,
                            const ForecastPanel& forecast, std::size_t monitored,
                            const AdtributorConfig& config = {});

}  // namespace xmrca
