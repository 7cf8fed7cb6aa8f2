#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "xmrca/core/panel.hpp"
#include "xmrca/core/schema.hpp"
#include "xmrca/core/tree.hpp"

namespace xmrca {

// value_t = intercept + sum_k coefficients[k] * value_{t-1-k}
struct ArModel {
  std::size_t order = 1;
  double intercept = 0.0;
  std::vector<double> coefficients;
  double residual_std = 0.0;
  std::size_t training_length = 0;
  // Set for constant training series; the model predicts the mean.
  bool mean_only = false;

  // `history` must hold at least `order` values; the newest is last.
  double predict_next(std::span<const double> history) const;
};

// Least-squares fit with intercept. Needs order + 2 values, otherwise
// kInsufficientHistory. Rank-deficient designs use the minimum-norm solution.
ArModel fit_ar(std::span<const double> series, std::size_t order);

// min(7, history / 3), at least 1.
std::size_t default_ar_order(std::size_t history);

struct SeriesForecast {
  double expected = 0.0;
  double sigma = 0.0;
  bool fallback = false;
};

// One-step-ahead forecast of series[t] from series[0, t). Short histories
// fall back to the mean of what is there, an empty history to `current`.
SeriesForecast forecast_series(std::span<const double> history, double current, std::size_t order = 0);

struct ForecastWarning {
  NodeId node = 0;
  std::size_t metric = 0;
  std::string reason;
};

// Expected values for every (node, metric) at one timestamp.
struct ForecastPanel {
  std::size_t timestamp = 0;
  std::size_t nodes = 0;
  std::size_t metrics = 0;
  std::vector<double> expected;
  std::vector<double> sigma;
  std::vector<ForecastWarning> warnings;

  double value(NodeId node, std::size_t metric) const { return expected[node * metrics + metric]; }
  double sd(NodeId node, std::size_t metric) const { return sigma[node * metrics + metric]; }
};

// `order` 0 picks default_ar_order per cell. Only values before `t` are read
// (plus the value at `t` when there is no history at all).
ForecastPanel forecast_panel(const MetricPanel& panel, std::size_t t, std::size_t order = 0);

inline constexpr double kDefaultSigmaFloor = 1e-8;

// |v - f| > 3 * max(sigma, floor)
bool detect_3sigma(double v, double f, double sigma, double sigma_floor = kDefaultSigmaFloor);

// Same layout as the leaf CSV but one row per tree node and columns
// suffixed "_expected".
std::string serialize_forecast_csv(const ForecastPanel& forecast, const DimensionTree& tree,
                                   const MetricSchema& metrics, std::string_view timestamp_label);

}  // namespace xmrca
