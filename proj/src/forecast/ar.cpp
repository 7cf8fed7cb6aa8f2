#include "xmrca/forecast/ar.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "xmrca/core/error.hpp"
#include "xmrca/ingest/csv.hpp"

namespace xmrca {

double ArModel::predict_next(std::span<const double> history) const {
  if (mean_only) return intercept;
  if (history.size() < order) throw Error(ErrorCode::kInsufficientHistory, "history shorter than AR order");
  double value = intercept;
  for (std::size_t k = 0; k < order; ++k) value += coefficients[k] * history[history.size() - 1 - k];
  return value;
}

ArModel fit_ar(std::span<const double> series, std::size_t order) {
  if (order < 1) throw Error(ErrorCode::kInvalidArgument, "AR order must be at least 1");
  if (series.size() < order + 2) {
    throw Error(ErrorCode::kInsufficientHistory, "series of length " + std::to_string(series.size()) +
                                                     " is too short for AR(" + std::to_string(order) + ")");
  }
  ArModel model;
  model.order = order;
  model.training_length = series.size();
  model.coefficients.assign(order, 0.0);

  if (std::all_of(series.begin(), series.end(), [&](double v) { return v == series.front(); })) {
    model.mean_only = true;
    model.intercept = series.front();
    return model;
  }

  const auto rows = static_cast<Eigen::Index>(series.size() - order);
  const auto cols = static_cast<Eigen::Index>(order + 1);
  Eigen::MatrixXd design(rows, cols);
  Eigen::VectorXd target(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::size_t t = order + static_cast<std::size_t>(r);
    design(r, 0) = 1.0;
    for (std::size_t k = 0; k < order; ++k) design(r, static_cast<Eigen::Index>(k + 1)) = series[t - 1 - k];
    target(r) = series[t];
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  const Eigen::VectorXd solution = cod.solve(target);
  model.intercept = solution(0);
  for (std::size_t k = 0; k < order; ++k) model.coefficients[k] = solution(static_cast<Eigen::Index>(k + 1));
  const Eigen::VectorXd residual = target - design * solution;
  model.residual_std = std::sqrt(residual.squaredNorm() / static_cast<double>(rows));
  if (!std::isfinite(model.intercept) ||
      !std::all_of(model.coefficients.begin(), model.coefficients.end(), [](double c) { return std::isfinite(c); })) {
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(series.size());
    model.mean_only = true;
    model.intercept = mean;
    std::fill(model.coefficients.begin(), model.coefficients.end(), 0.0);
  }
  return model;
}

std::size_t default_ar_order(std::size_t history) { return std::max<std::size_t>(1, std::min<std::size_t>(7, history / 3)); }

SeriesForecast forecast_series(std::span<const double> history, double current, std::size_t order) {
  SeriesForecast out;
  if (order == 0) order = default_ar_order(history.size());
  if (history.size() >= order + 2) {
    const ArModel model = fit_ar(history, order);
    out.expected = model.predict_next(history);
    out.sigma = model.residual_std;
    return out;
  }
  out.fallback = true;
  if (history.empty()) {
    out.expected = current;
    return out;
  }
  const double n = static_cast<double>(history.size());
  const double mean = std::accumulate(history.begin(), history.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : history) ss += (v - mean) * (v - mean);
  out.expected = mean;
  out.sigma = std::sqrt(ss / n);
  return out;
}

ForecastPanel forecast_panel(const MetricPanel& panel, std::size_t t, std::size_t order) {
  if (t >= panel.num_timestamps()) throw Error(ErrorCode::kInvalidArgument, "forecast timestamp out of range");
  ForecastPanel out;
  out.timestamp = t;
  out.nodes = panel.num_nodes();
  out.metrics = panel.num_metrics();
  out.expected.assign(out.nodes * out.metrics, std::numeric_limits<double>::quiet_NaN());
  out.sigma.assign(out.nodes * out.metrics, 0.0);
  std::vector<double> history;
  history.reserve(t);
  for (NodeId node = 0; node < out.nodes; ++node) {
    for (std::size_t m = 0; m < out.metrics; ++m) {
      history.clear();
      for (std::size_t s = 0; s < t; ++s) {
        if (panel.has(s, node, m)) history.push_back(panel.value(s, node, m));
      }
      if (history.empty() && !panel.has(t, node, m)) {
        out.warnings.push_back({node, m, "no data"});
        continue;
      }
      const auto f = forecast_series(history, panel.value(t, node, m), order);
      out.expected[node * out.metrics + m] = f.expected;
      out.sigma[node * out.metrics + m] = f.sigma;
      if (f.fallback) {
        out.warnings.push_back({node, m, history.empty() ? "no history; using observed value" : "short history; using mean"});
      }
    }
  }
  return out;
}

bool detect_3sigma(double v, double f, double sigma, double sigma_floor) {
  return std::abs(v - f) > 3.0 * std::max(sigma, sigma_floor);
}

std::string serialize_forecast_csv(const ForecastPanel& forecast, const DimensionTree& tree,
                                   const MetricSchema& metrics, std::string_view timestamp_label) {
  std::ostringstream out;
  out << "timestamp";
  for (const auto& d : tree.schema().names()) out << ',' << csv_escape(d);
  for (std::size_t m = 0; m < metrics.size(); ++m) out << ',' << csv_escape(metrics.name(m) + "_expected");
  out << '\n';
  for (NodeId id = 0; id < tree.size(); ++id) {
    out << csv_escape(timestamp_label);
    const auto& key = tree.key(id);
    for (std::size_t d = 0; d < key.size(); ++d) {
      out << ',' << csv_escape(key.values[d] == kAgg ? std::string(kAggLabel) : tree.schema().label(d, key.values[d]));
    }
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      const double v = forecast.value(id, m);
      out << ',' << (std::isnan(v) ? std::string() : format_double(v));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace xmrca
