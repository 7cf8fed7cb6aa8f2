#include "xmrca/eval/adtributor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xmrca/core/error.hpp"

namespace xmrca {

namespace {

double smooth(double v) { return v == 0.0 ? kJsSmoothing : v; }

// Fundamentals aggregated over the leaves where include(pos); a leaf
// contributes its forecast when replace(pos). Derived metrics follow.
// Returns false on a formula domain error.
template <typename Include, typename Replace>
bool aggregate_leaves(const MetricSchema& metrics, std::span<const double> real, std::span<const double> expected,
                      std::size_t leaves, Include include, Replace replace, std::span<double> out) {
  const std::size_t p = metrics.num_fundamentals();
  std::fill(out.begin(), out.end(), 0.0);
  std::size_t count = 0;
  for (std::size_t pos = 0; pos < leaves; ++pos) {
    if (!include(pos)) continue;
    const auto& src = replace(pos) ? expected : real;
    for (std::size_t m = 0; m < p; ++m) out[m] += src[pos * p + m];
    ++count;
  }
  for (std::size_t m = 0; m < p; ++m) {
    if (metrics.aggregation(m) == Aggregation::kMean && count > 0) out[m] /= static_cast<double>(count);
  }
  try {
    metrics.compute_derived(out);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kFormulaDomain) return false;
    throw;
  }
  return true;
}

}  // namespace

double js_term(double p, double q) {
  p = smooth(p);
  q = smooth(q);
  const double m = 0.5 * (p + q);
  return 0.5 * (p * std::log(p / m) + q * std::log(q / m));
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorCode::kInvalidArgument, "distributions differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += js_term(p[i], q[i]);
  return std::max(0.0, total);
}

void AdtributorConfig::validate() const {
  if (!(min_value_power > 0.0 && min_value_power <= 1.0) || !(min_set_power > 0.0 && min_set_power <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "explanatory power thresholds must lie in (0, 1]");
  }
}

AdtributorResult adtributor(const DimensionTree& tree, const MetricSchema& metrics, std::span<const double> values,
                            const ForecastPanel& forecast, std::size_t monitored, const AdtributorConfig& config) {
  config.validate();
  const std::size_t p = metrics.num_fundamentals();
  const std::size_t m_count = metrics.size();
  const std::size_t n = tree.num_leaves();
  if (values.size() != tree.size() * m_count || forecast.nodes != tree.size() || forecast.metrics != m_count ||
      monitored >= m_count) {
    throw Error(ErrorCode::kInvalidArgument, "adtributor inputs do not match the tree and metric schema");
  }
  std::vector<double> real(n * p);
  std::vector<double> expected(n * p);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const NodeId id = tree.leaf_id(pos);
    for (std::size_t m = 0; m < p; ++m) {
      real[pos * p + m] = values[id * m_count + m];
      expected[pos * p + m] = forecast.value(id, m);
    }
  }

  AdtributorResult result;
  const double observed_root = values[tree.root() * m_count + monitored];
  const double expected_root = forecast.value(tree.root(), monitored);
  const double deviation = observed_root - expected_root;
  if (!(std::abs(deviation) > 0.0) || !std::isfinite(deviation)) {
    result.warnings.push_back("monitored root value matches its forecast");
    return result;
  }

  const auto& schema = tree.schema();
  const auto all = [](std::size_t) { return true; };
  const auto none = [](std::size_t) { return false; };
  std::vector<double> row(m_count);
  for (std::size_t dim = 0; dim < schema.size(); ++dim) {
    const std::size_t k = schema.values(dim).size();
    std::vector<double> real_m(k);
    std::vector<double> expected_m(k);
    std::vector<double> power(k);
    bool ok = true;
    for (std::size_t v = 0; v < k && ok; ++v) {
      const auto in_value = [&](std::size_t pos) {
        return tree.key(tree.leaf_id(pos)).values[dim] == static_cast<int>(v);
      };
      ok = aggregate_leaves(metrics, real, expected, n, in_value, none, row);
      real_m[v] = row[monitored];
      ok = ok && aggregate_leaves(metrics, real, expected, n, in_value, all, row);
      expected_m[v] = row[monitored];
      ok = ok && aggregate_leaves(metrics, real, expected, n, all, in_value, row);
      power[v] = (observed_root - row[monitored]) / deviation;
    }
    const double real_total = std::accumulate(real_m.begin(), real_m.end(), 0.0);
    const double expected_total = std::accumulate(expected_m.begin(), expected_m.end(), 0.0);
    const bool negative = std::any_of(real_m.begin(), real_m.end(), [](double x) { return !(x >= 0.0); }) ||
                          std::any_of(expected_m.begin(), expected_m.end(), [](double x) { return !(x >= 0.0); });
    if (!ok || negative || !(real_total > 0.0) || !(expected_total > 0.0) || !std::isfinite(real_total) ||
        !std::isfinite(expected_total)) {
      result.warnings.push_back("dimension " + schema.name(dim) + ": degenerate distribution");
      continue;
    }
    std::vector<AdtributorValue> ranked(k);
    for (std::size_t v = 0; v < k; ++v) {
      ranked[v] = {static_cast<int>(v), js_term(real_m[v] / real_total, expected_m[v] / expected_total), power[v]};
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const AdtributorValue& a, const AdtributorValue& b) { return a.surprise > b.surprise; });
    AdtributorDimension explanation{dim, {}, 0.0, 0.0};
    for (const auto& value : ranked) {
      if (!(value.power > config.min_value_power)) continue;
      explanation.selected.push_back(value);
      explanation.surprise += value.surprise;
      explanation.power += value.power;
      if (explanation.power > config.min_set_power) break;
    }
    if (explanation.power > config.min_set_power) result.explanations.push_back(std::move(explanation));
  }
  std::stable_sort(result.explanations.begin(), result.explanations.end(),
                   [](const AdtributorDimension& a, const AdtributorDimension& b) { return a.surprise > b.surprise; });
  if (result.explanations.empty()) {
    result.warnings.push_back("no dimension explains the deviation");
    return result;
  }
  const auto& top = result.explanations.front();
  for (const auto& value : top.selected) {
    NodeKey key = root_key(schema.size());
    key.values[top.dimension] = value.value;
    result.nodes.push_back(std::move(key));
  }
  return result;
}

}  // namespace xmrca
