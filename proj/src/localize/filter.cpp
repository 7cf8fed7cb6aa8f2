#include "xmrca/localize/filter.hpp"

#include <algorithm>
#include <cmath>

#include "xmrca/core/error.hpp"

namespace xmrca {

std::vector<Candidate> score_leaves(const DimensionTree& tree, const MetricSchema& metrics,
                                    std::span<const double> values, const ForecastPanel& forecast,
                                    std::span<const double> importance, std::size_t monitored,
                                    const FilterConfig& config) {
  const std::size_t m_count = metrics.size();
  const std::size_t n = tree.num_leaves();
  if (values.size() != tree.size() * m_count || importance.size() != n || forecast.metrics != m_count ||
      forecast.nodes != tree.size() || monitored >= m_count) {
    throw Error(ErrorCode::kInvalidArgument, "filter inputs do not match the tree and metric schema");
  }
  double total = 0.0;
  for (double w : importance) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::kInvalidArgument, "importance must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::kInvalidArgument, "importance sums to zero");

  std::vector<std::size_t> scored;
  for (std::size_t m = 0; m < metrics.num_fundamentals(); ++m) scored.push_back(m);
  if (!metrics.is_fundamental(monitored)) scored.push_back(monitored);

  std::vector<Candidate> out;
  out.reserve(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const NodeId id = tree.leaf_id(pos);
    double deviation = 0.0;
    for (std::size_t m : scored) {
      const double v = values[id * m_count + m];
      const double f = forecast.value(id, m);
      if (!std::isfinite(v) || !std::isfinite(f)) continue;
      deviation = std::max(deviation, std::abs(v - f) / std::max(std::abs(v), config.value_floor));
    }
    const double weight = importance[pos] / total;
    out.push_back({pos, id, deviation, weight, deviation * weight});
  }
  std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  return out;
}

bool passes_filter(const Candidate& candidate, std::size_t num_leaves, const FilterConfig& config) {
  const double effective =
      config.mode == ThresholdMode::kLiteral ? candidate.score : candidate.score * static_cast<double>(num_leaves);
  return candidate.score > 0.0 && effective >= config.threshold;
}

std::vector<Candidate> filter_candidates(const DimensionTree& tree, const MetricSchema& metrics,
                                         std::span<const double> values, const ForecastPanel& forecast,
                                         std::span<const double> importance, std::size_t monitored,
                                         const FilterConfig& config) {
  auto all = score_leaves(tree, metrics, values, forecast, importance, monitored, config);
  std::erase_if(all, [&](const Candidate& c) { return !passes_filter(c, tree.num_leaves(), config); });
  if (all.empty()) throw Error(ErrorCode::kNoCandidates, "no localizable cause: every leaf is below the filter threshold");
  return all;
}

}  // namespace xmrca
