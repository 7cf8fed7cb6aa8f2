#include "xmrca/localize/localize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "xmrca/core/error.hpp"
#include "xmrca/ingest/csv.hpp"

namespace xmrca {

std::vector<NodeId> RootCauseReport::node_ids() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes) out.push_back(n.node);
  return out;
}

RootCauseReport localize(const Relationship& relationship, const DimensionTree& tree, const MetricSchema& metrics,
                         std::span<const double> values, const ForecastPanel& forecast, std::size_t monitored,
                         const LocalizeConfig& config) {
  const std::size_t m_count = metrics.size();
  const std::size_t p = metrics.num_fundamentals();
  const std::size_t n = tree.num_leaves();
  if (values.size() != tree.size() * m_count || forecast.nodes != tree.size() || forecast.metrics != m_count) {
    throw Error(ErrorCode::kInvalidArgument, "localize inputs do not match the tree and metric schema");
  }
  if (monitored >= m_count) throw Error(ErrorCode::kInvalidArgument, "monitored metric out of range");

  RootCauseReport report;
  report.timestamp = forecast.timestamp;
  report.monitored = monitored;
  report.observed_root = values[tree.root() * m_count + monitored];
  report.forecast_root = forecast.value(tree.root(), monitored);
  if (!(std::abs(report.observed_root - report.forecast_root) > config.fitness.anomaly_floor)) {
    throw Error(ErrorCode::kNoAnomaly, "monitored root value matches its forecast");
  }

  std::vector<double> leaf_real(n * p);
  std::vector<double> leaf_forecast(n * p);
  std::vector<std::uint8_t> mask(n * p);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const NodeId id = tree.leaf_id(pos);
    for (std::size_t m = 0; m < p; ++m) {
      const double v = values[id * m_count + m];
      const double f = forecast.value(id, m);
      leaf_real[pos * p + m] = v;
      leaf_forecast[pos * p + m] = f;
      mask[pos * p + m] = detect_3sigma(v, f, forecast.sd(id, m)) ? 1 : 0;
    }
  }

  const auto importance = leaf_importance(relationship, tree, leaf_real);
  report.candidates = filter_candidates(tree, metrics, values, forecast, importance, monitored, config.filter);

  std::vector<std::size_t> positions;
  for (const auto& c : report.candidates) positions.push_back(c.leaf_position);
  FitnessConfig fitness_config = config.fitness;
  fitness_config.beta = config.ga.beta;
  FitnessContext context(relationship, tree, leaf_real, leaf_forecast, positions, monitored, report.observed_root,
                         report.forecast_root, fitness_config, mask);

  const GaResult ga = ga_search(config.ga, positions.size(), [&](const Chromosome& s) { return context(s); });
  report.best = ga.best;
  report.best_fitness = ga.best_fitness;
  report.history = ga.history;
  report.recovered_root = context.root_value(ga.best);
  report.recovery_ratio = context.recovery(ga.best);

  for (std::size_t i = 0; i < ga.best.size(); ++i) {
    if (ga.best[i]) report.selected_leaves.push_back(report.candidates[i].node);
  }
  std::sort(report.selected_leaves.begin(), report.selected_leaves.end());
  for (NodeId id : backtrack(tree, report.selected_leaves, config.backtrack_threshold)) {
    ReportedNode node;
    node.node = id;
    std::vector<std::size_t> under;
    for (NodeId leaf : report.selected_leaves) {
      if (tree.is_ancestor_or_self(id, leaf)) under.push_back(tree.leaf_position(leaf));
    }
    node.selected_leaves = under.size();
    const double root = context.root_value_for(under);
    node.recovery = std::isfinite(root) ? 1.0 - std::abs(root - report.forecast_root) /
                                                    std::abs(report.observed_root - report.forecast_root)
                                        : -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < m_count; ++m) {
      const double v = values[id * m_count + m];
      const double f = forecast.value(id, m);
      node.deviations.push_back(std::abs(v - f) / std::max(std::abs(v), config.filter.value_floor));
    }
    report.nodes.push_back(std::move(node));
  }
  std::stable_sort(report.nodes.begin(), report.nodes.end(),
                   [](const ReportedNode& a, const ReportedNode& b) { return a.recovery > b.recovery; });
  return report;
}

std::string format_report_lines(const RootCauseReport& report, const DimensionTree& tree,
                                const MetricSchema& metrics) {
  std::ostringstream out;
  for (const auto& node : report.nodes) {
    out << "node=" << tree.label(node.node) << "\tselected_leaves=" << node.selected_leaves
        << "\trecovery=" << format_double(node.recovery);
    for (std::size_t m = 0; m < node.deviations.size(); ++m) {
      out << "\tdeviation." << metrics.name(m) << '=' << format_double(node.deviations[m]);
    }
    out << '\n';
  }
  return out.str();
}

std::string format_summary(const RootCauseReport& report, const DimensionTree& tree, const MetricSchema& metrics,
                           std::string_view timestamp_label) {
  std::ostringstream out;
  out << "root cause: ";
  if (report.nodes.empty()) out << "(none)";
  for (std::size_t i = 0; i < report.nodes.size(); ++i) out << (i ? "; " : "") << tree.label(report.nodes[i].node);
  out << '\n';
  out << "timestamp: " << timestamp_label << '\n';
  out << "monitored: " << metrics.name(report.monitored) << " observed " << format_double(report.observed_root)
      << " expected " << format_double(report.forecast_root) << '\n';
  out << "recovered root value: " << format_double(report.recovered_root) << '\n';
  out << "recovery ratio: " << format_double(std::clamp(report.recovery_ratio, 0.0, 1.0)) << '\n';
  out << "best fitness: " << format_double(report.best_fitness) << '\n';
  out << "candidates: " << report.candidates.size() << '\n';
  for (const auto& c : report.candidates) {
    out << "  " << tree.label(c.node) << " score " << format_double(c.score) << " deviation "
        << format_double(c.deviation) << " importance " << format_double(c.importance) << '\n';
  }
  return out.str();
}

}  // namespace xmrca
