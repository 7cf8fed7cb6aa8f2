#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "xmrca/core/schema.hpp"
#include "xmrca/core/tree.hpp"
#include "xmrca/forecast/ar.hpp"
#include "xmrca/gat/relationship.hpp"
#include "xmrca/localize/backtrack.hpp"
#include "xmrca/localize/filter.hpp"
#include "xmrca/localize/fitness.hpp"
#include "xmrca/localize/ga.hpp"

namespace xmrca {

struct LocalizeConfig {
  FilterConfig filter;
  GaConfig ga;
  // fitness.beta is overwritten with ga.beta.
  FitnessConfig fitness;
  double backtrack_threshold = kDefaultBacktrackThreshold;
};

struct ReportedNode {
  NodeId node = 0;
  std::size_t selected_leaves = 0;
  // Recovery when only this node's selected leaves are replaced.
  double recovery = 0.0;
  // |real - forecast| / max(|real|, floor) per metric at this node.
  std::vector<double> deviations;
};

struct RootCauseReport {
  std::size_t timestamp = 0;
  std::size_t monitored = 0;
  std::vector<ReportedNode> nodes;  // after backtracking, by descending recovery
  std::vector<NodeId> selected_leaves;
  std::vector<Candidate> candidates;
  Chromosome best;
  double best_fitness = 0.0;
  std::vector<double> history;
  double observed_root = 0.0;
  double forecast_root = 0.0;
  double recovered_root = 0.0;
  double recovery_ratio = 0.0;

  std::vector<NodeId> node_ids() const;
};

// Filter, genetic search and backtrack for one anomalous timestamp. `values`
// is the node-major real row (tree.size() x metrics) at forecast.timestamp.
// Throws kNoAnomaly when the monitored root value matches its forecast and
// kNoCandidates when filtering leaves nothing.
RootCauseReport localize(const Relationship& relationship, const DimensionTree& tree, const MetricSchema& metrics,
                         std::span<const double> values, const ForecastPanel& forecast, std::size_t monitored,
                         const LocalizeConfig& config = {});

// One tab-separated key=value line per reported node.
std::string format_report_lines(const RootCauseReport& report, const DimensionTree& tree,
                                const MetricSchema& metrics);
// Human-readable block; the first line names the root cause.
std::string format_summary(const RootCauseReport& report, const DimensionTree& tree, const MetricSchema& metrics,
                           std::string_view timestamp_label);

}  // namespace xmrca
