#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "xmrca/core/schema.hpp"
#include "xmrca/core/tree.hpp"
#include "xmrca/forecast/ar.hpp"

namespace xmrca {

struct EvalCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  // Each is 0 when its denominator is 0.
  double precision() const;
  double recall() const;
  double f1() const;

  EvalCounts& operator+=(const EvalCounts& other);
};

struct CaseResult {
  std::string case_id;
  std::string method;
  EvalCounts counts;
  double runtime_ms = 0.0;
};

struct EvalReport {
  std::vector<CaseResult> cases;

  // Micro-average: counts summed over the method's cases.
  EvalCounts aggregate(std::string_view method) const;
  std::vector<std::string> methods() const;
  // case_id,method,tp,fp,fn,precision,recall,f1,runtime_ms; detail rows in
  // insertion order, then one "ALL" row per method.
  std::string to_csv(bool include_runtime = true) const;
};

// Leaves of `tree` covered by any key in `nodes`.
std::vector<NodeKey> expand_to_leaves(std::span<const NodeKey> nodes, const DimensionTree& tree);

// TP/FP/FN over the leaf expansions of both sets.
EvalCounts prf1(std::span<const NodeKey> predicted, std::span<const NodeKey> truth, const DimensionTree& tree);

struct GroundTruthOptions {
  double threshold = 0.8;
  double anomaly_floor = 1e-9;
  // Trees with at most this many leaves get an exhaustive search when the
  // greedy ranking never reaches the threshold. 0 disables it.
  std::size_t exhaustive_limit = 12;
};

struct GroundTruthResult {
  std::vector<NodeId> leaves;
  // Recovery of each selected prefix, same order as `leaves`.
  std::vector<double> cumulative;
};

// Greedy recovery-ratio labelling under exact aggregation: leaves with a
// positive individual recovery are added best-first (ties: larger summed
// |real - forecast| over fundamentals, then key text) until the joint
// recovery reaches the threshold. If it never does and the tree has at most
// options.exhaustive_limit leaves, the smallest leaf subset reaching the
// threshold is returned (ties: higher recovery). Otherwise the prefix with
// the highest joint recovery is returned. No anomaly gives an empty result.
GroundTruthResult ground_truth(const DimensionTree& tree, const MetricSchema& metrics,
                               std::span<const double> values, const ForecastPanel& forecast,
                               std::size_t monitored, const GroundTruthOptions& options = {});

// Individual recovery ratio of every leaf, by leaf position.
std::vector<double> leaf_recovery(const DimensionTree& tree, const MetricSchema& metrics,
                                  std::span<const double> values, const ForecastPanel& forecast,
                                  std::size_t monitored);

}  // namespace xmrca
