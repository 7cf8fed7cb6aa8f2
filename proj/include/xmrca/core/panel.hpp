#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xmrca/core/schema.hpp"
#include "xmrca/core/tree.hpp"

namespace xmrca {

// Dense (timestamp, node, metric) cube. Node indices are DimensionTree ids;
// metric indices follow MetricSchema. Cells carry a presence bit so a
// missing value is distinguishable from a stored NaN.
class MetricPanel {
 public:
  MetricPanel() = default;
  MetricPanel(std::size_t timestamps, std::size_t nodes, std::size_t metrics);

  std::size_t num_timestamps() const { return timestamps_; }
  std::size_t num_nodes() const { return nodes_; }
  std::size_t num_metrics() const { return metrics_; }

  bool has(std::size_t t, NodeId node, std::size_t metric) const { return present_[offset(t, node, metric)] != 0; }
  // NaN for missing cells.
  double value(std::size_t t, NodeId node, std::size_t metric) const;
  void set(std::size_t t, NodeId node, std::size_t metric, double v);
  void clear(std::size_t t, NodeId node, std::size_t metric);

  // Node-major row of all metrics at one timestamp; missing cells are NaN.
  std::vector<double> snapshot(std::size_t t) const;
  // Stores every finite-or-NaN cell; NaN entries are recorded as missing.
  void assign_snapshot(std::size_t t, std::span<const double> values);

  std::vector<std::string>& timestamp_labels() { return labels_; }
  const std::vector<std::string>& timestamp_labels() const { return labels_; }

  bool operator==(const MetricPanel& other) const;

 private:
  std::size_t offset(std::size_t t, NodeId node, std::size_t metric) const {
    return (t * nodes_ + node) * metrics_ + metric;
  }

  std::size_t timestamps_ = 0;
  std::size_t nodes_ = 0;
  std::size_t metrics_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> present_;
  std::vector<std::string> labels_;
};

struct AggregateOptions {
  // Missing leaf fundamentals count as 0 under SUM and are skipped under
  // MEAN instead of raising kIncompletePanel.
  bool allow_missing = false;
};

struct AggregateStats {
  std::size_t missing_leaf_cells = 0;
};

// Exact aggregation of one timestamp. `values` is a node-major row
// (tree.size() x metrics.size()) holding leaf fundamentals; non-leaf
// fundamentals and every node's derived metrics are overwritten.
void aggregate_snapshot(const DimensionTree& tree, const MetricSchema& metrics, std::span<double> values,
                        const AggregateOptions& options = {}, AggregateStats* stats = nullptr);

// Applies aggregate_snapshot at every timestamp. Formula errors are rethrown
// with node and timestamp context.
MetricPanel aggregate_panel(const MetricPanel& leaf_panel, const DimensionTree& tree, const MetricSchema& metrics,
                            const AggregateOptions& options = {}, AggregateStats* stats = nullptr);

}  // namespace xmrca
