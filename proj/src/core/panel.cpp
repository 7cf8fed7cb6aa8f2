#include "xmrca/core/panel.hpp"

#include <cmath>
#include <limits>

#include "xmrca/core/error.hpp"

namespace xmrca {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

MetricPanel::MetricPanel(std::size_t timestamps, std::size_t nodes, std::size_t metrics)
    : timestamps_(timestamps),
      nodes_(nodes),
      metrics_(metrics),
      values_(timestamps * nodes * metrics, kNaN),
      present_(timestamps * nodes * metrics, 0) {
  labels_.reserve(timestamps);
  for (std::size_t t = 0; t < timestamps; ++t) labels_.push_back(std::to_string(t));
}

double MetricPanel::value(std::size_t t, NodeId node, std::size_t metric) const {
  const auto i = offset(t, node, metric);
  return present_[i] ? values_[i] : kNaN;
}

void MetricPanel::set(std::size_t t, NodeId node, std::size_t metric, double v) {
  const auto i = offset(t, node, metric);
  values_[i] = v;
  present_[i] = 1;
}

void MetricPanel::clear(std::size_t t, NodeId node, std::size_t metric) {
  const auto i = offset(t, node, metric);
  values_[i] = kNaN;
  present_[i] = 0;
}

std::vector<double> MetricPanel::snapshot(std::size_t t) const {
  std::vector<double> row(nodes_ * metrics_);
  const std::size_t base = t * nodes_ * metrics_;
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = present_[base + i] ? values_[base + i] : kNaN;
  return row;
}

void MetricPanel::assign_snapshot(std::size_t t, std::span<const double> values) {
  const std::size_t base = t * nodes_ * metrics_;
  for (std::size_t i = 0; i < values.size(); ++i) {
    values_[base + i] = values[i];
    present_[base + i] = std::isnan(values[i]) ? 0 : 1;
  }
}

bool MetricPanel::operator==(const MetricPanel& other) const {
  if (timestamps_ != other.timestamps_ || nodes_ != other.nodes_ || metrics_ != other.metrics_) return false;
  if (present_ != other.present_ || labels_ != other.labels_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (present_[i] && !(values_[i] == other.values_[i]) &&
        !(std::isnan(values_[i]) && std::isnan(other.values_[i]))) {
      return false;
    }
  }
  return true;
}

void aggregate_snapshot(const DimensionTree& tree, const MetricSchema& metrics, std::span<double> values,
                        const AggregateOptions& options, AggregateStats* stats) {
  const std::size_t m = metrics.size();
  const std::size_t p = metrics.num_fundamentals();
  for (std::size_t pos = 0; pos < tree.num_leaves(); ++pos) {
    const NodeId leaf = tree.leaf_id(pos);
    for (std::size_t f = 0; f < p; ++f) {
      if (std::isnan(values[leaf * m + f])) {
        if (!options.allow_missing) {
          throw Error(ErrorCode::kIncompletePanel,
                      "missing " + metrics.name(f) + " at leaf " + tree.label(leaf));
        }
        if (stats) ++stats->missing_leaf_cells;
      }
    }
  }
  // Ids decrease with depth, so walking non-leaf ids backwards is bottom-up.
  for (NodeId id = tree.first_leaf(); id-- > 0;) {
    const auto& node = tree.node(id);
    for (std::size_t f = 0; f < p; ++f) {
      double sum = 0.0;
      std::size_t count = 0;
      for (NodeId child : node.children) {
        const double v = values[child * m + f];
        if (std::isnan(v)) continue;
        sum += v;
        ++count;
      }
      if (metrics.aggregation(f) == Aggregation::kSum) {
        values[id * m + f] = sum;
      } else {
        values[id * m + f] = count > 0 ? sum / static_cast<double>(count) : kNaN;
      }
    }
  }
  for (NodeId id = 0; id < tree.size(); ++id) {
    auto row = values.subspan(id * m, m);
    bool complete = true;
    for (std::size_t f = 0; f < p; ++f) complete = complete && !std::isnan(row[f]);
    if (!complete) {
      for (std::size_t q = p; q < m; ++q) row[q] = kNaN;
      continue;
    }
    try {
      metrics.compute_derived(row);
    } catch (const Error& e) {
      throw e.with_context("at node " + tree.label(id));
    }
  }
}

MetricPanel aggregate_panel(const MetricPanel& leaf_panel, const DimensionTree& tree, const MetricSchema& metrics,
                            const AggregateOptions& options, AggregateStats* stats) {
  if (leaf_panel.num_nodes() != tree.size() || leaf_panel.num_metrics() != metrics.size()) {
    throw Error(ErrorCode::kInvalidArgument, "panel shape does not match tree and metric schema");
  }
  MetricPanel out = leaf_panel;
  for (std::size_t t = 0; t < leaf_panel.num_timestamps(); ++t) {
    auto row = leaf_panel.snapshot(t);
    try {
      aggregate_snapshot(tree, metrics, row, options, stats);
    } catch (const Error& e) {
      throw e.with_context("at timestamp " + leaf_panel.timestamp_labels()[t]);
    }
    out.assign_snapshot(t, row);
  }
  return out;
}

}  // namespace xmrca
