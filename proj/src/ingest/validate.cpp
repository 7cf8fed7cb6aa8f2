#include "xmrca/ingest/validate.hpp"

#include <cmath>

namespace xmrca {

ValidationReport validate_panel(const MetricPanel& panel, const DimensionTree& tree, const MetricSchema& metrics,
                                ValidationScope scope) {
  ValidationReport report;
  const bool all = scope == ValidationScope::kAllCells;
  const NodeId first = all ? 0 : tree.first_leaf();
  const std::size_t metric_count = all ? metrics.size() : metrics.num_fundamentals();
  std::size_t expected = 0;
  std::size_t present = 0;
  for (std::size_t t = 0; t < panel.num_timestamps(); ++t) {
    for (NodeId id = first; id < tree.size(); ++id) {
      for (std::size_t m = 0; m < metric_count; ++m) {
        ++expected;
        if (!panel.has(t, id, m)) {
          report.missing.push_back({t, id, m});
          continue;
        }
        ++present;
        if (!std::isfinite(panel.value(t, id, m))) report.non_finite.push_back({t, id, m});
      }
    }
  }
  report.coverage = expected == 0 ? 1.0 : static_cast<double>(present) / static_cast<double>(expected);
  return report;
}

}  // namespace xmrca
