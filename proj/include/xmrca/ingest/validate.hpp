#pragma once

#include <cstddef>
#include <vector>

#include "xmrca/core/panel.hpp"
#include "xmrca/core/schema.hpp"
#include "xmrca/core/tree.hpp"

namespace xmrca {

struct PanelCell {
  std::size_t timestamp = 0;
  NodeId node = 0;
  std::size_t metric = 0;

  auto operator<=>(const PanelCell&) const = default;
};

enum class ValidationScope {
  kLeafFundamentals,  // what a loaded leaf panel must hold
  kAllCells,          // every node and metric, e.g. after aggregation
};

struct ValidationReport {
  std::vector<PanelCell> missing;
  std::vector<PanelCell> non_finite;
  double coverage = 1.0;

  bool ok() const { return missing.empty() && non_finite.empty(); }
};

ValidationReport validate_panel(const MetricPanel& panel, const DimensionTree& tree, const MetricSchema& metrics,
                                ValidationScope scope = ValidationScope::kLeafFundamentals);

}  // namespace xmrca
