#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xmrca/core/panel.hpp"
#include "xmrca/forecast/ar.hpp"
#include "xmrca/ingest/csv.hpp"

namespace xmrca::testing {

// One leaf row of the business snapshot: real value and forecast per
// fundamental (views, conversions, cost).
struct SnapshotRow {
  const char* channel;
  const char* region;
  double views, views_expected;
  double conversions, conversions_expected;
  double cost, cost_expected;
};

const std::vector<SnapshotRow>& snapshot_rows();

DatasetManifest snapshot_manifest();

// Leaf CSV at a single timestamp with the real values.
std::string snapshot_csv();

// `history` timestamps holding the forecast values, then one timestamp with
// the real values. Constant histories make every forecast equal the
// expected column.
std::string snapshot_history_csv(std::size_t history);

struct Snapshot {
  Dataset dataset;
  MetricPanel full;
  std::size_t t = 0;
  ForecastPanel forecast;
  std::vector<double> values;
  std::size_t monitored = 0;
};

// Loads snapshot_history_csv(history) and forecasts the last timestamp.
Snapshot load_snapshot(std::size_t history = 10);

NodeId leaf(const Dataset& ds, const std::string& label);

}  // namespace xmrca::testing
