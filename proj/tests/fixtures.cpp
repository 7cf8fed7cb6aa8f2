#include "fixtures.hpp"

#include <sstream>

namespace xmrca::testing {

const std::vector<SnapshotRow>& snapshot_rows() {
  static const std::vector<SnapshotRow> rows = {
      {"Search", "US", 51949, 57328, 14651, 25741, 219765, 249067},
      {"Search", "Norway", 3152, 2627, 783, 1228, 13311, 12528},
      {"Search", "Brazil", 3125, 2981, 341, 980, 6820, 7502},
      {"Search", "Others", 64351, 59721, 19321, 25931, 618272, 579630},
      {"Social Media", "US", 43949, 39312, 21525, 24057, 344400, 322875},
      {"Social Media", "Norway", 20453, 18327, 8731, 9068, 139696, 148427},
      {"Social Media", "Brazil", 1957, 1512, 1023, 1001, 17391, 16368},
      {"Social Media", "Others", 70384, 60413, 32253, 35912, 903084, 838578},
  };
  return rows;
}

DatasetManifest snapshot_manifest() {
  return DatasetManifest::parse(
      "data=snapshot.csv\n"
      "timestamp_col=timestamp\n"
      "dims=Channel,Region\n"
      "fundamentals=views,conversions,cost\n"
      "derived.conversion_rate=conversions / views\n"
      "derived.cost_per_conversion=cost / conversions\n"
      "agg.views=SUM\n"
      "agg.conversions=SUM\n"
      "agg.cost=SUM\n"
      "values.Channel=Search,Social Media\n"
      "values.Region=US,Norway,Brazil,Others\n"
      "monitored=conversion_rate\n");
}

namespace {

void append_rows(std::ostringstream& out, std::size_t t, bool expected) {
  for (const auto& r : snapshot_rows()) {
    out << t << ',' << r.channel << ',' << r.region << ',' << (expected ? r.views_expected : r.views) << ','
        << (expected ? r.conversions_expected : r.conversions) << ',' << (expected ? r.cost_expected : r.cost)
        << '\n';
  }
}

}  // namespace

std::string snapshot_csv() {
  std::ostringstream out;
  out << "timestamp,Channel,Region,views,conversions,cost\n";
  append_rows(out, 0, false);
  return out.str();
}

std::string snapshot_history_csv(std::size_t history) {
  std::ostringstream out;
  out << "timestamp,Channel,Region,views,conversions,cost\n";
  for (std::size_t t = 0; t < history; ++t) append_rows(out, t, true);
  append_rows(out, history, false);
  return out.str();
}

Snapshot load_snapshot(std::size_t history) {
  Snapshot s;
  s.dataset = load_csv_text(snapshot_manifest(), snapshot_history_csv(history));
  s.full = aggregate_panel(s.dataset.panel, s.dataset.tree, s.dataset.metrics);
  s.t = history;
  s.forecast = forecast_panel(s.full, s.t);
  s.values = s.full.snapshot(s.t);
  s.monitored = s.dataset.metrics.index_of("conversion_rate");
  return s;
}

NodeId leaf(const Dataset& ds, const std::string& label) {
  return *ds.tree.find(parse_key(label, ds.schema));
}

}  // namespace xmrca::testing
