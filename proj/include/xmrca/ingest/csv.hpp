#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "xmrca/core/panel.hpp"
#include "xmrca/core/schema.hpp"
#include "xmrca/core/tree.hpp"

namespace xmrca {

// Key-value description of a leaf-level CSV file.
//
//   data=leaves.csv
//   timestamp_col=timestamp
//   dims=Channel,Region
//   fundamentals=views,conversions,cost
//   derived.conversion_rate=conversions / views
//   agg.views=SUM
//
// Optional keys: values.<dim>=a,b,c (declared value order), expansion=<dims
// in tree expansion order>, monitored=<derived metric>. Lines starting with
// '#' are comments. Derived metrics keep file order.
struct DatasetManifest {
  std::filesystem::path data;
  std::string timestamp_col = "timestamp";
  std::vector<std::string> dims;
  std::vector<std::string> fundamentals;
  std::vector<DerivedMetric> derived;
  std::map<std::string, Aggregation> aggregations;
  std::map<std::string, std::vector<std::string>> declared_values;
  std::vector<std::string> expansion;
  std::string monitored;

  // Relative `data` paths resolve against the manifest's directory.
  static DatasetManifest read(const std::filesystem::path& path);
  static DatasetManifest parse(std::string_view text, const std::filesystem::path& base_dir = {});
  std::string to_text() const;
  void write(const std::filesystem::path& path) const;

  MetricSchema metric_schema() const;
};

struct Dataset {
  DimensionSchema schema;
  MetricSchema metrics;
  DimensionTree tree;
  // Leaf fundamentals only; every other cell is missing.
  MetricPanel panel;
};

Dataset load_csv(const DatasetManifest& manifest);
Dataset load_csv_text(const DatasetManifest& manifest, std::string_view text);

// Leaf rows sorted by (timestamp, leaf key), values with 17 significant digits.
std::string serialize_csv(const Dataset& dataset, std::string_view timestamp_col = "timestamp");
void write_csv(const std::filesystem::path& path, const Dataset& dataset,
               std::string_view timestamp_col = "timestamp");

std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);
std::string format_double(double value);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace xmrca
