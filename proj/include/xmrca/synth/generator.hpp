#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmrca/core/panel.hpp"
#include "xmrca/core/schema.hpp"
#include "xmrca/core/tree.hpp"
#include "xmrca/ingest/csv.hpp"

namespace xmrca {

// d = f(a, b) candidates, indexed 0..4.
inline constexpr std::array<std::string_view, 5> kOuterFunctions = {
    "a / b", "a * b", "log(a) / log(b)", "a * exp(b)", "log(a + 1) / log(b + 1)"};
// a = g(c) candidates, indexed 0..4.
inline constexpr std::array<std::string_view, 5> kInnerFunctions = {"c", "sin(c)", "exp(c)", "c^2", "sqrt(c)"};

struct SynthConfig {
  std::vector<std::size_t> dimension_sizes = {2, 4};
  std::size_t timestamps = 200;
  std::size_t outer_function = 0;
  // Drawn from the seed among choices valid for the outer function if unset.
  std::optional<std::size_t> inner_function;
  // Number of anomalous timestamps; none are placed before `warmup`.
  std::size_t anomalies = 20;
  std::size_t warmup = 20;
  std::size_t min_causes = 1;
  std::size_t max_causes = 3;
  double magnitude_min = 0.3;
  double magnitude_max = 0.7;
  // Leaf base levels are drawn from [value_min, value_max]; defaults depend
  // on the outer function (see effective_range).
  std::optional<double> value_min;
  std::optional<double> value_max;
  // Per-timestamp multiplicative jitter around each leaf's base level.
  double noise = 0.02;
  std::uint64_t seed = 0;

  // Throws kInvalidArgument.
  void validate() const;
};

struct Injection {
  NodeKey leaf;
  std::size_t metric = 0;  // fundamental index
  double factor = 1.0;
};

struct GroundTruthLabel {
  std::size_t timestamp = 0;
  std::vector<Injection> injections;

  std::vector<NodeKey> leaves() const;
};

struct SynthDataset {
  SynthConfig config;
  std::size_t inner_function = 0;
  DatasetManifest manifest;
  // Leaf fundamentals after injection; loadable through ingest.
  Dataset dataset;
  // Every node and metric, before and after injection.
  MetricPanel clean;
  MetricPanel full;
  std::vector<GroundTruthLabel> labels;
  // Timestamps where the root monitored metric trips the 3-sigma rule.
  std::vector<std::size_t> flagged;

  std::size_t monitored() const { return dataset.metrics.index_of("d"); }
};

// Metric schema b, c (SUM), a = g(c), d = f(a, b).
MetricSchema synth_metric_schema(std::size_t outer, std::size_t inner);

// Draw range for fundamental `metric` (0 = b, 1 = c), before any override.
std::pair<double, double> effective_range(const SynthConfig& config, std::size_t inner, std::size_t metric,
                                          std::size_t num_leaves);

// Throws kGeneration when the configuration drives a formula outside its
// domain.
SynthDataset generate_dataset(const SynthConfig& config);

// Multiplies the labelled leaf cells of an aggregated panel and recomputes
// ancestors and derived metrics at the touched timestamps. Throws
// kInvalidArgument for unknown leaves, metrics or timestamps.
MetricPanel inject_anomalies(const MetricPanel& full, const DimensionTree& tree, const MetricSchema& metrics,
                             std::span<const GroundTruthLabel> labels);

// Labels CSV: timestamp,leaf,metric,factor with one row per injection.
std::string serialize_labels(std::span<const GroundTruthLabel> labels, const DimensionTree& tree,
                             const MetricSchema& metrics, std::span<const std::string> timestamp_labels);
std::vector<GroundTruthLabel> parse_labels(std::string_view text, const DimensionSchema& schema,
                                           const MetricSchema& metrics,
                                           std::span<const std::string> timestamp_labels);

// Writes leaves.csv, labels.csv and manifest.txt under `dir`.
void write_synth(const std::filesystem::path& dir, const SynthDataset& data);

}  // namespace xmrca
