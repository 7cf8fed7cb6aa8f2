#include "xmrca/synth/generator.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "xmrca/core/error.hpp"
#include "xmrca/forecast/ar.hpp"

namespace xmrca {

namespace {

constexpr std::size_t kInnerExp = 2;
constexpr std::size_t kInnerSin = 1;
constexpr std::size_t kOuterExp = 3;
constexpr double kExpInputScale = 10.0;

bool log_based(std::size_t outer) { return outer == 2 || outer == 4; }

bool compatible(std::size_t outer, std::size_t inner) { return !(log_based(outer) && inner == kInnerSin); }

std::vector<NodeKey> all_leaves(std::span<const std::size_t> sizes) {
  std::vector<NodeKey> keys;
  NodeKey key;
  key.values.assign(sizes.size(), 0);
  while (true) {
    keys.push_back(key);
    std::size_t d = sizes.size();
    while (d > 0) {
      --d;
      if (static_cast<std::size_t>(++key.values[d]) < sizes[d]) break;
      key.values[d] = 0;
      if (d == 0) return keys;
    }
    if (sizes.empty()) return keys;
  }
}

}  // namespace

std::vector<NodeKey> GroundTruthLabel::leaves() const {
  std::vector<NodeKey> out;
  for (const auto& inj : injections) {
    if (std::find(out.begin(), out.end(), inj.leaf) == out.end()) out.push_back(inj.leaf);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void SynthConfig::validate() const {
  if (timestamps < 20) throw Error(ErrorCode::kInvalidArgument, "synthetic data needs at least 20 timestamps");
  if (dimension_sizes.empty()) throw Error(ErrorCode::kInvalidArgument, "at least one dimension is required");
  for (auto s : dimension_sizes) {
    if (s == 0) throw Error(ErrorCode::kInvalidArgument, "every dimension needs at least one value");
  }
  if (outer_function >= kOuterFunctions.size()) {
    throw Error(ErrorCode::kInvalidArgument, "outer function index must lie in [0, 4]");
  }
  if (inner_function && *inner_function >= kInnerFunctions.size()) {
    throw Error(ErrorCode::kInvalidArgument, "inner function index must lie in [0, 4]");
  }
  if (!(magnitude_min > 0.0 || (magnitude_min == 0.0 && magnitude_max == 0.0)) || magnitude_max < magnitude_min ||
      magnitude_max >= 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "anomaly magnitudes must satisfy 0 < min <= max < 1");
  }
  if (min_causes < 1 || max_causes < min_causes) {
    throw Error(ErrorCode::kInvalidArgument, "causes per anomaly must satisfy 1 <= min <= max");
  }
  if (warmup >= timestamps) throw Error(ErrorCode::kInvalidArgument, "warmup must be shorter than the series");
  if (!(noise >= 0.0 && noise < 1.0)) throw Error(ErrorCode::kInvalidArgument, "noise must lie in [0, 1)");
  if (value_min && value_max && !(*value_min < *value_max)) {
    throw Error(ErrorCode::kInvalidArgument, "value range must be non-empty");
  }
}

MetricSchema synth_metric_schema(std::size_t outer, std::size_t inner) {
  return MetricSchema({"b", "c"}, {Aggregation::kSum, Aggregation::kSum},
                      {{"a", std::string(kInnerFunctions.at(inner))}, {"d", std::string(kOuterFunctions.at(outer))}});
}

std::pair<double, double> effective_range(const SynthConfig& config, std::size_t inner, std::size_t metric,
                                          std::size_t num_leaves) {
  double lo = config.value_min.value_or(log_based(config.outer_function) ? 2.0 : 1.0);
  double hi = config.value_max.value_or(100.0);
  // exp of a root-level sum near 50 amplifies the 2% leaf jitter into swings of tens of percent, which
  // hides the injected shifts. Keep the root sum of an exp input around 5.
  const bool exp_input = (metric == 1 && inner == kInnerExp) || (metric == 0 && config.outer_function == kOuterExp);
  if (exp_input) {
    lo /= kExpInputScale * static_cast<double>(num_leaves);
    hi /= kExpInputScale * static_cast<double>(num_leaves);
  }
  return {lo, hi};
}

MetricPanel inject_anomalies(const MetricPanel& full, const DimensionTree& tree, const MetricSchema& metrics,
                             std::span<const GroundTruthLabel> labels) {
  MetricPanel out = full;
  std::vector<std::size_t> touched;
  for (const auto& label : labels) {
    if (label.timestamp >= out.num_timestamps()) {
      throw Error(ErrorCode::kInvalidArgument, "label timestamp " + std::to_string(label.timestamp) +
                                                   " is outside the panel");
    }
    for (const auto& inj : label.injections) {
      const auto id = tree.find(inj.leaf);
      if (!id || !tree.is_leaf(*id)) {
        throw Error(ErrorCode::kInvalidArgument, "label references a key that is not a leaf of the tree");
      }
      if (inj.metric >= metrics.num_fundamentals()) {
        throw Error(ErrorCode::kInvalidArgument, "label references a non-fundamental metric");
      }
      out.set(label.timestamp, *id, inj.metric, out.value(label.timestamp, *id, inj.metric) * inj.factor);
    }
    touched.push_back(label.timestamp);
  }
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  for (std::size_t t : touched) {
    auto row = out.snapshot(t);
    aggregate_snapshot(tree, metrics, row);
    out.assign_snapshot(t, row);
  }
  return out;
}

SynthDataset generate_dataset(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  SynthDataset out;
  out.config = config;

  const std::size_t outer = config.outer_function;
  if (config.inner_function) {
    if (!compatible(outer, *config.inner_function)) {
      throw Error(ErrorCode::kGeneration, "inner function '" + std::string(kInnerFunctions[*config.inner_function]) +
                                              "' can leave the domain of '" + std::string(kOuterFunctions[outer]) +
                                              "'");
    }
    out.inner_function = *config.inner_function;
  } else {
    std::vector<std::size_t> choices;
    for (std::size_t i = 0; i < kInnerFunctions.size(); ++i) {
      if (compatible(outer, i)) choices.push_back(i);
    }
    out.inner_function = choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
  }
  const std::size_t inner = out.inner_function;

  std::vector<std::string> names;
  std::vector<std::vector<std::string>> values;
  for (std::size_t d = 0; d < config.dimension_sizes.size(); ++d) {
    names.push_back("dim" + std::to_string(d + 1));
    auto& v = values.emplace_back();
    for (std::size_t i = 0; i < config.dimension_sizes[d]; ++i) v.push_back("v" + std::to_string(i + 1));
  }
  auto& manifest = out.manifest;
  manifest.data = "leaves.csv";
  manifest.dims = names;
  manifest.fundamentals = {"b", "c"};
  manifest.derived = {{"a", std::string(kInnerFunctions[inner])}, {"d", std::string(kOuterFunctions[outer])}};
  manifest.aggregations = {{"b", Aggregation::kSum}, {"c", Aggregation::kSum}};
  for (std::size_t d = 0; d < names.size(); ++d) manifest.declared_values[names[d]] = values[d];
  manifest.monitored = "d";

  Dataset& ds = out.dataset;
  ds.schema = DimensionSchema(names, values);
  ds.metrics = synth_metric_schema(outer, inner);
  const auto keys = all_leaves(config.dimension_sizes);
  ds.tree = DimensionTree::build(ds.schema, keys);
  const DimensionTree& tree = ds.tree;
  const std::size_t n = tree.num_leaves();
  const std::size_t m_count = ds.metrics.size();
  const std::size_t big_t = config.timestamps;

  // Per-leaf base level with small multiplicative jitter per timestamp.
  std::vector<std::pair<double, double>> ranges = {effective_range(config, inner, 0, n),
                                                   effective_range(config, inner, 1, n)};
  std::vector<double> base(n * 2);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t m = 0; m < 2; ++m) {
      base[pos * 2 + m] = std::uniform_real_distribution<double>(ranges[m].first, ranges[m].second)(rng);
    }
  }
  MetricPanel leaves(big_t, tree.size(), m_count);
  std::uniform_real_distribution<double> jitter(1.0 - config.noise, 1.0 + config.noise);
  for (std::size_t t = 0; t < big_t; ++t) {
    for (std::size_t pos = 0; pos < n; ++pos) {
      for (std::size_t m = 0; m < 2; ++m) leaves.set(t, tree.leaf_id(pos), m, base[pos * 2 + m] * jitter(rng));
    }
  }

  const auto domain_failure = [&](const Error& e) {
    std::ostringstream msg;
    msg << "d = " << kOuterFunctions[outer] << ", a = " << kInnerFunctions[inner] << " with b in ["
        << ranges[0].first << ", " << ranges[0].second << "] and c in [" << ranges[1].first << ", "
        << ranges[1].second << "]: " << e.detail();
    return Error(ErrorCode::kGeneration, msg.str());
  };
  try {
    out.clean = aggregate_panel(leaves, tree, ds.metrics);
  } catch (const Error& e) {
    throw domain_failure(e);
  }

  // Anomalous timestamps without replacement from [warmup, T).
  std::vector<std::size_t> slots(big_t - config.warmup);
  std::iota(slots.begin(), slots.end(), config.warmup);
  std::shuffle(slots.begin(), slots.end(), rng);
  slots.resize(std::min(config.anomalies, slots.size()));
  std::sort(slots.begin(), slots.end());
  std::vector<std::size_t> positions(n);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  for (std::size_t t : slots) {
    GroundTruthLabel label;
    label.timestamp = t;
    const std::size_t hi = std::min(config.max_causes, n);
    const std::size_t lo = std::min(config.min_causes, hi);
    const std::size_t count = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    std::shuffle(positions.begin(), positions.end(), rng);
    std::vector<std::size_t> chosen(positions.begin(), positions.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t pos : chosen) {
      Injection inj;
      inj.leaf = tree.key(tree.leaf_id(pos));
      inj.metric = std::uniform_int_distribution<std::size_t>(0, 1)(rng);
      const double magnitude = std::uniform_real_distribution<double>(config.magnitude_min, config.magnitude_max)(rng);
      inj.factor = std::bernoulli_distribution(0.5)(rng) ? 1.0 + magnitude : 1.0 - magnitude;
      label.injections.push_back(std::move(inj));
    }
    out.labels.push_back(std::move(label));
  }
  try {
    out.full = inject_anomalies(out.clean, tree, ds.metrics, out.labels);
  } catch (const Error& e) {
    throw domain_failure(e);
  }

  ds.panel = MetricPanel(big_t, tree.size(), m_count);
  for (std::size_t t = 0; t < big_t; ++t) {
    for (std::size_t pos = 0; pos < n; ++pos) {
      for (std::size_t m = 0; m < 2; ++m) ds.panel.set(t, tree.leaf_id(pos), m, out.full.value(t, tree.leaf_id(pos), m));
    }
  }

  const std::size_t d_index = ds.metrics.index_of("d");
  std::vector<double> series(big_t);
  for (std::size_t t = 0; t < big_t; ++t) series[t] = out.full.value(t, tree.root(), d_index);
  for (std::size_t t = config.warmup; t < big_t; ++t) {
    const auto fc = forecast_series(std::span<const double>(series).first(t), series[t]);
    if (detect_3sigma(series[t], fc.expected, fc.sigma)) out.flagged.push_back(t);
  }
  return out;
}

std::string serialize_labels(std::span<const GroundTruthLabel> labels, const DimensionTree& tree,
                             const MetricSchema& metrics, std::span<const std::string> timestamp_labels) {
  std::ostringstream out;
  out << "timestamp,leaf,metric,factor\n";
  for (const auto& label : labels) {
    const std::string ts =
        label.timestamp < timestamp_labels.size() ? timestamp_labels[label.timestamp] : std::to_string(label.timestamp);
    for (const auto& inj : label.injections) {
      out << csv_escape(ts) << ',' << csv_escape(format_key(inj.leaf, tree.schema())) << ','
          << csv_escape(metrics.name(inj.metric)) << ',' << format_double(inj.factor) << '\n';
    }
  }
  return out.str();
}

std::vector<GroundTruthLabel> parse_labels(std::string_view text, const DimensionSchema& schema,
                                           const MetricSchema& metrics,
                                           std::span<const std::string> timestamp_labels) {
  std::vector<GroundTruthLabel> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (line_no == 1) {
      if (fields != std::vector<std::string>{"timestamp", "leaf", "metric", "factor"}) {
        throw Error(ErrorCode::kSchemaViolation, "labels header must be timestamp,leaf,metric,factor");
      }
      continue;
    }
    const auto fail = [&](const std::string& msg) {
      return Error(ErrorCode::kMalformedRow, "labels line " + std::to_string(line_no) + ": " + msg);
    };
    if (fields.size() != 4) throw fail("expected 4 fields");
    const auto ts = std::find(timestamp_labels.begin(), timestamp_labels.end(), fields[0]);
    if (ts == timestamp_labels.end()) throw fail("unknown timestamp '" + fields[0] + "'");
    const auto t = static_cast<std::size_t>(ts - timestamp_labels.begin());
    Injection inj;
    inj.leaf = parse_key(fields[1], schema);
    if (!inj.leaf.is_leaf()) throw fail("'" + fields[1] + "' is not a leaf key");
    const auto metric = metrics.find(fields[2]);
    if (!metric || !metrics.is_fundamental(*metric)) throw fail("'" + fields[2] + "' is not a fundamental metric");
    inj.metric = *metric;
    std::size_t used = 0;
    try {
      inj.factor = std::stod(fields[3], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != fields[3].size()) throw fail("bad factor '" + fields[3] + "'");
    if (out.empty() || out.back().timestamp != t) {
      auto it = std::find_if(out.begin(), out.end(), [&](const GroundTruthLabel& l) { return l.timestamp == t; });
      if (it == out.end()) {
        out.push_back({t, {}});
      } else {
        it->injections.push_back(std::move(inj));
        continue;
      }
    }
    out.back().injections.push_back(std::move(inj));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const GroundTruthLabel& a, const GroundTruthLabel& b) { return a.timestamp < b.timestamp; });
  return out;
}

void write_synth(const std::filesystem::path& dir, const SynthDataset& data) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir.string() + "': " + ec.message());
  write_csv(dir / "leaves.csv", data.dataset);
  write_text_file(dir / "labels.csv", serialize_labels(data.labels, data.dataset.tree, data.dataset.metrics,
                                                       data.dataset.panel.timestamp_labels()));
  data.manifest.write(dir / "manifest.txt");
}

}  // namespace xmrca
