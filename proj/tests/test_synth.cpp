#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "xmrca/core/error.hpp"
#include "xmrca/core/formula.hpp"
#include "xmrca/forecast/ar.hpp"
#include "xmrca/ingest/csv.hpp"
#include "xmrca/synth/generator.hpp"

namespace xmrca {
namespace {

constexpr std::size_t kB = 0;
constexpr std::size_t kC = 1;

SynthConfig config_for(std::size_t outer, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.outer_function = outer;
  cfg.seed = seed;
  return cfg;
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

double inner(std::size_t g, double c) {
  switch (g) {
    case 0: return c;
    case 1: return std::sin(c);
    case 2: return std::exp(c);
    case 3: return c * c;
    default: return std::sqrt(c);
  }
}

double outer(std::size_t f, double a, double b) {
  switch (f) {
    case 0: return a / b;
    case 1: return a * b;
    case 2: return std::log(a) / std::log(b);
    case 3: return a * std::exp(b);
    default: return std::log(a + 1) / std::log(b + 1);
  }
}

// a = g(c), d = f(a, b) and SUM consistency of b and c at every node.
void expect_consistent(const SynthDataset& data, const MetricPanel& panel) {
  const auto& tree = data.dataset.tree;
  const auto& metrics = data.dataset.metrics;
  const std::size_t a = metrics.index_of("a");
  const std::size_t d = metrics.index_of("d");
  for (std::size_t t = 0; t < panel.num_timestamps(); ++t) {
    for (NodeId id = 0; id < tree.size(); ++id) {
      const double av = panel.value(t, id, a);
      EXPECT_LE(relative_gap(av, inner(data.inner_function, panel.value(t, id, kC))), 1e-9);
      EXPECT_LE(relative_gap(panel.value(t, id, d), outer(data.config.outer_function, av, panel.value(t, id, kB))),
                1e-9);
      const auto& children = tree.node(id).children;
      if (children.empty()) continue;
      for (std::size_t m : {kB, kC}) {
        double sum = 0.0;
        for (NodeId c : children) sum += panel.value(t, c, m);
        EXPECT_LE(relative_gap(panel.value(t, id, m), sum), 1e-9);
      }
    }
  }
}

TEST(Synth, SameSeedIsBitwiseIdentical) {
  const auto x = generate_dataset(config_for(1, 11));
  const auto y = generate_dataset(config_for(1, 11));
  EXPECT_TRUE(x.clean == y.clean);
  EXPECT_TRUE(x.full == y.full);
  EXPECT_TRUE(x.dataset.panel == y.dataset.panel);
  EXPECT_EQ(x.flagged, y.flagged);
  EXPECT_EQ(x.inner_function, y.inner_function);
  const auto& tree = x.dataset.tree;
  EXPECT_EQ(serialize_labels(x.labels, tree, x.dataset.metrics, x.dataset.panel.timestamp_labels()),
            serialize_labels(y.labels, tree, y.dataset.metrics, y.dataset.panel.timestamp_labels()));
}

TEST(Synth, DifferentSeedsDiffer) {
  EXPECT_FALSE(generate_dataset(config_for(0, 1)).clean == generate_dataset(config_for(0, 2)).clean);
}

TEST(Synth, ZeroAnomaliesGivesNoLabels) {
  auto cfg = config_for(0, 3);
  cfg.anomalies = 0;
  const auto data = generate_dataset(cfg);
  EXPECT_TRUE(data.labels.empty());
  EXPECT_TRUE(data.clean == data.full);
}

TEST(Synth, ProductOuterFunctionHoldsAtEveryNode) {
  const auto data = generate_dataset(config_for(1, 4));
  const auto& metrics = data.dataset.metrics;
  const std::size_t a = metrics.index_of("a");
  const std::size_t d = metrics.index_of("d");
  for (std::size_t t = 0; t < data.full.num_timestamps(); ++t) {
    for (NodeId id = 0; id < data.dataset.tree.size(); ++id) {
      EXPECT_LE(relative_gap(data.full.value(t, id, d), data.full.value(t, id, a) * data.full.value(t, id, kB)),
                1e-9);
    }
  }
}

TEST(Synth, FormulasAndSumsHoldBeforeAndAfterInjection) {
  for (std::size_t f = 0; f < kOuterFunctions.size(); ++f) {
    for (std::uint64_t seed : {1u, 2u}) {
      const auto data = generate_dataset(config_for(f, seed));
      SCOPED_TRACE("f=" + std::to_string(f) + " seed=" + std::to_string(seed));
      expect_consistent(data, data.clean);
      expect_consistent(data, data.full);
    }
  }
}

TEST(Synth, EveryInnerFunctionCompatibleWithTheOuterGenerates) {
  for (std::size_t f = 0; f < kOuterFunctions.size(); ++f) {
    for (std::size_t g = 0; g < kInnerFunctions.size(); ++g) {
      auto cfg = config_for(f, 9);
      cfg.inner_function = g;
      const bool log_outer = f == 2 || f == 4;
      if (log_outer && g == 1) {
        EXPECT_THROW(generate_dataset(cfg), Error);
        continue;
      }
      const auto data = generate_dataset(cfg);
      EXPECT_EQ(data.inner_function, g);
      expect_consistent(data, data.full);
    }
  }
}

TEST(Synth, LabelsReferenceLeavesAndAreNonEmpty) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = generate_dataset(config_for(seed % 5, seed));
    EXPECT_EQ(data.labels.size(), data.config.anomalies);
    for (const auto& label : data.labels) {
      ASSERT_FALSE(label.injections.empty());
      EXPECT_GE(label.timestamp, data.config.warmup);
      EXPECT_LE(label.injections.size(), data.config.max_causes);
      for (const auto& inj : label.injections) {
        EXPECT_TRUE(inj.leaf.is_leaf());
        const auto id = data.dataset.tree.find(inj.leaf);
        ASSERT_TRUE(id.has_value());
        EXPECT_TRUE(data.dataset.tree.is_leaf(*id));
        const double magnitude = std::abs(inj.factor - 1.0);
        EXPECT_GE(magnitude, data.config.magnitude_min);
        EXPECT_LE(magnitude, data.config.magnitude_max);
      }
    }
  }
}

TEST(Synth, LeafPanelMatchesFullPanelAtLeaves) {
  const auto data = generate_dataset(config_for(2, 6));
  const auto& tree = data.dataset.tree;
  for (std::size_t t = 0; t < data.full.num_timestamps(); ++t) {
    for (NodeId id = 0; id < tree.size(); ++id) {
      for (std::size_t m : {kB, kC}) {
        if (tree.is_leaf(id)) {
          EXPECT_EQ(data.dataset.panel.value(t, id, m), data.full.value(t, id, m));
        } else {
          EXPECT_FALSE(data.dataset.panel.has(t, id, m));
        }
      }
    }
  }
}

TEST(Inject, UnitFactorLeavesPanelUnchanged) {
  const auto data = generate_dataset(config_for(0, 7));
  auto labels = data.labels;
  for (auto& label : labels) {
    for (auto& inj : label.injections) inj.factor = 1.0;
  }
  const auto same = inject_anomalies(data.clean, data.dataset.tree, data.dataset.metrics, labels);
  EXPECT_TRUE(same == data.clean);
}

TEST(Inject, HalvingOneLeafDropsRootByHalfItsValue) {
  const auto data = generate_dataset(config_for(0, 8));
  const auto& tree = data.dataset.tree;
  const NodeId leaf = tree.leaf_id(3);
  const std::size_t t = 50;
  GroundTruthLabel label;
  label.timestamp = t;
  label.injections.push_back({tree.key(leaf), kC, 0.5});
  const std::vector<GroundTruthLabel> labels{label};
  const auto out = inject_anomalies(data.clean, tree, data.dataset.metrics, labels);
  const double before = data.clean.value(t, tree.root(), kC);
  const double leaf_value = data.clean.value(t, leaf, kC);
  EXPECT_NEAR(out.value(t, tree.root(), kC), before - 0.5 * leaf_value, 1e-9 * before);
  EXPECT_EQ(out.value(t, tree.root(), kB), data.clean.value(t, tree.root(), kB));
  EXPECT_EQ(out.value(t + 1, tree.root(), kC), data.clean.value(t + 1, tree.root(), kC));
}

TEST(Inject, ShiftOnConstantSeriesFiresAtRoot) {
  auto cfg = config_for(0, 9);
  cfg.noise = 0.0;
  cfg.anomalies = 0;
  const auto data = generate_dataset(cfg);
  const auto& tree = data.dataset.tree;
  const std::size_t d = data.monitored();
  GroundTruthLabel label;
  label.timestamp = 120;
  label.injections.push_back({tree.key(tree.leaf_id(0)), kB, 1.5});
  const std::vector<GroundTruthLabel> labels{label};
  const auto out = inject_anomalies(data.clean, tree, data.dataset.metrics, labels);
  const auto before = forecast_panel(data.clean, 120);
  EXPECT_FALSE(detect_3sigma(data.clean.value(120, tree.root(), d), before.value(tree.root(), d),
                             before.sd(tree.root(), d)));
  const auto fc = forecast_panel(out, 120);
  EXPECT_TRUE(detect_3sigma(out.value(120, tree.root(), d), fc.value(tree.root(), d), fc.sd(tree.root(), d)));
}

TEST(Inject, RejectsUnknownTargets) {
  const auto data = generate_dataset(config_for(0, 10));
  const auto& tree = data.dataset.tree;
  GroundTruthLabel late;
  late.timestamp = 500;
  late.injections.push_back({tree.key(tree.leaf_id(0)), kB, 1.5});
  EXPECT_THROW(inject_anomalies(data.clean, tree, data.dataset.metrics, std::vector{late}), Error);
  GroundTruthLabel inner_node;
  inner_node.timestamp = 30;
  inner_node.injections.push_back({tree.key(tree.root()), kB, 1.5});
  EXPECT_THROW(inject_anomalies(data.clean, tree, data.dataset.metrics, std::vector{inner_node}), Error);
  GroundTruthLabel derived;
  derived.timestamp = 30;
  derived.injections.push_back({tree.key(tree.leaf_id(0)), data.monitored(), 1.5});
  EXPECT_THROW(inject_anomalies(data.clean, tree, data.dataset.metrics, std::vector{derived}), Error);
}

TEST(Synth, OutOfDomainRangeIsAGenerationError) {
  auto cfg = config_for(2, 1);
  cfg.value_min = -5.0;
  cfg.value_max = -1.0;
  try {
    generate_dataset(cfg);
    FAIL() << "expected a generation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGeneration);
    EXPECT_NE(std::string(e.what()).find("log(a) / log(b)"), std::string::npos) << e.what();
  }
}

TEST(Synth, InvalidConfigsAreRejected) {
  auto short_series = config_for(0, 1);
  short_series.timestamps = 19;
  EXPECT_THROW(short_series.validate(), Error);
  auto no_magnitude = config_for(0, 1);
  no_magnitude.magnitude_min = 0.0;
  EXPECT_THROW(no_magnitude.validate(), Error);
  auto empty_dim = config_for(0, 1);
  empty_dim.dimension_sizes = {2, 0};
  EXPECT_THROW(empty_dim.validate(), Error);
  auto bad_f = config_for(5, 1);
  EXPECT_THROW(bad_f.validate(), Error);
  EXPECT_NO_THROW(config_for(4, 1).validate());
}

TEST(Synth, DefaultRangesAvoidLogDomain) {
  for (std::size_t f = 0; f < kOuterFunctions.size(); ++f) {
    const bool log_outer = f == 2 || f == 4;
    const auto r = effective_range(config_for(f, 0), 0, 1, 8);
    EXPECT_EQ(r.first, log_outer ? 2.0 : 1.0);
    EXPECT_EQ(r.second, 100.0);
  }
  // exp inputs are shrunk so the root sum stays small.
  const auto b_exp = effective_range(config_for(3, 0), 0, 0, 8);
  EXPECT_DOUBLE_EQ(b_exp.second, 100.0 / 80.0);
  const auto c_exp = effective_range(config_for(0, 0), 2, 1, 8);
  EXPECT_DOUBLE_EQ(c_exp.second, 100.0 / 80.0);
}

TEST(Synth, LabelsRoundTripThroughText) {
  const auto data = generate_dataset(config_for(3, 12));
  const auto& ts = data.dataset.panel.timestamp_labels();
  const auto text = serialize_labels(data.labels, data.dataset.tree, data.dataset.metrics, ts);
  EXPECT_EQ(text.rfind("timestamp,leaf,metric,factor\n", 0), 0u);
  const auto back = parse_labels(text, data.dataset.schema, data.dataset.metrics, ts);
  ASSERT_EQ(back.size(), data.labels.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].timestamp, data.labels[i].timestamp);
    ASSERT_EQ(back[i].injections.size(), data.labels[i].injections.size());
    for (std::size_t j = 0; j < back[i].injections.size(); ++j) {
      EXPECT_EQ(back[i].injections[j].leaf, data.labels[i].injections[j].leaf);
      EXPECT_EQ(back[i].injections[j].metric, data.labels[i].injections[j].metric);
      EXPECT_EQ(back[i].injections[j].factor, data.labels[i].injections[j].factor);
    }
  }
  EXPECT_THROW(parse_labels("timestamp,leaf\n", data.dataset.schema, data.dataset.metrics, ts), Error);
  EXPECT_THROW(parse_labels("timestamp,leaf,metric,factor\n999,dim1=v1|dim2=v1,b,1.5\n", data.dataset.schema,
                            data.dataset.metrics, ts),
               Error);
}

TEST(Synth, WrittenFilesReloadThroughIngest) {
  const auto data = generate_dataset(config_for(1, 13));
  const auto dir = std::filesystem::temp_directory_path() / "xmrca_test_synth";
  std::filesystem::remove_all(dir);
  write_synth(dir, data);
  const auto manifest = DatasetManifest::read(dir / "manifest.txt");
  const auto loaded = load_csv(manifest);
  EXPECT_EQ(loaded.tree.size(), data.dataset.tree.size());
  EXPECT_EQ(loaded.metrics.fingerprint(), data.dataset.metrics.fingerprint());
  for (std::size_t t = 0; t < data.dataset.panel.num_timestamps(); ++t) {
    for (std::size_t pos = 0; pos < loaded.tree.num_leaves(); ++pos) {
      const NodeId id = loaded.tree.leaf_id(pos);
      const NodeId orig = *data.dataset.tree.find(loaded.tree.key(id));
      for (std::size_t m : {kB, kC}) EXPECT_EQ(loaded.panel.value(t, id, m), data.dataset.panel.value(t, orig, m));
    }
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace xmrca
