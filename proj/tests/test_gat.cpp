#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "xmrca/core/error.hpp"
#include "xmrca/gat/model.hpp"
#include "xmrca/gat/relationship.hpp"
#include "xmrca/gat/train.hpp"
#include "xmrca/synth/generator.hpp"

namespace xmrca {
namespace {

GatConfig small_config(std::size_t embed = 3, std::size_t heads = 2) {
  GatConfig c;
  c.embedding_dim = embed;
  c.heads = heads;
  return c;
}

GatModel random_model(std::uint64_t seed, std::size_t p = 2, std::size_t q = 1, std::size_t embed = 3,
                      std::size_t heads = 2) {
  GatModel m(small_config(embed, heads), p, q);
  m.initialize(seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  // Non-zero biases and non-trivial normalisers so every code path is exercised.
  for (double& b : m.output_bias()) b = u(rng);
  for (std::size_t i = 0; i < m.num_inputs(); ++i) {
    m.input_normalizer().mean[i] = u(rng) * 10.0;
    m.input_normalizer().scale[i] = 1.0 + std::abs(u(rng)) * 5.0;
  }
  for (std::size_t i = 0; i < m.num_outputs(); ++i) {
    m.output_normalizer().mean[i] = u(rng) * 10.0;
    m.output_normalizer().scale[i] = 1.0 + std::abs(u(rng)) * 5.0;
  }
  return m;
}

std::vector<double> random_rows(std::mt19937_64& rng, std::size_t rows, std::size_t width, double lo = 1.0,
                                double hi = 50.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out(rows * width);
  for (double& v : out) v = u(rng);
  return out;
}

// ---- attention ----

TEST(Attention, IdenticalChildrenSplitEvenly) {
  const auto m = random_model(1);
  const std::vector<double> children = {3.0, 4.0, 3.0, 4.0};
  const auto alpha = m.attention_coefficients(children, 2, 1);
  ASSERT_EQ(alpha.size(), 4u);
  for (double a : alpha) EXPECT_NEAR(a, 0.5, 1e-15);
}

TEST(Attention, SingleChildGetsEverything) {
  const auto m = random_model(2);
  const std::vector<double> children = {3.0, 4.0};
  for (double a : m.attention_coefficients(children, 1, 2)) EXPECT_EQ(a, 1.0);
}

TEST(Attention, MatchesSoftmaxOfRawScores) {
  std::mt19937_64 rng(3);
  auto m = random_model(3);
  const auto children = random_rows(rng, 3, 2);
  std::vector<double> inputs;
  std::vector<double> parent;
  m.encode(children, 3, 1, inputs, parent);
  const std::size_t e = m.config().embedding_dim;
  const std::size_t f_in = m.num_inputs();
  const auto alpha = m.attention_coefficients(children, 3, 1);
  for (std::size_t k = 0; k < m.config().heads; ++k) {
    const auto w = m.projection(k);
    const auto theta = m.attention(k);
    auto project = [&](const double* x) {
      std::vector<double> u(e, 0.0);
      for (std::size_t r = 0; r < e; ++r) {
        for (std::size_t f = 0; f < f_in; ++f) u[r] += w[r * f_in + f] * x[f];
      }
      return u;
    };
    const auto up = project(parent.data());
    std::vector<double> expo(3);
    for (std::size_t j = 0; j < 3; ++j) {
      const auto uj = project(inputs.data() + j * f_in);
      double s = 0.0;
      for (std::size_t r = 0; r < e; ++r) s += theta[r] * up[r] + theta[e + r] * uj[r];
      expo[j] = std::exp(s > 0 ? s : 0.2 * s);
    }
    const double total = expo[0] + expo[1] + expo[2];
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(alpha[k * 3 + j], expo[j] / total, 1e-10);
  }
}

TEST(AttentionProperty, RowsSumToOne) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_model(100 + trial, 2, 1, 1 + trial % 4, 1 + trial % 3);
    const std::size_t c = 1 + trial % 6;
    const auto children = random_rows(rng, c, 2, -100.0, 100.0);
    const auto alpha = m.attention_coefficients(children, c, 1 + trial % 3);
    for (std::size_t k = 0; k < m.config().heads; ++k) {
      double total = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        EXPECT_GE(alpha[k * c + j], 0.0);
        total += alpha[k * c + j];
      }
      EXPECT_NEAR(total, 1.0, 1e-10);
    }
  }
}

// ---- forward ----

TEST(Forward, ZeroOutputHeadYieldsOutputMean) {
  auto m = random_model(5);
  std::fill(m.output_weights().begin(), m.output_weights().end(), 0.0);
  std::fill(m.output_bias().begin(), m.output_bias().end(), 0.0);
  std::mt19937_64 rng(5);
  const auto children = random_rows(rng, 4, 2);
  std::vector<double> out(m.num_outputs());
  m.predict_parent(children, 4, 2, out);
  for (std::size_t o = 0; o < out.size(); ++o) EXPECT_EQ(out[o], m.output_normalizer().mean[o]);
}

TEST(ForwardProperty, ChildPermutationInvariance) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_model(200 + trial);
    const std::size_t c = 2 + trial % 5;
    auto children = random_rows(rng, c, 2);
    std::vector<double> before(m.num_outputs());
    m.predict_parent(children, c, 1, before);
    std::vector<std::size_t> perm(c);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> shuffled(children.size());
    for (std::size_t j = 0; j < c; ++j) std::copy_n(&children[perm[j] * 2], 2, &shuffled[j * 2]);
    std::vector<double> after(m.num_outputs());
    m.predict_parent(shuffled, c, 1, after);
    for (std::size_t o = 0; o < before.size(); ++o) EXPECT_NEAR(after[o], before[o], 1e-10);
  }
}

TEST(NormalizerProperty, RoundTrip) {
  std::mt19937_64 rng(7);
  const auto rows = random_rows(rng, 50, 4, -1e5, 1e5);
  Normalizer n;
  n.fit(rows, 4);
  for (std::size_t r = 0; r < 50; ++r) {
    for (std::size_t i = 0; i < 4; ++i) {
      const double v = rows[r * 4 + i];
      EXPECT_NEAR(n.denormalize(i, n.normalize(i, v)), v, 1e-12 * std::max(1.0, std::abs(v)));
    }
  }
  for (double s : n.scale) EXPECT_GT(s, 0.0);
}

TEST(Normalizer, ConstantColumnKeepsUnitScale) {
  const std::vector<double> rows = {5.0, 5.0, 5.0};
  Normalizer n;
  n.fit(rows, 1);
  EXPECT_EQ(n.mean[0], 5.0);
  EXPECT_EQ(n.scale[0], 1.0);
}

// ---- gradient ----

TEST(GradientProperty, MatchesCentralDifferences) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-5;
  std::size_t checked = 0;
  for (int trial = 0; trial < 6; ++trial) {
    auto m = random_model(300 + trial, 2, 1, 2 + trial % 2, 1 + trial % 3);
    // Larger output-head weights keep every parameter's gradient well above rounding.
    for (double& w : m.output_weights()) w *= 3.0;
    SubtreeSample s;
    s.children = 2 + trial % 3;
    const auto children = random_rows(rng, s.children, 2);
    m.encode(children, s.children, 1 + trial % 2, s.inputs, s.parent);
    s.target.resize(m.num_outputs());
    for (double& t : s.target) t = u(rng);
    std::vector<double> grad(m.parameters().size(), 0.0);
    m.loss_and_gradient(s, grad);
    double largest = 0.0;
    for (double g : grad) largest = std::max(largest, std::abs(g));
    auto params = m.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double keep = params[i];
      params[i] = keep + h;
      const double up = m.loss(s);
      params[i] = keep - h;
      const double down = m.loss(s);
      params[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      // Entries far below the largest gradient sit at the finite-difference noise floor, so the
      // relative error is measured against max(|g|, 1e-3 * max|grad|).
      const double scale = std::max({std::abs(numeric), std::abs(grad[i]), 1e-3 * largest});
      EXPECT_NEAR(grad[i], numeric, 1e-4 * scale)
          << "trial " << trial << " parameter " << i;
      ++checked;
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(Gradient, AccumulatesAcrossSamples) {
  const auto m = random_model(9);
  std::mt19937_64 rng(9);
  SubtreeSample s;
  s.children = 3;
  m.encode(random_rows(rng, 3, 2), 3, 1, s.inputs, s.parent);
  s.target = {0.1, -0.2, 0.3};
  std::vector<double> once(m.parameters().size(), 0.0);
  std::vector<double> twice(m.parameters().size(), 0.0);
  m.loss_and_gradient(s, once);
  m.loss_and_gradient(s, twice);
  m.loss_and_gradient(s, twice);
  double largest = 0.0;
  for (double g : once) largest = std::max(largest, std::abs(g));
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(twice[i], 2.0 * once[i], 1e-12 * largest);
}

// ---- propagation ----

DimensionTree grid_tree(std::size_t a, std::size_t b) {
  std::vector<std::string> va, vb;
  for (std::size_t i = 0; i < a; ++i) va.push_back("a" + std::to_string(i));
  for (std::size_t i = 0; i < b; ++i) vb.push_back("b" + std::to_string(i));
  const DimensionSchema schema({"A", "B"}, {va, vb});
  std::vector<NodeKey> keys;
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < b; ++j) keys.push_back({{static_cast<int>(i), static_cast<int>(j)}});
  }
  return DimensionTree::build(schema, keys);
}

TEST(Propagate, DepthOneEqualsOneForwardCall) {
  const DimensionSchema schema({"A"}, {{"x", "y", "z"}});
  const auto tree = DimensionTree::build(schema, std::vector<NodeKey>{{{0}}, {{1}}, {{2}}});
  const auto m = random_model(10);
  std::mt19937_64 rng(10);
  const auto leaves = random_rows(rng, 3, 2);
  const auto pred = propagate_tree(m, tree, leaves);
  std::vector<double> direct(m.num_outputs());
  m.predict_parent(leaves, 3, 1, direct);
  for (std::size_t o = 0; o < direct.size(); ++o) EXPECT_EQ(pred.row(tree.root())[o], direct[o]);
}

TEST(Propagate, ExactRelationshipMatchesAggregation) {
  const auto s = testing::load_snapshot(0);
  const auto& ds = s.dataset;
  const ExactRelationship exact(ds.metrics);
  const std::size_t p = ds.metrics.num_fundamentals();
  std::vector<double> leaves(ds.tree.num_leaves() * p);
  for (std::size_t pos = 0; pos < ds.tree.num_leaves(); ++pos) {
    for (std::size_t f = 0; f < p; ++f) leaves[pos * p + f] = ds.panel.value(0, ds.tree.leaf_id(pos), f);
  }
  const auto pred = propagate_tree(exact, ds.tree, leaves);
  for (NodeId id = 0; id < ds.tree.first_leaf(); ++id) {
    for (std::size_t m = 0; m < ds.metrics.size(); ++m) EXPECT_EQ(pred.row(id)[m], s.full.value(0, id, m));
  }
}

TEST(PropagateProperty, LeafPermutationWithinParentsIsInvariant) {
  const auto tree = grid_tree(3, 4);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = random_model(400 + trial);
    auto leaves = random_rows(rng, tree.num_leaves(), 2);
    const auto before = propagate_tree(m, tree, leaves);
    // Shuffle leaf rows inside each depth-1 block of 4 siblings.
    for (std::size_t block = 0; block < 3; ++block) {
      std::vector<std::size_t> perm = {0, 1, 2, 3};
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<double> copy(leaves.begin() + block * 8, leaves.begin() + block * 8 + 8);
      for (std::size_t j = 0; j < 4; ++j) std::copy_n(&copy[perm[j] * 2], 2, &leaves[block * 8 + j * 2]);
    }
    const auto after = propagate_tree(m, tree, leaves);
    for (std::size_t o = 0; o < m.num_outputs(); ++o) {
      EXPECT_NEAR(after.row(tree.root())[o], before.row(tree.root())[o], 1e-10);
    }
  }
}

TEST(PropagatorProperty, IncrementalMatchesFullPropagation) {
  const auto tree = grid_tree(3, 4);
  std::mt19937_64 rng(12);
  const auto m = random_model(12);
  const auto leaves = random_rows(rng, tree.num_leaves(), 2);
  const auto replacement = random_rows(rng, tree.num_leaves(), 2);
  TreePropagator propagator(m, tree, leaves);
  std::bernoulli_distribution pick(0.3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> positions;
    auto mixed = leaves;
    for (std::size_t pos = 0; pos < tree.num_leaves(); ++pos) {
      if (!pick(rng)) continue;
      positions.push_back(pos);
      std::copy_n(&replacement[pos * 2], 2, &mixed[pos * 2]);
    }
    std::vector<double> root(m.num_outputs());
    propagator.evaluate(positions, replacement, root);
    const auto full = propagate_tree(m, tree, mixed);
    for (std::size_t o = 0; o < root.size(); ++o) EXPECT_EQ(root[o], full.row(tree.root())[o]);
  }
  // The baseline is restored after every evaluation.
  std::vector<double> root(m.num_outputs());
  propagator.evaluate({}, replacement, root);
  for (std::size_t o = 0; o < root.size(); ++o) EXPECT_EQ(root[o], propagator.baseline_root()[o]);
}

// ---- importance ----

class FixedWeights final : public Relationship {
 public:
  explicit FixedWeights(std::vector<double> w) : weights_(std::move(w)) {}
  std::size_t num_fundamentals() const override { return 1; }
  std::size_t num_outputs() const override { return 1; }
  void predict_parent(std::span<const double> children, std::size_t count, std::size_t,
                      std::span<double> out) const override {
    out[0] = std::accumulate(children.begin(), children.begin() + static_cast<std::ptrdiff_t>(count), 0.0);
  }
  void edge_weights(std::span<const double>, std::size_t count, std::size_t, std::span<double> w) const override {
    std::copy_n(weights_.begin(), count, w.begin());
  }

 private:
  std::vector<double> weights_;
};

TEST(LeafImportance, SingleEdgePath) {
  const DimensionSchema schema({"A"}, {{"x", "y", "z"}});
  const auto tree = DimensionTree::build(schema, std::vector<NodeKey>{{{0}}, {{1}}, {{2}}});
  const FixedWeights rel({0.5, 0.3, 0.2});
  const std::vector<double> leaves = {1.0, 2.0, 3.0};
  const auto imp = leaf_importance(rel, tree, leaves);
  EXPECT_NEAR(imp[0], 0.5, 1e-15);
  EXPECT_NEAR(imp[1], 0.3, 1e-15);
  EXPECT_NEAR(imp[2], 0.2, 1e-15);
}

TEST(LeafImportance, UniformProductsOnTwoByFour) {
  const auto s = testing::load_snapshot(0);
  const ExactRelationship exact(s.dataset.metrics);
  std::vector<double> leaves(8 * 3, 1.0);
  for (double v : leaf_importance(exact, s.dataset.tree, leaves)) EXPECT_NEAR(v, 0.125, 1e-15);
}

TEST(LeafImportanceProperty, PathProductsOfHeadMeans) {
  const auto tree = grid_tree(3, 4);
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_model(500 + trial);
    const auto leaves = random_rows(rng, tree.num_leaves(), 2);
    const auto imp = leaf_importance(m, tree, leaves);
    const auto pred = propagate_tree(m, tree, leaves);
    auto head_mean = [&](NodeId parent) {
      const auto& kids = tree.node(parent).children;
      std::vector<double> rows;
      for (NodeId c : kids) {
        for (std::size_t f = 0; f < 2; ++f) rows.push_back(pred.row(c)[f]);
      }
      const auto alpha = m.attention_coefficients(rows, kids.size(), tree.node(parent).depth + 1);
      std::vector<double> mean(kids.size(), 0.0);
      for (std::size_t k = 0; k < m.config().heads; ++k) {
        for (std::size_t j = 0; j < kids.size(); ++j) mean[j] += alpha[k * kids.size() + j] / m.config().heads;
      }
      return mean;
    };
    const auto top = head_mean(tree.root());
    std::vector<double> expected;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto inner = head_mean(tree.node(tree.root()).children[i]);
      for (double w : inner) expected.push_back(top[i] * w);
    }
    const double total = std::accumulate(expected.begin(), expected.end(), 0.0);
    EXPECT_NEAR(std::accumulate(imp.begin(), imp.end(), 0.0), 1.0, 1e-12);
    for (std::size_t pos = 0; pos < imp.size(); ++pos) EXPECT_NEAR(imp[pos], expected[pos] / total, 1e-10);
  }
}

// ---- serialization ----

TEST(Serialize, RoundTripPreservesPredictionsBitwise) {
  auto m = random_model(14);
  const auto text = serialize_model(m);
  const auto back = deserialize_model(text);
  EXPECT_TRUE(back == m);
  EXPECT_EQ(serialize_model(back), text);
  std::mt19937_64 rng(14);
  for (int i = 0; i < 20; ++i) {
    const auto children = random_rows(rng, 4, 2);
    std::vector<double> a(m.num_outputs()), b(m.num_outputs());
    m.predict_parent(children, 4, 2, a);
    back.predict_parent(children, 4, 2, b);
    EXPECT_EQ(a, b);
  }
}

TEST(Serialize, RejectsCorruptText) {
  EXPECT_THROW(deserialize_model("not a model"), Error);
  auto text = serialize_model(random_model(15));
  text.resize(text.size() / 2);
  EXPECT_THROW(deserialize_model(text), Error);
}

// ---- training ----

TEST(Train, ConstantPanelConverges) {
  const auto ds = load_csv_text(testing::snapshot_manifest(), testing::snapshot_history_csv(14));
  auto full = aggregate_panel(ds.panel, ds.tree, ds.metrics);
  // Drop the final (different) timestamp so every training value is constant.
  MetricPanel constant(14, full.num_nodes(), full.num_metrics());
  for (std::size_t t = 0; t < 14; ++t) constant.assign_snapshot(t, full.snapshot(t));
  const auto result = train(GatConfig{}, ds.tree, ds.metrics, constant);
  ASSERT_GT(result.log.best_epoch, 0u);
  EXPECT_LT(result.log.epochs[result.log.best_epoch - 1].train_mse, 1e-8);
  EXPECT_LT(result.log.best_validation_mse, 1e-8);
}

SynthDataset synth_for_training() {
  SynthConfig c;
  c.outer_function = 0;
  c.inner_function = 0;
  c.seed = 5;
  return generate_dataset(c);
}

TEST(Train, DeterministicForFixedSeed) {
  const auto data = synth_for_training();
  GatConfig config = small_config(4, 2);
  config.epochs = 15;
  config.seed = 9;
  const auto a = train(config, data.dataset.tree, data.dataset.metrics, data.clean);
  const auto b = train(config, data.dataset.tree, data.dataset.metrics, data.clean);
  EXPECT_EQ(a.log.to_csv(), b.log.to_csv());
  EXPECT_TRUE(a.model == b.model);
}

TEST(Train, BeatsTheMeanPredictor) {
  const auto data = synth_for_training();
  GatConfig config;
  config.epochs = 150;
  const auto result = train(config, data.dataset.tree, data.dataset.metrics, data.clean);
  // Mean predictor in normalised space outputs 0; its MSE is the mean squared target.
  const std::size_t split = 160;
  const auto val = build_samples(result.model, data.dataset.tree, data.clean, split, 200);
  double baseline = 0.0;
  std::size_t cells = 0;
  for (const auto& batch : val) {
    for (const auto& s : batch) {
      for (double t : s.target) baseline += t * t;
      cells += s.target.size();
    }
  }
  baseline /= static_cast<double>(cells);
  EXPECT_LT(result.log.best_validation_mse, baseline);
}

class TrainedOnSynth : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new SynthDataset(synth_for_training());
    GatConfig config;
    config.epochs = 300;
    result_ = new TrainResult(train(config, data_->dataset.tree, data_->dataset.metrics, data_->clean, 160));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete result_;
  }
  static SynthDataset* data_;
  static TrainResult* result_;
};
SynthDataset* TrainedOnSynth::data_ = nullptr;
TrainResult* TrainedOnSynth::result_ = nullptr;

TEST_F(TrainedOnSynth, SubtreeCountPredictionWithinFivePercent) {
  const auto& tree = data_->dataset.tree;
  const auto& m = result_->model;
  double worst = 0.0;
  for (std::size_t t = 160; t < 200; ++t) {
    for (NodeId parent : tree.node(tree.root()).children) {
      std::vector<double> rows;
      for (NodeId c : tree.node(parent).children) {
        for (std::size_t f = 0; f < 2; ++f) rows.push_back(data_->clean.value(t, c, f));
      }
      std::vector<double> out(m.num_outputs());
      m.predict_parent(rows, tree.node(parent).children.size(), tree.node(parent).depth + 1, out);
      const double truth = data_->clean.value(t, parent, 0);
      worst = std::max(worst, std::abs(out[0] - truth) / truth);
    }
  }
  EXPECT_LT(worst, 0.05);
}

TEST_F(TrainedOnSynth, RootRatioWithinTenPercentOnHeldOut) {
  const auto& tree = data_->dataset.tree;
  const std::size_t d = data_->monitored();
  double worst = 0.0;
  for (std::size_t t = 160; t < 200; ++t) {
    std::vector<double> leaves;
    for (std::size_t pos = 0; pos < tree.num_leaves(); ++pos) {
      for (std::size_t f = 0; f < 2; ++f) leaves.push_back(data_->clean.value(t, tree.leaf_id(pos), f));
    }
    const auto pred = propagate_tree(result_->model, tree, leaves);
    const double truth = data_->clean.value(t, tree.root(), d);
    worst = std::max(worst, std::abs(pred.row(tree.root())[d] - truth) / std::abs(truth));
  }
  EXPECT_LT(worst, 0.10);
}

TEST(Train, TooFewTimestamps) {
  const auto ds = load_csv_text(testing::snapshot_manifest(), testing::snapshot_history_csv(5));
  const auto full = aggregate_panel(ds.panel, ds.tree, ds.metrics);
  try {
    train(small_config(), ds.tree, ds.metrics, full);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientHistory);
  }
}

TEST(Train, DivergenceIsReported) {
  const auto data = synth_for_training();
  GatConfig config = small_config();
  config.learning_rate = 1e300;
  config.epochs = 50;
  try {
    train(config, data.dataset.tree, data.dataset.metrics, data.clean);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDivergence);
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(GatConfig, Validation) {
  GatConfig c;
  c.heads = 0;
  EXPECT_THROW(c.validate(), Error);
  c = GatConfig{};
  c.validation_fraction = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = GatConfig{};
  c.embedding_dim = 0;
  EXPECT_THROW(c.validate(), Error);
}

}  // namespace
}  // namespace xmrca
