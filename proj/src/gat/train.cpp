#include "xmrca/gat/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "xmrca/core/error.hpp"
#include "xmrca/ingest/csv.hpp"

namespace xmrca {

namespace {

constexpr std::size_t kMinTimestamps = 10;

class Adam {
 public:
  explicit Adam(std::size_t size, double learning_rate)
      : lr_(learning_rate), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

double require(const MetricPanel& panel, std::size_t t, NodeId node, std::size_t metric) {
  if (!panel.has(t, node, metric)) {
    throw Error(ErrorCode::kIncompletePanel, "training panel misses node " + std::to_string(node) + " metric " +
                                                 std::to_string(metric) + " at timestamp " + std::to_string(t));
  }
  return panel.value(t, node, metric);
}

double mean_loss(const GatModel& model, const std::vector<std::vector<SubtreeSample>>& batches) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& batch : batches) {
    for (const auto& sample : batch) {
      total += model.loss(sample);
      count += sample.target.size();
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace

std::string TrainingLog::to_csv() const {
  std::ostringstream out;
  out << "epoch,train_mse,validation_mse\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << format_double(e.train_mse) << ',' << format_double(e.validation_mse) << '\n';
  }
  return out.str();
}

void fit_normalizers(GatModel& model, const DimensionTree& tree, const MetricPanel& panel, std::size_t begin,
                     std::size_t end) {
  const std::size_t p = model.num_fundamentals();
  const std::size_t outputs = model.num_outputs();
  std::vector<double> inputs;
  std::vector<double> targets;
  for (std::size_t t = begin; t < end; ++t) {
    for (NodeId id = 1; id < tree.size(); ++id) {
      for (std::size_t m = 0; m < p; ++m) inputs.push_back(require(panel, t, id, m));
      inputs.push_back(static_cast<double>(tree.node(id).depth));
    }
    for (NodeId id = 0; id < tree.first_leaf(); ++id) {
      for (std::size_t m = 0; m < outputs; ++m) targets.push_back(require(panel, t, id, m));
    }
  }
  model.input_normalizer().fit(inputs, p + 1);
  model.output_normalizer().fit(targets, outputs);
}

std::vector<std::vector<SubtreeSample>> build_samples(const GatModel& model, const DimensionTree& tree,
                                                      const MetricPanel& panel, std::size_t begin,
                                                      std::size_t end) {
  const std::size_t p = model.num_fundamentals();
  const std::size_t outputs = model.num_outputs();
  std::vector<std::vector<SubtreeSample>> batches;
  std::vector<double> children;
  for (std::size_t t = begin; t < end; ++t) {
    auto& batch = batches.emplace_back();
    for (NodeId id = 0; id < tree.first_leaf(); ++id) {
      const auto& node = tree.node(id);
      children.clear();
      for (NodeId child : node.children) {
        for (std::size_t m = 0; m < p; ++m) children.push_back(require(panel, t, child, m));
      }
      SubtreeSample sample;
      sample.children = node.children.size();
      model.encode(children, sample.children, node.depth + 1, sample.inputs, sample.parent);
      sample.target.resize(outputs);
      for (std::size_t m = 0; m < outputs; ++m) {
        sample.target[m] = model.output_normalizer().normalize(m, require(panel, t, id, m));
      }
      batch.push_back(std::move(sample));
    }
  }
  return batches;
}

TrainResult train(const GatConfig& config, const DimensionTree& tree, const MetricSchema& metrics,
                  const MetricPanel& panel, std::size_t end) {
  config.validate();
  if (end == 0 || end > panel.num_timestamps()) end = panel.num_timestamps();
  if (end < kMinTimestamps) {
    throw Error(ErrorCode::kInsufficientHistory, "training needs at least " + std::to_string(kMinTimestamps) +
                                                     " timestamps, got " + std::to_string(end));
  }
  if (panel.num_nodes() != tree.size() || panel.num_metrics() != metrics.size()) {
    throw Error(ErrorCode::kInvalidArgument, "panel shape does not match tree and metric schema");
  }
  const auto held_out = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(end))));
  const std::size_t split = end - std::min(held_out, end - 1);

  TrainResult result{GatModel(config, metrics.num_fundamentals(), metrics.num_derived(), metrics.fingerprint()),
                     {}};
  GatModel& model = result.model;
  model.initialize(config.seed);
  fit_normalizers(model, tree, panel, 0, split);
  const auto train_batches = build_samples(model, tree, panel, 0, split);
  const auto val_batches = build_samples(model, tree, panel, split, end);

  std::vector<std::size_t> order(train_batches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  const auto params = model.parameters();
  Adam adam(params.size(), config.learning_rate);
  std::vector<double> grad(params.size());
  std::vector<double> best(params.begin(), params.end());
  double best_val = mean_loss(model, val_batches);
  std::size_t since_best = 0;
  result.log.best_validation_mse = best_val;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_total = 0.0;
    std::size_t train_count = 0;
    for (std::size_t b : order) {
      const auto& batch = train_batches[b];
      std::fill(grad.begin(), grad.end(), 0.0);
      std::size_t cells = 0;
      for (const auto& sample : batch) {
        train_total += model.loss_and_gradient(sample, grad);
        cells += sample.target.size();
      }
      train_count += cells;
      const double inv = 1.0 / static_cast<double>(cells);
      for (double& g : grad) g *= inv;
      if (!std::isfinite(train_total)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << " (learning rate " << config.learning_rate << ")";
        throw Error(ErrorCode::kDivergence, msg.str());
      }
      adam.step(params, grad);
    }
    const double val = mean_loss(model, val_batches);
    if (!std::isfinite(val)) {
      std::ostringstream msg;
      msg << "non-finite validation loss at epoch " << epoch << " (learning rate " << config.learning_rate << ")";
      throw Error(ErrorCode::kDivergence, msg.str());
    }
    result.log.epochs.push_back({epoch, train_total / static_cast<double>(train_count), val});
    if (val < best_val) {
      best_val = val;
      best.assign(params.begin(), params.end());
      result.log.best_epoch = epoch;
      result.log.best_validation_mse = val;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.log.stopped_early = true;
      break;
    }
  }
  std::copy(best.begin(), best.end(), params.begin());
  return result;
}

}  // namespace xmrca
