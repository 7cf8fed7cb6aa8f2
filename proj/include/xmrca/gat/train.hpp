#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xmrca/core/panel.hpp"
#include "xmrca/core/schema.hpp"
#include "xmrca/core/tree.hpp"
#include "xmrca/gat/model.hpp"

namespace xmrca {

struct EpochRecord {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double validation_mse = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_validation_mse = 0.0;
  bool stopped_early = false;

  // "epoch,train_mse,validation_mse" plus one row per epoch.
  std::string to_csv() const;
};

struct TrainResult {
  GatModel model;
  TrainingLog log;
};

// Subtree samples for every (timestamp, non-leaf node) in [begin, end),
// grouped by timestamp. Targets and inputs are normalised with the model's
// statistics.
std::vector<std::vector<SubtreeSample>> build_samples(const GatModel& model, const DimensionTree& tree,
                                                      const MetricPanel& panel, std::size_t begin,
                                                      std::size_t end);

// Fits the model's normalisers on timestamps [begin, end).
void fit_normalizers(GatModel& model, const DimensionTree& tree, const MetricPanel& panel, std::size_t begin,
                     std::size_t end);

// Trains on timestamps [0, end) of a fully aggregated panel (end 0 means all
// timestamps). The last validation_fraction of them is held out for early
// stopping; the best-validation parameters are returned. Throws
// kInsufficientHistory for fewer than 10 timestamps, kIncompletePanel when a
// needed cell is missing and kDivergence on a non-finite loss.
TrainResult train(const GatConfig& config, const DimensionTree& tree, const MetricSchema& metrics,
                  const MetricPanel& panel, std::size_t end = 0);

}  // namespace xmrca
