#include "xmrca/localize/fitness.hpp"

#include <cmath>
#include <limits>

#include "xmrca/core/error.hpp"

namespace xmrca {

namespace {

std::vector<double> build_replacement(std::span<const double> real, std::span<const double> forecast,
                                      std::span<const std::uint8_t> mask, ReplacementScope scope) {
  if (forecast.size() != real.size()) {
    throw Error(ErrorCode::kInvalidArgument, "forecast leaf table does not match the real one");
  }
  if (scope == ReplacementScope::kAllFundamentals) return {forecast.begin(), forecast.end()};
  if (mask.size() != real.size()) {
    throw Error(ErrorCode::kInvalidArgument, "masked replacement needs one mask entry per leaf fundamental");
  }
  std::vector<double> out(real.begin(), real.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask[i]) out[i] = forecast[i];
  }
  return out;
}

}  // namespace

FitnessContext::FitnessContext(const Relationship& relationship, const DimensionTree& tree,
                               std::span<const double> leaf_real, std::span<const double> leaf_forecast,
                               std::vector<std::size_t> candidates, std::size_t monitored, double observed_root,
                               double forecast_root, FitnessConfig config, std::span<const std::uint8_t> replace_mask)
    : tree_(tree),
      candidates_(std::move(candidates)),
      monitored_(monitored),
      observed_root_(observed_root),
      forecast_root_(forecast_root),
      config_(config),
      replacement_(build_replacement(leaf_real, leaf_forecast, replace_mask, config.scope)),
      propagator_(relationship, tree, leaf_real),
      root_(relationship.num_outputs()) {
  if (monitored_ >= relationship.num_outputs()) {
    throw Error(ErrorCode::kInvalidArgument, "monitored metric is not a relationship output");
  }
  if (!(config_.beta >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "beta must be >= 0");
  for (std::size_t pos : candidates_) {
    if (pos >= tree.num_leaves()) throw Error(ErrorCode::kInvalidArgument, "candidate is not a leaf position");
  }
  if (!(std::abs(observed_root_ - forecast_root_) > config_.anomaly_floor)) {
    throw Error(ErrorCode::kNoAnomaly, "monitored root value matches its forecast");
  }
  if (config_.anchor_to_observed) offset_ = observed_root_ - propagator_.baseline_root()[monitored_];
}

double FitnessContext::root_value_for(std::span<const std::size_t> leaf_positions) {
  try {
    propagator_.evaluate(leaf_positions, replacement_, root_);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kFormulaDomain) return std::numeric_limits<double>::quiet_NaN();
    throw;
  }
  return root_[monitored_] + offset_;
}

double FitnessContext::root_value(const Chromosome& s) {
  if (s.size() != candidates_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "chromosome length differs from the candidate count");
  }
  selected_.clear();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i]) selected_.push_back(candidates_[i]);
  }
  return root_value_for(selected_);
}

double FitnessContext::residual(const Chromosome& s) {
  const double root = root_value(s);
  if (!std::isfinite(root)) return std::numeric_limits<double>::infinity();
  return std::abs(root - forecast_root_) / std::abs(observed_root_ - forecast_root_);
}

double FitnessContext::penalty(const Chromosome& s) const {
  std::size_t ones = 0;
  for (auto bit : s) ones += bit ? 1 : 0;
  double norm = 1.0;
  switch (config_.normalization) {
    case PenaltyNormalization::kLeaves:
      norm = static_cast<double>(tree_.num_leaves());
      break;
    case PenaltyNormalization::kCandidates:
      norm = static_cast<double>(std::max<std::size_t>(1, candidates_.size()));
      break;
    case PenaltyNormalization::kNone:
      break;
  }
  return config_.beta * static_cast<double>(ones) / norm;
}

}  // namespace xmrca
