#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xmrca/gat/relationship.hpp"

namespace xmrca {

struct GatConfig {
  std::size_t embedding_dim = 8;
  std::size_t heads = 8;
  std::size_t epochs = 1000;
  double learning_rate = 5e-4;
  std::size_t patience = 50;
  double validation_fraction = 0.2;
  double leaky_slope = 0.2;
  std::uint64_t seed = 0;

  // Throws kInvalidArgument.
  void validate() const;
};

// Per-feature standardisation. Features with (near) zero spread keep scale 1.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> scale;

  std::size_t size() const { return mean.size(); }
  void fit(std::span<const double> rows, std::size_t width);
  double normalize(std::size_t i, double v) const { return (v - mean[i]) / scale[i]; }
  double denormalize(std::size_t i, double v) const { return v * scale[i] + mean[i]; }
};

// Intermediate values of one subtree forward pass, kept for backprop.
struct GatForward {
  std::size_t children = 0;
  std::vector<double> projected;  // heads x (children + 1) x embed; slot `children` is the parent
  std::vector<double> score;      // heads x children, before the leaky rectifier
  std::vector<double> alpha;      // heads x children
  std::vector<double> message;    // heads x embed
  std::vector<double> z;          // heads x embed
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  std::vector<double> out;        // normalised outputs
};

// One subtree in normalised space: children features (children x inputs),
// the parent context vector, and the parent target (outputs).
struct SubtreeSample {
  std::size_t children = 0;
  std::vector<double> inputs;
  std::vector<double> parent;
  std::vector<double> target;
};

// Single-layer multi-head graph attention over a parent's children followed
// by a one-hidden-layer perceptron head.
//
// Each child contributes x_j = [fundamentals, depth] (standardised). Per head
// k the children are projected with W^k, scored against the projected parent
// context through theta^k and a leaky rectifier, softmax-normalised into
// alpha^k, and summed; an ELU gives the head embedding. Embeddings of all
// heads are concatenated and mapped to the parent's P fundamentals and Q
// derived metrics. The parent context is the mean of the children's
// standardised fundamentals plus the parent depth, so it is available at
// inference time without observing the parent.
class GatModel final : public Relationship {
 public:
  GatModel() = default;
  GatModel(GatConfig config, std::size_t fundamentals, std::size_t derived, std::uint64_t fingerprint = 0);

  const GatConfig& config() const { return config_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  std::size_t num_fundamentals() const override { return p_; }
  std::size_t num_derived() const { return q_; }
  std::size_t num_outputs() const override { return p_ + q_; }
  std::size_t num_inputs() const { return p_ + 1; }
  std::size_t hidden_width() const { return config_.heads * config_.embedding_dim; }

  // Glorot-uniform weights, zero biases, identity normalisers.
  void initialize(std::uint64_t seed);

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  // Views into parameters() by role.
  std::span<double> projection(std::size_t head);
  std::span<double> attention(std::size_t head);
  std::span<double> output_weights();
  std::span<double> output_bias();

  Normalizer& input_normalizer() { return input_norm_; }
  const Normalizer& input_normalizer() const { return input_norm_; }
  Normalizer& output_normalizer() { return output_norm_; }
  const Normalizer& output_normalizer() const { return output_norm_; }

  // Raw child fundamentals -> normalised sample inputs and parent context.
  void encode(std::span<const double> children, std::size_t child_count, std::size_t child_depth,
              std::vector<double>& inputs, std::vector<double>& parent) const;

  void forward(std::span<const double> inputs, std::size_t child_count, std::span<const double> parent,
               GatForward& cache) const;

  // Squared error of one sample; accumulates d(loss)/d(parameters) into grad.
  double loss_and_gradient(const SubtreeSample& sample, std::span<double> grad) const;
  double loss(const SubtreeSample& sample) const;

  // alpha[k * child_count + j] for every head k.
  std::vector<double> attention_coefficients(std::span<const double> children, std::size_t child_count,
                                             std::size_t child_depth) const;

  void predict_parent(std::span<const double> children, std::size_t child_count, std::size_t child_depth,
                      std::span<double> out) const override;
  void edge_weights(std::span<const double> children, std::size_t child_count, std::size_t child_depth,
                    std::span<double> weights) const override;

  bool operator==(const GatModel& other) const;

 private:
  std::size_t offset_projection(std::size_t head) const;
  std::size_t offset_attention(std::size_t head) const;
  std::size_t offset_w1() const;
  std::size_t offset_b1() const;
  std::size_t offset_w2() const;
  std::size_t offset_b2() const;

  GatConfig config_;
  std::size_t p_ = 0;
  std::size_t q_ = 0;
  std::uint64_t fingerprint_ = 0;
  std::vector<double> params_;
  Normalizer input_norm_;
  Normalizer output_norm_;
};

std::string serialize_model(const GatModel& model);
GatModel deserialize_model(std::string_view text);
void save_model(const GatModel& model, const std::string& path);
GatModel load_model(const std::string& path);

}  // namespace xmrca
