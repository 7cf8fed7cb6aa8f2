#include "xmrca/gat/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "xmrca/core/error.hpp"

namespace xmrca {

namespace {

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

}  // namespace

void GatConfig::validate() const {
  if (heads < 1) throw Error(ErrorCode::kInvalidArgument, "attention heads must be >= 1");
  if (embedding_dim < 1) throw Error(ErrorCode::kInvalidArgument, "embedding dimension must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "validation fraction must lie in (0, 1)");
  }
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
  if (leaky_slope < 0.0) throw Error(ErrorCode::kInvalidArgument, "leaky slope must be non-negative");
}

void Normalizer::fit(std::span<const double> rows, std::size_t width) {
  mean.assign(width, 0.0);
  scale.assign(width, 1.0);
  const std::size_t n = width == 0 ? 0 : rows.size() / width;
  if (n == 0) return;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < width; ++i) mean[i] += rows[r * width + i];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> var(width, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < width; ++i) {
      const double d = rows[r * width + i] - mean[i];
      var[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < width; ++i) {
    const double sd = std::sqrt(var[i] / static_cast<double>(n));
    scale[i] = sd > 1e-12 * std::max(1.0, std::abs(mean[i])) ? sd : 1.0;
  }
}

GatModel::GatModel(GatConfig config, std::size_t fundamentals, std::size_t derived, std::uint64_t fingerprint)
    : config_(config), p_(fundamentals), q_(derived), fingerprint_(fingerprint) {
  config_.validate();
  if (p_ == 0) throw Error(ErrorCode::kInvalidArgument, "model needs at least one fundamental metric");
  params_.assign(offset_b2() + num_outputs(), 0.0);
  input_norm_.mean.assign(num_inputs(), 0.0);
  input_norm_.scale.assign(num_inputs(), 1.0);
  output_norm_.mean.assign(num_outputs(), 0.0);
  output_norm_.scale.assign(num_outputs(), 1.0);
}

std::size_t GatModel::offset_projection(std::size_t head) const {
  return head * config_.embedding_dim * num_inputs();
}
std::size_t GatModel::offset_attention(std::size_t head) const {
  return config_.heads * config_.embedding_dim * num_inputs() + head * 2 * config_.embedding_dim;
}
std::size_t GatModel::offset_w1() const { return offset_attention(config_.heads); }
std::size_t GatModel::offset_b1() const { return offset_w1() + hidden_width() * hidden_width(); }
std::size_t GatModel::offset_w2() const { return offset_b1() + hidden_width(); }
std::size_t GatModel::offset_b2() const { return offset_w2() + num_outputs() * hidden_width(); }

std::span<double> GatModel::projection(std::size_t head) {
  return std::span<double>(params_).subspan(offset_projection(head), config_.embedding_dim * num_inputs());
}
std::span<double> GatModel::attention(std::size_t head) {
  return std::span<double>(params_).subspan(offset_attention(head), 2 * config_.embedding_dim);
}
std::span<double> GatModel::output_weights() {
  return std::span<double>(params_).subspan(offset_w2(), num_outputs() * hidden_width());
}
std::span<double> GatModel::output_bias() { return std::span<double>(params_).subspan(offset_b2(), num_outputs()); }

void GatModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto glorot = [&](std::size_t offset, std::size_t fan_out, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < fan_out * fan_in; ++i) params_[offset + i] = dist(rng);
  };
  std::fill(params_.begin(), params_.end(), 0.0);
  const std::size_t e = config_.embedding_dim;
  for (std::size_t k = 0; k < config_.heads; ++k) glorot(offset_projection(k), e, num_inputs());
  for (std::size_t k = 0; k < config_.heads; ++k) glorot(offset_attention(k), 1, 2 * e);
  glorot(offset_w1(), hidden_width(), hidden_width());
  glorot(offset_w2(), num_outputs(), hidden_width());
}

void GatModel::encode(std::span<const double> children, std::size_t child_count, std::size_t child_depth,
                      std::vector<double>& inputs, std::vector<double>& parent) const {
  const std::size_t f_in = num_inputs();
  inputs.resize(child_count * f_in);
  parent.assign(f_in, 0.0);
  for (std::size_t j = 0; j < child_count; ++j) {
    for (std::size_t f = 0; f < p_; ++f) {
      const double v = input_norm_.normalize(f, children[j * p_ + f]);
      inputs[j * f_in + f] = v;
      parent[f] += v;
    }
    inputs[j * f_in + p_] = input_norm_.normalize(p_, static_cast<double>(child_depth));
  }
  for (std::size_t f = 0; f < p_; ++f) parent[f] /= static_cast<double>(child_count);
  parent[p_] = input_norm_.normalize(p_, static_cast<double>(child_depth) - 1.0);
}

void GatModel::forward(std::span<const double> inputs, std::size_t c, std::span<const double> parent,
                       GatForward& cache) const {
  const std::size_t f_in = num_inputs();
  const std::size_t e = config_.embedding_dim;
  const std::size_t heads = config_.heads;
  const std::size_t hw = hidden_width();
  const std::size_t o_n = num_outputs();
  const double slope = config_.leaky_slope;

  cache.children = c;
  cache.projected.assign(heads * (c + 1) * e, 0.0);
  cache.score.assign(heads * c, 0.0);
  cache.alpha.assign(heads * c, 0.0);
  cache.message.assign(heads * e, 0.0);
  cache.z.assign(heads * e, 0.0);
  cache.hidden_pre.assign(hw, 0.0);
  cache.hidden.assign(hw, 0.0);
  cache.out.assign(o_n, 0.0);

  for (std::size_t k = 0; k < heads; ++k) {
    const double* w = params_.data() + offset_projection(k);
    const double* theta = params_.data() + offset_attention(k);
    double* u = cache.projected.data() + k * (c + 1) * e;
    for (std::size_t j = 0; j <= c; ++j) {
      const double* x = j < c ? inputs.data() + j * f_in : parent.data();
      for (std::size_t r = 0; r < e; ++r) {
        double acc = 0.0;
        for (std::size_t f = 0; f < f_in; ++f) acc += w[r * f_in + f] * x[f];
        u[j * e + r] = acc;
      }
    }
    double parent_term = 0.0;
    for (std::size_t r = 0; r < e; ++r) parent_term += theta[r] * u[c * e + r];
    double* score = cache.score.data() + k * c;
    double* alpha = cache.alpha.data() + k * c;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      double s = parent_term;
      for (std::size_t r = 0; r < e; ++r) s += theta[e + r] * u[j * e + r];
      score[j] = s;
      alpha[j] = s > 0.0 ? s : slope * s;
      top = std::max(top, alpha[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      alpha[j] = std::exp(alpha[j] - top);
      total += alpha[j];
    }
    for (std::size_t j = 0; j < c; ++j) alpha[j] /= total;
    for (std::size_t r = 0; r < e; ++r) {
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) acc += alpha[j] * u[j * e + r];
      cache.message[k * e + r] = acc;
      cache.z[k * e + r] = elu(acc);
    }
  }

  const double* w1 = params_.data() + offset_w1();
  const double* b1 = params_.data() + offset_b1();
  for (std::size_t h = 0; h < hw; ++h) {
    double acc = b1[h];
    for (std::size_t i = 0; i < hw; ++i) acc += w1[h * hw + i] * cache.z[i];
    cache.hidden_pre[h] = acc;
    cache.hidden[h] = elu(acc);
  }
  const double* w2 = params_.data() + offset_w2();
  const double* b2 = params_.data() + offset_b2();
  for (std::size_t o = 0; o < o_n; ++o) {
    double acc = b2[o];
    for (std::size_t h = 0; h < hw; ++h) acc += w2[o * hw + h] * cache.hidden[h];
    cache.out[o] = acc;
  }
}

double GatModel::loss(const SubtreeSample& sample) const {
  GatForward cache;
  forward(sample.inputs, sample.children, sample.parent, cache);
  double total = 0.0;
  for (std::size_t o = 0; o < cache.out.size(); ++o) {
    const double d = cache.out[o] - sample.target[o];
    total += d * d;
  }
  return total;
}

double GatModel::loss_and_gradient(const SubtreeSample& sample, std::span<double> grad) const {
  GatForward cache;
  const std::size_t c = sample.children;
  forward(sample.inputs, c, sample.parent, cache);

  const std::size_t f_in = num_inputs();
  const std::size_t e = config_.embedding_dim;
  const std::size_t heads = config_.heads;
  const std::size_t hw = hidden_width();
  const std::size_t o_n = num_outputs();
  const double slope = config_.leaky_slope;

  double total = 0.0;
  std::vector<double> d_out(o_n);
  for (std::size_t o = 0; o < o_n; ++o) {
    const double d = cache.out[o] - sample.target[o];
    total += d * d;
    d_out[o] = 2.0 * d;
  }

  const double* w2 = params_.data() + offset_w2();
  double* g_w2 = grad.data() + offset_w2();
  double* g_b2 = grad.data() + offset_b2();
  std::vector<double> d_hidden(hw, 0.0);
  for (std::size_t o = 0; o < o_n; ++o) {
    g_b2[o] += d_out[o];
    for (std::size_t h = 0; h < hw; ++h) {
      g_w2[o * hw + h] += d_out[o] * cache.hidden[h];
      d_hidden[h] += w2[o * hw + h] * d_out[o];
    }
  }

  const double* w1 = params_.data() + offset_w1();
  double* g_w1 = grad.data() + offset_w1();
  double* g_b1 = grad.data() + offset_b1();
  std::vector<double> d_z(hw, 0.0);
  for (std::size_t h = 0; h < hw; ++h) {
    const double d_pre = d_hidden[h] * elu_grad(cache.hidden_pre[h]);
    g_b1[h] += d_pre;
    for (std::size_t i = 0; i < hw; ++i) {
      g_w1[h * hw + i] += d_pre * cache.z[i];
      d_z[i] += w1[h * hw + i] * d_pre;
    }
  }

  std::vector<double> d_u((c + 1) * e);
  std::vector<double> d_alpha(c);
  for (std::size_t k = 0; k < heads; ++k) {
    const double* theta = params_.data() + offset_attention(k);
    double* g_w = grad.data() + offset_projection(k);
    double* g_theta = grad.data() + offset_attention(k);
    const double* u = cache.projected.data() + k * (c + 1) * e;
    const double* alpha = cache.alpha.data() + k * c;
    const double* score = cache.score.data() + k * c;
    std::fill(d_u.begin(), d_u.end(), 0.0);

    std::vector<double> d_msg(e);
    for (std::size_t r = 0; r < e; ++r) d_msg[r] = d_z[k * e + r] * elu_grad(cache.message[k * e + r]);

    double weighted = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < e; ++r) {
        acc += d_msg[r] * u[j * e + r];
        d_u[j * e + r] += alpha[j] * d_msg[r];
      }
      d_alpha[j] = acc;
      weighted += alpha[j] * acc;
    }
    for (std::size_t j = 0; j < c; ++j) {
      const double d_l = alpha[j] * (d_alpha[j] - weighted);
      const double d_s = d_l * (score[j] > 0.0 ? 1.0 : slope);
      for (std::size_t r = 0; r < e; ++r) {
        g_theta[r] += d_s * u[c * e + r];
        g_theta[e + r] += d_s * u[j * e + r];
        d_u[c * e + r] += d_s * theta[r];
        d_u[j * e + r] += d_s * theta[e + r];
      }
    }
    for (std::size_t j = 0; j <= c; ++j) {
      const double* x = j < c ? sample.inputs.data() + j * f_in : sample.parent.data();
      for (std::size_t r = 0; r < e; ++r) {
        const double du = d_u[j * e + r];
        if (du == 0.0) continue;
        for (std::size_t f = 0; f < f_in; ++f) g_w[r * f_in + f] += du * x[f];
      }
    }
  }
  return total;
}

std::vector<double> GatModel::attention_coefficients(std::span<const double> children, std::size_t child_count,
                                                     std::size_t child_depth) const {
  std::vector<double> inputs;
  std::vector<double> parent;
  encode(children, child_count, child_depth, inputs, parent);
  GatForward cache;
  forward(inputs, child_count, parent, cache);
  return cache.alpha;
}

void GatModel::predict_parent(std::span<const double> children, std::size_t child_count, std::size_t child_depth,
                              std::span<double> out) const {
  std::vector<double> inputs;
  std::vector<double> parent;
  encode(children, child_count, child_depth, inputs, parent);
  GatForward cache;
  forward(inputs, child_count, parent, cache);
  for (std::size_t o = 0; o < num_outputs(); ++o) out[o] = output_norm_.denormalize(o, cache.out[o]);
}

void GatModel::edge_weights(std::span<const double> children, std::size_t child_count, std::size_t child_depth,
                            std::span<double> weights) const {
  const auto alpha = attention_coefficients(children, child_count, child_depth);
  for (std::size_t j = 0; j < child_count; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < config_.heads; ++k) acc += alpha[k * child_count + j];
    weights[j] = acc / static_cast<double>(config_.heads);
  }
}

bool GatModel::operator==(const GatModel& other) const {
  return p_ == other.p_ && q_ == other.q_ && fingerprint_ == other.fingerprint_ &&
         config_.embedding_dim == other.config_.embedding_dim && config_.heads == other.config_.heads &&
         config_.leaky_slope == other.config_.leaky_slope && params_ == other.params_ &&
         input_norm_.mean == other.input_norm_.mean && input_norm_.scale == other.input_norm_.scale &&
         output_norm_.mean == other.output_norm_.mean && output_norm_.scale == other.output_norm_.scale;
}

}  // namespace xmrca
