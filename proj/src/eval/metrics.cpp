#include "xmrca/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

#include "xmrca/core/error.hpp"
#include "xmrca/gat/relationship.hpp"
#include "xmrca/ingest/csv.hpp"

namespace xmrca {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

struct LeafTables {
  std::vector<double> real;
  std::vector<double> forecast;
};

LeafTables leaf_tables(const DimensionTree& tree, const MetricSchema& metrics, std::span<const double> values,
                       const ForecastPanel& forecast) {
  const std::size_t p = metrics.num_fundamentals();
  const std::size_t m_count = metrics.size();
  if (values.size() != tree.size() * m_count || forecast.nodes != tree.size() || forecast.metrics != m_count) {
    throw Error(ErrorCode::kInvalidArgument, "evaluation inputs do not match the tree and metric schema");
  }
  LeafTables out;
  out.real.resize(tree.num_leaves() * p);
  out.forecast.resize(tree.num_leaves() * p);
  for (std::size_t pos = 0; pos < tree.num_leaves(); ++pos) {
    const NodeId id = tree.leaf_id(pos);
    for (std::size_t m = 0; m < p; ++m) {
      out.real[pos * p + m] = values[id * m_count + m];
      out.forecast[pos * p + m] = forecast.value(id, m);
    }
  }
  return out;
}

class RecoveryOracle {
 public:
  RecoveryOracle(const DimensionTree& tree, const MetricSchema& metrics, const LeafTables& tables,
                 std::size_t monitored, double observed, double expected)
      : relationship_(metrics),
        tables_(tables),
        propagator_(relationship_, tree, tables.real),
        monitored_(monitored),
        observed_(observed),
        expected_(expected),
        root_(metrics.size()) {}

  double recovery(std::span<const std::size_t> positions) {
    try {
      propagator_.evaluate(positions, tables_.forecast, root_);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kFormulaDomain) return -std::numeric_limits<double>::infinity();
      throw;
    }
    const double r = 1.0 - std::abs(root_[monitored_] - expected_) / std::abs(observed_ - expected_);
    return std::isfinite(r) ? r : -std::numeric_limits<double>::infinity();
  }

 private:
  ExactRelationship relationship_;
  const LeafTables& tables_;
  TreePropagator propagator_;
  std::size_t monitored_;
  double observed_;
  double expected_;
  std::vector<double> root_;
};

}  // namespace

double EvalCounts::precision() const { return ratio(tp, tp + fp); }
double EvalCounts::recall() const { return ratio(tp, tp + fn); }
double EvalCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

EvalCounts& EvalCounts::operator+=(const EvalCounts& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  return *this;
}

EvalCounts EvalReport::aggregate(std::string_view method) const {
  EvalCounts total;
  for (const auto& c : cases) {
    if (c.method == method) total += c.counts;
  }
  return total;
}

std::vector<std::string> EvalReport::methods() const {
  std::vector<std::string> out;
  for (const auto& c : cases) {
    if (std::find(out.begin(), out.end(), c.method) == out.end()) out.push_back(c.method);
  }
  return out;
}

std::string EvalReport::to_csv(bool include_runtime) const {
  std::ostringstream out;
  out << "case_id,method,tp,fp,fn,precision,recall,f1" << (include_runtime ? ",runtime_ms" : "") << '\n';
  const auto row = [&](std::string_view id, std::string_view method, const EvalCounts& c, double ms) {
    out << csv_escape(id) << ',' << csv_escape(method) << ',' << c.tp << ',' << c.fp << ',' << c.fn << ','
        << format_double(c.precision()) << ',' << format_double(c.recall()) << ',' << format_double(c.f1());
    if (include_runtime) out << ',' << format_double(ms);
    out << '\n';
  };
  for (const auto& c : cases) row(c.case_id, c.method, c.counts, c.runtime_ms);
  for (const auto& method : methods()) {
    double total_ms = 0.0;
    for (const auto& c : cases) {
      if (c.method == method) total_ms += c.runtime_ms;
    }
    row("ALL", method, aggregate(method), total_ms);
  }
  return out.str();
}

std::vector<NodeKey> expand_to_leaves(std::span<const NodeKey> nodes, const DimensionTree& tree) {
  std::vector<NodeKey> out;
  for (std::size_t pos = 0; pos < tree.num_leaves(); ++pos) {
    const auto& leaf = tree.key(tree.leaf_id(pos));
    if (std::any_of(nodes.begin(), nodes.end(), [&](const NodeKey& k) { return k.covers(leaf); })) {
      out.push_back(leaf);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

EvalCounts prf1(std::span<const NodeKey> predicted, std::span<const NodeKey> truth, const DimensionTree& tree) {
  const auto pred = expand_to_leaves(predicted, tree);
  const auto real = expand_to_leaves(truth, tree);
  std::vector<NodeKey> common;
  std::set_intersection(pred.begin(), pred.end(), real.begin(), real.end(), std::back_inserter(common));
  EvalCounts c;
  c.tp = common.size();
  c.fp = pred.size() - common.size();
  c.fn = real.size() - common.size();
  return c;
}

std::vector<double> leaf_recovery(const DimensionTree& tree, const MetricSchema& metrics,
                                  std::span<const double> values, const ForecastPanel& forecast,
                                  std::size_t monitored) {
  const auto tables = leaf_tables(tree, metrics, values, forecast);
  const double observed = values[tree.root() * metrics.size() + monitored];
  const double expected = forecast.value(tree.root(), monitored);
  RecoveryOracle oracle(tree, metrics, tables, monitored, observed, expected);
  std::vector<double> out(tree.num_leaves());
  for (std::size_t pos = 0; pos < out.size(); ++pos) {
    const std::size_t one[] = {pos};
    out[pos] = oracle.recovery(one);
  }
  return out;
}

GroundTruthResult ground_truth(const DimensionTree& tree, const MetricSchema& metrics,
                               std::span<const double> values, const ForecastPanel& forecast,
                               std::size_t monitored, const GroundTruthOptions& options) {
  GroundTruthResult result;
  const std::size_t m_count = metrics.size();
  const double observed = values[tree.root() * m_count + monitored];
  const double expected = forecast.value(tree.root(), monitored);
  if (!(std::abs(observed - expected) > options.anomaly_floor)) return result;

  const auto tables = leaf_tables(tree, metrics, values, forecast);
  RecoveryOracle oracle(tree, metrics, tables, monitored, observed, expected);
  const std::size_t p = metrics.num_fundamentals();
  struct Ranked {
    std::size_t pos;
    double recovery;
    double deviation;
    std::string key;
  };
  std::vector<Ranked> ranked;
  for (std::size_t pos = 0; pos < tree.num_leaves(); ++pos) {
    const std::size_t one[] = {pos};
    const double r = oracle.recovery(one);
    if (!(r > 0.0)) continue;
    double dev = 0.0;
    for (std::size_t m = 0; m < p; ++m) dev += std::abs(tables.real[pos * p + m] - tables.forecast[pos * p + m]);
    ranked.push_back({pos, r, dev, tree.label(tree.leaf_id(pos))});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.recovery != b.recovery) return a.recovery > b.recovery;
    if (a.deviation != b.deviation) return a.deviation > b.deviation;
    return a.key < b.key;
  });

  std::vector<std::size_t> chosen;
  std::size_t best_len = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : ranked) {
    chosen.push_back(r.pos);
    const double joint = oracle.recovery(chosen);
    result.cumulative.push_back(joint);
    if (joint > best) {
      best = joint;
      best_len = chosen.size();
    }
    if (joint >= options.threshold) {
      best_len = chosen.size();
      break;
    }
  }
  result.cumulative.resize(best_len);
  chosen.resize(best_len);

  // Greedy can stall when injected leaves cancel each other. For small
  // trees fall back to the smallest subset that reaches the threshold.
  if (best < options.threshold && tree.num_leaves() <= options.exhaustive_limit) {
    const std::size_t n = tree.num_leaves();
    std::vector<std::size_t> subset;
    for (std::size_t k = 1; k <= n && best < options.threshold; ++k) {
      std::vector<bool> mask(n, false);
      std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(k), true);
      std::vector<std::size_t> hit;
      double hit_score = -std::numeric_limits<double>::infinity();
      do {
        subset.clear();
        for (std::size_t i = 0; i < n; ++i) {
          if (mask[i]) subset.push_back(i);
        }
        const double joint = oracle.recovery(subset);
        if (joint >= options.threshold && joint > hit_score) {
          hit_score = joint;
          hit = subset;
        }
      } while (std::prev_permutation(mask.begin(), mask.end()));
      if (!hit.empty()) {
        best = hit_score;
        chosen = hit;
        result.cumulative.clear();
        for (std::size_t i = 1; i <= chosen.size(); ++i) {
          result.cumulative.push_back(oracle.recovery(std::span<const std::size_t>(chosen.data(), i)));
        }
      }
    }
  }
  for (const std::size_t pos : chosen) result.leaves.push_back(tree.leaf_id(pos));
  return result;
}

}  // namespace xmrca
