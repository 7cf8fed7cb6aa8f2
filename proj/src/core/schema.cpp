#include "xmrca/core/schema.hpp"

#include <algorithm>
#include <unordered_set>

#include "xmrca/core/error.hpp"

namespace xmrca {

DimensionSchema::DimensionSchema(std::vector<std::string> names,
                                 std::vector<std::vector<std::string>> values)
    : names_(std::move(names)), values_(std::move(values)) {
  if (names_.size() != values_.size()) {
    throw Error(ErrorCode::kSchemaViolation, "dimension names and value lists differ in length");
  }
  std::unordered_set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw Error(ErrorCode::kSchemaViolation, "empty dimension name");
    if (!seen.insert(n).second) throw Error(ErrorCode::kSchemaViolation, "duplicate dimension '" + n + "'");
  }
  index_.resize(names_.size());
  for (std::size_t d = 0; d < names_.size(); ++d) {
    for (std::size_t v = 0; v < values_[d].size(); ++v) {
      const auto& label = values_[d][v];
      if (label == kAggLabel) {
        throw Error(ErrorCode::kSchemaViolation, "reserved label AGG used in dimension '" + names_[d] + "'");
      }
      if (label.find(kKeySeparator) != std::string::npos) {
        throw Error(ErrorCode::kSchemaViolation, "label '" + label + "' contains the key separator");
      }
      if (!index_[d].emplace(label, static_cast<int>(v)).second) {
        throw Error(ErrorCode::kSchemaViolation,
                    "duplicate value '" + label + "' in dimension '" + names_[d] + "'");
      }
    }
  }
}

std::optional<std::size_t> DimensionSchema::find_dimension(std::string_view name) const {
  for (std::size_t d = 0; d < names_.size(); ++d) {
    if (names_[d] == name) return d;
  }
  return std::nullopt;
}

std::optional<int> DimensionSchema::find_value(std::size_t dim, std::string_view label) const {
  auto it = index_[dim].find(std::string(label));
  if (it == index_[dim].end()) return std::nullopt;
  return it->second;
}

bool NodeKey::is_leaf() const {
  return std::none_of(values.begin(), values.end(), [](int v) { return v == kAgg; });
}

bool NodeKey::is_root() const {
  return std::all_of(values.begin(), values.end(), [](int v) { return v == kAgg; });
}

bool NodeKey::covers(const NodeKey& leaf) const {
  if (leaf.values.size() != values.size()) return false;
  for (std::size_t d = 0; d < values.size(); ++d) {
    if (values[d] != kAgg && values[d] != leaf.values[d]) return false;
  }
  return true;
}

std::size_t NodeKeyHash::operator()(const NodeKey& key) const noexcept {
  std::size_t h = 1469598103934665603ULL;
  for (int v : key.values) {
    h ^= static_cast<std::size_t>(v + 2);
    h *= 1099511628211ULL;
  }
  return h;
}

NodeKey root_key(std::size_t dims) { return NodeKey{std::vector<int>(dims, kAgg)}; }

std::string format_key(const NodeKey& key, const DimensionSchema& schema) {
  std::string out;
  for (std::size_t d = 0; d < key.values.size(); ++d) {
    if (d > 0) out += kKeySeparator;
    out += key.values[d] == kAgg ? std::string(kAggLabel) : schema.label(d, key.values[d]);
  }
  return out;
}

NodeKey parse_key(std::string_view text, const DimensionSchema& schema) {
  NodeKey key;
  std::size_t start = 0;
  for (std::size_t d = 0; d < schema.size(); ++d) {
    const std::size_t end = text.find(kKeySeparator, start);
    const bool last = d + 1 == schema.size();
    if ((end == std::string_view::npos) != last) {
      throw Error(ErrorCode::kSchemaViolation, "key '" + std::string(text) + "' has wrong arity");
    }
    auto label = text.substr(start, last ? std::string_view::npos : end - start);
    if (label == kAggLabel) {
      key.values.push_back(kAgg);
    } else {
      auto v = schema.find_value(d, label);
      if (!v) {
        throw Error(ErrorCode::kSchemaViolation,
                    "unknown value '" + std::string(label) + "' for dimension '" + schema.name(d) + "'");
      }
      key.values.push_back(*v);
    }
    start = end + 1;
  }
  return key;
}

const char* to_string(Aggregation agg) { return agg == Aggregation::kSum ? "SUM" : "MEAN"; }

Aggregation parse_aggregation(std::string_view text) {
  if (text == "SUM") return Aggregation::kSum;
  if (text == "MEAN") return Aggregation::kMean;
  throw Error(ErrorCode::kSchemaViolation, "unknown aggregation '" + std::string(text) + "'");
}

MetricSchema::MetricSchema(std::vector<std::string> fundamentals, std::vector<Aggregation> aggregations,
                           std::vector<DerivedMetric> derived)
    : fundamentals_(std::move(fundamentals)),
      aggregations_(std::move(aggregations)),
      derived_(std::move(derived)) {
  if (fundamentals_.empty()) throw Error(ErrorCode::kSchemaViolation, "at least one fundamental metric required");
  if (derived_.empty()) throw Error(ErrorCode::kSchemaViolation, "at least one derived metric required");
  if (aggregations_.size() != fundamentals_.size()) {
    throw Error(ErrorCode::kSchemaViolation, "one aggregation per fundamental metric required");
  }
  std::unordered_set<std::string> seen;
  for (const auto& n : fundamentals_) {
    if (!seen.insert(n).second) throw Error(ErrorCode::kSchemaViolation, "duplicate metric '" + n + "'");
  }
  for (std::size_t q = 0; q < derived_.size(); ++q) {
    const auto& def = derived_[q];
    if (seen.count(def.name)) throw Error(ErrorCode::kSchemaViolation, "duplicate metric '" + def.name + "'");
    auto tree = parse_formula(def.formula);
    // Only names defined so far are visible, so forward references and
    // cycles both surface as unbound names.
    const std::size_t visible = fundamentals_.size() + q;
    try {
      compiled_.emplace_back(*tree, [&](std::string_view n) -> std::optional<std::size_t> {
        auto idx = find(n);
        if (idx && *idx < visible) return idx;
        return std::nullopt;
      });
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchemaViolation, "derived metric '" + def.name + "': " + e.detail());
    }
    seen.insert(def.name);
  }
}

const std::string& MetricSchema::name(std::size_t metric) const {
  return metric < fundamentals_.size() ? fundamentals_[metric] : derived_[metric - fundamentals_.size()].name;
}

std::optional<std::size_t> MetricSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < fundamentals_.size(); ++i) {
    if (fundamentals_[i] == name) return i;
  }
  for (std::size_t q = 0; q < derived_.size(); ++q) {
    if (derived_[q].name == name) return fundamentals_.size() + q;
  }
  return std::nullopt;
}

std::size_t MetricSchema::index_of(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw Error(ErrorCode::kSchemaViolation, "unknown metric '" + std::string(name) + "'");
  return *idx;
}

void MetricSchema::compute_derived(std::span<double> row) const {
  const std::size_t p = fundamentals_.size();
  for (std::size_t q = 0; q < compiled_.size(); ++q) row[p + q] = compiled_[q].evaluate(row);
}

double MetricSchema::compute_derived(std::size_t derived_index, std::span<const double> row) const {
  return compiled_[derived_index].evaluate(row);
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t MetricSchema::fingerprint() const {
  std::uint64_t h = fnv1a("metrics");
  for (std::size_t i = 0; i < fundamentals_.size(); ++i) {
    h = fnv1a(fundamentals_[i], h);
    h = fnv1a(to_string(aggregations_[i]), h);
  }
  for (const auto& d : derived_) {
    h = fnv1a(d.name, h);
    h = fnv1a(print_formula(*parse_formula(d.formula)), h);
  }
  return h;
}

}  // namespace xmrca
