#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xmrca/core/formula.hpp"

namespace xmrca {

// Marker for an aggregated dimension inside a NodeKey.
inline constexpr int kAgg = -1;
inline constexpr std::string_view kAggLabel = "AGG";
inline constexpr char kKeySeparator = '|';

class DimensionSchema {
 public:
  DimensionSchema() = default;
  // Throws kSchemaViolation on duplicate names/labels or a literal "AGG" label.
  DimensionSchema(std::vector<std::string> names, std::vector<std::vector<std::string>> values);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t dim) const { return names_[dim]; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::string>& values(std::size_t dim) const { return values_[dim]; }
  const std::string& label(std::size_t dim, int value) const { return values_[dim][value]; }

  std::optional<std::size_t> find_dimension(std::string_view name) const;
  std::optional<int> find_value(std::size_t dim, std::string_view label) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> values_;
  std::vector<std::unordered_map<std::string, int>> index_;
};

// One entry per dimension: a value index into the schema or kAgg.
struct NodeKey {
  std::vector<int> values;

  std::size_t size() const { return values.size(); }
  bool is_leaf() const;
  bool is_root() const;
  // True when every concrete entry of this key matches `leaf`.
  bool covers(const NodeKey& leaf) const;

  auto operator<=>(const NodeKey&) const = default;
};

struct NodeKeyHash {
  std::size_t operator()(const NodeKey& key) const noexcept;
};

NodeKey root_key(std::size_t dims);
std::string format_key(const NodeKey& key, const DimensionSchema& schema);
// Parses "Search|US" / "AGG|US"; throws kSchemaViolation on unknown labels.
NodeKey parse_key(std::string_view text, const DimensionSchema& schema);

enum class Aggregation { kSum, kMean };

const char* to_string(Aggregation agg);
Aggregation parse_aggregation(std::string_view text);

struct DerivedMetric {
  std::string name;
  std::string formula;
};

// Fundamental metrics occupy indices [0, P); derived metrics follow in
// definition order at [P, P+Q).
class MetricSchema {
 public:
  MetricSchema() = default;
  // Derived formulas may reference fundamentals or earlier derived metrics
  // only, which rules out cycles.
  MetricSchema(std::vector<std::string> fundamentals, std::vector<Aggregation> aggregations,
               std::vector<DerivedMetric> derived);

  std::size_t num_fundamentals() const { return fundamentals_.size(); }
  std::size_t num_derived() const { return derived_.size(); }
  std::size_t size() const { return fundamentals_.size() + derived_.size(); }

  const std::string& name(std::size_t metric) const;
  bool is_fundamental(std::size_t metric) const { return metric < fundamentals_.size(); }
  Aggregation aggregation(std::size_t fundamental) const { return aggregations_[fundamental]; }
  const std::vector<std::string>& fundamentals() const { return fundamentals_; }
  const std::vector<DerivedMetric>& derived() const { return derived_; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  // Fills row[P..P+Q) from row[0..P). Domain errors propagate as Error.
  void compute_derived(std::span<double> row) const;
  double compute_derived(std::size_t derived_index, std::span<const double> row) const;

  // Stable 64-bit digest of names, aggregations and formulas.
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> fundamentals_;
  std::vector<Aggregation> aggregations_;
  std::vector<DerivedMetric> derived_;
  std::vector<CompiledFormula> compiled_;
};

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace xmrca
