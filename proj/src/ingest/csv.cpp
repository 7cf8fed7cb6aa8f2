#include "xmrca/ingest/csv.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "xmrca/core/error.hpp"

namespace xmrca {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto end = s.find(',', start);
    out.emplace_back(trim(s.substr(start, end == std::string_view::npos ? end : end - start)));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

bool parse_integer(std::string_view s, long long& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

bool parse_real(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

struct RawRow {
  std::size_t line = 0;
  std::string timestamp;
  std::vector<std::string> labels;
  std::vector<std::optional<double>> values;
};

}  // namespace

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (c != '\r') {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double value) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", value);
  return buf.data();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

DatasetManifest DatasetManifest::read(const std::filesystem::path& path) {
  return parse(read_text_file(path), path.parent_path());
}

DatasetManifest DatasetManifest::parse(std::string_view text, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kMalformedRow, "manifest line " + std::to_string(line_no) + " has no '='");
    }
    const std::string key(trim(s.substr(0, eq)));
    const std::string value(trim(s.substr(eq + 1)));
    if (key == "data") {
      m.data = value;
    } else if (key == "timestamp_col") {
      m.timestamp_col = value;
    } else if (key == "dims") {
      m.dims = split_list(value);
    } else if (key == "fundamentals") {
      m.fundamentals = split_list(value);
    } else if (key == "expansion") {
      m.expansion = split_list(value);
    } else if (key == "monitored") {
      m.monitored = value;
    } else if (key.rfind("derived.", 0) == 0) {
      m.derived.push_back({key.substr(8), value});
    } else if (key.rfind("agg.", 0) == 0) {
      m.aggregations[key.substr(4)] = parse_aggregation(value);
    } else if (key.rfind("values.", 0) == 0) {
      m.declared_values[key.substr(7)] = split_list(value);
    } else {
      throw Error(ErrorCode::kMalformedRow, "unknown manifest key '" + key + "' on line " + std::to_string(line_no));
    }
  }
  if (!m.data.empty() && m.data.is_relative() && !base_dir.empty()) m.data = base_dir / m.data;
  if (m.dims.empty()) throw Error(ErrorCode::kSchemaViolation, "manifest declares no dims");
  if (m.fundamentals.empty()) throw Error(ErrorCode::kSchemaViolation, "manifest declares no fundamentals");
  std::unordered_set<std::string> columns{m.timestamp_col};
  for (const auto& c : m.dims) {
    if (!columns.insert(c).second) throw Error(ErrorCode::kSchemaViolation, "column '" + c + "' listed twice");
  }
  for (const auto& c : m.fundamentals) {
    if (!columns.insert(c).second) throw Error(ErrorCode::kSchemaViolation, "column '" + c + "' listed twice");
  }
  for (const auto& [metric, agg] : m.aggregations) {
    if (std::find(m.fundamentals.begin(), m.fundamentals.end(), metric) == m.fundamentals.end()) {
      throw Error(ErrorCode::kSchemaViolation, "aggregation given for unknown fundamental '" + metric + "'");
    }
  }
  return m;
}

std::string DatasetManifest::to_text() const {
  std::ostringstream out;
  out << "data=" << data.generic_string() << "\n";
  out << "timestamp_col=" << timestamp_col << "\n";
  out << "dims=" << join(dims) << "\n";
  out << "fundamentals=" << join(fundamentals) << "\n";
  for (const auto& d : derived) out << "derived." << d.name << "=" << d.formula << "\n";
  for (const auto& [metric, agg] : aggregations) out << "agg." << metric << "=" << to_string(agg) << "\n";
  for (const auto& [dim, values] : declared_values) out << "values." << dim << "=" << join(values) << "\n";
  if (!expansion.empty()) out << "expansion=" << join(expansion) << "\n";
  if (!monitored.empty()) out << "monitored=" << monitored << "\n";
  return out.str();
}

void DatasetManifest::write(const std::filesystem::path& path) const { write_text_file(path, to_text()); }

MetricSchema DatasetManifest::metric_schema() const {
  std::vector<Aggregation> aggs;
  for (const auto& f : fundamentals) {
    auto it = aggregations.find(f);
    aggs.push_back(it == aggregations.end() ? Aggregation::kSum : it->second);
  }
  return MetricSchema(fundamentals, aggs, derived);
}

Dataset load_csv(const DatasetManifest& manifest) { return load_csv_text(manifest, read_text_file(manifest.data)); }

Dataset load_csv_text(const DatasetManifest& manifest, std::string_view text) {
  MetricSchema metrics = manifest.metric_schema();
  const std::size_t dims = manifest.dims.size();
  const std::size_t p = manifest.fundamentals.size();

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) header = split_csv_line(line);
  }
  if (header.empty()) throw Error(ErrorCode::kEmptyInput, "no header row");

  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name(trim(header[i]));
    if (!column.emplace(name, i).second) throw Error(ErrorCode::kMalformedRow, "duplicate column '" + name + "'");
  }
  auto require = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) throw Error(ErrorCode::kMalformedRow, "header is missing column '" + name + "'");
    return it->second;
  };
  const std::size_t ts_col = require(manifest.timestamp_col);
  std::vector<std::size_t> dim_cols;
  std::vector<std::size_t> metric_cols;
  for (const auto& d : manifest.dims) dim_cols.push_back(require(d));
  for (const auto& f : manifest.fundamentals) metric_cols.push_back(require(f));
  if (header.size() != 1 + dims + p) {
    throw Error(ErrorCode::kMalformedRow, "header has columns not named in the manifest");
  }

  std::vector<RawRow> rows;
  std::size_t malformed = 0;
  std::size_t first_malformed = 0;
  std::string first_reason;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    std::string reason;
    RawRow row;
    row.line = line_no;
    if (fields.size() != header.size()) {
      reason = "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size());
    } else {
      row.timestamp = std::string(trim(fields[ts_col]));
      for (auto c : dim_cols) row.labels.emplace_back(trim(fields[c]));
      for (std::size_t f = 0; f < p && reason.empty(); ++f) {
        // An empty cell is a missing value, not a malformed one.
        if (trim(fields[metric_cols[f]]).empty()) {
          row.values.emplace_back();
          continue;
        }
        double v = 0.0;
        if (!parse_real(fields[metric_cols[f]], v)) {
          reason = "non-numeric value '" + fields[metric_cols[f]] + "' for " + manifest.fundamentals[f];
        }
        row.values.emplace_back(v);
      }
      if (row.timestamp.empty() && reason.empty()) reason = "empty timestamp";
    }
    if (!reason.empty()) {
      if (malformed++ == 0) {
        first_malformed = line_no;
        first_reason = reason;
      }
      continue;
    }
    for (std::size_t d = 0; d < dims; ++d) {
      if (row.labels[d] == kAggLabel) {
        throw Error(ErrorCode::kSchemaViolation,
                    "reserved value AGG in column '" + manifest.dims[d] + "' on line " + std::to_string(line_no));
      }
    }
    rows.push_back(std::move(row));
  }
  if (malformed > 0) {
    throw Error(ErrorCode::kMalformedRow, std::to_string(malformed) + " malformed row(s); first on line " +
                                              std::to_string(first_malformed) + ": " + first_reason);
  }
  if (rows.empty()) throw Error(ErrorCode::kEmptyInput, "no data rows");

  // Dimension values: declared order when given, otherwise sorted labels so
  // that row order never matters.
  std::vector<std::vector<std::string>> values(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    std::set<std::string> observed;
    for (const auto& r : rows) observed.insert(r.labels[d]);
    auto declared = manifest.declared_values.find(manifest.dims[d]);
    if (declared != manifest.declared_values.end()) {
      values[d] = declared->second;
      for (const auto& label : observed) {
        if (std::find(values[d].begin(), values[d].end(), label) == values[d].end()) {
          throw Error(ErrorCode::kSchemaViolation,
                      "value '" + label + "' not declared for dimension '" + manifest.dims[d] + "'");
        }
      }
    } else {
      values[d].assign(observed.begin(), observed.end());
    }
  }
  DimensionSchema schema(manifest.dims, values);

  // Integer timestamps sort numerically, anything else (ISO-8601) lexically.
  std::vector<std::string> stamps;
  for (const auto& r : rows) stamps.push_back(r.timestamp);
  std::sort(stamps.begin(), stamps.end());
  stamps.erase(std::unique(stamps.begin(), stamps.end()), stamps.end());
  const bool numeric = std::all_of(stamps.begin(), stamps.end(), [](const std::string& s) {
    long long v = 0;
    return parse_integer(s, v);
  });
  if (numeric) {
    std::sort(stamps.begin(), stamps.end(), [](const std::string& a, const std::string& b) {
      long long x = 0, y = 0;
      parse_integer(a, x);
      parse_integer(b, y);
      return x < y;
    });
  }
  std::unordered_map<std::string, std::size_t> stamp_index;
  for (std::size_t i = 0; i < stamps.size(); ++i) stamp_index.emplace(stamps[i], i);

  std::vector<NodeKey> keys;
  keys.reserve(rows.size());
  for (const auto& r : rows) {
    NodeKey key;
    for (std::size_t d = 0; d < dims; ++d) key.values.push_back(*schema.find_value(d, r.labels[d]));
    keys.push_back(std::move(key));
  }

  std::vector<std::size_t> expansion;
  for (const auto& name : manifest.expansion) {
    auto d = schema.find_dimension(name);
    if (!d) throw Error(ErrorCode::kSchemaViolation, "expansion names unknown dimension '" + name + "'");
    expansion.push_back(*d);
  }
  DimensionTree tree = DimensionTree::build(schema, keys, expansion);
  MetricPanel panel(stamps.size(), tree.size(), metrics.size());
  panel.timestamp_labels() = stamps;

  std::unordered_map<std::size_t, std::size_t> seen;  // cell index -> line
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t t = stamp_index.at(rows[i].timestamp);
    const NodeId leaf = *tree.find(keys[i]);
    auto [it, inserted] = seen.emplace(t * tree.size() + leaf, rows[i].line);
    if (!inserted) {
      throw Error(ErrorCode::kDuplicateRow, "line " + std::to_string(rows[i].line) + " repeats timestamp " +
                                                rows[i].timestamp + " and key " + tree.label(leaf) +
                                                " from line " + std::to_string(it->second));
    }
    for (std::size_t f = 0; f < p; ++f) {
      if (rows[i].values[f]) panel.set(t, leaf, f, *rows[i].values[f]);
    }
  }
  return Dataset{std::move(schema), std::move(metrics), std::move(tree), std::move(panel)};
}

std::string serialize_csv(const Dataset& dataset, std::string_view timestamp_col) {
  const auto& tree = dataset.tree;
  const auto& schema = dataset.schema;
  std::ostringstream out;
  out << csv_escape(timestamp_col);
  for (const auto& d : schema.names()) out << ',' << csv_escape(d);
  for (const auto& f : dataset.metrics.fundamentals()) out << ',' << csv_escape(f);
  out << '\n';
  const auto& labels = dataset.panel.timestamp_labels();
  for (std::size_t t = 0; t < dataset.panel.num_timestamps(); ++t) {
    for (std::size_t pos = 0; pos < tree.num_leaves(); ++pos) {
      const NodeId leaf = tree.leaf_id(pos);
      bool any = false;
      for (std::size_t f = 0; f < dataset.metrics.num_fundamentals(); ++f) any = any || dataset.panel.has(t, leaf, f);
      if (!any) continue;
      out << csv_escape(labels[t]);
      for (std::size_t d = 0; d < schema.size(); ++d) out << ',' << csv_escape(schema.label(d, tree.key(leaf).values[d]));
      for (std::size_t f = 0; f < dataset.metrics.num_fundamentals(); ++f) {
        out << ',' << (dataset.panel.has(t, leaf, f) ? format_double(dataset.panel.value(t, leaf, f)) : "");
      }
      out << '\n';
    }
  }
  return out.str();
}

void write_csv(const std::filesystem::path& path, const Dataset& dataset, std::string_view timestamp_col) {
  write_text_file(path, serialize_csv(dataset, timestamp_col));
}

}  // namespace xmrca
