#include "xmrca/cli/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "xmrca/core/error.hpp"
#include "xmrca/ingest/csv.hpp"

namespace xmrca {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw Error(ErrorCode::kInvalidArgument,
              "config key '" + std::string(key) + "': '" + std::string(value) + "' is not " + std::string(want));
}

std::uint64_t to_uint(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value, "a non-negative integer");
  return out;
}

double to_double(std::string_view key, std::string_view value) {
  const std::string text(value);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) bad_value(key, value, "a number");
  return out;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "a boolean");
}

std::vector<std::size_t> to_sizes(std::string_view key, std::string_view value) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    auto end = value.find(',', start);
    if (end == std::string_view::npos) end = value.size();
    out.push_back(to_uint(key, trim(value.substr(start, end - start))));
    start = end + 1;
  }
  return out;
}

}  // namespace

void RunConfig::apply(std::string_view key, std::string_view value) {
  using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;
  static const std::map<std::string, Setter, std::less<>> setters = {
      {"manifest", [](RunConfig& c, auto, auto v) { c.manifest = std::string(v); }},
      {"model", [](RunConfig& c, auto, auto v) { c.model = std::string(v); }},
      {"labels", [](RunConfig& c, auto, auto v) { c.labels = std::string(v); }},
      {"out", [](RunConfig& c, auto, auto v) { c.out = std::string(v); }},
      {"monitored", [](RunConfig& c, auto, auto v) { c.monitored = std::string(v); }},
      {"timestamp", [](RunConfig& c, auto, auto v) { c.timestamp = std::string(v); }},
      {"seed", [](RunConfig& c, auto k, auto v) { c.seed = to_uint(k, v); }},
      {"ar.order", [](RunConfig& c, auto k, auto v) { c.ar_order = to_uint(k, v); }},
      {"train.end", [](RunConfig& c, auto k, auto v) { c.train_end = to_uint(k, v); }},
      {"relationship",
       [](RunConfig& c, auto k, auto v) {
         if (v == "gat") {
           c.relationship = RelationshipKind::kGat;
         } else if (v == "exact") {
           c.relationship = RelationshipKind::kExact;
         } else {
           bad_value(k, v, "'gat' or 'exact'");
         }
       }},
      {"gat.embedding_dim", [](RunConfig& c, auto k, auto v) { c.gat.embedding_dim = to_uint(k, v); }},
      {"gat.heads", [](RunConfig& c, auto k, auto v) { c.gat.heads = to_uint(k, v); }},
      {"gat.epochs", [](RunConfig& c, auto k, auto v) { c.gat.epochs = to_uint(k, v); }},
      {"gat.learning_rate", [](RunConfig& c, auto k, auto v) { c.gat.learning_rate = to_double(k, v); }},
      {"gat.patience", [](RunConfig& c, auto k, auto v) { c.gat.patience = to_uint(k, v); }},
      {"gat.validation_fraction", [](RunConfig& c, auto k, auto v) { c.gat.validation_fraction = to_double(k, v); }},
      {"gat.leaky_slope", [](RunConfig& c, auto k, auto v) { c.gat.leaky_slope = to_double(k, v); }},
      {"gat.seed", [](RunConfig& c, auto k, auto v) { c.gat.seed = to_uint(k, v); }},
      {"ga.population", [](RunConfig& c, auto k, auto v) { c.localize.ga.population = to_uint(k, v); }},
      {"ga.iterations", [](RunConfig& c, auto k, auto v) { c.localize.ga.iterations = to_uint(k, v); }},
      {"ga.crossover_rate", [](RunConfig& c, auto k, auto v) { c.localize.ga.crossover_rate = to_double(k, v); }},
      {"ga.mutation_rate", [](RunConfig& c, auto k, auto v) { c.localize.ga.mutation_rate = to_double(k, v); }},
      {"ga.beta", [](RunConfig& c, auto k, auto v) { c.localize.ga.beta = to_double(k, v); }},
      {"ga.init_density", [](RunConfig& c, auto k, auto v) { c.localize.ga.init_density = to_double(k, v); }},
      {"ga.seed", [](RunConfig& c, auto k, auto v) { c.localize.ga.seed = to_uint(k, v); }},
      {"filter.threshold", [](RunConfig& c, auto k, auto v) { c.localize.filter.threshold = to_double(k, v); }},
      {"filter.mode",
       [](RunConfig& c, auto k, auto v) {
         if (v == "relative") {
           c.localize.filter.mode = ThresholdMode::kRelativeToUniform;
         } else if (v == "literal") {
           c.localize.filter.mode = ThresholdMode::kLiteral;
         } else {
           bad_value(k, v, "'relative' or 'literal'");
         }
       }},
      {"fitness.scope",
       [](RunConfig& c, auto k, auto v) {
         if (v == "all") {
           c.localize.fitness.scope = ReplacementScope::kAllFundamentals;
         } else if (v == "flagged") {
           c.localize.fitness.scope = ReplacementScope::kMaskedOnly;
         } else {
           bad_value(k, v, "'all' or 'flagged'");
         }
       }},
      {"fitness.penalty",
       [](RunConfig& c, auto k, auto v) {
         if (v == "leaves") {
           c.localize.fitness.normalization = PenaltyNormalization::kLeaves;
         } else if (v == "candidates") {
           c.localize.fitness.normalization = PenaltyNormalization::kCandidates;
         } else if (v == "none") {
           c.localize.fitness.normalization = PenaltyNormalization::kNone;
         } else {
           bad_value(k, v, "'leaves', 'candidates' or 'none'");
         }
       }},
      {"fitness.anchor", [](RunConfig& c, auto k, auto v) { c.localize.fitness.anchor_to_observed = to_bool(k, v); }},
      {"backtrack.threshold", [](RunConfig& c, auto k, auto v) { c.localize.backtrack_threshold = to_double(k, v); }},
      {"synth.dims", [](RunConfig& c, auto k, auto v) { c.synth.dimension_sizes = to_sizes(k, v); }},
      {"synth.timestamps", [](RunConfig& c, auto k, auto v) { c.synth.timestamps = to_uint(k, v); }},
      {"synth.f", [](RunConfig& c, auto k, auto v) { c.synth.outer_function = to_uint(k, v); }},
      {"synth.g", [](RunConfig& c, auto k, auto v) { c.synth.inner_function = to_uint(k, v); }},
      {"synth.anomalies", [](RunConfig& c, auto k, auto v) { c.synth.anomalies = to_uint(k, v); }},
      {"synth.warmup", [](RunConfig& c, auto k, auto v) { c.synth.warmup = to_uint(k, v); }},
      {"synth.min_causes", [](RunConfig& c, auto k, auto v) { c.synth.min_causes = to_uint(k, v); }},
      {"synth.max_causes", [](RunConfig& c, auto k, auto v) { c.synth.max_causes = to_uint(k, v); }},
      {"synth.magnitude_min", [](RunConfig& c, auto k, auto v) { c.synth.magnitude_min = to_double(k, v); }},
      {"synth.magnitude_max", [](RunConfig& c, auto k, auto v) { c.synth.magnitude_max = to_double(k, v); }},
      {"synth.value_min", [](RunConfig& c, auto k, auto v) { c.synth.value_min = to_double(k, v); }},
      {"synth.value_max", [](RunConfig& c, auto k, auto v) { c.synth.value_max = to_double(k, v); }},
      {"synth.noise", [](RunConfig& c, auto k, auto v) { c.synth.noise = to_double(k, v); }},
      {"synth.seed", [](RunConfig& c, auto k, auto v) { c.synth.seed = to_uint(k, v); }},
      {"eval.threshold", [](RunConfig& c, auto k, auto v) { c.truth_threshold = to_double(k, v); }},
      {"eval.truth",
       [](RunConfig& c, auto k, auto v) {
         if (v == "labels") {
           c.truth_from_recovery = false;
         } else if (v == "recovery") {
           c.truth_from_recovery = true;
         } else {
           bad_value(k, v, "'labels' or 'recovery'");
         }
       }},
      {"eval.cases", [](RunConfig& c, auto k, auto v) { c.max_cases = to_uint(k, v); }},
      {"adtributor.eep", [](RunConfig& c, auto k, auto v) { c.adtributor.min_value_power = to_double(k, v); }},
      {"adtributor.ep", [](RunConfig& c, auto k, auto v) { c.adtributor.min_set_power = to_double(k, v); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
  it->second(*this, key, value);
}

void RunConfig::apply_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::kInvalidArgument, "expected key=value, got '" + std::string(assignment) + "'");
  }
  apply(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::parse(std::string_view text) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    try {
      apply_assignment(line);
    } catch (const Error& e) {
      throw e.with_context("(config line " + std::to_string(line_no) + ")");
    }
  }
}

void RunConfig::load(const std::filesystem::path& path) { parse(read_text_file(path)); }

void RunConfig::resolve_seed() {
  if (!seed) return;
  gat.seed = *seed;
  localize.ga.seed = *seed;
  synth.seed = *seed;
}

}  // namespace xmrca
