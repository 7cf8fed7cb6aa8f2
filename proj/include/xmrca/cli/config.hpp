#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "xmrca/eval/adtributor.hpp"
#include "xmrca/gat/model.hpp"
#include "xmrca/localize/localize.hpp"
#include "xmrca/synth/generator.hpp"

namespace xmrca {

enum class RelationshipKind { kGat, kExact };

// Settings shared by all subcommands. Config files hold key=value lines
// ('#' starts a comment); see apply() for the keys.
struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path model;
  std::filesystem::path labels;
  std::filesystem::path out = ".";
  std::string monitored;
  std::string timestamp;  // empty selects the latest flagged timestamp
  std::optional<std::uint64_t> seed;
  std::size_t ar_order = 0;  // 0 picks the default per series
  std::size_t train_end = 0;
  RelationshipKind relationship = RelationshipKind::kGat;

  GatConfig gat;
  LocalizeConfig localize;
  SynthConfig synth;
  AdtributorConfig adtributor;
  double truth_threshold = 0.8;
  bool truth_from_recovery = false;
  std::size_t max_cases = 0;  // 0 evaluates every labelled timestamp

  // Sets one key. Throws kInvalidArgument for unknown keys or bad values.
  void apply(std::string_view key, std::string_view value);
  // "key=value" form of apply().
  void apply_assignment(std::string_view assignment);
  // Applies every line of a config file. Relative paths stay relative to the
  // working directory.
  void load(const std::filesystem::path& path);
  void parse(std::string_view text);

  // Copies the global seed into the module configs when set.
  void resolve_seed();
};

}  // namespace xmrca
