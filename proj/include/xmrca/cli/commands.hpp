#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "xmrca/cli/config.hpp"
#include "xmrca/core/error.hpp"
#include "xmrca/core/panel.hpp"
#include "xmrca/gat/relationship.hpp"
#include "xmrca/ingest/csv.hpp"

namespace xmrca {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNoAnomaly = 3;
inline constexpr int kExitNoCandidates = 4;
inline constexpr int kExitDivergence = 5;

int exit_code(ErrorCode code);

struct LoadedData {
  DatasetManifest manifest;
  Dataset dataset;
  // Aggregated over every node.
  MetricPanel full;
  std::size_t monitored = 0;
};

// Manifest, leaf CSV and exact aggregation; the monitored metric comes from
// the config, then the manifest, then the last derived metric.
LoadedData load_dataset(const RunConfig& config);

// Exact oracle or the model file named in the config (fingerprint-checked).
std::unique_ptr<Relationship> make_relationship(const RunConfig& config, const MetricSchema& metrics);

// Root monitored value against its one-step forecast at every timestamp.
std::vector<std::size_t> flagged_timestamps(const MetricPanel& full, std::size_t monitored, std::size_t ar_order);

// Each command writes into config.out and reports progress on `log`. Errors
// are thrown as Error; run_cli maps them to exit codes.
void cmd_simulate(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_detect(const RunConfig& config, std::ostream& log);
void cmd_localize(const RunConfig& config, std::ostream& log);
void cmd_evaluate(const RunConfig& config, std::ostream& log);

// Parses `args` (without the program name) and runs one subcommand.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xmrca
