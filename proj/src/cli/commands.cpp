#include "xmrca/cli/commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ostream>
#include <sstream>

#include "xmrca/eval/adtributor.hpp"
#include "xmrca/eval/metrics.hpp"
#include "xmrca/forecast/ar.hpp"
#include "xmrca/gat/model.hpp"
#include "xmrca/gat/train.hpp"
#include "xmrca/localize/localize.hpp"
#include "xmrca/synth/generator.hpp"

namespace xmrca {

namespace {

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "cannot create output directory '" + dir.string() + "'");
  }
}

std::size_t find_timestamp(const MetricPanel& panel, const std::string& label) {
  const auto& labels = panel.timestamp_labels();
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error(ErrorCode::kInvalidArgument, "unknown timestamp '" + label + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

std::vector<NodeKey> keys_of(const DimensionTree& tree, std::span<const NodeId> ids) {
  std::vector<NodeKey> out;
  for (NodeId id : ids) out.push_back(tree.key(id));
  return out;
}

std::filesystem::path model_path(const RunConfig& config) {
  return config.model.empty() ? config.out / "model.txt" : config.model;
}

}  // namespace

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNoAnomaly:
      return kExitNoAnomaly;
    case ErrorCode::kNoCandidates:
      return kExitNoCandidates;
    case ErrorCode::kDivergence:
      return kExitDivergence;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kSchemaViolation:
    case ErrorCode::kEmptyInput:
    case ErrorCode::kIncompletePanel:
    case ErrorCode::kFormulaParse:
    case ErrorCode::kFormulaUnbound:
    case ErrorCode::kMalformedRow:
    case ErrorCode::kDuplicateRow:
    case ErrorCode::kIo:
    case ErrorCode::kInsufficientHistory:
    case ErrorCode::kGeneration:
      return kExitInput;
    default:
      return kExitFailure;
  }
}

LoadedData load_dataset(const RunConfig& config) {
  if (config.manifest.empty()) throw Error(ErrorCode::kInvalidArgument, "no manifest given");
  LoadedData data;
  data.manifest = DatasetManifest::read(config.manifest);
  data.dataset = load_csv(data.manifest);
  data.full = aggregate_panel(data.dataset.panel, data.dataset.tree, data.dataset.metrics);
  const auto& metrics = data.dataset.metrics;
  std::string name = !config.monitored.empty() ? config.monitored : data.manifest.monitored;
  if (name.empty()) {
    if (metrics.num_derived() == 0) throw Error(ErrorCode::kInvalidArgument, "no derived metric to monitor");
    name = metrics.name(metrics.size() - 1);
  }
  const auto idx = metrics.find(name);
  if (!idx) throw Error(ErrorCode::kInvalidArgument, "unknown monitored metric '" + name + "'");
  data.monitored = *idx;
  return data;
}

std::unique_ptr<Relationship> make_relationship(const RunConfig& config, const MetricSchema& metrics) {
  if (config.relationship == RelationshipKind::kExact) return std::make_unique<ExactRelationship>(metrics);
  auto model = std::make_unique<GatModel>(load_model(model_path(config).string()));
  if (model->fingerprint() != metrics.fingerprint() || model->num_fundamentals() != metrics.num_fundamentals() ||
      model->num_derived() != metrics.num_derived()) {
    throw Error(ErrorCode::kSchemaViolation, "model was trained on a different metric schema");
  }
  return model;
}

std::vector<std::size_t> flagged_timestamps(const MetricPanel& full, std::size_t monitored, std::size_t ar_order) {
  std::vector<double> series(full.num_timestamps());
  for (std::size_t t = 0; t < series.size(); ++t) series[t] = full.value(t, 0, monitored);
  std::vector<std::size_t> out;
  for (std::size_t t = 1; t < series.size(); ++t) {
    const auto f = forecast_series(std::span<const double>(series).first(t), series[t], ar_order);
    if (detect_3sigma(series[t], f.expected, f.sigma)) out.push_back(t);
  }
  return out;
}

void cmd_simulate(const RunConfig& config, std::ostream& log) {
  const auto data = generate_dataset(config.synth);
  ensure_dir(config.out);
  write_synth(config.out, data);
  log << "wrote " << data.dataset.tree.num_leaves() << " leaves x " << config.synth.timestamps << " timestamps, "
      << data.labels.size() << " labelled anomalies to " << config.out.string() << '\n';
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  const auto data = load_dataset(config);
  const auto result = train(config.gat, data.dataset.tree, data.dataset.metrics, data.full, config.train_end);
  ensure_dir(config.out);
  const auto path = model_path(config);
  save_model(result.model, path.string());
  write_text_file(config.out / "training_log.csv", result.log.to_csv());
  log << "trained " << result.log.epochs.size() << " epochs, best validation mse "
      << format_double(result.log.best_validation_mse) << " at epoch " << result.log.best_epoch << "; model "
      << path.string() << '\n';
}

void cmd_detect(const RunConfig& config, std::ostream& log) {
  const auto data = load_dataset(config);
  const auto& full = data.full;
  std::ostringstream out;
  out << "timestamp,observed,expected,sigma,anomalous\n";
  std::vector<double> series(full.num_timestamps());
  for (std::size_t t = 0; t < series.size(); ++t) series[t] = full.value(t, 0, data.monitored);
  std::size_t flagged = 0;
  for (std::size_t t = 1; t < series.size(); ++t) {
    const auto f = forecast_series(std::span<const double>(series).first(t), series[t], config.ar_order);
    const bool hit = detect_3sigma(series[t], f.expected, f.sigma);
    flagged += hit ? 1 : 0;
    out << csv_escape(full.timestamp_labels()[t]) << ',' << format_double(series[t]) << ','
        << format_double(f.expected) << ',' << format_double(f.sigma) << ',' << (hit ? 1 : 0) << '\n';
  }
  ensure_dir(config.out);
  write_text_file(config.out / "detections.csv", out.str());
  log << flagged << " anomalous timestamps\n";
}

void cmd_localize(const RunConfig& config, std::ostream& log) {
  const auto data = load_dataset(config);
  const auto& ds = data.dataset;
  std::size_t t = 0;
  if (!config.timestamp.empty()) {
    t = find_timestamp(data.full, config.timestamp);
  } else {
    const auto flagged = flagged_timestamps(data.full, data.monitored, config.ar_order);
    if (flagged.empty()) throw Error(ErrorCode::kNoAnomaly, "no timestamp trips the 3-sigma rule");
    t = flagged.back();
  }
  const auto relationship = make_relationship(config, ds.metrics);
  const auto forecast = forecast_panel(data.full, t, config.ar_order);
  const auto values = data.full.snapshot(t);
  const double observed = values[ds.tree.root() * ds.metrics.size() + data.monitored];
  if (!detect_3sigma(observed, forecast.value(ds.tree.root(), data.monitored),
                     forecast.sd(ds.tree.root(), data.monitored))) {
    throw Error(ErrorCode::kNoAnomaly, "timestamp " + data.full.timestamp_labels()[t] +
                                           " is within 3 sigma of its forecast");
  }
  const auto report = localize(*relationship, ds.tree, ds.metrics, values, forecast, data.monitored, config.localize);
  const auto summary = format_summary(report, ds.tree, ds.metrics, data.full.timestamp_labels()[t]);
  ensure_dir(config.out);
  write_text_file(config.out / "report.txt", format_report_lines(report, ds.tree, ds.metrics));
  write_text_file(config.out / "summary.txt", summary);
  log << summary;
}

void cmd_evaluate(const RunConfig& config, std::ostream& log) {
  const auto data = load_dataset(config);
  const auto& ds = data.dataset;
  const auto labels_path =
      config.labels.empty() ? config.manifest.parent_path() / "labels.csv" : config.labels;
  if (!std::filesystem::exists(labels_path)) {
    throw Error(ErrorCode::kIo, "missing labels file '" + labels_path.string() + "'");
  }
  const auto labels =
      parse_labels(read_text_file(labels_path), ds.schema, ds.metrics, data.full.timestamp_labels());
  const auto relationship = make_relationship(config, ds.metrics);

  EvalReport report;
  std::size_t done = 0;
  for (const auto& label : labels) {
    if (config.max_cases != 0 && done == config.max_cases) break;
    ++done;
    const std::size_t t = label.timestamp;
    const auto forecast = forecast_panel(data.full, t, config.ar_order);
    const auto values = data.full.snapshot(t);
    std::vector<NodeKey> truth;
    if (config.truth_from_recovery) {
      GroundTruthOptions options;
      options.threshold = config.truth_threshold;
      truth = keys_of(ds.tree, ground_truth(ds.tree, ds.metrics, values, forecast, data.monitored, options).leaves);
    } else {
      truth = label.leaves();
    }
    const std::string case_id = data.full.timestamp_labels()[t];

    auto start = std::chrono::steady_clock::now();
    std::vector<NodeKey> predicted;
    try {
      const auto r = localize(*relationship, ds.tree, ds.metrics, values, forecast, data.monitored, config.localize);
      predicted = keys_of(ds.tree, r.node_ids());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoAnomaly && e.code() != ErrorCode::kNoCandidates) throw;
    }
    auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    report.cases.push_back({case_id, "cmmd", prf1(predicted, truth, ds.tree), ms});

    start = std::chrono::steady_clock::now();
    const auto adt = adtributor(ds.tree, ds.metrics, values, forecast, data.monitored, config.adtributor);
    ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    report.cases.push_back({case_id, "adtributor", prf1(adt.nodes, truth, ds.tree), ms});
  }
  if (labels.empty()) throw Error(ErrorCode::kInvalidArgument, "labels file holds no cases");
  ensure_dir(config.out);
  write_text_file(config.out / "evaluation.csv", report.to_csv());
  for (const auto& method : report.methods()) {
    const auto c = report.aggregate(method);
    log << method << ": precision " << format_double(c.precision()) << " recall " << format_double(c.recall())
        << " f1 " << format_double(c.f1()) << '\n';
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-dimensional root cause analysis for derived-metric anomalies"};
  app.require_subcommand(1);
  struct Options {
    std::string config;
    std::vector<std::string> sets;
    std::vector<std::string> conveniences;
  };
  Options opts;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "key=value config file");
    sub->add_option("--set", opts.sets, "override one key, key=value")->take_all();
    const auto convenience = [&](const std::string& flag, const std::string& key, const std::string& help) {
      sub->add_option_function<std::string>(
          flag, [&opts, key](const std::string& v) { opts.conveniences.push_back(key + "=" + v); }, help);
    };
    convenience("--manifest", "manifest", "dataset manifest");
    convenience("--model", "model", "model file");
    convenience("--out", "out", "output directory");
    convenience("--seed", "seed", "seed for every stochastic stage");
    convenience("--monitored", "monitored", "monitored derived metric");
    convenience("--relationship", "relationship", "gat or exact");
    return sub;
  };
  auto* simulate = add_common(app.add_subcommand("simulate", "generate a synthetic dataset"));
  simulate->add_option_function<std::string>(
      "--f-index", [&](const std::string& v) { opts.conveniences.push_back("synth.f=" + v); }, "derived function");
  auto* train_cmd = add_common(app.add_subcommand("train", "train the relationship model"));
  train_cmd->add_option_function<std::string>(
      "--epochs", [&](const std::string& v) { opts.conveniences.push_back("gat.epochs=" + v); }, "training epochs");
  auto* detect = add_common(app.add_subcommand("detect", "flag anomalous timestamps with the 3-sigma rule"));
  auto* localize_cmd = add_common(app.add_subcommand("localize", "localize the root cause of one anomaly"));
  localize_cmd->add_option_function<std::string>(
      "--timestamp", [&](const std::string& v) { opts.conveniences.push_back("timestamp=" + v); },
      "anomalous timestamp");
  localize_cmd->add_option_function<std::string>(
      "--t-delta", [&](const std::string& v) { opts.conveniences.push_back("filter.threshold=" + v); },
      "candidate filter threshold");
  auto* evaluate = add_common(app.add_subcommand("evaluate", "score localization against labels"));

  std::vector<const char*> argv{"xmrca"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    RunConfig config;
    if (!opts.config.empty()) config.load(opts.config);
    for (const auto& kv : opts.conveniences) config.apply_assignment(kv);
    for (const auto& kv : opts.sets) config.apply_assignment(kv);
    config.resolve_seed();
    if (simulate->parsed()) cmd_simulate(config, out);
    if (train_cmd->parsed()) cmd_train(config, out);
    if (detect->parsed()) cmd_detect(config, out);
    if (localize_cmd->parsed()) cmd_localize(config, out);
    if (evaluate->parsed()) cmd_evaluate(config, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace xmrca
