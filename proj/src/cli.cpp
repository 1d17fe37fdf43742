#include "qsat/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <map>
#include <optional>

#include "qsat/bundle.hpp"
#include "qsat/data_model.hpp"
#include "qsat/error.hpp"
#include "qsat/evaluation.hpp"
#include "qsat/http_server.hpp"
#include "qsat/learners/factory.hpp"
#include "qsat/parallel.hpp"
#include "qsat/service.hpp"
#include "qsat/training.hpp"

namespace qsat {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::string config_path(const std::string& output) { return output + ".config.json"; }

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_file(path, j.dump(2) + "\n");
}

/// "corpus/out.qsat.json" -> "corpus/out"; anything else is kept whole.
std::string output_prefix(const std::string& bundle_path) {
  constexpr std::string_view suffix = ".qsat.json";
  if (bundle_path.size() > suffix.size() &&
      bundle_path.compare(bundle_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return bundle_path.substr(0, bundle_path.size() - suffix.size());
  }
  return bundle_path;
}

nlohmann::json generator_json(const GeneratorConfig& cfg) {
  auto designs = nlohmann::json::object();
  for (std::size_t d = 0; d < kDesignCount; ++d) {
    const auto& c = cfg.designs[d];
    auto weights = nlohmann::json::object();
    for (std::size_t j = 0; j < kMetricCount; ++j) {
      weights[std::string(kMetricNames[j])] = c.metric_weights[j];
    }
    designs[std::string(design_label(kAllDesigns[d]))] = {{"mean", c.target_mean},
                                                          {"median", c.target_median},
                                                          {"metric_weights", weights},
                                                          {"mu", c.mu},
                                                          {"sigma", c.sigma}};
  }
  return {{"beta", cfg.beta},
          {"designs", designs},
          {"flip_probability", cfg.flip_probability},
          {"levels", cfg.levels},
          {"per_design", cfg.per_design},
          {"seed", cfg.seed}};
}

// --------------------------------------------------------------------------

struct SynthArgs {
  std::size_t per_design = 150;
  std::uint64_t seed = 42;
  double beta = 0.8;
  double flip = 0.1;
  std::string out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  auto cfg = default_generator_config();
  cfg.per_design = a.per_design;
  cfg.seed = a.seed;
  cfg.beta = a.beta;
  cfg.flip_probability = a.flip;
  const auto data = synthesize_dataset(cfg);
  write_file(a.out, serialize_csv(data));
  write_json(config_path(a.out), {{"command", "synth"}, {"generator", generator_json(cfg)}});
  out << "wrote " << data.size() << " records to " << a.out << "\n";
  return kExitOk;
}

// --------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::uint64_t seed = 42;
  double test_fraction = 0.2;
  std::size_t folds = 5;
  std::string grids;
  std::string trim = "percentile_95";
  bool trim_global = false;
  double std_multiplier = 3.0;
  bool no_balance = false;
  std::string calibration = "test_split";
  double calibration_fraction = 0.5;
  std::string meta = "linear";
  bool no_lasso = false;
  int permutation_repeats = 5;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainOptions opt;
  opt.seed = a.seed;
  opt.test_fraction = a.test_fraction;
  opt.folds = a.folds;
  opt.balance = !a.no_balance;
  opt.trim.method = parse_trim_method(a.trim);
  opt.trim.group_by_design = !a.trim_global;
  opt.trim.std_multiplier = a.std_multiplier;
  opt.include_lasso = !a.no_lasso;
  opt.calibration =
      a.calibration == "holdout" ? CalibrationProtocol::Holdout : CalibrationProtocol::TestSplit;
  opt.calibration_fraction = a.calibration_fraction;
  opt.meta = a.meta == "elastic_net" ? MetaKind::ElasticNet : MetaKind::Linear;
  opt.permutation_repeats = a.permutation_repeats;
  if (!a.grids.empty()) {
    try {
      opt.grids = nlohmann::json::parse(read_file(a.grids));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::Validation, std::string("grids file is not valid JSON: ") + e.what(),
                  "grids");
    }
    if (!opt.grids.is_object()) {
      throw Error(ErrorCode::Validation, "grids file must hold an object", "grids");
    }
  }

  const auto csv = read_file(a.data);
  const auto data = parse_csv(csv);
  const auto outcome = train_bundle(data, csv, opt);

  const auto prefix = output_prefix(a.out);
  write_json(prefix + ".report.json", outcome.report.to_json());
  write_file(prefix + ".report.csv", outcome.report.to_csv());
  write_file(prefix + ".plot.csv", outcome.report.plot_csv());
  write_json(config_path(a.out), {{"command", "train"},
                                  {"data", a.data},
                                  {"grids", resolved_grids(opt)},
                                  {"options", opt.to_json()},
                                  {"out", a.out}});
  for (const auto& row : outcome.report.rows) {
    if (row.failure) err << "warning: " << row.kind << " failed: " << *row.failure << "\n";
  }
  if (!outcome.failed_kinds.empty()) {
    err << "error: the bundle needs all nine models; not written\n";
    return kExitFailure;
  }
  save_bundle(outcome.bundle, a.out);
  out << "trained " << outcome.bundle.models.size() << " models on "
      << outcome.summary.trimmed_records << " records; bundle " << a.out << " (model "
      << outcome.bundle.model_version << ")\n";
  return kExitOk;
}

// --------------------------------------------------------------------------

struct EvaluateArgs {
  std::string bundle;
  std::string data;
  std::string out;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const auto bundle = load_bundle(a.bundle);
  const auto csv = read_file(a.data);
  const auto data = parse_csv(csv);
  const auto t = bundle.pipeline.transform(data);
  const EvaluationSet test{&t.x, *t.y_log};

  ComparisonReport report;
  report.fingerprint = sha256_hex(csv);
  report.seed = bundle.metadata.value("seed", std::uint64_t{0});
  report.timestamp = utc_timestamp();
  if (report.fingerprint == bundle.metadata.value("fingerprint", std::string())) {
    report.warnings.push_back(
        "evaluation CSV matches the training CSV fingerprint: these rows were seen in training "
        "(leakage), so the scores are not held-out estimates");
  }
  bool any_ok = false;
  for (const auto& [kind, model] : bundle.models) {
    ReportRow row;
    try {
      row = score_model(*model, EvaluationSet{}, test);
      any_ok = true;
    } catch (const std::exception& e) {
      row.kind = std::string(kind_name(kind));
      row.failure = e.what();
    }
    report.rows.push_back(std::move(row));
  }
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";

  if (a.out.empty()) {
    out << report.to_json().dump(2) << "\n";
  } else {
    write_json(a.out + ".report.json", report.to_json());
    write_file(a.out + ".report.csv", report.to_csv());
    write_file(a.out + ".plot.csv", report.plot_csv());
    write_json(config_path(a.out),
               {{"bundle", a.bundle}, {"command", "evaluate"}, {"data", a.data}, {"out", a.out}});
    out << "wrote " << a.out << ".report.json\n";
  }
  return any_ok ? kExitOk : kExitFailure;
}

// --------------------------------------------------------------------------

struct PredictArgs {
  std::string bundle;
  std::string design;
  std::vector<std::string> scores;
  std::string input;
  std::optional<double> alpha;
};

nlohmann::json predict_body(const PredictArgs& a) {
  nlohmann::json body = nlohmann::json::object();
  if (!a.input.empty()) {
    try {
      body = nlohmann::json::parse(read_file(a.input));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::Validation, std::string("input is not valid JSON: ") + e.what(),
                  "input");
    }
    if (!body.is_object()) throw Error(ErrorCode::Validation, "input must hold an object", "input");
  }
  if (!a.design.empty()) body["design"] = a.design;
  if (!a.scores.empty() || !body.contains("scores")) {
    auto scores = body.value("scores", nlohmann::json::object());
    for (const auto& kv : a.scores) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::Validation, "expected key=value, got '" + kv + "'", "score");
      }
      const auto key = kv.substr(0, eq), value = kv.substr(eq + 1);
      std::size_t used = 0;
      long parsed = 0;
      try {
        parsed = std::stol(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != value.size()) {
        throw Error(ErrorCode::Validation, "score '" + value + "' is not an integer",
                    "scores." + key);
      }
      scores[key] = parsed;
    }
    std::string missing;
    for (auto name : kMetricNames) {
      if (!scores.contains(std::string(name))) {
        missing += (missing.empty() ? "" : ", ") + std::string(name);
      }
    }
    if (!missing.empty()) {
      throw Error(ErrorCode::Validation, "missing scores: " + missing, "scores");
    }
    body["scores"] = scores;
  }
  if (a.alpha) body["alpha"] = *a.alpha;
  return body;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const auto body = predict_body(a);
  const auto request = PredictionRequest::from_json(body);
  const auto bundle = load_bundle(a.bundle);
  out << handle_predict(bundle, request).dump() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Qualitative sample-size predictor: synthesize, train, evaluate, predict, serve"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a calibrated synthetic corpus");
  s->add_option("--per-design", synth.per_design, "Records per design")->check(CLI::PositiveNumber);
  s->add_option("--seed", synth.seed, "Master seed");
  s->add_option("--beta", synth.beta, "Signal strength in [0, 1]")->check(CLI::Range(0.0, 1.0));
  s->add_option("--flip", synth.flip, "Score redraw probability in [0, 0.5]")
      ->check(CLI::Range(0.0, 0.5));
  s->add_option("--out", synth.out, "Output CSV path")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train all models and write a bundle");
  t->add_option("--data", train.data, "Training CSV")->required();
  t->add_option("--out", train.out, "Bundle path (*.qsat.json)")->required();
  t->add_option("--seed", train.seed, "Master seed");
  t->add_option("--test-fraction", train.test_fraction, "Held-out share");
  t->add_option("--folds", train.folds, "Cross-validation folds");
  t->add_option("--grids", train.grids, "JSON file of hyperparameter grids");
  t->add_option("--trim", train.trim, "Outlier rule")
      ->check(CLI::IsMember({"percentile_95", "std_rule"}));
  t->add_flag("--trim-global", train.trim_global, "Trim over all designs at once");
  t->add_option("--std-multiplier", train.std_multiplier, "k for the std rule");
  t->add_flag("--no-balance", train.no_balance, "Skip per-design downsampling");
  t->add_option("--calibration", train.calibration, "Conformal calibration set")
      ->check(CLI::IsMember({"test_split", "holdout"}));
  t->add_option("--calibration-fraction", train.calibration_fraction,
                "Share of the test split used for calibration (holdout)");
  t->add_option("--meta", train.meta, "Stacking meta-learner")
      ->check(CLI::IsMember({"linear", "elastic_net"}));
  t->add_flag("--no-lasso", train.no_lasso, "Skip the optional lasso model");
  t->add_option("--permutation-repeats", train.permutation_repeats, "Permutation repeats");

  EvaluateArgs evaluate;
  auto* e = app.add_subcommand("evaluate", "Score a bundle on a labelled CSV");
  e->add_option("--bundle", evaluate.bundle, "Bundle path")->required();
  e->add_option("--data", evaluate.data, "Labelled CSV")->required();
  e->add_option("--out", evaluate.out, "Report prefix (default: print JSON)");

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "Predict a sample size for one study");
  p->add_option("--bundle", predict.bundle, "Bundle path")->required();
  p->add_option("--design", predict.design, "Research design label");
  p->add_option("--score", predict.scores, "metric=value, once per metric");
  p->add_option("--input", predict.input, "JSON request file");
  p->add_option("--alpha", predict.alpha, "Miscoverage level in (0, 1)");

  ServeOptions serve_opts;
  std::string bundle_path;
  auto* v = app.add_subcommand("serve", "Serve the HTTP API");
  v->add_option("--bundle", bundle_path, "Bundle path")->required();
  v->add_option("--host", serve_opts.host, "Bind address");
  v->add_option("--port", serve_opts.port, "Port (0 = any free port)");
  v->add_option("--handler-delay-ms", serve_opts.handler_delay_ms)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) return app.exit(ex, out, err);
    app.exit(ex, out, err);
    return kExitUsage;
  }
  set_thread_count(threads);

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (t->parsed()) return cmd_train(train, out, err);
    if (e->parsed()) return cmd_evaluate(evaluate, out, err);
    if (p->parsed()) return cmd_predict(predict, out);
    if (v->parsed()) {
      serve_opts.bundle_path = bundle_path;
      return serve(serve_opts, err);
    }
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    if (ex.is_validation() || ex.code() == ErrorCode::Io || ex.code() == ErrorCode::Schema ||
        ex.code() == ErrorCode::VersionMismatch || ex.code() == ErrorCode::MissingModel) {
      return kExitUsage;
    }
    return kExitFailure;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace qsat
