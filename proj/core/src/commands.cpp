#include "mfrl/commands.hpp"

#include <algorithm>
#include <cmath>
#include <system_error>

#include <nlohmann/json.hpp>

#include "mfrl/averaging.hpp"
#include "mfrl/byte_io.hpp"
#include "mfrl/error.hpp"

namespace mfrl {

namespace {

using Json = nlohmann::ordered_json;

struct PendingFile {
  std::string name;
  std::string text;
  std::vector<std::uint8_t> bytes;
  bool binary = false;
};

// Writes all files once every computation has succeeded.
std::vector<std::filesystem::path> flush(const std::filesystem::path& dir, const std::vector<PendingFile>& files) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto& f : files) {
    const auto path = dir / f.name;
    if (f.binary) {
      write_file_bytes(path, f.bytes);
    } else {
      write_text_file(path, f.text);
    }
    written.push_back(path);
  }
  return written;
}

PendingFile text_file(std::string name, std::string text) {
  return PendingFile{std::move(name), std::move(text), {}, false};
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string reliability_csv(const CalibrationReport& report) {
  std::string out = "bin_lo,bin_hi,confidence,accuracy,count\n";
  for (const auto& b : report.bins) {
    out += format_double(b.lo) + "," + format_double(b.hi) + "," + format_double(b.confidence) + "," +
           format_double(b.accuracy) + "," + std::to_string(b.count) + "\n";
  }
  return out;
}

Json calibration_json(const CalibrationReport& r) {
  return Json{{"ece", r.ece}, {"mce", r.mce}, {"brier", r.brier}, {"samples", r.samples}};
}

Json summary_json(const AccuracySummary& s) {
  return Json{{"mean", s.mean}, {"std", s.std}, {"ci95", s.ci95}, {"episodes", s.count}};
}

const ParamVector& pick(const Checkpoint& ckpt, Which which) {
  if (which == Which::kSgd) return ckpt.theta_sgd;
  if (!ckpt.theta_swa) {
    throw ConfigError("checkpoint has no theta_SWA section (trained with repr.swa_steps = 0); use --which sgd");
  }
  return *ckpt.theta_swa;
}

struct LoadedModel {
  std::optional<Checkpoint> checkpoint;
  const MlpSpec* spec = nullptr;
  const ParamVector* params = nullptr;
};

LoadedModel load_model(const ExperimentConfig& config, const ExperimentData& data,
                       const std::optional<std::filesystem::path>& path, Which which) {
  LoadedModel model;
  if (!config.trains_backbone()) return model;
  if (!path) throw ConfigError("--checkpoint is required for " + std::string(to_string(config.kind)));
  model.checkpoint = load_checkpoint(*path);
  const Checkpoint& ckpt = *model.checkpoint;
  if (ckpt.config_hash != training_config_hash(config)) {
    throw ConfigError("checkpoint '" + path->string() +
                      "' was trained under a different configuration (config hash mismatch)");
  }
  if (!(ckpt.spec == network_spec(config, data))) {
    throw ConfigError("checkpoint network does not match the configured backbone");
  }
  model.spec = &ckpt.spec;
  model.params = &pick(ckpt, which);
  return model;
}

}  // namespace

Which parse_which(std::string_view name) {
  if (name == "sgd") return Which::kSgd;
  if (name == "swa") return Which::kSwa;
  throw ConfigError("--which must be sgd or swa, got '" + std::string(name) + "'");
}

std::string_view to_string(Which which) { return which == Which::kSgd ? "sgd" : "swa"; }

std::string_view row_label(Which which) { return which == Which::kSgd ? "MFRL (w.o. SWA)" : "MFRL"; }

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  config.validate();
  ExperimentData data;
  data.kind = config.kind;
  switch (config.kind) {
    case ExperimentKind::kSineRegression: {
      SineSplits splits = gen_sine_split(config.seed, config.sine.tasks_per_split, config.sine.samples_per_task);
      data.merged = merge_tasks(std::span<const SineTask>(splits.train));
      for (auto& t : splits.test) data.test_tasks.push_back(std::move(t.data));
      break;
    }
    case ExperimentKind::kSyntheticClassification: {
      BlobConfig blob = config.blob;
      blob.seed = config.seed;
      data.labeled = gen_blob_classes(blob).data;
      data.merged = merge_classes(data.labeled, Split::kTrain);
      break;
    }
    case ExperimentKind::kFeatureFileClassification:
      data.labeled = load_feature_dataset(config.feature_file);
      break;
  }
  return data;
}

MlpSpec network_spec(const ExperimentConfig& config, const ExperimentData& data) {
  MlpSpec spec;
  spec.input_dim = static_cast<int>(data.merged.x.cols());
  spec.hidden_dims = config.hidden;
  spec.activation = config.activation;
  spec.bias = config.bias;
  spec = with_output_heads(spec, data.merged);
  spec.validate();
  return spec;
}

ReprTrainConfig train_config(const ExperimentConfig& config) {
  ReprTrainConfig repr = config.repr;
  repr.loss = config.is_classification() ? LossKind::kCrossEntropy : LossKind::kMse;
  repr.seed = config.seed;
  return repr;
}

std::string train_log_csv(const std::vector<TrainLogEntry>& log) {
  std::string out = "epoch,loss,lr,phase\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "," + format_double(e.loss) + "," + format_double(e.lr) + "," +
           (e.swa ? "swa" : "sgd") + "\n";
  }
  return out;
}

TrainedModel train_model(const ExperimentConfig& config, const ExperimentData& data) {
  if (!config.trains_backbone()) {
    throw ConfigError("train: " + std::string(to_string(config.kind)) + " has no backbone to train");
  }
  const MlpSpec spec = network_spec(config, data);
  const TrainResult result = train_representation(spec, data.merged, train_config(config));
  TrainedModel model;
  model.log = result.log;
  model.log_csv = train_log_csv(result.log);
  model.swa_snapshots = result.swa_snapshots;
  model.checkpoint.spec = spec;
  model.checkpoint.theta_sgd = result.theta_sgd;
  if (result.has_swa) model.checkpoint.theta_swa = result.theta_swa;
  model.checkpoint.log_digest = sha256(model.log_csv);
  model.checkpoint.config_hash = training_config_hash(config);
  model.checkpoint.seed = config.seed;
  return model;
}

double Evaluation::metric() const {
  return classification ? classification_report.pooled.mean : regression.mse_mean;
}

double Evaluation::spread() const {
  return classification ? classification_report.pooled.ci95 : regression.mse_std;
}

Evaluation evaluate_model(const ExperimentConfig& config, const ExperimentData& data,
                          const MlpSpec* spec, const ParamVector* params) {
  Evaluation eval;
  eval.classification = config.is_classification();
  if (config.trains_backbone() && (!spec || !params)) throw ConfigError("evaluate: no network parameters");
  if (!eval.classification) {
    RegressionProtocol protocol;
    protocol.shot = config.sine.shot;
    protocol.seed = config.seed;
    protocol.hyper = config.hyper;
    protocol.evidence = config.evidence;
    eval.regression = evaluate_regression(*spec, *params, data.test_tasks, protocol);
    return eval;
  }
  const Matrix features = config.trains_backbone()
                              ? extract_features(*spec, *params, data.labeled.features, false)
                              : data.labeled.features;
  const EpisodeSource source = make_episode_source(features, data.labeled);
  EpisodeProtocol protocol = config.episodes;
  protocol.seed = config.seed;
  ClassificationHeadConfig head = config.head;
  head.mcmc.seed = config.seed;
  eval.classification_report = evaluate_classification(source, protocol, head);
  return eval;
}

Matrix meta_test_features(const ExperimentConfig& config, const ExperimentData& data,
                          const MlpSpec* spec, const ParamVector* params) {
  Matrix features;
  if (!config.is_classification()) {
    Eigen::Index rows = 0;
    for (const auto& t : data.test_tasks) rows += t.x.rows();
    Matrix x(rows, data.test_tasks.empty() ? 1 : data.test_tasks.front().x.cols());
    Eigen::Index at = 0;
    for (const auto& t : data.test_tasks) {
      x.middleRows(at, t.x.rows()) = t.x;
      at += t.x.rows();
    }
    features = extract_features(*spec, *params, x, false);
  } else {
    const Matrix all = config.trains_backbone()
                           ? extract_features(*spec, *params, data.labeled.features, false)
                           : data.labeled.features;
    features = split_rows(all, data.labeled, Split::kTest);
  }
  if (config.spectrum_max_rows > 0 && features.rows() > config.spectrum_max_rows) {
    features.conservativeResize(config.spectrum_max_rows, Eigen::NoChange);
  }
  return features;
}

SweepResult run_sweep(const ExperimentConfig& config, const ExperimentData& data) {
  if (config.sweep_swa_lr.empty() || config.sweep_swa_steps.empty()) {
    throw ConfigError("sweep: sweep.swa_lr and sweep.swa_steps must both be non-empty");
  }
  const MlpSpec spec = network_spec(config, data);
  RepresentationTrainer trainer(spec, data.merged, train_config(config));
  trainer.run_sgd_phase();
  const ParamVector theta_sgd = trainer.params();

  SweepResult result;
  result.sgd_metric = evaluate_model(config, data, &spec, &theta_sgd).metric();
  for (double lr : config.sweep_swa_lr) {
    for (std::int64_t steps : config.sweep_swa_steps) {
      RepresentationTrainer branch = trainer;
      SwaState swa;
      SweepRow row;
      row.swa_lr = lr;
      row.swa_steps = steps;
      row.snapshots = branch.run_swa_phase(lr, steps, [&](const ParamVector& p) { swa_accumulate(swa, p); });
      const ParamVector& theta = swa.count > 0 ? swa.running_mean : theta_sgd;
      row.metric = evaluate_model(config, data, &spec, &theta).metric();
      result.rows.push_back(row);
    }
  }
  return result;
}

std::vector<AveragingRow> run_compare_averaging(const ExperimentConfig& config, const ExperimentData& data) {
  const MlpSpec spec = network_spec(config, data);
  const ReprTrainConfig repr = train_config(config);
  RepresentationTrainer trainer(spec, data.merged, repr);
  trainer.run_sgd_phase();
  const ParamVector theta_sgd = trainer.params();

  SwaState swa;
  std::vector<EmaState> emas;
  for (double a : config.ema_decays) {
    EmaState ema = make_ema(a);
    ema_update(ema, theta_sgd);
    emas.push_back(std::move(ema));
  }
  trainer.run_swa_phase(repr.swa_lr, repr.swa_steps, [&](const ParamVector& p) {
    swa_accumulate(swa, p);
    for (auto& ema : emas) ema_update(ema, p);
  });

  std::vector<AveragingRow> rows;
  auto add = [&](std::string variant, double decay, const ParamVector& params) {
    AveragingRow row;
    row.variant = std::move(variant);
    row.decay = decay;
    const Evaluation eval = evaluate_model(config, data, &spec, &params);
    row.metric = eval.metric();
    row.spread = eval.spread();
    const SpectrumSummary s = summarize_spectrum(meta_test_features(config, data, &spec, &params));
    row.energy_share = s.energy_share;
    row.rank_metric = s.report.metric;
    rows.push_back(std::move(row));
  };
  add("none", 0.0, theta_sgd);
  for (const auto& ema : emas) add("ema", ema.a, ema.avg);
  add("swa", 0.0, swa.count > 0 ? swa.running_mean : theta_sgd);
  add("final", 0.0, trainer.params());
  return rows;
}

// ---------------------------------------------------------------------------

CommandOutput cmd_train(const ExperimentConfig& config) {
  const ExperimentData data = load_experiment_data(config);
  const TrainedModel model = train_model(config, data);
  std::vector<PendingFile> files;
  files.push_back(PendingFile{"checkpoint.bin", {}, encode_checkpoint(model.checkpoint), true});
  files.push_back(text_file("train_log.csv", model.log_csv));
  CommandOutput out;
  out.files = flush(config.out, files);
  const auto& last = model.log.back();
  out.summary = "trained " + std::to_string(model.log.size()) + " epochs, final loss " + format_double(last.loss) +
                ", " + std::to_string(model.swa_snapshots) + " SWA snapshots";
  return out;
}

CommandOutput cmd_evaluate(const ExperimentConfig& config, const std::optional<std::filesystem::path>& checkpoint,
                           Which which) {
  config.validate();
  const ExperimentData data = load_experiment_data(config);
  const LoadedModel model = load_model(config, data, checkpoint, which);
  const Evaluation eval = evaluate_model(config, data, model.spec, model.params);

  std::vector<PendingFile> files;
  Json metrics;
  metrics["experiment"] = std::string(to_string(config.kind));
  metrics["which"] = std::string(to_string(which));
  metrics["label"] = std::string(row_label(which));
  metrics["seed"] = config.seed;
  CommandOutput out;
  if (!eval.classification) {
    const RegressionReport& r = eval.regression;
    metrics["tasks"] = r.rows.size();
    metrics["shot"] = config.sine.shot;
    metrics["mse_mean"] = r.mse_mean;
    metrics["mse_std"] = r.mse_std;
    metrics["median_noise_std"] = r.median_noise_std;
    metrics["not_converged"] = r.not_converged;
    std::string csv = "task,mse,noise_std,lambda,beta,converged\n";
    for (const auto& row : r.rows) {
      csv += std::to_string(row.task) + "," + format_double(row.mse) + "," + format_double(row.noise_std) + "," +
             format_double(row.lambda) + "," + format_double(row.beta) + "," + (row.converged ? "1" : "0") + "\n";
    }
    files.push_back(text_file("results.csv", csv));
    out.summary = std::string(row_label(which)) + ": MSE " + format_double(r.mse_mean) + " +- " +
                  format_double(r.mse_std) + ", median noise std " + format_double(r.median_noise_std);
  } else {
    const ClassificationReport& r = eval.classification_report;
    metrics["head"] = r.head == ClassifierHead::kLogReg ? "logreg" : "bayes";
    metrics["accuracy"] = r.pooled.mean;
    metrics["ci"] = r.pooled.ci95;
    metrics["ece"] = r.calibration.ece;
    metrics["mce"] = r.calibration.mce;
    metrics["brier"] = r.calibration.brier;
    metrics["accuracy_summary"] = summary_json(r.pooled);
    Json runs = Json::array();
    for (std::size_t i = 0; i < r.per_run.size(); ++i) {
      Json run = summary_json(r.per_run[i]);
      run["run"] = i;
      runs.push_back(run);
    }
    metrics["runs"] = runs;
    metrics["chosen_lambda"] = r.grid.chosen_lambda;
    metrics["chosen_temperature"] = r.grid.chosen_temperature;
    metrics["calibration_t1"] = calibration_json(r.calibration_t1);
    metrics["calibration"] = calibration_json(r.calibration);
    metrics["query_accuracy_t1"] = r.query_accuracy_t1;
    metrics["query_accuracy"] = r.query_accuracy;
    if (r.head == ClassifierHead::kBayes) {
      metrics["mcmc"] = Json{{"acceptance", r.mcmc_acceptance},
                             {"max_rhat", r.mcmc_max_rhat},
                             {"episodes_rhat_above_1_1", r.mcmc_unmixed_episodes}};
    }

    std::string csv = "run,episode,accuracy\n";
    for (const auto& row : r.rows) {
      csv += std::to_string(row.run) + "," + std::to_string(row.episode) + "," + format_double(row.accuracy) + "\n";
    }
    files.push_back(text_file("results.csv", csv));
    files.push_back(text_file("reliability.csv", reliability_csv(r.calibration)));
    files.push_back(text_file("reliability_t1.csv", reliability_csv(r.calibration_t1)));
    if (r.head == ClassifierHead::kLogReg) {
      std::string lambda_csv = "lambda,run,accuracy\n";
      for (const auto& row : r.grid.lambda_table) {
        lambda_csv += format_double(row.lambda) + "," + std::to_string(row.run) + "," + format_double(row.accuracy) + "\n";
      }
      std::string t_csv = "temperature,ece,accuracy\n";
      for (const auto& row : r.grid.temperature_table) {
        t_csv += format_double(row.temperature) + "," + format_double(row.ece) + "," + format_double(row.accuracy) + "\n";
      }
      files.push_back(text_file("lambda_grid.csv", lambda_csv));
      files.push_back(text_file("temperature_grid.csv", t_csv));
    }
    out.summary = std::string(row_label(which)) + ": accuracy " + format_double(r.pooled.mean) + " +- " +
                  format_double(r.pooled.ci95) + ", ECE " + format_double(r.calibration_t1.ece) + " -> " +
                  format_double(r.calibration.ece) + " at T = " + format_double(r.grid.chosen_temperature);
  }
  files.insert(files.begin(), text_file("metrics.json", dump(metrics)));
  out.files = flush(config.out, files);
  return out;
}

CommandOutput cmd_spectrum(const ExperimentConfig& config, const std::optional<std::filesystem::path>& checkpoint,
                           Which which) {
  config.validate();
  const ExperimentData data = load_experiment_data(config);
  const LoadedModel model = load_model(config, data, checkpoint, which);
  const SpectrumSummary s = summarize_spectrum(meta_test_features(config, data, model.spec, model.params));
  std::string csv = "index,sigma,sigma_norm\n";
  for (Eigen::Index i = 0; i < s.report.sigma.size(); ++i) {
    csv += std::to_string(i) + "," + format_double(s.report.sigma(i)) + "," + format_double(s.report.normalized(i)) + "\n";
  }
  CommandOutput out;
  out.files = flush(config.out, {text_file("spectrum.csv", csv)});
  out.summary = s.report.degenerate
                    ? "spectrum: degenerate (all-zero features)"
                    : "spectrum metric " + format_double(s.report.metric) + ", top-" + std::to_string(s.k) +
                          " energy share " + format_double(s.energy_share);
  return out;
}

CommandOutput cmd_sweep(const ExperimentConfig& config) {
  const ExperimentData data = load_experiment_data(config);
  const SweepResult result = run_sweep(config, data);
  std::string csv = "swa_lr,swa_steps,snapshots,metric,sgd_metric\n";
  double lo = result.rows.front().metric;
  double hi = lo;
  for (const auto& row : result.rows) {
    csv += format_double(row.swa_lr) + "," + std::to_string(row.swa_steps) + "," + std::to_string(row.snapshots) +
           "," + format_double(row.metric) + "," + format_double(result.sgd_metric) + "\n";
    lo = std::min(lo, row.metric);
    hi = std::max(hi, row.metric);
  }
  CommandOutput out;
  out.files = flush(config.out, {text_file("sweep.csv", csv)});
  out.summary = std::to_string(result.rows.size()) + " grid points, metric range [" + format_double(lo) + ", " +
                format_double(hi) + "], without SWA " + format_double(result.sgd_metric);
  return out;
}

CommandOutput cmd_compare_averaging(const ExperimentConfig& config) {
  const ExperimentData data = load_experiment_data(config);
  const auto rows = run_compare_averaging(config, data);
  std::string csv = "variant,decay,metric,spread,energy_share,rank_metric\n";
  std::string summary;
  for (const auto& row : rows) {
    csv += row.variant + "," + format_double(row.decay) + "," + format_double(row.metric) + "," +
           format_double(row.spread) + "," + format_double(row.energy_share) + "," + format_double(row.rank_metric) + "\n";
    summary += row.variant + (row.variant == "ema" ? " " + format_double(row.decay) : "") + ": " +
               format_double(row.metric) + "\n";
  }
  CommandOutput out;
  out.files = flush(config.out, {text_file("averaging.csv", csv)});
  if (!summary.empty()) summary.pop_back();
  out.summary = summary;
  return out;
}

}  // namespace mfrl
