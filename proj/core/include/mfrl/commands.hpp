#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mfrl/checkpoint.hpp"
#include "mfrl/config.hpp"
#include "mfrl/eval.hpp"
#include "mfrl/repr_train.hpp"

namespace mfrl {

enum class Which { kSgd, kSwa };

Which parse_which(std::string_view name);
std::string_view to_string(Which which);
// Result-row label: "MFRL" for the averaged weights, "MFRL (w.o. SWA)" otherwise.
std::string_view row_label(Which which);

// Everything an experiment reads, generated (or loaded) from its config.
// Trainers keep a pointer to `merged`, so keep this object in place while
// training.
struct ExperimentData {
  ExperimentKind kind = ExperimentKind::kSineRegression;
  std::vector<RegressionTask> test_tasks;  // sine
  LabeledDataset labeled;                  // classification
  MergedDataset merged;                    // training set
};

ExperimentData load_experiment_data(const ExperimentConfig& config);

// Backbone with the output layer sized for the training data.
MlpSpec network_spec(const ExperimentConfig& config, const ExperimentData& data);

ReprTrainConfig train_config(const ExperimentConfig& config);

struct TrainedModel {
  Checkpoint checkpoint;
  std::vector<TrainLogEntry> log;
  std::string log_csv;
  std::int64_t swa_snapshots = 0;
};

TrainedModel train_model(const ExperimentConfig& config, const ExperimentData& data);

// epoch,loss,lr,phase
std::string train_log_csv(const std::vector<TrainLogEntry>& log);

struct Evaluation {
  bool classification = false;
  RegressionReport regression;
  ClassificationReport classification_report;

  // Mean test MSE (regression) or mean episode accuracy (classification).
  double metric() const;
  // MSE standard deviation over tasks, or the 95% CI half-width.
  double spread() const;
};

// params may be null for feature-file experiments, which evaluate the file's
// features directly.
Evaluation evaluate_model(const ExperimentConfig& config, const ExperimentData& data,
                          const MlpSpec* spec, const ParamVector* params);

// Pooled meta-test features (row-capped by spectrum.max_rows).
Matrix meta_test_features(const ExperimentConfig& config, const ExperimentData& data,
                          const MlpSpec* spec, const ParamVector* params);

struct SweepRow {
  double swa_lr = 0.0;
  std::int64_t swa_steps = 0;
  std::int64_t snapshots = 0;
  double metric = 0.0;
};

struct SweepResult {
  double sgd_metric = 0.0;  // theta_sgd, shared by every row
  std::vector<SweepRow> rows;
};

// One SGD trajectory; each grid point continues a copy of it with its own
// SWA phase.
SweepResult run_sweep(const ExperimentConfig& config, const ExperimentData& data);

struct AveragingRow {
  std::string variant;  // none, ema, swa, final
  double decay = 0.0;   // EMA decay, 0 otherwise
  double metric = 0.0;
  double spread = 0.0;
  double energy_share = 0.0;
  double rank_metric = 0.0;
};

// Variants: no averaging (theta_sgd), EMA for each configured decay
// (initialized at theta_sgd, updated with every SWA-phase snapshot), SWA,
// and the final iterate of the continued trajectory for reference.
std::vector<AveragingRow> run_compare_averaging(const ExperimentConfig& config,
                                                const ExperimentData& data);

// ---------------------------------------------------------------------------
// Commands: compute first, then write every output file under config.out.

struct CommandOutput {
  std::vector<std::filesystem::path> files;
  std::string summary;  // short human-readable report for stdout
};

CommandOutput cmd_train(const ExperimentConfig& config);
CommandOutput cmd_evaluate(const ExperimentConfig& config,
                           const std::optional<std::filesystem::path>& checkpoint, Which which);
CommandOutput cmd_spectrum(const ExperimentConfig& config,
                           const std::optional<std::filesystem::path>& checkpoint, Which which);
CommandOutput cmd_sweep(const ExperimentConfig& config);
CommandOutput cmd_compare_averaging(const ExperimentConfig& config);

}  // namespace mfrl
