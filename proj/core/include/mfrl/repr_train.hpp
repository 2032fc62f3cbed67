#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "mfrl/nn.hpp"
#include "mfrl/rng.hpp"
#include "mfrl/tasks.hpp"

namespace mfrl {

enum class LossKind { kMse, kCrossEntropy };

std::string_view to_string(LossKind kind);

// All meta-training tasks (regression) or classes (classification) merged
// into one dataset. group[i] is the task id (mse) or dense class id (ce).
struct MergedDataset {
  LossKind kind = LossKind::kMse;
  Matrix x;
  Vector y;  // regression targets; empty for classification
  std::vector<int> group;
  int group_count = 0;
  std::vector<std::size_t> group_sizes;
  // Dense class id -> original class id (classification only).
  std::vector<int> class_ids;

  std::size_t size() const { return group.size(); }
};

MergedDataset merge_tasks(std::span<const RegressionTask> tasks);
MergedDataset merge_tasks(std::span<const SineTask> tasks);

// Rows of `data` tagged with `split`, class ids remapped densely in
// ascending order of the original id.
MergedDataset merge_classes(const LabeledDataset& data, Split split);

struct LossResult {
  double loss = 0.0;
  ParamVector grad;
};

// Multi-head squared loss: (1 / (2 * normalizer)) * sum_i (y_i - w_{t_i}^T [h(x_i); 1])^2.
// The top layer has one output per task; only the selected head is touched.
// normalizer <= 0 means "batch size", making the expectation over uniform
// batches equal to the full-dataset loss.
LossResult mse_multitask_loss(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                              const Vector& y, std::span<const int> tasks, double normalizer = 0.0);

// Mean softmax cross-entropy over the batch (log-sum-exp stabilized).
LossResult ce_loss(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                   std::span<const int> labels);

// Full-dataset loss with frozen parameters.
double dataset_loss(const MlpSpec& spec, const ParamVector& params, const MergedDataset& data);

enum class StepUnit { kEpochs, kIterations };

struct ReprTrainConfig {
  LossKind loss = LossKind::kCrossEntropy;
  StepUnit unit = StepUnit::kEpochs;
  std::int64_t steps = 100;  // SGD phase length in `unit`
  int batch_size = 64;
  double base_lr = 0.05;
  std::vector<std::int64_t> milestones{60, 80, 90};
  double gamma = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::int64_t swa_steps = 100;  // SWA phase length in `unit`
  double swa_lr = 0.02;
  // Iteration mode only: SWA snapshot interval; 0 means one data epoch.
  std::int64_t snapshot_every = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainLogEntry {
  std::int64_t epoch = 0;  // data epoch index, counted over both phases
  double loss = 0.0;       // sample-weighted mean batch loss over the epoch
  double lr = 0.0;         // learning rate at the end of the epoch
  bool swa = false;
};

struct TrainResult {
  ParamVector theta_sgd;
  ParamVector theta_swa;  // equals theta_sgd when swa_steps == 0
  bool has_swa = false;
  std::int64_t swa_snapshots = 0;
  std::vector<TrainLogEntry> log;
};

using SnapshotCallback = std::function<void(const ParamVector&)>;

// Stateful minibatch trainer. Copyable: a copy taken after run_sgd_phase()
// continues with an identical RNG/sampler state, which is how sweeps share
// one SGD trajectory across several SWA settings.
class RepresentationTrainer {
 public:
  RepresentationTrainer(MlpSpec spec, const MergedDataset& data, ReprTrainConfig config);

  // Runs config.steps epochs/iterations with the milestone schedule.
  void run_sgd_phase();

  // Continues at constant lr for `steps` epochs/iterations and reports each
  // end-of-epoch (or every snapshot_every iterations) snapshot. Returns the
  // number of snapshots taken.
  std::int64_t run_swa_phase(double lr, std::int64_t steps, const SnapshotCallback& on_snapshot);

  const MlpSpec& spec() const { return spec_; }
  const ParamVector& params() const { return params_; }
  const std::vector<TrainLogEntry>& log() const { return log_; }
  const ReprTrainConfig& config() const { return config_; }
  std::int64_t iterations_per_epoch() const;

 private:
  // One minibatch update; returns the batch loss. Closes the data epoch (and
  // appends a log entry) when the permutation is exhausted.
  double step(double lr, bool swa);
  void run_epoch(double lr, bool swa);
  LossResult batch_loss(std::span<const std::size_t> rows) const;

  MlpSpec spec_;
  const MergedDataset* data_;
  ReprTrainConfig config_;
  ParamVector params_;
  SgdState sgd_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::int64_t epoch_ = 0;
  double epoch_loss_ = 0.0;
  std::vector<TrainLogEntry> log_;
};

// Top-layer width for a merged dataset: one head per task or class.
MlpSpec with_output_heads(MlpSpec backbone, const MergedDataset& data);

// SGD phase to theta_T followed by the SWA phase.
TrainResult train_representation(const MlpSpec& spec, const MergedDataset& data,
                                 const ReprTrainConfig& config);

// Feature matrix Phi for a frozen backbone: rows h(x), or [h(x), 1] with
// append_bias. The top layer is ignored.
Matrix extract_features(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                        bool append_bias);

}  // namespace mfrl
