#include "mfrl/repr_train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "mfrl/averaging.hpp"
#include "mfrl/error.hpp"

namespace mfrl {

std::string_view to_string(LossKind kind) {
  return kind == LossKind::kMse ? "mse" : "ce";
}

MergedDataset merge_tasks(std::span<const RegressionTask> tasks) {
  if (tasks.empty()) throw ConfigError("merge_tasks: empty task list");
  const Eigen::Index dim = tasks.front().x.cols();
  Eigen::Index total = 0;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (tasks[t].x.cols() != dim) {
      throw DimensionError("merge_tasks: task " + std::to_string(t) + " has input_dim " +
                           std::to_string(tasks[t].x.cols()) + ", expected " + std::to_string(dim));
    }
    if (tasks[t].y.size() != tasks[t].x.rows()) {
      throw DimensionError("merge_tasks: task " + std::to_string(t) + " has mismatched x/y rows");
    }
    total += tasks[t].x.rows();
  }
  MergedDataset merged;
  merged.kind = LossKind::kMse;
  merged.x.resize(total, dim);
  merged.y.resize(total);
  merged.group.reserve(static_cast<std::size_t>(total));
  merged.group_count = static_cast<int>(tasks.size());
  Eigen::Index row = 0;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto n = tasks[t].x.rows();
    merged.x.middleRows(row, n) = tasks[t].x;
    merged.y.segment(row, n) = tasks[t].y;
    merged.group.insert(merged.group.end(), static_cast<std::size_t>(n), static_cast<int>(t));
    merged.group_sizes.push_back(static_cast<std::size_t>(n));
    row += n;
  }
  return merged;
}

MergedDataset merge_tasks(std::span<const SineTask> tasks) {
  std::vector<RegressionTask> plain;
  plain.reserve(tasks.size());
  for (const auto& t : tasks) plain.push_back(t.data);
  return merge_tasks(std::span<const RegressionTask>(plain));
}

MergedDataset merge_classes(const LabeledDataset& data, Split split) {
  std::map<int, int> dense;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (data.split[i] == split) {
      dense.emplace(data.labels[i], 0);
      rows.push_back(i);
    }
  }
  if (rows.empty()) throw ConfigError("merge_classes: split has no samples");
  MergedDataset merged;
  merged.kind = LossKind::kCrossEntropy;
  int next = 0;
  for (auto& [original, id] : dense) {
    id = next++;
    merged.class_ids.push_back(original);
  }
  merged.group_count = next;
  merged.group_sizes.assign(static_cast<std::size_t>(next), 0);
  merged.x.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  merged.group.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    merged.x.row(static_cast<Eigen::Index>(r)) = data.features.row(static_cast<Eigen::Index>(rows[r]));
    const int id = dense.at(data.labels[rows[r]]);
    merged.group.push_back(id);
    ++merged.group_sizes[static_cast<std::size_t>(id)];
  }
  return merged;
}

LossResult mse_multitask_loss(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                              const Vector& y, std::span<const int> tasks, double normalizer) {
  const auto n = x.rows();
  if (y.size() != n || static_cast<Eigen::Index>(tasks.size()) != n) {
    throw DimensionError("mse_multitask_loss: x, y and task ids disagree on batch size");
  }
  const ForwardPass pass = forward_features(spec, params, x);
  const std::size_t top = spec.hidden_dims.size();
  const auto w = params.block(2 * top);
  const auto b = params.block(2 * top + 1);
  const Matrix& h = pass.features();
  const double scale = normalizer > 0.0 ? normalizer : static_cast<double>(n);

  LossResult out{0.0, ParamVector::zeros_like(params)};
  auto gw = out.grad.block(2 * top);
  auto gb = out.grad.block(2 * top + 1);
  Matrix d_features(n, h.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = tasks[static_cast<std::size_t>(i)];
    if (t < 0 || t >= spec.output_dim) {
      throw DimensionError("mse_multitask_loss: unknown task id " + std::to_string(t) +
                           " at batch index " + std::to_string(i));
    }
    const double r = w.row(t).dot(h.row(i)) + b(t, 0) - y(i);
    out.loss += r * r;
    const double g = r / scale;
    gw.row(t).noalias() += g * h.row(i);
    gb(t, 0) += g;
    d_features.row(i) = g * w.row(t);
  }
  out.loss /= 2.0 * scale;
  if (top > 0) backward_features(spec, params, pass, std::move(d_features), out.grad);
  return out;
}

LossResult ce_loss(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                   std::span<const int> labels) {
  const auto n = x.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw DimensionError("ce_loss: labels and batch disagree on size");
  }
  const ForwardPass pass = forward(spec, params, x);
  Matrix d_logits = pass.outputs;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= spec.output_dim) {
      throw DimensionError("ce_loss: label " + std::to_string(c) + " out of range [0, " +
                           std::to_string(spec.output_dim) + ") at batch index " + std::to_string(i));
    }
    auto row = d_logits.row(i);
    const double max = row.maxCoeff();
    row.array() = (row.array() - max).exp();
    const double z = row.sum();
    loss += std::log(z) + max - pass.outputs(i, c);
    row /= z;
    row(c) -= 1.0;
  }
  d_logits /= static_cast<double>(n);
  return {loss / static_cast<double>(n), backward(spec, params, pass, d_logits)};
}

double dataset_loss(const MlpSpec& spec, const ParamVector& params, const MergedDataset& data) {
  if (data.kind == LossKind::kMse) {
    return mse_multitask_loss(spec, params, data.x, data.y, data.group).loss;
  }
  return ce_loss(spec, params, data.x, data.group).loss;
}

void ReprTrainConfig::validate() const {
  if (steps < 0) throw ConfigError("repr: steps must be >= 0");
  if (batch_size < 1) throw ConfigError("repr: batch_size must be >= 1");
  if (!(base_lr > 0.0)) throw ConfigError("repr: base_lr must be > 0");
  if (swa_steps < 0) throw ConfigError("repr: swa_steps must be >= 0");
  if (swa_steps > 0 && !(swa_lr > 0.0)) throw ConfigError("repr: swa_lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("repr: momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("repr: weight_decay must be >= 0");
  if (!(gamma > 0.0)) throw ConfigError("repr: gamma must be > 0");
  if (snapshot_every < 0) throw ConfigError("repr: snapshot_every must be >= 0");
  for (std::size_t i = 1; i < milestones.size(); ++i) {
    if (milestones[i] <= milestones[i - 1]) {
      throw ConfigError("repr: milestones must be strictly increasing");
    }
  }
}

MlpSpec with_output_heads(MlpSpec backbone, const MergedDataset& data) {
  backbone.output_dim = data.group_count;
  return backbone;
}

RepresentationTrainer::RepresentationTrainer(MlpSpec spec, const MergedDataset& data,
                                             ReprTrainConfig config)
    : spec_(std::move(spec)), data_(&data), config_(std::move(config)), rng_(0) {
  config_.validate();
  spec_.validate();
  if (data.size() == 0) throw ConfigError("repr: empty training set");
  if (data.x.cols() != spec_.input_dim) {
    throw DimensionError("repr: dataset input_dim " + std::to_string(data.x.cols()) +
                         " != backbone input_dim " + std::to_string(spec_.input_dim));
  }
  if (spec_.output_dim != data.group_count) {
    throw DimensionError("repr: top layer has " + std::to_string(spec_.output_dim) +
                         " outputs but the dataset has " + std::to_string(data.group_count) +
                         " tasks/classes");
  }
  if (config_.loss != data.kind) throw ConfigError("repr: loss kind does not match dataset kind");
  params_ = init_params(spec_, config_.seed);
  sgd_.momentum = config_.momentum;
  sgd_.weight_decay = config_.weight_decay;
  rng_ = Rng(derive_seed(config_.seed, 0xba7c4));
  order_.resize(data.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  rng_.shuffle(std::span<std::size_t>(order_));
}

std::int64_t RepresentationTrainer::iterations_per_epoch() const {
  const auto n = static_cast<std::int64_t>(data_->size());
  return (n + config_.batch_size - 1) / config_.batch_size;
}

LossResult RepresentationTrainer::batch_loss(std::span<const std::size_t> rows) const {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix x(n, data_->x.cols());
  std::vector<int> group(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = data_->x.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
    group[static_cast<std::size_t>(i)] = data_->group[rows[static_cast<std::size_t>(i)]];
  }
  if (data_->kind == LossKind::kMse) {
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = data_->y(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
    return mse_multitask_loss(spec_, params_, x, y, group);
  }
  return ce_loss(spec_, params_, x, group);
}

double RepresentationTrainer::step(double lr, bool swa) {
  const std::size_t end = std::min(order_.size(), cursor_ + static_cast<std::size_t>(config_.batch_size));
  const std::span<const std::size_t> rows(order_.data() + cursor_, end - cursor_);
  LossResult result;
  try {
    result = batch_loss(rows);
    if (!std::isfinite(result.loss)) throw NumericError("non-finite loss");
    sgd_step(params_, result.grad, lr, sgd_);
  } catch (const NumericError& e) {
    throw NumericError("training diverged in epoch " + std::to_string(epoch_) + ": " + e.what());
  }
  epoch_loss_ += result.loss * static_cast<double>(rows.size());
  cursor_ = end;
  if (cursor_ == order_.size()) {
    log_.push_back({epoch_, epoch_loss_ / static_cast<double>(order_.size()), lr, swa});
    ++epoch_;
    epoch_loss_ = 0.0;
    cursor_ = 0;
    rng_.shuffle(std::span<std::size_t>(order_));
  }
  return result.loss;
}

void RepresentationTrainer::run_epoch(double lr, bool swa) {
  const std::int64_t start = epoch_;
  while (epoch_ == start) step(lr, swa);
}

void RepresentationTrainer::run_sgd_phase() {
  const auto& c = config_;
  for (std::int64_t s = 0; s < c.steps; ++s) {
    const double lr = lr_at(s, c.base_lr, c.milestones, c.gamma);
    if (c.unit == StepUnit::kEpochs) {
      run_epoch(lr, false);
    } else {
      step(lr, false);
    }
  }
}

std::int64_t RepresentationTrainer::run_swa_phase(double lr, std::int64_t steps,
                                                  const SnapshotCallback& on_snapshot) {
  if (steps <= 0) return 0;
  if (!(lr > 0.0)) throw ConfigError("repr: swa_lr must be > 0");
  std::int64_t snapshots = 0;
  if (config_.unit == StepUnit::kEpochs) {
    for (std::int64_t s = 0; s < steps; ++s) {
      run_epoch(lr, true);
      on_snapshot(params_);
      ++snapshots;
    }
    return snapshots;
  }
  std::int64_t every = config_.snapshot_every > 0 ? config_.snapshot_every : iterations_per_epoch();
  every = std::min(every, steps);
  for (std::int64_t s = 1; s <= steps; ++s) {
    step(lr, true);
    if (s % every == 0) {
      on_snapshot(params_);
      ++snapshots;
    }
  }
  return snapshots;
}

TrainResult train_representation(const MlpSpec& spec, const MergedDataset& data,
                                  const ReprTrainConfig& config) {
  RepresentationTrainer trainer(spec, data, config);
  trainer.run_sgd_phase();
  TrainResult result;
  result.theta_sgd = trainer.params();
  SwaState swa;
  result.swa_snapshots = trainer.run_swa_phase(
      config.swa_lr, config.swa_steps, [&](const ParamVector& p) { swa_accumulate(swa, p); });
  result.has_swa = swa.count > 0;
  result.theta_swa = result.has_swa ? swa.running_mean : result.theta_sgd;
  result.log = trainer.log();
  return result;
}

Matrix extract_features(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                        bool append_bias) {
  ForwardPass pass = forward_features(spec, params, x);
  if (!append_bias) return std::move(pass.act.back());
  Matrix phi(x.rows(), pass.features().cols() + 1);
  phi.leftCols(pass.features().cols()) = pass.features();
  phi.col(phi.cols() - 1).setOnes();
  return phi;
}

}  // namespace mfrl
