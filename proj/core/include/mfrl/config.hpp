#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mfrl/bayes_reg.hpp"
#include "mfrl/checkpoint.hpp"
#include "mfrl/eval.hpp"
#include "mfrl/nn.hpp"
#include "mfrl/repr_train.hpp"
#include "mfrl/tasks.hpp"

namespace mfrl {

enum class ExperimentKind { kSineRegression, kSyntheticClassification, kFeatureFileClassification };

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view name);

struct SineDataConfig {
  int tasks_per_split = 500;
  int samples_per_task = kSineSamplesPerTask;
  int shot = 10;
};

// One experiment, fully resolved. A single seed drives data generation,
// initialization, minibatch order, episode sampling and MCMC chains.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kSineRegression;
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";

  // Backbone (ignored for feature files). The top layer is sized from the
  // training data: one head per task or class.
  std::vector<int> hidden{40, 40};
  Activation activation = Activation::kErf;
  bool bias = true;

  ReprTrainConfig repr;
  SineDataConfig sine;
  BlobConfig blob;
  std::filesystem::path feature_file;

  HyperPrior hyper;
  EvidenceOptions evidence;
  ClassificationHeadConfig head;
  EpisodeProtocol episodes;

  std::vector<double> sweep_swa_lr;
  std::vector<std::int64_t> sweep_swa_steps;
  std::vector<double> ema_decays{0.9, 0.99, 0.999};
  // Row cap for the pooled meta-test feature matrix (0 = all rows).
  int spectrum_max_rows = 0;

  // Sets seed and every derived seed field (data, training, episodes, MCMC).
  void set_seed(std::uint64_t value);

  bool is_classification() const { return kind != ExperimentKind::kSineRegression; }
  bool trains_backbone() const { return kind != ExperimentKind::kFeatureFileClassification; }

  void validate() const;
};

// Defaults for each experiment kind (sine: 1-40-40-1 erf network trained by
// iterations; synthetic classification: 32-64-64 relu trained by epochs).
ExperimentConfig default_config(ExperimentKind kind);

// Plain-text config: "key = value" lines, '#' comments, dotted keys such as
// repr.steps. The experiment key selects the defaults the other keys
// override; unknown or repeated keys are rejected with their line number.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

// Every key with its resolved value, one "key = value" line each, in a
// fixed order. parse_config(render_config(c)) reproduces c.
std::string render_config(const ExperimentConfig& config);

// SHA-256 over the keys that influence training (data generation, backbone,
// optimizer, seed). Evaluation-only keys are excluded so one checkpoint can
// be evaluated under different episode protocols.
Digest training_config_hash(const ExperimentConfig& config);

}  // namespace mfrl
