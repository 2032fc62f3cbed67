#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mfrl/bayes_cls.hpp"
#include "mfrl/bayes_reg.hpp"
#include "mfrl/calib.hpp"
#include "mfrl/logreg.hpp"
#include "mfrl/nn.hpp"
#include "mfrl/tasks.hpp"

namespace mfrl {

// N-way k-shot protocol. Test evaluation draws runs x episodes episodes,
// meta-validation draws runs x validation_episodes. Every episode has its
// own stream derived from (seed, split, run, episode).
struct EpisodeProtocol {
  int way = 5;
  int shot = 5;
  int query = 15;  // per class
  int runs = 5;
  int episodes = 600;
  int validation_episodes = 600;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class ClassifierHead { kLogReg, kBayes };

std::vector<double> default_lambda_grid();       // 1e-3 .. 1e2, 11 log-spaced points
std::vector<double> default_temperature_grid();  // 0.5 .. 5.0 step 0.25

struct ClassificationHeadConfig {
  ClassifierHead head = ClassifierHead::kLogReg;
  std::vector<double> lambda_grid = default_lambda_grid();
  std::vector<double> temperature_grid = default_temperature_grid();
  LogRegOptions logreg;
  McmcConfig mcmc;
  int bins = kDefaultCalibrationBins;
};

// Normalized design rows plus the per-class row index used by the sampler.
struct EpisodeSource {
  Matrix phi;  // n x (p+1), rows [h/|h| ; 1]
  std::vector<std::vector<std::size_t>> class_rows;
  SplitSpec split;
};

// features: n x p raw backbone features aligned with data's rows.
EpisodeSource make_episode_source(const Matrix& features, const LabeledDataset& data);

Episode episode_at(const EpisodeSource& source, Split split, const EpisodeProtocol& protocol,
                   int run, int episode);

struct EpisodeOutcome {
  Matrix logits;  // query x way at T = 1 (empty for the Bayesian head)
  Matrix probs;   // query x way at T = 1
  std::vector<int> labels;
  double accuracy = 0.0;
  // Bayesian head only: mean post-warmup acceptance and the largest split
  // R-hat over coordinates (1 with a single chain).
  double mcmc_acceptance = 0.0;
  double mcmc_max_rhat = 0.0;
};

EpisodeOutcome run_logreg_episode(const EpisodeSource& source, const Episode& episode,
                                  double lambda, const LogRegOptions& options = {});

EpisodeOutcome run_bayes_episode(const EpisodeSource& source, const Episode& episode,
                                 const McmcConfig& config);

struct LambdaRow {
  double lambda = 0.0;
  int run = 0;
  double accuracy = 0.0;  // mean query accuracy over the run's episodes
};

struct TemperatureRow {
  double temperature = 1.0;
  double ece = 0.0;       // pooled over all validation query predictions
  double accuracy = 0.0;  // pooled query accuracy
};

struct GridSearchResult {
  std::vector<double> lambda_grid;
  std::vector<double> temperature_grid;
  double chosen_lambda = 0.0;
  double chosen_temperature = 1.0;
  std::vector<LambdaRow> lambda_table;
  std::vector<TemperatureRow> temperature_table;
  // Validation outcomes at chosen_lambda, kept for select_temperature.
  std::vector<EpisodeOutcome> validation_outcomes;
};

// Fits per-episode models at T = 1 for each lambda and keeps the one with
// the best mean validation accuracy (ties go to the smaller lambda).
GridSearchResult select_lambda(const EpisodeSource& source, const EpisodeProtocol& protocol,
                               std::span<const double> lambda_grid,
                               const LogRegOptions& options = {});

// Pools the validation predictions and picks the temperature with the
// lowest ECE (ties go to the temperature closest to 1).
void select_temperature(GridSearchResult& result, std::span<const double> temperature_grid,
                        int bins = kDefaultCalibrationBins);

struct EpisodeResultRow {
  int run = 0;
  int episode = 0;
  double accuracy = 0.0;
};

struct ClassificationReport {
  ClassifierHead head = ClassifierHead::kLogReg;
  GridSearchResult grid;
  std::vector<EpisodeResultRow> rows;
  std::vector<AccuracySummary> per_run;
  AccuracySummary pooled;
  // Pooled test query predictions at T = 1 and at the chosen T.
  CalibrationReport calibration_t1;
  CalibrationReport calibration;
  double query_accuracy_t1 = 0.0;
  double query_accuracy = 0.0;
  // Bayesian head: acceptance averaged over episodes, worst R-hat seen, and
  // the number of episodes whose worst R-hat exceeds 1.1.
  double mcmc_acceptance = 0.0;
  double mcmc_max_rhat = 0.0;
  int mcmc_unmixed_episodes = 0;
};

ClassificationReport evaluate_classification(const EpisodeSource& source,
                                             const EpisodeProtocol& protocol,
                                             const ClassificationHeadConfig& head);

// ---------------------------------------------------------------------------

struct RegressionProtocol {
  int shot = 10;
  std::uint64_t seed = 0;
  HyperPrior hyper;
  EvidenceOptions evidence;
};

struct RegressionTaskRow {
  int task = 0;
  double mse = 0.0;  // over the task's non-support samples
  double noise_std = 0.0;
  double lambda = 0.0;
  double beta = 0.0;
  bool converged = true;
};

struct RegressionReport {
  std::vector<RegressionTaskRow> rows;
  double mse_mean = 0.0;
  double mse_std = 0.0;
  double median_noise_std = 0.0;
  int not_converged = 0;
};

// Per task: shot support samples, evidence fit on [h(x); 1], MSE on the rest.
// A fit that hits max_iter keeps its last iterate and is counted.
RegressionReport evaluate_regression(const MlpSpec& spec, const ParamVector& params,
                                     std::span<const RegressionTask> tasks,
                                     const RegressionProtocol& protocol);

// ---------------------------------------------------------------------------

// Rows of features whose split tag matches.
Matrix split_rows(const Matrix& features, const LabeledDataset& data, Split split);

struct SpectrumSummary {
  SpectrumReport report;
  int k = 0;                // ceil(p / 4)
  double energy_share = 0.0;  // top-k cumulative sigma^2 share
};

SpectrumSummary summarize_spectrum(const Matrix& features);

}  // namespace mfrl
