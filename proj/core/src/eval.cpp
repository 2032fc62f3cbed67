#include "mfrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mfrl/error.hpp"
#include "mfrl/parallel.hpp"
#include "mfrl/repr_train.hpp"

namespace mfrl {

namespace {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

double accuracy_of(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows() == 0) return 0.0;
  int hits = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) hits += argmax(probs.row(i)) == labels[static_cast<std::size_t>(i)] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

std::span<const int> split_classes(const SplitSpec& split, Split which) {
  switch (which) {
    case Split::kTrain: return split.train;
    case Split::kValidation: return split.validation;
    case Split::kTest: return split.test;
  }
  return split.test;
}

struct Pooled {
  Matrix probs;
  std::vector<int> labels;
};

Pooled pool(const std::vector<EpisodeOutcome>& outcomes, double temperature) {
  Eigen::Index total = 0;
  for (const auto& o : outcomes) total += o.probs.rows();
  Pooled p;
  p.probs.resize(total, outcomes.empty() ? 0 : outcomes.front().probs.cols());
  Eigen::Index at = 0;
  for (const auto& o : outcomes) {
    const Matrix probs = temperature == 1.0 || o.logits.size() == 0 ? o.probs : softmax_rows(o.logits, temperature);
    p.probs.middleRows(at, probs.rows()) = probs;
    at += probs.rows();
    p.labels.insert(p.labels.end(), o.labels.begin(), o.labels.end());
  }
  return p;
}

void check_grid(std::span<const double> grid, const std::string& name, bool strictly_positive) {
  if (grid.empty()) throw ConfigError(name + " grid is empty");
  for (double v : grid) {
    if (strictly_positive ? !(v > 0.0) : !(v >= 0.0)) {
      throw ConfigError(name + " grid value " + std::to_string(v) + (strictly_positive ? " must be > 0" : " must be >= 0"));
    }
  }
}

}  // namespace

void EpisodeProtocol::validate() const {
  if (way < 2) throw ConfigError("episodes: way must be >= 2");
  if (shot < 1) throw ConfigError("episodes: shot must be >= 1");
  if (query < 1) throw ConfigError("episodes: query must be >= 1");
  if (runs < 1) throw ConfigError("episodes: runs must be >= 1");
  if (episodes < 1) throw ConfigError("episodes: episode count must be >= 1");
  if (validation_episodes < 1) throw ConfigError("episodes: validation episode count must be >= 1");
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(std::pow(10.0, -3.0 + 0.5 * i));
  return grid;
}

std::vector<double> default_temperature_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 18; ++i) grid.push_back(0.5 + 0.25 * i);
  return grid;
}

EpisodeSource make_episode_source(const Matrix& features, const LabeledDataset& data) {
  if (features.rows() != static_cast<Eigen::Index>(data.size())) {
    throw DimensionError("episodes: " + std::to_string(features.rows()) + " feature rows for " +
                         std::to_string(data.size()) + " labels");
  }
  EpisodeSource source;
  source.phi = normalize_feature_rows(features);
  source.class_rows = rows_by_class(data);
  source.split = data.split_spec();
  return source;
}

Episode episode_at(const EpisodeSource& source, Split split, const EpisodeProtocol& protocol,
                   int run, int episode) {
  Rng rng(derive_seed(derive_seed(protocol.seed, 0xe915, static_cast<std::uint64_t>(split)),
                      static_cast<std::uint64_t>(run), static_cast<std::uint64_t>(episode)));
  return sample_episode(source.class_rows, split_classes(source.split, split), protocol.way,
                        protocol.shot, protocol.query, rng);
}

EpisodeOutcome run_logreg_episode(const EpisodeSource& source, const Episode& episode,
                                  double lambda, const LogRegOptions& options) {
  const Matrix support = gather_rows(source.phi, episode.support_rows);
  const Matrix query = gather_rows(source.phi, episode.query_rows);
  const LogRegModel model = fit_logreg(support, episode.support_labels, episode.way, lambda, options);
  EpisodeOutcome out;
  out.logits = query * model.weights;
  out.probs = softmax_rows(out.logits, 1.0);
  out.labels = episode.query_labels;
  out.accuracy = accuracy_of(out.probs, out.labels);
  return out;
}

EpisodeOutcome run_bayes_episode(const EpisodeSource& source, const Episode& episode,
                                 const McmcConfig& config) {
  const Matrix support = gather_rows(source.phi, episode.support_rows);
  const Matrix query = gather_rows(source.phi, episode.query_rows);
  const PosteriorSampleSet samples = fit_mcmc(support, episode.support_labels, episode.way, config);
  EpisodeOutcome out;
  out.probs = predict_mc_rows(samples, query);
  out.labels = episode.query_labels;
  out.accuracy = accuracy_of(out.probs, out.labels);
  out.mcmc_acceptance = samples.acceptance_rate;
  out.mcmc_max_rhat = samples.rhat.empty() ? 1.0 : *std::max_element(samples.rhat.begin(), samples.rhat.end());
  return out;
}

GridSearchResult select_lambda(const EpisodeSource& source, const EpisodeProtocol& protocol,
                               std::span<const double> lambda_grid, const LogRegOptions& options) {
  protocol.validate();
  check_grid(lambda_grid, "lambda", false);
  GridSearchResult result;
  result.lambda_grid.assign(lambda_grid.begin(), lambda_grid.end());

  const std::size_t per_run = static_cast<std::size_t>(protocol.validation_episodes);
  const std::size_t count = static_cast<std::size_t>(protocol.runs) * per_run;
  std::vector<Episode> episodes(count);
  parallel_for(count, [&](std::size_t i) {
    episodes[i] = episode_at(source, Split::kValidation, protocol, static_cast<int>(i / per_run),
                             static_cast<int>(i % per_run));
  });

  double best = -1.0;
  std::size_t best_index = 0;
  std::vector<EpisodeOutcome> slot(count);
  for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
    parallel_for(count, [&](std::size_t i) {
      slot[i] = run_logreg_episode(source, episodes[i], lambda_grid[g], options);
    });
    double total = 0.0;
    for (int r = 0; r < protocol.runs; ++r) {
      double sum = 0.0;
      for (std::size_t e = 0; e < per_run; ++e) sum += slot[static_cast<std::size_t>(r) * per_run + e].accuracy;
      result.lambda_table.push_back({lambda_grid[g], r, sum / static_cast<double>(per_run)});
      total += sum;
    }
    const double mean = total / static_cast<double>(count);
    const bool better = mean > best || (mean == best && lambda_grid[g] < lambda_grid[best_index]);
    if (better) {
      best = mean;
      best_index = g;
      result.validation_outcomes = slot;
    }
  }
  result.chosen_lambda = lambda_grid[best_index];
  return result;
}

void select_temperature(GridSearchResult& result, std::span<const double> temperature_grid, int bins) {
  check_grid(temperature_grid, "temperature", true);
  if (result.validation_outcomes.empty()) throw ConfigError("select_temperature: no validation predictions");
  result.temperature_grid.assign(temperature_grid.begin(), temperature_grid.end());
  result.temperature_table.clear();
  double best = 0.0;
  double chosen = 1.0;
  bool first = true;
  for (double t : temperature_grid) {
    const Pooled pooled = pool(result.validation_outcomes, t);
    const CalibrationReport report = calibration_report(pooled.probs, pooled.labels, bins);
    const double acc = accuracy_of(pooled.probs, pooled.labels);
    result.temperature_table.push_back({t, report.ece, acc});
    const bool better = first || report.ece < best ||
                        (report.ece == best && std::fabs(t - 1.0) < std::fabs(chosen - 1.0));
    if (better) {
      best = report.ece;
      chosen = t;
      first = false;
    }
  }
  result.chosen_temperature = chosen;
}

ClassificationReport evaluate_classification(const EpisodeSource& source,
                                             const EpisodeProtocol& protocol,
                                             const ClassificationHeadConfig& head) {
  protocol.validate();
  ClassificationReport report;
  report.head = head.head;
  if (head.head == ClassifierHead::kLogReg) {
    report.grid = select_lambda(source, protocol, head.lambda_grid, head.logreg);
    select_temperature(report.grid, head.temperature_grid, head.bins);
  } else {
    head.mcmc.validate();
  }

  const std::size_t per_run = static_cast<std::size_t>(protocol.episodes);
  const std::size_t count = static_cast<std::size_t>(protocol.runs) * per_run;
  std::vector<EpisodeOutcome> outcomes(count);
  parallel_for(count, [&](std::size_t i) {
    const int run = static_cast<int>(i / per_run);
    const int e = static_cast<int>(i % per_run);
    const Episode episode = episode_at(source, Split::kTest, protocol, run, e);
    if (head.head == ClassifierHead::kLogReg) {
      outcomes[i] = run_logreg_episode(source, episode, report.grid.chosen_lambda, head.logreg);
    } else {
      McmcConfig mcmc = head.mcmc;
      mcmc.seed = derive_seed(head.mcmc.seed, static_cast<std::uint64_t>(run), static_cast<std::uint64_t>(e));
      outcomes[i] = run_bayes_episode(source, episode, mcmc);
    }
  });

  std::vector<double> all;
  for (int r = 0; r < protocol.runs; ++r) {
    std::vector<double> accs;
    for (std::size_t e = 0; e < per_run; ++e) {
      const auto& o = outcomes[static_cast<std::size_t>(r) * per_run + e];
      report.rows.push_back({r, static_cast<int>(e), o.accuracy});
      accs.push_back(o.accuracy);
      all.push_back(o.accuracy);
    }
    report.per_run.push_back(summarize(accs));
  }
  report.pooled = summarize(all);
  if (head.head == ClassifierHead::kBayes) {
    for (const auto& o : outcomes) {
      report.mcmc_acceptance += o.mcmc_acceptance / static_cast<double>(outcomes.size());
      report.mcmc_max_rhat = std::max(report.mcmc_max_rhat, o.mcmc_max_rhat);
      report.mcmc_unmixed_episodes += o.mcmc_max_rhat > 1.1 ? 1 : 0;
    }
  }

  const Pooled t1 = pool(outcomes, 1.0);
  report.calibration_t1 = calibration_report(t1.probs, t1.labels, head.bins);
  report.query_accuracy_t1 = accuracy_of(t1.probs, t1.labels);
  const Pooled tc = pool(outcomes, report.grid.chosen_temperature);
  report.calibration = calibration_report(tc.probs, tc.labels, head.bins);
  report.query_accuracy = accuracy_of(tc.probs, tc.labels);
  return report;
}

// ---------------------------------------------------------------------------

RegressionReport evaluate_regression(const MlpSpec& spec, const ParamVector& params,
                                     std::span<const RegressionTask> tasks,
                                     const RegressionProtocol& protocol) {
  if (tasks.empty()) throw ConfigError("regression evaluation: no tasks");
  if (protocol.shot < 1) throw ConfigError("regression evaluation: shot must be >= 1");
  RegressionReport report;
  report.rows.resize(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t t) {
    const RegressionTask& task = tasks[t];
    if (static_cast<std::size_t>(task.x.rows()) <= static_cast<std::size_t>(protocol.shot)) {
      throw ConfigError("regression evaluation: task " + std::to_string(t) + " has no query samples");
    }
    const Matrix phi = extract_features(spec, params, task.x, true);
    Rng rng(derive_seed(protocol.seed, 0x4e6, t));
    const RegressionEpisode episode = sample_regression_episode(static_cast<std::size_t>(task.x.rows()), protocol.shot, rng);
    const Matrix support = gather_rows(phi, episode.support_rows);
    Vector ys(static_cast<Eigen::Index>(episode.support_rows.size()));
    for (std::size_t i = 0; i < episode.support_rows.size(); ++i) ys(static_cast<Eigen::Index>(i)) = task.y(static_cast<Eigen::Index>(episode.support_rows[i]));

    BayesLinearPosterior post;
    bool converged = true;
    try {
      post = fit_evidence(support, ys, protocol.hyper, protocol.evidence);
    } catch (const EvidenceNotConverged& e) {
      post = e.last_iterate();
      converged = false;
    }
    double se = 0.0;
    for (std::size_t r : episode.query_rows) {
      const double diff = phi.row(static_cast<Eigen::Index>(r)).dot(post.mean) - task.y(static_cast<Eigen::Index>(r));
      se += diff * diff;
    }
    auto& row = report.rows[t];
    row.task = static_cast<int>(t);
    row.mse = se / static_cast<double>(episode.query_rows.size());
    row.noise_std = post.noise_std();
    row.lambda = post.lambda;
    row.beta = post.beta;
    row.converged = converged;
  });

  std::vector<double> mses;
  std::vector<double> noise;
  for (const auto& row : report.rows) {
    mses.push_back(row.mse);
    noise.push_back(row.noise_std);
    report.not_converged += row.converged ? 0 : 1;
  }
  const AccuracySummary s = summarize(mses);
  report.mse_mean = s.mean;
  report.mse_std = s.std;
  std::sort(noise.begin(), noise.end());
  const std::size_t n = noise.size();
  report.median_noise_std = n % 2 == 1 ? noise[n / 2] : 0.5 * (noise[n / 2 - 1] + noise[n / 2]);
  return report;
}

// ---------------------------------------------------------------------------

Matrix split_rows(const Matrix& features, const LabeledDataset& data, Split split) {
  if (features.rows() != static_cast<Eigen::Index>(data.size())) {
    throw DimensionError("split_rows: feature rows do not match the dataset");
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.split[i] == split) rows.push_back(i);
  }
  return gather_rows(features, rows);
}

SpectrumSummary summarize_spectrum(const Matrix& features) {
  SpectrumSummary s;
  s.report = spectrum(features);
  s.k = static_cast<int>((features.cols() + 3) / 4);
  s.energy_share = top_energy_share(s.report, s.k);
  return s;
}

}  // namespace mfrl
