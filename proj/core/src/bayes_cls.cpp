#include "mfrl/bayes_cls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mfrl/byte_io.hpp"
#include "mfrl/error.hpp"
#include "mfrl/parallel.hpp"

namespace mfrl {

namespace {

constexpr double kMinAcceptance = 0.05;
constexpr double kMaxAcceptance = 0.7;

struct Welford {
  Eigen::Index n = 0;
  Vector mean;
  Vector m2;

  explicit Welford(Eigen::Index dim) : mean(Vector::Zero(dim)), m2(Vector::Zero(dim)) {}

  void add(const Vector& x) {
    ++n;
    const Vector delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2.array() += delta.array() * (x - mean).array();
  }

  // Variance shrunk towards 1e-3 while few draws are available.
  Vector regularized_variance() const {
    const double nn = static_cast<double>(n);
    const Vector var = m2 / std::max(1.0, nn - 1.0);
    return (nn / (nn + 5.0)) * var.array() + 1e-3 * (5.0 / (nn + 5.0));
  }
};

double mean_of(const Vector& v) { return v.mean(); }

double sample_variance(const Vector& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

// Autocovariance at lag t (biased estimator, divides by n).
double autocovariance(const Vector& v, double mean, Eigen::Index t) {
  const Eigen::Index n = v.size();
  double s = 0.0;
  for (Eigen::Index i = 0; i + t < n; ++i) s += (v(i) - mean) * (v(i + t) - mean);
  return s / static_cast<double>(n);
}

void check_chains(std::span<const Vector> chains) {
  if (chains.empty()) throw ConfigError("mcmc diagnostics: no chains");
  for (const auto& c : chains) {
    if (c.size() != chains.front().size()) throw DimensionError("mcmc diagnostics: chains differ in length");
  }
  if (chains.front().size() < 4) throw ConfigError("mcmc diagnostics: need at least 4 draws per chain");
}

}  // namespace

RwmChain run_adaptive_rwm(const LogDensity& log_density, const Vector& initial,
                          const RwmOptions& options, Rng& rng) {
  const Eigen::Index dim = initial.size();
  if (dim < 1) throw DimensionError("rwm: empty parameter vector");
  if (options.warmup < 0 || options.samples < 1 || options.thin < 1) {
    throw ConfigError("rwm: need warmup >= 0, samples >= 1, thin >= 1");
  }
  if (!(options.target_accept > 0.0 && options.target_accept < 1.0)) {
    throw ConfigError("rwm: target acceptance must lie in (0, 1)");
  }

  RwmChain chain;
  chain.scale = Vector::Ones(dim);
  chain.step = options.initial_step > 0.0 ? options.initial_step
                                          : 2.38 / std::sqrt(static_cast<double>(dim));
  Vector x = initial;
  double lp = log_density(x);
  if (!std::isfinite(lp)) throw NumericError("rwm: log density is not finite at the initial point");

  Vector proposal(dim);
  auto propose = [&]() {
    for (Eigen::Index j = 0; j < dim; ++j) proposal(j) = x(j) + chain.step * chain.scale(j) * rng.normal();
    const double lp_new = log_density(proposal);
    const double log_ratio = std::isfinite(lp_new) ? lp_new - lp : -std::numeric_limits<double>::infinity();
    const double accept_prob = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    const bool accept = rng.uniform() < accept_prob;
    if (accept) {
      x = proposal;
      lp = lp_new;
    }
    return std::pair{accept, accept_prob};
  };

  // Warmup: four windows. The step adapts throughout; the diagonal scale is
  // re-estimated from each window's draws at its end (except the last).
  const int windows = 4;
  int window = 1;
  int window_start = 0;
  int since_reset = 0;
  double log_step = std::log(chain.step);
  Welford window_stats(dim);
  for (int it = 0; it < options.warmup; ++it) {
    const double prob = propose().second;
    ++since_reset;
    log_step += (prob - options.target_accept) / std::pow(static_cast<double>(since_reset), 0.6);
    log_step = std::clamp(log_step, -30.0, 5.0);
    chain.step = std::exp(log_step);
    window_stats.add(x);

    const int boundary = window * options.warmup / windows;
    if (window < windows && it + 1 == boundary) {
      ++window;
      if (it + 1 - window_start >= 20) {
        chain.scale = window_stats.regularized_variance().cwiseSqrt();
        window_stats = Welford(dim);
        window_start = it + 1;
        since_reset = 0;
        log_step = std::log(2.38 / std::sqrt(static_cast<double>(dim)));
        chain.step = std::exp(log_step);
      }
    }
  }

  chain.draws.resize(options.samples, dim);
  chain.log_density.resize(static_cast<std::size_t>(options.samples));
  long accepted_count = 0;
  long proposals = 0;
  for (int s = 0; s < options.samples; ++s) {
    for (int t = 0; t < options.thin; ++t) {
      accepted_count += propose().first ? 1 : 0;
      ++proposals;
    }
    chain.draws.row(s) = x.transpose();
    chain.log_density[static_cast<std::size_t>(s)] = lp;
  }
  chain.acceptance = static_cast<double>(accepted_count) / static_cast<double>(proposals);
  return chain;
}

double split_rhat(std::span<const Vector> chains) {
  check_chains(chains);
  const Eigen::Index half = chains.front().size() / 2;
  std::vector<Vector> parts;
  for (const auto& c : chains) {
    parts.emplace_back(c.head(half));
    parts.emplace_back(c.tail(half));
  }
  const double m = static_cast<double>(parts.size());
  const double n = static_cast<double>(half);
  double grand = 0.0;
  for (const auto& p : parts) grand += mean_of(p);
  grand /= m;
  double between = 0.0;
  double within = 0.0;
  for (const auto& p : parts) {
    between += (mean_of(p) - grand) * (mean_of(p) - grand);
    within += sample_variance(p);
  }
  between *= n / (m - 1.0);
  within /= m;
  if (!(within > 0.0)) return between > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (n - 1.0) / n * within + between / n;
  return std::sqrt(var_plus / within);
}

double effective_sample_size(std::span<const Vector> chains) {
  check_chains(chains);
  const Eigen::Index n = chains.front().size();
  const double m = static_cast<double>(chains.size());
  const double nn = static_cast<double>(n);
  const double total = m * nn;

  std::vector<double> means;
  double within = 0.0;
  double grand = 0.0;
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    within += sample_variance(c);
    grand += means.back();
  }
  within /= m;
  grand /= m;
  double between = 0.0;
  if (chains.size() > 1) {
    for (double mu : means) between += (mu - grand) * (mu - grand);
    between *= nn / (m - 1.0);
  }
  const double var_plus = (nn - 1.0) / nn * within + between / nn;
  if (!(var_plus > 0.0)) return total;

  auto rho = [&](Eigen::Index t) {
    double acov = 0.0;
    for (std::size_t j = 0; j < chains.size(); ++j) acov += autocovariance(chains[j], means[j], t);
    acov /= m;
    return 1.0 - (within - acov) / var_plus;
  };

  // Geyer initial monotone positive sequence over pairs of lags.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(std::max(total, 10.0)));
  return total / tau;
}

double mc_standard_error(std::span<const Vector> chains) {
  check_chains(chains);
  Eigen::Index total = 0;
  for (const auto& c : chains) total += c.size();
  Vector pooled(total);
  Eigen::Index at = 0;
  for (const auto& c : chains) {
    pooled.segment(at, c.size()) = c;
    at += c.size();
  }
  return std::sqrt(sample_variance(pooled) / effective_sample_size(chains));
}

// ---------------------------------------------------------------------------

void McmcConfig::validate() const {
  if (chains < 1) throw ConfigError("mcmc: chains must be >= 1");
  if (warmup < 0) throw ConfigError("mcmc: warmup must be >= 0");
  if (samples < 100) throw ConfigError("mcmc: need at least 100 kept samples per chain");
  if (thin < 1) throw ConfigError("mcmc: thin must be >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("mcmc: target acceptance must lie in (0, 1)");
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("mcmc: hyperprior a and b must be > 0");
  if (fixed_lambda && !(*fixed_lambda > 0.0)) throw ConfigError("mcmc: fixed lambda must be > 0");
  if (max_feature_dim < 1) throw ConfigError("mcmc: max_feature_dim must be >= 1");
}

Matrix PosteriorSampleSet::weights(Eigen::Index draw) const {
  Matrix w(dim, classes);
  for (int c = 0; c < classes; ++c) {
    for (int r = 0; r < dim; ++r) w(r, c) = draws(draw, static_cast<Eigen::Index>(c) * dim + r);
  }
  return w;
}

std::vector<Vector> PosteriorSampleSet::coordinate_by_chain(Eigen::Index coord) const {
  std::vector<Vector> out(static_cast<std::size_t>(chains));
  const Eigen::Index per_chain = chains > 0 ? draws.rows() / chains : 0;
  for (int c = 0; c < chains; ++c) out[static_cast<std::size_t>(c)] = draws.block(c * per_chain, coord, per_chain, 1);
  return out;
}

namespace {

std::vector<int> kept_columns_for(Eigen::Index cols, int max_feature_dim) {
  std::vector<int> kept;
  const Eigen::Index features = cols - 1;
  const Eigen::Index keep = std::min<Eigen::Index>(features, max_feature_dim);
  for (Eigen::Index j = 0; j < keep; ++j) kept.push_back(static_cast<int>(j));
  kept.push_back(static_cast<int>(cols - 1));
  return kept;
}

Matrix select_columns(const Matrix& phi, const std::vector<int>& kept) {
  Matrix out(phi.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = phi.col(kept[j]);
  return out;
}

void check_labels(const Matrix& phi, std::span<const int> labels, int classes) {
  if (classes < 2) throw ConfigError("mcmc: need at least two classes");
  if (static_cast<Eigen::Index>(labels.size()) != phi.rows()) {
    throw DimensionError("mcmc: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(phi.rows()) + " feature rows");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) throw DimensionError("mcmc: label " + std::to_string(y) + " out of range");
  }
}

}  // namespace

double hblc_log_posterior(const Matrix& phi, std::span<const int> labels, int classes,
                          const Vector& theta, const McmcConfig& config) {
  const Eigen::Index dim = phi.cols();
  const Eigen::Index d = dim * classes;
  const bool sample_lambda = !config.fixed_lambda.has_value();
  if (theta.size() != d + (sample_lambda ? 1 : 0)) throw DimensionError("mcmc: parameter vector length");
  const Eigen::Map<const Matrix> w(theta.data(), dim, classes);

  double lp = 0.0;
  if (!config.prior_only) {
    const Matrix logits = phi * w;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double max = logits.row(i).maxCoeff();
      const double lse = max + std::log((logits.row(i).array() - max).exp().sum());
      lp += logits(i, labels[static_cast<std::size_t>(i)]) - lse;
    }
  }
  const double sq = w.squaredNorm();
  if (sample_lambda) {
    const double log_lambda = theta(d);
    const double lambda = std::exp(log_lambda);
    // Gaussian prior with precision lambda, Gamma(a, b) on lambda, and the
    // Jacobian of the log transform.
    lp += 0.5 * static_cast<double>(d) * log_lambda - 0.5 * lambda * sq;
    lp += config.a * log_lambda - config.b * lambda;
  } else {
    lp -= 0.5 * *config.fixed_lambda * sq;
  }
  return lp;
}

PosteriorSampleSet fit_mcmc(const Matrix& phi_full, std::span<const int> labels, int classes,
                            const McmcConfig& config) {
  config.validate();
  if (phi_full.cols() < 1) throw DimensionError("mcmc: empty design");
  check_labels(phi_full, labels, classes);
  if (!phi_full.allFinite()) throw NumericError("mcmc: non-finite features");

  PosteriorSampleSet out;
  out.classes = classes;
  out.kept_columns = kept_columns_for(phi_full.cols(), config.max_feature_dim);
  const Matrix phi = select_columns(phi_full, out.kept_columns);
  out.dim = static_cast<int>(phi.cols());
  out.chains = config.chains;
  out.samples_lambda = !config.fixed_lambda.has_value();
  const Eigen::Index d = static_cast<Eigen::Index>(out.dim) * classes;
  const Eigen::Index total_dim = d + (out.samples_lambda ? 1 : 0);

  // With lambda sampled the chains move in (V, log lambda), W = V / sqrt(lambda).
  // The prior scale of W then no longer depends on the position, which
  // removes the funnel between |W| and lambda that a random walk cannot
  // follow. The Jacobian of the map is lambda^(-d/2).
  auto to_weights = [&](const Vector& z) {
    if (!out.samples_lambda) return z;
    Vector theta = z;
    theta.head(d) *= std::exp(-0.5 * z(d));
    return theta;
  };
  const LogDensity density = [&](const Vector& z) {
    const double lp = hblc_log_posterior(phi, labels, classes, to_weights(z), config);
    return out.samples_lambda ? lp - 0.5 * static_cast<double>(d) * z(d) : lp;
  };
  RwmOptions options;
  options.warmup = config.warmup;
  options.samples = config.samples;
  options.thin = config.thin;
  options.target_accept = config.target_accept;

  std::vector<RwmChain> runs(static_cast<std::size_t>(config.chains));
  parallel_for(runs.size(), [&](std::size_t c) {
    Rng rng(derive_seed(config.seed, 0xc4a1, c));
    Vector init(total_dim);
    for (Eigen::Index j = 0; j < total_dim; ++j) init(j) = 0.1 * rng.normal();
    runs[c] = run_adaptive_rwm(density, init, options, rng);
  });

  out.draws.resize(static_cast<Eigen::Index>(config.chains) * config.samples, total_dim);
  double acceptance = 0.0;
  for (std::size_t c = 0; c < runs.size(); ++c) {
    const double acc = runs[c].acceptance;
    if (acc < kMinAcceptance || acc > kMaxAcceptance) {
      throw NumericError("mcmc: chain " + std::to_string(c) + " acceptance rate " + format_double(acc) +
                         " outside [0.05, 0.7] after warmup; lengthen warmup or rescale the proposal "
                         "(target_accept)");
    }
    out.chain_acceptance.push_back(acc);
    acceptance += acc;
    for (int s = 0; s < config.samples; ++s) {
      out.draws.row(static_cast<Eigen::Index>(c) * config.samples + s) =
          to_weights(runs[c].draws.row(s).transpose()).transpose();
    }
    for (int s = 0; s < config.samples; ++s) out.chain_of_draw.push_back(static_cast<int>(c));
  }
  out.acceptance_rate = acceptance / static_cast<double>(runs.size());
  if (config.chains >= 2) {
    for (Eigen::Index j = 0; j < total_dim; ++j) {
      const auto by_chain = out.coordinate_by_chain(j);
      out.rhat.push_back(split_rhat(by_chain));
    }
  }
  return out;
}

Matrix predict_mc_rows(const PosteriorSampleSet& samples, const Matrix& phi_full) {
  if (samples.size() == 0) throw ConfigError("predict_mc: empty sample set");
  if (samples.kept_columns.empty() || samples.kept_columns.back() != phi_full.cols() - 1) {
    throw DimensionError("predict_mc: feature length " + std::to_string(phi_full.cols()) +
                         " does not match the fitted design");
  }
  const Matrix phi = select_columns(phi_full, samples.kept_columns);
  Matrix probs = Matrix::Zero(phi.rows(), samples.classes);
  for (Eigen::Index s = 0; s < samples.draws.rows(); ++s) {
    const Matrix logits = phi * samples.weights(s);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double max = logits.row(i).maxCoeff();
      const Eigen::RowVectorXd e = (logits.row(i).array() - max).exp();
      probs.row(i) += e / e.sum();
    }
  }
  return probs / static_cast<double>(samples.draws.rows());
}

Vector predict_mc(const PosteriorSampleSet& samples, const Vector& phi) {
  return predict_mc_rows(samples, phi.transpose()).row(0).transpose();
}

std::string draws_csv(const PosteriorSampleSet& samples) {
  std::string out = "chain,draw";
  for (int c = 0; c < samples.classes; ++c) {
    for (int r = 0; r < samples.dim; ++r) out += ",w_" + std::to_string(r) + "_" + std::to_string(c);
  }
  if (samples.samples_lambda) out += ",log_lambda";
  out += '\n';
  const Eigen::Index per_chain = samples.chains > 0 ? samples.draws.rows() / samples.chains : 0;
  for (Eigen::Index s = 0; s < samples.draws.rows(); ++s) {
    out += std::to_string(samples.chain_of_draw[static_cast<std::size_t>(s)]) + "," +
           std::to_string(per_chain > 0 ? s % per_chain : s);
    for (Eigen::Index j = 0; j < samples.draws.cols(); ++j) out += "," + format_double(samples.draws(s, j));
    out += '\n';
  }
  return out;
}

}  // namespace mfrl
