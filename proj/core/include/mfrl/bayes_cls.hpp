#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfrl/nn.hpp"
#include "mfrl/rng.hpp"

namespace mfrl {

// ---------------------------------------------------------------------------
// Adaptive random-walk Metropolis.
//
// Proposal x' = x + step * scale .* N(0, I). During warmup the global step
// follows a Robbins-Monro recursion towards the target acceptance rate and
// the per-coordinate scale is re-estimated from warmup draws at the end of
// each adaptation window. Both are frozen for the sampling phase, so kept
// draws come from a fixed (reversible) kernel.
//
// This stands in for NUTS; expect slower mixing in funnel-shaped posteriors
// and check split R-hat before trusting a run.

using LogDensity = std::function<double(const Vector&)>;

struct RwmOptions {
  int warmup = 2000;
  int samples = 2000;
  int thin = 1;
  double target_accept = 0.234;
  // Initial step; <= 0 means 2.38 / sqrt(dim).
  double initial_step = 0.0;
};

struct RwmChain {
  Matrix draws;  // samples x dim
  std::vector<double> log_density;
  double acceptance = 0.0;  // post-warmup
  double step = 0.0;
  Vector scale;
};

RwmChain run_adaptive_rwm(const LogDensity& log_density, const Vector& initial,
                          const RwmOptions& options, Rng& rng);

// Split R-hat of one coordinate across chains (each entry: one chain's draws).
double split_rhat(std::span<const Vector> chains);

// Effective sample size across chains (Geyer initial positive sequence on
// the averaged autocorrelation).
double effective_sample_size(std::span<const Vector> chains);

// sd / sqrt(ESS) for the mean of the pooled draws.
double mc_standard_error(std::span<const Vector> chains);

// ---------------------------------------------------------------------------
// Hierarchical Bayesian linear classifier.

struct McmcConfig {
  int chains = 4;
  int warmup = 4000;
  int samples = 1000;  // kept per chain
  int thin = 2;
  double target_accept = 0.234;
  std::uint64_t seed = 0;
  // Gamma(a, b) hyperprior on the shared weight precision lambda.
  double a = 1e-6;
  double b = 1e-6;
  // Holds lambda fixed instead of sampling log lambda.
  std::optional<double> fixed_lambda;
  // Drops the likelihood (samples the prior).
  bool prior_only = false;
  // Keeps only the first max_feature_dim feature columns (plus the bias,
  // taken to be the last column).
  int max_feature_dim = 64;

  void validate() const;
};

struct PosteriorSampleSet {
  int classes = 0;
  int dim = 0;  // rows of W after truncation (incl. bias)
  // Columns of the input design that were kept, in order.
  std::vector<int> kept_columns;
  // Each row: vec(W) column-major ((dim x classes), class c contiguous),
  // followed by log lambda when it was sampled.
  Matrix draws;
  std::vector<int> chain_of_draw;
  int chains = 0;
  bool samples_lambda = true;
  double acceptance_rate = 0.0;
  std::vector<double> chain_acceptance;
  std::vector<double> rhat;  // per coordinate, empty with one chain

  Matrix weights(Eigen::Index draw) const;
  std::size_t size() const { return static_cast<std::size_t>(draws.rows()); }
  // Draws of one coordinate grouped by chain.
  std::vector<Vector> coordinate_by_chain(Eigen::Index coord) const;
};

// log p(W, log lambda | data) up to a constant, for the parameter layout above.
double hblc_log_posterior(const Matrix& phi, std::span<const int> labels, int classes,
                          const Vector& theta, const McmcConfig& config);

// Throws NumericError if the post-warmup acceptance leaves [0.05, 0.7].
PosteriorSampleSet fit_mcmc(const Matrix& phi, std::span<const int> labels, int classes,
                            const McmcConfig& config);

// Posterior predictive: mean over draws of softmax(W^T phi).
Vector predict_mc(const PosteriorSampleSet& samples, const Vector& phi);

// Same for the rows of phi (n x K).
Matrix predict_mc_rows(const PosteriorSampleSet& samples, const Matrix& phi);

// CSV of draws: chain,draw,w_<row>_<class>...,log_lambda (last column only
// when lambda was sampled).
std::string draws_csv(const PosteriorSampleSet& samples);

}  // namespace mfrl
