#include "mfrl/bayes_reg.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>

namespace mfrl {

namespace {

struct PosteriorCore {
  Vector mean;
  Matrix covariance;
  double log_det_precision = 0.0;
};

PosteriorCore solve_posterior(const Matrix& gram, const Vector& phi_t_y, double lambda, double beta) {
  const auto dim = gram.rows();
  Matrix precision = beta * gram;
  precision.diagonal().array() += lambda;
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    if (attempt > 0) {
      const double add = 1e-10 * std::pow(10.0, attempt - 1);
      precision.diagonal().array() += add;
      jitter += add;
    }
    Eigen::LLT<Matrix> llt(precision);
    if (llt.info() != Eigen::Success) continue;
    PosteriorCore core;
    core.covariance = llt.solve(Matrix::Identity(dim, dim));
    core.covariance = 0.5 * (core.covariance + core.covariance.transpose());
    core.mean = beta * (core.covariance * phi_t_y);
    core.log_det_precision = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return core;
  }
  throw NumericError("fit_evidence: Cholesky factorization failed after jitter " +
                     std::to_string(jitter) + " (lambda " + std::to_string(lambda) + ", beta " +
                     std::to_string(beta) + ")");
}

double log_evidence_from(const Matrix& phi, const Vector& y, double lambda, double beta,
                         const PosteriorCore& core) {
  const double n = static_cast<double>(y.size());
  const double m = static_cast<double>(phi.cols());
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  if (phi.rows() < phi.cols()) {
    // Fewer samples than weights: N(y | 0, I/beta + Phi Phi^T / lambda) stays
    // well conditioned when beta grows large, the weight-space form does not.
    Matrix cov = (phi * phi.transpose()) / lambda;
    cov.diagonal().array() += 1.0 / beta;
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() == Eigen::Success) {
      const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      return -0.5 * (n * log_2pi + log_det + y.dot(llt.solve(y)));
    }
  }
  const double misfit = (y - phi * core.mean).squaredNorm();
  const double energy = 0.5 * beta * misfit + 0.5 * lambda * core.mean.squaredNorm();
  return 0.5 * m * std::log(lambda) + 0.5 * n * std::log(beta) - energy -
         0.5 * core.log_det_precision - 0.5 * n * log_2pi;
}

}  // namespace

double BayesLinearPosterior::noise_std() const { return 1.0 / std::sqrt(beta); }

double log_marginal_likelihood(const Matrix& phi, const Vector& y, double lambda, double beta) {
  const Matrix gram = phi.transpose() * phi;
  const Vector phi_t_y = phi.transpose() * y;
  return log_evidence_from(phi, y, lambda, beta, solve_posterior(gram, phi_t_y, lambda, beta));
}

BayesLinearPosterior fit_evidence(const Matrix& phi, const Vector& y, const HyperPrior& hyper,
                                  const EvidenceOptions& options) {
  const auto n = phi.rows();
  const auto dim = phi.cols();
  if (n < 1) throw DimensionError("fit_evidence: need at least one sample");
  if (y.size() != n) {
    throw DimensionError("fit_evidence: design has " + std::to_string(n) + " rows but y has " +
                         std::to_string(y.size()));
  }
  if (!phi.allFinite() || !y.allFinite()) throw NumericError("fit_evidence: non-finite input");

  double lambda = options.lambda0.value_or(1.0);
  double beta = 1.0;
  if (options.beta0) {
    beta = *options.beta0;
  } else {
    const double mean_y = y.mean();
    const double var_y = (y.array() - mean_y).square().mean();
    beta = var_y > 0.0 ? 1.0 / var_y : 1.0;
  }
  if (!(lambda > 0.0) || !(beta > 0.0)) {
    throw ConfigError("fit_evidence: initial lambda and beta must be positive");
  }

  const Matrix gram = phi.transpose() * phi;
  const Vector phi_t_y = phi.transpose() * y;

  // Log evidence plus the log hyperprior terms; every accepted step keeps it
  // non-decreasing.
  auto objective = [&](double lam, double bet, double log_evidence) {
    return log_evidence + hyper.a * std::log(lam) - hyper.b * lam + hyper.c * std::log(bet) -
           hyper.d * bet;
  };

  BayesLinearPosterior post;
  double current = 0.0;
  auto adopt = [&](double lam, double bet, PosteriorCore core) {
    const double log_evidence = log_evidence_from(phi, y, lam, bet, core);
    if (options.trace) post.log_evidence_trace.push_back(log_evidence);
    current = objective(lam, bet, log_evidence);
    post.mean = std::move(core.mean);
    post.covariance = std::move(core.covariance);
    post.lambda = lam;
    post.beta = bet;
    post.gamma_eff = static_cast<double>(dim) - lam * post.covariance.trace();
    lambda = lam;
    beta = bet;
  };

  adopt(lambda, beta, solve_posterior(gram, phi_t_y, lambda, beta));
  if (!options.update_hyperparameters) {
    post.converged = true;
    return post;
  }

  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };

  for (int it = 1; it <= options.max_iter; ++it) {
    const double misfit = (y - phi * post.mean).squaredNorm();
    const double mean_sq = post.mean.squaredNorm();
    double next_lambda = (post.gamma_eff + 2.0 * hyper.a) / (mean_sq + 2.0 * hyper.b);
    double next_beta =
        (static_cast<double>(n) - post.gamma_eff + 2.0 * hyper.c) / (misfit + 2.0 * hyper.d);
    bool accepted = false;
    PosteriorCore core;
    if (positive(next_lambda) && positive(next_beta)) {
      core = solve_posterior(gram, phi_t_y, next_lambda, next_beta);
      accepted = objective(next_lambda, next_beta,
                           log_evidence_from(phi, y, next_lambda, next_beta, core)) >= current;
    }
    if (!accepted) {
      // The fixed-point step overshot; take the EM step, which cannot
      // decrease the objective.
      const double trace_sigma = post.covariance.trace();
      const double trace_fit = (gram.cwiseProduct(post.covariance)).sum();
      next_lambda = (static_cast<double>(dim) + 2.0 * hyper.a) / (mean_sq + trace_sigma + 2.0 * hyper.b);
      next_beta = (static_cast<double>(n) + 2.0 * hyper.c) / (misfit + trace_fit + 2.0 * hyper.d);
      if (!positive(next_lambda) || !positive(next_beta)) {
        throw EvidenceNotConverged(
            "fit_evidence: hyperparameter update left the positive reals at iteration " +
                std::to_string(it),
            post);
      }
      core = solve_posterior(gram, phi_t_y, next_lambda, next_beta);
    }
    const double change =
        std::fabs(std::log(next_lambda / lambda)) + std::fabs(std::log(next_beta / beta));
    adopt(next_lambda, next_beta, std::move(core));
    post.iterations = it;
    if (change < options.tol) {
      post.converged = true;
      return post;
    }
  }
  throw EvidenceNotConverged("fit_evidence: no convergence within " +
                                 std::to_string(options.max_iter) + " iterations",
                             post);
}

RegressionPrediction predict(const BayesLinearPosterior& post, const Vector& phi_star) {
  if (phi_star.size() != post.mean.size()) {
    throw DimensionError("predict: feature length " + std::to_string(phi_star.size()) +
                         " != posterior dimension " + std::to_string(post.mean.size()));
  }
  return {post.mean.dot(phi_star), 1.0 / post.beta + phi_star.dot(post.covariance * phi_star)};
}

}  // namespace mfrl
