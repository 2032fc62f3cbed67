#pragma once

#include <optional>
#include <vector>

#include "mfrl/error.hpp"
#include "mfrl/nn.hpp"

namespace mfrl {

// Gamma hyperpriors: lambda ~ Gamma(a, b) on the weight precision and
// beta ~ Gamma(c, d) on the noise precision 1/sigma^2. Tiny values are flat.
struct HyperPrior {
  double a = 1e-6;
  double b = 1e-6;
  double c = 1e-6;
  double d = 1e-6;
};

// Gaussian posterior over the weights of y = w^T phi + eps, with the prior
// w_i ~ N(0, 1/lambda) shared by every coordinate including the bias.
struct BayesLinearPosterior {
  Vector mean;        // m
  Matrix covariance;  // Sigma
  double lambda = 1.0;
  double beta = 1.0;
  // Effective number of well-determined parameters, (p+1) - lambda tr(Sigma).
  double gamma_eff = 0.0;
  int iterations = 0;
  bool converged = false;
  // log p(y | Phi, lambda, beta) after each posterior update (when traced).
  std::vector<double> log_evidence_trace;

  double noise_std() const;
};

struct EvidenceOptions {
  double tol = 1e-6;
  int max_iter = 300;
  // When false the posterior is computed once at (lambda0, beta0).
  bool update_hyperparameters = true;
  std::optional<double> lambda0;
  std::optional<double> beta0;
  bool trace = false;
};

class EvidenceNotConverged : public NumericError {
 public:
  EvidenceNotConverged(const std::string& what, BayesLinearPosterior last)
      : NumericError(what), last_(std::move(last)) {}
  const BayesLinearPosterior& last_iterate() const { return last_; }

 private:
  BayesLinearPosterior last_;
};

// Evidence approximation. Alternates
//   Sigma = (lambda I + beta Phi^T Phi)^-1,  m = beta Sigma Phi^T y,
//   gamma = (p+1) - lambda tr(Sigma),
//   lambda <- (gamma + 2a) / (|m|^2 + 2b),
//   beta   <- (n - gamma + 2c) / (|y - Phi m|^2 + 2d)
// until |d log lambda| + |d log beta| < tol. Defaults: lambda0 = 1,
// beta0 = 1/var(y) (1 when y is constant).
BayesLinearPosterior fit_evidence(const Matrix& phi, const Vector& y, const HyperPrior& hyper = {},
                                  const EvidenceOptions& options = {});

// Closed-form log p(y | Phi, lambda, beta).
double log_marginal_likelihood(const Matrix& phi, const Vector& y, double lambda, double beta);

struct RegressionPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

// Predictive N(m^T phi, 1/beta + phi^T Sigma phi).
RegressionPrediction predict(const BayesLinearPosterior& post, const Vector& phi_star);

}  // namespace mfrl
