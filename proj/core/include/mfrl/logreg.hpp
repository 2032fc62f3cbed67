#pragma once

#include <span>
#include <vector>

#include "mfrl/nn.hpp"

namespace mfrl {

// [h / |h|_2 ; 1]; a near-zero h (|h| < 1e-12) maps to [0 ; 1].
Vector normalize_features(const Vector& h);

// Row-wise normalize_features: n x p -> n x (p+1).
Matrix normalize_feature_rows(const Matrix& h);

struct LogRegOptions {
  double grad_tol = 1e-6;  // max-abs gradient entry
  int max_iter = 2000;
  // The penalty covers whole class vectors; false exempts the bias row.
  bool penalize_bias = true;
};

// Multinomial logistic regression head. weights is (p+1) x K, column c is
// the class vector w_c (bias in the last row).
struct LogRegModel {
  Matrix weights;
  double lambda = 0.0;
  double temperature = 1.0;
  int iterations = 0;
  double objective = 0.0;
  bool converged = false;
  // Set when lambda == 0 and the optimizer stopped at the iteration cap,
  // the symptom of separable data with a diverging weight norm.
  bool norm_divergence = false;

  int classes() const { return static_cast<int>(weights.cols()); }
};

// Sum-form cross-entropy over the support set plus lambda * sum_c |w_c|^2.
double logreg_objective(const Matrix& phi, std::span<const int> labels, const Matrix& weights,
                        double lambda, bool penalize_bias = true);

// Minimizes logreg_objective by full-batch gradient descent with Armijo
// backtracking, starting from W = 0.
LogRegModel fit_logreg(const Matrix& phi, std::span<const int> labels, int classes, double lambda,
                       const LogRegOptions& options = {});

// Softmax of W^T phi / T, computed with log-sum-exp.
Vector predict_proba(const LogRegModel& model, const Vector& phi);

// Same for every row of phi: n x K.
Matrix predict_proba_rows(const Matrix& weights, const Matrix& phi, double temperature);

// Row-wise softmax of logits / T.
Matrix softmax_rows(const Matrix& logits, double temperature);

}  // namespace mfrl
