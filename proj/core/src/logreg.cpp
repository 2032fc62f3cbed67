#include "mfrl/logreg.hpp"

#include <cmath>
#include <string>

#include "mfrl/error.hpp"

namespace mfrl {

namespace {

// Returns the data term (sum of per-sample CE) and writes P - Y into resid.
double cross_entropy(const Matrix& phi, std::span<const int> labels, const Matrix& weights,
                     Matrix* resid) {
  const Matrix logits = phi * weights;
  double loss = 0.0;
  if (resid) resid->resize(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double max = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - max).exp();
    const double z = e.sum();
    const int c = labels[static_cast<std::size_t>(i)];
    loss += std::log(z) + max - logits(i, c);
    if (resid) {
      resid->row(i) = e / z;
      (*resid)(i, c) -= 1.0;
    }
  }
  return loss;
}

double penalty(const Matrix& weights, double lambda, bool penalize_bias) {
  if (lambda == 0.0) return 0.0;
  if (penalize_bias) return lambda * weights.squaredNorm();
  return lambda * weights.topRows(weights.rows() - 1).squaredNorm();
}

void check_inputs(const Matrix& phi, std::span<const int> labels, int classes) {
  if (static_cast<Eigen::Index>(labels.size()) != phi.rows()) {
    throw DimensionError("logreg: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(phi.rows()) + " feature rows");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw DimensionError("logreg: label " + std::to_string(labels[i]) + " at row " +
                           std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

}  // namespace

Vector normalize_features(const Vector& h) {
  Vector out = Vector::Zero(h.size() + 1);
  const double norm = h.norm();
  if (norm >= 1e-12) out.head(h.size()) = h / norm;
  out(h.size()) = 1.0;
  return out;
}

Matrix normalize_feature_rows(const Matrix& h) {
  Matrix out = Matrix::Zero(h.rows(), h.cols() + 1);
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    const double norm = h.row(i).norm();
    if (norm >= 1e-12) out.row(i).head(h.cols()) = h.row(i) / norm;
  }
  out.col(h.cols()).setOnes();
  return out;
}

double logreg_objective(const Matrix& phi, std::span<const int> labels, const Matrix& weights,
                        double lambda, bool penalize_bias) {
  check_inputs(phi, labels, static_cast<int>(weights.cols()));
  return cross_entropy(phi, labels, weights, nullptr) + penalty(weights, lambda, penalize_bias);
}

LogRegModel fit_logreg(const Matrix& phi, std::span<const int> labels, int classes, double lambda,
                       const LogRegOptions& options) {
  if (classes < 1) throw ConfigError("logreg: need at least one class");
  if (!(lambda >= 0.0)) throw ConfigError("logreg: lambda must be >= 0");
  check_inputs(phi, labels, classes);

  LogRegModel model;
  model.lambda = lambda;
  model.weights = Matrix::Zero(phi.cols(), classes);
  Matrix& w = model.weights;

  Matrix resid;
  auto objective_and_grad = [&](const Matrix& weights, Matrix& grad) {
    const double f = cross_entropy(phi, labels, weights, &resid) +
                     penalty(weights, lambda, options.penalize_bias);
    grad.noalias() = phi.transpose() * resid;
    if (lambda > 0.0) {
      if (options.penalize_bias) {
        grad += 2.0 * lambda * weights;
      } else {
        grad.topRows(weights.rows() - 1) += 2.0 * lambda * weights.topRows(weights.rows() - 1);
      }
    }
    return f;
  };

  Matrix grad(w.rows(), w.cols());
  double f = objective_and_grad(w, grad);
  double step = 1.0;
  Matrix trial(w.rows(), w.cols());
  int it = 0;
  // Without a penalty, weights that separate the data can always be scaled
  // to lower the loss, so a small gradient there is not a minimum.
  auto separates = [&](const Matrix& weights) {
    if (lambda > 0.0) return false;
    const Matrix logits = phi * weights;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const int y = labels[static_cast<std::size_t>(i)];
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        if (c != y && logits(i, c) >= logits(i, y)) return false;
      }
    }
    return true;
  };
  auto stationary = [&] { return grad.cwiseAbs().maxCoeff() <= options.grad_tol && !separates(w); };

  for (; it < options.max_iter; ++it) {
    if (stationary()) {
      model.converged = true;
      break;
    }
    const double g2 = grad.squaredNorm();
    step = std::min(step * 2.0, 1e6);
    double f_trial = 0.0;
    for (;;) {
      trial = w - step * grad;
      f_trial = cross_entropy(phi, labels, trial, nullptr) + penalty(trial, lambda, options.penalize_bias);
      if (f_trial <= f - 0.5 * step * g2) break;
      step *= 0.5;
      if (step < 1e-16) break;
    }
    if (step < 1e-16) break;  // no descent possible at working precision
    w = trial;
    f = objective_and_grad(w, grad);
  }
  if (!model.converged && stationary()) model.converged = true;
  model.iterations = it;
  model.objective = f;
  model.norm_divergence = lambda == 0.0 && !model.converged;
  return model;
}

Matrix softmax_rows(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Eigen::RowVectorXd scaled = logits.row(i) / temperature;
    const double max = scaled.maxCoeff();
    const Eigen::RowVectorXd e = (scaled.array() - max).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

Matrix predict_proba_rows(const Matrix& weights, const Matrix& phi, double temperature) {
  if (phi.cols() != weights.rows()) {
    throw DimensionError("predict_proba: feature length " + std::to_string(phi.cols()) +
                         " != model dimension " + std::to_string(weights.rows()));
  }
  return softmax_rows(phi * weights, temperature);
}

Vector predict_proba(const LogRegModel& model, const Vector& phi) {
  return predict_proba_rows(model.weights, phi.transpose(), model.temperature).row(0).transpose();
}

}  // namespace mfrl
