#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance runner. Plain loops, no library solvers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "mfrl/bayes_reg.hpp"
#include "mfrl/nn.hpp"
#include "mfrl/rng.hpp"

namespace mfrl::oracle {


// Gauss-Jordan inverse with partial pivoting, plain loops.
inline std::vector<std::vector<double>> gj_inverse(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    std::swap(inv[col], inv[pivot]);
    const double d = a[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col][j] /= d;
      inv[col][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

struct Instance {
  Matrix phi;
  Vector y;
};

inline Instance random_instance(std::uint64_t seed, int max_n = 20, int max_p = 10) {
  Rng rng(seed);
  const int n = 1 + static_cast<int>(rng.below(max_n));
  const int p = static_cast<int>(rng.below(max_p + 1));
  Instance s;
  s.phi.resize(n, p + 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) s.phi(i, j) = rng.normal();
    s.phi(i, p) = 1.0;
  }
  Vector w(p + 1);
  for (auto& v : w) v = rng.normal();
  const double sigma = 0.05 + rng.uniform();
  s.y = s.phi * w;
  for (auto& v : s.y) v += sigma * rng.normal();
  return s;
}

// log N(y | 0, I/beta + Phi Phi^T / lambda) with the Gauss-Jordan inverse and
// a determinant from the same elimination.
inline double direct_log_evidence(const Matrix& phi, const Vector& y, double lambda, double beta) {
  const auto n = phi.rows();
  std::vector<std::vector<double>> c(n, std::vector<double>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      c[i][j] = phi.row(i).dot(phi.row(j)) / lambda + (i == j ? 1.0 / beta : 0.0);
    }
  }
  // Determinant by elimination without pivoting (C is SPD).
  auto u = c;
  double log_det = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    log_det += std::log(u[k][k]);
    for (Eigen::Index r = k + 1; r < n; ++r) {
      const double f = u[r][k] / u[k][k];
      for (Eigen::Index j = k; j < n; ++j) u[r][j] -= f * u[k][j];
    }
  }
  const auto inv = gj_inverse(c);
  double quad = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) quad += y(i) * inv[i][j] * y(j);
  }
  return -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + log_det + quad);
}

inline EvidenceOptions frozen(double lambda, double beta) {
  EvidenceOptions o;
  o.update_hyperparameters = false;
  o.lambda0 = lambda;
  o.beta0 = beta;
  return o;
}

inline BayesLinearPosterior fit_or_last(const Matrix& phi, const Vector& y, const HyperPrior& h,
                                 const EvidenceOptions& o) {
  try {
    return fit_evidence(phi, y, h, o);
  } catch (const EvidenceNotConverged& e) {
    return e.last_iterate();
  }
}

// Gradient check for the half squared loss; central differences with
// h = 1e-5 and a 1e-6 floor on the relative-error denominator.
inline double half_sq_loss(const MlpSpec& spec, const ParamVector& p, const Matrix& x, const Matrix& t) {
  const Matrix out = forward(spec, p, x).outputs;
  return 0.5 * (out - t).squaredNorm();
}

inline double max_fd_rel_error(const MlpSpec& spec, ParamVector params, const Matrix& x, const Matrix& t) {
  const ForwardPass pass = forward(spec, params, x);
  const ParamVector grad = backward(spec, params, pass, pass.outputs - t);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params.values()[i];
    params.values()[i] = keep + h;
    const double up = half_sq_loss(spec, params, x, t);
    params.values()[i] = keep - h;
    const double down = half_sq_loss(spec, params, x, t);
    params.values()[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    const double g = grad.values()[i];
    const double denom = std::max({std::fabs(g), std::fabs(fd), 1e-6});
    worst = std::max(worst, std::fabs(g - fd) / denom);
  }
  return worst;
}

// Brute-force calibration: every bin scans all samples.
struct BruteCalibration {
  double ece = 0.0;
  double mce = 0.0;
};

inline BruteCalibration brute_calibration(const std::vector<double>& conf, const std::vector<std::uint8_t>& correct,
                                          int bins) {
  BruteCalibration out;
  const double n = static_cast<double>(conf.size());
  for (int b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) / bins;
    const double hi = static_cast<double>(b + 1) / bins;
    double sc = 0.0;
    double sa = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < conf.size(); ++i) {
      const bool member = b == bins - 1 ? conf[i] >= lo : (conf[i] >= lo && conf[i] < hi);
      if (!member) continue;
      sc += conf[i];
      sa += correct[i];
      ++count;
    }
    if (count == 0) continue;
    const double gap = std::fabs(sa / count - sc / count);
    out.ece += count / n * gap;
    out.mce = std::max(out.mce, gap);
  }
  return out;
}

// Mean over rows of sum_c (p_c - y_c)^2.
inline double brute_brier(const Matrix& p, const std::vector<int>& labels) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      const double y = c == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      s += (p(i, c) - y) * (p(i, c) - y);
    }
  }
  return s / static_cast<double>(p.rows());
}

}  // namespace mfrl::oracle
