#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "mfrl/error.hpp"
#include "mfrl/nn.hpp"
#include "mfrl/rng.hpp"
#include "oracles.hpp"

using namespace mfrl;
using mfrl::oracle::max_fd_rel_error;

namespace {

// Maclaurin series of erf in long double; converges fast for |x| <= 3.
long double erf_series(long double x) {
  long double term = x;  // (-1)^n x^(2n+1) / n!
  long double sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= -x * x / n;
    const long double add = term / (2 * n + 1);
    sum += add;
    if (std::fabs(add) < 1e-30L) break;
  }
  return sum * 2.0L / std::sqrt(std::numbers::pi_v<long double>);
}

double scalar_act(Activation a, double z) {
  switch (a) {
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kErf:
      return erf_approx(z);
  }
  return z;
}

// Loop-only forward pass over the raw value array (weights row-major,
// out x in, then bias).
std::vector<std::vector<double>> loop_forward(const MlpSpec& spec, const std::vector<double>& theta,
                                              const Matrix& x) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    std::vector<double> a(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) a[c] = x(r, c);
    std::size_t off = 0;
    std::vector<int> widths = spec.hidden_dims;
    widths.push_back(spec.output_dim);
    for (std::size_t l = 0; l < widths.size(); ++l) {
      const int in = static_cast<int>(a.size());
      const int width = widths[l];
      std::vector<double> z(width);
      for (int i = 0; i < width; ++i) {
        double s = 0.0;
        for (int j = 0; j < in; ++j) s += theta[off + i * in + j] * a[j];
        z[i] = s;
      }
      off += static_cast<std::size_t>(width) * in;
      for (int i = 0; i < width; ++i) z[i] += theta[off + i];
      off += width;
      const bool top = l + 1 == widths.size();
      if (!top) {
        for (double& v : z) v = scalar_act(spec.activation, v);
      }
      a = z;
    }
    out.push_back(a);
  }
  return out;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

}  // namespace

TEST(Forward, ZeroWeightsGiveActivationOfZero) {
  for (Activation a : {Activation::kRelu, Activation::kTanh, Activation::kErf}) {
    MlpSpec spec{3, {5, 4}, 2, a, true};
    ParamVector p(parameter_shapes(spec));
    Rng rng(1);
    const ForwardPass pass = forward(spec, p, random_matrix(6, 3, rng));
    EXPECT_TRUE((pass.features().array() == scalar_act(a, 0.0)).all());
    EXPECT_TRUE((pass.outputs.array() == 0.0).all());
  }
}

TEST(Forward, IdentityLinearLayer) {
  MlpSpec spec{4, {}, 4, Activation::kRelu, true};
  ParamVector p(parameter_shapes(spec));
  p.block(0) = RowMajorMatrix::Identity(4, 4);
  Rng rng(2);
  const Matrix x = random_matrix(7, 4, rng);
  EXPECT_EQ(forward(spec, p, x).outputs, x);
}

TEST(Forward, MatchesLoopReimplementation) {
  MlpSpec spec{2, {40, 40}, 1, Activation::kErf, true};
  const ParamVector p = init_params(spec, 11);
  Rng rng(3);
  const Matrix x = random_matrix(5, 2, rng, 2.0);
  const Matrix out = forward(spec, p, x).outputs;
  const auto oracle = loop_forward(spec, p.raw(), x);
  for (Eigen::Index r = 0; r < x.rows(); ++r) EXPECT_NEAR(out(r, 0), oracle[r][0], 1e-12);
}

TEST(Forward, FeaturesAreLastHiddenLayer) {
  MlpSpec spec{3, {6, 5}, 2, Activation::kTanh, true};
  const ParamVector p = init_params(spec, 4);
  Rng rng(4);
  const Matrix x = random_matrix(3, 3, rng);
  const ForwardPass full = forward(spec, p, x);
  const ForwardPass feat = forward_features(spec, p, x);
  EXPECT_EQ(full.features().cols(), spec.feature_dim());
  EXPECT_EQ(full.features(), feat.features());
  EXPECT_EQ(feat.outputs.size(), 0);
}

TEST(Forward, DimensionMismatchNamesLayer) {
  MlpSpec spec{3, {4}, 1, Activation::kTanh, true};
  const ParamVector p = init_params(spec, 1);
  try {
    forward(spec, p, Matrix::Zero(2, 5));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
  MlpSpec other{3, {7}, 1, Activation::kTanh, true};
  try {
    forward(other, p, Matrix::Zero(2, 3));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("hidden layer 0"), std::string::npos);
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
  MlpSpec spec{3, {8, 8}, 2, Activation::kErf, true};
  const ParamVector p = init_params(spec, 5);
  Rng rng(5);
  const ForwardPass pass = forward(spec, p, random_matrix(4, 3, rng));
  const ParamVector g = backward(spec, p, pass, Matrix::Zero(4, 2));
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, LinearLeastSquaresClosedForm) {
  MlpSpec spec{3, {}, 1, Activation::kRelu, true};
  ParamVector p = init_params(spec, 6);
  p.block(1)(0, 0) = 0.0;
  Rng rng(6);
  const Matrix x = random_matrix(9, 3, rng);
  const Vector y = random_matrix(9, 1, rng).col(0);
  const ForwardPass pass = forward(spec, p, x);
  const double n = 9.0;
  const ParamVector g = backward(spec, p, pass, (pass.outputs.col(0) - y) / n);
  const Vector w = p.block(0).row(0).transpose();
  const Vector oracle = x.transpose() * (x * w - y) / n;
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(g.block(0)(0, j), oracle(j), 1e-14);
}

TEST(Backward, FiniteDifferencesTanhTwoLayer) {
  MlpSpec spec{3, {7, 5}, 2, Activation::kTanh, true};
  const ParamVector p = init_params(spec, 7);
  Rng rng(7);
  EXPECT_LE(max_fd_rel_error(spec, p, random_matrix(4, 3, rng), random_matrix(4, 2, rng)), 1e-4);
}

TEST(Backward, FiniteDifferencesErf) {
  MlpSpec spec{2, {10, 10}, 1, Activation::kErf, true};
  const ParamVector p = init_params(spec, 8);
  Rng rng(8);
  EXPECT_LE(max_fd_rel_error(spec, p, random_matrix(5, 2, rng), random_matrix(5, 1, rng)), 1e-4);
}

TEST(Backward, FiniteDifferencesReluAwayFromKinks) {
  MlpSpec spec{3, {6, 6}, 2, Activation::kRelu, true};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ParamVector p = init_params(spec, 100 + seed);
    Rng rng(200 + seed);
    const Matrix x = random_matrix(3, 3, rng);
    const ForwardPass pass = forward(spec, p, x);
    bool clear = true;
    for (const Matrix& z : pass.pre) clear = clear && (z.array().abs() > 1e-3).all();
    if (!clear) continue;
    EXPECT_LE(max_fd_rel_error(spec, p, x, random_matrix(3, 2, rng)), 1e-4) << "seed " << seed;
  }
}

TEST(Backward, NonFiniteUpstreamIsReported) {
  MlpSpec spec{2, {3}, 1, Activation::kTanh, true};
  const ParamVector p = init_params(spec, 9);
  const ForwardPass pass = forward(spec, p, Matrix::Ones(3, 2));
  Matrix d = Matrix::Zero(3, 1);
  d(2, 0) = std::nan("");
  try {
    backward(spec, p, pass, d);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("batch index 2"), std::string::npos);
  }
}

TEST(Sgd, PlainGradientDescent) {
  MlpSpec spec{2, {3}, 1, Activation::kTanh, true};
  ParamVector p = init_params(spec, 10);
  const ParamVector before = p;
  ParamVector g = init_params(spec, 11);
  SgdState s;
  s.momentum = 0.0;
  s.weight_decay = 0.0;
  sgd_step(p, g, 0.1, s);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p.values()[i], before.values()[i] - 0.1 * g.values()[i]);
}

TEST(Sgd, ZeroGradientLeavesParams) {
  MlpSpec spec{2, {3}, 1, Activation::kTanh, true};
  ParamVector p = init_params(spec, 12);
  const ParamVector before = p;
  SgdState s;
  s.momentum = 0.9;
  s.weight_decay = 0.0;
  sgd_step(p, ParamVector::zeros_like(p), 0.5, s);
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.momentum_buffer.size(), p.size());
}

TEST(Sgd, UnrolledMomentumRecurrence) {
  ParamVector p({Shape{1, 1}}, {1.5});
  SgdState s;
  s.momentum = 0.9;
  s.weight_decay = 0.01;
  const double grads[3] = {0.4, -0.2, 0.7};
  const double lr = 0.1;
  // v1 = g1 + wd*t0; t1 = t0 - lr v1; v2 = m v1 + g2 + wd*t1; ...
  double t = 1.5;
  double v = 0.0;
  for (double g : grads) {
    v = 0.9 * v + g + 0.01 * t;
    t = t - lr * v;
    sgd_step(p, ParamVector({Shape{1, 1}}, {g}), lr, s);
  }
  EXPECT_EQ(p.values()[0], t);
  // Same recurrence written out by hand.
  const double v1 = 0.4 + 0.01 * 1.5;
  const double t1 = 1.5 - 0.1 * v1;
  const double v2 = 0.9 * v1 - 0.2 + 0.01 * t1;
  const double t2 = t1 - 0.1 * v2;
  const double v3 = 0.9 * v2 + 0.7 + 0.01 * t2;
  const double t3 = t2 - 0.1 * v3;
  EXPECT_NEAR(p.values()[0], t3, 1e-15);
}

TEST(Sgd, RejectsNonPositiveRate) {
  ParamVector p({Shape{1, 1}}, {1.0});
  SgdState s;
  EXPECT_THROW(sgd_step(p, p, 0.0, s), ConfigError);
}

TEST(LrSchedule, Milestones) {
  const std::vector<std::int64_t> m{60, 80, 90};
  EXPECT_EQ(lr_at(0, 0.05, m, 0.1), 0.05);
  EXPECT_NEAR(lr_at(85, 0.05, m, 0.1), 0.0005, 1e-18);
  EXPECT_NEAR(lr_at(60, 0.05, m, 0.1), 0.005, 1e-17);
  EXPECT_NEAR(lr_at(99, 0.05, m, 0.1), 0.00005, 1e-19);
  for (std::int64_t e : {0, 10, 1000}) EXPECT_EQ(lr_at(e, 0.3, {}, 0.1), 0.3);
}

TEST(Erf, ZeroAndOddSymmetry) {
  EXPECT_EQ(erf_approx(0.0), 0.0);
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-6.0, 6.0);
    EXPECT_EQ(erf_approx(-x), -erf_approx(x));
  }
}

TEST(Erf, SeriesOracle) {
  EXPECT_NEAR(static_cast<double>(erf_series(1.0L)), 0.8427007929497149, 1e-15);
  EXPECT_NEAR(erf_approx(1.0), static_cast<double>(erf_series(1.0L)), 1.5e-7);
  for (int i = -3000; i <= 3000; ++i) {
    const double x = i * 1e-3;
    ASSERT_LE(std::fabs(erf_approx(x) - static_cast<double>(erf_series(x))), 1.5e-7) << x;
  }
  for (int i = 0; i <= 1000; ++i) {
    const double x = 3.0 + i * 0.005;
    ASSERT_LE(std::fabs(erf_approx(x) - std::erf(x)), 1.5e-7) << x;
  }
}

TEST(Erf, DerivativeIsExact) {
  for (double x : {-2.0, -0.3, 0.0, 0.7, 1.9}) {
    EXPECT_NEAR(erf_derivative(x), 2.0 / std::sqrt(std::numbers::pi) * std::exp(-x * x), 1e-16);
  }
}

TEST(Params, LengthMatchesShapes) {
  MlpSpec spec{3, {5, 4}, 2, Activation::kRelu, true};
  const ParamVector p = init_params(spec, 1);
  std::size_t total = 0;
  for (const Shape& s : p.shapes()) total += s.size();
  EXPECT_EQ(p.size(), total);
  EXPECT_EQ(p.size(), 3u * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
  EXPECT_THROW(ParamVector(parameter_shapes(spec), std::vector<double>(3)), DimensionError);
}

TEST(Params, InitIsSeededAndBounded) {
  MlpSpec spec{4, {16}, 3, Activation::kRelu, true};
  EXPECT_EQ(init_params(spec, 9), init_params(spec, 9));
  EXPECT_FALSE(init_params(spec, 9) == init_params(spec, 10));
  const ParamVector p = init_params(spec, 9);
  EXPECT_LE(p.block(0).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 4.0));
  EXPECT_LE(p.block(2).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 16.0));
}

TEST(Spec, Validation) {
  EXPECT_THROW((MlpSpec{0, {4}, 1, Activation::kRelu, true}.validate()), ConfigError);
  EXPECT_THROW((MlpSpec{1, {0}, 1, Activation::kRelu, true}.validate()), ConfigError);
  EXPECT_THROW((MlpSpec{1, {4}, 0, Activation::kRelu, true}.validate()), ConfigError);
  EXPECT_THROW(parse_activation("gelu"), ConfigError);
  EXPECT_EQ(parse_activation("erf"), Activation::kErf);
}
