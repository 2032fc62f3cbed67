#include "mfrl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfrl/error.hpp"
#include "mfrl/rng.hpp"

namespace mfrl {

namespace {

double activate(Activation a, double z) {
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

// Derivative expressed through the pre-activation z (and activation value y
// where that is cheaper). ReLU'(0) is taken as 0.
double activate_grad(Activation a, double z, double y) {
  switch (a) {
    case Activation::kRelu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh:
      return 1.0 - y * y;
    case Activation::kErf:
      return erf_derivative(z);
  }
  return 1.0;
}

std::string layer_name(const MlpSpec& spec, std::size_t layer) {
  if (layer + 1 == static_cast<std::size_t>(spec.layer_count())) return "top layer";
  return "hidden layer " + std::to_string(layer);
}

void check_batch(const MlpSpec& spec, const ParamVector& params, const Matrix& x) {
  check_params(spec, params);
  if (x.cols() != spec.input_dim) {
    throw DimensionError("layer 0: input batch has " + std::to_string(x.cols()) +
                         " columns, expected input_dim " + std::to_string(spec.input_dim));
  }
}

ForwardPass run_hidden(const MlpSpec& spec, const ParamVector& params, const Matrix& x) {
  ForwardPass pass;
  const std::size_t hidden = spec.hidden_dims.size();
  pass.pre.reserve(hidden);
  pass.act.reserve(hidden + 1);
  pass.act.push_back(x);
  for (std::size_t l = 0; l < hidden; ++l) {
    const auto w = params.block(2 * l);
    const auto b = params.block(2 * l + 1);
    Matrix z = pass.act.back() * w.transpose();
    z.rowwise() += b.col(0).transpose();
    Matrix y = z.unaryExpr([&](double v) { return activate(spec.activation, v); });
    pass.pre.push_back(std::move(z));
    pass.act.push_back(std::move(y));
  }
  return pass;
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kErf:
      return "erf";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "erf") return Activation::kErf;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected relu, tanh or erf)");
}

// std::erf is within an ulp or two of erf, so backward's exact derivative
// stays consistent with the forward pass. A rational approximation such as
// Abramowitz-Stegun 7.1.26 has slope errors near 1e-4 relative, which show up
// in finite-difference checks.
double erf_approx(double x) { return std::erf(x); }

double erf_derivative(double x) {
  return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-x * x);
}

int MlpSpec::feature_dim() const {
  return hidden_dims.empty() ? input_dim : hidden_dims.back();
}

void MlpSpec::validate() const {
  if (input_dim < 1) throw ConfigError("MlpSpec: input_dim must be >= 1");
  if (output_dim < 1) throw ConfigError("MlpSpec: output_dim must be >= 1");
  for (std::size_t i = 0; i < hidden_dims.size(); ++i) {
    if (hidden_dims[i] < 1) {
      throw ConfigError("MlpSpec: hidden_dims[" + std::to_string(i) + "] must be >= 1");
    }
  }
  if (!bias) throw ConfigError("MlpSpec: bias-free layers are not supported");
}

ParamVector::ParamVector(std::vector<Shape> shapes) : shapes_(std::move(shapes)) {
  build_offsets();
  values_.assign(offsets_.back(), 0.0);
}

ParamVector::ParamVector(std::vector<Shape> shapes, std::vector<double> values)
    : values_(std::move(values)), shapes_(std::move(shapes)) {
  build_offsets();
  if (values_.size() != offsets_.back()) {
    throw DimensionError("ParamVector: " + std::to_string(values_.size()) +
                         " values do not match shape table total " +
                         std::to_string(offsets_.back()));
  }
}

void ParamVector::build_offsets() {
  offsets_.assign(shapes_.size() + 1, 0);
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    offsets_[i + 1] = offsets_[i] + shapes_[i].size();
  }
}

Eigen::Map<RowMajorMatrix> ParamVector::block(std::size_t i) {
  const Shape& s = shapes_.at(i);
  return {values_.data() + offsets_[i], s.rows, s.cols};
}

Eigen::Map<const RowMajorMatrix> ParamVector::block(std::size_t i) const {
  const Shape& s = shapes_.at(i);
  return {values_.data() + offsets_[i], s.rows, s.cols};
}

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<Shape> parameter_shapes(const MlpSpec& spec) {
  spec.validate();
  std::vector<Shape> shapes;
  int in = spec.input_dim;
  for (int width : spec.hidden_dims) {
    shapes.push_back({width, in});
    shapes.push_back({width, 1});
    in = width;
  }
  shapes.push_back({spec.output_dim, in});
  shapes.push_back({spec.output_dim, 1});
  return shapes;
}

ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
  ParamVector params(parameter_shapes(spec));
  Rng rng(derive_seed(seed, 0x1417));
  for (std::size_t l = 0; l < static_cast<std::size_t>(spec.layer_count()); ++l) {
    auto w = params.block(2 * l);
    auto b = params.block(2 * l + 1);
    const double fan_in = static_cast<double>(w.cols());
    const double w_bound = std::sqrt(6.0 / fan_in);
    const double b_bound = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-w_bound, w_bound);
    }
    for (Eigen::Index r = 0; r < b.rows(); ++r) b(r, 0) = rng.uniform(-b_bound, b_bound);
  }
  return params;
}

void check_params(const MlpSpec& spec, const ParamVector& params) {
  const auto expected = parameter_shapes(spec);
  if (params.shapes().size() != expected.size()) {
    throw DimensionError("parameter table has " + std::to_string(params.shapes().size()) +
                         " blocks, spec needs " + std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (!(params.shapes()[i] == expected[i])) {
      const Shape& got = params.shapes()[i];
      throw DimensionError(layer_name(spec, i / 2) + (i % 2 == 0 ? " weight" : " bias") +
                           ": shape " + std::to_string(got.rows) + "x" + std::to_string(got.cols) +
                           ", expected " + std::to_string(expected[i].rows) + "x" +
                           std::to_string(expected[i].cols));
    }
  }
}

ForwardPass forward_features(const MlpSpec& spec, const ParamVector& params, const Matrix& x) {
  check_batch(spec, params, x);
  return run_hidden(spec, params, x);
}

ForwardPass forward(const MlpSpec& spec, const ParamVector& params, const Matrix& x) {
  check_batch(spec, params, x);
  ForwardPass pass = run_hidden(spec, params, x);
  const std::size_t top = spec.hidden_dims.size();
  const auto w = params.block(2 * top);
  const auto b = params.block(2 * top + 1);
  pass.outputs = pass.features() * w.transpose();
  pass.outputs.rowwise() += b.col(0).transpose();
  return pass;
}

void backward_features(const MlpSpec& spec, const ParamVector& params, const ForwardPass& pass,
                       Matrix d_features, ParamVector& grad) {
  Matrix delta = std::move(d_features);
  for (std::size_t l = spec.hidden_dims.size(); l-- > 0;) {
    const Matrix& z = pass.pre[l];
    const Matrix& y = pass.act[l + 1];
    for (Eigen::Index c = 0; c < delta.cols(); ++c) {
      for (Eigen::Index r = 0; r < delta.rows(); ++r) {
        delta(r, c) *= activate_grad(spec.activation, z(r, c), y(r, c));
      }
    }
    if (!delta.allFinite()) {
      Eigen::Index bad_row = 0;
      for (Eigen::Index r = 0; r < delta.rows(); ++r) {
        if (!delta.row(r).allFinite()) {
          bad_row = r;
          break;
        }
      }
      throw NumericError("non-finite gradient in " + layer_name(spec, l) + " at batch index " +
                         std::to_string(bad_row));
    }
    grad.block(2 * l).noalias() += delta.transpose() * pass.act[l];
    grad.block(2 * l + 1).col(0).noalias() += delta.colwise().sum().transpose();
    if (l > 0) delta = delta * params.block(2 * l);
  }
}

ParamVector backward(const MlpSpec& spec, const ParamVector& params, const ForwardPass& pass,
                     const Matrix& d_outputs) {
  check_params(spec, params);
  const std::size_t top = spec.hidden_dims.size();
  if (d_outputs.rows() != pass.features().rows() || d_outputs.cols() != spec.output_dim) {
    throw DimensionError("top layer: upstream gradient is " + std::to_string(d_outputs.rows()) +
                         "x" + std::to_string(d_outputs.cols()) + ", expected " +
                         std::to_string(pass.features().rows()) + "x" +
                         std::to_string(spec.output_dim));
  }
  if (!d_outputs.allFinite()) {
    for (Eigen::Index r = 0; r < d_outputs.rows(); ++r) {
      if (!d_outputs.row(r).allFinite()) {
        throw NumericError("non-finite gradient in top layer at batch index " + std::to_string(r));
      }
    }
  }
  ParamVector grad = ParamVector::zeros_like(params);
  grad.block(2 * top).noalias() = d_outputs.transpose() * pass.features();
  grad.block(2 * top + 1).col(0) = d_outputs.colwise().sum().transpose();
  if (top > 0) {
    backward_features(spec, params, pass, d_outputs * params.block(2 * top), grad);
  }
  return grad;
}

void sgd_step(ParamVector& params, const ParamVector& grads, double lr, SgdState& state) {
  if (!(lr > 0.0)) throw ConfigError("sgd_step: learning rate must be positive");
  if (grads.size() != params.size()) {
    throw DimensionError("sgd_step: gradient length " + std::to_string(grads.size()) +
                         " != parameter length " + std::to_string(params.size()));
  }
  if (state.momentum_buffer.empty()) state.momentum_buffer.assign(params.size(), 0.0);
  if (state.momentum_buffer.size() != params.size()) {
    throw DimensionError("sgd_step: momentum buffer length does not match parameters");
  }
  auto theta = params.values();
  const auto g = grads.values();
  auto& v = state.momentum_buffer;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    v[i] = state.momentum * v[i] + g[i] + state.weight_decay * theta[i];
    theta[i] -= lr * v[i];
  }
  if (!params.all_finite()) throw NumericError("sgd_step produced non-finite parameters");
}

double lr_at(std::int64_t step, double base_lr, std::span<const std::int64_t> milestones,
             double gamma) {
  const auto passed = std::upper_bound(milestones.begin(), milestones.end(), step) - milestones.begin();
  return base_lr * std::pow(gamma, static_cast<double>(passed));
}

}  // namespace mfrl
