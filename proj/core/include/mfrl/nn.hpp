#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace mfrl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { kRelu, kTanh, kErf };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

// erf activation, |error| <= 1.5e-7 (std::erf, so far tighter in practice).
double erf_approx(double x);

// Exact derivative of erf, 2/sqrt(pi) * exp(-x^2), used by backward.
double erf_derivative(double x);

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims;
  int output_dim = 1;
  Activation activation = Activation::kRelu;
  bool bias = true;

  // Width p of the feature vector h(x): the last hidden layer, or the input
  // when there are no hidden layers.
  int feature_dim() const;
  // Hidden layers plus the top linear layer.
  int layer_count() const { return static_cast<int>(hidden_dims.size()) + 1; }

  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

struct Shape {
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  bool operator==(const Shape&) const = default;
};

// Flat storage for every trainable weight. Layer l owns two blocks: the
// weight (out x in, row-major) at block 2l and the bias (out x 1) at 2l+1.
class ParamVector {
 public:
  ParamVector() = default;
  // Zero-initialized storage for the given shapes.
  explicit ParamVector(std::vector<Shape> shapes);
  ParamVector(std::vector<Shape> shapes, std::vector<double> values);

  static ParamVector zeros_like(const ParamVector& other) { return ParamVector(other.shapes_); }

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& raw() const { return values_; }
  const std::vector<Shape>& shapes() const { return shapes_; }

  Eigen::Map<Vector> as_vector() { return {values_.data(), static_cast<Eigen::Index>(values_.size())}; }
  Eigen::Map<const Vector> as_vector() const {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }

  Eigen::Map<RowMajorMatrix> block(std::size_t i);
  Eigen::Map<const RowMajorMatrix> block(std::size_t i) const;
  std::size_t block_offset(std::size_t i) const { return offsets_.at(i); }

  bool all_finite() const;

  bool operator==(const ParamVector& other) const {
    return shapes_ == other.shapes_ && values_ == other.values_;
  }

 private:
  void build_offsets();

  std::vector<double> values_;
  std::vector<Shape> shapes_;
  std::vector<std::size_t> offsets_;
};

std::vector<Shape> parameter_shapes(const MlpSpec& spec);

// Uniform fan-in initialization: weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)),
// biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
ParamVector init_params(const MlpSpec& spec, std::uint64_t seed);

// Throws DimensionError unless params were laid out for spec.
void check_params(const MlpSpec& spec, const ParamVector& params);

struct ForwardPass {
  // pre[l]: pre-activation of hidden layer l (batch x width).
  std::vector<Matrix> pre;
  // act[0] is the input batch; act[l + 1] = activation(pre[l]).
  std::vector<Matrix> act;
  // Top-layer outputs; empty when only features were requested.
  Matrix outputs;

  const Matrix& features() const { return act.back(); }
};

// Rows of x are samples. Features are the last hidden activations, outputs
// the affine top layer applied to them.
ForwardPass forward(const MlpSpec& spec, const ParamVector& params, const Matrix& x);

// Same as forward() but stops before the top layer.
ForwardPass forward_features(const MlpSpec& spec, const ParamVector& params, const Matrix& x);

// Gradient of the loss w.r.t. every parameter given dL/d(outputs).
ParamVector backward(const MlpSpec& spec, const ParamVector& params, const ForwardPass& pass,
                     const Matrix& d_outputs);

// Back-propagates dL/d(features) through the hidden layers, adding into grad.
// The top-layer blocks of grad are left untouched.
void backward_features(const MlpSpec& spec, const ParamVector& params, const ForwardPass& pass,
                       Matrix d_features, ParamVector& grad);

struct SgdState {
  std::vector<double> momentum_buffer;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

// Classical SGD with coupled L2 decay:
//   v <- momentum * v + g + weight_decay * theta;  theta <- theta - lr * v
void sgd_step(ParamVector& params, const ParamVector& grads, double lr, SgdState& state);

// base_lr * gamma^(number of milestones <= step).
double lr_at(std::int64_t step, double base_lr, std::span<const std::int64_t> milestones,
             double gamma);

}  // namespace mfrl
