#pragma once

// Small fully connected networks with a hand-written reverse pass.
//
// Inputs are batched column-wise: a (logical_inputs x batch) matrix. With the
// periodic encoding the first logical input is an angle and is expanded to
// (sin, cos) before the first layer, so the first layer width counts the
// encoded features.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "planeforge/errors.hpp"

namespace planeforge {

enum class OutputHead : std::uint8_t { kIdentity = 0, kSoftplus = 1, kSigmoid = 2 };
enum class InputEncoding : std::uint8_t { kRaw = 0, kPeriodicFirst = 1 };

namespace detail {

template <typename Scalar>
Scalar softplus(Scalar z) {
  return std::log1p(std::exp(-std::abs(z))) + std::max(z, Scalar(0));
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= 0) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

}  // namespace detail

template <typename Scalar>
class MlpFunction {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  MlpFunction() = default;

  /// `layer_sizes` are encoded widths, input first. Parameters start at zero.
  MlpFunction(std::vector<int> layer_sizes, OutputHead head, InputEncoding encoding)
      : sizes_(std::move(layer_sizes)), head_(head), encoding_(encoding) {
    if (sizes_.size() < 2) throw ShapeError("an MLP needs at least an input and an output layer");
    for (int s : sizes_)
      if (s <= 0) throw ShapeError("layer sizes must be positive");
    if (encoding_ == InputEncoding::kPeriodicFirst && sizes_.front() < 2)
      throw ShapeError("periodic encoding needs at least two encoded inputs");
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
      weights_.push_back(Matrix::Zero(sizes_[l], sizes_[l - 1]));
      biases_.push_back(Vector::Zero(sizes_[l]));
    }
  }

  /// theta -> r with 1 -> 32 -> 32 -> 1 (theta encoded as sin/cos), softplus head.
  static MlpFunction boundary(std::uint64_t seed) {
    MlpFunction f({2, 32, 32, 1}, OutputHead::kSoftplus, InputEncoding::kPeriodicFirst);
    f.randomize(seed);
    return f;
  }

  /// (theta, r) -> RGB with 2 -> 64 -> 64 -> 3, sigmoid head.
  static MlpFunction color(std::uint64_t seed) {
    MlpFunction f({3, 64, 64, 3}, OutputHead::kSigmoid, InputEncoding::kPeriodicFirst);
    f.randomize(seed);
    return f;
  }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  void randomize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const Scalar bound = Scalar(1) / std::sqrt(Scalar(weights_[l].cols()));
      std::uniform_real_distribution<double> dist(-double(bound), double(bound));
      for (Eigen::Index j = 0; j < weights_[l].cols(); ++j)
        for (Eigen::Index i = 0; i < weights_[l].rows(); ++i) weights_[l](i, j) = Scalar(dist(rng));
      for (Eigen::Index i = 0; i < biases_[l].size(); ++i) biases_[l][i] = Scalar(dist(rng));
    }
  }

  [[nodiscard]] const std::vector<int>& layer_sizes() const { return sizes_; }
  [[nodiscard]] OutputHead head() const { return head_; }
  [[nodiscard]] InputEncoding encoding() const { return encoding_; }
  [[nodiscard]] int input_dim() const {
    return encoding_ == InputEncoding::kPeriodicFirst ? sizes_.front() - 1 : sizes_.front();
  }
  [[nodiscard]] int output_dim() const { return sizes_.back(); }
  [[nodiscard]] std::size_t layer_count() const { return weights_.size(); }

  [[nodiscard]] std::vector<Matrix>& weights() { return weights_; }
  [[nodiscard]] const std::vector<Matrix>& weights() const { return weights_; }
  [[nodiscard]] std::vector<Vector>& biases() { return biases_; }
  [[nodiscard]] const std::vector<Vector>& biases() const { return biases_; }

  [[nodiscard]] Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  /// Flat view: for each layer, weights (column-major) then biases.
  [[nodiscard]] Vector parameters() const {
    Vector p(parameter_count());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      p.segment(k, weights_[l].size()) = weights_[l].reshaped();
      k += weights_[l].size();
      p.segment(k, biases_[l].size()) = biases_[l];
      k += biases_[l].size();
    }
    return p;
  }

  void set_parameters(const Vector& p) {
    if (p.size() != parameter_count()) throw ShapeError("parameter vector has the wrong length");
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      weights_[l].reshaped() = p.segment(k, weights_[l].size());
      k += weights_[l].size();
      biases_[l] = p.segment(k, biases_[l].size());
      k += biases_[l].size();
    }
  }

  /// Throws when layer shapes disagree or any parameter is non-finite.
  void validate() const {
    if (weights_.size() + 1 != sizes_.size()) throw ShapeError("layer count mismatch");
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      if (weights_[l].rows() != sizes_[l + 1] || weights_[l].cols() != sizes_[l] ||
          biases_[l].size() != sizes_[l + 1])
        throw ShapeError("layer dimensions disagree");
      if (!weights_[l].allFinite() || !biases_[l].allFinite())
        throw InvariantError("non-finite MLP parameter");
    }
  }

  [[nodiscard]] Matrix encode(const Matrix& inputs) const {
    if (inputs.rows() != input_dim()) throw ShapeError("MLP input dimension mismatch");
    if (encoding_ == InputEncoding::kRaw) return inputs;
    Matrix enc(sizes_.front(), inputs.cols());
    enc.row(0) = inputs.row(0).array().sin();
    enc.row(1) = inputs.row(0).array().cos();
    if (inputs.rows() > 1) enc.bottomRows(inputs.rows() - 1) = inputs.bottomRows(inputs.rows() - 1);
    return enc;
  }

  [[nodiscard]] Matrix forward(const Matrix& inputs) const {
    Matrix a = encode(inputs);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Matrix z = weights_[l] * a;
      z.colwise() += biases_[l];
      if (l + 1 < weights_.size()) {
        a = z.array().tanh().matrix();
      } else {
        a = apply_head(z);
      }
    }
    return a;
  }

  [[nodiscard]] Vector forward(const Vector& x) const {
    return forward(Matrix(x)).col(0);
  }

  [[nodiscard]] Scalar operator()(Scalar x) const {
    Matrix in(1, 1);
    in(0, 0) = x;
    return forward(in)(0, 0);
  }

  [[nodiscard]] Matrix apply_head(const Matrix& z) const {
    switch (head_) {
      case OutputHead::kSoftplus:
        return z.unaryExpr([](Scalar v) { return detail::softplus(v); });
      case OutputHead::kSigmoid:
        return z.unaryExpr([](Scalar v) { return detail::sigmoid(v); });
      case OutputHead::kIdentity:
        break;
    }
    return z;
  }

  /// d head / d z given the pre-activation and the head output.
  [[nodiscard]] Matrix head_derivative(const Matrix& z, const Matrix& out) const {
    switch (head_) {
      case OutputHead::kSoftplus:
        return z.unaryExpr([](Scalar v) { return detail::sigmoid(v); });
      case OutputHead::kSigmoid:
        return (out.array() * (Scalar(1) - out.array())).matrix();
      case OutputHead::kIdentity:
        break;
    }
    return Matrix::Ones(z.rows(), z.cols());
  }

 private:
  std::vector<int> sizes_;
  OutputHead head_{OutputHead::kIdentity};
  InputEncoding encoding_{InputEncoding::kRaw};
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

/// Gradients shaped like the network parameters, summed over the batch, plus
/// per-sample gradients with respect to the logical inputs.
template <typename Scalar>
struct MlpGradients {
  using Matrix = typename MlpFunction<Scalar>::Matrix;
  using Vector = typename MlpFunction<Scalar>::Vector;

  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix inputs;

  [[nodiscard]] Vector flat() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    Vector p(n);
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      p.segment(k, weights[l].size()) = weights[l].reshaped();
      k += weights[l].size();
      p.segment(k, biases[l].size()) = biases[l];
      k += biases[l].size();
    }
    return p;
  }
};

/// Records one batched forward pass and replays it backwards.
///
/// The tape keeps a reference to the network; the network must outlive the
/// tape and must not change between record() and backward().
template <typename Scalar>
class GradientTape {
 public:
  using Matrix = typename MlpFunction<Scalar>::Matrix;

  Matrix record(const MlpFunction<Scalar>& f, const Matrix& inputs) {
    f_ = &f;
    inputs_ = inputs;
    activations_.clear();
    pre_activations_.clear();
    activations_.push_back(f.encode(inputs));
    const auto& W = f.weights();
    const auto& b = f.biases();
    for (std::size_t l = 0; l < W.size(); ++l) {
      Matrix z = W[l] * activations_.back();
      z.colwise() += b[l];
      pre_activations_.push_back(z);
      if (l + 1 < W.size()) {
        activations_.push_back(z.array().tanh().matrix());
      } else {
        activations_.push_back(f.apply_head(z));
      }
    }
    return activations_.back();
  }

  [[nodiscard]] bool has_forward() const { return f_ != nullptr; }
  [[nodiscard]] const Matrix& output() const { return activations_.back(); }

  /// Gradient of sum(output .* upstream) with respect to every parameter and input.
  [[nodiscard]] MlpGradients<Scalar> backward(const Matrix& upstream) const {
    if (!f_) throw StateError("backward called without a recorded forward pass");
    const auto& W = f_->weights();
    const std::size_t L = W.size();
    if (upstream.rows() != f_->output_dim() || upstream.cols() != inputs_.cols())
      throw ShapeError("upstream gradient shape mismatch");

    MlpGradients<Scalar> g;
    g.weights.resize(L);
    g.biases.resize(L);
    Matrix delta = (upstream.array() *
                    f_->head_derivative(pre_activations_[L - 1], activations_[L]).array())
                       .matrix();
    for (std::size_t l = L; l-- > 0;) {
      g.weights[l].noalias() = delta * activations_[l].transpose();
      g.biases[l] = delta.rowwise().sum();
      Matrix back = W[l].transpose() * delta;
      if (l > 0) {
        delta = (back.array() * (Scalar(1) - activations_[l].array().square())).matrix();
      } else {
        delta = std::move(back);
      }
    }
    // delta now holds gradients w.r.t. the encoded inputs.
    if (f_->encoding() == InputEncoding::kRaw) {
      g.inputs = std::move(delta);
    } else {
      g.inputs.resize(inputs_.rows(), inputs_.cols());
      g.inputs.row(0) = (delta.row(0).array() * activations_[0].row(1).array() -
                         delta.row(1).array() * activations_[0].row(0).array())
                            .matrix();
      if (inputs_.rows() > 1) g.inputs.bottomRows(inputs_.rows() - 1) = delta.bottomRows(inputs_.rows() - 1);
    }
    return g;
  }

 private:
  const MlpFunction<Scalar>* f_ = nullptr;
  Matrix inputs_;
  std::vector<Matrix> pre_activations_;
  std::vector<Matrix> activations_;
};

/// One-shot forward + backward.
template <typename Scalar>
[[nodiscard]] MlpGradients<Scalar> backward(const MlpFunction<Scalar>& f,
                                            const typename MlpFunction<Scalar>::Matrix& inputs,
                                            const typename MlpFunction<Scalar>::Matrix& upstream) {
  GradientTape<Scalar> tape;
  tape.record(f, inputs);
  return tape.backward(upstream);
}

using Mlp = MlpFunction<double>;
using MlpGrad = MlpGradients<double>;
using Tape = GradientTape<double>;

/// Adam state over a flat parameter vector.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(Eigen::Index n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)), b1_(beta1), b2_(beta2), eps_(eps) {}

  /// Returns the parameter step (to be added) for gradient `g`.
  [[nodiscard]] Eigen::VectorXd step(const Eigen::VectorXd& g, double lr) {
    ++t_;
    m_ = b1_ * m_ + (1 - b1_) * g;
    v_ = b2_ * v_ + (1 - b2_) * g.cwiseAbs2();
    const double c1 = 1 - std::pow(b1_, t_);
    const double c2 = 1 - std::pow(b2_, t_);
    return -lr * ((m_ / c1).array() / ((v_ / c2).array().sqrt() + eps_)).matrix();
  }

 private:
  Eigen::VectorXd m_, v_;
  double b1_{0.9}, b2_{0.999}, eps_{1e-8};
  int t_{0};
};

// ---------------------------------------------------------------------------
// Fitting helpers (mlp_fit.cpp)

struct BoundaryFitConfig {
  int bins = 72;
  int iterations = 1500;
  double learning_rate = 1e-2;
  std::uint64_t seed = 1;
};

struct BoundaryFit {
  Mlp function;
  double mean_abs_error{0};
  /// (bin center angle, max radius) for every non-empty bin.
  std::vector<std::pair<double, double>> targets;
};

struct PolarSample {
  double r{0};
  double theta{0};
};

/// Fits f_boundary(theta) to the per-angular-bin maximum radius of the samples.
/// Throws InitError with fewer than 3 samples or 3 occupied bins.
BoundaryFit init_boundary_from_voxels(const std::vector<PolarSample>& samples,
                                      const BoundaryFitConfig& cfg = {});

/// Per-bin maximum radius targets (bin center, r_max) for occupied bins.
std::vector<std::pair<double, double>> boundary_bin_targets(const std::vector<PolarSample>& samples,
                                                            int bins);

struct ColorFitConfig {
  int iterations = 800;
  double learning_rate = 5e-3;
  int batch = 2048;
  std::uint64_t seed = 2;
};

struct ColorSample {
  double theta{0};
  double r{0};
  Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
};

struct ColorFit {
  Mlp function;
  double mse{0};
};

/// Fits f_color(theta, r) to observed colors by Adam on the squared error.
ColorFit fit_color(const std::vector<ColorSample>& samples, const ColorFitConfig& cfg = {});

/// Serialized form: "MLP1" magic, u8 head, u8 encoding, u16 zero, u32 layer
/// count, u32 sizes..., then little-endian float64 parameters.
std::vector<std::uint8_t> serialize_mlp(const Mlp& f);
Mlp deserialize_mlp(const std::vector<std::uint8_t>& bytes);

}  // namespace planeforge
