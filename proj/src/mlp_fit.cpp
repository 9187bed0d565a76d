#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "planeforge/geometry.hpp"
#include "planeforge/mlp.hpp"

namespace planeforge {
namespace {

double inverse_softplus(double y) {
  // log(exp(y) - 1), stable for large y
  return y > 30 ? y : std::log(std::expm1(y));
}

}  // namespace

std::vector<std::pair<double, double>> boundary_bin_targets(const std::vector<PolarSample>& samples,
                                                            int bins) {
  constexpr double two_pi = 2 * std::numbers::pi;
  std::vector<double> best(static_cast<std::size_t>(bins), -1.0);
  for (const auto& s : samples) {
    const double th = wrap_angle(s.theta);
    int b = static_cast<int>(th / two_pi * bins);
    b = std::clamp(b, 0, bins - 1);
    best[static_cast<std::size_t>(b)] = std::max(best[static_cast<std::size_t>(b)], s.r);
  }
  std::vector<std::pair<double, double>> out;
  for (int b = 0; b < bins; ++b) {
    if (best[static_cast<std::size_t>(b)] >= 0)
      out.emplace_back((b + 0.5) * two_pi / bins, best[static_cast<std::size_t>(b)]);
  }
  return out;
}

BoundaryFit init_boundary_from_voxels(const std::vector<PolarSample>& samples,
                                      const BoundaryFitConfig& cfg) {
  if (samples.size() < 3) throw InitError("boundary fit needs at least 3 samples");
  auto targets = boundary_bin_targets(samples, cfg.bins);
  if (targets.size() < 3) throw InitError("boundary fit needs samples in at least 3 angular bins");

  const Eigen::Index n = static_cast<Eigen::Index>(targets.size());
  Eigen::MatrixXd theta(1, n);
  Eigen::RowVectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    theta(0, i) = targets[static_cast<std::size_t>(i)].first;
    y[i] = std::max(targets[static_cast<std::size_t>(i)].second, 1e-6);
  }

  Mlp f = Mlp::boundary(cfg.seed);

  // Random-feature start: solve the output layer in softplus-inverse space by
  // ridge least squares over the fixed hidden features.
  {
    Eigen::MatrixXd a = f.encode(theta);
    for (std::size_t l = 0; l + 1 < f.layer_count(); ++l) {
      Eigen::MatrixXd z = f.weights()[l] * a;
      z.colwise() += f.biases()[l];
      a = z.array().tanh().matrix();
    }
    const Eigen::Index h = a.rows();
    Eigen::MatrixXd A(n, h + 1);
    A.leftCols(h) = a.transpose();
    A.col(h).setOnes();
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) rhs[i] = inverse_softplus(y[i]);
    Eigen::MatrixXd AtA = A.transpose() * A;
    AtA.diagonal().array() += 1e-6;
    Eigen::VectorXd sol = AtA.ldlt().solve(A.transpose() * rhs);
    f.weights().back().row(0) = sol.head(h).transpose();
    f.biases().back()[0] = sol[h];
  }

  AdamState adam(f.parameter_count());
  Mlp best = f;
  double best_loss = std::numeric_limits<double>::infinity();
  Tape tape;
  for (int it = 0; it <= cfg.iterations; ++it) {
    const Eigen::MatrixXd out = tape.record(f, theta);
    const Eigen::RowVectorXd err = out.row(0) - y;
    const double loss = err.squaredNorm() / double(n);
    if (loss < best_loss) {
      best_loss = loss;
      best = f;
    }
    if (it == cfg.iterations) break;
    const Eigen::MatrixXd upstream = (2.0 / double(n)) * err;
    const auto g = tape.backward(upstream);
    f.set_parameters(f.parameters() + adam.step(g.flat(), cfg.learning_rate));
  }

  BoundaryFit fit;
  fit.function = std::move(best);
  const Eigen::MatrixXd out = fit.function.forward(theta);
  fit.mean_abs_error = (out.row(0) - y).cwiseAbs().mean();
  fit.targets = std::move(targets);
  return fit;
}

ColorFit fit_color(const std::vector<ColorSample>& samples, const ColorFitConfig& cfg) {
  if (samples.empty()) throw InitError("color fit needs at least one sample");
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd in(2, n);
  Eigen::MatrixXd target(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    in(0, i) = s.theta;
    in(1, i) = s.r;
    target.col(i) = s.rgb;
  }

  Mlp f = Mlp::color(cfg.seed);
  // Start the output bias at the mean color so early steps shape the pattern.
  const Eigen::Vector3d mean = target.rowwise().mean().cwiseMax(1e-3).cwiseMin(1 - 1e-3);
  f.weights().back() *= 0.1;
  f.biases().back() = (mean.array() / (1 - mean.array())).log().matrix();

  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Eigen::Index batch = std::min<Eigen::Index>(cfg.batch, n);
  AdamState adam(f.parameter_count());
  Tape tape;
  std::size_t cursor = order.size();
  Eigen::MatrixXd bin(2, batch), btarget(3, batch);
  for (int it = 0; it < cfg.iterations; ++it) {
    for (Eigen::Index j = 0; j < batch; ++j) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const Eigen::Index i = order[cursor++];
      bin.col(j) = in.col(i);
      btarget.col(j) = target.col(i);
    }
    const Eigen::MatrixXd out = tape.record(f, bin);
    const Eigen::MatrixXd upstream = (2.0 / double(3 * batch)) * (out - btarget);
    const auto g = tape.backward(upstream);
    // Linear decay keeps the final iterate from bouncing around the optimum.
    const double lr = cfg.learning_rate * (1.0 - 0.9 * double(it) / double(cfg.iterations));
    f.set_parameters(f.parameters() + adam.step(g.flat(), lr));
  }

  ColorFit fit;
  fit.function = std::move(f);
  fit.mse = (fit.function.forward(in) - target).squaredNorm() / double(3 * n);
  return fit;
}

std::vector<std::uint8_t> serialize_mlp(const Mlp& f) {
  static_assert(std::endian::native == std::endian::little, "serializer assumes a little-endian host");
  std::vector<std::uint8_t> out;
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  out.insert(out.end(), {'M', 'L', 'P', '1'});
  out.push_back(static_cast<std::uint8_t>(f.head()));
  out.push_back(static_cast<std::uint8_t>(f.encoding()));
  out.push_back(0);
  out.push_back(0);
  put_u32(static_cast<std::uint32_t>(f.layer_sizes().size()));
  for (int s : f.layer_sizes()) put_u32(static_cast<std::uint32_t>(s));
  const Eigen::VectorXd p = f.parameters();
  const std::size_t off = out.size();
  out.resize(off + static_cast<std::size_t>(p.size()) * sizeof(double));
  std::memcpy(out.data() + off, p.data(), static_cast<std::size_t>(p.size()) * sizeof(double));
  return out;
}

Mlp deserialize_mlp(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw ShapeError("truncated MLP blob");
  };
  auto get_u32 = [&]() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 4;
    return v;
  };
  need(8);
  if (std::memcmp(bytes.data(), "MLP1", 4) != 0) throw ShapeError("bad MLP blob magic");
  const auto head = static_cast<OutputHead>(bytes[4]);
  const auto enc = static_cast<InputEncoding>(bytes[5]);
  pos = 8;
  const std::uint32_t count = get_u32();
  if (count < 2 || count > 64) throw ShapeError("implausible MLP layer count");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < count; ++i) sizes.push_back(static_cast<int>(get_u32()));
  Mlp f(sizes, head, enc);
  Eigen::VectorXd p(f.parameter_count());
  const std::size_t nbytes = static_cast<std::size_t>(p.size()) * sizeof(double);
  need(nbytes);
  std::memcpy(p.data(), bytes.data() + pos, nbytes);
  pos += nbytes;
  if (pos != bytes.size()) throw ShapeError("trailing bytes after MLP parameters");
  f.set_parameters(p);
  f.validate();
  return f;
}

}  // namespace planeforge
