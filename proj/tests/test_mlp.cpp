#include "doctest.h"
#include "planeforge/mlp.hpp"
#include "support.hpp"

using namespace planeforge;
using testing::rel_error;
using testing::uniform;

namespace {

// Straight-line evaluator written independently of MlpFunction::forward.
Eigen::VectorXd reference_eval(const Mlp& f, const Eigen::VectorXd& x) {
  std::vector<double> a;
  if (f.encoding() == InputEncoding::kPeriodicFirst) {
    a.push_back(std::sin(x[0]));
    a.push_back(std::cos(x[0]));
    for (Eigen::Index i = 1; i < x.size(); ++i) a.push_back(x[i]);
  } else {
    for (Eigen::Index i = 0; i < x.size(); ++i) a.push_back(x[i]);
  }
  const std::size_t L = f.layer_count();
  for (std::size_t l = 0; l < L; ++l) {
    const auto& W = f.weights()[l];
    std::vector<double> z(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      double s = f.biases()[l][i];
      for (Eigen::Index j = 0; j < W.cols(); ++j) s += W(i, j) * a[static_cast<std::size_t>(j)];
      double& out = z[static_cast<std::size_t>(i)];
      if (l + 1 < L) {
        out = std::tanh(s);
      } else if (f.head() == OutputHead::kSoftplus) {
        out = std::log(1 + std::exp(s));
      } else if (f.head() == OutputHead::kSigmoid) {
        out = 1 / (1 + std::exp(-s));
      } else {
        out = s;
      }
    }
    a = z;
  }
  return Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
}

double weighted_output(const Mlp& f, const Eigen::MatrixXd& in, const Eigen::MatrixXd& up) {
  return (f.forward(in).array() * up.array()).sum();
}

}  // namespace

TEST_CASE("zero-parameter heads") {
  Mlp b({2, 32, 32, 1}, OutputHead::kSoftplus, InputEncoding::kPeriodicFirst);
  Mlp c({3, 64, 64, 3}, OutputHead::kSigmoid, InputEncoding::kPeriodicFirst);
  for (double th : {0.0, 1.0, 4.0}) {
    CHECK(b(th) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const Eigen::VectorXd out = c.forward(Eigen::VectorXd(Eigen::Vector2d(th, 0.7)));
    CHECK((out.array() == 0.5).all());
  }
}

TEST_CASE("forward matches the straight-line evaluator") {
  std::mt19937_64 rng(4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Mlp c = Mlp::color(seed);
    const Mlp b = Mlp::boundary(seed);
    Eigen::VectorXd x(2);
    x << uniform(rng, 0, 6.28), uniform(rng, 0, 3);
    CHECK((c.forward(x) - reference_eval(c, x)).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::VectorXd t(1);
    t << x[0];
    CHECK(std::abs(b.forward(t)[0] - reference_eval(b, t)[0]) < 1e-12);
  }
}

TEST_CASE("forward rejects wrong input dimension") {
  const Mlp c = Mlp::color(1);
  CHECK_THROWS_AS((void)c.forward(Eigen::MatrixXd(Eigen::MatrixXd::Zero(3, 2))), ShapeError);
  CHECK(c.input_dim() == 2);
  CHECK_THROWS_AS(Mlp({3}, OutputHead::kIdentity, InputEncoding::kRaw), ShapeError);
}

TEST_CASE("forward is deterministic") {
  const Mlp c = Mlp::color(17);
  Eigen::MatrixXd in(2, 3);
  in << 0.1, 2.0, 5.5, 0.3, 1.0, 2.5;
  const Eigen::MatrixXd a = c.forward(in);
  const Eigen::MatrixXd b = c.forward(in);
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("backward trivial cases") {
  Mlp lin({1, 1}, OutputHead::kIdentity, InputEncoding::kRaw);
  lin.weights()[0](0, 0) = 3.0;
  Eigen::MatrixXd x(1, 1), up(1, 1);
  x(0, 0) = 2;
  up(0, 0) = 1;
  const MlpGrad g = backward(lin, x, up);
  CHECK(g.weights[0](0, 0) == 2.0);
  CHECK(g.inputs(0, 0) == 3.0);
  CHECK(g.biases[0][0] == 1.0);

  Mlp flat({2, 32, 32, 1}, OutputHead::kSoftplus, InputEncoding::kPeriodicFirst);
  x(0, 0) = 1.3;
  CHECK(backward(flat, x, up).inputs(0, 0) == 0.0);

  Tape tape;
  CHECK_FALSE(tape.has_forward());
  CHECK_THROWS_AS((void)tape.backward(up), StateError);
}

TEST_CASE("parameter gradients match central finite differences over 100 seeds") {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const bool color = seed % 2 == 0;
    Mlp f = color ? Mlp({3, 8, 8, 3}, OutputHead::kSigmoid, InputEncoding::kPeriodicFirst)
                  : Mlp({2, 8, 8, 1}, OutputHead::kSoftplus, InputEncoding::kPeriodicFirst);
    f.randomize(seed);
    Eigen::MatrixXd in(f.input_dim(), 3);
    Eigen::MatrixXd up(f.output_dim(), 3);
    for (Eigen::Index j = 0; j < 3; ++j) {
      in(0, j) = uniform(rng, 0, 6.28);
      if (color) in(1, j) = uniform(rng, 0, 2);
      for (Eigen::Index i = 0; i < up.rows(); ++i) up(i, j) = uniform(rng, -1, 1);
    }
    const Eigen::VectorXd analytic = backward(f, in, up).flat();
    const Eigen::VectorXd p0 = f.parameters();
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < p0.size(); ++k) {
      Eigen::VectorXd p = p0;
      p[k] += h;
      f.set_parameters(p);
      const double fp = weighted_output(f, in, up);
      p[k] -= 2 * h;
      f.set_parameters(p);
      const double fm = weighted_output(f, in, up);
      worst = std::max(worst, rel_error(analytic[k], (fp - fm) / (2 * h)));
    }
    f.set_parameters(p0);
    // Input gradients too.
    const MlpGrad g = backward(f, in, up);
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
      for (Eigen::Index j = 0; j < in.cols(); ++j) {
        Eigen::MatrixXd ip = in, im = in;
        ip(r, j) += h;
        im(r, j) -= h;
        const double fd = (weighted_output(f, ip, up) - weighted_output(f, im, up)) / (2 * h);
        worst = std::max(worst, rel_error(g.inputs(r, j), fd));
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("boundary head stays positive") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Mlp b = Mlp::boundary(seed);
    b.biases().back()[0] = -60;
    Eigen::MatrixXd th(1, 64);
    for (int i = 0; i < 64; ++i) th(0, i) = i * 0.1;
    CHECK((b.forward(th).array() > 0).all());
  }
}

TEST_CASE("init_boundary_from_voxels on circles") {
  for (double radius : {1.0, 2.0}) {
    std::vector<PolarSample> s;
    for (int i = 0; i < 8; ++i) s.push_back({radius, i * std::numbers::pi / 4});
    BoundaryFitConfig cfg;
    cfg.bins = 8;
    const BoundaryFit fit = init_boundary_from_voxels(s, cfg);
    for (int i = 0; i < 8; ++i) CHECK(std::abs(fit.function((i + 0.5) * std::numbers::pi / 4) - radius) < 0.05);
  }
  CHECK_THROWS_AS((void)init_boundary_from_voxels({{1, 0}, {1, 0.1}}), InitError);
  CHECK_THROWS_AS((void)init_boundary_from_voxels({{1, 0}, {1, 0.01}, {1, 0.02}}), InitError);
}

TEST_CASE("init_boundary_from_voxels on a square plate matches brute-force bin maxima") {
  // Points of a square plate of half-width 1 on a fine grid.
  std::vector<PolarSample> s;
  const int n = 81;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = -1 + 2.0 * i / (n - 1), y = -1 + 2.0 * j / (n - 1);
      s.push_back({std::hypot(x, y), wrap_angle(std::atan2(y, x))});
    }
  }
  BoundaryFitConfig cfg;
  const BoundaryFit fit = init_boundary_from_voxels(s, cfg);
  // Brute-force bin maxima.
  std::vector<double> best(static_cast<std::size_t>(cfg.bins), 0.0);
  for (const auto& p : s) {
    const int b = std::min(cfg.bins - 1, int(p.theta / (2 * std::numbers::pi) * cfg.bins));
    best[static_cast<std::size_t>(b)] = std::max(best[static_cast<std::size_t>(b)], p.r);
  }
  REQUIRE(fit.targets.size() == best.size());
  for (int b = 0; b < cfg.bins; ++b) {
    CHECK(fit.targets[static_cast<std::size_t>(b)].second == best[static_cast<std::size_t>(b)]);
    CHECK(std::abs(fit.function((b + 0.5) * 2 * std::numbers::pi / cfg.bins) - best[static_cast<std::size_t>(b)]) < 0.1);
  }
  CHECK(fit.mean_abs_error < 0.05);
}

TEST_CASE("fit_color learns a two-tone split") {
  std::vector<ColorSample> s;
  std::mt19937_64 rng(8);
  for (int i = 0; i < 3000; ++i) {
    const double th = uniform(rng, 0, 2 * std::numbers::pi), r = uniform(rng, 0, 1.5);
    const Eigen::Vector3d rgb = th < std::numbers::pi ? Eigen::Vector3d(0.8, 0.2, 0.3) : Eigen::Vector3d(0.2, 0.6, 0.7);
    s.push_back({th, r, rgb});
  }
  const ColorFit fit = fit_color(s);
  CHECK(fit.mse < 0.01);
  CHECK_THROWS_AS((void)fit_color({}), InitError);
}

TEST_CASE("serialization round trip") {
  const Mlp c = Mlp::color(5);
  const auto bytes = serialize_mlp(c);
  const Mlp back = deserialize_mlp(bytes);
  CHECK(back.layer_sizes() == c.layer_sizes());
  CHECK(back.head() == c.head());
  CHECK(back.encoding() == c.encoding());
  CHECK((back.parameters().array() == c.parameters().array()).all());
  auto bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS((void)deserialize_mlp(bad), ShapeError);
  bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS((void)deserialize_mlp(bad), ShapeError);
}

TEST_CASE("Adam step shrinks a quadratic") {
  AdamState adam(2);
  Eigen::VectorXd x(2);
  x << 3, -2;
  for (int i = 0; i < 2000; ++i) x += adam.step(2 * x, 0.05);
  CHECK(x.norm() < 1e-2);
}
