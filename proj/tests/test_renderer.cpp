#include "doctest.h"
#include "gradient_case.hpp"
#include "planeforge/renderer.hpp"

using namespace planeforge;
using testing::uniform;

namespace {

Camera frontal_camera(int w, int h, double f) {
  Camera c;
  c.width = w;
  c.height = h;
  c.intrinsics = {f, f, (w - 1) / 2.0, (h - 1) / 2.0};
  return c;
}

BoundedPlane flat_plane(int id, const Vec3d& n, const Vec3d& center, const Vec3d& axis) {
  BoundedPlane p;
  p.id = id;
  p.params = Plane::from_center(n, center, axis);
  p.boundary = Mlp({2, 32, 32, 1}, OutputHead::kSoftplus, InputEncoding::kPeriodicFirst);
  p.color = Mlp({3, 64, 64, 3}, OutputHead::kSigmoid, InputEncoding::kPeriodicFirst);
  return p;
}

std::vector<BoundedPlane> random_planes(std::mt19937_64& rng, int count) {
  std::vector<BoundedPlane> out;
  for (int i = 0; i < count; ++i) {
    BoundedPlane p;
    p.id = i;
    const Vec3d n = testing::random_unit(rng);
    const Vec3d c(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 2, 6));
    p.params = Plane::from_center(n, c, testing::random_unit(rng).cross(n));
    p.boundary = Mlp::boundary(rng());
    p.color = Mlp::color(rng());
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST_CASE("empty plane list renders background") {
  const Camera c = frontal_camera(8, 6, 5);
  const RenderedImage img = render({}, c, 20, Vec3d(0.1, 0.2, 0.3));
  for (Eigen::Index i = 0; i < img.rgb.cols(); ++i) {
    CHECK(img.rgb.col(i) == Vec3d(0.1, 0.2, 0.3));
    CHECK(img.ids[static_cast<std::size_t>(i)] == -1);
    CHECK(std::isinf(img.t[i]));
  }
}

TEST_CASE("pixel exactly on the boundary gets gate 0.5") {
  Camera c;
  c.width = 1;
  c.height = 1;
  c.intrinsics = {1, 1, 0, 0};
  // Zero MLPs: boundary ln 2, color 0.5; background black.
  const BoundedPlane p = flat_plane(0, Vec3d(0, 0, -1), Vec3d(std::log(2.0), 0, 2), Vec3d(1, 0, 0));
  const RenderedImage img = render({p}, c, 20, Vec3d::Zero());
  CHECK(img.rgb.col(0) == Vec3d::Constant(0.25));
  CHECK(img.t[0] == 2);
}

TEST_CASE("nearest plane wins") {
  Camera c = frontal_camera(3, 3, 2);
  const BoundedPlane near = flat_plane(7, Vec3d(0, 0, -1), Vec3d(0, 0, 2), Vec3d(1, 0, 0));
  const BoundedPlane far = flat_plane(3, Vec3d(0, 0, -1), Vec3d(0, 0, 5), Vec3d(1, 0, 0));
  const RenderedImage img = render({far, near}, c, 20);
  CHECK(img.ids[4] == 7);
  CHECK(img.t[4] == doctest::Approx(2));
}

TEST_CASE("equal t goes to the lowest id") {
  Camera c = frontal_camera(3, 3, 2);
  const BoundedPlane a = flat_plane(4, Vec3d(0, 0, -1), Vec3d(0, 0, 2), Vec3d(1, 0, 0));
  const BoundedPlane b = flat_plane(2, Vec3d(0, 0, 1), Vec3d(0, 0, 2), Vec3d(0, 1, 0));
  CHECK(render({a, b}, c, 20).ids[4] == 2);
  CHECK(render({b, a}, c, 20).ids[4] == 2);
}

TEST_CASE("hits are minimal over all planes and rendering is order independent") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    auto planes = random_planes(rng, 5);
    Camera c = frontal_camera(16, 12, 10);
    c.pose.rotation = Eigen::AngleAxisd(uniform(rng, -0.3, 0.3), Vec3d::UnitY()).toRotationMatrix();
    const RenderedImage img = render(planes, c, 20);
    for (int y = 0; y < c.height; ++y) {
      for (int x = 0; x < c.width; ++x) {
        const Rayd ray = pixel_to_ray(c, Vec2d(x, y));
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : planes) {
          const auto h = try_intersect(ray, p.params);
          if (h.valid()) best = std::min(best, h.t);
        }
        CHECK(img.t[c.index(x, y)] == best);
      }
    }
    std::reverse(planes.begin(), planes.end());
    std::swap(planes[1], planes[3]);
    const RenderedImage img2 = render(planes, c, 20);
    CHECK((img2.rgb.array() == img.rgb.array()).all());
    CHECK(img2.ids == img.ids);
  }
}

TEST_CASE("render_loss trivial values") {
  std::mt19937_64 rng(3);
  const auto planes = random_planes(rng, 3);
  Camera c = frontal_camera(10, 8, 6);
  c.pixels = render(planes, c, 20).rgb;
  CHECK(render_loss(planes, {c}, 20) == 0.0);

  Camera z = frontal_camera(4, 4, 3);
  z.pixels = Eigen::Matrix3Xd::Zero(3, 16);
  CHECK(render_loss({}, {z}, 20, Vec3d::Ones()) == 1.0);

  Camera bad = frontal_camera(4, 4, 3);
  bad.pixels = Eigen::Matrix3Xd::Zero(3, 15);
  CHECK_THROWS_AS((void)render_loss({}, {bad}, 20), ShapeError);
  CHECK_THROWS_AS((void)render_loss({}, {}, 20), ShapeError);
}

TEST_CASE("render_loss matches a two-pass evaluation after an offset change") {
  std::mt19937_64 rng(12);
  auto planes = random_planes(rng, 3);
  std::vector<Camera> views;
  for (int i = 0; i < 3; ++i) {
    Camera c = frontal_camera(12, 9, 8);
    c.pose.translation = Vec3d(0.2 * i, -0.1 * i, 0);
    c.pixels = render(planes, c, 20).rgb;
    views.push_back(c);
  }
  planes[1].params.offset += 0.05;
  double sum = 0;
  long count = 0;
  for (const auto& v : views) {
    const RenderedImage img = render(planes, v, 20);
    for (Eigen::Index i = 0; i < img.rgb.cols(); ++i) {
      for (int ch = 0; ch < 3; ++ch) {
        sum += std::pow(img.rgb(ch, i) - v.pixels(ch, i), 2);
        ++count;
      }
    }
  }
  CHECK(std::abs(render_loss(planes, views, 20) - sum / double(count)) < 1e-12);
}

TEST_CASE("gradients vanish at a perfect reconstruction") {
  std::mt19937_64 rng(8);
  const auto planes = random_planes(rng, 3);
  Camera c = frontal_camera(10, 8, 6);
  c.pixels = render(planes, c, 20).rgb;
  const LossGradients g = render_loss_gradients(planes, {c}, 20);
  CHECK(g.loss == 0);
  for (const auto& pg : g.planes) {
    CHECK(pg.normal.isZero(0));
    CHECK(pg.offset == 0);
    CHECK(pg.center.isZero(0));
    CHECK(pg.boundary.isZero(0));
    CHECK(pg.color.isZero(0));
  }
}

TEST_CASE("single-pixel gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const double err = testing::max_gradient_error(testing::random_pixel_case(seed));
    CHECK(err < 1e-3);
  }
}

TEST_CASE("normal gradient is tangent to the sphere") {
  const auto pc = testing::random_pixel_case(42);
  const LossGradients g = render_loss_gradients(pc.planes, pc.views, pc.beta);
  CHECK(std::abs(g.planes[0].normal.dot(pc.planes[0].params.normal)) < 1e-15);
}

TEST_CASE("doubling beta at the exact boundary leaves color gradients unchanged") {
  Camera c;
  c.width = 1;
  c.height = 1;
  c.intrinsics = {1, 1, 0, 0};
  c.pixels = Eigen::Matrix3Xd(3, 1);
  c.pixels.col(0) = Vec3d(0.9, 0.1, 0.4);
  BoundedPlane p = flat_plane(0, Vec3d(0, 0, -1), Vec3d(std::log(2.0), 0, 2), Vec3d(1, 0, 0));
  p.color = Mlp::color(3);
  const auto g1 = render_loss_gradients({p}, {c}, 20);
  const auto g2 = render_loss_gradients({p}, {c}, 40);
  CHECK((g1.planes[0].color - g2.planes[0].color).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g1.loss == g2.loss);
}

TEST_CASE("parallel rays contribute nothing") {
  Camera c;
  c.width = 1;
  c.height = 1;
  c.intrinsics = {1, 1, 0, 0};
  c.pixels = Eigen::Matrix3Xd::Zero(3, 1);
  const BoundedPlane p = flat_plane(0, Vec3d(1, 0, 0), Vec3d(1, 0, 0), Vec3d(0, 1, 0));
  const auto g = render_loss_gradients({p}, {c}, 20);
  CHECK(g.planes[0].offset == 0);
  CHECK(g.planes[0].normal.isZero(0));
}

TEST_CASE("refine keeps a perfect scene fixed") {
  std::mt19937_64 rng(4);
  auto planes = random_planes(rng, 2);
  for (auto& p : planes) p.boundary.biases().back()[0] = 1.0;
  Camera c = frontal_camera(12, 10, 8);
  c.pixels = render(planes, c, 20).rgb;
  RefineConfig cfg;
  cfg.iterations = 5;
  const RefineResult r = refine(planes, {c}, cfg);
  CHECK(r.trace.size() == 6);
  for (double l : r.trace) CHECK(l == 0);
  for (std::size_t k = 0; k < planes.size(); ++k) {
    CHECK(r.planes[k].params.normal == planes[k].params.normal);
    CHECK(r.planes[k].params.offset == planes[k].params.offset);
    CHECK((r.planes[k].color.parameters().array() == planes[k].color.parameters().array()).all());
  }
}

TEST_CASE("refine keeps plane invariants and a monotone best-so-far trace") {
  std::mt19937_64 rng(5);
  auto planes = random_planes(rng, 2);
  for (auto& p : planes) p.boundary.biases().back()[0] = 1.0;
  Camera c = frontal_camera(16, 12, 10);
  c.pixels = render(planes, c, 20).rgb;
  planes[0].params.offset += 0.05;
  planes[0].params.center -= 0.05 * planes[0].params.normal;
  RefineConfig cfg;
  cfg.iterations = 20;
  const RefineResult r = refine(planes, {c}, cfg);
  for (std::size_t i = 1; i < r.best_so_far.size(); ++i) CHECK(r.best_so_far[i] <= r.best_so_far[i - 1]);
  CHECK(r.best_loss <= r.trace.front());
  for (const auto& p : r.planes) CHECK(p.params.satisfies_invariants(1e-6));
}

TEST_CASE("refine reports divergence with the last finite state") {
  std::mt19937_64 rng(6);
  auto planes = random_planes(rng, 1);
  Camera c = frontal_camera(4, 4, 3);
  c.pixels = Eigen::Matrix3Xd::Constant(3, 16, std::numeric_limits<double>::quiet_NaN());
  RefineConfig cfg;
  try {
    (void)refine(planes, {c}, cfg);
    FAIL("expected divergence");
  } catch (const RefineDivergedError& e) {
    CHECK(e.last_state.size() == 1);
    CHECK(e.last_state[0].params.offset == planes[0].params.offset);
  }
  cfg.beta = 0;
  CHECK_THROWS_AS((void)refine(planes, {c}, cfg), ConfigError);
}
