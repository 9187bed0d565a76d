#include <algorithm>
#include <tuple>
#include <set>

#include "doctest.h"
#include "planeforge/errors.hpp"
#include "planeforge/renderer.hpp"
#include "planeforge/scene.hpp"
#include "support.hpp"

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

SceneSpec empty_scene() {
  SceneSpec s;
  s.name = "custom";
  s.bounds = {{-5, -5, -5}, {5, 5, 5}};
  s.camera = {16, 12, {10, 10, 7.5, 5.5}};
  return s;
}

ScenePlane flat(int id, const Vec3d& n, const Vec3d& c, const Vec3d& axis, Shape shape, Texture tex) {
  ScenePlane p;
  p.id = id;
  p.params = Plane::from_center(n, c, axis);
  p.shape = std::move(shape);
  p.texture = std::move(tex);
  return p;
}

double logit(double p) { return std::log(p / (1 - p)); }

}  // namespace

TEST_CASE("presets") {
  const SceneSpec box = build_scene("box6", 7);
  REQUIRE(box.planes.size() == 6);
  CHECK(box.bounds.min == Vec3d(-2, -2, 0));
  CHECK(box.bounds.max == Vec3d(2, 2, 3));
  for (const auto& p : box.planes) {
    CHECK((p.params.normal.cwiseAbs().array() == 1).count() == 1);
    CHECK(p.shape.area() > 0);
  }
  double area = 0;
  for (const auto& p : box.planes) area += p.shape.area();
  CHECK(area == doctest::Approx(2 * 16 + 4 * 12));
  CHECK(box.trajectory.size() == 18);
  CHECK(box.fragment_count() == 2);
  CHECK(box.fragment_views(1).front() == 9);

  const SceneSpec tw = build_scene("two-walls", 7);
  REQUIRE(tw.planes.size() == 2);
  CHECK(std::abs(tw.planes[0].params.normal.dot(tw.planes[1].params.normal)) == 1.0);
  CHECK(std::abs(tw.planes[0].params.center.x() - tw.planes[1].params.center.x()) == doctest::Approx(0.1));
  CHECK(build_scene("adversarial-parallel").planes.size() == 3);
  CHECK_THROWS_AS((void)build_scene("nope"), ConfigError);
}

TEST_CASE("scene generation is deterministic and round-trips") {
  const SceneSpec a = build_scene("box6", 11), b = build_scene("box6", 11);
  CHECK(scene_to_json(a) == scene_to_json(b));
  CHECK(scene_to_json(a) != scene_to_json(build_scene("box6", 12)));
  const SceneSpec back = scene_from_json(scene_to_json(a));
  CHECK(scene_to_json(back) == scene_to_json(a));
  REQUIRE(back.planes.size() == a.planes.size());
  for (std::size_t i = 0; i < a.planes.size(); ++i) {
    CHECK(back.planes[i].texture == a.planes[i].texture);
    CHECK(back.planes[i].shape == a.planes[i].shape);
    CHECK(back.planes[i].params.normal == a.planes[i].params.normal);
  }
  CHECK_THROWS_AS((void)scene_from_json("{\"planes\": 3}"), ConfigError);
}

TEST_CASE("noise texture is a deterministic per-cell lookup") {
  const Texture t = Texture::noise(0.5, Vec3d::Constant(0.5), 0.4, 3);
  CHECK(t.evaluate(0.1, 0.1) == t.evaluate(0.4, 0.2));
  CHECK(t.evaluate(0.1, 0.1) != t.evaluate(0.6, 0.1));
  for (int i = 0; i < 100; ++i) {
    const Vec3d c = t.evaluate(i * 0.37, i * 0.11);
    CHECK((c.array() >= 0.1 - 1e-12).all());
    CHECK((c.array() <= 0.9 + 1e-12).all());
  }
}

TEST_CASE("empty scene rasterizes to background") {
  const SceneSpec s = empty_scene();
  const SyntheticFrame f = rasterize_view(s, frontal_camera(8, 6, 5));
  CHECK((f.view.pixels.array() == 0.5).all());
  CHECK(std::all_of(f.ids.begin(), f.ids.end(), [](int i) { return i == -1; }));
  CHECK(std::isinf(f.view.depth.maxCoeff()));
  CHECK(std::isinf(f.view.depth.minCoeff()));
}

TEST_CASE("frontal red wall fills the view with constant depth") {
  SceneSpec s = empty_scene();
  s.planes.push_back(flat(0, Vec3d(0, 0, -1), Vec3d(0, 0, 2), Vec3d::UnitX(), Shape::rectangle(10, 10),
                          Texture::constant(Vec3d(1, 0, 0))));
  const SyntheticFrame f = rasterize_view(s, frontal_camera(8, 6, 5), 2);
  for (Eigen::Index i = 0; i < f.view.pixel_count(); ++i) {
    CHECK(f.view.pixels.col(i) == Vec3d(1, 0, 0));
    CHECK(f.view.depth[i] == doctest::Approx(2.0).epsilon(1e-14));
  }
}

TEST_CASE("depth satisfies the plane equation and ids agree with the nearest hit") {
  const SceneSpec s = build_scene("box6", 7);
  Camera cam = s.cameras()[4];
  // Smaller raster with the same field of view.
  cam.width = 64;
  cam.height = 48;
  cam.intrinsics = {32, 32, 31.5, 23.5};
  const SyntheticFrame f = rasterize_view(s, cam);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Eigen::Index i = cam.index(x, y);
      const int id = f.ids[static_cast<std::size_t>(i)];
      REQUIRE(id >= 0);
      const Rayd ray = pixel_to_ray(cam, Vec2d(x, y));
      const double t = f.view.depth[i] / cam.pose.rotation.col(2).dot(ray.direction);
      const Vec3d p = ray.at(t);
      CHECK(std::abs(s.plane(id).params.signed_distance(p)) < 1e-9);
      // No other bounded plane is hit strictly earlier.
      for (const auto& q : s.planes) {
        const Hit<double> h = try_intersect(ray, q.params);
        if (!h.valid()) continue;
        const Vec2d uv = q.local(h.point);
        if (q.shape.contains(uv.x(), uv.y())) CHECK(h.t >= t - 1e-9);
      }
    }
  }
}

TEST_CASE("soft renderer at large beta agrees with the rasterizer away from boundaries") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    SceneSpec s = empty_scene();
    const Vec3d color(uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9));
    const double radius = uniform(rng, 0.4, 1.0);
    Vec3d n = testing::random_unit(rng);
    if (n.z() > 0) n = -n;
    if (n.z() > -0.4) n = Vec3d(n.x(), n.y(), -0.4).normalized();
    const Vec3d c(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3), uniform(rng, 2.5, 3.5));
    s.planes.push_back(flat(0, n, c, n.unitOrthogonal(), Shape::disk(radius), Texture::constant(color)));
    const Camera cam = frontal_camera(40, 30, 25);
    const SyntheticFrame ref = rasterize_view(s, cam);

    BoundedPlane bp;
    bp.id = 0;
    bp.params = s.planes[0].params;
    bp.boundary = Mlp({2, 32, 32, 1}, OutputHead::kSoftplus, InputEncoding::kPeriodicFirst);
    bp.boundary.biases().back()[0] = std::log(std::expm1(radius));
    bp.color = Mlp({3, 64, 64, 3}, OutputHead::kSigmoid, InputEncoding::kPeriodicFirst);
    for (int k = 0; k < 3; ++k) bp.color.biases().back()[k] = logit(color[k]);
    const RenderedImage img = render({bp}, cam, 1e4, s.background);

    int compared = 0;
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        bool near_edge = false;
        const int id = ref.ids[static_cast<std::size_t>(cam.index(x, y))];
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx) {
            const int xx = std::clamp(x + dx, 0, cam.width - 1), yy = std::clamp(y + dy, 0, cam.height - 1);
            near_edge |= ref.ids[static_cast<std::size_t>(cam.index(xx, yy))] != id;
          }
        if (near_edge) continue;
        ++compared;
        const Eigen::Index i = cam.index(x, y);
        CHECK((img.rgb.col(i) - ref.view.pixels.col(i)).cwiseAbs().maxCoeff() <= 2.0 / 255);
      }
    }
    CHECK(compared > 600);
  }
}

TEST_CASE("voxelize_gt on an axis-aligned slab") {
  SceneSpec s = empty_scene();
  s.bounds = {{-2, -2, -1}, {2, 2, 1}};
  s.planes.push_back(flat(0, Vec3d::UnitZ(), Vec3d::Zero(), Vec3d::UnitX(), Shape::rectangle(2, 2),
                          Texture::constant(Vec3d::Ones())));
  const GtVoxelization g = voxelize_gt(s, 1.0);
  CHECK(g.grid.dims == Eigen::Vector3i(5, 5, 3));
  REQUIRE(g.voxels.size() == 25);
  for (const auto& v : g.voxels) {
    CHECK(v.key.z() == 1);
    CHECK(v.plane_id == 0);
    CHECK(v.offset == 0.0);
  }
}

TEST_CASE("disjoint planes get disjoint labels") {
  SceneSpec s = empty_scene();
  s.planes.push_back(flat(0, Vec3d::UnitZ(), Vec3d(-2, 0, 0), Vec3d::UnitX(), Shape::disk(1),
                          Texture::constant(Vec3d::Ones())));
  s.planes.push_back(flat(1, Vec3d::UnitX(), Vec3d(2, 0, 0), Vec3d::UnitY(), Shape::disk(1),
                          Texture::constant(Vec3d::Ones())));
  const GtVoxelization g = voxelize_gt(s, 0.1);
  std::set<std::tuple<int, int, int>> keys;
  int count[2] = {0, 0};
  for (const auto& v : g.voxels) {
    CHECK(keys.emplace(v.key.x(), v.key.y(), v.key.z()).second);
    ++count[v.plane_id];
    CHECK(s.plane(v.plane_id).distance(v.center) <= 0.05 + 1e-9);
  }
  CHECK(count[0] > 0);
  CHECK(count[1] > 0);
}

TEST_CASE("box6 voxel count matches a Monte Carlo area estimate") {
  const SceneSpec s = build_scene("box6", 7);
  const double vs = 0.04;
  const GtVoxelization g = voxelize_gt(s, vs);
  std::mt19937_64 rng(8);
  double area = 0;
  for (const auto& p : s.planes) {
    const double r = p.shape.max_radius();
    int inside = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) inside += p.shape.contains(uniform(rng, -r, r), uniform(rng, -r, r));
    area += 4 * r * r * inside / n;
  }
  const double expected = area / (vs * vs);
  MESSAGE("voxels " << g.voxels.size() << " estimate " << expected);
  CHECK(std::abs(double(g.voxels.size()) - expected) < 0.05 * expected);
}
