#include <set>
#include <sstream>

#include "doctest.h"
#include "planeforge/errors.hpp"
#include "planeforge/ransac.hpp"
#include "support.hpp"

using namespace planeforge;
using testing::uniform;

namespace {

OrientedPointCloud plane_cloud(std::mt19937_64& rng, const Vec3d& n, const Vec3d& c, int count, double half) {
  OrientedPointCloud out;
  const Vec3d a = n.unitOrthogonal(), b = n.cross(a);
  for (int i = 0; i < count; ++i) {
    out.points.push_back(c + uniform(rng, -half, half) * a + uniform(rng, -half, half) * b);
    out.normals.push_back(n);
  }
  return out;
}

void append(OrientedPointCloud& a, const OrientedPointCloud& b) {
  a.points.insert(a.points.end(), b.points.begin(), b.points.end());
  a.normals.insert(a.normals.end(), b.normals.begin(), b.normals.end());
}

double rms(const std::vector<Vec3d>& pts, const Vec3d& n) {
  Vec3d m = Vec3d::Zero();
  for (const auto& p : pts) m += p;
  m /= double(pts.size());
  double s = 0;
  for (const auto& p : pts) s += std::pow((p - m).dot(n), 2);
  return std::sqrt(s / double(pts.size()));
}

double angle_deg(const Vec3d& a, const Vec3d& b) {
  return std::acos(std::clamp(a.dot(b), -1.0, 1.0)) * 180 / std::numbers::pi;
}

}  // namespace

TEST_CASE("least squares closed forms") {
  const Plane sq = least_squares_plane({{0, 0, 2}, {1, 0, 2}, {1, 1, 2}, {0, 1, 2}});
  CHECK(std::abs(std::abs(sq.normal.z()) - 1) < 1e-15);
  CHECK(sq.offset == doctest::Approx(-2 * sq.normal.z()));
  CHECK(sq.center.isApprox(Vec3d(0.5, 0.5, 2)));

  const std::vector<Vec3d> tri = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const Plane p = least_squares_plane(tri);
  for (const auto& x : tri) CHECK(std::abs(x.dot(p.normal) + p.offset) < 1e-12);

  const Plane flipped = least_squares_plane(tri, Vec3d(-1, -1, -1));
  CHECK(flipped.normal.sum() < 0);

  CHECK_THROWS_AS((void)least_squares_plane({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}}), DegenerateFit);
  CHECK_THROWS_AS((void)least_squares_plane({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}}), DegenerateFit);
  CHECK_THROWS_AS((void)least_squares_plane({{1, 1, 1}, {0, 1, 1}}), DegenerateFit);
}

TEST_CASE("least squares is no worse than a random direction search") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0, 0.05);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec3d n = testing::random_unit(rng);
    OrientedPointCloud c = plane_cloud(rng, n, Vec3d(1, 2, 3), 500, 1.0);
    for (auto& p : c.points) p += Vec3d(noise(rng), noise(rng), noise(rng));
    const double fit = rms(c.points, least_squares_plane(c.points).normal);
    // Random restarts, each refined by shrinking perturbations.
    double best = 1e9;
    for (int r = 0; r < 50; ++r) {
      Vec3d dir = testing::random_unit(rng);
      double cur = rms(c.points, dir);
      for (double step = 0.5; step > 1e-7; step *= 0.7) {
        for (int k = 0; k < 12; ++k) {
          const Vec3d cand = (dir + step * testing::random_unit(rng)).normalized();
          const double v = rms(c.points, cand);
          if (v < cur) {
            cur = v;
            dir = cand;
          }
        }
      }
      best = std::min(best, cur);
    }
    CHECK(fit <= best + 1e-6);
  }
}

TEST_CASE("single noiseless plane") {
  std::mt19937_64 rng(1);
  const Vec3d n = Vec3d(1, 2, 2).normalized();
  const OrientedPointCloud c = plane_cloud(rng, n, Vec3d(0, 0, 1), 1000, 2.0);
  const auto planes = extract(c);
  REQUIRE(planes.size() == 1);
  CHECK(planes[0].inliers.size() == 1000);
  CHECK((planes[0].params.normal - n).norm() < 1e-9);
  CHECK(std::abs(planes[0].params.offset - (-Vec3d(0, 0, 1).dot(n))) < 1e-9);
}

TEST_CASE("two perpendicular noiseless planes") {
  std::mt19937_64 rng(2);
  OrientedPointCloud c = plane_cloud(rng, Vec3d::UnitZ(), Vec3d(0, 0, 0), 500, 1.0);
  append(c, plane_cloud(rng, Vec3d::UnitX(), Vec3d(2, 0, 0), 500, 1.0));
  const auto planes = extract(c);
  REQUIRE(planes.size() == 2);
  for (const auto& p : planes) {
    const double e = std::min((p.params.normal - Vec3d::UnitZ()).norm(), (p.params.normal - Vec3d::UnitX()).norm());
    CHECK(e < 1e-6);
    CHECK(p.inliers.size() == 500);
  }
}

TEST_CASE("too few points give an empty result") {
  std::mt19937_64 rng(3);
  CHECK(extract(plane_cloud(rng, Vec3d::UnitZ(), Vec3d::Zero(), 20, 1.0)).empty());
  RansacConfig bad;
  bad.inlier_distance = 0;
  CHECK_THROWS_AS((void)extract(OrientedPointCloud{}, bad), ConfigError);
}

TEST_CASE("box6 with noise: six planes, inlier sets valid and disjoint") {
  const SceneSpec s = build_scene("box6", 7);
  const OrientedPointCloud c = sample_scene_cloud(s, 0.1, 0.01, 5);
  const RansacConfig cfg;
  const auto planes = extract(c, cfg);
  REQUIRE(planes.size() == 6);
  std::set<int> used_gt, seen;
  std::size_t total = 0;
  for (const auto& p : planes) {
    int best = -1;
    for (const auto& g : s.planes) {
      if (angle_deg(p.params.normal, g.params.normal) < 2 && std::abs(p.params.offset - g.params.offset) < 0.01)
        best = g.id;
    }
    CHECK(best >= 0);
    used_gt.insert(best);
    for (int i : p.inliers) {
      CHECK(seen.insert(i).second);
      const auto k = static_cast<std::size_t>(i);
      CHECK(std::abs(c.points[k].dot(p.params.normal) + p.params.offset) <= cfg.inlier_distance);
      CHECK(c.normals[k].dot(p.params.normal) >= std::cos(cfg.inlier_angle_deg * std::numbers::pi / 180));
    }
    total += p.inliers.size();
  }
  CHECK(used_gt.size() == 6);
  CHECK(total <= c.size());

  const auto again = extract(c, cfg);
  REQUIRE(again.size() == planes.size());
  for (std::size_t i = 0; i < planes.size(); ++i) CHECK(again[i].inliers == planes[i].inliers);
}

TEST_CASE("PLY round trip") {
  std::mt19937_64 rng(4);
  const OrientedPointCloud c = plane_cloud(rng, Vec3d(0, 0.6, 0.8), Vec3d(1, 1, 1), 25, 1.0);
  std::stringstream ss;
  write_ply(ss, c);
  const OrientedPointCloud back = read_ply(ss);
  REQUIRE(back.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(back.points[i] == c.points[i]);
    CHECK((back.normals[i] - c.normals[i]).norm() < 1e-15);
  }
  std::stringstream bad("ply\nformat binary_little_endian 1.0\nend_header\n");
  CHECK_THROWS_AS((void)read_ply(bad), IoError);
}
