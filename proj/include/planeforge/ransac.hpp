#pragma once

// Sequential RANSAC over oriented point clouds.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "planeforge/geometry.hpp"
#include "planeforge/scene.hpp"

namespace planeforge {

struct OrientedPointCloud {
  std::vector<Vec3d> points;
  std::vector<Vec3d> normals;
  std::vector<int> labels;  ///< optional source plane per point

  [[nodiscard]] std::size_t size() const { return points.size(); }
  void validate() const;
};

struct RansacConfig {
  double inlier_distance{0.02};
  double inlier_angle_deg{15.0};
  int min_inliers{50};
  int iterations{500};
  int max_planes{32};
  std::uint64_t seed{0};

  void validate() const;
};

struct ExtractedPlane {
  Plane params;
  std::vector<int> inliers;  ///< ascending
};

/// Greedy extraction: one point + its normal per hypothesis, best inlier count
/// (lowest iteration wins ties), least-squares refit, inliers recomputed
/// against the refit plane and removed.
std::vector<ExtractedPlane> extract(const OrientedPointCloud& cloud, const RansacConfig& cfg = {});

/// Smallest-eigenvector fit. The normal is flipped toward `mean_normal` when
/// given, otherwise sign-canonicalized. Throws DegenerateFit for fewer than 3
/// points or collinear/coincident input.
Plane least_squares_plane(const std::vector<Vec3d>& points, const std::optional<Vec3d>& mean_normal = std::nullopt);

/// Regular (u, v) grid samples of every scene plane with its normal, plus
/// isotropic Gaussian position noise.
OrientedPointCloud sample_scene_cloud(const SceneSpec& scene, double spacing, double sigma, std::uint64_t seed);

void write_ply(std::ostream& out, const OrientedPointCloud& cloud);
void write_ply(const std::filesystem::path& path, const OrientedPointCloud& cloud);
OrientedPointCloud read_ply(std::istream& in);
OrientedPointCloud read_ply(const std::filesystem::path& path);

}  // namespace planeforge
