#pragma once

// Ground-truth synthetic scenes and the exact (non-differentiable) rasterizer
// used as the reference for every other stage.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "planeforge/geometry.hpp"

namespace planeforge {

/// Texture tree over in-plane coordinates (u along the plane axis, v along
/// N x axis, both relative to the plane center). Leaves are constant colors;
/// checker and two-tone nodes select one of two child textures; noise leaves
/// vary per square cell.
struct Texture {
  enum class Kind { kConstant, kChecker, kTwoTone, kNoise };

  Kind kind{Kind::kConstant};
  Vec3d color = Vec3d::Constant(0.5);
  double cell{1.0};                   ///< checker cell size
  Vec2d phase = Vec2d::Zero();        ///< checker grid origin in (u, v)
  double angle{0.0};                  ///< two-tone split normal direction in the (u, v) plane
  double split{0.0};                  ///< two-tone split line offset along that direction
  double amplitude{0.0};              ///< noise: per-channel offset range around `color`
  std::uint64_t seed{0};              ///< noise: cell color hash seed
  std::vector<Texture> children;      ///< two entries for checker/two-tone

  static Texture constant(const Vec3d& c);
  static Texture checker(double cell, Texture a, Texture b, const Vec2d& phase = Vec2d::Zero());
  static Texture two_tone(double angle, double split, Texture a, Texture b);
  /// Square cells of independent colors, color + amplitude * U(-1, 1) per
  /// channel, clamped to [0, 1].
  static Texture noise(double cell, const Vec3d& base, double amplitude, std::uint64_t seed,
                       const Vec2d& phase = Vec2d::Zero());

  [[nodiscard]] Vec3d evaluate(double u, double v) const;
  /// Copy with every noise leaf replaced by its base color.
  [[nodiscard]] Texture flattened() const;
  bool operator==(const Texture&) const = default;
};

/// Star-convex region around the plane center, in (u, v) coordinates.
struct Shape {
  enum class Kind { kRectangle, kDisk, kPolygon };

  Kind kind{Kind::kRectangle};
  Vec2d half_extents = Vec2d::Ones();
  double radius{1.0};
  std::vector<Vec2d> vertices;  ///< convex, counter-clockwise

  static Shape rectangle(double half_u, double half_v);
  static Shape disk(double radius);
  static Shape polygon(std::vector<Vec2d> vertices);

  [[nodiscard]] bool contains(double u, double v, double tol = 1e-12) const;
  /// In-plane distance from (u, v) to the region; 0 inside.
  [[nodiscard]] double distance_outside(double u, double v) const;
  [[nodiscard]] double max_radius() const;
  [[nodiscard]] double area() const;
  bool operator==(const Shape&) const = default;
};

struct ScenePlane {
  int id{0};
  Plane params;
  Shape shape;
  Texture texture;

  /// (u, v) in-plane coordinates of a world point.
  [[nodiscard]] Vec2d local(const Vec3d& p) const {
    const Vec3d d = p - params.center;
    return {d.dot(params.axis), d.dot(params.second_axis())};
  }
  [[nodiscard]] Vec3d world(double u, double v) const {
    return params.center + u * params.axis + v * params.second_axis();
  }
  /// Distance from a world point to the bounded region.
  [[nodiscard]] double distance(const Vec3d& p) const;
};

struct SceneBounds {
  Vec3d min = Vec3d::Zero();
  Vec3d max = Vec3d::Ones();
};

struct SceneCamera {
  int width{64};
  int height{64};
  Intrinsics<double> intrinsics;
};

struct SceneSpec {
  std::string name;
  std::uint64_t seed{0};
  Vec3d background = Vec3d::Constant(0.5);
  /// Distant environment seen by rays that hit no plane: background plus
  /// amplitude * U(-1, 1) per channel over (azimuth, elevation) cells of
  /// `environment_cell` radians. Zero amplitude gives a constant background.
  double environment_amplitude{0.0};
  double environment_cell{0.02};
  SceneBounds bounds;
  std::vector<ScenePlane> planes;
  SceneCamera camera;
  std::vector<Pose<double>> trajectory;
  int fragment_length{9};

  /// Cameras of the trajectory (no pixels).
  [[nodiscard]] std::vector<Camera> cameras() const;
  [[nodiscard]] int fragment_count() const;
  /// Trajectory indices of fragment `f`.
  [[nodiscard]] std::vector<int> fragment_views(int f) const;
  [[nodiscard]] const ScenePlane& plane(int id) const;
  [[nodiscard]] Vec3d environment(const Vec3d& direction) const;
  void validate() const;
};

/// Known presets: "box6", "two-walls", "adversarial-parallel". Throws ConfigError otherwise.
SceneSpec build_scene(const std::string& preset, std::uint64_t seed = 7);
std::vector<std::string> scene_presets();

/// JSON round trip (full double precision).
std::string scene_to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const std::string& text);
void save_scene(const std::filesystem::path& path, const SceneSpec& scene);
SceneSpec load_scene(const std::filesystem::path& path);

/// One rasterized view with exact z-depth (camera frame, +inf where nothing is
/// hit) and the id of the winning plane (-1: none).
struct SyntheticFrame {
  Camera view;
  std::vector<int> ids;
};

struct SyntheticFrameSet {
  std::vector<SyntheticFrame> frames;
};

/// Exact nearest-hit rasterization of one camera. With supersample > 1 the
/// color is the mean of s x s sub-pixel rays; depth and id always come from
/// the pixel-center ray.
SyntheticFrame rasterize_view(const SceneSpec& scene, const Camera& camera, int supersample = 1);
SyntheticFrameSet rasterize(const SceneSpec& scene, int supersample = 1);

struct GtVoxel {
  Eigen::Vector3i key = Eigen::Vector3i::Zero();
  Vec3d center = Vec3d::Zero();
  int plane_id{-1};
  Vec3d normal = Vec3d::UnitZ();
  double offset{0};
  Vec3d plane_center = Vec3d::Zero();
};

/// Voxel grid convention shared by the volume and the ground truth: voxel
/// `key` has its center at origin + key * voxel_size.
struct VoxelGrid {
  Vec3d origin = Vec3d::Zero();
  double voxel_size{0.04};
  Eigen::Vector3i dims = Eigen::Vector3i::Zero();

  static VoxelGrid covering(const SceneBounds& b, double voxel_size);
  [[nodiscard]] Vec3d center(const Eigen::Vector3i& k) const {
    return origin + voxel_size * k.cast<double>();
  }
  [[nodiscard]] Eigen::Vector3i key_of(const Vec3d& p) const {
    const Vec3d q = (p - origin) / voxel_size;
    return {int(std::lround(q.x())), int(std::lround(q.y())), int(std::lround(q.z()))};
  }
  [[nodiscard]] bool contains(const Eigen::Vector3i& k) const {
    return (k.array() >= 0).all() && (k.array() < dims.array()).all();
  }
  [[nodiscard]] std::int64_t linear(const Eigen::Vector3i& k) const {
    return (std::int64_t(k.z()) * dims.y() + k.y()) * dims.x() + k.x();
  }
  [[nodiscard]] std::int64_t size() const { return std::int64_t(dims.x()) * dims.y() * dims.z(); }
};

struct GtVoxelization {
  VoxelGrid grid;
  std::vector<GtVoxel> voxels;  ///< sorted by key (z, y, x)
};

/// Voxels whose center lies within voxel_size / 2 of a bounded plane, labeled
/// by the nearest plane (ties: lowest id).
GtVoxelization voxelize_gt(const SceneSpec& scene, double voxel_size);

/// Deterministic stratified polar sampling of a region around a plane center:
/// rings every `spacing`, about 2 pi r / spacing samples per ring, kept when
/// `inside(u, v)` holds.
template <typename Inside>
std::vector<Vec2d> polar_grid_samples(double max_radius, double spacing, Inside&& inside) {
  std::vector<Vec2d> out;
  const int rings = static_cast<int>(std::ceil(max_radius / spacing));
  for (int k = 0; k <= rings; ++k) {
    const double r = k * spacing;
    const int n = k == 0 ? 1 : std::max(1, int(std::lround(2 * std::numbers::pi * r / spacing)));
    for (int j = 0; j < n; ++j) {
      const double th = (j + 0.5 * (k % 2)) * 2 * std::numbers::pi / n;
      const Vec2d uv(r * std::cos(th), r * std::sin(th));
      if (inside(uv.x(), uv.y())) out.push_back(uv);
    }
  }
  return out;
}

}  // namespace planeforge
