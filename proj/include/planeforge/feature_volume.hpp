#pragma once

// Multi-view feature fusion into a sparse voxel volume with a view-consistency
// occupancy score.

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <vector>

#include "planeforge/geometry.hpp"
#include "planeforge/scene.hpp"

namespace planeforge {

struct VolumeConfig {
  double voxel_size{0.04};
  double tau_std{0.2};
  int min_views{4};
  bool bilinear{false};
  bool gradient_features{false};
};

struct VoxelAggregate {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  int count{0};
  double occupancy{0};
};

/// Voxels observed by at least one view, sorted by grid linear index.
struct SparseFeatureVolume {
  VoxelGrid grid;
  int channels{0};
  std::vector<Eigen::Vector3i> keys;
  std::vector<std::int64_t> linear;
  Eigen::MatrixXd mean;   ///< C x V
  Eigen::MatrixXd std;    ///< C x V, population convention
  std::vector<int> count;
  Eigen::VectorXd score;  ///< occupancy score, 0 until occupancy() runs
  std::vector<char> occupied;

  [[nodiscard]] std::size_t size() const { return keys.size(); }
  /// Index of a voxel in the sorted lists, or -1.
  [[nodiscard]] long find(const Eigen::Vector3i& key) const;
  [[nodiscard]] VoxelAggregate aggregate(std::size_t i) const;
  [[nodiscard]] std::vector<Eigen::Vector3i> occupied_keys() const;
};

/// Per-pixel features: RGB (C = 3) or RGB plus horizontal/vertical gray
/// gradients (C = 5).
Eigen::MatrixXd pixel_features(const Camera& view, bool with_gradients);

/// Per-view, per-grid-voxel exclusion flags (dense over the grid), as produced
/// by occlusion_mask.
using ViewExclusion = std::vector<std::vector<char>>;

/// Projects every voxel center inside the grid into every view and aggregates
/// the sampled features (two-pass mean and population std).
SparseFeatureVolume unproject(const std::vector<Camera>& views, const std::vector<Eigen::MatrixXd>& features,
                              const VoxelGrid& grid, bool bilinear = false,
                              const ViewExclusion* exclude = nullptr);

/// score = exp(-|std| / tau_std) when count >= min_views else 0; occupied = score >= 0.5.
void occupancy(SparseFeatureVolume& volume, double tau_std, int min_views);

/// For each view: grid voxels lying more than one voxel behind the first
/// occupied voxel along the pixel ray they project to.
ViewExclusion occlusion_mask(const SparseFeatureVolume& volume, const std::vector<Camera>& views);

struct FragmentVolume {
  SparseFeatureVolume volume;
  std::vector<int> views;
  int first_pass_occupied{0};
};

/// Builds the occupancy volume of one fragment: unproject, score, occlusion
/// test, second unprojection without occluded samples, score again.
FragmentVolume build_fragment_volume(const std::vector<Camera>& all_views, const std::vector<int>& window,
                                     const SceneBounds& bounds, const VolumeConfig& cfg, int fragment_length);

/// One line per voxel: "x y z count mean... std... occ".
void write_volume(std::ostream& out, const SparseFeatureVolume& volume);

}  // namespace planeforge
