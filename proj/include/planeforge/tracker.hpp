#pragma once

// Cross-fragment instance tracking: query-based (carried embeddings) and the
// geometric heuristic baseline.

#include <Eigen/Dense>

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "planeforge/instance_matcher.hpp"

namespace planeforge {

struct VoxelRecord {
  Eigen::Vector3i key = Eigen::Vector3i::Zero();
  Vec3d center = Vec3d::Zero();
  Vec3d normal = Vec3d::UnitZ();
  Vec3d shifted = Vec3d::Zero();
};

struct TrackedInstance {
  int id{0};
  std::vector<VoxelRecord> voxels;  ///< sorted by (z, y, x)
  Plane params;
  Eigen::VectorXd embedding;        ///< unit norm
  int first_seen{0};
  int last_seen{0};
};

struct TrackerConfig {
  double accept_cosine{0.5};
  int retire_after{3};              ///< unseen fragments before a query stops being carried
  int min_voxels{3};
};

struct HeuristicConfig {
  double angle_deg{10.0};
  double d_merge{0.10};
  double iou_merge{0.3};
  double cell{0.04};                ///< footprint raster cell, normally the voxel size
};

class TrackState {
 public:
  [[nodiscard]] const std::vector<TrackedInstance>& instances() const { return instances_; }
  [[nodiscard]] int last_fragment() const { return last_fragment_; }
  [[nodiscard]] int next_id() const { return next_id_; }
  /// Owner id of a world voxel, or -1.
  [[nodiscard]] int owner(const Eigen::Vector3i& key) const;
  [[nodiscard]] const TrackedInstance* find(int id) const;
  /// (id, embedding) of every instance still carried into `fragment`, by id.
  [[nodiscard]] std::vector<std::pair<int, Eigen::VectorXd>> tracking_queries(int fragment,
                                                                               const TrackerConfig& cfg = {}) const;

 private:
  friend class TrackerAccess;
  std::vector<TrackedInstance> instances_;
  std::unordered_map<std::int64_t, int> owner_;
  int next_id_{0};
  int last_fragment_{-1};
};

struct FragmentResult {
  int index{0};
  VoxelEmbeddings voxels;
  std::vector<InstancePrediction> instances;
};

/// Query-based tracking step. Throws OrderingError unless fragment indices
/// strictly increase.
void step(TrackState& state, const FragmentResult& fragment, const TrackerConfig& cfg = {});

/// Merge by geometry: unoriented normal angle, offset gap after aligning
/// normals, and footprint overlap (intersection over the smaller footprint of
/// both voxel sets projected onto the existing plane).
void heuristic_step(TrackState& state, const FragmentResult& fragment, const HeuristicConfig& heuristic = {},
                    const TrackerConfig& cfg = {});

/// Plane parameters aggregated over voxel records (see aggregate_plane).
Plane aggregate_records(const std::vector<VoxelRecord>& records);

/// Footprint overlap of two voxel sets on a plane, cells of size `cell`.
double footprint_overlap(const std::vector<VoxelRecord>& a, const std::vector<VoxelRecord>& b, const Plane& on,
                         double cell);

}  // namespace planeforge
