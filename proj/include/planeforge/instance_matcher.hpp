#pragma once

// Query/voxel dot-product masks, threshold decoding, matching against ground
// truth and the mask-classification loss. Class index 0 is "plane", 1 is the
// no-object token.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "planeforge/geometry.hpp"
#include "planeforge/scene.hpp"

namespace planeforge {

inline constexpr int kEmbeddingDim = 16;
inline constexpr double kProbClamp = 1e-12;

struct VoxelEmbeddings {
  std::vector<Eigen::Vector3i> keys;
  std::vector<Vec3d> centers;        ///< voxel centers in world coordinates
  Eigen::MatrixXd embeddings;        ///< C x V
  std::vector<Vec3d> normals;        ///< per-voxel n_m, unit
  std::vector<double> offsets;       ///< per-voxel d_m
  std::vector<Vec3d> shifted;        ///< per-voxel c_m

  [[nodiscard]] std::size_t size() const { return keys.size(); }
  void validate() const;
};

struct QuerySet {
  Eigen::MatrixXd embeddings;   ///< C x N
  Eigen::Matrix2Xd logits;      ///< row 0: plane, row 1: no-object
  std::vector<int> track_ids;   ///< global id for tracking queries, -1 for detection queries

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(embeddings.cols()); }
  /// Softmax over the two classes, 2 x N.
  [[nodiscard]] Eigen::Matrix2Xd probabilities() const;
  void validate() const;
};

struct InstancePrediction {
  int query{0};
  int track_id{-1};
  Eigen::Vector2d probs = Eigen::Vector2d(1, 0);
  Eigen::VectorXd soft;            ///< per voxel, in [0, 1]
  std::vector<int> members;        ///< voxel indices after overlap resolution, ascending
  Eigen::VectorXd embedding;       ///< the query embedding
  Plane params;
  bool has_params{false};
};

struct GtSegment {
  int label{0};
  std::vector<char> mask;          ///< per voxel
  Plane params;
  int source_id{-1};
};

struct GtSegmentSet {
  std::vector<GtSegment> segments;
};

/// Soft masks sigmoid(q . e), binary at tau_mask, no-object queries dropped,
/// voxels claimed by several queries go to the highest soft mask (ties: lower query).
std::vector<InstancePrediction> decode_masks(const VoxelEmbeddings& voxels, const QuerySet& queries,
                                             double tau_mask = 0.5);

/// Mean binary cross-entropy (logs clamped) plus Dice with +1 smoothing.
double mask_loss(const Eigen::VectorXd& soft, const std::vector<char>& gt);

struct MaskClsLoss {
  double loss{0};
  std::vector<int> query_to_gt;    ///< -1: matched to no-object
  Eigen::MatrixXd cost;            ///< N x N_gt matching cost
};

/// Matching cost -p(c_gt) + L_mask, solved with hungarian; loss sums
/// -log p(class) over all queries plus L_mask over queries matched to a segment.
MaskClsLoss mask_cls_loss(const Eigen::Matrix2Xd& probs, const Eigen::MatrixXd& soft, const GtSegmentSet& gt);
MaskClsLoss mask_cls_loss(const VoxelEmbeddings& voxels, const QuerySet& queries, const GtSegmentSet& gt);

/// Soft masks of every query, N x V.
Eigen::MatrixXd soft_masks(const VoxelEmbeddings& voxels, const QuerySet& queries);

/// Normal = normalized mean n_m, center = mean c_m, d = -center . normal, axis
/// from the member voxel centers.
Plane aggregate_plane(const std::vector<int>& members, const VoxelEmbeddings& voxels);

/// Segments of the GT voxelization restricted to the given voxels (matching by key).
GtSegmentSet gt_segments(const GtVoxelization& gt, const std::vector<Eigen::Vector3i>& keys);

/// Plugs in for the learned per-voxel network.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// Embeddings and per-voxel plane parameters for the occupied voxels of one fragment.
  virtual VoxelEmbeddings embed(const std::vector<Eigen::Vector3i>& occupied, const VoxelGrid& grid,
                                int fragment) = 0;
  /// Tracking queries first (in the given order), then detection queries,
  /// then no-object padding up to `count`.
  virtual QuerySet queries(const VoxelEmbeddings& voxels, const std::vector<std::pair<int, Eigen::VectorXd>>& tracking,
                           int count) = 0;
};

struct OracleConfig {
  double sigma{0.1};
  std::uint64_t seed{0};
  double query_scale{10.0};
  double normal_jitter_deg{0.0};
  double claim_cosine{0.5};
  int min_support{3};
};

/// Embeddings from the ground truth: one-hot of the nearest plane plus
/// Gaussian noise, -0.5 * ones plus noise away from every plane.
class OracleEmbeddingProvider final : public EmbeddingProvider {
 public:
  OracleEmbeddingProvider(const SceneSpec& scene, OracleConfig cfg);
  VoxelEmbeddings embed(const std::vector<Eigen::Vector3i>& occupied, const VoxelGrid& grid, int fragment) override;
  QuerySet queries(const VoxelEmbeddings& voxels, const std::vector<std::pair<int, Eigen::VectorXd>>& tracking,
                   int count) override;

 private:
  SceneSpec scene_;
  OracleConfig cfg_;
};

/// One line per instance: query class voxel_count nx ny nz d cx cy cz ax ay az.
void write_instances(std::ostream& out, const std::vector<InstancePrediction>& instances);

}  // namespace planeforge
