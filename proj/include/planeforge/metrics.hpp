#pragma once

// Geometry (accuracy/completeness/precision/recall/F-score) and segmentation
// (RI/VOI/SC) metrics over densely sampled plane surfaces.

#include <Eigen/Dense>

#include <iosfwd>
#include <vector>

#include "planeforge/geometry.hpp"
#include "planeforge/renderer.hpp"
#include "planeforge/scene.hpp"

namespace planeforge {

struct SampledSurface {
  std::vector<Vec3d> points;
  std::vector<int> labels;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  void validate() const;
};

/// Static 3-d tree; nearest-neighbour ties resolve to the lowest point index.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3d>& points);
  struct Result {
    int index{-1};
    double squared_distance{0};
  };
  [[nodiscard]] Result nearest(const Vec3d& q) const;
  [[nodiscard]] std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int point{-1};
    int axis{0};
    int left{-1};
    int right{-1};
  };
  int build(std::vector<int>& idx, std::size_t lo, std::size_t hi, int depth);
  void search(int node, const Vec3d& q, Result& best) const;

  std::vector<Vec3d> points_;
  std::vector<Node> nodes_;
  int root_{-1};
};

struct GeometryReport {
  double acc{0};
  double comp{0};
  double prec{0};
  double recall{0};
  double f_score{0};
  double tau{0.05};
};

struct SegmentationReport {
  double voi{0};
  double ri{1};
  double sc{1};
};

/// Throws EmptySurface when either side has no points.
GeometryReport geometry_metrics(const SampledSurface& pred, const SampledSurface& gt, double tau = 0.05);

/// Each `to` point takes the label of its nearest `from` point.
SampledSurface transfer_labels(const SampledSurface& from, const SampledSurface& to);

/// RI by pair counting, VOI in nats, SC = covering of `gt` regions by `pred`
/// regions weighted by GT region size. Throws ShapeError on length mismatch or
/// empty input.
SegmentationReport segmentation_metrics(const std::vector<int>& pred, const std::vector<int>& gt);

/// Polar-grid samples (ring spacing `spacing`) inside each plane's boundary
/// function, labelled by plane id.
SampledSurface sample_planes(const std::vector<BoundedPlane>& planes, double spacing = 0.02);
/// Same sampler over the analytic shapes of a ground-truth scene. A point
/// produced bit-identically by two planes is kept once, for the first plane.
SampledSurface sample_scene(const SceneSpec& scene, double spacing = 0.02);

void write_reports_csv(std::ostream& out, const GeometryReport& g, const SegmentationReport& s);
void print_reports(std::ostream& out, const GeometryReport& g, const SegmentationReport& s);

}  // namespace planeforge
