#pragma once

// Soft rendering of bounded planes and gradient refinement against frames.
//
// Per pixel the ray is intersected with every (unbounded) plane; the nearest
// hit with t >= 0 wins (equal t: lowest id). The color is
//   f_color(theta, r) * g + background * (1 - g),  g = sigmoid(beta * (f_boundary(theta) - r)).

#include <Eigen/Dense>

#include <limits>
#include <vector>

#include "planeforge/geometry.hpp"
#include "planeforge/mlp.hpp"

namespace planeforge {

struct BoundedPlane {
  int id{0};
  Plane params;
  Mlp boundary;
  Mlp color;

  /// Throws on broken plane invariants or a non-positive boundary at 64 probe angles.
  void validate() const;
};

struct RenderedImage {
  int width{0};
  int height{0};
  Eigen::Matrix3Xd rgb;
  std::vector<int> ids;  ///< -1 where no plane was hit
  Eigen::VectorXd t;     ///< +inf where no plane was hit
};

enum class Optimizer { kGradientDescent, kAdam };

struct RefineConfig {
  double lr_plane{2e-2};
  double lr_boundary{1e-4};
  double lr_color{1e-4};
  int iterations{100};
  double beta{20.0};
  Vec3d background = Vec3d::Constant(0.5);
  Optimizer optimizer{Optimizer::kAdam};
  /// Final learning rate as a fraction of the initial one (linear decay; Adam only).
  double lr_floor{0.05};

  void validate() const;
};

RenderedImage render(const std::vector<BoundedPlane>& planes, const Camera& view, double beta,
                     const Vec3d& background = Vec3d::Constant(0.5));

/// Mean squared RGB error over every pixel and channel of every view.
double render_loss(const std::vector<BoundedPlane>& planes, const std::vector<Camera>& views, double beta,
                   const Vec3d& background = Vec3d::Constant(0.5));

struct PlaneGradient {
  Vec3d normal = Vec3d::Zero();       ///< projected onto the tangent space of the unit sphere
  Vec3d normal_raw = Vec3d::Zero();   ///< unprojected partial derivative
  double offset{0};
  Vec3d center = Vec3d::Zero();
  Eigen::VectorXd boundary;           ///< flat, MlpFunction::parameters() order
  Eigen::VectorXd color;
};

struct LossGradients {
  double loss{0};
  std::vector<PlaneGradient> planes;  ///< parallel to the input plane list
};

/// Loss and its gradient with respect to each plane's N, d, P_c and both MLPs.
/// The primary axis is treated as a constant.
LossGradients render_loss_gradients(const std::vector<BoundedPlane>& planes, const std::vector<Camera>& views,
                                    double beta, const Vec3d& background = Vec3d::Constant(0.5));

struct RefineResult {
  std::vector<BoundedPlane> planes;  ///< lowest-loss iterate
  std::vector<double> trace;         ///< loss of iterate k, k = 0..iterations
  std::vector<double> best_so_far;
  int best_iteration{0};
  double best_loss{0};
};

/// Thrown when the loss becomes non-finite; carries the last finite iterate.
class RefineDivergedError : public RefineDiverged {
 public:
  RefineDivergedError(std::vector<BoundedPlane> last, std::vector<double> trace)
      : RefineDiverged("refinement diverged: loss became non-finite"),
        last_state(std::move(last)),
        trace(std::move(trace)) {}
  std::vector<BoundedPlane> last_state;
  std::vector<double> trace;
};

/// Optimizes N, d and both MLPs. After every step N is renormalized, P_c is
/// projected onto the updated plane along N and the axis is re-orthogonalized.
RefineResult refine(const std::vector<BoundedPlane>& planes, const std::vector<Camera>& views,
                    const RefineConfig& cfg);

}  // namespace planeforge
