#pragma once

// Cameras, rays, planes and the polar parametrization of bounded planes.
//
// Camera convention: +z forward, +x right, +y down (right-handed). Poses are
// camera-to-world. Pixel (u, v) has its center at integer coordinates, so the
// principal point (cx, cy) is expressed in the same units; a W x H image with
// a centered principal point has cx = (W - 1) / 2.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "planeforge/errors.hpp"

namespace planeforge {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

/// Threshold on |V.N| below which a ray counts as parallel to a plane.
template <typename Scalar>
inline constexpr Scalar kParallelEpsilon = Scalar(1e-8);

template <typename Scalar>
struct Intrinsics {
  Scalar fx{1}, fy{1}, cx{0}, cy{0};
};

template <typename Scalar>
struct Pose {
  Mat3<Scalar> rotation = Mat3<Scalar>::Identity();  ///< camera-to-world
  Vec3<Scalar> translation = Vec3<Scalar>::Zero();   ///< camera center in world
};

/// A posed pinhole camera with an RGB raster and optional depth.
///
/// Pixels are stored column-per-pixel in row-major pixel order
/// (index = y * width + x), channels in [0, 1]. Depth, when present, has one
/// entry per pixel and uses +inf for "no surface".
template <typename Scalar>
struct CameraView {
  Intrinsics<Scalar> intrinsics;
  Pose<Scalar> pose;
  int width{0};
  int height{0};
  Eigen::Matrix<Scalar, 3, Eigen::Dynamic> pixels;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> depth;

  [[nodiscard]] Eigen::Index pixel_count() const { return Eigen::Index(width) * height; }
  [[nodiscard]] Eigen::Index index(int x, int y) const { return Eigen::Index(y) * width + x; }
  [[nodiscard]] bool has_depth() const { return depth.size() == pixel_count(); }

  /// Throws InvariantError when the rotation is not a proper rotation or the
  /// intrinsics are out of range.
  void validate() const {
    const Mat3<Scalar>& R = pose.rotation;
    if ((R.transpose() * R - Mat3<Scalar>::Identity()).cwiseAbs().maxCoeff() > Scalar(1e-9) ||
        std::abs(R.determinant() - Scalar(1)) > Scalar(1e-9)) {
      throw InvariantError("camera rotation is not orthonormal with determinant +1");
    }
    const auto& k = intrinsics;
    if (!(k.fx > 0) || !(k.fy > 0)) throw InvariantError("focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvariantError("raster size must be positive");
    if (k.cx < 0 || k.cx >= width || k.cy < 0 || k.cy >= height) {
      throw InvariantError("principal point outside the raster");
    }
    if (pixels.size() != 0 && pixels.cols() != pixel_count()) {
      throw ShapeError("pixel buffer does not match raster size");
    }
  }

  [[nodiscard]] Vec3<Scalar> center() const { return pose.translation; }

  /// World point to camera frame.
  [[nodiscard]] Vec3<Scalar> to_camera(const Vec3<Scalar>& world) const {
    return pose.rotation.transpose() * (world - pose.translation);
  }
};

template <typename Scalar>
struct Ray {
  Vec3<Scalar> origin = Vec3<Scalar>::Zero();
  Vec3<Scalar> direction = Vec3<Scalar>::UnitZ();  ///< always unit length

  Ray() = default;
  Ray(const Vec3<Scalar>& o, const Vec3<Scalar>& v) : origin(o), direction(v) {
    const Scalar n = direction.norm();
    if (!(n > 0) || !std::isfinite(n)) throw InvariantError("ray direction must be non-zero");
    direction /= n;
  }

  [[nodiscard]] Vec3<Scalar> at(Scalar t) const { return origin + t * direction; }
};

/// Plane P.N + d = 0 with a center on the plane and an in-plane primary axis.
template <typename Scalar>
struct PlaneParams {
  Vec3<Scalar> normal = Vec3<Scalar>::UnitZ();
  Scalar offset{0};
  Vec3<Scalar> center = Vec3<Scalar>::Zero();
  Vec3<Scalar> axis = Vec3<Scalar>::UnitX();

  /// Builds a plane through `center`; the axis is re-orthogonalized against the normal.
  static PlaneParams from_center(const Vec3<Scalar>& normal, const Vec3<Scalar>& center,
                                 const Vec3<Scalar>& axis_hint) {
    PlaneParams p;
    p.normal = normal.normalized();
    p.center = center;
    p.offset = -center.dot(p.normal);
    Vec3<Scalar> a = axis_hint - axis_hint.dot(p.normal) * p.normal;
    if (a.norm() < Scalar(1e-9)) throw DegenerateAxis("axis hint is parallel to the normal");
    p.axis = a.normalized();
    return p;
  }

  /// Second in-plane basis vector N x V_axis.
  [[nodiscard]] Vec3<Scalar> second_axis() const { return normal.cross(axis); }

  [[nodiscard]] Scalar signed_distance(const Vec3<Scalar>& p) const {
    return p.dot(normal) + offset;
  }

  [[nodiscard]] bool satisfies_invariants(Scalar tol = Scalar(1e-6)) const {
    return std::abs(normal.norm() - 1) < tol && std::abs(axis.norm() - 1) < tol &&
           std::abs(normal.dot(axis)) < tol && std::abs(signed_distance(center)) < tol;
  }

  void validate(Scalar tol = Scalar(1e-6)) const {
    if (!satisfies_invariants(tol)) throw InvariantError("plane parameters violate invariants");
  }

  template <typename Other>
  [[nodiscard]] PlaneParams<Other> cast() const {
    PlaneParams<Other> p;
    p.normal = normal.template cast<Other>();
    p.offset = Other(offset);
    p.center = center.template cast<Other>();
    p.axis = axis.template cast<Other>();
    return p;
  }
};

template <typename Scalar>
struct PolarPoint {
  Scalar r{0};
  Scalar theta{0};  ///< in [0, 2 pi)
};

/// Maps any angle into [0, 2 pi).
template <typename Scalar>
[[nodiscard]] Scalar wrap_angle(Scalar a) {
  constexpr Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  Scalar w = std::fmod(a, two_pi);
  if (w < 0) w += two_pi;
  if (w >= two_pi) w -= two_pi;
  return w;
}

/// Back-projects a (possibly fractional) pixel coordinate into a world-frame ray.
template <typename Scalar>
[[nodiscard]] Ray<Scalar> pixel_to_ray(const CameraView<Scalar>& view, const Vec2<Scalar>& px) {
  if (!(px.x() >= Scalar(-0.5) && px.x() < Scalar(view.width) - Scalar(0.5) &&
        px.y() >= Scalar(-0.5) && px.y() < Scalar(view.height) - Scalar(0.5))) {
    throw BoundsError("pixel outside raster bounds");
  }
  const auto& k = view.intrinsics;
  const Vec3<Scalar> cam((px.x() - k.cx) / k.fx, (px.y() - k.cy) / k.fy, Scalar(1));
  return Ray<Scalar>(view.pose.translation, view.pose.rotation * cam);
}

/// Projects a world point to continuous pixel coordinates; empty when the point
/// is not strictly in front of the camera.
template <typename Scalar>
[[nodiscard]] std::optional<Vec2<Scalar>> project(const CameraView<Scalar>& view,
                                                  const Vec3<Scalar>& world) {
  const Vec3<Scalar> c = view.to_camera(world);
  if (!(c.z() > 0)) return std::nullopt;
  const auto& k = view.intrinsics;
  return Vec2<Scalar>(k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy);
}

enum class HitStatus { kHit, kParallel, kBehind };

template <typename Scalar>
struct Hit {
  HitStatus status{HitStatus::kParallel};
  Scalar t{0};
  Vec3<Scalar> point = Vec3<Scalar>::Zero();

  [[nodiscard]] bool valid() const { return status == HitStatus::kHit; }
};

/// Non-throwing ray/plane intersection used in the per-pixel hot loops.
template <typename Scalar>
[[nodiscard]] Hit<Scalar> try_intersect(const Ray<Scalar>& ray, const PlaneParams<Scalar>& plane) {
  Hit<Scalar> h;
  const Scalar denom = ray.direction.dot(plane.normal);
  if (std::abs(denom) <= kParallelEpsilon<Scalar>) {
    h.status = HitStatus::kParallel;
    return h;
  }
  h.t = -(ray.origin.dot(plane.normal) + plane.offset) / denom;
  h.point = ray.origin + h.t * ray.direction;
  h.status = h.t >= 0 ? HitStatus::kHit : HitStatus::kBehind;
  return h;
}

template <typename Scalar>
[[nodiscard]] Hit<Scalar> intersect(const Ray<Scalar>& ray, const PlaneParams<Scalar>& plane) {
  Hit<Scalar> h = try_intersect(ray, plane);
  if (h.status == HitStatus::kParallel) throw NoIntersection();
  if (h.status == HitStatus::kBehind) throw BehindRay();
  return h;
}

/// Flips v so its largest-magnitude component is positive (ties: lowest index).
template <typename Scalar>
[[nodiscard]] Vec3<Scalar> canonicalize_sign(const Vec3<Scalar>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < 3; ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  return v[best] < 0 ? Vec3<Scalar>(-v) : v;
}

/// First principal component of the mean-centered points, optionally
/// re-orthogonalized against `normal`, sign-canonicalized.
template <typename Scalar>
[[nodiscard]] Vec3<Scalar> primary_axis(std::span<const Vec3<Scalar>> points,
                                        const std::optional<Vec3<Scalar>>& normal = std::nullopt) {
  if (points.size() < 2) throw DegenerateAxis("primary axis needs at least two points");
  Vec3<Scalar> mean = Vec3<Scalar>::Zero();
  for (const auto& p : points) mean += p;
  mean /= Scalar(points.size());
  Mat3<Scalar> cov = Mat3<Scalar>::Zero();
  for (const auto& p : points) {
    const Vec3<Scalar> q = p - mean;
    cov.noalias() += q * q.transpose();
  }
  if (cov.trace() <= Scalar(0)) throw DegenerateAxis("all points are identical");
  Eigen::SelfAdjointEigenSolver<Mat3<Scalar>> es(cov);
  Vec3<Scalar> axis = es.eigenvectors().col(2);
  if (normal) {
    const Vec3<Scalar> n = normal->normalized();
    axis -= axis.dot(n) * n;
    if (axis.norm() < Scalar(1e-9)) {
      // Spread is along the normal; fall back to the largest in-plane component.
      const Mat3<Scalar> proj = Mat3<Scalar>::Identity() - n * n.transpose();
      Eigen::SelfAdjointEigenSolver<Mat3<Scalar>> es2(proj * cov * proj);
      axis = es2.eigenvectors().col(2);
      axis -= axis.dot(n) * n;
      if (axis.norm() < Scalar(1e-9)) throw DegenerateAxis("no in-plane spread");
    }
  }
  return canonicalize_sign<Scalar>(axis.normalized());
}

template <typename Scalar>
[[nodiscard]] Vec3<Scalar> primary_axis(const std::vector<Vec3<Scalar>>& points,
                                        const std::optional<Vec3<Scalar>>& normal = std::nullopt) {
  return primary_axis<Scalar>(std::span<const Vec3<Scalar>>(points), normal);
}

/// Signed in-plane angle of (p - center) measured from the primary axis
/// towards N x axis, in [0, 2 pi), and the distance r = |p - center|.
template <typename Scalar>
[[nodiscard]] PolarPoint<Scalar> to_polar(const Vec3<Scalar>& p, const PlaneParams<Scalar>& plane) {
  const Vec3<Scalar> u = p - plane.center;
  PolarPoint<Scalar> out;
  out.r = u.norm();
  if (out.r == Scalar(0)) return out;
  const Scalar x = u.dot(plane.axis);
  const Scalar y = u.dot(plane.second_axis());
  out.theta = wrap_angle(std::atan2(y, x));
  return out;
}

template <typename Scalar>
[[nodiscard]] Vec3<Scalar> from_polar(const PolarPoint<Scalar>& pp, const PlaneParams<Scalar>& plane) {
  return plane.center +
         pp.r * (std::cos(pp.theta) * plane.axis + std::sin(pp.theta) * plane.second_axis());
}

using Vec2d = Vec2<double>;
using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;
using Camera = CameraView<double>;
using Rayd = Ray<double>;
using Plane = PlaneParams<double>;
using Polar = PolarPoint<double>;

}  // namespace planeforge
