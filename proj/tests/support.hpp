#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "planeforge/geometry.hpp"

namespace testing {

using planeforge::Vec3d;

// Denominator floor for gradient comparisons; keeps entries that are zero on
// both sides (up to finite-difference noise) from producing huge ratios.
inline constexpr double kRelFloor = 1e-6;

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), kRelFloor);
}

inline Vec3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Vec3d v;
  do {
    v = Vec3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-3);
  return v.normalized();
}

inline planeforge::Mat3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace testing
