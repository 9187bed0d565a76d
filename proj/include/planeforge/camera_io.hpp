#pragma once

// Camera trajectory text format, one camera per line:
//   fx fy cx cy width height r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz
// Rotation is camera-to-world, row-major; translation is the camera center.
// Blank lines and lines starting with '#' are ignored.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "planeforge/geometry.hpp"

namespace planeforge {

/// Cameras are returned without pixel data.
std::vector<Camera> read_trajectory(std::istream& in);
std::vector<Camera> read_trajectory(const std::filesystem::path& path);

void write_trajectory(std::ostream& out, const std::vector<Camera>& cameras);
void write_trajectory(const std::filesystem::path& path, const std::vector<Camera>& cameras);

/// Camera at `position` looking at `target` with the given up direction,
/// following the +z forward / +y down convention.
Pose<double> look_at(const Vec3d& position, const Vec3d& target, const Vec3d& up = Vec3d::UnitZ());

}  // namespace planeforge
