#include "planeforge/camera_io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace planeforge {

std::vector<Camera> read_trajectory(std::istream& in) {
  std::vector<Camera> cams;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Camera c;
    double w = 0, h = 0;
    ls >> c.intrinsics.fx >> c.intrinsics.fy >> c.intrinsics.cx >> c.intrinsics.cy >> w >> h;
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) ls >> c.pose.rotation(r, k);
    ls >> c.pose.translation.x() >> c.pose.translation.y() >> c.pose.translation.z();
    if (!ls) throw IoError("malformed camera line " + std::to_string(line_no));
    c.width = static_cast<int>(w);
    c.height = static_cast<int>(h);
    c.validate();
    cams.push_back(std::move(c));
  }
  return cams;
}

std::vector<Camera> read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file: " + path.string());
  return read_trajectory(in);
}

void write_trajectory(std::ostream& out, const std::vector<Camera>& cameras) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& c : cameras) {
    const auto& k = c.intrinsics;
    out << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << ' ' << c.width << ' ' << c.height;
    for (int r = 0; r < 3; ++r)
      for (int j = 0; j < 3; ++j) out << ' ' << c.pose.rotation(r, j);
    for (int j = 0; j < 3; ++j) out << ' ' << c.pose.translation[j];
    out << '\n';
  }
}

void write_trajectory(const std::filesystem::path& path, const std::vector<Camera>& cameras) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory file: " + path.string());
  write_trajectory(out, cameras);
}

Pose<double> look_at(const Vec3d& position, const Vec3d& target, const Vec3d& up) {
  const Vec3d forward = (target - position).normalized();
  Vec3d right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(Vec3d::UnitX());
  right.normalize();
  const Vec3d down = forward.cross(right);
  Pose<double> p;
  p.rotation.col(0) = right;
  p.rotation.col(1) = down;
  p.rotation.col(2) = forward;
  p.translation = position;
  return p;
}

}  // namespace planeforge
