#include "planeforge/ransac.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "planeforge/errors.hpp"

namespace planeforge {

void OrientedPointCloud::validate() const {
  if (normals.size() != points.size()) throw ShapeError("points and normals differ in length");
  if (!labels.empty() && labels.size() != points.size()) throw ShapeError("labels and points differ in length");
  for (const auto& n : normals)
    if (std::abs(n.norm() - 1) > 1e-6) throw InvariantError("point normal is not unit length");
}

void RansacConfig::validate() const {
  if (!(inlier_distance > 0) || !(inlier_angle_deg > 0) || min_inliers <= 0 || iterations <= 0 || max_planes <= 0)
    throw ConfigError("RANSAC thresholds must be positive");
}

Plane least_squares_plane(const std::vector<Vec3d>& points, const std::optional<Vec3d>& mean_normal) {
  if (points.size() < 3) throw DegenerateFit("plane fit needs at least 3 points");
  Vec3d mean = Vec3d::Zero();
  for (const auto& p : points) mean += p;
  mean /= double(points.size());
  Mat3d cov = Mat3d::Zero();
  for (const auto& p : points) {
    const Vec3d q = p - mean;
    cov.noalias() += q * q.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Mat3d> es(cov);
  const Vec3d ev = es.eigenvalues();
  if (!(ev[2] > 0) || ev[1] <= 1e-12 * ev[2]) throw DegenerateFit("points are collinear or coincident");
  Vec3d n = es.eigenvectors().col(0).normalized();
  if (mean_normal && mean_normal->norm() > 0) {
    if (n.dot(*mean_normal) < 0) n = -n;
  } else {
    n = canonicalize_sign(n);
  }
  Plane p;
  p.normal = n;
  p.center = mean;
  p.offset = -mean.dot(n);
  p.axis = primary_axis(points, std::optional<Vec3d>(n));
  return p;
}

std::vector<ExtractedPlane> extract(const OrientedPointCloud& cloud, const RansacConfig& cfg) {
  cloud.validate();
  cfg.validate();
  const double cos_max = std::cos(cfg.inlier_angle_deg * std::numbers::pi / 180.0);
  auto is_inlier = [&](std::size_t i, const Vec3d& n, double d) {
    return std::abs(cloud.points[i].dot(n) + d) <= cfg.inlier_distance && cloud.normals[i].dot(n) >= cos_max;
  };

  std::vector<int> remaining(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) remaining[i] = static_cast<int>(i);
  std::mt19937_64 rng(cfg.seed);
  std::vector<ExtractedPlane> out;
  while (static_cast<int>(out.size()) < cfg.max_planes && static_cast<int>(remaining.size()) >= cfg.min_inliers) {
    std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
    int best_count = -1;
    Vec3d best_n = Vec3d::UnitZ();
    double best_d = 0;
    for (int it = 0; it < cfg.iterations; ++it) {
      const auto s = static_cast<std::size_t>(remaining[pick(rng)]);
      const Vec3d n = cloud.normals[s];
      const double d = -cloud.points[s].dot(n);
      int count = 0;
      for (int i : remaining) count += is_inlier(static_cast<std::size_t>(i), n, d);
      if (count > best_count) {
        best_count = count;
        best_n = n;
        best_d = d;
      }
    }
    if (best_count < cfg.min_inliers) break;

    std::vector<Vec3d> pts;
    Vec3d mean_n = Vec3d::Zero();
    for (int i : remaining) {
      if (!is_inlier(static_cast<std::size_t>(i), best_n, best_d)) continue;
      pts.push_back(cloud.points[static_cast<std::size_t>(i)]);
      mean_n += cloud.normals[static_cast<std::size_t>(i)];
    }
    ExtractedPlane plane;
    try {
      plane.params = least_squares_plane(pts, mean_n);
    } catch (const DegenerateFit&) {
      break;
    }
    std::vector<int> keep;
    for (int i : remaining) {
      if (is_inlier(static_cast<std::size_t>(i), plane.params.normal, plane.params.offset)) plane.inliers.push_back(i);
      else keep.push_back(i);
    }
    if (static_cast<int>(plane.inliers.size()) < cfg.min_inliers) break;
    remaining = std::move(keep);
    out.push_back(std::move(plane));
  }
  return out;
}

OrientedPointCloud sample_scene_cloud(const SceneSpec& scene, double spacing, double sigma, std::uint64_t seed) {
  if (!(spacing > 0)) throw ConfigError("sample spacing must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  OrientedPointCloud out;
  for (const auto& p : scene.planes) {
    const double r = p.shape.max_radius();
    const int n = static_cast<int>(std::floor(r / spacing));
    for (int i = -n; i <= n; ++i) {
      for (int j = -n; j <= n; ++j) {
        const double u = i * spacing, v = j * spacing;
        if (!p.shape.contains(u, v, 1e-9)) continue;
        Vec3d x = p.world(u, v);
        if (sigma > 0) x += sigma * Vec3d(noise(rng), noise(rng), noise(rng));
        out.points.push_back(x);
        out.normals.push_back(p.params.normal);
        out.labels.push_back(p.id);
      }
    }
  }
  return out;
}

void write_ply(std::ostream& out, const OrientedPointCloud& cloud) {
  cloud.validate();
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << '\n';
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz"}) out << "property double " << name << '\n';
  out << "end_header\n" << std::setprecision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3d& p = cloud.points[i];
    const Vec3d& n = cloud.normals[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
  }
}

void write_ply(const std::filesystem::path& path, const OrientedPointCloud& cloud) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  write_ply(f, cloud);
}

OrientedPointCloud read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw IoError("not a PLY file");
  std::size_t count = 0;
  std::vector<std::string> props;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (word == "element") {
      std::string what;
      ls >> what >> count;
      if (what != "vertex") throw IoError("only vertex elements are supported");
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  if (!ascii) throw IoError("only ascii PLY is supported");
  int idx[6];
  const char* want[6] = {"x", "y", "z", "nx", "ny", "nz"};
  for (int k = 0; k < 6; ++k) {
    const auto it = std::find(props.begin(), props.end(), want[k]);
    if (it == props.end()) throw IoError(std::string("PLY is missing property ") + want[k]);
    idx[k] = static_cast<int>(it - props.begin());
  }
  OrientedPointCloud out;
  std::vector<double> vals(props.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& v : vals)
      if (!(in >> v)) throw IoError("truncated PLY vertex list");
    out.points.emplace_back(vals[idx[0]], vals[idx[1]], vals[idx[2]]);
    Vec3d n(vals[idx[3]], vals[idx[4]], vals[idx[5]]);
    out.normals.push_back(n.normalized());
  }
  return out;
}

OrientedPointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  return read_ply(f);
}

}  // namespace planeforge
