#include "planeforge/feature_volume.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace planeforge {

long SparseFeatureVolume::find(const Eigen::Vector3i& key) const {
  if (!grid.contains(key)) return -1;
  const std::int64_t li = grid.linear(key);
  const auto it = std::lower_bound(linear.begin(), linear.end(), li);
  if (it == linear.end() || *it != li) return -1;
  return static_cast<long>(it - linear.begin());
}

VoxelAggregate SparseFeatureVolume::aggregate(std::size_t i) const {
  const auto c = static_cast<Eigen::Index>(i);
  return {mean.col(c), std.col(c), count[i], score.size() > c ? score[c] : 0.0};
}

std::vector<Eigen::Vector3i> SparseFeatureVolume::occupied_keys() const {
  std::vector<Eigen::Vector3i> out;
  for (std::size_t i = 0; i < keys.size(); ++i)
    if (i < occupied.size() && occupied[i]) out.push_back(keys[i]);
  return out;
}

Eigen::MatrixXd pixel_features(const Camera& view, bool with_gradients) {
  if (view.pixels.cols() != view.pixel_count()) throw ShapeError("view has no pixel data");
  if (!with_gradients) return view.pixels;
  Eigen::MatrixXd f(5, view.pixel_count());
  f.topRows(3) = view.pixels;
  const Eigen::RowVectorXd gray = view.pixels.colwise().mean();
  for (int y = 0; y < view.height; ++y) {
    for (int x = 0; x < view.width; ++x) {
      const int x0 = std::max(x - 1, 0), x1 = std::min(x + 1, view.width - 1);
      const int y0 = std::max(y - 1, 0), y1 = std::min(y + 1, view.height - 1);
      const Eigen::Index i = view.index(x, y);
      f(3, i) = (gray[view.index(x1, y)] - gray[view.index(x0, y)]) / std::max(1, x1 - x0);
      f(4, i) = (gray[view.index(x, y1)] - gray[view.index(x, y0)]) / std::max(1, y1 - y0);
    }
  }
  return f;
}

namespace {

struct Projector {
  const Camera& view;
  Mat3d Rt;
  bool bilinear;

  Projector(const Camera& v, bool bl) : view(v), Rt(v.pose.rotation.transpose()), bilinear(bl) {}

  // Nearest pixel index for a world point, or -1.
  [[nodiscard]] Eigen::Index nearest(const Vec3d& w) const {
    const Vec3d c = Rt * (w - view.pose.translation);
    if (!(c.z() > 1e-9)) return -1;
    const auto& k = view.intrinsics;
    const double px = k.fx * c.x() / c.z() + k.cx;
    const double py = k.fy * c.y() / c.z() + k.cy;
    const double ix = std::round(px), iy = std::round(py);
    if (ix < 0 || iy < 0 || ix >= view.width || iy >= view.height) return -1;
    return view.index(int(ix), int(iy));
  }

  // Sampled feature; false when the point is outside the view.
  bool sample(const Eigen::MatrixXd& feat, const Vec3d& w, Eigen::Ref<Eigen::VectorXd> out) const {
    if (!bilinear) {
      const Eigen::Index i = nearest(w);
      if (i < 0) return false;
      out = feat.col(i);
      return true;
    }
    const Vec3d c = Rt * (w - view.pose.translation);
    if (!(c.z() > 1e-9)) return false;
    const auto& k = view.intrinsics;
    const double px = k.fx * c.x() / c.z() + k.cx;
    const double py = k.fy * c.y() / c.z() + k.cy;
    if (px < 0 || py < 0 || px > view.width - 1 || py > view.height - 1) return false;
    const int x0 = std::min(int(px), view.width - 1), y0 = std::min(int(py), view.height - 1);
    const int x1 = std::min(x0 + 1, view.width - 1), y1 = std::min(y0 + 1, view.height - 1);
    const double ax = px - x0, ay = py - y0;
    out = (1 - ax) * (1 - ay) * feat.col(view.index(x0, y0)) + ax * (1 - ay) * feat.col(view.index(x1, y0)) +
          (1 - ax) * ay * feat.col(view.index(x0, y1)) + ax * ay * feat.col(view.index(x1, y1));
    return true;
  }
};

}  // namespace

SparseFeatureVolume unproject(const std::vector<Camera>& views, const std::vector<Eigen::MatrixXd>& features,
                              const VoxelGrid& grid, bool bilinear, const ViewExclusion* exclude) {
  if (features.size() != views.size()) throw ShapeError("one feature map per view is required");
  if (exclude && exclude->size() != views.size()) throw ShapeError("one exclusion mask per view is required");
  SparseFeatureVolume vol;
  vol.grid = grid;
  vol.channels = features.empty() ? 3 : static_cast<int>(features.front().rows());
  const std::int64_t n = grid.size();
  if (n == 0 || views.empty()) {
    vol.mean.resize(vol.channels, 0);
    vol.std.resize(vol.channels, 0);
    return vol;
  }
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (features[v].cols() != views[v].pixel_count() || features[v].rows() != vol.channels)
      throw ShapeError("feature map does not match its view");
  }
  const int C = vol.channels;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(C, n);
  std::vector<int> count(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd f(C);

  auto for_each_sample = [&](auto&& fn) {
    for (std::size_t v = 0; v < views.size(); ++v) {
      const Projector proj(views[v], bilinear);
      const std::vector<char>* ex = exclude ? &(*exclude)[v] : nullptr;
      std::int64_t li = 0;
      for (int z = 0; z < grid.dims.z(); ++z) {
        for (int y = 0; y < grid.dims.y(); ++y) {
          for (int x = 0; x < grid.dims.x(); ++x, ++li) {
            if (ex && (*ex)[static_cast<std::size_t>(li)]) continue;
            if (proj.sample(features[v], grid.center({x, y, z}), f)) fn(li, f);
          }
        }
      }
    }
  };

  for_each_sample([&](std::int64_t li, const Eigen::VectorXd& s) {
    sum.col(li) += s;
    ++count[static_cast<std::size_t>(li)];
  });
  for (std::int64_t li = 0; li < n; ++li)
    if (count[static_cast<std::size_t>(li)] > 0) sum.col(li) /= double(count[static_cast<std::size_t>(li)]);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(C, n);
  for_each_sample([&](std::int64_t li, const Eigen::VectorXd& s) { sq.col(li) += (s - sum.col(li)).cwiseAbs2(); });

  for (std::int64_t li = 0; li < n; ++li) {
    if (count[static_cast<std::size_t>(li)] == 0) continue;
    vol.linear.push_back(li);
  }
  const auto V = static_cast<Eigen::Index>(vol.linear.size());
  vol.mean.resize(C, V);
  vol.std.resize(C, V);
  vol.count.resize(vol.linear.size());
  vol.keys.resize(vol.linear.size());
  const std::int64_t xy = std::int64_t(grid.dims.x()) * grid.dims.y();
  for (Eigen::Index i = 0; i < V; ++i) {
    const std::int64_t li = vol.linear[static_cast<std::size_t>(i)];
    const int c = count[static_cast<std::size_t>(li)];
    vol.mean.col(i) = sum.col(li);
    vol.std.col(i) = (sq.col(li) / double(c)).cwiseSqrt();
    vol.count[static_cast<std::size_t>(i)] = c;
    vol.keys[static_cast<std::size_t>(i)] =
        Eigen::Vector3i(int(li % grid.dims.x()), int((li % xy) / grid.dims.x()), int(li / xy));
  }
  vol.score = Eigen::VectorXd::Zero(V);
  vol.occupied.assign(vol.linear.size(), 0);
  return vol;
}

void occupancy(SparseFeatureVolume& volume, double tau_std, int min_views) {
  if (!(tau_std > 0)) throw ConfigError("tau_std must be positive");
  const auto V = static_cast<Eigen::Index>(volume.size());
  volume.score = Eigen::VectorXd::Zero(V);
  volume.occupied.assign(volume.size(), 0);
  for (Eigen::Index i = 0; i < V; ++i) {
    if (volume.count[static_cast<std::size_t>(i)] < min_views) continue;
    volume.score[i] = std::exp(-volume.std.col(i).norm() / tau_std);
    volume.occupied[static_cast<std::size_t>(i)] = volume.score[i] >= 0.5 ? 1 : 0;
  }
}

namespace {

// Distance along the ray at which it leaves the first run of consecutive
// occupied cells, or +inf when it meets none.
double first_occupied(const VoxelGrid& g, const std::vector<char>& occ, const Rayd& ray) {
  const double vs = g.voxel_size;
  const Vec3d lo = g.origin.array() - vs / 2;
  const Vec3d hi = lo + vs * g.dims.cast<double>();
  double t0 = 0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    if (std::abs(d) < 1e-15) {
      if (ray.origin[a] < lo[a] || ray.origin[a] > hi[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double ta = (lo[a] - ray.origin[a]) / d, tb = (hi[a] - ray.origin[a]) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return std::numeric_limits<double>::infinity();

  const Vec3d p = ray.at(t0);
  Eigen::Vector3i cell;
  Eigen::Vector3i step;
  Vec3d t_max, t_delta;
  for (int a = 0; a < 3; ++a) {
    cell[a] = std::clamp(int(std::floor((p[a] - lo[a]) / vs)), 0, g.dims[a] - 1);
    const double d = ray.direction[a];
    if (d > 0) {
      step[a] = 1;
      t_max[a] = (lo[a] + (cell[a] + 1) * vs - ray.origin[a]) / d;
      t_delta[a] = vs / d;
    } else if (d < 0) {
      step[a] = -1;
      t_max[a] = (lo[a] + cell[a] * vs - ray.origin[a]) / d;
      t_delta[a] = -vs / d;
    } else {
      step[a] = 0;
      t_max[a] = t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }
  bool inside_run = false;
  double t_enter = t0;
  while (true) {
    if (occ[static_cast<std::size_t>(g.linear(cell))]) {
      inside_run = true;
    } else if (inside_run) {
      return t_enter;
    }
    int a = 0;
    if (t_max[1] < t_max[a]) a = 1;
    if (t_max[2] < t_max[a]) a = 2;
    t_enter = t_max[a];
    if (t_enter > t1) break;
    cell[a] += step[a];
    if (cell[a] < 0 || cell[a] >= g.dims[a]) break;
    t_max[a] += t_delta[a];
  }
  return inside_run ? t1 : std::numeric_limits<double>::infinity();
}

}  // namespace

ViewExclusion occlusion_mask(const SparseFeatureVolume& volume, const std::vector<Camera>& views) {
  const VoxelGrid& g = volume.grid;
  std::vector<char> occ(static_cast<std::size_t>(g.size()), 0);
  bool any = false;
  for (std::size_t i = 0; i < volume.size(); ++i) {
    if (i < volume.occupied.size() && volume.occupied[i]) {
      occ[static_cast<std::size_t>(volume.linear[i])] = 1;
      any = true;
    }
  }
  ViewExclusion out(views.size(), std::vector<char>(static_cast<std::size_t>(g.size()), 0));
  if (!any) return out;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const Camera& cam = views[v];
    Eigen::VectorXd hit(cam.pixel_count());
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x)
        hit[cam.index(x, y)] = first_occupied(g, occ, pixel_to_ray(cam, Vec2d(x, y)));
    const Projector proj(cam, false);
    for (std::size_t i = 0; i < volume.size(); ++i) {
      const Vec3d c = g.center(volume.keys[i]);
      const Eigen::Index p = proj.nearest(c);
      if (p < 0) continue;
      if ((c - cam.pose.translation).norm() > hit[p] + 0.25 * g.voxel_size)
        out[v][static_cast<std::size_t>(volume.linear[i])] = 1;
    }
  }
  return out;
}

FragmentVolume build_fragment_volume(const std::vector<Camera>& all_views, const std::vector<int>& window,
                                     const SceneBounds& bounds, const VolumeConfig& cfg, int fragment_length) {
  if (static_cast<int>(window.size()) != fragment_length)
    throw ConfigError("fragment window does not match the fragment length");
  std::vector<Camera> views;
  std::vector<Eigen::MatrixXd> feats;
  for (int i : window) {
    if (i < 0 || static_cast<std::size_t>(i) >= all_views.size()) throw BoundsError("view index out of range");
    views.push_back(all_views[static_cast<std::size_t>(i)]);
    feats.push_back(pixel_features(views.back(), cfg.gradient_features));
  }
  const VoxelGrid grid = VoxelGrid::covering(bounds, cfg.voxel_size);
  FragmentVolume fv;
  fv.views = window;
  fv.volume = unproject(views, feats, grid, cfg.bilinear);
  occupancy(fv.volume, cfg.tau_std, cfg.min_views);
  fv.first_pass_occupied =
      static_cast<int>(std::count(fv.volume.occupied.begin(), fv.volume.occupied.end(), char(1)));
  const ViewExclusion ex = occlusion_mask(fv.volume, views);
  fv.volume = unproject(views, feats, grid, cfg.bilinear, &ex);
  occupancy(fv.volume, cfg.tau_std, cfg.min_views);
  return fv;
}

void write_volume(std::ostream& out, const SparseFeatureVolume& volume) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < volume.size(); ++i) {
    const auto& k = volume.keys[i];
    out << k.x() << ' ' << k.y() << ' ' << k.z() << ' ' << volume.count[i];
    const auto c = static_cast<Eigen::Index>(i);
    for (int ch = 0; ch < volume.channels; ++ch) out << ' ' << volume.mean(ch, c);
    for (int ch = 0; ch < volume.channels; ++ch) out << ' ' << volume.std(ch, c);
    out << ' ' << (i < volume.occupied.size() ? int(volume.occupied[i]) : 0) << '\n';
  }
}

}  // namespace planeforge
