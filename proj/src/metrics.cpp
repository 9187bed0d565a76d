#include "planeforge/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <set>

#include "planeforge/errors.hpp"

namespace planeforge {

void SampledSurface::validate() const {
  if (labels.size() != points.size()) throw ShapeError("one label per sampled point is required");
}

KdTree::KdTree(const std::vector<Vec3d>& points) : points_(points) {
  std::vector<int> idx(points_.size());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, idx.size(), 0);
}

int KdTree::build(std::vector<int>& idx, std::size_t lo, std::size_t hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 3;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::nth_element(idx.begin() + static_cast<long>(lo), idx.begin() + static_cast<long>(mid),
                   idx.begin() + static_cast<long>(hi), [&](int a, int b) {
                     const double pa = points_[static_cast<std::size_t>(a)][axis];
                     const double pb = points_[static_cast<std::size_t>(b)][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const int n = static_cast<int>(nodes_.size());
  nodes_.push_back({idx[mid], axis, -1, -1});
  const int l = build(idx, lo, mid, depth + 1);
  const int r = build(idx, mid + 1, hi, depth + 1);
  nodes_[static_cast<std::size_t>(n)].left = l;
  nodes_[static_cast<std::size_t>(n)].right = r;
  return n;
}

void KdTree::search(int node, const Vec3d& q, Result& best) const {
  if (node < 0) return;
  const Node& nd = nodes_[static_cast<std::size_t>(node)];
  const Vec3d& p = points_[static_cast<std::size_t>(nd.point)];
  const double d2 = (p - q).squaredNorm();
  if (best.index < 0 || d2 < best.squared_distance || (d2 == best.squared_distance && nd.point < best.index)) {
    best.index = nd.point;
    best.squared_distance = d2;
  }
  const double diff = q[nd.axis] - p[nd.axis];
  const int near = diff < 0 ? nd.left : nd.right;
  const int far = diff < 0 ? nd.right : nd.left;
  search(near, q, best);
  // Equal distances must still be visited for the lowest-index tie rule.
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

KdTree::Result KdTree::nearest(const Vec3d& q) const {
  Result best;
  search(root_, q, best);
  return best;
}

namespace {

void require_points(const SampledSurface& s) {
  s.validate();
  if (s.points.empty()) throw EmptySurface("sampled surface has no points");
}

// Mean nearest distance and fraction within tau, from `query` to `target`.
std::pair<double, double> one_way(const std::vector<Vec3d>& query, const KdTree& target, double tau) {
  double sum = 0;
  std::size_t within = 0;
  for (const auto& q : query) {
    const double d = std::sqrt(target.nearest(q).squared_distance);
    sum += d;
    within += d < tau;
  }
  return {sum / double(query.size()), double(within) / double(query.size())};
}

}  // namespace

GeometryReport geometry_metrics(const SampledSurface& pred, const SampledSurface& gt, double tau) {
  require_points(pred);
  require_points(gt);
  if (!(tau > 0)) throw ConfigError("distance threshold must be positive");
  GeometryReport r;
  r.tau = tau;
  const KdTree gt_tree(gt.points), pred_tree(pred.points);
  std::tie(r.acc, r.prec) = one_way(pred.points, gt_tree, tau);
  std::tie(r.comp, r.recall) = one_way(gt.points, pred_tree, tau);
  r.f_score = r.prec + r.recall > 0 ? 2 * r.prec * r.recall / (r.prec + r.recall) : 0.0;
  return r;
}

SampledSurface transfer_labels(const SampledSurface& from, const SampledSurface& to) {
  require_points(from);
  if (to.points.empty()) throw EmptySurface("sampled surface has no points");
  const KdTree tree(from.points);
  SampledSurface out;
  out.points = to.points;
  out.labels.reserve(to.size());
  for (const auto& q : to.points) out.labels.push_back(from.labels[static_cast<std::size_t>(tree.nearest(q).index)]);
  return out;
}

SegmentationReport segmentation_metrics(const std::vector<int>& pred, const std::vector<int>& gt) {
  if (pred.size() != gt.size()) throw ShapeError("label lists differ in length");
  if (pred.empty()) throw ShapeError("label lists are empty");
  std::map<int, int> pa, ga;
  for (int l : pred) pa.emplace(l, static_cast<int>(pa.size()));
  for (int l : gt) ga.emplace(l, static_cast<int>(ga.size()));
  const std::size_t P = pa.size(), G = ga.size();
  std::vector<double> table(P * G, 0.0), rp(P, 0.0), rg(G, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto a = static_cast<std::size_t>(pa[pred[i]]), b = static_cast<std::size_t>(ga[gt[i]]);
    table[a * G + b] += 1;
    rp[a] += 1;
    rg[b] += 1;
  }
  const double n = double(pred.size());
  auto c2 = [](double x) { return x * (x - 1) / 2; };

  SegmentationReport r;
  double sum_ij = 0, sum_p = 0, sum_g = 0;
  for (double v : table) sum_ij += c2(v);
  for (double v : rp) sum_p += c2(v);
  for (double v : rg) sum_g += c2(v);
  const double pairs = c2(n);
  r.ri = pairs > 0 ? (pairs - sum_p - sum_g + 2 * sum_ij) / pairs : 1.0;

  // VOI = H(A|B) + H(B|A); every term vanishes exactly for identical partitions.
  double voi = 0;
  for (std::size_t a = 0; a < P; ++a) {
    for (std::size_t b = 0; b < G; ++b) {
      const double v = table[a * G + b];
      if (v > 0) voi -= v / n * (std::log(v / rp[a]) + std::log(v / rg[b]));
    }
  }
  r.voi = voi;

  double sc = 0;
  for (std::size_t b = 0; b < G; ++b) {
    double best = 0;
    for (std::size_t a = 0; a < P; ++a) {
      const double inter = table[a * G + b];
      best = std::max(best, inter / (rp[a] + rg[b] - inter));
    }
    sc += rg[b] * best;
  }
  r.sc = sc / n;
  return r;
}

SampledSurface sample_planes(const std::vector<BoundedPlane>& planes, double spacing) {
  if (!(spacing > 0)) throw ConfigError("sample spacing must be positive");
  SampledSurface out;
  for (const auto& p : planes) {
    double r_max = 0;
    for (int k = 0; k < 720; ++k) r_max = std::max(r_max, p.boundary(k * std::numbers::pi / 360));
    const auto uv = polar_grid_samples(r_max * 1.05, spacing, [&](double u, double v) {
      return std::hypot(u, v) <= p.boundary(wrap_angle(std::atan2(v, u)));
    });
    const Vec3d a = p.params.axis, b = p.params.second_axis();
    for (const auto& s : uv) {
      out.points.push_back(p.params.center + s.x() * a + s.y() * b);
      out.labels.push_back(p.id);
    }
  }
  return out;
}

SampledSurface sample_scene(const SceneSpec& scene, double spacing) {
  if (!(spacing > 0)) throw ConfigError("sample spacing must be positive");
  SampledSurface out;
  // Points where planes meet can come out bit-identical from two planes; the
  // first plane keeps them.
  std::set<std::array<double, 3>> seen;
  for (const auto& p : scene.planes) {
    const auto uv = polar_grid_samples(p.shape.max_radius(), spacing,
                                       [&](double u, double v) { return p.shape.contains(u, v, 1e-9); });
    for (const auto& s : uv) {
      const Vec3d w = p.world(s.x(), s.y());
      if (!seen.insert({w.x(), w.y(), w.z()}).second) continue;
      out.points.push_back(w);
      out.labels.push_back(p.id);
    }
  }
  return out;
}

void write_reports_csv(std::ostream& out, const GeometryReport& g, const SegmentationReport& s) {
  out << "metric,value\n" << std::setprecision(17);
  out << "tau," << g.tau << "\nacc," << g.acc << "\ncomp," << g.comp << "\nprec," << g.prec << "\nrecall,"
      << g.recall << "\nf_score," << g.f_score << "\nvoi," << s.voi << "\nri," << s.ri << "\nsc," << s.sc << '\n';
}

void print_reports(std::ostream& out, const GeometryReport& g, const SegmentationReport& s) {
  out << std::fixed << std::setprecision(4);
  out << "geometry (tau = " << g.tau << ")\n"
      << "  acc      " << g.acc << "\n  comp     " << g.comp << "\n  prec     " << g.prec << "\n  recall   "
      << g.recall << "\n  f-score  " << g.f_score << '\n';
  out << "segmentation\n  voi      " << s.voi << "\n  ri       " << s.ri << "\n  sc       " << s.sc << '\n';
  out << std::defaultfloat;
}

}  // namespace planeforge
