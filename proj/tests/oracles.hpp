#pragma once

// Brute-force reference computations shared by the unit tests and the
// acceptance runner. Each one recomputes a library result the slow way.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "planeforge/geometry.hpp"
#include "planeforge/hungarian.hpp"
#include "planeforge/metrics.hpp"

namespace testing {

using planeforge::Vec3d;

// Grid minimization of |P(t).N + d| over t in [0, 100], refined around the best cell.
inline double line_search_t(const planeforge::Rayd& ray, const planeforge::Plane& p, double& resolution) {
  double lo = 0, hi = 100;
  double best = 0;
  for (int level = 0; level < 4; ++level) {
    const int n = 1000;
    const double h = (hi - lo) / n;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) {
      const double t = lo + i * h;
      const double v = std::abs(p.signed_distance(ray.at(t)));
      if (v < best_val) {
        best_val = v;
        best = t;
      }
    }
    resolution = h;
    lo = std::max(0.0, best - h);
    hi = best + h;
  }
  return best;
}

// Minimum total cost over all column permutations of a square matrix.
inline double brute_force_assignment(const Eigen::MatrixXd& c) {
  std::vector<int> perm(static_cast<std::size_t>(c.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (Eigen::Index r = 0; r < c.rows(); ++r) s += c(r, perm[static_cast<std::size_t>(r)]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline double assignment_cost(const Eigen::MatrixXd& c, const planeforge::Assignment& a) {
  double s = 0;
  for (Eigen::Index r = 0; r < c.rows(); ++r) {
    const int col = a.row_to_col[static_cast<std::size_t>(r)];
    if (col >= 0) s += c(r, col);
  }
  return s;
}

// Mask term of the matching loss for one matched pair: mean binary
// cross-entropy plus smoothed dice.
inline double pair_mask_term(const Eigen::VectorXd& m, const std::vector<char>& g) {
  const double n = double(g.size());
  double bce = 0, num = 1, den = 1;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double s = m[Eigen::Index(i)];
    bce += g[i] ? -std::log(std::max(s, 1e-12)) : -std::log(std::max(1 - s, 1e-12));
    num += 2 * s * (g[i] ? 1 : 0);
    den += s + (g[i] ? 1 : 0);
  }
  return bce / n + 1 - num / den;
}

inline int brute_nearest(const std::vector<Vec3d>& pts, const Vec3d& q) {
  int best = 0;
  double bd = (pts[0] - q).squaredNorm();
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = (pts[i] - q).squaredNorm();
    if (d < bd) {
      bd = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

inline planeforge::GeometryReport brute_geometry(const planeforge::SampledSurface& pred,
                                                 const planeforge::SampledSurface& gt, double tau) {
  planeforge::GeometryReport r;
  r.tau = tau;
  double s = 0, w = 0;
  for (const auto& p : pred.points) {
    const double d = (gt.points[static_cast<std::size_t>(brute_nearest(gt.points, p))] - p).norm();
    s += d;
    w += d < tau;
  }
  r.acc = s / double(pred.size());
  r.prec = w / double(pred.size());
  s = w = 0;
  for (const auto& p : gt.points) {
    const double d = (pred.points[static_cast<std::size_t>(brute_nearest(pred.points, p))] - p).norm();
    s += d;
    w += d < tau;
  }
  r.comp = s / double(gt.size());
  r.recall = w / double(gt.size());
  r.f_score = r.prec + r.recall > 0 ? 2 * r.prec * r.recall / (r.prec + r.recall) : 0;
  return r;
}

// Pair enumeration.
inline double brute_ri(const std::vector<int>& a, const std::vector<int>& b) {
  double agree = 0, pairs = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      agree += (a[i] == a[j]) == (b[i] == b[j]);
      pairs += 1;
    }
  return pairs > 0 ? agree / pairs : 1.0;
}

// Entropies from scratch: VOI = H(A) + H(B) - 2 I(A;B).
inline double brute_voi(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = double(a.size());
  std::map<int, double> ca, cb;
  std::map<std::pair<int, int>, double> cab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1;
    cb[b[i]] += 1;
    cab[{a[i], b[i]}] += 1;
  }
  double ha = 0, hb = 0, mi = 0;
  for (auto& [k, v] : ca) ha -= v / n * std::log(v / n);
  for (auto& [k, v] : cb) hb -= v / n * std::log(v / n);
  for (auto& [k, v] : cab) mi += v / n * std::log((v / n) / ((ca[k.first] / n) * (cb[k.second] / n)));
  return ha + hb - 2 * mi;
}

inline double brute_sc(const std::vector<int>& pred, const std::vector<int>& gt) {
  std::map<int, std::set<std::size_t>> rp, rg;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    rp[pred[i]].insert(i);
    rg[gt[i]].insert(i);
  }
  double s = 0;
  for (auto& [g, R] : rg) {
    double best = 0;
    for (auto& [p, Q] : rp) {
      std::size_t inter = 0;
      for (auto i : R) inter += Q.count(i);
      best = std::max(best, double(inter) / double(R.size() + Q.size() - inter));
    }
    s += double(R.size()) * best;
  }
  return s / double(pred.size());
}

}  // namespace testing
