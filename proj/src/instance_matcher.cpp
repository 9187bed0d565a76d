#include "planeforge/instance_matcher.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>

#include "planeforge/hungarian.hpp"
#include "planeforge/mlp.hpp"

namespace planeforge {

void VoxelEmbeddings::validate() const {
  const std::size_t n = keys.size();
  if (centers.size() != n || static_cast<std::size_t>(embeddings.cols()) != n || normals.size() != n ||
      offsets.size() != n || shifted.size() != n)
    throw ShapeError("voxel embedding lists disagree in length");
  for (const auto& v : normals)
    if (std::abs(v.norm() - 1) > 1e-6) throw InvariantError("voxel normal is not unit length");
}

Eigen::Matrix2Xd QuerySet::probabilities() const {
  Eigen::Matrix2Xd p(2, logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    const Eigen::Vector2d e = (logits.col(j).array() - m).exp();
    p.col(j) = e / e.sum();
  }
  return p;
}

void QuerySet::validate() const {
  if (logits.cols() != embeddings.cols() || track_ids.size() != size())
    throw ShapeError("query set lists disagree in length");
}

Eigen::MatrixXd soft_masks(const VoxelEmbeddings& voxels, const QuerySet& queries) {
  if (voxels.size() > 0 && queries.size() > 0 && queries.embeddings.rows() != voxels.embeddings.rows())
    throw ShapeError("query and voxel embedding dimensions differ");
  Eigen::MatrixXd logits = queries.embeddings.transpose() * voxels.embeddings;
  return logits.unaryExpr([](double z) { return detail::sigmoid(z); });
}

std::vector<InstancePrediction> decode_masks(const VoxelEmbeddings& voxels, const QuerySet& queries,
                                             double tau_mask) {
  voxels.validate();
  queries.validate();
  const Eigen::MatrixXd soft = soft_masks(voxels, queries);
  const Eigen::Matrix2Xd probs = queries.probabilities();

  std::vector<InstancePrediction> out;
  std::vector<int> slot(queries.size(), -1);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto qi = static_cast<Eigen::Index>(q);
    if (probs(1, qi) > probs(0, qi)) continue;  // argmax is no-object; ties keep the plane
    InstancePrediction p;
    p.query = static_cast<int>(q);
    p.track_id = queries.track_ids[q];
    p.probs = probs.col(qi);
    p.soft = soft.row(qi).transpose();
    p.embedding = queries.embeddings.col(qi);
    slot[q] = static_cast<int>(out.size());
    out.push_back(std::move(p));
  }
  for (Eigen::Index v = 0; v < soft.cols(); ++v) {
    int best = -1;
    double best_val = -1;
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double s = out[k].soft[v];
      if (s >= tau_mask && s > best_val) {
        best_val = s;
        best = static_cast<int>(k);
      }
    }
    if (best >= 0) out[static_cast<std::size_t>(best)].members.push_back(static_cast<int>(v));
  }
  return out;
}

double mask_loss(const Eigen::VectorXd& soft, const std::vector<char>& gt) {
  if (static_cast<std::size_t>(soft.size()) != gt.size()) throw ShapeError("mask length mismatch");
  if (gt.empty()) return 0.0;
  double bce = 0, inter = 0, sm = 0, sg = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double m = soft[static_cast<Eigen::Index>(i)];
    const double g = gt[i] ? 1.0 : 0.0;
    bce -= g * std::log(std::max(m, kProbClamp)) + (1 - g) * std::log(std::max(1 - m, kProbClamp));
    inter += m * g;
    sm += m;
    sg += g;
  }
  bce /= double(gt.size());
  const double dice = 1 - (2 * inter + 1) / (sm + sg + 1);
  return bce + dice;
}

MaskClsLoss mask_cls_loss(const Eigen::Matrix2Xd& probs, const Eigen::MatrixXd& soft, const GtSegmentSet& gt) {
  const Eigen::Index n = probs.cols();
  const Eigen::Index m = static_cast<Eigen::Index>(gt.segments.size());
  if (soft.rows() != n) throw ShapeError("one soft mask per query is required");
  if (n < m) throw ShapeError("fewer queries than ground-truth segments");
  MaskClsLoss out;
  out.cost.resize(n, m);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const GtSegment& s = gt.segments[static_cast<std::size_t>(i)];
      const double p = std::clamp(probs(s.label, j), kProbClamp, 1.0);
      out.cost(j, i) = -p + mask_loss(soft.row(j).transpose(), s.mask);
    }
  }
  // No-object padding columns cost 0, so the rectangular solve is equivalent.
  const Assignment a = hungarian(out.cost);
  out.query_to_gt = a.row_to_col;
  for (Eigen::Index j = 0; j < n; ++j) {
    const int i = out.query_to_gt[static_cast<std::size_t>(j)];
    if (i < 0) {
      out.loss -= std::log(std::clamp(probs(1, j), kProbClamp, 1.0));
    } else {
      const GtSegment& s = gt.segments[static_cast<std::size_t>(i)];
      out.loss -= std::log(std::clamp(probs(s.label, j), kProbClamp, 1.0));
      out.loss += mask_loss(soft.row(j).transpose(), s.mask);
    }
  }
  return out;
}

MaskClsLoss mask_cls_loss(const VoxelEmbeddings& voxels, const QuerySet& queries, const GtSegmentSet& gt) {
  return mask_cls_loss(queries.probabilities(), soft_masks(voxels, queries), gt);
}

Plane aggregate_plane(const std::vector<int>& members, const VoxelEmbeddings& voxels) {
  if (members.size() < 3) throw TooFewVoxels("plane aggregation needs at least 3 voxels");
  Vec3d n = Vec3d::Zero(), c = Vec3d::Zero();
  std::vector<Vec3d> pts;
  pts.reserve(members.size());
  for (int v : members) {
    const auto k = static_cast<std::size_t>(v);
    n += voxels.normals[k];
    c += voxels.shifted[k];
    pts.push_back(voxels.centers[k]);
  }
  n /= double(members.size());
  if (n.norm() < 1e-6) throw DegenerateNormal("member normals cancel out");
  n.normalize();
  c /= double(members.size());
  Plane p;
  p.normal = n;
  p.center = c;
  p.offset = -c.dot(n);
  p.axis = primary_axis(pts, std::optional<Vec3d>(n));
  return p;
}

GtSegmentSet gt_segments(const GtVoxelization& gt, const std::vector<Eigen::Vector3i>& keys) {
  std::map<std::int64_t, int> label;
  for (const auto& v : gt.voxels) label[gt.grid.linear(v.key)] = v.plane_id;
  std::map<int, std::size_t> slot;
  GtSegmentSet out;
  for (const auto& v : gt.voxels) {
    if (slot.count(v.plane_id)) continue;
    slot[v.plane_id] = 0;
  }
  for (auto& [id, s] : slot) {
    s = out.segments.size();
    GtSegment seg;
    seg.source_id = id;
    seg.mask.assign(keys.size(), 0);
    out.segments.push_back(std::move(seg));
  }
  for (const auto& v : gt.voxels) {
    GtSegment& seg = out.segments[slot[v.plane_id]];
    seg.params = Plane::from_center(v.normal, v.plane_center, v.normal.unitOrthogonal());
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!gt.grid.contains(keys[i])) continue;
    const auto it = label.find(gt.grid.linear(keys[i]));
    if (it != label.end()) out.segments[slot[it->second]].mask[i] = 1;
  }
  // Segments with no voxel in this set are not part of the target.
  std::erase_if(out.segments, [](const GtSegment& s) {
    return std::none_of(s.mask.begin(), s.mask.end(), [](char c) { return c != 0; });
  });
  return out;
}

// ---------------------------------------------------------------------------
// Oracle provider

OracleEmbeddingProvider::OracleEmbeddingProvider(const SceneSpec& scene, OracleConfig cfg)
    : scene_(scene), cfg_(cfg) {
  if (scene_.planes.size() > static_cast<std::size_t>(kEmbeddingDim))
    throw ConfigError("oracle embeddings support at most 16 planes");
  if (cfg_.sigma < 0) throw ConfigError("embedding noise must be non-negative");
}

VoxelEmbeddings OracleEmbeddingProvider::embed(const std::vector<Eigen::Vector3i>& occupied, const VoxelGrid& grid,
                                               int fragment) {
  std::mt19937_64 rng(cfg_.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(fragment) + 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double jitter = cfg_.normal_jitter_deg * std::numbers::pi / 180.0;

  VoxelEmbeddings out;
  const std::size_t n = occupied.size();
  out.keys = occupied;
  out.embeddings.resize(kEmbeddingDim, static_cast<Eigen::Index>(n));
  out.centers.resize(n);
  out.normals.resize(n);
  out.offsets.resize(n);
  out.shifted.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3d c = grid.center(occupied[i]);
    out.centers[i] = c;
    int best = -1;
    double best_d = grid.voxel_size + 1e-9;
    for (std::size_t k = 0; k < scene_.planes.size(); ++k) {
      const double d = scene_.planes[k].distance(c);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    Eigen::VectorXd e(kEmbeddingDim);
    for (Eigen::Index a = 0; a < kEmbeddingDim; ++a) e[a] = cfg_.sigma * noise(rng);
    if (best >= 0) {
      const Plane& p = scene_.planes[static_cast<std::size_t>(best)].params;
      e[best] += 1.0;
      Vec3d nm = p.normal;
      if (jitter > 0) {
        const Vec3d t1 = nm.unitOrthogonal(), t2 = nm.cross(t1);
        nm = (nm + jitter * noise(rng) * t1 + jitter * noise(rng) * t2).normalized();
      }
      out.normals[i] = nm;
      out.offsets[i] = p.offset;
      out.shifted[i] = p.center;
    } else {
      e.array() -= 0.5;
      out.normals[i] = Vec3d::UnitZ();
      out.offsets[i] = -c.z();
      out.shifted[i] = c;
    }
    out.embeddings.col(static_cast<Eigen::Index>(i)) = e;
  }
  return out;
}

QuerySet OracleEmbeddingProvider::queries(const VoxelEmbeddings& voxels,
                                          const std::vector<std::pair<int, Eigen::VectorXd>>& tracking, int count) {
  const int planes = static_cast<int>(scene_.planes.size());
  // Support per one-hot direction as seen through the embeddings themselves.
  std::vector<int> support(static_cast<std::size_t>(planes), 0);
  for (Eigen::Index v = 0; v < voxels.embeddings.cols(); ++v) {
    Eigen::Index k = 0;
    const double m = voxels.embeddings.col(v).head(planes).maxCoeff(&k);
    if (m > 0.5) ++support[static_cast<std::size_t>(k)];
  }
  const Eigen::Vector2d plane_logits(4, -4), none_logits(-4, 4);
  std::vector<Eigen::VectorXd> emb;
  std::vector<Eigen::Vector2d> logits;
  std::vector<int> ids;
  std::vector<char> claimed(static_cast<std::size_t>(planes), 0);
  for (const auto& [id, e] : tracking) {
    const Eigen::VectorXd u = e.normalized();
    int best = -1;
    double best_cos = -2;
    for (int k = 0; k < planes; ++k) {
      if (support[static_cast<std::size_t>(k)] < cfg_.min_support) continue;
      if (u[k] > best_cos) {
        best_cos = u[k];
        best = k;
      }
    }
    const bool live = best >= 0 && best_cos >= cfg_.claim_cosine;
    if (live) claimed[static_cast<std::size_t>(best)] = 1;
    emb.push_back(cfg_.query_scale * u);
    logits.push_back(live ? plane_logits : none_logits);
    ids.push_back(id);
  }
  for (int k = 0; k < planes; ++k) {
    if (claimed[static_cast<std::size_t>(k)] || support[static_cast<std::size_t>(k)] < cfg_.min_support) continue;
    Eigen::VectorXd e = Eigen::VectorXd::Zero(kEmbeddingDim);
    e[k] = cfg_.query_scale;
    emb.push_back(e);
    logits.push_back(plane_logits);
    ids.push_back(-1);
  }
  while (static_cast<int>(emb.size()) < count) {
    emb.push_back(Eigen::VectorXd::Zero(kEmbeddingDim));
    logits.push_back(none_logits);
    ids.push_back(-1);
  }
  QuerySet q;
  q.embeddings.resize(kEmbeddingDim, static_cast<Eigen::Index>(emb.size()));
  q.logits.resize(2, static_cast<Eigen::Index>(emb.size()));
  for (std::size_t j = 0; j < emb.size(); ++j) {
    q.embeddings.col(static_cast<Eigen::Index>(j)) = emb[j];
    q.logits.col(static_cast<Eigen::Index>(j)) = logits[j];
  }
  q.track_ids = std::move(ids);
  return q;
}

void write_instances(std::ostream& out, const std::vector<InstancePrediction>& instances) {
  out << "# query class voxels nx ny nz d cx cy cz ax ay az\n";
  out << std::setprecision(17);
  for (const auto& p : instances) {
    out << p.query << ' ' << (p.probs[0] >= p.probs[1] ? "plane" : "none") << ' ' << p.members.size();
    if (p.has_params) {
      const Plane& q = p.params;
      out << ' ' << q.normal.x() << ' ' << q.normal.y() << ' ' << q.normal.z() << ' ' << q.offset << ' '
          << q.center.x() << ' ' << q.center.y() << ' ' << q.center.z() << ' ' << q.axis.x() << ' ' << q.axis.y()
          << ' ' << q.axis.z();
    }
    out << '\n';
  }
}

}  // namespace planeforge
