#include "planeforge/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numbers>
#include <set>

#include "planeforge/errors.hpp"

namespace planeforge {

namespace {

std::int64_t pack(const Eigen::Vector3i& k) {
  return std::int64_t(k.x()) | (std::int64_t(k.y()) << 21) | (std::int64_t(k.z()) << 42);
}

bool key_less(const VoxelRecord& a, const VoxelRecord& b) {
  const Eigen::Vector3i& p = a.key;
  const Eigen::Vector3i& q = b.key;
  if (p.z() != q.z()) return p.z() < q.z();
  if (p.y() != q.y()) return p.y() < q.y();
  return p.x() < q.x();
}

std::vector<VoxelRecord> records_of(const InstancePrediction& inst, const VoxelEmbeddings& v) {
  std::vector<VoxelRecord> out;
  out.reserve(inst.members.size());
  for (int m : inst.members) {
    const auto i = static_cast<std::size_t>(m);
    if (i >= v.size()) throw BoundsError("instance references a voxel outside its fragment");
    out.push_back({v.keys[i], v.centers[i], v.normals[i], v.shifted[i]});
  }
  return out;
}

Eigen::VectorXd unit(const Eigen::VectorXd& e) {
  const double n = e.norm();
  return n > 0 ? Eigen::VectorXd(e / n) : e;
}

}  // namespace

class TrackerAccess {
 public:
  explicit TrackerAccess(TrackState& s) : s_(s) {}

  void begin(int fragment) {
    if (fragment <= s_.last_fragment_) throw OrderingError("fragment indices must strictly increase");
  }
  void end(int fragment) { s_.last_fragment_ = fragment; }

  TrackedInstance* find(int id) {
    for (auto& t : s_.instances_)
      if (t.id == id) return &t;
    return nullptr;
  }
  std::vector<TrackedInstance>& instances() { return s_.instances_; }

  // Records not yet owned by another instance.
  std::vector<VoxelRecord> unclaimed(const std::vector<VoxelRecord>& recs) const {
    std::vector<VoxelRecord> out;
    for (const auto& r : recs) {
      const auto it = s_.owner_.find(pack(r.key));
      if (it == s_.owner_.end()) out.push_back(r);
    }
    return out;
  }

  void merge(TrackedInstance& t, const std::vector<VoxelRecord>& recs, const Eigen::VectorXd& emb, int fragment) {
    const std::vector<VoxelRecord> add = unclaimed(recs);
    for (const auto& r : add) s_.owner_[pack(r.key)] = t.id;
    std::vector<VoxelRecord> merged;
    merged.reserve(t.voxels.size() + add.size());
    std::vector<VoxelRecord> sorted_add = add;
    std::sort(sorted_add.begin(), sorted_add.end(), key_less);
    std::merge(t.voxels.begin(), t.voxels.end(), sorted_add.begin(), sorted_add.end(), std::back_inserter(merged),
               key_less);
    t.voxels = std::move(merged);
    t.params = aggregate_records(t.voxels);
    t.embedding = unit(emb);
    t.last_seen = fragment;
  }

  bool open(const std::vector<VoxelRecord>& recs, const Eigen::VectorXd& emb, int fragment, int min_voxels) {
    std::vector<VoxelRecord> own = unclaimed(recs);
    if (static_cast<int>(own.size()) < std::max(min_voxels, 3)) return false;
    std::sort(own.begin(), own.end(), key_less);
    TrackedInstance t;
    t.id = s_.next_id_++;
    for (const auto& r : own) s_.owner_[pack(r.key)] = t.id;
    t.voxels = std::move(own);
    t.params = aggregate_records(t.voxels);
    t.embedding = unit(emb);
    t.first_seen = t.last_seen = fragment;
    s_.instances_.push_back(std::move(t));
    return true;
  }

 private:
  TrackState& s_;
};

int TrackState::owner(const Eigen::Vector3i& key) const {
  const auto it = owner_.find(pack(key));
  return it == owner_.end() ? -1 : it->second;
}

const TrackedInstance* TrackState::find(int id) const {
  for (const auto& t : instances_)
    if (t.id == id) return &t;
  return nullptr;
}

std::vector<std::pair<int, Eigen::VectorXd>> TrackState::tracking_queries(int fragment,
                                                                           const TrackerConfig& cfg) const {
  std::vector<std::pair<int, Eigen::VectorXd>> out;
  for (const auto& t : instances_)
    if (fragment - t.last_seen <= cfg.retire_after) out.emplace_back(t.id, t.embedding);
  return out;
}

Plane aggregate_records(const std::vector<VoxelRecord>& records) {
  VoxelEmbeddings v;
  std::vector<int> members;
  for (const auto& r : records) {
    members.push_back(static_cast<int>(v.keys.size()));
    v.keys.push_back(r.key);
    v.centers.push_back(r.center);
    v.normals.push_back(r.normal);
    v.offsets.push_back(-r.shifted.dot(r.normal));
    v.shifted.push_back(r.shifted);
  }
  return aggregate_plane(members, v);
}

double footprint_overlap(const std::vector<VoxelRecord>& a, const std::vector<VoxelRecord>& b, const Plane& on,
                         double cell) {
  const Vec3d e1 = on.axis, e2 = on.second_axis();
  auto raster = [&](const std::vector<VoxelRecord>& recs) {
    std::set<std::pair<long, long>> cells;
    for (const auto& r : recs) {
      const Vec3d d = r.center - on.center;
      cells.emplace(long(std::floor(d.dot(e1) / cell)), long(std::floor(d.dot(e2) / cell)));
    }
    return cells;
  };
  const auto ca = raster(a), cb = raster(b);
  if (ca.empty() || cb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& c : ca) inter += cb.count(c);
  return double(inter) / double(std::min(ca.size(), cb.size()));
}

void step(TrackState& state, const FragmentResult& fragment, const TrackerConfig& cfg) {
  TrackerAccess acc(state);
  acc.begin(fragment.index);
  for (const auto& inst : fragment.instances) {
    const std::vector<VoxelRecord> recs = records_of(inst, fragment.voxels);
    TrackedInstance* t = inst.track_id >= 0 ? acc.find(inst.track_id) : nullptr;
    if (t && !recs.empty() && inst.embedding.size() == t->embedding.size() &&
        unit(inst.embedding).dot(t->embedding) >= cfg.accept_cosine) {
      acc.merge(*t, recs, inst.embedding, fragment.index);
    } else {
      acc.open(recs, inst.embedding, fragment.index, cfg.min_voxels);
    }
  }
  acc.end(fragment.index);
}

void heuristic_step(TrackState& state, const FragmentResult& fragment, const HeuristicConfig& h,
                    const TrackerConfig& cfg) {
  TrackerAccess acc(state);
  acc.begin(fragment.index);
  const double cos_max = std::cos(h.angle_deg * std::numbers::pi / 180.0);
  for (const auto& inst : fragment.instances) {
    const std::vector<VoxelRecord> recs = records_of(inst, fragment.voxels);
    if (static_cast<int>(recs.size()) < std::max(cfg.min_voxels, 3)) continue;
    Plane p;
    try {
      p = aggregate_records(recs);
    } catch (const DegenerateNormal&) {
      continue;
    }
    TrackedInstance* best = nullptr;
    double best_overlap = -1;
    for (auto& t : acc.instances()) {
      // A previous instance of this very fragment is never a merge target.
      if (t.last_seen == fragment.index && t.first_seen == fragment.index) continue;
      const double c = p.normal.dot(t.params.normal);
      if (std::abs(c) <= cos_max) continue;
      const double d = c >= 0 ? p.offset : -p.offset;
      if (std::abs(d - t.params.offset) >= h.d_merge) continue;
      const double o = footprint_overlap(t.voxels, recs, t.params, h.cell);
      if (o > h.iou_merge && o > best_overlap) {
        best = &t;
        best_overlap = o;
      }
    }
    if (best) {
      acc.merge(*best, recs, inst.embedding, fragment.index);
    } else {
      acc.open(recs, inst.embedding, fragment.index, cfg.min_voxels);
    }
  }
  acc.end(fragment.index);
}

}  // namespace planeforge
