#include "planeforge/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"
#include "planeforge/camera_io.hpp"

namespace planeforge {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Texture

Texture Texture::constant(const Vec3d& c) {
  Texture t;
  t.kind = Kind::kConstant;
  t.color = c;
  return t;
}

Texture Texture::checker(double cell, Texture a, Texture b, const Vec2d& phase) {
  if (!(cell > 0)) throw InvariantError("checker cell size must be positive");
  Texture t;
  t.kind = Kind::kChecker;
  t.cell = cell;
  t.phase = phase;
  t.children.push_back(std::move(a));
  t.children.push_back(std::move(b));
  return t;
}

Texture Texture::two_tone(double angle, double split, Texture a, Texture b) {
  Texture t;
  t.kind = Kind::kTwoTone;
  t.angle = angle;
  t.split = split;
  t.children.push_back(std::move(a));
  t.children.push_back(std::move(b));
  return t;
}

Texture Texture::noise(double cell, const Vec3d& base, double amplitude, std::uint64_t seed, const Vec2d& phase) {
  if (!(cell > 0)) throw InvariantError("noise cell size must be positive");
  Texture t;
  t.kind = Kind::kNoise;
  t.cell = cell;
  t.color = base;
  t.amplitude = amplitude;
  t.seed = seed;
  t.phase = phase;
  return t;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

Texture Texture::flattened() const {
  if (kind == Kind::kNoise) return constant(color);
  Texture t = *this;
  for (auto& c : t.children) c = c.flattened();
  return t;
}

Vec3d Texture::evaluate(double u, double v) const {
  const Texture* node = this;
  while (true) {
    switch (node->kind) {
      case Kind::kConstant:
        return node->color;
      case Kind::kChecker: {
        const auto i = static_cast<long long>(std::floor((u - node->phase.x()) / node->cell));
        const auto j = static_cast<long long>(std::floor((v - node->phase.y()) / node->cell));
        node = &node->children[((i + j) % 2 == 0) ? 0 : 1];
        break;
      }
      case Kind::kTwoTone: {
        const double s = u * std::cos(node->angle) + v * std::sin(node->angle);
        node = &node->children[s >= node->split ? 0 : 1];
        break;
      }
      case Kind::kNoise: {
        const auto i = static_cast<std::int64_t>(std::floor((u - node->phase.x()) / node->cell));
        const auto j = static_cast<std::int64_t>(std::floor((v - node->phase.y()) / node->cell));
        std::uint64_t h = splitmix(node->seed ^ splitmix(static_cast<std::uint64_t>(i) ^ splitmix(static_cast<std::uint64_t>(j))));
        Vec3d c;
        for (int k = 0; k < 3; ++k) {
          h = splitmix(h);
          const double r = double(h >> 11) * 0x1.0p-53;
          c[k] = node->color[k] + node->amplitude * (2 * r - 1);
        }
        return c.cwiseMax(0).cwiseMin(1);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Shape

Shape Shape::rectangle(double half_u, double half_v) {
  if (!(half_u > 0 && half_v > 0)) throw InvariantError("rectangle extents must be positive");
  Shape s;
  s.kind = Kind::kRectangle;
  s.half_extents = {half_u, half_v};
  return s;
}

Shape Shape::disk(double radius) {
  if (!(radius > 0)) throw InvariantError("disk radius must be positive");
  Shape s;
  s.kind = Kind::kDisk;
  s.radius = radius;
  return s;
}

Shape Shape::polygon(std::vector<Vec2d> vertices) {
  Shape s;
  s.kind = Kind::kPolygon;
  s.vertices = std::move(vertices);
  if (s.vertices.size() < 3 || !(s.area() > 0))
    throw InvariantError("polygon needs at least 3 counter-clockwise vertices");
  return s;
}

namespace {

double cross2(const Vec2d& a, const Vec2d& b) { return a.x() * b.y() - a.y() * b.x(); }

double segment_distance(const Vec2d& p, const Vec2d& a, const Vec2d& b) {
  const Vec2d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

bool Shape::contains(double u, double v, double tol) const {
  switch (kind) {
    case Kind::kRectangle:
      return std::abs(u) <= half_extents.x() + tol && std::abs(v) <= half_extents.y() + tol;
    case Kind::kDisk:
      return std::hypot(u, v) <= radius + tol;
    case Kind::kPolygon: {
      const Vec2d p(u, v);
      for (std::size_t i = 0; i < vertices.size(); ++i) {
        const Vec2d& a = vertices[i];
        const Vec2d& b = vertices[(i + 1) % vertices.size()];
        const Vec2d e = b - a;
        if (cross2(e, p - a) < -tol * e.norm()) return false;
      }
      return true;
    }
  }
  return false;
}

double Shape::distance_outside(double u, double v) const {
  switch (kind) {
    case Kind::kRectangle: {
      const double dx = std::max(std::abs(u) - half_extents.x(), 0.0);
      const double dy = std::max(std::abs(v) - half_extents.y(), 0.0);
      return std::hypot(dx, dy);
    }
    case Kind::kDisk:
      return std::max(std::hypot(u, v) - radius, 0.0);
    case Kind::kPolygon: {
      if (contains(u, v, 0.0)) return 0.0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < vertices.size(); ++i)
        best = std::min(best, segment_distance({u, v}, vertices[i], vertices[(i + 1) % vertices.size()]));
      return best;
    }
  }
  return 0.0;
}

double Shape::max_radius() const {
  switch (kind) {
    case Kind::kRectangle:
      return half_extents.norm();
    case Kind::kDisk:
      return radius;
    case Kind::kPolygon: {
      double r = 0;
      for (const auto& p : vertices) r = std::max(r, p.norm());
      return r;
    }
  }
  return 0.0;
}

double Shape::area() const {
  switch (kind) {
    case Kind::kRectangle:
      return 4 * half_extents.x() * half_extents.y();
    case Kind::kDisk:
      return std::numbers::pi * radius * radius;
    case Kind::kPolygon: {
      double a = 0;
      for (std::size_t i = 0; i < vertices.size(); ++i)
        a += cross2(vertices[i], vertices[(i + 1) % vertices.size()]);
      return 0.5 * a;
    }
  }
  return 0.0;
}

double ScenePlane::distance(const Vec3d& p) const {
  const Vec2d uv = local(p);
  const double h = params.signed_distance(p);
  return std::hypot(h, shape.distance_outside(uv.x(), uv.y()));
}

// ---------------------------------------------------------------------------
// SceneSpec

Vec3d SceneSpec::environment(const Vec3d& direction) const {
  if (environment_amplitude == 0) return background;
  const Vec3d d = direction.normalized();
  const auto i = static_cast<std::int64_t>(std::floor(std::atan2(d.y(), d.x()) / environment_cell));
  const auto j = static_cast<std::int64_t>(std::floor(std::asin(std::clamp(d.z(), -1.0, 1.0)) / environment_cell));
  std::uint64_t h = splitmix(seed ^ splitmix(static_cast<std::uint64_t>(i) ^ splitmix(static_cast<std::uint64_t>(j) + 7)));
  Vec3d c;
  for (int k = 0; k < 3; ++k) {
    h = splitmix(h);
    c[k] = background[k] + environment_amplitude * (2 * (double(h >> 11) * 0x1.0p-53) - 1);
  }
  return c.cwiseMax(0).cwiseMin(1);
}

std::vector<Camera> SceneSpec::cameras() const {
  std::vector<Camera> out;
  out.reserve(trajectory.size());
  for (const auto& pose : trajectory) {
    Camera c;
    c.intrinsics = camera.intrinsics;
    c.pose = pose;
    c.width = camera.width;
    c.height = camera.height;
    out.push_back(std::move(c));
  }
  return out;
}

int SceneSpec::fragment_count() const {
  return static_cast<int>(trajectory.size()) / fragment_length;
}

std::vector<int> SceneSpec::fragment_views(int f) const {
  if (f < 0 || f >= fragment_count()) throw BoundsError("fragment index out of range");
  std::vector<int> out(static_cast<std::size_t>(fragment_length));
  for (int i = 0; i < fragment_length; ++i) out[static_cast<std::size_t>(i)] = f * fragment_length + i;
  return out;
}

const ScenePlane& SceneSpec::plane(int id) const {
  for (const auto& p : planes)
    if (p.id == id) return p;
  throw BoundsError("unknown plane id " + std::to_string(id));
}

void SceneSpec::validate() const {
  if (fragment_length < 1) throw ConfigError("fragment length must be at least 1");
  if (!((bounds.max - bounds.min).array() > 0).all()) throw ConfigError("scene bounds are empty");
  if (environment_amplitude < 0 || !(environment_cell > 0)) throw ConfigError("environment noise needs amplitude >= 0 and cell > 0");
  std::vector<int> ids;
  for (const auto& p : planes) {
    p.params.validate();
    if (!(p.shape.area() > 0)) throw ConfigError("plane " + std::to_string(p.id) + " has no area");
    ids.push_back(p.id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ConfigError("duplicate plane id");
  for (const auto& c : cameras()) {
    c.validate();
    // The optical axis must pass through the bounds.
    const Vec3d o = c.pose.translation, d = c.pose.rotation.col(2);
    double t0 = 0, t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (std::abs(d[a]) < 1e-15) {
        if (o[a] < bounds.min[a] || o[a] > bounds.max[a]) t0 = t1 + 1;
        continue;
      }
      double ta = (bounds.min[a] - o[a]) / d[a], tb = (bounds.max[a] - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    if (t0 > t1) throw ConfigError("a camera does not look into the scene bounds");
  }
}

// ---------------------------------------------------------------------------
// Presets

namespace {

Camera pinhole(int width, int height, double hfov_deg) {
  Camera c;
  c.width = width;
  c.height = height;
  const double f = width / 2.0 / std::tan(hfov_deg * std::numbers::pi / 360.0);
  c.intrinsics = {f, f, (width - 1) / 2.0, (height - 1) / 2.0};
  return c;
}

// Phase that puts texture edges on voxel faces, so no voxel center of the
// shared grid sits on a color edge.
Vec2d grid_phase(const Plane& p, const Vec3d& origin, double vs) {
  const Vec3d d = origin - p.center;
  const double u0 = d.dot(p.axis);
  const double v0 = d.dot(p.second_axis());
  auto face = [vs](double c) {
    const double m = c + 0.5 * vs;
    return m - vs * std::floor(m / vs);
  };
  return {face(u0), face(v0)};
}

// Three by three patches of voxel-sized noise around random base colors. The
// patch borders sit off center on voxel faces, so refinement can see the offset
// of a plane, and the high per-cell entropy keeps chance agreement between
// unrelated wall points rare, which is what view-consistency occupancy needs.
Texture wall_texture(std::mt19937_64& rng, const Vec2d& phase, double cell, double half_u, double half_v) {
  std::uniform_real_distribution<double> base_dist(0.2, 0.8), split_dist(0.15, 0.6);
  auto snap = [&](double x, double p) { return p + cell * std::round((x - p) / cell); };
  auto patch = [&]() {
    const Vec3d base(base_dist(rng), base_dist(rng), base_dist(rng));
    return Texture::noise(cell, base, 0.4, rng(), phase);
  };
  const double u_lo = snap(-split_dist(rng) * half_u, phase.x()), u_hi = snap(split_dist(rng) * half_u, phase.x());
  const double v_lo = snap(-split_dist(rng) * half_v, phase.y()), v_hi = snap(split_dist(rng) * half_v, phase.y());
  auto row = [&]() {
    Texture left = patch(), mid = patch(), right = patch();
    return Texture::two_tone(0.0, u_hi, std::move(right), Texture::two_tone(0.0, u_lo, std::move(mid), std::move(left)));
  };
  Texture top = row(), middle = row(), bottom = row();
  const double half_pi = std::numbers::pi / 2;
  return Texture::two_tone(half_pi, v_hi, std::move(top),
                           Texture::two_tone(half_pi, v_lo, std::move(middle), std::move(bottom)));
}

void add_plane(SceneSpec& s, std::mt19937_64& rng, const Vec3d& normal, const Vec3d& center,
               const Vec3d& axis, double half_u, double half_v, double vs = 0.04) {
  ScenePlane p;
  p.id = static_cast<int>(s.planes.size());
  p.params = Plane::from_center(normal, center, axis);
  p.shape = Shape::rectangle(half_u, half_v);
  p.texture = wall_texture(rng, grid_phase(p.params, s.bounds.min, vs), vs, half_u, half_v);
  s.planes.push_back(std::move(p));
}

// Nine-view arc of radius `radius` around `pivot`, spanning +-spread degrees
// around `base_angle`, all looking towards `target_x` across the room.
void add_arc(SceneSpec& s, const Vec3d& pivot, double base_angle, double radius, double spread_deg,
             double height, const Vec3d& target) {
  for (int i = 0; i < s.fragment_length; ++i) {
    const double frac = (i - (s.fragment_length - 1) / 2.0) / ((s.fragment_length - 1) / 2.0);
    const double a = base_angle + spread_deg * std::numbers::pi / 180.0 * frac;
    const Vec3d pos = pivot + Vec3d(radius * std::cos(a), radius * std::sin(a), height + 0.3 * std::sin(double(i)));
    const Vec3d tgt = target + Vec3d(0, 0.3 * frac, 0);
    s.trajectory.push_back(look_at(pos, tgt));
  }
}

SceneSpec box6(std::uint64_t seed) {
  SceneSpec s;
  s.name = "box6";
  s.seed = seed;
  s.bounds = {{-2, -2, 0}, {2, 2, 3}};
  const Camera cam = pinhole(512, 384, 90);
  s.camera = {cam.width, cam.height, cam.intrinsics};
  std::mt19937_64 rng(seed);
  add_plane(s, rng, {0, 0, 1}, {0, 0, 0}, {1, 0, 0}, 2, 2);
  add_plane(s, rng, {0, 0, -1}, {0, 0, 3}, {1, 0, 0}, 2, 2);
  add_plane(s, rng, {-1, 0, 0}, {2, 0, 1.5}, {0, 1, 0}, 2, 1.5);
  add_plane(s, rng, {1, 0, 0}, {-2, 0, 1.5}, {0, 1, 0}, 2, 1.5);
  add_plane(s, rng, {0, -1, 0}, {0, 2, 1.5}, {1, 0, 0}, 2, 1.5);
  add_plane(s, rng, {0, 1, 0}, {0, -2, 1.5}, {1, 0, 0}, 2, 1.5);
  add_arc(s, Vec3d::Zero(), std::numbers::pi, 1.5, 90, 1.2, {1.0, 0, 1.2});
  add_arc(s, Vec3d::Zero(), 0.0, 1.5, 90, 1.2, {-1.0, 0, 1.2});
  return s;
}

SceneSpec two_walls(std::uint64_t seed, bool with_floor) {
  SceneSpec s;
  s.name = with_floor ? "adversarial-parallel" : "two-walls";
  s.seed = seed;
  s.environment_amplitude = 0.4;
  s.bounds = {{-2, -2, 0}, {2, 2, 2.5}};
  const Camera cam = pinhole(512, 384, 90);
  s.camera = {cam.width, cam.height, cam.intrinsics};
  std::mt19937_64 rng(seed);
  // Thin double wall: A faces -x, B sits 0.1 behind it and faces +x.
  add_plane(s, rng, {-1, 0, 0}, {0, 0, 1.25}, {0, 1, 0}, 1.5, 1.0);
  add_plane(s, rng, {1, 0, 0}, {0.1, 0, 1.25}, {0, 1, 0}, 1.5, 1.0);
  if (with_floor) add_plane(s, rng, {0, 0, 1}, {0, 0, 0}, {1, 0, 0}, 2, 2);
  add_arc(s, Vec3d::Zero(), std::numbers::pi, 1.6, 50, 1.1, {0.0, 0, 1.25});
  add_arc(s, Vec3d(0.1, 0, 0), 0.0, 1.6, 50, 1.1, {0.1, 0, 1.25});
  return s;
}

}  // namespace

std::vector<std::string> scene_presets() { return {"box6", "two-walls", "adversarial-parallel"}; }

SceneSpec build_scene(const std::string& preset, std::uint64_t seed) {
  SceneSpec s;
  if (preset == "box6") {
    s = box6(seed);
  } else if (preset == "two-walls") {
    s = two_walls(seed, false);
  } else if (preset == "adversarial-parallel") {
    s = two_walls(seed, true);
  } else {
    throw ConfigError("unknown scene preset '" + preset + "'");
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <int N>
Eigen::Matrix<double, N, 1> json_vec(const json& j) {
  if (!j.is_array() || j.size() != N) throw ConfigError("expected an array of " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

json texture_json(const Texture& t) {
  json j;
  switch (t.kind) {
    case Texture::Kind::kConstant:
      j["type"] = "constant";
      j["color"] = vec_json(t.color);
      return j;
    case Texture::Kind::kNoise:
      j["type"] = "noise";
      j["cell"] = t.cell;
      j["color"] = vec_json(t.color);
      j["amplitude"] = t.amplitude;
      j["seed"] = t.seed;
      j["phase"] = vec_json(t.phase);
      return j;
    case Texture::Kind::kChecker:
      j["type"] = "checker";
      j["cell"] = t.cell;
      j["phase"] = vec_json(t.phase);
      break;
    case Texture::Kind::kTwoTone:
      j["type"] = "two_tone";
      j["angle"] = t.angle;
      j["split"] = t.split;
      break;
  }
  j["children"] = json::array({texture_json(t.children[0]), texture_json(t.children[1])});
  return j;
}

Texture json_texture(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "constant") return Texture::constant(json_vec<3>(j.at("color")));
  if (type == "noise")
    return Texture::noise(j.at("cell").get<double>(), json_vec<3>(j.at("color")), j.at("amplitude").get<double>(),
                          j.at("seed").get<std::uint64_t>(), json_vec<2>(j.at("phase")));
  const json& ch = j.at("children");
  if (!ch.is_array() || ch.size() != 2) throw ConfigError("texture node needs two children");
  if (type == "checker")
    return Texture::checker(j.at("cell").get<double>(), json_texture(ch[0]), json_texture(ch[1]),
                            json_vec<2>(j.at("phase")));
  if (type == "two_tone")
    return Texture::two_tone(j.at("angle").get<double>(), j.at("split").get<double>(),
                             json_texture(ch[0]), json_texture(ch[1]));
  throw ConfigError("unknown texture type '" + type + "'");
}

json shape_json(const Shape& s) {
  json j;
  switch (s.kind) {
    case Shape::Kind::kRectangle:
      j["type"] = "rectangle";
      j["half_extents"] = vec_json(s.half_extents);
      break;
    case Shape::Kind::kDisk:
      j["type"] = "disk";
      j["radius"] = s.radius;
      break;
    case Shape::Kind::kPolygon: {
      j["type"] = "polygon";
      json vs = json::array();
      for (const auto& v : s.vertices) vs.push_back(vec_json(v));
      j["vertices"] = vs;
      break;
    }
  }
  return j;
}

Shape json_shape(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "rectangle") {
    const Vec2d h = json_vec<2>(j.at("half_extents"));
    return Shape::rectangle(h.x(), h.y());
  }
  if (type == "disk") return Shape::disk(j.at("radius").get<double>());
  if (type == "polygon") {
    std::vector<Vec2d> vs;
    for (const auto& v : j.at("vertices")) vs.push_back(json_vec<2>(v));
    return Shape::polygon(std::move(vs));
  }
  throw ConfigError("unknown shape type '" + type + "'");
}

}  // namespace

std::string scene_to_json(const SceneSpec& s) {
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["background"] = vec_json(s.background);
  j["environment"] = {{"amplitude", s.environment_amplitude}, {"cell", s.environment_cell}};
  j["bounds"] = {{"min", vec_json(s.bounds.min)}, {"max", vec_json(s.bounds.max)}};
  const auto& k = s.camera.intrinsics;
  j["camera"] = {{"width", s.camera.width}, {"height", s.camera.height},
                 {"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
  j["fragment_length"] = s.fragment_length;
  json traj = json::array();
  for (const auto& p : s.trajectory) {
    Eigen::Matrix<double, 9, 1> r;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) r[3 * a + b] = p.rotation(a, b);
    traj.push_back({{"rotation", vec_json(r)}, {"translation", vec_json(p.translation)}});
  }
  j["trajectory"] = traj;
  json planes = json::array();
  for (const auto& p : s.planes) {
    planes.push_back({{"id", p.id},
                      {"normal", vec_json(p.params.normal)},
                      {"offset", p.params.offset},
                      {"center", vec_json(p.params.center)},
                      {"axis", vec_json(p.params.axis)},
                      {"shape", shape_json(p.shape)},
                      {"texture", texture_json(p.texture)}});
  }
  j["planes"] = planes;
  return j.dump(2) + "\n";
}

SceneSpec scene_from_json(const std::string& text) {
  SceneSpec s;
  try {
    const json j = json::parse(text);
    s.name = j.value("name", std::string{});
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("background")) s.background = json_vec<3>(j.at("background"));
    if (j.contains("environment")) {
      s.environment_amplitude = j.at("environment").at("amplitude").get<double>();
      s.environment_cell = j.at("environment").at("cell").get<double>();
    }
    s.bounds.min = json_vec<3>(j.at("bounds").at("min"));
    s.bounds.max = json_vec<3>(j.at("bounds").at("max"));
    const json& c = j.at("camera");
    s.camera.width = c.at("width").get<int>();
    s.camera.height = c.at("height").get<int>();
    s.camera.intrinsics = {c.at("fx").get<double>(), c.at("fy").get<double>(), c.at("cx").get<double>(),
                           c.at("cy").get<double>()};
    s.fragment_length = j.value("fragment_length", 9);
    for (const auto& t : j.at("trajectory")) {
      Pose<double> p;
      const auto r = json_vec<9>(t.at("rotation"));
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) p.rotation(a, b) = r[3 * a + b];
      p.translation = json_vec<3>(t.at("translation"));
      s.trajectory.push_back(p);
    }
    for (const auto& pj : j.at("planes")) {
      ScenePlane p;
      p.id = pj.at("id").get<int>();
      p.params.normal = json_vec<3>(pj.at("normal"));
      p.params.offset = pj.at("offset").get<double>();
      p.params.center = json_vec<3>(pj.at("center"));
      p.params.axis = json_vec<3>(pj.at("axis"));
      p.shape = json_shape(pj.at("shape"));
      p.texture = json_texture(pj.at("texture"));
      s.planes.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scene description: ") + e.what());
  }
  s.validate();
  return s;
}

void save_scene(const std::filesystem::path& path, const SceneSpec& scene) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << scene_to_json(scene);
  if (!out) throw IoError("write failed: " + path.string());
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Rasterizer

namespace {

struct RasterHit {
  double t = std::numeric_limits<double>::infinity();
  int id = -1;
  const ScenePlane* plane = nullptr;
};

RasterHit nearest_hit(const SceneSpec& scene, const Rayd& ray) {
  RasterHit best;
  for (const auto& p : scene.planes) {
    const Hit<double> h = try_intersect(ray, p.params);
    if (!h.valid()) continue;
    const Vec2d uv = p.local(h.point);
    if (!p.shape.contains(uv.x(), uv.y())) continue;
    if (h.t < best.t || (h.t == best.t && p.id < best.id)) {
      best.t = h.t;
      best.id = p.id;
      best.plane = &p;
    }
  }
  return best;
}

Vec3d shade(const SceneSpec& scene, const Rayd& ray, const RasterHit& h) {
  if (!h.plane) return scene.environment(ray.direction);
  const Vec2d uv = h.plane->local(ray.at(h.t));
  return h.plane->texture.evaluate(uv.x(), uv.y());
}

}  // namespace

SyntheticFrame rasterize_view(const SceneSpec& scene, const Camera& camera, int supersample) {
  if (supersample < 1) throw ConfigError("supersample factor must be at least 1");
  SyntheticFrame f;
  f.view = camera;
  f.view.validate();
  const Eigen::Index n = camera.pixel_count();
  f.view.pixels.resize(3, n);
  f.view.depth.resize(n);
  f.ids.assign(static_cast<std::size_t>(n), -1);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const Eigen::Index idx = camera.index(x, y);
      const Rayd ray = pixel_to_ray(camera, Vec2d(x, y));
      const RasterHit h = nearest_hit(scene, ray);
      f.view.depth[idx] = h.plane ? h.t * camera.pose.rotation.col(2).dot(ray.direction) : h.t;
      f.ids[static_cast<std::size_t>(idx)] = h.id;
      if (supersample == 1) {
        f.view.pixels.col(idx) = shade(scene, ray, h);
        continue;
      }
      Vec3d acc = Vec3d::Zero();
      for (int sy = 0; sy < supersample; ++sy) {
        for (int sx = 0; sx < supersample; ++sx) {
          const Vec2d px(x - 0.5 + (sx + 0.5) / supersample, y - 0.5 + (sy + 0.5) / supersample);
          const Rayd sub = pixel_to_ray(camera, px);
          acc += shade(scene, sub, nearest_hit(scene, sub));
        }
      }
      f.view.pixels.col(idx) = acc / double(supersample * supersample);
    }
  }
  return f;
}

SyntheticFrameSet rasterize(const SceneSpec& scene, int supersample) {
  SyntheticFrameSet set;
  for (const auto& cam : scene.cameras()) set.frames.push_back(rasterize_view(scene, cam, supersample));
  return set;
}

// ---------------------------------------------------------------------------
// Ground-truth voxelization

VoxelGrid VoxelGrid::covering(const SceneBounds& b, double voxel_size) {
  if (!(voxel_size > 0)) throw ConfigError("voxel size must be positive");
  VoxelGrid g;
  g.origin = b.min;
  g.voxel_size = voxel_size;
  const Vec3d ext = (b.max - b.min) / voxel_size;
  for (int a = 0; a < 3; ++a) g.dims[a] = ext[a] < 0 ? 0 : int(std::floor(ext[a] + 1e-6)) + 1;
  return g;
}

GtVoxelization voxelize_gt(const SceneSpec& scene, double voxel_size) {
  GtVoxelization out;
  out.grid = VoxelGrid::covering(scene.bounds, voxel_size);
  const VoxelGrid& g = out.grid;
  const double reach = voxel_size / 2 + 1e-9;

  struct Best {
    double dist;
    int id;
  };
  std::map<std::int64_t, Best> best;
  for (const auto& p : scene.planes) {
    // World bounding box of the region, grown by the capture distance.
    const double R = p.shape.max_radius();
    Vec3d lo = Vec3d::Constant(std::numeric_limits<double>::infinity());
    Vec3d hi = -lo;
    for (int su = -1; su <= 1; su += 2) {
      for (int sv = -1; sv <= 1; sv += 2) {
        const Vec3d c = p.world(su * R, sv * R);
        lo = lo.cwiseMin(c);
        hi = hi.cwiseMax(c);
      }
    }
    lo.array() -= reach;
    hi.array() += reach;
    Eigen::Vector3i klo, khi;
    for (int a = 0; a < 3; ++a) {
      klo[a] = std::max(0, int(std::ceil((lo[a] - g.origin[a]) / voxel_size - 1e-9)));
      khi[a] = std::min(g.dims[a] - 1, int(std::floor((hi[a] - g.origin[a]) / voxel_size + 1e-9)));
    }
    for (int z = klo.z(); z <= khi.z(); ++z) {
      for (int y = klo.y(); y <= khi.y(); ++y) {
        for (int x = klo.x(); x <= khi.x(); ++x) {
          const Eigen::Vector3i k(x, y, z);
          const Vec3d c = g.center(k);
          if (std::abs(p.params.signed_distance(c)) > reach) continue;
          const double d = p.distance(c);
          if (d > reach) continue;
          const std::int64_t li = g.linear(k);
          auto it = best.find(li);
          if (it == best.end()) {
            best.emplace(li, Best{d, p.id});
          } else if (d < it->second.dist || (d == it->second.dist && p.id < it->second.id)) {
            it->second = Best{d, p.id};
          }
        }
      }
    }
  }
  out.voxels.reserve(best.size());
  for (const auto& [li, b] : best) {
    GtVoxel v;
    const std::int64_t xy = std::int64_t(g.dims.x()) * g.dims.y();
    v.key = Eigen::Vector3i(int(li % g.dims.x()), int((li % xy) / g.dims.x()), int(li / xy));
    v.center = g.center(v.key);
    const ScenePlane& p = scene.plane(b.id);
    v.plane_id = b.id;
    v.normal = p.params.normal;
    v.offset = p.params.offset;
    v.plane_center = p.params.center;
    out.voxels.push_back(v);
  }
  return out;
}

}  // namespace planeforge
