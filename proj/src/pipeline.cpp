#include "planeforge/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "planeforge/camera_io.hpp"
#include "planeforge/errors.hpp"
#include "planeforge/image_io.hpp"
#include "planeforge/instance_matcher.hpp"
#include "planeforge/mlp.hpp"
#include "planeforge/plane_io.hpp"

namespace planeforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

struct Field {
  std::function<json(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const json&)> set;
  bool is_string{false};
};

template <typename T>
Field field(T PipelineConfig::*member) {
  return {[member](const PipelineConfig& c) { return json(c.*member); },
          [member](PipelineConfig& c, const json& v) { c.*member = v.get<T>(); }, std::is_same_v<T, std::string>};
}

template <typename Outer, typename T>
Field nested(Outer PipelineConfig::*outer, T Outer::*member) {
  return {[outer, member](const PipelineConfig& c) { return json((c.*outer).*member); },
          [outer, member](PipelineConfig& c, const json& v) { (c.*outer).*member = v.get<T>(); }, false};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"scene", field(&PipelineConfig::scene)},
      {"fragment_length", field(&PipelineConfig::fragment_length)},
      {"voxel_size", field(&PipelineConfig::voxel_size)},
      {"tau_std", field(&PipelineConfig::tau_std)},
      {"min_views", field(&PipelineConfig::min_views)},
      {"provider", field(&PipelineConfig::provider)},
      {"sigma", field(&PipelineConfig::sigma)},
      {"tau_mask", field(&PipelineConfig::tau_mask)},
      {"tracker", field(&PipelineConfig::tracker)},
      {"merge_angle_deg", nested(&PipelineConfig::heuristic, &HeuristicConfig::angle_deg)},
      {"d_merge", nested(&PipelineConfig::heuristic, &HeuristicConfig::d_merge)},
      {"iou_merge", nested(&PipelineConfig::heuristic, &HeuristicConfig::iou_merge)},
      {"queries", field(&PipelineConfig::queries)},
      {"refine_stage", field(&PipelineConfig::refine_stage)},
      {"refine_iterations", nested(&PipelineConfig::refine, &RefineConfig::iterations)},
      {"beta", nested(&PipelineConfig::refine, &RefineConfig::beta)},
      {"lr_plane", nested(&PipelineConfig::refine, &RefineConfig::lr_plane)},
      {"lr_boundary", nested(&PipelineConfig::refine, &RefineConfig::lr_boundary)},
      {"lr_color", nested(&PipelineConfig::refine, &RefineConfig::lr_color)},
      {"refine_views", field(&PipelineConfig::refine_views)},
      {"refine_width", field(&PipelineConfig::refine_width)},
      {"metric_tau", field(&PipelineConfig::metric_tau)},
      {"sample_spacing", field(&PipelineConfig::sample_spacing)},
      {"supersample", field(&PipelineConfig::supersample)},
      {"planes", field(&PipelineConfig::planes)},
      {"out", field(&PipelineConfig::out)},
      {"seed", field(&PipelineConfig::seed)},
  };
  return table;
}

void set_field(PipelineConfig& cfg, const std::string& key, const json& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  try {
    it->second.set(cfg, value);
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + value.dump());
  }
}

std::string env_name(const std::string& key) {
  std::string s = kEnvPrefix;
  for (char c : key) s += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

void PipelineConfig::validate() const {
  if (scene.empty()) throw ConfigError("scene must be a preset name or a file");
  if (fragment_length < 1) throw ConfigError("fragment_length must be at least 1");
  if (!(voxel_size > 0)) throw ConfigError("voxel_size must be positive");
  if (!(tau_std > 0)) throw ConfigError("tau_std must be positive");
  if (min_views < 1) throw ConfigError("min_views must be at least 1");
  if (provider != "oracle") throw ConfigError("unknown embedding provider '" + provider + "'");
  if (!(sigma >= 0)) throw ConfigError("sigma must be non-negative");
  if (!(tau_mask > 0 && tau_mask < 1)) throw ConfigError("tau_mask must be in (0, 1)");
  if (tracker != "query" && tracker != "heuristic") throw ConfigError("tracker must be 'query' or 'heuristic'");
  if (!(heuristic.angle_deg > 0 && heuristic.d_merge > 0 && heuristic.iou_merge >= 0))
    throw ConfigError("heuristic thresholds must be positive");
  if (queries < 1) throw ConfigError("queries must be at least 1");
  refine.validate();
  if (refine_views < 1) throw ConfigError("refine_views must be at least 1");
  if (refine_width < 1) throw ConfigError("refine_width must be at least 1");
  if (!(metric_tau > 0)) throw ConfigError("metric_tau must be positive");
  if (!(sample_spacing > 0)) throw ConfigError("sample_spacing must be positive");
  if (supersample < 1) throw ConfigError("supersample must be at least 1");
  if (out.empty()) throw ConfigError("out must name a directory");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : fields()) keys.push_back(k);
  return keys;
}

void apply_config_json(PipelineConfig& cfg, const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items()) set_field(cfg, k, v);
}

void apply_config_file(PipelineConfig& cfg, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_json(cfg, ss.str());
}

void apply_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  if (it->second.is_string) {
    set_field(cfg, key, json(value));
    return;
  }
  json v;
  try {
    v = json::parse(value);
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' expects a number or boolean, got '" + value + "'");
  }
  set_field(cfg, key, v);
}

void apply_env(PipelineConfig& cfg, const std::function<std::optional<std::string>(const std::string&)>& lookup) {
  for (const auto& key : config_keys())
    if (auto v = lookup(env_name(key))) apply_config_value(cfg, key, *v);
}

void apply_process_env(PipelineConfig& cfg) {
  apply_env(cfg, [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  });
}

std::string config_to_json(const PipelineConfig& cfg) {
  json j = json::object();
  for (const auto& [k, f] : fields()) j[k] = f.get(cfg);
  return j.dump(2);
}

SceneSpec resolve_scene(const PipelineConfig& cfg) {
  for (const auto& p : scene_presets())
    if (p == cfg.scene) return build_scene(cfg.scene, cfg.seed);
  if (!fs::exists(cfg.scene)) throw ConfigError("'" + cfg.scene + "' is neither a preset nor a scene file");
  return load_scene(cfg.scene);
}

// ---------------------------------------------------------------------------
// Reconstruction

namespace {

PolarSample polar_of(const Plane& p, const Vec3d& x) {
  const Vec3d d = x - p.center;
  const double u = d.dot(p.axis), v = d.dot(p.second_axis());
  const double r = std::hypot(u, v);
  return {r, r == 0 ? 0.0 : wrap_angle(std::atan2(v, u))};
}

ColorFitConfig color_fit_config(std::uint64_t seed) {
  ColorFitConfig c;
  c.iterations = 300;
  c.batch = 512;
  c.seed = seed;
  return c;
}

}  // namespace

Reconstruction reconstruct(const SceneSpec& scene, const std::vector<Camera>& frames, const PipelineConfig& cfg,
                           std::ostream* log) {
  cfg.validate();
  const int fragments = static_cast<int>(frames.size()) / cfg.fragment_length;
  if (fragments < 1) throw ConfigError("fewer frames than one fragment");

  VolumeConfig vcfg;
  vcfg.voxel_size = cfg.voxel_size;
  vcfg.tau_std = cfg.tau_std;
  vcfg.min_views = cfg.min_views;
  OracleConfig ocfg;
  ocfg.sigma = cfg.sigma;
  ocfg.seed = cfg.seed;
  OracleEmbeddingProvider provider(scene, ocfg);
  const TrackerConfig tcfg;
  HeuristicConfig hcfg = cfg.heuristic;
  hcfg.cell = cfg.voxel_size;

  Reconstruction rec;
  TrackState state;
  VoxelGrid grid;
  // Fused voxel colors, last fragment wins.
  std::unordered_map<std::int64_t, Vec3d> colors;
  for (int f = 0; f < fragments; ++f) {
    std::vector<int> window;
    for (int i = 0; i < cfg.fragment_length; ++i) window.push_back(f * cfg.fragment_length + i);
    const FragmentVolume fv = build_fragment_volume(frames, window, scene.bounds, vcfg, cfg.fragment_length);
    grid = fv.volume.grid;
    const auto occupied = fv.volume.occupied_keys();
    for (std::size_t i = 0; i < fv.volume.size(); ++i)
      if (fv.volume.occupied[i]) colors[fv.volume.linear[i]] = fv.volume.mean.col(Eigen::Index(i)).head<3>();

    FragmentResult fr;
    fr.index = f;
    fr.voxels = provider.embed(occupied, grid, f);
    const auto tracking = cfg.tracker == "query" ? state.tracking_queries(f, tcfg)
                                                 : std::vector<std::pair<int, Eigen::VectorXd>>{};
    const QuerySet q = provider.queries(fr.voxels, tracking, std::max<int>(cfg.queries, int(tracking.size())));
    fr.instances = decode_masks(fr.voxels, q, cfg.tau_mask);
    if (cfg.tracker == "query")
      step(state, fr, tcfg);
    else
      heuristic_step(state, fr, hcfg, tcfg);
    rec.occupied_per_fragment.push_back(static_cast<int>(occupied.size()));
    if (log)
      *log << "fragment " << f << ": " << occupied.size() << " occupied voxels, " << fr.instances.size()
           << " decoded instances, " << state.instances().size() << " tracked\n";
  }

  rec.instances = state.instances();
  for (const auto& t : rec.instances) {
    std::vector<PolarSample> polar;
    std::vector<ColorSample> color;
    for (const auto& v : t.voxels) {
      const PolarSample s = polar_of(t.params, v.center);
      polar.push_back(s);
      const auto it = colors.find(grid.linear(v.key));
      if (it != colors.end()) color.push_back({s.theta, s.r, it->second});
    }
    BoundedPlane bp;
    bp.id = t.id;
    bp.params = t.params;
    try {
      BoundaryFitConfig bcfg;
      bcfg.seed = cfg.seed + std::uint64_t(t.id);
      bp.boundary = init_boundary_from_voxels(polar, bcfg).function;
    } catch (const InitError& e) {
      if (log) *log << "instance " << t.id << " skipped: " << e.what() << '\n';
      continue;
    }
    bp.color = color.empty() ? Mlp::color(cfg.seed) : fit_color(color, color_fit_config(cfg.seed + std::uint64_t(t.id))).function;
    rec.planes.push_back(std::move(bp));
  }
  return rec;
}

EvalReport evaluate_surfaces(const SampledSurface& pred, const SampledSurface& gt, double tau) {
  EvalReport r;
  r.geometry = geometry_metrics(pred, gt, tau);
  const SampledSurface labelled = transfer_labels(pred, gt);
  r.segmentation = segmentation_metrics(labelled.labels, gt.labels);
  r.pred_points = pred.size();
  r.gt_points = gt.size();
  return r;
}

// ---------------------------------------------------------------------------
// Refinement helpers

Camera downsample(const Camera& view, int factor) {
  if (factor < 1 || view.width % factor != 0 || view.height % factor != 0)
    throw ConfigError("downsampling factor must divide the raster size");
  Camera out = view;
  out.width = view.width / factor;
  out.height = view.height / factor;
  const double s = factor;
  out.intrinsics = {view.intrinsics.fx / s, view.intrinsics.fy / s, (view.intrinsics.cx + 0.5) / s - 0.5,
                    (view.intrinsics.cy + 0.5) / s - 0.5};
  out.pixels.setZero(3, out.pixel_count());
  out.depth = Eigen::VectorXd::Constant(out.pixel_count(), std::numeric_limits<double>::infinity());
  if (view.pixels.cols() == view.pixel_count()) {
    for (int y = 0; y < view.height; ++y)
      for (int x = 0; x < view.width; ++x)
        out.pixels.col(out.index(x / factor, y / factor)) += view.pixels.col(view.index(x, y));
    out.pixels /= s * s;
  }
  return out;
}

std::vector<Camera> refine_views(const std::vector<Camera>& frames, int count, int width) {
  if (frames.empty()) throw InputError("no frames to refine against");
  count = std::min<int>(count, static_cast<int>(frames.size()));
  std::vector<Camera> out;
  for (int i = 0; i < count; ++i) {
    const std::size_t k =
        count == 1 ? 0 : static_cast<std::size_t>(std::lround(double(i) * double(frames.size() - 1) / (count - 1)));
    const Camera& f = frames[k];
    if (f.width % width != 0) throw ConfigError("refine_width must divide the frame width");
    out.push_back(downsample(f, f.width / width));
  }
  return out;
}

BoundedPlane ground_truth_plane(const ScenePlane& plane, double margin, std::uint64_t seed) {
  const Texture flat = plane.texture.flattened();
  std::vector<PolarSample> polar;
  std::vector<ColorSample> color;
  for (const Vec2d& uv : polar_grid_samples(plane.shape.max_radius(), 0.02,
                                            [&](double u, double v) { return plane.shape.contains(u, v); })) {
    const double r = uv.norm();
    const double th = r == 0 ? 0.0 : wrap_angle(std::atan2(uv.y(), uv.x()));
    polar.push_back({r + margin, th});
    color.push_back({th, r, flat.evaluate(uv.x(), uv.y())});
  }
  BoundaryFitConfig bcfg;
  bcfg.seed = seed;
  BoundedPlane bp;
  bp.id = plane.id;
  bp.params = plane.params;
  bp.boundary = init_boundary_from_voxels(polar, bcfg).function;
  bp.color = fit_color(color, color_fit_config(seed + 1)).function;
  return bp;
}

RefineHarness make_refine_harness(const SceneSpec& scene, const HarnessConfig& cfg) {
  if (cfg.plane < 0 || cfg.plane >= static_cast<int>(scene.planes.size()))
    throw ConfigError("harness plane index out of range");
  RefineHarness h;
  h.plane = cfg.plane;
  for (const auto& p : scene.planes) h.truth.push_back(ground_truth_plane(p, cfg.margin, cfg.seed));

  const RefineConfig defaults;
  const auto cams = scene.cameras();
  const int n = std::min<int>(cfg.views, static_cast<int>(cams.size()));
  for (int i = 0; i < n; ++i) {
    const std::size_t k =
        n == 1 ? 0 : static_cast<std::size_t>(std::lround(double(i) * double(cams.size() - 1) / (n - 1)));
    Camera c = cams[k];
    const double s = double(cfg.size) / c.width;
    c.width = cfg.size;
    c.height = static_cast<int>(std::lround(c.height * s));
    c.intrinsics = {c.intrinsics.fx * s, c.intrinsics.fy * s, (c.width - 1) / 2.0, (c.height - 1) / 2.0};
    c.pixels = render(h.truth, c, defaults.beta, defaults.background).rgb;
    c.depth = Eigen::VectorXd::Constant(c.pixel_count(), std::numeric_limits<double>::infinity());
    h.views.push_back(std::move(c));
  }

  h.initial = h.truth;
  Plane& p = h.initial[static_cast<std::size_t>(cfg.plane)].params;
  const double d_target = p.offset + cfg.offset;
  const Vec3d n_tilt = Eigen::AngleAxisd(cfg.tilt_deg * std::numbers::pi / 180.0, p.axis) * p.normal;
  p = Plane::from_center(n_tilt, p.center, p.axis);
  p = Plane::from_center(n_tilt, p.center - (d_target - p.offset) * n_tilt, p.axis);
  return h;
}

RecoveryError recovery_error(const Plane& estimate, const Plane& truth) {
  RecoveryError e;
  e.offset = std::abs(estimate.offset - truth.offset);
  e.angle_deg = std::acos(std::clamp(estimate.normal.dot(truth.normal), -1.0, 1.0)) * 180.0 / std::numbers::pi;
  return e;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

std::string frame_name(const char* stem, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03d.%s", stem, i, ext);
  return buf;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw IoError("cannot create output directory " + p.string());
}

std::ofstream open_text(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << std::setprecision(17);
  return out;
}

void write_manifest(const PipelineConfig& cfg, const std::string& command) {
  json j;
  j["command"] = command;
  j["config"] = json::parse(config_to_json(cfg));
  auto out = open_text(fs::path(cfg.out) / ("manifest_" + command + ".json"));
  out << j.dump(2) << '\n';
}

fs::path require(const fs::path& p) {
  if (!fs::exists(p)) throw InputError("missing " + p.string());
  return p;
}

SceneSpec load_generated_scene(const PipelineConfig& cfg) {
  return load_scene(require(fs::path(cfg.out) / "scene.json"));
}

fs::path planes_path(const PipelineConfig& cfg) {
  return cfg.planes.empty() ? fs::path(cfg.out) / "planes.json" : fs::path(cfg.planes);
}

void write_trace(const fs::path& p, const std::vector<double>& trace) {
  auto out = open_text(p);
  out << "iteration,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << trace[i] << '\n';
}

void write_renders(const fs::path& dir, const char* stem, const std::vector<BoundedPlane>& planes,
                   const std::vector<Camera>& views, const RefineConfig& rc) {
  for (std::size_t i = 0; i < views.size(); ++i) {
    const RenderedImage img = render(planes, views[i], rc.beta, rc.background);
    write_ppm(dir / frame_name(stem, static_cast<int>(i), "ppm"), img.width, img.height, img.rgb);
  }
}

void export_planes(const fs::path& dir, const std::string& stem, const std::vector<BoundedPlane>& planes) {
  save_planes(dir / (stem + ".json"), planes);
  write_obj(dir / (stem + ".obj"), planes);
  write_plane_params(dir / (stem + "_params.txt"), planes);
}

}  // namespace

std::vector<Camera> load_frames(const fs::path& dir, const SceneSpec& scene) {
  auto cams = scene.cameras();
  for (std::size_t i = 0; i < cams.size(); ++i) {
    int w = 0, h = 0;
    cams[i].pixels = read_ppm(require(dir / frame_name("frame", static_cast<int>(i), "ppm")), w, h);
    if (w != cams[i].width || h != cams[i].height) throw InputError("frame size does not match the scene camera");
  }
  return cams;
}

void cmd_generate(const PipelineConfig& cfg) {
  cfg.validate();
  SceneSpec scene = resolve_scene(cfg);
  scene.fragment_length = cfg.fragment_length;
  scene.validate();
  const fs::path out(cfg.out), frames_dir = out / "frames";
  ensure_dir(frames_dir);
  save_scene(out / "scene.json", scene);
  write_trajectory(out / "trajectory.txt", scene.cameras());
  const SyntheticFrameSet set = rasterize(scene, cfg.supersample);
  for (std::size_t i = 0; i < set.frames.size(); ++i) {
    const SyntheticFrame& f = set.frames[i];
    const int w = f.view.width, h = f.view.height, k = static_cast<int>(i);
    write_ppm(frames_dir / frame_name("frame", k, "ppm"), w, h, f.view.pixels);
    write_pfm(frames_dir / frame_name("depth", k, "pfm"), w, h, f.view.depth);
    std::vector<std::uint8_t> ids(f.ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j)
      ids[j] = f.ids[j] < 0 ? kNoIdPgm : static_cast<std::uint8_t>(f.ids[j]);
    write_pgm(frames_dir / frame_name("ids", k, "pgm"), w, h, ids);
  }
  const GtVoxelization gt = voxelize_gt(scene, cfg.voxel_size);
  auto vox = open_text(out / "gt_voxels.txt");
  for (const auto& v : gt.voxels)
    vox << v.key.x() << ' ' << v.key.y() << ' ' << v.key.z() << ' ' << v.plane_id << ' ' << v.normal.x() << ' '
        << v.normal.y() << ' ' << v.normal.z() << ' ' << v.offset << '\n';
  write_manifest(cfg, "generate");
}

Reconstruction cmd_reconstruct(const PipelineConfig& cfg, std::ostream* log) {
  cfg.validate();
  const SceneSpec scene = load_generated_scene(cfg);
  const fs::path out(cfg.out);
  const std::vector<Camera> frames = load_frames(out / "frames", scene);
  Reconstruction rec = reconstruct(scene, frames, cfg, log);
  if (cfg.refine_stage && !rec.planes.empty()) {
    const auto views = refine_views(frames, cfg.refine_views, cfg.refine_width);
    rec.planes = refine(rec.planes, views, cfg.refine).planes;
  }
  export_planes(out, "planes", rec.planes);
  auto inst = open_text(out / "instances.txt");
  for (const auto& t : rec.instances) {
    const Plane& p = t.params;
    inst << t.id << ' ' << t.voxels.size() << ' ' << t.first_seen << ' ' << t.last_seen << ' ' << p.normal.x() << ' '
         << p.normal.y() << ' ' << p.normal.z() << ' ' << p.offset << '\n';
  }
  write_manifest(cfg, "reconstruct");
  return rec;
}

RefineResult refine_to_disk(const std::vector<BoundedPlane>& planes, const std::vector<Camera>& views,
                           const RefineConfig& rc, const fs::path& out) {
  const fs::path renders = out / "renders";
  ensure_dir(renders);
  write_renders(renders, "before", planes, views, rc);
  RefineResult res;
  try {
    res = refine(planes, views, rc);
  } catch (const RefineDivergedError& e) {
    export_planes(out, "planes_diverged", e.last_state);
    write_trace(out / "trace.csv", e.trace);
    throw;
  }
  write_trace(out / "trace.csv", res.trace);
  write_renders(renders, "after", res.planes, views, rc);
  export_planes(out, "planes_refined", res.planes);
  return res;
}

RefineResult cmd_refine(const PipelineConfig& cfg) {
  cfg.validate();
  const SceneSpec scene = load_generated_scene(cfg);
  const fs::path out(cfg.out);
  const std::vector<BoundedPlane> planes = load_planes(require(planes_path(cfg)));
  if (planes.empty()) throw InputError("no planes to refine in " + planes_path(cfg).string());
  const auto views = refine_views(load_frames(out / "frames", scene), cfg.refine_views, cfg.refine_width);
  write_manifest(cfg, "refine");
  return refine_to_disk(planes, views, cfg.refine, out);
}

EvalReport cmd_eval(const PipelineConfig& cfg, std::ostream* table) {
  cfg.validate();
  const SceneSpec scene = load_generated_scene(cfg);
  const fs::path pred_path = require(planes_path(cfg));
  // A scene document as the prediction evaluates the analytic shapes themselves.
  std::ifstream probe(pred_path);
  json head;
  try {
    head = json::parse(probe);
  } catch (const json::exception& e) {
    throw InputError("prediction is not valid JSON: " + pred_path.string());
  }
  const SampledSurface pred = head.contains("bounds") ? sample_scene(load_scene(pred_path), cfg.sample_spacing)
                                                      : sample_planes(load_planes(pred_path), cfg.sample_spacing);
  const SampledSurface gt = sample_scene(scene, cfg.sample_spacing);
  const EvalReport r = evaluate_surfaces(pred, gt, cfg.metric_tau);
  auto csv = open_text(fs::path(cfg.out) / "eval.csv");
  write_reports_csv(csv, r.geometry, r.segmentation);
  if (table) print_reports(*table, r.geometry, r.segmentation);
  write_manifest(cfg, "eval");
  return r;
}

void cmd_render(const PipelineConfig& cfg, int view) {
  cfg.validate();
  const SceneSpec scene = load_generated_scene(cfg);
  const std::vector<BoundedPlane> planes = load_planes(require(planes_path(cfg)));
  const auto cams = scene.cameras();
  if (view >= static_cast<int>(cams.size())) throw ConfigError("view index out of range");
  const fs::path dir = fs::path(cfg.out) / "renders";
  ensure_dir(dir);
  for (int i = 0; i < static_cast<int>(cams.size()); ++i) {
    if (view >= 0 && i != view) continue;
    const RenderedImage img = render(planes, cams[static_cast<std::size_t>(i)], cfg.refine.beta, cfg.refine.background);
    write_ppm(dir / frame_name("render", i, "ppm"), img.width, img.height, img.rgb);
  }
  write_manifest(cfg, "render");
}

}  // namespace planeforge
