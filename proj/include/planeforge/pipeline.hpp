#pragma once

// End-to-end driver: configuration, the in-memory reconstruction pipeline and
// the on-disk commands behind the command-line tool.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "planeforge/feature_volume.hpp"
#include "planeforge/metrics.hpp"
#include "planeforge/renderer.hpp"
#include "planeforge/scene.hpp"
#include "planeforge/tracker.hpp"

namespace planeforge {

inline constexpr const char* kEnvPrefix = "PLANEFORGE_";

struct PipelineConfig {
  std::string scene{"box6"};  ///< preset name or path to a scene JSON file
  int fragment_length{9};
  double voxel_size{0.04};
  double tau_std{0.2};
  int min_views{4};
  std::string provider{"oracle"};
  double sigma{0.1};
  double tau_mask{0.5};
  std::string tracker{"query"};  ///< "query" or "heuristic"
  HeuristicConfig heuristic;
  int queries{16};
  bool refine_stage{false};
  RefineConfig refine;
  int refine_views{8};
  int refine_width{64};
  double metric_tau{0.05};
  double sample_spacing{0.02};
  int supersample{2};
  std::string planes;  ///< prediction for eval/refine/render; empty means <out>/planes.json
  std::string out{"out"};
  std::uint64_t seed{7};

  /// Throws ConfigError on out-of-range values or unknown choices.
  void validate() const;
};

/// Keys accepted in config files, PLANEFORGE_<KEY> variables and --set.
std::vector<std::string> config_keys();

/// Applies a JSON object of overrides. Unknown keys and ill-typed values throw ConfigError.
void apply_config_json(PipelineConfig& cfg, const std::string& json_text);
void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path);
/// Applies one textual value (numbers and booleans parsed, strings taken verbatim).
void apply_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);
/// Applies PLANEFORGE_<KEY> for every key the lookup returns a value for.
void apply_env(PipelineConfig& cfg, const std::function<std::optional<std::string>(const std::string&)>& lookup);
void apply_process_env(PipelineConfig& cfg);
std::string config_to_json(const PipelineConfig& cfg);

/// Preset name or scene file, reseeded with cfg.seed for presets.
SceneSpec resolve_scene(const PipelineConfig& cfg);

struct Reconstruction {
  std::vector<TrackedInstance> instances;
  std::vector<BoundedPlane> planes;  ///< instances whose boundary could be fitted
  std::vector<int> occupied_per_fragment;
};

/// Fragments -> occupancy volume -> embeddings -> decoded masks -> tracker,
/// then one bounded plane per tracked instance (boundary from the voxel
/// footprint, color from the fused voxel colors).
Reconstruction reconstruct(const SceneSpec& scene, const std::vector<Camera>& frames, const PipelineConfig& cfg,
                           std::ostream* log = nullptr);

struct EvalReport {
  GeometryReport geometry;
  SegmentationReport segmentation;
  std::size_t pred_points{0};
  std::size_t gt_points{0};
};

/// Geometry metrics between the surfaces plus segmentation of the GT points
/// after label transfer from the prediction.
EvalReport evaluate_surfaces(const SampledSurface& pred, const SampledSurface& gt, double tau);

/// Views spread evenly over the trajectory, box-filtered down to `width`.
std::vector<Camera> refine_views(const std::vector<Camera>& frames, int count, int width);
/// Integer-factor box filter of a view and its intrinsics.
Camera downsample(const Camera& view, int factor);

/// Bounded plane for a ground-truth scene plane: boundary fitted to the shape
/// extent plus `margin`, color fitted to the texture with noise flattened.
BoundedPlane ground_truth_plane(const ScenePlane& plane, double margin = 0.3, std::uint64_t seed = 1);

struct HarnessConfig {
  int plane{0};
  int views{8};
  int size{64};
  double offset{0.1};
  double tilt_deg{5.0};
  double margin{0.3};
  std::uint64_t seed{1};
};

/// Perturbation-recovery setup: ground-truth bounded planes, targets rendered
/// from them, and a copy with one plane tilted about its axis and shifted.
struct RefineHarness {
  std::vector<BoundedPlane> truth;
  std::vector<BoundedPlane> initial;
  std::vector<Camera> views;
  int plane{0};
};

RefineHarness make_refine_harness(const SceneSpec& scene, const HarnessConfig& cfg = {});

struct RecoveryError {
  double offset{0};     ///< |d - d_true|
  double angle_deg{0};  ///< normal angle to the truth
};

RecoveryError recovery_error(const Plane& estimate, const Plane& truth);

// Commands. Each writes manifest_<command>.json with the effective config.

/// Scene file, trajectory, frames (PPM), depth (PFM), ids (PGM) and GT voxels.
void cmd_generate(const PipelineConfig& cfg);
Reconstruction cmd_reconstruct(const PipelineConfig& cfg, std::ostream* log = nullptr);
/// Refines against the frames of the generated scene; see refine_to_disk.
RefineResult cmd_refine(const PipelineConfig& cfg);
/// Before/after renders, trace.csv with budget + 1 rows, planes_refined.*.
/// On divergence the last finite state goes to planes_diverged.* before
/// RefineDiverged propagates.
RefineResult refine_to_disk(const std::vector<BoundedPlane>& planes, const std::vector<Camera>& views,
                            const RefineConfig& rc, const std::filesystem::path& out);
EvalReport cmd_eval(const PipelineConfig& cfg, std::ostream* table = nullptr);
/// Renders the prediction into view `view` (all views when negative).
void cmd_render(const PipelineConfig& cfg, int view);

std::vector<Camera> load_frames(const std::filesystem::path& dir, const SceneSpec& scene);

}  // namespace planeforge
