#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "planeforge/errors.hpp"
#include "planeforge/pipeline.hpp"

namespace {

constexpr int kExitBadConfig = 2;
constexpr int kExitMissingInput = 3;
constexpr int kExitDiverged = 4;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> preset;
  std::optional<std::string> tracker;
  std::optional<std::string> planes;
  std::vector<std::string> set;
  int view{-1};
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--preset,--scene", f.preset, "scene preset or scene file");
  cmd->add_option("--tracker", f.tracker, "query or heuristic")->check(CLI::IsMember({"query", "heuristic"}));
  cmd->add_option("--planes", f.planes, "prediction file (default <out>/planes.json)");
  cmd->add_option("--set", f.set, "override any config key, key=value (repeatable)");
}

planeforge::PipelineConfig effective_config(const Flags& f) {
  planeforge::PipelineConfig cfg;
  if (!f.config.empty()) planeforge::apply_config_file(cfg, f.config);
  planeforge::apply_process_env(cfg);
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw planeforge::ConfigError("--set expects key=value, got '" + kv + "'");
    planeforge::apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.preset) cfg.scene = *f.preset;
  if (f.tracker) cfg.tracker = *f.tracker;
  if (f.planes) cfg.planes = *f.planes;
  cfg.validate();
  return cfg;
}

int run(const std::string& command, const Flags& f) {
  using namespace planeforge;
  const PipelineConfig cfg = effective_config(f);
  if (command == "generate") {
    cmd_generate(cfg);
    std::cout << "wrote scene '" << cfg.scene << "' to " << cfg.out << '\n';
  } else if (command == "reconstruct") {
    const Reconstruction rec = cmd_reconstruct(cfg, &std::cerr);
    std::cout << "instances " << rec.instances.size() << '\n';
  } else if (command == "refine") {
    const RefineResult r = cmd_refine(cfg);
    std::cout << "loss " << r.trace.front() << " -> " << r.best_loss << " (iteration " << r.best_iteration << ")\n";
  } else if (command == "eval") {
    cmd_eval(cfg, &std::cout);
  } else if (command == "render") {
    cmd_render(cfg, f.view);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plane reconstruction from posed images"};
  app.require_subcommand(1);
  Flags flags;
  std::string command;
  const std::pair<const char*, const char*> commands[] = {
      {"generate", "synthesize a scene, its frames and ground truth"},
      {"reconstruct", "fragments to tracked bounded planes"},
      {"refine", "photometric refinement of reconstructed planes"},
      {"eval", "geometry and segmentation metrics against the scene"},
      {"render", "render predicted planes into trajectory views"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, flags);
    if (std::string(name) == "render") cmd->add_option("--view", flags.view, "view index, all when negative");
    cmd->callback([&command, name] { command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadConfig;
  }
  try {
    return run(command, flags);
  } catch (const planeforge::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const planeforge::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitMissingInput;
  } catch (const planeforge::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitMissingInput;
  } catch (const planeforge::RefineDiverged& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
