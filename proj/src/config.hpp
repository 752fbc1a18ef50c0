#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "attack.hpp"
#include "dataset.hpp"
#include "nerf_model.hpp"
#include "renderer.hpp"
#include "trainer.hpp"

namespace ipanerf {

struct SceneConfig {
  enum class Kind { toy, blender } kind = Kind::toy;
  std::filesystem::path blender_root;
  int downsample = 1;
  ToySceneOptions toy;
  double near = 2.0;
  double far = 6.0;
};

struct TargetConfig {
  std::string image = "builtin:textured-sphere";  // builtin:<kind> or a PNG path
  int backdoor_view_index = 0;
};

// One JSON document drives every command; docs/config_schema.json publishes
// the shape, load_config enforces it (unknown keys are rejected so --set
// typos fail loudly).
struct ExperimentConfig {
  std::string name = "experiment";
  uint64_t seed = 0;
  std::filesystem::path run_dir = "runs/out";
  SceneConfig scene;
  ModelArchitecture model;
  RenderConfig render;
  OptimizerConfig optimizer;
  long clean_iterations = 6000;
  TargetConfig target;
  AttackSchedule schedule;

  void validate(bool check_paths) const;
};

ExperimentConfig config_from_json(const nlohmann::json& doc, bool check_paths);
ExperimentConfig load_config(const std::filesystem::path& path, bool check_paths = true);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// "schedule.epsilon=16" style dotted-key override; the value is parsed as
// JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Scene and target realized from the config.
ViewDataset build_scene(const ExperimentConfig& cfg);
IllusoryTarget resolve_target(const ExperimentConfig& cfg, const ViewDataset& ds);

// Run manifest: config snapshot, software version, platform fingerprint and
// schedule hash written atomically before the first stage; stage timings are
// appended (each append rewrites the file atomically, keeping prior entries).
void manifest_init(const std::filesystem::path& run_dir, const ExperimentConfig& cfg);
void manifest_add_stage(const std::filesystem::path& run_dir, const std::string& stage, double seconds);
nlohmann::json manifest_read(const std::filesystem::path& run_dir);

std::string platform_fingerprint();

// Errors when IPANERF_DEVICE names anything but the cpu.
void ensure_device_supported();

}  // namespace ipanerf
