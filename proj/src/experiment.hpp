#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "config.hpp"

namespace ipanerf {

// Trains the clean baseline, writes clean/checkpoint.ckpt and
// clean/baseline.json (train/test PSNR+SSIM) under the run directory.
std::filesystem::path cmd_train_clean(const ExperimentConfig& cfg);

// Runs the full attack loop. The clean checkpoint is required when the
// schedule enables the angle constraint, optional otherwise. Writes
// attack/{checkpoints,poisoned,trace.csv} and attack/constraints when used.
std::filesystem::path cmd_attack(const ExperimentConfig& cfg,
                                 const std::optional<std::filesystem::path>& clean_checkpoint);

// Evaluates a finished attack run directory into eval/report.{csv,txt}.
void cmd_evaluate(const std::filesystem::path& run_dir);

struct PoseSpec {
  // Either a global dataset view index or explicit spherical coordinates.
  std::optional<int> view_index;
  std::optional<SphericalPose> spherical;
};

void cmd_render(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                const PoseSpec& pose, const std::filesystem::path& out_png);

struct SweepSpec {
  enum class Axis { epsilon, angles };
  Axis axis = Axis::epsilon;
  std::vector<int> epsilons;
  std::vector<std::vector<double>> angle_sets;

  // "epsilon=8,16,32" or "angles=13+15,9+15,3"
  static SweepSpec parse(const std::string& text);
};

// One attack+evaluation per sweep point into <run_dir>/sweep_*/; failures are
// recorded in the summary and the sweep continues. Writes summary.{csv,txt}.
void cmd_ablate(const ExperimentConfig& cfg, const SweepSpec& sweep);

}  // namespace ipanerf
