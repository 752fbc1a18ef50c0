#pragma once

#include <filesystem>

#include "nerf_model.hpp"
#include "trainer.hpp"

namespace ipanerf {

// Binary container, little-endian, magic "IPANERF-CKPT-1\n". Holds the flat
// 64-bit parameter vector, the architecture record, the optimizer moments and
// the training position. Written atomically.
struct Checkpoint {
  ModelArchitecture arch;
  Eigen::VectorXd parameters;
  AdamState optimizer;
  long iteration = 0;
  uint64_t seed = 0;

  static Checkpoint from_model(const NerfModel& model, const AdamState& opt, long iteration, uint64_t seed);
  NerfModel to_model() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ipanerf
