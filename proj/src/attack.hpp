#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "constraints.hpp"
#include "dataset.hpp"
#include "metrics.hpp"
#include "nerf_model.hpp"
#include "renderer.hpp"
#include "trainer.hpp"

namespace ipanerf {

struct AttackSchedule {
  long total_iterations = 6000;    // O: victim training iterations overall
  long iterations_per_epoch = 200; // T: victim iterations per attack epoch
  int attack_iterations = 10;      // A: inner steps on the model copy per epoch
  int render_iterations = 25;      // K: poison-render batches per epoch
  int epsilon = 32;                // distortion budget, 8-bit pixel units
  bool angle_constraint = false;   // eta
  std::vector<double> constraint_angles;  // degrees
  int rays_per_batch = 0;          // 0: derived so K batches cover the train pixels once
  uint64_t seed = 0;

  long epochs() const { return total_iterations / iterations_per_epoch; }
  int effective_rays_per_batch(size_t total_train_pixels) const;
  void validate() const;
};

// Canonical 16-hex-digit digest of every schedule field.
std::string schedule_hash(const AttackSchedule& sched);

// Paired clean/poisoned training images. The poisoned set persists across
// epochs; unclipped values may momentarily leave the epsilon ball until
// clip_poison restores the invariant.
struct PoisonState {
  std::vector<int> train_views;  // dataset view ids, train-split order
  std::vector<Image> clean;
  std::vector<Image> poisoned;
  long epoch = 0;
};

PoisonState make_poison_state(const ViewDataset& ds);

// poisoned := clamp(poisoned, clean - eps/255, clean + eps/255), then [0,1].
// Pure min/max, hence bitwise idempotent.
void clip_poison(PoisonState& state, int epsilon);

double max_poison_deviation(const PoisonState& state);

// 8-bit export plus manifest; re-verifies |poisoned_u8 - clean_u8| <= epsilon
// after quantization.
void export_poison(const PoisonState& state, int epsilon, const std::string& sched_hash,
                   const std::filesystem::path& dir);

struct InnerStepResult {
  double loss = 0.0;             // batch-mean squared error driving the update
  double backdoor_term = 0.0;    // mean over the backdoor rays
  double constraint_term = 0.0;  // mean over the constraint rays (eta=1 only)
};

// One update of the copy F' toward the illusory target; with the angle
// constraint the batch is half backdoor rays, half constraint-view rays
// matched against the clean-model ground truth approximation.
InnerStepResult attack_inner_step(NerfModel& fprime, AdamState& state, const OptimizerConfig& opt,
                                  const ViewDataset& ds, const IllusoryTarget& target,
                                  const ConstraintViewSet* constraints, int rays_per_batch,
                                  const RenderConfig& rc, RngStream& rng);

// K batches of rays over the training views, sampled without replacement from
// a per-epoch permutation; each rendered pixel overwrites the poisoned image.
// Pixels not drawn this epoch keep their previous poisoned value.
void render_poison(const NerfModel& fprime, const ViewDataset& ds, PoisonState& state,
                   int render_iterations, int rays_per_batch, const RenderConfig& rc, RngStream& rng);

// T standard training iterations on the poisoned images; the backdoor view
// never contributes a ray.
void victim_train_epoch(NerfModel& victim, AdamState& state, const OptimizerConfig& opt,
                        const ViewDataset& ds, const PoisonState& poison, int backdoor_view,
                        long iterations, int rays_per_batch, const RenderConfig& rc, RngStream& rng,
                        double* mean_loss = nullptr);

struct EpochTrace {
  long epoch = 0;
  double inner_loss = 0.0;
  double victim_loss = 0.0;
  double backdoor_psnr = 0.0;
  double train_psnr = 0.0;
};

struct IpaOptions {
  ModelArchitecture arch;
  OptimizerConfig optimizer;
  RenderConfig render;
  const NerfModel* clean_model = nullptr;  // required when the schedule enables the constraint
  std::function<void(const EpochTrace&, const PoisonState&)> on_epoch;
};

struct IpaResult {
  NerfModel victim;       // F_IPA
  NerfModel fprime_last;  // F' as of the final epoch
  AdamState victim_optimizer;
  PoisonState poison;
  ConstraintViewSet constraints;  // filled when eta=1
  std::vector<EpochTrace> trace;
  long victim_updates = 0;
  long inner_updates = 0;
  // Fraction of epochs whose constraint term did not increase across the A
  // inner steps (soft property; a warning is logged below 0.8).
  double constraint_nonincrease_fraction = 1.0;
};

// Algorithm: per epoch, copy F' <- F_IPA, A inner steps, K poison-render
// batches, clip to the budget, then T victim iterations on the poisoned set.
IpaResult run_ipa(const ViewDataset& ds, const IllusoryTarget& target, const AttackSchedule& sched,
                  const IpaOptions& opt);

}  // namespace ipanerf
