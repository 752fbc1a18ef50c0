#pragma once

#include <functional>
#include <vector>

#include "dataset.hpp"
#include "nerf_model.hpp"
#include "renderer.hpp"
#include "rng.hpp"

namespace ipanerf {

struct OptimizerConfig {
  double learning_rate = 5e-4;
  double lr_decay_rate = 0.1;
  long lr_decay_steps = 250000;  // iterations for one full decade of decay
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  double lr_at(long step) const {
    return learning_rate * std::pow(lr_decay_rate, double(step) / double(lr_decay_steps));
  }
};

struct AdamState {
  Eigen::VectorXd m, v;
  long step = 0;

  void reset(Eigen::Index n) {
    m.setZero(n);
    v.setZero(n);
    step = 0;
  }
};

// One Adam update; lr comes from the decayed schedule at the new step index.
void adam_apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state,
                const OptimizerConfig& opt);

struct RayBatch {
  RayBundle rays;
  Eigen::Matrix<double, Eigen::Dynamic, 3> truth;
};

struct PixelRef {
  int view = 0;
  int pixel = 0;  // row-major index
};

// Uniform with replacement over the pixels of the given views.
std::vector<PixelRef> sample_pixels(const std::vector<int>& views, size_t pixels_per_view, size_t n,
                                    RngStream& rng);

// Builds rays from the dataset geometry and truth colors from `images`, which
// is indexed like ds.views (poisoned training swaps the image array without
// touching the geometry).
RayBatch make_batch(const ViewDataset& ds, const std::vector<const Image*>& images,
                    const std::vector<PixelRef>& refs);

// One first-order update of rgb_loss. Throws a runtime error carrying the
// iteration index when the loss goes non-finite.
double train_step(NerfModel& model, AdamState& state, const OptimizerConfig& opt, const RayBatch& batch,
                  const RenderConfig& rc, uint64_t jitter_seed);

// T iterations of the standard loop: sample a batch (jittered stratified
// depths, seed drawn from the stream after the pixel draws), one train_step.
// Views with index in `views` are eligible; truth colors come from `images`.
void train_iterations(NerfModel& model, AdamState& state, const OptimizerConfig& opt,
                      const ViewDataset& ds, const std::vector<const Image*>& images,
                      const std::vector<int>& views, long iterations, int rays_per_batch,
                      const RenderConfig& rc, RngStream& rng,
                      const std::function<void(long, double)>& on_step = nullptr);

}  // namespace ipanerf
