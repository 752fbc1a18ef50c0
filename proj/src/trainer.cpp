#include "trainer.hpp"

#include <cmath>

#include "errors.hpp"

namespace ipanerf {

void adam_apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state,
                const OptimizerConfig& opt) {
  require_argument(params.size() == grad.size(), "adam: size mismatch");
  if (state.m.size() != params.size()) state.reset(params.size());

  state.step += 1;
  const double lr = opt.lr_at(state.step);
  state.m = opt.beta1 * state.m + (1.0 - opt.beta1) * grad;
  state.v = opt.beta2 * state.v + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(opt.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, double(state.step));
  params.array() -= (lr / bc1) * state.m.array() / ((state.v.array() / bc2).sqrt() + opt.eps);
}

std::vector<PixelRef> sample_pixels(const std::vector<int>& views, size_t pixels_per_view, size_t n,
                                    RngStream& rng) {
  require_argument(!views.empty(), "sample_pixels: no eligible views");
  require_argument(pixels_per_view > 0, "sample_pixels: views have no pixels");
  std::vector<PixelRef> refs(n);
  const uint64_t total = uint64_t(views.size()) * pixels_per_view;
  for (size_t i = 0; i < n; ++i) {
    uint64_t flat = rng.below(total);
    refs[i].view = views[flat / pixels_per_view];
    refs[i].pixel = int(flat % pixels_per_view);
  }
  return refs;
}

RayBatch make_batch(const ViewDataset& ds, const std::vector<const Image*>& images,
                    const std::vector<PixelRef>& refs) {
  RayBatch batch;
  const Eigen::Index n = Eigen::Index(refs.size());
  batch.rays.origins.resize(n, 3);
  batch.rays.directions.resize(n, 3);
  batch.rays.near = ds.near;
  batch.rays.far = ds.far;
  batch.truth.resize(n, 3);

  for (Eigen::Index i = 0; i < n; ++i) {
    const PixelRef& ref = refs[size_t(i)];
    const int y = ref.pixel / ds.intrinsics.width;
    const int x = ref.pixel % ds.intrinsics.width;
    Eigen::Vector3d o, d;
    ray_for_pixel(ds.views[size_t(ref.view)].pose, ds.intrinsics, x + 0.5, y + 0.5, o, d);
    batch.rays.origins.row(i) = o.transpose();
    batch.rays.directions.row(i) = d.transpose();
    const Image& img = *images[size_t(ref.view)];
    for (int c = 0; c < 3; ++c) batch.truth(i, c) = img.data[size_t(ref.pixel) * 3 + c];
  }
  return batch;
}

double train_step(NerfModel& model, AdamState& state, const OptimizerConfig& opt, const RayBatch& batch,
                  const RenderConfig& rc, uint64_t jitter_seed) {
  require_argument(batch.rays.count() > 0, "train_step: empty batch");
  SampleSet samples = sample_stratified(batch.rays, rc.n_samples, /*jitter=*/true, jitter_seed);
  Eigen::VectorXd grad;
  double loss = render_loss_backward(model, samples, batch.truth, rc.chunk, grad);
  if (!std::isfinite(loss))
    fail_runtime("training diverged: non-finite loss at iteration " + std::to_string(state.step + 1));
  adam_apply(model.parameters(), grad, state, opt);
  return loss;
}

void train_iterations(NerfModel& model, AdamState& state, const OptimizerConfig& opt,
                      const ViewDataset& ds, const std::vector<const Image*>& images,
                      const std::vector<int>& views, long iterations, int rays_per_batch,
                      const RenderConfig& rc, RngStream& rng,
                      const std::function<void(long, double)>& on_step) {
  require_argument(rays_per_batch > 0, "train_iterations: rays_per_batch must be positive");
  const size_t pixels_per_view = size_t(ds.intrinsics.width) * ds.intrinsics.height;
  for (long it = 0; it < iterations; ++it) {
    auto refs = sample_pixels(views, pixels_per_view, size_t(rays_per_batch), rng);
    uint64_t jitter_seed = rng.next_u64();
    RayBatch batch = make_batch(ds, images, refs);
    double loss = train_step(model, state, opt, batch, rc, jitter_seed);
    if (on_step) on_step(it, loss);
  }
}

}  // namespace ipanerf
