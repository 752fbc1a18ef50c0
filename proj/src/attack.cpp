#include "attack.hpp"

#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>

#include "errors.hpp"
#include "fsio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ipanerf {

int AttackSchedule::effective_rays_per_batch(size_t total_train_pixels) const {
  if (rays_per_batch > 0) return rays_per_batch;
  const long k = std::max(1, render_iterations);
  return int((total_train_pixels + size_t(k) - 1) / size_t(k));
}

void AttackSchedule::validate() const {
  require_argument(total_iterations >= 0, "schedule: total_iterations must be >= 0");
  require_argument(iterations_per_epoch > 0, "schedule: iterations_per_epoch must be positive");
  require_argument(total_iterations % iterations_per_epoch == 0,
                   "schedule: iterations_per_epoch must divide total_iterations");
  require_argument(attack_iterations >= 0, "schedule: attack_iterations must be >= 0");
  require_argument(render_iterations >= 0, "schedule: render_iterations must be >= 0");
  require_argument(epsilon >= 0 && epsilon <= 255, "schedule: epsilon must lie in [0, 255]");
  require_argument(rays_per_batch >= 0, "schedule: rays_per_batch must be >= 0");
  if (angle_constraint)
    require_argument(!constraint_angles.empty(),
                     "schedule: angle constraint enabled but no constraint angles given");
}

std::string schedule_hash(const AttackSchedule& sched) {
  std::ostringstream canon;
  canon << "O=" << sched.total_iterations << ";T=" << sched.iterations_per_epoch
        << ";A=" << sched.attack_iterations << ";K=" << sched.render_iterations
        << ";eps=" << sched.epsilon << ";eta=" << (sched.angle_constraint ? 1 : 0) << ";angles=";
  for (double a : sched.constraint_angles) canon << a << ",";
  canon << ";rpb=" << sched.rays_per_batch << ";seed=" << sched.seed;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(canon.str())));
  return buf;
}

PoisonState make_poison_state(const ViewDataset& ds) {
  PoisonState state;
  state.train_views = ds.split_indices(Split::train);
  require_argument(!state.train_views.empty(), "poison state: dataset has no training views");
  for (int id : state.train_views) state.clean.push_back(ds.views[size_t(id)].image);
  state.poisoned = state.clean;
  return state;
}

void clip_poison(PoisonState& state, int epsilon) {
  const double eps = double(epsilon) / 255.0;
  for (size_t v = 0; v < state.poisoned.size(); ++v) {
    const std::vector<double>& clean = state.clean[v].data;
    std::vector<double>& poisoned = state.poisoned[v].data;
    for (size_t i = 0; i < poisoned.size(); ++i) {
      double lo = clean[i] - eps, hi = clean[i] + eps;
      double p = std::min(std::max(poisoned[i], lo), hi);
      poisoned[i] = std::min(std::max(p, 0.0), 1.0);
    }
  }
}

double max_poison_deviation(const PoisonState& state) {
  double m = 0.0;
  for (size_t v = 0; v < state.poisoned.size(); ++v) m = std::max(m, max_abs_diff(state.poisoned[v], state.clean[v]));
  return m;
}

void export_poison(const PoisonState& state, int epsilon, const std::string& sched_hash,
                   const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["epsilon"] = epsilon;
  manifest["epoch"] = state.epoch;
  manifest["schedule_hash"] = sched_hash;
  json views = json::array();
  for (size_t v = 0; v < state.poisoned.size(); ++v) {
    std::string file = "r_" + std::to_string(v) + ".png";
    save_png(state.poisoned[v], dir / file);
    // the budget must also hold after 8-bit quantization
    for (size_t i = 0; i < state.poisoned[v].data.size(); ++i) {
      int dq = int(quantize8(state.poisoned[v].data[i])) - int(quantize8(state.clean[v].data[i]));
      if (std::abs(dq) > epsilon)
        fail_runtime("poison export: quantized deviation " + std::to_string(dq) +
                     " exceeds epsilon in view " + std::to_string(v));
    }
    views.push_back({{"view", v}, {"file", file}});
  }
  manifest["views"] = views;
  atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

InnerStepResult attack_inner_step(NerfModel& fprime, AdamState& state, const OptimizerConfig& opt,
                                  const ViewDataset& ds, const IllusoryTarget& target,
                                  const ConstraintViewSet* constraints, int rays_per_batch,
                                  const RenderConfig& rc, RngStream& rng) {
  require_argument(rays_per_batch > 0, "attack_inner_step: rays_per_batch must be positive");
  const std::vector<int> train_ids = ds.split_indices(Split::train);
  require_argument(target.backdoor_view_index >= 0 && target.backdoor_view_index < int(train_ids.size()),
                   "attack_inner_step: backdoor view index outside the train split");
  require_argument(target.image.width == ds.intrinsics.width && target.image.height == ds.intrinsics.height,
                   "attack_inner_step: target image resolution must match the dataset");
  if (constraints)
    require_argument(constraints->has_images(),
                     "attack_inner_step: constraint set lacks ground-truth approximations");

  const int backdoor_view = train_ids[size_t(target.backdoor_view_index)];
  const size_t pixels = size_t(ds.intrinsics.width) * ds.intrinsics.height;
  const int n_backdoor = constraints ? (rays_per_batch + 1) / 2 : rays_per_batch;
  const int n_constraint = rays_per_batch - n_backdoor;

  RayBatch batch;
  batch.rays.origins.resize(rays_per_batch, 3);
  batch.rays.directions.resize(rays_per_batch, 3);
  batch.rays.near = ds.near;
  batch.rays.far = ds.far;
  batch.truth.resize(rays_per_batch, 3);

  const CameraPose& backdoor_pose = ds.views[size_t(backdoor_view)].pose;
  for (int i = 0; i < n_backdoor; ++i) {
    int pix = int(rng.below(pixels));
    int y = pix / ds.intrinsics.width, x = pix % ds.intrinsics.width;
    Eigen::Vector3d o, d;
    ray_for_pixel(backdoor_pose, ds.intrinsics, x + 0.5, y + 0.5, o, d);
    batch.rays.origins.row(i) = o.transpose();
    batch.rays.directions.row(i) = d.transpose();
    for (int c = 0; c < 3; ++c) batch.truth(i, c) = target.image.data[size_t(pix) * 3 + c];
  }

  std::vector<CameraPose> cposes;
  if (constraints) {
    cposes = constraints->camera_poses();
    for (int i = 0; i < n_constraint; ++i) {
      uint64_t flat = rng.below(uint64_t(cposes.size()) * pixels);
      size_t view = size_t(flat / pixels);
      int pix = int(flat % pixels);
      int y = pix / ds.intrinsics.width, x = pix % ds.intrinsics.width;
      Eigen::Vector3d o, d;
      ray_for_pixel(cposes[view], ds.intrinsics, x + 0.5, y + 0.5, o, d);
      batch.rays.origins.row(n_backdoor + i) = o.transpose();
      batch.rays.directions.row(n_backdoor + i) = d.transpose();
      const Image& gt = constraints->images[view];
      for (int c = 0; c < 3; ++c) batch.truth(n_backdoor + i, c) = gt.data[size_t(pix) * 3 + c];
    }
  }

  const uint64_t jitter_seed = rng.next_u64();
  SampleSet samples = sample_stratified(batch.rays, rc.n_samples, /*jitter=*/true, jitter_seed);

  Eigen::VectorXd grad;
  Eigen::Matrix<double, Eigen::Dynamic, 3> out;
  double loss = render_loss_backward(fprime, samples, batch.truth, rc.chunk, grad, &out);
  if (!std::isfinite(loss)) fail_runtime("attack diverged: non-finite inner loss");

  InnerStepResult result;
  result.loss = loss;
  double bd = 0.0, ct = 0.0;
  for (int i = 0; i < n_backdoor; ++i) bd += (out.row(i) - batch.truth.row(i)).squaredNorm();
  for (int i = n_backdoor; i < rays_per_batch; ++i) ct += (out.row(i) - batch.truth.row(i)).squaredNorm();
  result.backdoor_term = n_backdoor > 0 ? bd / n_backdoor : 0.0;
  result.constraint_term = n_constraint > 0 ? ct / n_constraint : 0.0;

  adam_apply(fprime.parameters(), grad, state, opt);
  return result;
}

void render_poison(const NerfModel& fprime, const ViewDataset& ds, PoisonState& state,
                   int render_iterations, int rays_per_batch, const RenderConfig& rc, RngStream& rng) {
  if (render_iterations <= 0) return;
  require_argument(rays_per_batch > 0, "render_poison: rays_per_batch must be positive");

  const size_t pixels = size_t(ds.intrinsics.width) * ds.intrinsics.height;
  std::vector<uint32_t> pool(state.train_views.size() * pixels);
  for (size_t i = 0; i < pool.size(); ++i) pool[i] = uint32_t(i);
  rng.shuffle(pool);

  size_t cursor = 0;
  for (int k = 0; k < render_iterations && cursor < pool.size(); ++k) {
    const size_t n = std::min(size_t(rays_per_batch), pool.size() - cursor);
    RayBundle rays;
    rays.origins.resize(Eigen::Index(n), 3);
    rays.directions.resize(Eigen::Index(n), 3);
    rays.near = ds.near;
    rays.far = ds.far;
    for (size_t i = 0; i < n; ++i) {
      uint32_t flat = pool[cursor + i];
      size_t slot = flat / pixels;
      int pix = int(flat % pixels);
      int y = pix / ds.intrinsics.width, x = pix % ds.intrinsics.width;
      Eigen::Vector3d o, d;
      ray_for_pixel(ds.views[size_t(state.train_views[slot])].pose, ds.intrinsics, x + 0.5, y + 0.5, o, d);
      rays.origins.row(Eigen::Index(i)) = o.transpose();
      rays.directions.row(Eigen::Index(i)) = d.transpose();
    }
    SampleSet samples = sample_stratified(rays, rc.n_samples, /*jitter=*/false, /*seed=*/0);
    RenderOutput out = render_rays(fprime, samples, rc.chunk);
    for (size_t i = 0; i < n; ++i) {
      uint32_t flat = pool[cursor + i];
      size_t slot = flat / pixels;
      size_t pix = flat % pixels;
      for (int c = 0; c < 3; ++c) state.poisoned[slot].data[pix * 3 + c] = out.color(Eigen::Index(i), c);
    }
    cursor += n;
  }
}

void victim_train_epoch(NerfModel& victim, AdamState& state, const OptimizerConfig& opt,
                        const ViewDataset& ds, const PoisonState& poison, int backdoor_view,
                        long iterations, int rays_per_batch, const RenderConfig& rc, RngStream& rng,
                        double* mean_loss) {
  // Poisoned images stand in for the training views; every other view keeps
  // its dataset image (those views are never eligible anyway).
  std::vector<const Image*> images(ds.views.size());
  for (size_t i = 0; i < ds.views.size(); ++i) images[i] = &ds.views[i].image;
  for (size_t slot = 0; slot < poison.train_views.size(); ++slot)
    images[size_t(poison.train_views[slot])] = &poison.poisoned[slot];

  std::vector<int> eligible;
  for (int id : poison.train_views)
    if (id != backdoor_view) eligible.push_back(id);
  require_argument(!eligible.empty(), "victim_train_epoch: no training views besides the backdoor view");

  double acc = 0.0;
  train_iterations(victim, state, opt, ds, images, eligible, iterations, rays_per_batch, rc, rng,
                   [&](long, double loss) { acc += loss; });
  if (mean_loss) *mean_loss = iterations > 0 ? acc / double(iterations) : 0.0;
}

IpaResult run_ipa(const ViewDataset& ds, const IllusoryTarget& target, const AttackSchedule& sched,
                  const IpaOptions& opt) {
  sched.validate();
  const std::vector<int> train_ids = ds.split_indices(Split::train);
  require_argument(target.backdoor_view_index >= 0 && target.backdoor_view_index < int(train_ids.size()),
                   "run_ipa: backdoor view index outside the train split");
  require_argument(target.image.width == ds.intrinsics.width && target.image.height == ds.intrinsics.height,
                   "run_ipa: target image resolution must match the dataset");
  if (sched.angle_constraint)
    require(opt.clean_model != nullptr, ErrorKind::incomplete,
            "run_ipa: angle constraint requires a clean model for ground-truth approximation");

  const int backdoor_view = train_ids[size_t(target.backdoor_view_index)];
  const size_t pixels = size_t(ds.intrinsics.width) * ds.intrinsics.height;
  const int rpb = sched.effective_rays_per_batch(train_ids.size() * pixels);

  IpaResult result{NerfModel(opt.arch), NerfModel(opt.arch)};
  result.victim.init_parameters(sched.seed);
  result.fprime_last.parameters() = result.victim.parameters();
  result.poison = make_poison_state(ds);
  result.victim_optimizer.reset(result.victim.parameter_count());

  if (sched.angle_constraint) {
    SphericalPose backdoor_sph = pose_to_spherical(ds.views[size_t(backdoor_view)].pose);
    result.constraints = neighbor_viewpoints(backdoor_sph, sched.constraint_angles);
    approximate_ground_truth(*opt.clean_model, result.constraints, ds.intrinsics, ds.near, ds.far,
                             opt.render);
  }
  const ConstraintViewSet* constraints = sched.angle_constraint ? &result.constraints : nullptr;

  RngStream victim_rng(sched.seed, "victim");
  RngStream attack_rng(sched.seed, "attack");
  RngStream poison_rng(sched.seed, "poison");

  long nonincrease = 0, eligible_epochs = 0;
  const long epochs = sched.epochs();

  auto stage = [&](long epoch, const char* name, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      throw Error(e.kind(), "epoch " + std::to_string(epoch) + ", stage " + name + ": " + e.what());
    }
  };

  for (long epoch = 0; epoch < epochs; ++epoch) {
    EpochTrace trace;
    trace.epoch = epoch;

    // line 5: the copy restarts from the victim every epoch
    result.fprime_last.parameters() = result.victim.parameters();
    AdamState inner_state;
    inner_state.reset(result.fprime_last.parameter_count());

    double first_ct = 0.0, last_ct = 0.0, inner_acc = 0.0;
    stage(epoch, "attack", [&] {
      for (int a = 0; a < sched.attack_iterations; ++a) {
        InnerStepResult r = attack_inner_step(result.fprime_last, inner_state, opt.optimizer, ds, target,
                                              constraints, rpb, opt.render, attack_rng);
        inner_acc += r.loss;
        if (a == 0) first_ct = r.constraint_term;
        last_ct = r.constraint_term;
        ++result.inner_updates;
      }
    });
    trace.inner_loss = sched.attack_iterations > 0 ? inner_acc / sched.attack_iterations : 0.0;
    if (sched.angle_constraint && sched.attack_iterations >= 2) {
      ++eligible_epochs;
      if (last_ct <= first_ct + 1e-12) ++nonincrease;
    }

    stage(epoch, "render-poison", [&] {
      render_poison(result.fprime_last, ds, result.poison, sched.render_iterations, rpb, opt.render,
                    poison_rng);
    });
    stage(epoch, "clip", [&] {
      clip_poison(result.poison, sched.epsilon);
      // checked, not assumed
      double dev = max_poison_deviation(result.poison);
      if (dev > double(sched.epsilon) / 255.0 + 1e-9)
        fail_runtime("clip invariant violated: deviation " + std::to_string(dev));
    });
    result.poison.epoch = epoch + 1;

    stage(epoch, "victim-train", [&] {
      victim_train_epoch(result.victim, result.victim_optimizer, opt.optimizer, ds, result.poison,
                         backdoor_view, sched.iterations_per_epoch, rpb, opt.render, victim_rng,
                         &trace.victim_loss);
      result.victim_updates += sched.iterations_per_epoch;
    });

    stage(epoch, "trace", [&] {
      Image bd = render_view(result.victim, ds.views[size_t(backdoor_view)].pose, ds.intrinsics, ds.near,
                             ds.far, opt.render);
      trace.backdoor_psnr = psnr(bd, target.image);
      double acc = 0.0;
      int n = 0;
      for (int id : train_ids) {
        if (id == backdoor_view) continue;
        Image r = render_view(result.victim, ds.views[size_t(id)].pose, ds.intrinsics, ds.near, ds.far,
                              opt.render);
        acc += psnr(r, ds.views[size_t(id)].image);
        ++n;
      }
      trace.train_psnr = n > 0 ? acc / n : 0.0;
    });

    result.trace.push_back(trace);
    if (opt.on_epoch) opt.on_epoch(trace, result.poison);
  }

  result.constraint_nonincrease_fraction =
      eligible_epochs > 0 ? double(nonincrease) / double(eligible_epochs) : 1.0;
  if (eligible_epochs > 0 && result.constraint_nonincrease_fraction < 0.8)
    std::fprintf(stderr,
                 "warning: constraint term decreased in only %.0f%% of epochs (soft property)\n",
                 100.0 * result.constraint_nonincrease_fraction);
  return result;
}

}  // namespace ipanerf
