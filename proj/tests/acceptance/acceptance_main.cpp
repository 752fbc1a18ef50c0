// Acceptance suite: one line per criterion, PASS or FAIL, nonzero exit if
// anything failed. The heavyweight desk-scale runs share artifacts through a
// scratch directory under the current working directory.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "constraints.hpp"
#include "experiment.hpp"
#include "fsio.hpp"
#include "metrics.hpp"
#include "rng.hpp"

using namespace ipanerf;
namespace fs = std::filesystem;

#ifndef IPANERF_CONFIG_DIR
#define IPANERF_CONFIG_DIR "configs"
#endif

namespace {

int g_failures = 0;

void report(const std::string& name, bool pass, double seconds, const std::string& detail) {
  std::printf("%s — %s (%.1fs)%s%s\n", pass ? "PASS" : "FAIL", name.c_str(), seconds,
              detail.empty() ? "" : ": ", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    auto [p, d] = fn();
    pass = p;
    detail = d;
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(name, pass, s, detail);
}

std::string fmt(const char* pattern, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

// --------------------------------------------------------------------------
// 1. Renderer oracle: quadrature vs an independently coded direct evaluation.

Eigen::Vector3d direct_quadrature(const std::vector<double>& sigma,
                                  const std::vector<Eigen::Vector3d>& color,
                                  const std::vector<double>& delta) {
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < sigma.size(); ++i) {
    double acc = 0.0;
    for (size_t j = 0; j < i; ++j) acc += sigma[j] * delta[j];
    out += std::exp(-acc) * (1.0 - std::exp(-sigma[i] * delta[i])) * color[i];
  }
  return out;
}

std::pair<bool, std::string> renderer_oracle() {
  RngStream rng(424242, "acc-oracle");
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    const int n = 1 + int(rng.below(8));
    std::vector<double> sigma(n), delta(n);
    std::vector<Eigen::Vector3d> color(n);
    Eigen::VectorXd sig(n);
    Eigen::Matrix<double, Eigen::Dynamic, 3> col(n, 3);
    Eigen::MatrixXd deltas(1, n), depths(1, n);
    double t = 2.0;
    for (int i = 0; i < n; ++i) {
      sigma[i] = rng.uniform(0.0, 4.0);
      delta[i] = rng.uniform(0.005, 2.0);
      color[i] = Eigen::Vector3d(rng.uniform01(), rng.uniform01(), rng.uniform01());
      sig[i] = sigma[i];
      col.row(i) = color[i].transpose();
      deltas(0, i) = delta[i];
      depths(0, i) = t;
      t += delta[i];
    }
    RenderOutput out;
    composite_rays(sig, col, deltas, depths, out);
    Eigen::Vector3d expect = direct_quadrature(sigma, color, delta);
    double rel = (out.color.row(0).transpose() - expect).norm() / std::max(1e-12, expect.norm());
    worst = std::max(worst, rel);
  }
  return {worst <= 1e-6, fmt("max relative error %.3g (limit %.0e)", worst, 1e-6)};
}

// --------------------------------------------------------------------------
// 2. Gradient check in double precision on a <= 500 parameter model.

ModelArchitecture tiny_arch() {
  ModelArchitecture arch;
  arch.depth = 2;
  arch.width = 8;
  arch.skip_layer = 1;
  arch.encoding.n_freq_position = 2;
  arch.encoding.n_freq_direction = 1;
  return arch;
}

std::pair<bool, std::string> gradient_check() {
  NerfModel model(tiny_arch());
  model.init_parameters(31415);
  if (model.parameter_count() > 500) return {false, "model exceeds 500 parameters"};

  RngStream rng(2718, "acc-grad");
  RayBundle rays;
  const int n_rays = 6;
  rays.origins.resize(n_rays, 3);
  rays.directions.resize(n_rays, 3);
  rays.near = 2.0;
  rays.far = 6.0;
  for (int r = 0; r < n_rays; ++r) {
    CameraPose pose = spherical_to_pose({4.0, deg2rad(rng.uniform(20.0, 70.0)), rng.uniform(0.0, 6.2)});
    rays.origins.row(r) = pose.position().transpose();
    rays.directions.row(r) = (-pose.rotation().col(2)).transpose();
  }
  SampleSet samples = sample_stratified(rays, 5, true, 99);
  Eigen::Matrix<double, Eigen::Dynamic, 3> truth(n_rays, 3);
  for (Eigen::Index i = 0; i < truth.size(); ++i) truth(i) = rng.uniform01();

  Eigen::VectorXd grad;
  render_loss_backward(model, samples, truth, 16384, grad);

  auto loss_at = [&](const Eigen::VectorXd& params) {
    NerfModel m(tiny_arch());
    m.parameters() = params;
    return rgb_loss(render_rays(m, samples).color, truth);
  };

  const double h = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    Eigen::Index i = Eigen::Index(rng.below(uint64_t(model.parameter_count())));
    Eigen::VectorXd plus = model.parameters(), minus = model.parameters();
    plus[i] += h;
    minus[i] -= h;
    double fd = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
    double rel = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-7});
    worst = std::max(worst, rel);
  }
  return {worst <= 1e-3, fmt("max relative error %.3g over 50 coordinates (limit %.0e)", worst, 1e-3)};
}

// --------------------------------------------------------------------------
// 3. Transmittance / weight invariants over 1000 random rays.

std::pair<bool, std::string> weight_invariants() {
  RngStream rng(99, "acc-weights");
  double worst_sum = 0.0;
  for (int ray = 0; ray < 1000; ++ray) {
    const int n = 2 + int(rng.below(15));
    Eigen::VectorXd sigma(n);
    Eigen::Matrix<double, Eigen::Dynamic, 3> color(n, 3);
    Eigen::MatrixXd deltas(1, n), depths(1, n);
    double t = 2.0;
    for (int i = 0; i < n; ++i) {
      sigma[i] = rng.uniform(0.0, 6.0);
      color.row(i) << rng.uniform01(), rng.uniform01(), rng.uniform01();
      deltas(0, i) = rng.uniform(0.005, 1.5);
      depths(0, i) = t;
      t += deltas(0, i);
    }
    RenderOutput out;
    Eigen::MatrixXd weights;
    composite_rays(sigma, color, deltas, depths, out, &weights);
    double transmittance = 1.0, wsum = 0.0;
    for (int i = 0; i < n; ++i) {
      double w = weights(0, i);
      if (w < 0.0 || w > 1.0) return {false, "weight outside [0,1]"};
      double next = transmittance - w;  // T_{i+1}
      if (next > transmittance + 1e-15 || next < -1e-9) return {false, "transmittance not non-increasing"};
      transmittance = next;
      wsum += w;
    }
    worst_sum = std::max(worst_sum, wsum);
    if (wsum > 1.0 + 1e-6) return {false, fmt("weight sum %.9f exceeds 1 + %g", wsum, 1e-6)};
  }
  return {true, fmt("largest weight sum %.9f (limit 1 + %.0e)", worst_sum, 1e-6)};
}

// --------------------------------------------------------------------------
// shared desk-scale setup

fs::path scratch_root() {
  fs::path dir = fs::current_path() / "acceptance_runs";
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig desk_config(const std::string& run_name) {
  ExperimentConfig cfg = load_config(fs::path(IPANERF_CONFIG_DIR) / "desk_toy.json", false);
  cfg.run_dir = scratch_root() / run_name;
  fs::remove_all(cfg.run_dir);
  return cfg;
}

// --------------------------------------------------------------------------
// 4. Clip invariant over a 20-epoch toy run, re-verified after 8-bit export.

std::pair<bool, std::string> clip_invariant() {
  ExperimentConfig cfg = desk_config("clip20");
  cfg.scene.toy.resolution = 24;
  cfg.scene.toy.n_train = 4;
  cfg.scene.toy.n_test = 1;
  cfg.scene.toy.seed = cfg.seed;
  cfg.model.depth = 2;
  cfg.model.width = 32;
  cfg.model.skip_layer = 1;
  cfg.render.n_samples = 12;
  cfg.schedule.total_iterations = 20 * 25;
  cfg.schedule.iterations_per_epoch = 25;
  cfg.schedule.attack_iterations = 2;
  cfg.schedule.render_iterations = 3;
  cfg.schedule.epsilon = 32;
  cfg.schedule.rays_per_batch = 256;

  ViewDataset ds = build_scene(cfg);
  IllusoryTarget target = resolve_target(cfg, ds);

  const double bound = cfg.schedule.epsilon / 255.0 + 1e-9;
  double worst = 0.0;
  long epochs = 0;
  IpaOptions opt;
  opt.arch = cfg.model;
  opt.optimizer = cfg.optimizer;
  opt.render = cfg.render;
  opt.on_epoch = [&](const EpochTrace&, const PoisonState& p) {
    worst = std::max(worst, max_poison_deviation(p));
    ++epochs;
  };
  IpaResult result = run_ipa(ds, target, cfg.schedule, opt);
  if (epochs != 20) return {false, "expected 20 epochs"};
  if (worst > bound) return {false, fmt("float deviation %.3g exceeds %.3g", worst, bound)};

  // 8-bit re-verification
  fs::path dir = cfg.run_dir / "poisoned";
  export_poison(result.poison, cfg.schedule.epsilon, schedule_hash(cfg.schedule), dir);
  int worst_q = 0;
  for (size_t v = 0; v < result.poison.poisoned.size(); ++v) {
    Image loaded = load_png(dir / ("r_" + std::to_string(v) + ".png"));
    for (size_t i = 0; i < loaded.data.size(); ++i) {
      int dq = std::abs(int(quantize8(loaded.data[i])) - int(quantize8(result.poison.clean[v].data[i])));
      worst_q = std::max(worst_q, dq);
    }
  }
  if (worst_q > cfg.schedule.epsilon)
    return {false, fmt("8-bit deviation %g exceeds epsilon %g", worst_q, cfg.schedule.epsilon)};
  return {true, fmt("float deviation %.6g, 8-bit deviation %g", worst, double(worst_q))};
}

// --------------------------------------------------------------------------
// 5. Epsilon 0 neutralization: exact equality with clean training.

std::pair<bool, std::string> epsilon_zero_neutralization() {
  ExperimentConfig cfg = desk_config("eps0");
  cfg.scene.toy.resolution = 32;
  cfg.scene.toy.n_train = 6;
  cfg.scene.toy.n_test = 2;
  cfg.model.depth = 3;
  cfg.model.width = 48;
  cfg.model.skip_layer = 1;
  cfg.render.n_samples = 16;
  cfg.schedule.total_iterations = 1000;
  cfg.schedule.iterations_per_epoch = 100;
  cfg.schedule.attack_iterations = 5;
  cfg.schedule.render_iterations = 10;
  cfg.schedule.epsilon = 0;
  cfg.schedule.rays_per_batch = 512;

  ViewDataset ds = build_scene(cfg);
  IllusoryTarget target = resolve_target(cfg, ds);

  IpaOptions opt;
  opt.arch = cfg.model;
  opt.optimizer = cfg.optimizer;
  opt.render = cfg.render;
  IpaResult attacked = run_ipa(ds, target, cfg.schedule, opt);

  // Clean training of the same budget: same victim stream, same eligible
  // views (the victim never trains on the backdoor view), clean images.
  NerfModel clean(cfg.model);
  clean.init_parameters(cfg.seed);
  AdamState opt_state;
  RngStream rng(cfg.seed, "victim");
  const int backdoor_view = ds.split_indices(Split::train)[size_t(target.backdoor_view_index)];
  std::vector<int> eligible;
  for (int id : ds.split_indices(Split::train))
    if (id != backdoor_view) eligible.push_back(id);
  std::vector<const Image*> images;
  for (const View& v : ds.views) images.push_back(&v.image);
  train_iterations(clean, opt_state, cfg.optimizer, ds, images, eligible, cfg.schedule.total_iterations,
                   cfg.schedule.rays_per_batch, cfg.render, rng);

  bool equal = attacked.victim.parameters() == clean.parameters();
  double max_diff = (attacked.victim.parameters() - clean.parameters()).cwiseAbs().maxCoeff();
  return {equal, fmt("max parameter difference %.3g (exact equality %s)", max_diff, equal ? 1.0 : 0.0)};
}

// --------------------------------------------------------------------------
// 6 + 7. Desk-scale efficacy and epsilon monotonicity (shared artifacts).

struct DeskRuns {
  bool ready = false;
  double clean_backdoor_psnr = 0.0;   // clean render at v' against B
  double attack_backdoor_psnr = 0.0;  // poisoned render at v' against B
  double clean_test_psnr = 0.0;
  double attack_test_psnr = 0.0;
  double illusory_eps32 = 0.0;
  double illusory_eps8 = 0.0;
};

DeskRuns g_desk;

double report_mean_psnr(const fs::path& report_csv, const std::string& partition) {
  std::string text = read_file(report_csv);
  std::stringstream lines(text);
  std::string line;
  std::getline(lines, line);
  double acc = 0.0;
  int n = 0;
  while (std::getline(lines, line)) {
    std::stringstream cells(line);
    std::string part, view, psnr_s;
    std::getline(cells, part, ',');
    std::getline(cells, view, ',');
    std::getline(cells, psnr_s, ',');
    if (part == partition) {
      acc += std::stod(psnr_s);
      ++n;
    }
  }
  if (n == 0) fail_incomplete("no rows for partition " + partition + " in " + report_csv.string());
  return acc / n;
}

std::pair<bool, std::string> desk_efficacy() {
  ExperimentConfig cfg = desk_config("desk");
  ViewDataset ds = build_scene(cfg);
  IllusoryTarget target = resolve_target(cfg, ds);
  const int backdoor_view = ds.split_indices(Split::train)[size_t(target.backdoor_view_index)];

  fs::path clean_ckpt = cmd_train_clean(cfg);
  NerfModel clean = load_checkpoint(clean_ckpt).to_model();
  Image clean_bd = render_view(clean, ds.views[size_t(backdoor_view)].pose, ds.intrinsics, ds.near,
                               ds.far, cfg.render);
  g_desk.clean_backdoor_psnr = psnr(clean_bd, target.image);
  nlohmann::json baseline = nlohmann::json::parse(read_file(cfg.run_dir / "clean" / "baseline.json"));
  g_desk.clean_test_psnr = baseline["test"]["psnr"].get<double>();

  cmd_attack(cfg, clean_ckpt);
  cmd_evaluate(cfg.run_dir);
  NerfModel victim = load_checkpoint(cfg.run_dir / "attack" / "checkpoints" / "victim.ckpt").to_model();
  Image attack_bd = render_view(victim, ds.views[size_t(backdoor_view)].pose, ds.intrinsics, ds.near,
                                ds.far, cfg.render);
  g_desk.attack_backdoor_psnr = psnr(attack_bd, target.image);
  g_desk.illusory_eps32 = report_mean_psnr(cfg.run_dir / "eval" / "report.csv", "V-Illusory");
  g_desk.attack_test_psnr = report_mean_psnr(cfg.run_dir / "eval" / "report.csv", "V-Test");
  g_desk.ready = true;

  const double gain = g_desk.attack_backdoor_psnr - g_desk.clean_backdoor_psnr;
  const double test_drop = g_desk.clean_test_psnr - g_desk.attack_test_psnr;
  bool pass = gain >= 5.0 && test_drop <= 3.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "backdoor PSNR %.2f dB vs clean %.2f dB (gain %.2f, need >= 5); "
                "V-Test %.2f dB vs clean %.2f dB (drop %.2f, allow <= 3)",
                g_desk.attack_backdoor_psnr, g_desk.clean_backdoor_psnr, gain, g_desk.attack_test_psnr,
                g_desk.clean_test_psnr, test_drop);
  return {pass, buf};
}

std::pair<bool, std::string> epsilon_monotonicity() {
  if (!g_desk.ready) return {false, "desk-scale run unavailable"};
  ExperimentConfig cfg = desk_config("desk_eps8");
  cfg.schedule.epsilon = 8;
  cmd_attack(cfg, std::nullopt);
  cmd_evaluate(cfg.run_dir);
  g_desk.illusory_eps8 = report_mean_psnr(cfg.run_dir / "eval" / "report.csv", "V-Illusory");

  bool pass = g_desk.illusory_eps32 > g_desk.illusory_eps8;
  return {pass, fmt("V-Illusory PSNR: eps=32 %.2f dB vs eps=8 %.2f dB", g_desk.illusory_eps32,
                    g_desk.illusory_eps8)};
}

// --------------------------------------------------------------------------
// 8. Angle-constraint geometry.

std::pair<bool, std::string> angle_geometry() {
  SphericalPose backdoor{4.0, deg2rad(60.0), deg2rad(120.0)};
  ConstraintViewSet set = neighbor_viewpoints(backdoor, {13.0, 15.0});
  if (set.size() != 16) return {false, "expected 16 poses"};

  double worst_lookat = 0.0, worst_offset = 0.0;
  for (size_t i = 0; i < set.size(); ++i) {
    CameraPose pose = spherical_to_pose(set.pose_at(i));
    Eigen::Vector3d d = -pose.rotation().col(2);
    worst_lookat = std::max(worst_lookat, pose.position().cross(d).norm() / d.norm());

    SphericalPose rec = pose_to_spherical(pose);
    double delta = deg2rad(set.groups[i / 8].angle_deg);
    double dt = std::abs(rec.theta - backdoor.theta);
    double dp = std::abs(std::remainder(rec.phi - backdoor.phi, 2.0 * kPi));
    double err_t = std::min(dt, std::abs(dt - delta));
    double err_p = std::min(dp, std::abs(dp - delta));
    worst_offset = std::max({worst_offset, err_t, err_p});
  }
  bool pass = worst_lookat <= 1e-6 && worst_offset <= 1e-9;
  return {pass, fmt("look-at miss %.2g (limit 1e-6), offset error %.2g (limit 1e-9)", worst_lookat,
                    worst_offset)};
}

// --------------------------------------------------------------------------
// 9. Metric correctness.

std::pair<bool, std::string> metric_correctness() {
  Image a = Image::filled(32, 32, 0.25, 0.5, 0.4);
  Image b16 = a, b32 = a;
  for (double& v : b16.data) v += 16.0 / 255.0;
  for (double& v : b32.data) v += 32.0 / 255.0;

  // closed forms evaluated directly: 20 log10(255/gap)
  double e16 = std::abs(psnr(a, b16) - 20.0 * std::log10(255.0 / 16.0));
  double e32 = std::abs(psnr(a, b32) - 20.0 * std::log10(255.0 / 32.0));
  double s = ssim(a, a);
  bool pass = e16 <= 1e-4 && e32 <= 1e-4 && s == 1.0;
  return {pass, fmt("PSNR closed-form errors %.2g / %.2g dB (limit 1e-4), SSIM(A,A) exact", e16,
                    std::max(e32, std::abs(s - 1.0)))};
}

// --------------------------------------------------------------------------
// 10. Paper-scale reference profile: schedule accounting only.

std::pair<bool, std::string> paper_profile_accounting() {
  ExperimentConfig cfg = load_config(fs::path(IPANERF_CONFIG_DIR) / "paper_blender_lego.json", false);
  bool ok = cfg.schedule.total_iterations == 200000 && cfg.schedule.iterations_per_epoch == 200 &&
            cfg.schedule.attack_iterations == 10 && cfg.schedule.render_iterations == 100 &&
            cfg.schedule.epsilon == 32 && cfg.schedule.angle_constraint &&
            cfg.schedule.constraint_angles == std::vector<double>{13.0, 15.0} &&
            cfg.schedule.epochs() == 1000 &&
            cfg.schedule.epochs() * cfg.schedule.attack_iterations == 10000;
  // Table-1 reference targets for this profile (V-Illusory PSNR 25.24 on
  // Lego/Earth) are documentation, not assertions.
  return {ok, "1000 attack epochs, 10000 inner updates, eps 32, angles 13/15"};
}

}  // namespace

int main() {
  std::printf("ipanerf acceptance suite\n");

  criterion("renderer oracle (200 instances vs direct quadrature)", renderer_oracle);
  criterion("gradient check (analytic vs central differences)", gradient_check);
  criterion("transmittance and weight invariants (1000 rays)", weight_invariants);
  criterion("angle-constraint geometry (16 poses, exact offsets)", angle_geometry);
  criterion("metric correctness (PSNR closed forms, SSIM identity)", metric_correctness);
  criterion("paper-scale profile schedule accounting", paper_profile_accounting);
  criterion("clip invariant over a 20-epoch toy run", clip_invariant);
  criterion("epsilon-0 neutralization (exact parameter equality)", epsilon_zero_neutralization);
  criterion("desk-scale attack efficacy (headline)", desk_efficacy);
  criterion("epsilon monotonicity at desk scale", epsilon_monotonicity);

  if (g_failures == 0)
    std::printf("all criteria passed\n");
  else
    std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
