#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "experiment.hpp"
#include "fsio.hpp"
#include "metrics.hpp"

using namespace ipanerf;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("ipanerf_exp_" + name);
  fs::remove_all(dir);
  return dir;
}

// micro profile: everything as small as the invariants allow
ExperimentConfig micro_config(const fs::path& run_dir, uint64_t seed = 11) {
  json doc = json::parse(R"({
    "name": "micro",
    "scene": {"type": "toy", "resolution": 16, "n_train": 4, "n_test": 2},
    "model": {"depth": 2, "width": 24, "skip_layer": 1, "n_freq_position": 3, "n_freq_direction": 1},
    "render": {"n_samples": 8},
    "optimizer": {"learning_rate": 0.002},
    "clean": {"iterations": 60},
    "target": {"image": "builtin:textured-sphere", "backdoor_view_index": 0},
    "schedule": {"total_iterations": 60, "iterations_per_epoch": 20, "attack_iterations": 2,
                 "render_iterations": 2, "epsilon": 32, "rays_per_batch": 96}
  })");
  ExperimentConfig cfg = config_from_json(doc, false);
  cfg.run_dir = run_dir;
  cfg.seed = seed;
  cfg.schedule.seed = seed;
  cfg.scene.toy.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("train-clean with budget zero keeps the initialized model") {
  fs::path dir = fresh_dir("clean0");
  ExperimentConfig cfg = micro_config(dir);
  cfg.clean_iterations = 0;
  fs::path ckpt = cmd_train_clean(cfg);

  Checkpoint c = load_checkpoint(ckpt);
  NerfModel fresh(cfg.model);
  fresh.init_parameters(cfg.seed);
  CHECK(c.parameters == fresh.parameters());
  CHECK(c.optimizer.step == 0);

  // an untrained field renders close to a constant-gray predictor
  ViewDataset ds = build_scene(cfg);
  json baseline = json::parse(read_file(dir / "clean" / "baseline.json"));
  double baseline_psnr = baseline["train"]["psnr"].get<double>();
  Image gray = Image::filled(ds.intrinsics.width, ds.intrinsics.height, 0.5, 0.5, 0.5);
  double acc = 0.0;
  int n = 0;
  for (int id : ds.split_indices(Split::train)) {
    acc += psnr(gray, ds.views[size_t(id)].image);
    ++n;
  }
  CHECK(std::abs(baseline_psnr - acc / n) <= 3.0);
  fs::remove_all(dir);
}

TEST_CASE("train-clean determinism: same seed, identical checkpoint bytes") {
  fs::path dir_a = fresh_dir("det_a"), dir_b = fresh_dir("det_b");
  ExperimentConfig a = micro_config(dir_a), b = micro_config(dir_b);
  cmd_train_clean(a);
  cmd_train_clean(b);
  CHECK(read_file(dir_a / "clean" / "checkpoint.ckpt") == read_file(dir_b / "clean" / "checkpoint.ckpt"));
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("attack command") {
  fs::path dir = fresh_dir("attack");
  ExperimentConfig cfg = micro_config(dir);

  SUBCASE("writes the run artifacts with O/T trace rows") {
    cmd_attack(cfg, std::nullopt);
    CHECK(fs::exists(dir / "attack" / "checkpoints" / "victim.ckpt"));
    CHECK(fs::exists(dir / "attack" / "checkpoints" / "fprime_last.ckpt"));
    CHECK(fs::exists(dir / "attack" / "poisoned" / "manifest.json"));
    CHECK(fs::exists(dir / "attack" / "poisoned" / "r_0.png"));

    std::string trace = read_file(dir / "attack" / "trace.csv");
    long rows = std::count(trace.begin(), trace.end(), '\n') - 1;  // minus header
    CHECK(rows == cfg.schedule.epochs());
  }

  SUBCASE("same seed reproduces trace.csv byte for byte") {
    fs::path dir_b = fresh_dir("attack_b");
    ExperimentConfig cfg_b = micro_config(dir_b);
    cmd_attack(cfg, std::nullopt);
    cmd_attack(cfg_b, std::nullopt);
    CHECK(read_file(dir / "attack" / "trace.csv") == read_file(dir_b / "attack" / "trace.csv"));
    CHECK(read_file(dir / "attack" / "checkpoints" / "victim.ckpt") ==
          read_file(dir_b / "attack" / "checkpoints" / "victim.ckpt"));
    fs::remove_all(dir_b);
  }

  SUBCASE("angle constraint without a clean checkpoint is incomplete") {
    cfg.schedule.angle_constraint = true;
    cfg.schedule.constraint_angles = {13.0, 15.0};
    try {
      cmd_attack(cfg, std::nullopt);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::incomplete);
    }
  }

  SUBCASE("full pipeline with the constraint") {
    cfg.schedule.angle_constraint = true;
    cfg.schedule.constraint_angles = {13.0, 15.0};
    // keep the backdoor view safely inside the hemisphere for both offsets
    fs::path clean_ckpt = cmd_train_clean(cfg);
    cmd_attack(cfg, clean_ckpt);
    CHECK(fs::exists(dir / "attack" / "constraints" / "constraints.json"));
    cmd_evaluate(dir);
    std::string csv = read_file(dir / "eval" / "report.csv");
    CHECK(csv.find("V-Constraint") != std::string::npos);
  }

  fs::remove_all(dir);
}

TEST_CASE("evaluate command") {
  fs::path dir = fresh_dir("eval");
  ExperimentConfig cfg = micro_config(dir);

  SUBCASE("missing artifacts are listed") {
    try {
      cmd_evaluate(dir);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::incomplete);
    }
    manifest_init(dir, cfg);
    try {
      cmd_evaluate(dir);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::incomplete);
      CHECK(std::string(e.what()).find("victim.ckpt") != std::string::npos);
    }
  }

  SUBCASE("report layout and purity") {
    cmd_attack(cfg, std::nullopt);
    cmd_evaluate(dir);
    std::string csv = read_file(dir / "eval" / "report.csv");
    CHECK(csv.rfind("partition,view,psnr,ssim,lpips\n", 0) == 0);
    CHECK(csv.find("V-Illusory") != std::string::npos);
    CHECK(csv.find("V-Train") != std::string::npos);
    CHECK(csv.find("V-Test") != std::string::npos);

    // repeated evaluation produces the identical report
    std::string first = csv;
    cmd_evaluate(dir);
    CHECK(read_file(dir / "eval" / "report.csv") == first);
    CHECK(fs::exists(dir / "eval" / "report.txt"));
  }

  fs::remove_all(dir);
}

TEST_CASE("render command") {
  fs::path dir = fresh_dir("render");
  ExperimentConfig cfg = micro_config(dir);
  fs::path ckpt = cmd_train_clean(cfg);

  PoseSpec by_index;
  by_index.view_index = 1;
  cmd_render(cfg, ckpt, by_index, dir / "a.png");
  cmd_render(cfg, ckpt, by_index, dir / "b.png");
  CHECK(read_file(dir / "a.png") == read_file(dir / "b.png"));

  PoseSpec spherical;
  spherical.spherical = SphericalPose{4.0, deg2rad(55.0), deg2rad(10.0)};
  cmd_render(cfg, ckpt, spherical, dir / "s.png");
  CHECK(fs::exists(dir / "s.png"));

  PoseSpec bad;
  bad.view_index = 99;
  CHECK_THROWS_AS(cmd_render(cfg, ckpt, bad, dir / "x.png"), Error);
  PoseSpec none;
  CHECK_THROWS_AS(cmd_render(cfg, ckpt, none, dir / "x.png"), Error);
  fs::remove_all(dir);
}

TEST_CASE("sweep spec parsing") {
  SweepSpec eps = SweepSpec::parse("epsilon=8,16,32");
  CHECK(eps.axis == SweepSpec::Axis::epsilon);
  REQUIRE(eps.epsilons.size() == 3);
  CHECK(eps.epsilons[2] == 32);

  SweepSpec ang = SweepSpec::parse("angles=13+15,9+15,3");
  CHECK(ang.axis == SweepSpec::Axis::angles);
  REQUIRE(ang.angle_sets.size() == 3);
  CHECK(ang.angle_sets[0] == std::vector<double>{13.0, 15.0});
  CHECK(ang.angle_sets[2] == std::vector<double>{3.0});

  CHECK_THROWS(SweepSpec::parse("epsilon="));
  CHECK_THROWS(SweepSpec::parse(""));
  CHECK_THROWS(SweepSpec::parse("gamma=1,2"));
  CHECK_THROWS(SweepSpec::parse("epsilon=a,b"));
}

TEST_CASE("ablate command over a tiny epsilon sweep") {
  fs::path dir = fresh_dir("ablate");
  ExperimentConfig cfg = micro_config(dir);
  cmd_ablate(cfg, SweepSpec::parse("epsilon=0,32"));
  CHECK(fs::exists(dir / "summary.csv"));
  CHECK(fs::exists(dir / "summary.txt"));
  CHECK(fs::exists(dir / "sweep_epsilon_0" / "eval" / "report.csv"));
  CHECK(fs::exists(dir / "sweep_epsilon_32" / "eval" / "report.csv"));
  std::string summary = read_file(dir / "summary.csv");
  CHECK(summary.find("epsilon_0") != std::string::npos);
  CHECK(summary.find("epsilon_32") != std::string::npos);
  fs::remove_all(dir);
}
