#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "ipanerf/ipanerf.h"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("ipanerf_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_micro_config(const fs::path& dir) {
  fs::path path = dir / "config.json";
  std::ofstream(path) << R"({
    "name": "capi-micro", "seed": 4, "run_dir": ")" << (dir / "run").string() << R"(",
    "scene": {"type": "toy", "resolution": 16, "n_train": 3, "n_test": 1},
    "model": {"depth": 2, "width": 16, "skip_layer": 1, "n_freq_position": 2, "n_freq_direction": 1},
    "render": {"n_samples": 6},
    "optimizer": {"learning_rate": 0.002},
    "clean": {"iterations": 30},
    "target": {"image": "builtin:starfield", "backdoor_view_index": 0},
    "schedule": {"total_iterations": 40, "iterations_per_epoch": 20, "attack_iterations": 1,
                 "render_iterations": 1, "epsilon": 16, "rays_per_batch": 64}
  })";
  return path;
}

}  // namespace

TEST_CASE("version and error strings") {
  CHECK(ipa_version() != nullptr);
  CHECK(std::strlen(ipa_version()) > 0);
  CHECK(ipa_last_error() != nullptr);
}

TEST_CASE("status codes map the error taxonomy") {
  ipa_config* cfg = nullptr;
  CHECK(ipa_config_load("/definitely/not/here.json", &cfg) == IPA_ERROR_ARGUMENT);
  CHECK(std::strlen(ipa_last_error()) > 0);
  CHECK(ipa_run_evaluate("/tmp/ipanerf_no_such_run_dir") == IPA_ERROR_INCOMPLETE);
  CHECK(ipa_config_load(nullptr, &cfg) == IPA_ERROR_ARGUMENT);

  ipa_model* model = nullptr;
  CHECK(ipa_model_load("/definitely/not/here.ckpt", &model) == IPA_ERROR_ARGUMENT);
}

TEST_CASE("dataset handles") {
  ipa_dataset* ds = nullptr;
  REQUIRE(ipa_dataset_make_toy(9, 5, 2, 16, &ds) == IPA_OK);
  int n_train = 0, n_test = 0, n_val = 0, w = 0, h = 0;
  CHECK(ipa_dataset_counts(ds, &n_train, &n_test, &n_val, &w, &h) == IPA_OK);
  CHECK(n_train == 5);
  CHECK(n_test == 2);
  CHECK(w == 16);

  fs::path dir = fresh_dir("dataset");
  CHECK(ipa_dataset_save_blender(ds, (dir / "scene").string().c_str()) == IPA_OK);

  ipa_dataset* loaded = nullptr;
  REQUIRE(ipa_dataset_load_blender((dir / "scene").string().c_str(), 1, &loaded) == IPA_OK);
  int n2 = 0;
  CHECK(ipa_dataset_counts(loaded, &n2, nullptr, nullptr, nullptr, nullptr) == IPA_OK);
  CHECK(n2 == 5);
  ipa_dataset_free(loaded);
  ipa_dataset_free(ds);

  CHECK(ipa_dataset_make_toy(9, 1, 1, 16, &ds) == IPA_ERROR_ARGUMENT);  // n_train < 2
  fs::remove_all(dir);
}

TEST_CASE("whole pipeline through the shared library") {
  fs::path dir = fresh_dir("pipeline");
  fs::path cfg_path = write_micro_config(dir);

  ipa_config* cfg = nullptr;
  REQUIRE(ipa_config_load(cfg_path.string().c_str(), &cfg) == IPA_OK);
  CHECK(ipa_config_set(cfg, "schedule.epsilon=32") == IPA_OK);
  CHECK(ipa_config_set(cfg, "schedule.bogus_key=1") == IPA_ERROR_ARGUMENT);

  char run_dir[4096] = {0};
  REQUIRE(ipa_config_get_run_dir(cfg, run_dir, sizeof(run_dir)) == IPA_OK);

  char ckpt[4096] = {0};
  REQUIRE(ipa_run_train_clean(cfg, ckpt, sizeof(ckpt)) == IPA_OK);
  CHECK(fs::exists(ckpt));

  REQUIRE(ipa_run_attack(cfg, ckpt) == IPA_OK);
  REQUIRE(ipa_run_evaluate(run_dir) == IPA_OK);
  CHECK(fs::exists(fs::path(run_dir) / "eval" / "report.csv"));

  fs::path out_png = dir / "render.png";
  REQUIRE(ipa_run_render(cfg, (fs::path(run_dir) / "attack" / "checkpoints" / "victim.ckpt").string().c_str(),
                         "index:0", out_png.string().c_str()) == IPA_OK);
  CHECK(fs::exists(out_png));
  CHECK(ipa_run_render(cfg, ckpt, "index:999", out_png.string().c_str()) == IPA_ERROR_ARGUMENT);
  CHECK(ipa_run_render(cfg, ckpt, "garbled", out_png.string().c_str()) == IPA_ERROR_ARGUMENT);

  // metrics over the rendered artifacts
  double v = 0.0;
  CHECK(ipa_psnr_png(out_png.string().c_str(), out_png.string().c_str(), &v) == IPA_OK);
  CHECK(v == doctest::Approx(99.0));
  CHECK(ipa_ssim_png(out_png.string().c_str(), out_png.string().c_str(), &v) == IPA_OK);
  CHECK(v == doctest::Approx(1.0));

  ipa_config_free(cfg);
  fs::remove_all(dir);
}

TEST_CASE("lpips registration through the C seam") {
  ipa_register_lpips(
      [](const double* a, const double* b, int w, int h, void*) {
        double acc = 0.0;
        for (int i = 0; i < w * h * 3; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
        return acc;
      },
      nullptr);

  fs::path dir = fresh_dir("lpips");
  ipa_dataset* ds = nullptr;
  REQUIRE(ipa_dataset_make_toy(2, 2, 0, 16, &ds) == IPA_OK);
  CHECK(ipa_dataset_save_blender(ds, (dir / "s").string().c_str()) == IPA_OK);
  ipa_dataset_free(ds);

  fs::path png = dir / "s" / "train" / "r_0.png";
  double v = -1.0;
  CHECK(ipa_psnr_png(png.string().c_str(), png.string().c_str(), &v) == IPA_OK);

  ipa_register_lpips(nullptr, nullptr);  // unregister
  fs::remove_all(dir);
}
