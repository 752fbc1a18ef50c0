// Command-line front end. Links only the C API so it doubles as a living
// example of driving libipanerf from another language.
#include <CLI11.hpp>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "ipanerf/ipanerf.h"

namespace {

struct ConfigDeleter {
  void operator()(ipa_config* c) const { ipa_config_free(c); }
};
using ConfigPtr = std::unique_ptr<ipa_config, ConfigDeleter>;

int fail(ipa_status status) {
  std::fprintf(stderr, "error: %s\n", ipa_last_error());
  return int(status);
}

ConfigPtr open_config(const std::string& path, const std::vector<std::string>& sets,
                      const std::string& run_dir, bool have_seed, uint64_t seed, ipa_status& status) {
  ipa_config* raw = nullptr;
  status = ipa_config_load(path.c_str(), &raw);
  if (status != IPA_OK) return nullptr;
  ConfigPtr cfg(raw);
  for (const std::string& s : sets) {
    status = ipa_config_set(cfg.get(), s.c_str());
    if (status != IPA_OK) return nullptr;
  }
  if (!run_dir.empty()) {
    status = ipa_config_set_run_dir(cfg.get(), run_dir.c_str());
    if (status != IPA_OK) return nullptr;
  }
  if (have_seed) {
    status = ipa_config_set_seed(cfg.get(), seed);
    if (status != IPA_OK) return nullptr;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("ipanerf ") + ipa_version() +
               " - illusory poisoning attacks on neural radiance fields"};
  app.require_subcommand(1);

  std::string config_path, run_dir;
  std::vector<std::string> sets;
  uint64_t seed = 0;
  bool have_seed = false;
  app.add_option("--config", config_path, "experiment config JSON")->required();
  app.add_option("--set", sets, "override a config key, e.g. --set schedule.epsilon=16");
  app.add_option("--run-dir", run_dir, "output run directory (overrides the config)");
  auto* seed_opt = app.add_option("--seed", seed, "seed override");

  auto* train_clean = app.add_subcommand("train-clean", "train the clean baseline model");

  auto* attack = app.add_subcommand("attack", "run the poisoning attack");
  std::string clean_ckpt;
  attack->add_option("--clean-ckpt", clean_ckpt,
                     "clean checkpoint (required with the angle constraint)");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a finished attack run");

  auto* render = app.add_subcommand("render", "render one view from a checkpoint");
  std::string render_ckpt, out_png;
  int view_index = -1;
  std::string spherical;
  render->add_option("--checkpoint", render_ckpt, "model checkpoint")->required();
  render->add_option("--out", out_png, "output PNG path")->required();
  render->add_option("--view-index", view_index, "dataset view index");
  render->add_option("--spherical", spherical, "radius,theta_deg,phi_deg");

  auto* ablate = app.add_subcommand("ablate", "sweep one schedule axis");
  std::string sweep;
  ablate->add_option("--sweep", sweep, "epsilon=8,16,32 or angles=13+15,9+15")->required();

  CLI11_PARSE(app, argc, argv);
  have_seed = seed_opt->count() > 0;

  ipa_status status = IPA_OK;
  ConfigPtr cfg = open_config(config_path, sets, run_dir, have_seed, seed, status);
  if (!cfg) return fail(status);

  if (app.got_subcommand(train_clean)) {
    char ckpt[4096] = {0};
    status = ipa_run_train_clean(cfg.get(), ckpt, sizeof(ckpt));
    if (status != IPA_OK) return fail(status);
    std::printf("clean checkpoint: %s\n", ckpt);
  } else if (app.got_subcommand(attack)) {
    status = ipa_run_attack(cfg.get(), clean_ckpt.empty() ? nullptr : clean_ckpt.c_str());
    if (status != IPA_OK) return fail(status);
    std::printf("attack finished\n");
  } else if (app.got_subcommand(evaluate)) {
    char dir[4096] = {0};
    status = ipa_config_get_run_dir(cfg.get(), dir, sizeof(dir));
    if (status != IPA_OK) return fail(status);
    status = ipa_run_evaluate(dir);
    if (status != IPA_OK) return fail(status);
    std::printf("report written under %s/eval\n", dir);
  } else if (app.got_subcommand(render)) {
    if ((view_index >= 0) == !spherical.empty()) {
      std::fprintf(stderr, "error: render needs exactly one of --view-index or --spherical\n");
      return int(IPA_ERROR_ARGUMENT);
    }
    std::string spec = view_index >= 0 ? "index:" + std::to_string(view_index) : "spherical:" + spherical;
    status = ipa_run_render(cfg.get(), render_ckpt.c_str(), spec.c_str(), out_png.c_str());
    if (status != IPA_OK) return fail(status);
    std::printf("wrote %s\n", out_png.c_str());
  } else if (app.got_subcommand(ablate)) {
    status = ipa_run_ablate(cfg.get(), sweep.c_str());
    if (status != IPA_OK) return fail(status);
    std::printf("sweep summary written\n");
  }
  return 0;
}
