#include "ipanerf/ipanerf.h"

#include <cstdio>
#include <cstring>
#include <string>

#include "checkpoint.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "experiment.hpp"
#include "fsio.hpp"
#include "metrics.hpp"
#include "version.hpp"

using namespace ipanerf;

struct ipa_config {
  nlohmann::json doc;

  ExperimentConfig resolve(bool check_paths = true) const { return config_from_json(doc, check_paths); }
};

struct ipa_dataset {
  ViewDataset ds;
};

struct ipa_model {
  NerfModel model;
  RenderConfig render;
};

namespace {

thread_local std::string g_last_error = "";

ipa_status status_of(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::argument:
    case ErrorKind::format:
      return IPA_ERROR_ARGUMENT;
    case ErrorKind::runtime:
      return IPA_ERROR_RUNTIME;
    case ErrorKind::incomplete:
      return IPA_ERROR_INCOMPLETE;
  }
  return IPA_ERROR_RUNTIME;
}

template <typename Fn>
ipa_status guarded(Fn&& fn) {
  try {
    fn();
    return IPA_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return IPA_ERROR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown failure";
    return IPA_ERROR_RUNTIME;
  }
}

ipa_status need(bool cond, const char* msg) {
  if (cond) return IPA_OK;
  g_last_error = msg;
  return IPA_ERROR_ARGUMENT;
}

}  // namespace

extern "C" {

const char* ipa_version(void) { return kVersion; }

const char* ipa_last_error(void) { return g_last_error.c_str(); }

ipa_status ipa_config_load(const char* path, ipa_config** out) {
  if (ipa_status s = need(path && out, "null argument"); s != IPA_OK) return s;
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      fail_argument(std::string("config ") + path + ": " + e.what());
    }
    config_from_json(doc, /*check_paths=*/false);  // surface schema errors now
    *out = new ipa_config{std::move(doc)};
  });
}

ipa_status ipa_config_set(ipa_config* cfg, const char* assignment) {
  if (ipa_status s = need(cfg && assignment, "null argument"); s != IPA_OK) return s;
  return guarded([&] {
    nlohmann::json doc = cfg->doc;
    apply_override(doc, assignment);
    config_from_json(doc, /*check_paths=*/false);
    cfg->doc = std::move(doc);
  });
}

ipa_status ipa_config_set_run_dir(ipa_config* cfg, const char* run_dir) {
  if (ipa_status s = need(cfg && run_dir, "null argument"); s != IPA_OK) return s;
  return guarded([&] { cfg->doc["run_dir"] = run_dir; });
}

ipa_status ipa_config_set_seed(ipa_config* cfg, uint64_t seed) {
  if (ipa_status s = need(cfg != nullptr, "null config"); s != IPA_OK) return s;
  return guarded([&] { cfg->doc["seed"] = seed; });
}

ipa_status ipa_config_get_run_dir(const ipa_config* cfg, char* buf, size_t cap) {
  if (ipa_status s = need(cfg && buf && cap > 0, "null argument"); s != IPA_OK) return s;
  return guarded([&] {
    std::string dir = cfg->resolve(/*check_paths=*/false).run_dir.string();
    std::strncpy(buf, dir.c_str(), cap - 1);
    buf[cap - 1] = '\0';
  });
}

void ipa_config_free(ipa_config* cfg) { delete cfg; }

ipa_status ipa_dataset_open(const ipa_config* cfg, ipa_dataset** out) {
  if (ipa_status s = need(cfg && out, "null argument"); s != IPA_OK) return s;
  return guarded([&] { *out = new ipa_dataset{build_scene(cfg->resolve())}; });
}

ipa_status ipa_dataset_load_blender(const char* root, int downsample, ipa_dataset** out) {
  if (ipa_status s = need(root && out, "null argument"); s != IPA_OK) return s;
  return guarded([&] { *out = new ipa_dataset{load_blender_dataset(root, downsample)}; });
}

ipa_status ipa_dataset_make_toy(uint64_t seed, int n_train, int n_test, int resolution,
                                ipa_dataset** out) {
  if (ipa_status s = need(out != nullptr, "null output"); s != IPA_OK) return s;
  return guarded([&] { *out = new ipa_dataset{make_toy_scene(seed, n_train, n_test, resolution)}; });
}

ipa_status ipa_dataset_counts(const ipa_dataset* ds, int* n_train, int* n_test, int* n_val, int* width,
                              int* height) {
  if (ipa_status s = need(ds != nullptr, "null dataset"); s != IPA_OK) return s;
  return guarded([&] {
    if (n_train) *n_train = ds->ds.count(Split::train);
    if (n_test) *n_test = ds->ds.count(Split::test);
    if (n_val) *n_val = ds->ds.count(Split::val);
    if (width) *width = ds->ds.intrinsics.width;
    if (height) *height = ds->ds.intrinsics.height;
  });
}

ipa_status ipa_dataset_save_blender(const ipa_dataset* ds, const char* dir) {
  if (ipa_status s = need(ds && dir, "null argument"); s != IPA_OK) return s;
  return guarded([&] { save_blender_dataset(ds->ds, dir); });
}

void ipa_dataset_free(ipa_dataset* ds) { delete ds; }

ipa_status ipa_model_load(const char* checkpoint_path, ipa_model** out) {
  if (ipa_status s = need(checkpoint_path && out, "null argument"); s != IPA_OK) return s;
  return guarded([&] { *out = new ipa_model{load_checkpoint(checkpoint_path).to_model(), RenderConfig{}}; });
}

ipa_status ipa_model_parameter_count(const ipa_model* model, uint64_t* out) {
  if (ipa_status s = need(model && out, "null argument"); s != IPA_OK) return s;
  *out = uint64_t(model->model.parameter_count());
  return IPA_OK;
}

ipa_status ipa_model_render_view(const ipa_model* model, const ipa_dataset* ds, int view_index,
                                 const char* out_png) {
  if (ipa_status s = need(model && ds && out_png, "null argument"); s != IPA_OK) return s;
  return guarded([&] {
    require_argument(view_index >= 0 && view_index < int(ds->ds.views.size()),
                     "view index outside the dataset");
    Image img = render_view(model->model, ds->ds.views[size_t(view_index)].pose, ds->ds.intrinsics,
                            ds->ds.near, ds->ds.far, model->render);
    save_png(img, out_png);
  });
}

void ipa_model_free(ipa_model* model) { delete model; }

ipa_status ipa_psnr_png(const char* png_a, const char* png_b, double* out) {
  if (ipa_status s = need(png_a && png_b && out, "null argument"); s != IPA_OK) return s;
  return guarded([&] { *out = psnr(load_png(png_a), load_png(png_b)); });
}

ipa_status ipa_ssim_png(const char* png_a, const char* png_b, double* out) {
  if (ipa_status s = need(png_a && png_b && out, "null argument"); s != IPA_OK) return s;
  return guarded([&] { *out = ssim(load_png(png_a), load_png(png_b)); });
}

void ipa_register_lpips(ipa_lpips_fn fn, void* user) {
  if (!fn) {
    clear_lpips_plugin();
    return;
  }
  register_lpips_plugin([fn, user](const Image& a, const Image& b) {
    return fn(a.data.data(), b.data.data(), a.width, a.height, user);
  });
}

ipa_status ipa_run_train_clean(const ipa_config* cfg, char* checkpoint_path_out, size_t cap) {
  if (ipa_status s = need(cfg != nullptr, "null config"); s != IPA_OK) return s;
  return guarded([&] {
    std::filesystem::path p = cmd_train_clean(cfg->resolve());
    if (checkpoint_path_out && cap > 0) {
      std::string str = p.string();
      std::strncpy(checkpoint_path_out, str.c_str(), cap - 1);
      checkpoint_path_out[cap - 1] = '\0';
    }
  });
}

ipa_status ipa_run_attack(const ipa_config* cfg, const char* clean_checkpoint) {
  if (ipa_status s = need(cfg != nullptr, "null config"); s != IPA_OK) return s;
  return guarded([&] {
    std::optional<std::filesystem::path> clean;
    if (clean_checkpoint && *clean_checkpoint) clean = clean_checkpoint;
    cmd_attack(cfg->resolve(), clean);
  });
}

ipa_status ipa_run_evaluate(const char* run_dir) {
  if (ipa_status s = need(run_dir != nullptr, "null run_dir"); s != IPA_OK) return s;
  return guarded([&] { cmd_evaluate(run_dir); });
}

ipa_status ipa_run_render(const ipa_config* cfg, const char* checkpoint, const char* pose_spec,
                          const char* out_png) {
  if (ipa_status s = need(cfg && checkpoint && pose_spec && out_png, "null argument"); s != IPA_OK)
    return s;
  return guarded([&] {
    PoseSpec pose;
    std::string spec(pose_spec);
    if (spec.rfind("index:", 0) == 0) {
      try {
        pose.view_index = std::stoi(spec.substr(6));
      } catch (...) {
        fail_argument("render: bad pose spec: " + spec);
      }
    } else if (spec.rfind("spherical:", 0) == 0) {
      SphericalPose s;
      if (std::sscanf(spec.c_str() + 10, "%lf,%lf,%lf", &s.radius, &s.theta, &s.phi) != 3)
        fail_argument("render: bad pose spec: " + spec);
      s.theta = deg2rad(s.theta);
      s.phi = deg2rad(s.phi);
      pose.spherical = s;
    } else {
      fail_argument("render: pose spec must start with index: or spherical:, got " + spec);
    }
    cmd_render(cfg->resolve(), checkpoint, pose, out_png);
  });
}

ipa_status ipa_run_ablate(const ipa_config* cfg, const char* sweep_spec) {
  if (ipa_status s = need(cfg && sweep_spec, "null argument"); s != IPA_OK) return s;
  return guarded([&] { cmd_ablate(cfg->resolve(), SweepSpec::parse(sweep_spec)); });
}

}  // extern "C"
