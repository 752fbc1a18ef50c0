#include "config.hpp"

#include <sys/utsname.h>

#include <cstdlib>
#include <set>

#include "errors.hpp"
#include "fsio.hpp"
#include "version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ipanerf {

namespace {

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      fail_argument("config: unknown key \"" + where + it.key() + "\"");
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail_argument(std::string("config: bad value for \"") + key + "\"");
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& doc, bool check_paths) {
  if (!doc.is_object()) fail_argument("config: top level must be a JSON object");
  check_keys(doc, "", {"name", "seed", "run_dir", "scene", "model", "render", "optimizer", "clean",
                       "target", "schedule"});

  ExperimentConfig cfg;
  cfg.name = get_or<std::string>(doc, "name", cfg.name);
  cfg.seed = get_or<uint64_t>(doc, "seed", cfg.seed);
  cfg.run_dir = get_or<std::string>(doc, "run_dir", cfg.run_dir.string());

  if (doc.contains("scene")) {
    const json& s = doc.at("scene");
    check_keys(s, "scene.", {"type", "root", "downsample", "resolution", "n_train", "n_test", "n_val",
                             "radius", "camera_angle_x", "near", "far"});
    std::string type = get_or<std::string>(s, "type", "toy");
    if (type == "toy") {
      cfg.scene.kind = SceneConfig::Kind::toy;
      cfg.scene.toy.resolution = get_or<int>(s, "resolution", cfg.scene.toy.resolution);
      cfg.scene.toy.n_train = get_or<int>(s, "n_train", cfg.scene.toy.n_train);
      cfg.scene.toy.n_test = get_or<int>(s, "n_test", cfg.scene.toy.n_test);
      cfg.scene.toy.n_val = get_or<int>(s, "n_val", cfg.scene.toy.n_val);
      cfg.scene.toy.radius = get_or<double>(s, "radius", cfg.scene.toy.radius);
      cfg.scene.toy.camera_angle_x = get_or<double>(s, "camera_angle_x", cfg.scene.toy.camera_angle_x);
    } else if (type == "blender") {
      cfg.scene.kind = SceneConfig::Kind::blender;
      if (!s.contains("root")) fail_argument("config: blender scene requires \"root\"");
      cfg.scene.blender_root = s.at("root").get<std::string>();
      cfg.scene.downsample = get_or<int>(s, "downsample", cfg.scene.downsample);
    } else {
      fail_argument("config: scene.type must be \"toy\" or \"blender\"");
    }
    cfg.scene.near = get_or<double>(s, "near", cfg.scene.near);
    cfg.scene.far = get_or<double>(s, "far", cfg.scene.far);
  }
  cfg.scene.toy.near = cfg.scene.near;
  cfg.scene.toy.far = cfg.scene.far;
  cfg.scene.toy.seed = cfg.seed;

  if (doc.contains("model")) {
    const json& m = doc.at("model");
    check_keys(m, "model.",
               {"depth", "width", "skip_layer", "n_freq_position", "n_freq_direction", "include_input"});
    cfg.model.depth = get_or<int>(m, "depth", cfg.model.depth);
    cfg.model.width = get_or<int>(m, "width", cfg.model.width);
    cfg.model.skip_layer = get_or<int>(m, "skip_layer", cfg.model.skip_layer);
    cfg.model.encoding.n_freq_position = get_or<int>(m, "n_freq_position", cfg.model.encoding.n_freq_position);
    cfg.model.encoding.n_freq_direction =
        get_or<int>(m, "n_freq_direction", cfg.model.encoding.n_freq_direction);
    cfg.model.encoding.include_input = get_or<bool>(m, "include_input", cfg.model.encoding.include_input);
  }

  if (doc.contains("render")) {
    const json& r = doc.at("render");
    check_keys(r, "render.", {"n_samples", "chunk"});
    cfg.render.n_samples = get_or<int>(r, "n_samples", cfg.render.n_samples);
    cfg.render.chunk = get_or<int>(r, "chunk", cfg.render.chunk);
  }

  if (doc.contains("optimizer")) {
    const json& o = doc.at("optimizer");
    check_keys(o, "optimizer.", {"learning_rate", "lr_decay_rate", "lr_decay_steps"});
    cfg.optimizer.learning_rate = get_or<double>(o, "learning_rate", cfg.optimizer.learning_rate);
    cfg.optimizer.lr_decay_rate = get_or<double>(o, "lr_decay_rate", cfg.optimizer.lr_decay_rate);
    cfg.optimizer.lr_decay_steps = get_or<long>(o, "lr_decay_steps", cfg.optimizer.lr_decay_steps);
  }

  if (doc.contains("clean")) {
    const json& c = doc.at("clean");
    check_keys(c, "clean.", {"iterations"});
    cfg.clean_iterations = get_or<long>(c, "iterations", cfg.clean_iterations);
  }

  if (doc.contains("target")) {
    const json& t = doc.at("target");
    check_keys(t, "target.", {"image", "backdoor_view_index"});
    cfg.target.image = get_or<std::string>(t, "image", cfg.target.image);
    cfg.target.backdoor_view_index = get_or<int>(t, "backdoor_view_index", cfg.target.backdoor_view_index);
  }

  if (doc.contains("schedule")) {
    const json& s = doc.at("schedule");
    check_keys(s, "schedule.",
               {"total_iterations", "iterations_per_epoch", "attack_iterations", "render_iterations",
                "epsilon", "angle_constraint", "constraint_angles", "rays_per_batch"});
    cfg.schedule.total_iterations = get_or<long>(s, "total_iterations", cfg.schedule.total_iterations);
    cfg.schedule.iterations_per_epoch =
        get_or<long>(s, "iterations_per_epoch", cfg.schedule.iterations_per_epoch);
    cfg.schedule.attack_iterations = get_or<int>(s, "attack_iterations", cfg.schedule.attack_iterations);
    cfg.schedule.render_iterations = get_or<int>(s, "render_iterations", cfg.schedule.render_iterations);
    cfg.schedule.epsilon = get_or<int>(s, "epsilon", cfg.schedule.epsilon);
    cfg.schedule.angle_constraint = get_or<bool>(s, "angle_constraint", cfg.schedule.angle_constraint);
    cfg.schedule.constraint_angles =
        get_or<std::vector<double>>(s, "constraint_angles", cfg.schedule.constraint_angles);
    cfg.schedule.rays_per_batch = get_or<int>(s, "rays_per_batch", cfg.schedule.rays_per_batch);
  }
  cfg.schedule.seed = cfg.seed;

  cfg.validate(check_paths);
  return cfg;
}

void ExperimentConfig::validate(bool check_paths) const {
  model.validate();
  schedule.validate();
  require_argument(render.n_samples >= 2, "config: render.n_samples must be >= 2");
  require_argument(render.chunk >= 1, "config: render.chunk must be >= 1");
  require_argument(optimizer.learning_rate > 0.0, "config: learning_rate must be positive");
  require_argument(optimizer.lr_decay_steps > 0, "config: lr_decay_steps must be positive");
  require_argument(clean_iterations >= 0, "config: clean.iterations must be >= 0");
  require_argument(scene.near >= 0.0 && scene.near < scene.far, "config: need 0 <= near < far");
  require_argument(target.backdoor_view_index >= 0, "config: backdoor_view_index must be >= 0");
  if (check_paths) {
    if (scene.kind == SceneConfig::Kind::blender)
      require_argument(fs::exists(scene.blender_root),
                       "config: blender root does not exist: " + scene.blender_root.string());
    if (target.image.rfind("builtin:", 0) != 0)
      require_argument(fs::exists(target.image), "config: target image does not exist: " + target.image);
  }
}

ExperimentConfig load_config(const fs::path& path, bool check_paths) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail_argument("config " + path.string() + ": " + e.what());
  } catch (const Error&) {
    fail_argument("config file not found: " + path.string());
  }
  return config_from_json(doc, check_paths);
}

json config_to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["name"] = cfg.name;
  doc["seed"] = cfg.seed;
  doc["run_dir"] = cfg.run_dir.string();
  json s;
  if (cfg.scene.kind == SceneConfig::Kind::toy) {
    s["type"] = "toy";
    s["resolution"] = cfg.scene.toy.resolution;
    s["n_train"] = cfg.scene.toy.n_train;
    s["n_test"] = cfg.scene.toy.n_test;
    s["n_val"] = cfg.scene.toy.n_val;
    s["radius"] = cfg.scene.toy.radius;
    s["camera_angle_x"] = cfg.scene.toy.camera_angle_x;
  } else {
    s["type"] = "blender";
    s["root"] = cfg.scene.blender_root.string();
    s["downsample"] = cfg.scene.downsample;
  }
  s["near"] = cfg.scene.near;
  s["far"] = cfg.scene.far;
  doc["scene"] = s;
  doc["model"] = {{"depth", cfg.model.depth},
                  {"width", cfg.model.width},
                  {"skip_layer", cfg.model.skip_layer},
                  {"n_freq_position", cfg.model.encoding.n_freq_position},
                  {"n_freq_direction", cfg.model.encoding.n_freq_direction},
                  {"include_input", cfg.model.encoding.include_input}};
  doc["render"] = {{"n_samples", cfg.render.n_samples}, {"chunk", cfg.render.chunk}};
  doc["optimizer"] = {{"learning_rate", cfg.optimizer.learning_rate},
                      {"lr_decay_rate", cfg.optimizer.lr_decay_rate},
                      {"lr_decay_steps", cfg.optimizer.lr_decay_steps}};
  doc["clean"] = {{"iterations", cfg.clean_iterations}};
  doc["target"] = {{"image", cfg.target.image},
                   {"backdoor_view_index", cfg.target.backdoor_view_index}};
  doc["schedule"] = {{"total_iterations", cfg.schedule.total_iterations},
                     {"iterations_per_epoch", cfg.schedule.iterations_per_epoch},
                     {"attack_iterations", cfg.schedule.attack_iterations},
                     {"render_iterations", cfg.schedule.render_iterations},
                     {"epsilon", cfg.schedule.epsilon},
                     {"angle_constraint", cfg.schedule.angle_constraint},
                     {"constraint_angles", cfg.schedule.constraint_angles},
                     {"rays_per_batch", cfg.schedule.rays_per_batch}};
  return doc;
}

void apply_override(json& doc, const std::string& assignment) {
  auto eq = assignment.find('=');
  require_argument(eq != std::string::npos && eq > 0, "override must look like key.path=value: " + assignment);
  std::string key = assignment.substr(0, eq);
  std::string value = assignment.substr(eq + 1);

  json* node = &doc;
  size_t start = 0;
  while (true) {
    size_t dot = key.find('.', start);
    std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    require_argument(!part.empty(), "override has an empty key segment: " + assignment);
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
      (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

ViewDataset build_scene(const ExperimentConfig& cfg) {
  ViewDataset ds;
  if (cfg.scene.kind == SceneConfig::Kind::toy) {
    ds = make_toy_scene(cfg.scene.toy);
  } else {
    ds = load_blender_dataset(cfg.scene.blender_root, cfg.scene.downsample);
  }
  ds.near = cfg.scene.near;
  ds.far = cfg.scene.far;
  return ds;
}

IllusoryTarget resolve_target(const ExperimentConfig& cfg, const ViewDataset& ds) {
  IllusoryTarget target;
  target.backdoor_view_index = cfg.target.backdoor_view_index;
  require_argument(target.backdoor_view_index < ds.count(Split::train),
                   "target: backdoor_view_index outside the train split");
  if (cfg.target.image.rfind("builtin:", 0) == 0) {
    target.image = make_target_image(cfg.target.image.substr(8), ds.intrinsics.width, ds.intrinsics.height);
  } else {
    target.image = load_png(cfg.target.image);
    require_argument(target.image.width == ds.intrinsics.width && target.image.height == ds.intrinsics.height,
                     "target: image resolution must match the dataset resolution");
  }
  return target;
}

std::string platform_fingerprint() {
  struct utsname u {};
  if (uname(&u) != 0) return "unknown";
  return std::string(u.sysname) + " " + u.release + " " + u.machine;
}

void manifest_init(const fs::path& run_dir, const ExperimentConfig& cfg) {
  fs::create_directories(run_dir);
  fs::path path = run_dir / "manifest.json";
  if (fs::exists(path)) return;  // append-only after the first write
  json doc;
  doc["config"] = config_to_json(cfg);
  doc["version"] = kVersion;
  doc["platform"] = platform_fingerprint();
  doc["schedule_hash"] = schedule_hash(cfg.schedule);
  doc["stages"] = json::array();
  atomic_write(path, doc.dump(2) + "\n");
}

void manifest_add_stage(const fs::path& run_dir, const std::string& stage, double seconds) {
  fs::path path = run_dir / "manifest.json";
  json doc = manifest_read(run_dir);
  doc["stages"].push_back({{"stage", stage}, {"seconds", seconds}});
  atomic_write(path, doc.dump(2) + "\n");
}

json manifest_read(const fs::path& run_dir) {
  fs::path path = run_dir / "manifest.json";
  if (!fs::exists(path)) fail_incomplete("missing manifest: " + path.string());
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail_format(path.string() + ": " + e.what());
  }
}

void ensure_device_supported() {
  const char* dev = std::getenv("IPANERF_DEVICE");
  if (!dev || std::string(dev).empty() || std::string(dev) == "cpu") return;
  fail_argument(std::string("IPANERF_DEVICE=") + dev +
                " requests an accelerator, but this build only supports cpu");
}

}  // namespace ipanerf
