#include "experiment.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <map>
#include <sstream>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "fsio.hpp"
#include "metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ipanerf {

namespace {

class StageTimer {
 public:
  StageTimer(fs::path run_dir, std::string stage)
      : run_dir_(std::move(run_dir)), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    try {
      manifest_add_stage(run_dir_, stage_, s);
    } catch (...) {
    }
  }

 private:
  fs::path run_dir_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::vector<const Image*> dataset_images(const ViewDataset& ds) {
  std::vector<const Image*> images(ds.views.size());
  for (size_t i = 0; i < ds.views.size(); ++i) images[i] = &ds.views[i].image;
  return images;
}

// Mean PSNR/SSIM of model renders against dataset images over a split.
json split_summary(const NerfModel& model, const ViewDataset& ds, Split split, const RenderConfig& rc) {
  double sp = 0.0, ss = 0.0;
  int n = 0;
  for (int id : ds.split_indices(split)) {
    Image r = render_view(model, ds.views[size_t(id)].pose, ds.intrinsics, ds.near, ds.far, rc);
    sp += psnr(r, ds.views[size_t(id)].image);
    ss += ssim(r, ds.views[size_t(id)].image);
    ++n;
  }
  json out;
  out["views"] = n;
  out["psnr"] = n > 0 ? sp / n : 0.0;
  out["ssim"] = n > 0 ? ss / n : 0.0;
  return out;
}

}  // namespace

fs::path cmd_train_clean(const ExperimentConfig& cfg) {
  ensure_device_supported();
  manifest_init(cfg.run_dir, cfg);
  StageTimer timer(cfg.run_dir, "train-clean");

  ViewDataset ds = build_scene(cfg);
  NerfModel model(cfg.model);
  model.init_parameters(cfg.seed);
  AdamState opt_state;
  opt_state.reset(model.parameter_count());

  const size_t pixels = size_t(ds.intrinsics.width) * ds.intrinsics.height;
  const int rpb = cfg.schedule.effective_rays_per_batch(size_t(ds.count(Split::train)) * pixels);
  RngStream rng(cfg.seed, "victim");

  try {
    train_iterations(model, opt_state, cfg.optimizer, ds, dataset_images(ds),
                     ds.split_indices(Split::train), cfg.clean_iterations, rpb, cfg.render, rng);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage train-clean: ") + e.what());
  }

  fs::path ckpt_path = cfg.run_dir / "clean" / "checkpoint.ckpt";
  save_checkpoint(Checkpoint::from_model(model, opt_state, cfg.clean_iterations, cfg.seed), ckpt_path);

  json baseline;
  baseline["iterations"] = cfg.clean_iterations;
  baseline["train"] = split_summary(model, ds, Split::train, cfg.render);
  baseline["test"] = split_summary(model, ds, Split::test, cfg.render);
  atomic_write(cfg.run_dir / "clean" / "baseline.json", baseline.dump(2) + "\n");
  return ckpt_path;
}

fs::path cmd_attack(const ExperimentConfig& cfg, const std::optional<fs::path>& clean_checkpoint) {
  ensure_device_supported();
  manifest_init(cfg.run_dir, cfg);
  StageTimer timer(cfg.run_dir, "attack");

  ViewDataset ds = build_scene(cfg);
  IllusoryTarget target = resolve_target(cfg, ds);

  std::optional<NerfModel> clean_model;
  if (clean_checkpoint) {
    clean_model = load_checkpoint(*clean_checkpoint).to_model();
  } else if (cfg.schedule.angle_constraint) {
    fail_incomplete("attack: the angle constraint needs a clean checkpoint for ground-truth renders");
  }

  IpaOptions opt;
  opt.arch = cfg.model;
  opt.optimizer = cfg.optimizer;
  opt.render = cfg.render;
  opt.clean_model = clean_model ? &*clean_model : nullptr;

  std::ostringstream trace_csv;
  trace_csv << "epoch,inner_loss,victim_loss,backdoor_psnr,train_psnr\n";
  opt.on_epoch = [&](const EpochTrace& t, const PoisonState&) {
    trace_csv << t.epoch << "," << fmt_num(t.inner_loss) << "," << fmt_num(t.victim_loss) << ","
              << fmt_num(t.backdoor_psnr) << "," << fmt_num(t.train_psnr) << "\n";
  };

  IpaResult result = run_ipa(ds, target, cfg.schedule, opt);

  fs::path attack_dir = cfg.run_dir / "attack";
  const std::string hash = schedule_hash(cfg.schedule);
  atomic_write(attack_dir / "trace.csv", trace_csv.str());
  save_checkpoint(Checkpoint::from_model(result.victim, result.victim_optimizer,
                                         cfg.schedule.total_iterations, cfg.seed),
                  attack_dir / "checkpoints" / "victim.ckpt");
  save_checkpoint(Checkpoint::from_model(result.fprime_last, AdamState{}, cfg.schedule.total_iterations,
                                         cfg.seed),
                  attack_dir / "checkpoints" / "fprime_last.ckpt");
  export_poison(result.poison, cfg.schedule.epsilon, hash, attack_dir / "poisoned");
  if (cfg.schedule.angle_constraint) save_constraint_set(result.constraints, attack_dir / "constraints");

  json stats;
  stats["victim_updates"] = result.victim_updates;
  stats["inner_updates"] = result.inner_updates;
  stats["constraint_nonincrease_fraction"] = result.constraint_nonincrease_fraction;
  stats["schedule_hash"] = hash;
  atomic_write(attack_dir / "stats.json", stats.dump(2) + "\n");
  return cfg.run_dir;
}

void cmd_evaluate(const fs::path& run_dir) {
  ensure_device_supported();
  json manifest = manifest_read(run_dir);
  ExperimentConfig cfg = config_from_json(manifest.at("config"), /*check_paths=*/true);

  std::vector<std::string> missing;
  fs::path victim_path = run_dir / "attack" / "checkpoints" / "victim.ckpt";
  if (!fs::exists(victim_path)) missing.push_back(victim_path.string());
  fs::path constraints_dir = run_dir / "attack" / "constraints";
  if (cfg.schedule.angle_constraint && !fs::exists(constraints_dir / "constraints.json"))
    missing.push_back((constraints_dir / "constraints.json").string());
  if (!missing.empty()) {
    std::string msg = "evaluate: run directory is incomplete, missing:";
    for (const std::string& m : missing) msg += "\n  " + m;
    fail_incomplete(msg);
  }

  StageTimer timer(run_dir, "evaluate");
  ViewDataset ds = build_scene(cfg);
  IllusoryTarget target = resolve_target(cfg, ds);
  NerfModel victim = load_checkpoint(victim_path).to_model();

  ConstraintViewSet constraints;
  if (cfg.schedule.angle_constraint) {
    constraints = load_constraint_set(constraints_dir);
    require(constraints.has_images(), ErrorKind::argument,
            "evaluate: constraint set has no ground-truth images");
  }

  PartitionReport report = evaluate_partitions(
      victim, ds, target, cfg.schedule.angle_constraint ? &constraints : nullptr, cfg.render);
  report.schedule_hash = manifest.at("schedule_hash").get<std::string>();
  write_report_csv(report, run_dir / "eval" / "report.csv");
  write_report_table(report, run_dir / "eval" / "report.txt");
}

void cmd_render(const ExperimentConfig& cfg, const fs::path& checkpoint, const PoseSpec& pose,
                const fs::path& out_png) {
  ensure_device_supported();
  require_argument(bool(pose.view_index) != bool(pose.spherical),
                   "render: give exactly one of a view index or spherical coordinates");

  NerfModel model = load_checkpoint(checkpoint).to_model();
  ViewDataset ds = build_scene(cfg);

  CameraPose cam;
  if (pose.view_index) {
    require_argument(*pose.view_index >= 0 && *pose.view_index < int(ds.views.size()),
                     "render: view index " + std::to_string(*pose.view_index) + " outside 0.." +
                         std::to_string(ds.views.size() - 1));
    cam = ds.views[size_t(*pose.view_index)].pose;
  } else {
    cam = spherical_to_pose(*pose.spherical);
  }
  save_png(render_view(model, cam, ds.intrinsics, ds.near, ds.far, cfg.render), out_png);
}

SweepSpec SweepSpec::parse(const std::string& text) {
  auto eq = text.find('=');
  require_argument(eq != std::string::npos, "sweep spec must look like axis=values: " + text);
  std::string axis = text.substr(0, eq);
  std::string values = text.substr(eq + 1);
  require_argument(!values.empty(), "sweep spec has no values: " + text);

  SweepSpec spec;
  std::stringstream ss(values);
  std::string item;
  if (axis == "epsilon") {
    spec.axis = Axis::epsilon;
    while (std::getline(ss, item, ',')) {
      try {
        spec.epsilons.push_back(std::stoi(item));
      } catch (...) {
        fail_argument("sweep: bad epsilon value: " + item);
      }
    }
    require_argument(!spec.epsilons.empty(), "sweep: empty epsilon list");
  } else if (axis == "angles") {
    spec.axis = Axis::angles;
    while (std::getline(ss, item, ',')) {
      std::vector<double> set;
      std::stringstream inner(item);
      std::string a;
      while (std::getline(inner, a, '+')) {
        try {
          set.push_back(std::stod(a));
        } catch (...) {
          fail_argument("sweep: bad angle value: " + a);
        }
      }
      require_argument(!set.empty(), "sweep: empty angle set in " + text);
      spec.angle_sets.push_back(set);
    }
    require_argument(!spec.angle_sets.empty(), "sweep: empty angle list");
  } else {
    fail_argument("sweep: axis must be epsilon or angles, got " + axis);
  }
  return spec;
}

void cmd_ablate(const ExperimentConfig& cfg, const SweepSpec& sweep) {
  ensure_device_supported();
  manifest_init(cfg.run_dir, cfg);
  StageTimer timer(cfg.run_dir, "ablate");

  struct Point {
    std::string label;
    ExperimentConfig cfg;
  };
  std::vector<Point> points;
  if (sweep.axis == SweepSpec::Axis::epsilon) {
    for (int eps : sweep.epsilons) {
      Point p{"epsilon_" + std::to_string(eps), cfg};
      p.cfg.schedule.epsilon = eps;
      points.push_back(std::move(p));
    }
  } else {
    for (const auto& set : sweep.angle_sets) {
      std::string label = "angles";
      for (double a : set) label += "_" + std::to_string(int(a));
      Point p{label, cfg};
      p.cfg.schedule.angle_constraint = true;
      p.cfg.schedule.constraint_angles = set;
      points.push_back(std::move(p));
    }
  }

  bool needs_clean = false;
  for (const Point& p : points) needs_clean |= p.cfg.schedule.angle_constraint;
  std::optional<fs::path> clean_ckpt;
  if (needs_clean) {
    fs::path existing = cfg.run_dir / "clean" / "checkpoint.ckpt";
    clean_ckpt = fs::exists(existing) ? existing : cmd_train_clean(cfg);
  }

  std::ostringstream csv, table;
  csv << "point,partition,psnr,ssim,lpips,error\n";
  table << "sweep summary (" << (sweep.axis == SweepSpec::Axis::epsilon ? "epsilon" : "angles") << ")\n";
  for (Point& p : points) {
    p.cfg.run_dir = cfg.run_dir / ("sweep_" + p.label);
    try {
      cmd_attack(p.cfg, clean_ckpt);
      cmd_evaluate(p.cfg.run_dir);
      // re-derive the partition means from the per-run report
      std::string report = read_file(p.cfg.run_dir / "eval" / "report.csv");
      std::stringstream lines(report);
      std::string line;
      std::getline(lines, line);  // header
      std::map<std::string, std::array<double, 3>> sums;
      std::map<std::string, std::array<int, 2>> counts;  // views, lpips-present
      while (std::getline(lines, line)) {
        std::stringstream cells(line);
        std::string part, view, ps, ss_, lp;
        std::getline(cells, part, ',');
        std::getline(cells, view, ',');
        std::getline(cells, ps, ',');
        std::getline(cells, ss_, ',');
        std::getline(cells, lp, ',');
        sums[part][0] += std::stod(ps);
        sums[part][1] += std::stod(ss_);
        if (!lp.empty()) {
          sums[part][2] += std::stod(lp);
          counts[part][1] += 1;
        }
        counts[part][0] += 1;
      }
      for (const auto& [part, s] : sums) {
        int n = counts[part][0];
        bool has_lpips = counts[part][1] == n && n > 0;
        csv << p.label << "," << part << "," << fmt_num(s[0] / n) << "," << fmt_num(s[1] / n) << ","
            << (has_lpips ? fmt_num(s[2] / n) : std::string()) << ",\n";
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-24s %-14s PSNR %8.4f  SSIM %7.4f\n", p.label.c_str(),
                      part.c_str(), s[0] / n, s[1] / n);
        table << buf;
      }
    } catch (const Error& e) {
      csv << p.label << ",,,,," << e.what() << "\n";
      table << p.label << ": FAILED: " << e.what() << "\n";
    }
  }
  atomic_write(cfg.run_dir / "summary.csv", csv.str());
  atomic_write(cfg.run_dir / "summary.txt", table.str());
}

}  // namespace ipanerf
