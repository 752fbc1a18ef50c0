#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "fsio.hpp"
#include "rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ipanerf {

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::val: return "val";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  if (name == "val") return Split::val;
  fail_argument("unknown split: " + name);
}

std::vector<int> ViewDataset::split_indices(Split s) const {
  std::vector<int> out;
  for (int i = 0; i < int(views.size()); ++i)
    if (views[i].split == s) out.push_back(i);
  return out;
}

void ViewDataset::validate() const {
  intrinsics.validate();
  require_argument(near >= 0.0 && near < far, "dataset: need 0 <= near < far");
  for (const View& v : views) {
    require_argument(v.image.width == intrinsics.width && v.image.height == intrinsics.height,
                     "dataset: view image size does not match intrinsics");
    v.pose.validate();
    for (double x : v.image.data)
      require_argument(x >= 0.0 && x <= 1.0, "dataset: pixel value outside [0,1]");
  }
}

// ---------------------------------------------------------------------------
// Blender-synthetic format

static CameraPose parse_transform(const json& jm, const std::string& where) {
  if (!jm.is_array() || jm.size() != 4) fail_format(where + ": transform_matrix must be 4x4");
  CameraPose pose;
  for (int r = 0; r < 4; ++r) {
    const json& row = jm[r];
    if (!row.is_array() || row.size() != 4) fail_format(where + ": transform_matrix must be 4x4");
    for (int c = 0; c < 4; ++c) pose.transform(r, c) = row[c].get<double>();
  }
  return pose;
}

ViewDataset load_blender_dataset(const fs::path& root, int downsample_factor) {
  require_argument(downsample_factor >= 1, "downsample factor must be >= 1");

  ViewDataset ds;
  ds.scene_name = root.filename().string();

  double camera_angle = 0.0;
  bool have_angle = false;

  for (Split split : {Split::train, Split::test, Split::val}) {
    fs::path tf = root / (std::string("transforms_") + split_name(split) + ".json");
    if (!fs::exists(tf)) fail_format("missing transforms file: " + tf.string());
    json doc;
    try {
      doc = json::parse(read_file(tf));
    } catch (const json::exception& e) {
      fail_format(tf.string() + ": " + e.what());
    }
    if (!doc.contains("camera_angle_x")) fail_format(tf.string() + ": missing camera_angle_x");
    double angle = doc["camera_angle_x"].get<double>();
    if (!have_angle) {
      camera_angle = angle;
      have_angle = true;
    } else if (std::abs(angle - camera_angle) > 1e-12) {
      fail_format(tf.string() + ": camera_angle_x differs between splits");
    }
    if (!doc.contains("frames") || !doc["frames"].is_array())
      fail_format(tf.string() + ": missing frames array");

    for (const json& frame : doc["frames"]) {
      if (!frame.contains("file_path")) fail_format(tf.string() + ": frame without file_path");
      std::string rel = frame["file_path"].get<std::string>();
      if (rel.rfind("./", 0) == 0) rel = rel.substr(2);
      fs::path img_path = root / (rel + ".png");
      if (!fs::exists(img_path)) fail_format("missing image file: " + img_path.string());

      View view;
      view.name = rel;
      view.split = split;
      view.pose = parse_transform(frame.at("transform_matrix"), tf.string());
      view.pose.validate();
      view.image = downsample(load_png(img_path), downsample_factor);
      ds.views.push_back(std::move(view));
    }
  }

  require(!ds.views.empty(), ErrorKind::format, "dataset has no views: " + root.string());
  const Image& first = ds.views.front().image;
  for (const View& v : ds.views)
    if (!v.image.same_shape(first)) fail_format("dataset images disagree on resolution");

  ds.intrinsics = CameraIntrinsics::from_angle(first.width * downsample_factor,
                                               first.height * downsample_factor, camera_angle)
                      .downsampled(downsample_factor);
  ds.validate();
  return ds;
}

static json pose_to_json(const CameraPose& p) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) row.push_back(p.transform(r, c));
    rows.push_back(row);
  }
  return rows;
}

void save_blender_dataset(const ViewDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  for (Split split : {Split::train, Split::test, Split::val}) {
    json doc;
    doc["camera_angle_x"] = ds.intrinsics.camera_angle_x;
    json frames = json::array();
    int i = 0;
    for (const View& v : ds.views) {
      if (v.split != split) continue;
      std::string rel = std::string(split_name(split)) + "/r_" + std::to_string(i);
      save_png(v.image, dir / (rel + ".png"));
      json frame;
      frame["file_path"] = "./" + rel;
      frame["transform_matrix"] = pose_to_json(v.pose);
      frames.push_back(frame);
      ++i;
    }
    doc["frames"] = frames;
    atomic_write(dir / (std::string("transforms_") + split_name(split) + ".json"), doc.dump(2) + "\n");
  }
}

// ---------------------------------------------------------------------------
// Procedural toy scene

namespace {

struct Sphere {
  Eigen::Vector3d center;
  double radius;
  Eigen::Vector3d albedo;
  bool checkered;
};

const Sphere kToySpheres[] = {
    {{0.0, 0.0, 0.0}, 0.70, {0.85, 0.25, 0.20}, true},
    {{0.80, 0.50, -0.10}, 0.35, {0.20, 0.45, 0.85}, false},
    {{-0.70, 0.60, 0.20}, 0.30, {0.25, 0.75, 0.30}, false},
    {{0.10, -0.80, 0.35}, 0.28, {0.95, 0.80, 0.20}, false},
};

Eigen::Vector3d shade_toy(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  const Eigen::Vector3d light = Eigen::Vector3d(0.4, 0.3, 0.85).normalized();
  double best_t = std::numeric_limits<double>::infinity();
  const Sphere* hit = nullptr;
  for (const Sphere& s : kToySpheres) {
    Eigen::Vector3d oc = origin - s.center;
    double b = oc.dot(dir);
    double c = oc.squaredNorm() - s.radius * s.radius;
    double disc = b * b - c;
    if (disc < 0.0) continue;
    double t = -b - std::sqrt(disc);
    if (t > 1e-6 && t < best_t) {
      best_t = t;
      hit = &s;
    }
  }
  if (!hit) return {1.0, 1.0, 1.0};  // white background

  Eigen::Vector3d p = origin + best_t * dir;
  Eigen::Vector3d n = (p - hit->center).normalized();
  Eigen::Vector3d albedo = hit->albedo;
  if (hit->checkered) {
    double u = std::atan2(n.y(), n.x());
    double v = std::acos(std::clamp(n.z(), -1.0, 1.0));
    int cell = int(std::floor(u * 8.0 / kPi)) + int(std::floor(v * 8.0 / kPi));
    if (cell & 1) albedo = {0.95, 0.90, 0.85};
  }
  double diffuse = std::max(0.0, n.dot(light));
  Eigen::Vector3d c = albedo * (0.35 + 0.65 * diffuse);
  return c.cwiseMin(1.0).cwiseMax(0.0);
}

Image render_toy_view(const CameraPose& pose, const CameraIntrinsics& intr, double near, double far) {
  RayBundle rays = generate_rays(pose, intr, near, far);
  Image img(intr.width, intr.height);
  for (Eigen::Index r = 0; r < rays.count(); ++r) {
    Eigen::Vector3d c = shade_toy(rays.origins.row(r), rays.directions.row(r));
    img.data[r * 3 + 0] = c.x();
    img.data[r * 3 + 1] = c.y();
    img.data[r * 3 + 2] = c.z();
  }
  return quantize_to_8bit_grid(img);
}

}  // namespace

ViewDataset make_toy_scene(const ToySceneOptions& opt) {
  require_argument(opt.n_train >= 2, "toy scene: n_train must be >= 2");
  require_argument(opt.n_test >= 0 && opt.n_val >= 0, "toy scene: negative view count");
  require_argument(opt.resolution >= 16, "toy scene: resolution must be >= 16");
  require_argument(opt.radius > 0.0, "toy scene: radius must be positive");

  ViewDataset ds;
  ds.scene_name = "toy";
  ds.near = opt.near;
  ds.far = opt.far;
  ds.intrinsics = CameraIntrinsics::from_angle(opt.resolution, opt.resolution, opt.camera_angle_x);

  RngStream rng(opt.seed, "toy-poses");
  auto add_views = [&](Split split, int n) {
    for (int i = 0; i < n; ++i) {
      SphericalPose s;
      s.radius = opt.radius;
      s.phi = 2.0 * kPi * (double(i) + rng.uniform01()) / std::max(1, n);
      s.theta = deg2rad(rng.uniform(25.0, 65.0));
      View v;
      v.pose = spherical_to_pose(s);
      v.split = split;
      v.name = std::string(split_name(split)) + "/r_" + std::to_string(i);
      v.image = render_toy_view(v.pose, ds.intrinsics, ds.near, ds.far);
      ds.views.push_back(std::move(v));
    }
  };
  add_views(Split::train, opt.n_train);
  add_views(Split::test, opt.n_test);
  add_views(Split::val, opt.n_val);
  ds.validate();
  return ds;
}

ViewDataset make_toy_scene(uint64_t seed, int n_train, int n_test, int resolution) {
  ToySceneOptions opt;
  opt.seed = seed;
  opt.n_train = n_train;
  opt.n_test = n_test;
  opt.resolution = resolution;
  return make_toy_scene(opt);
}

// ---------------------------------------------------------------------------
// Bundled illusory targets

Image make_target_image(const std::string& kind, int width, int height) {
  require_argument(width > 0 && height > 0, "target image: bad size");
  if (kind == "textured-sphere") {
    // Checkered ball, lit from the upper left, on a white background.
    Image img = Image::filled(width, height, 1.0, 1.0, 1.0);
    const double cx = 0.5 * width, cy = 0.5 * height;
    const double rad = 0.42 * std::min(width, height);
    const Eigen::Vector3d light = Eigen::Vector3d(-0.45, 0.55, 0.7).normalized();
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double dx = (x + 0.5 - cx) / rad, dy = -(y + 0.5 - cy) / rad;
        double rr = dx * dx + dy * dy;
        if (rr > 1.0) continue;
        double dz = std::sqrt(1.0 - rr);
        Eigen::Vector3d n(dx, dy, dz);
        double u = std::atan2(n.x(), n.z());
        double v = std::acos(std::clamp(n.y(), -1.0, 1.0));
        int cell = int(std::floor((u + kPi) * 6.0 / kPi)) + int(std::floor(v * 6.0 / kPi));
        Eigen::Vector3d albedo = (cell & 1) ? Eigen::Vector3d(0.95, 0.55, 0.10) : Eigen::Vector3d(0.10, 0.25, 0.70);
        double diffuse = std::max(0.0, n.dot(light));
        Eigen::Vector3d c = albedo * (0.30 + 0.70 * diffuse);
        img.at(y, x, 0) = std::clamp(c.x(), 0.0, 1.0);
        img.at(y, x, 1) = std::clamp(c.y(), 0.0, 1.0);
        img.at(y, x, 2) = std::clamp(c.z(), 0.0, 1.0);
      }
    }
    return quantize_to_8bit_grid(img);
  }
  if (kind == "starfield") {
    Image img = Image::filled(width, height, 0.02, 0.03, 0.08);
    RngStream rng(20240901ull, "starfield");
    const int n_stars = std::max(24, width * height / 34);
    for (int i = 0; i < n_stars; ++i) {
      double sx = rng.uniform01() * width;
      double sy = rng.uniform01() * height;
      double brightness = 0.5 + 0.5 * rng.uniform01();
      double sigma = 0.5 + 0.9 * rng.uniform01();
      double warm = rng.uniform01();
      int x0 = std::max(0, int(sx - 3 * sigma)), x1 = std::min(width - 1, int(sx + 3 * sigma));
      int y0 = std::max(0, int(sy - 3 * sigma)), y1 = std::min(height - 1, int(sy + 3 * sigma));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          double d2 = (x + 0.5 - sx) * (x + 0.5 - sx) + (y + 0.5 - sy) * (y + 0.5 - sy);
          double g = brightness * std::exp(-d2 / (2.0 * sigma * sigma));
          img.at(y, x, 0) = std::min(1.0, img.at(y, x, 0) + g);
          img.at(y, x, 1) = std::min(1.0, img.at(y, x, 1) + g * (0.9 + 0.1 * warm));
          img.at(y, x, 2) = std::min(1.0, img.at(y, x, 2) + g * (0.8 + 0.1 * warm));
        }
      }
    }
    return quantize_to_8bit_grid(img);
  }
  fail_argument("unknown builtin target: " + kind);
}

}  // namespace ipanerf
