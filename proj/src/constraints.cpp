#include "constraints.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <set>

#include "errors.hpp"
#include "fsio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ipanerf {

std::vector<CameraPose> ConstraintViewSet::camera_poses() const {
  std::vector<CameraPose> out;
  out.reserve(size());
  for (const AngleGroup& g : groups)
    for (const SphericalPose& s : g.poses) out.push_back(spherical_to_pose(s));
  return out;
}

const SphericalPose& ConstraintViewSet::pose_at(size_t flat_index) const {
  return groups[flat_index / 8].poses[flat_index % 8];
}

ConstraintViewSet neighbor_viewpoints(const SphericalPose& backdoor, const std::vector<double>& angles_deg) {
  require_argument(backdoor.radius > 0.0, "neighbor_viewpoints: backdoor radius must be positive");
  require_argument(backdoor.theta > 0.0 && backdoor.theta < kPi / 2.0,
                   "neighbor_viewpoints: backdoor must lie on the upper hemisphere");
  require_argument(!angles_deg.empty(), "neighbor_viewpoints: empty angle list");

  ConstraintViewSet set;
  set.backdoor = backdoor;
  std::set<double> seen;
  for (double deg : angles_deg) {
    require_argument(deg > 0.0, "neighbor_viewpoints: angle must be positive, got " + std::to_string(deg));
    require_argument(seen.insert(deg).second, "neighbor_viewpoints: duplicate angle " + std::to_string(deg));
    const double d = deg2rad(deg);
    require_argument(backdoor.theta - d > 0.0 && backdoor.theta + d < kPi / 2.0,
                     "neighbor_viewpoints: angle " + std::to_string(deg) +
                         " deg pushes theta off the upper hemisphere");

    ConstraintViewSet::AngleGroup group;
    group.angle_deg = deg;
    auto at = [&](double theta, double phi) {
      return SphericalPose{backdoor.radius, theta, phi};
    };
    // corners
    group.poses.push_back(at(backdoor.theta - d, backdoor.phi - d));
    group.poses.push_back(at(backdoor.theta - d, backdoor.phi + d));
    group.poses.push_back(at(backdoor.theta + d, backdoor.phi - d));
    group.poses.push_back(at(backdoor.theta + d, backdoor.phi + d));
    // side midpoints
    group.poses.push_back(at(backdoor.theta - d, backdoor.phi));
    group.poses.push_back(at(backdoor.theta + d, backdoor.phi));
    group.poses.push_back(at(backdoor.theta, backdoor.phi - d));
    group.poses.push_back(at(backdoor.theta, backdoor.phi + d));
    set.groups.push_back(std::move(group));
  }
  return set;
}

void approximate_ground_truth(const NerfModel& clean_model, ConstraintViewSet& views,
                              const CameraIntrinsics& intr, double near, double far,
                              const RenderConfig& rc) {
  views.images.clear();
  views.images.reserve(views.size());
  for (const ConstraintViewSet::AngleGroup& g : views.groups)
    for (const SphericalPose& s : g.poses)
      views.images.push_back(render_view(clean_model, spherical_to_pose(s), intr, near, far, rc));
}

void save_constraint_set(const ConstraintViewSet& views, const fs::path& dir) {
  fs::create_directories(dir);
  json doc;
  doc["backdoor"] = {{"radius", views.backdoor.radius},
                     {"theta", views.backdoor.theta},
                     {"phi", views.backdoor.phi}};
  json groups = json::array();
  size_t flat = 0;
  for (const ConstraintViewSet::AngleGroup& g : views.groups) {
    json jg;
    jg["angle_deg"] = g.angle_deg;
    json poses = json::array();
    for (const SphericalPose& s : g.poses) {
      json jp;
      jp["radius"] = s.radius;
      jp["theta"] = s.theta;
      jp["phi"] = s.phi;
      CameraPose cp = spherical_to_pose(s);
      json rows = json::array();
      for (int r = 0; r < 4; ++r) {
        json row = json::array();
        for (int c = 0; c < 4; ++c) row.push_back(cp.transform(r, c));
        rows.push_back(row);
      }
      jp["transform_matrix"] = rows;
      if (views.has_images()) {
        std::string name = "view_" + std::to_string(flat) + ".png";
        save_png(views.images[flat], dir / name);
        jp["image"] = name;
      }
      poses.push_back(jp);
      ++flat;
    }
    jg["poses"] = poses;
    groups.push_back(jg);
  }
  doc["groups"] = groups;
  atomic_write(dir / "constraints.json", doc.dump(2) + "\n");
}

ConstraintViewSet load_constraint_set(const fs::path& dir) {
  fs::path manifest = dir / "constraints.json";
  if (!fs::exists(manifest)) fail_incomplete("missing constraint manifest: " + manifest.string());
  json doc;
  try {
    doc = json::parse(read_file(manifest));
  } catch (const json::exception& e) {
    fail_format(manifest.string() + ": " + e.what());
  }

  ConstraintViewSet set;
  set.backdoor.radius = doc.at("backdoor").at("radius").get<double>();
  set.backdoor.theta = doc.at("backdoor").at("theta").get<double>();
  set.backdoor.phi = doc.at("backdoor").at("phi").get<double>();
  bool any_images = false;
  for (const json& jg : doc.at("groups")) {
    ConstraintViewSet::AngleGroup group;
    group.angle_deg = jg.at("angle_deg").get<double>();
    for (const json& jp : jg.at("poses")) {
      SphericalPose s;
      s.radius = jp.at("radius").get<double>();
      s.theta = jp.at("theta").get<double>();
      s.phi = jp.at("phi").get<double>();
      group.poses.push_back(s);
      if (jp.contains("image")) {
        set.images.push_back(load_png(dir / jp.at("image").get<std::string>()));
        any_images = true;
      }
    }
    if (group.poses.size() != 8) fail_format(manifest.string() + ": angle group must hold 8 poses");
    set.groups.push_back(std::move(group));
  }
  if (any_images && set.images.size() != set.size())
    fail_format(manifest.string() + ": image count does not match pose count");
  return set;
}

}  // namespace ipanerf
