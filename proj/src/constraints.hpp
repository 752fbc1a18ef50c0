#pragma once

#include <filesystem>
#include <vector>

#include "dataset.hpp"
#include "geometry.hpp"
#include "image.hpp"
#include "renderer.hpp"

namespace ipanerf {

// Spherical neighborhood of the backdoor viewpoint. Per angle delta: the four
// corners (theta +- delta, phi +- delta) and the four side midpoints of the
// curved rectangle, all at the backdoor radius, looking at the origin.
struct ConstraintViewSet {
  SphericalPose backdoor;

  struct AngleGroup {
    double angle_deg = 0.0;
    std::vector<SphericalPose> poses;  // exactly 8: corners then midpoints
  };
  std::vector<AngleGroup> groups;

  // Approximate ground truth rendered by a clean model; flattened in group
  // order, 8 per group. Empty until approximate_ground_truth fills it.
  std::vector<Image> images;

  size_t size() const { return groups.size() * 8; }
  bool has_images() const { return images.size() == size() && !groups.empty(); }
  std::vector<CameraPose> camera_poses() const;
  const SphericalPose& pose_at(size_t flat_index) const;
};

ConstraintViewSet neighbor_viewpoints(const SphericalPose& backdoor, const std::vector<double>& angles_deg);

// Fills the image slots with clean-model renders (the stand-in for the
// missing real photographs at these views).
void approximate_ground_truth(const NerfModel& clean_model, ConstraintViewSet& views,
                              const CameraIntrinsics& intr, double near, double far,
                              const RenderConfig& rc);

// JSON manifest (angles, spherical coordinates, pose matrices) plus PNGs.
void save_constraint_set(const ConstraintViewSet& views, const std::filesystem::path& dir);
ConstraintViewSet load_constraint_set(const std::filesystem::path& dir);

}  // namespace ipanerf
