#pragma once

#include <Eigen/Dense>

namespace ipanerf {

struct CameraIntrinsics {
  int width = 0;
  int height = 0;
  double camera_angle_x = 0.0;  // horizontal field of view, radians
  double focal = 0.0;           // pixels

  // focal = 0.5 * width / tan(0.5 * camera_angle_x)
  static CameraIntrinsics from_angle(int width, int height, double camera_angle_x);

  CameraIntrinsics downsampled(int factor) const;
  void validate() const;
};

// Rigid camera-to-world transform. Camera space is x-right, y-up, looking
// along -z (the Blender-synthetic convention).
struct CameraPose {
  Eigen::Matrix4d transform = Eigen::Matrix4d::Identity();

  Eigen::Vector3d position() const { return transform.block<3, 1>(0, 3); }
  Eigen::Matrix3d rotation() const { return transform.block<3, 3>(0, 0); }

  // Rotation orthonormal with det +1 (1e-6), bottom row exactly [0 0 0 1].
  void validate() const;
};

struct RayBundle {
  Eigen::Matrix<double, Eigen::Dynamic, 3> origins;
  Eigen::Matrix<double, Eigen::Dynamic, 3> directions;  // unit norm
  double near = 0.0;
  double far = 0.0;

  Eigen::Index count() const { return origins.rows(); }
};

// One ray per pixel, row-major order, through pixel centers (x+0.5, y+0.5).
RayBundle generate_rays(const CameraPose& pose, const CameraIntrinsics& intr, double near, double far);

// Single pixel variant; px/py may be fractional (measured from the pixel grid
// origin, so the center of pixel (x, y) is (x+0.5, y+0.5)).
void ray_for_pixel(const CameraPose& pose, const CameraIntrinsics& intr, double px, double py,
                   Eigen::Vector3d& origin, Eigen::Vector3d& direction);

// Hemisphere camera family: all cameras at the given radius looking at the
// origin, world up is +z, theta measured from the up axis, phi in the xy plane.
struct SphericalPose {
  double radius = 0.0;
  double theta = 0.0;  // radians, (0, pi/2) on the upper hemisphere
  double phi = 0.0;    // radians
};

CameraPose spherical_to_pose(const SphericalPose& s);
SphericalPose pose_to_spherical(const CameraPose& p);

constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace ipanerf
