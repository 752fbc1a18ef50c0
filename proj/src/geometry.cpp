#include "geometry.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"

namespace ipanerf {

CameraIntrinsics CameraIntrinsics::from_angle(int width, int height, double camera_angle_x) {
  CameraIntrinsics intr;
  intr.width = width;
  intr.height = height;
  intr.camera_angle_x = camera_angle_x;
  intr.focal = 0.5 * double(width) / std::tan(0.5 * camera_angle_x);
  intr.validate();
  return intr;
}

CameraIntrinsics CameraIntrinsics::downsampled(int factor) const {
  require_argument(factor >= 1, "downsample factor must be >= 1");
  require_argument(width % factor == 0 && height % factor == 0,
                   "downsample factor " + std::to_string(factor) + " does not divide " +
                       std::to_string(width) + "x" + std::to_string(height));
  return from_angle(width / factor, height / factor, camera_angle_x);
}

void CameraIntrinsics::validate() const {
  require_argument(width > 0 && height > 0, "intrinsics: non-positive image size");
  require_argument(camera_angle_x > 0.0 && camera_angle_x < kPi, "intrinsics: camera_angle_x out of (0, pi)");
  double expected = 0.5 * double(width) / std::tan(0.5 * camera_angle_x);
  require_argument(std::abs(focal - expected) <= 1e-9 * std::abs(expected),
                   "intrinsics: focal inconsistent with camera_angle_x");
}

void CameraPose::validate() const {
  Eigen::Matrix3d R = rotation();
  double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  require_argument(ortho <= 1e-6, "pose: rotation block is not orthonormal");
  require_argument(std::abs(R.determinant() - 1.0) <= 1e-6, "pose: rotation determinant is not +1");
  require_argument(transform(3, 0) == 0.0 && transform(3, 1) == 0.0 && transform(3, 2) == 0.0 &&
                       transform(3, 3) == 1.0,
                   "pose: bottom row must be [0 0 0 1]");
}

void ray_for_pixel(const CameraPose& pose, const CameraIntrinsics& intr, double px, double py,
                   Eigen::Vector3d& origin, Eigen::Vector3d& direction) {
  Eigen::Vector3d cam_dir((px - 0.5 * intr.width) / intr.focal, -(py - 0.5 * intr.height) / intr.focal, -1.0);
  direction = (pose.rotation() * cam_dir).normalized();
  origin = pose.position();
}

RayBundle generate_rays(const CameraPose& pose, const CameraIntrinsics& intr, double near, double far) {
  pose.validate();
  intr.validate();
  require_argument(near >= 0.0 && near < far, "generate_rays: need 0 <= near < far");

  RayBundle bundle;
  const Eigen::Index n = Eigen::Index(intr.width) * intr.height;
  bundle.origins.resize(n, 3);
  bundle.directions.resize(n, 3);
  bundle.near = near;
  bundle.far = far;

  const Eigen::Matrix3d R = pose.rotation();
  const Eigen::Vector3d o = pose.position();
  Eigen::Index row = 0;
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x, ++row) {
      Eigen::Vector3d cam_dir((x + 0.5 - 0.5 * intr.width) / intr.focal,
                              -(y + 0.5 - 0.5 * intr.height) / intr.focal, -1.0);
      Eigen::Vector3d d = (R * cam_dir).normalized();
      bundle.origins.row(row) = o.transpose();
      bundle.directions.row(row) = d.transpose();
    }
  }
  return bundle;
}

CameraPose spherical_to_pose(const SphericalPose& s) {
  require_argument(s.radius > 0.0, "spherical pose: radius must be positive");
  require_argument(s.theta > 0.0 && s.theta < kPi, "spherical pose: theta out of (0, pi)");

  Eigen::Vector3d pos(s.radius * std::sin(s.theta) * std::cos(s.phi),
                      s.radius * std::sin(s.theta) * std::sin(s.phi), s.radius * std::cos(s.theta));
  // Camera -z points at the origin, world up (+z) as the reference.
  Eigen::Vector3d z_cam = pos.normalized();
  Eigen::Vector3d up(0.0, 0.0, 1.0);
  Eigen::Vector3d x_cam = up.cross(z_cam);
  double n = x_cam.norm();
  require_argument(n > 1e-12, "spherical pose: camera on the up axis is degenerate");
  x_cam /= n;
  Eigen::Vector3d y_cam = z_cam.cross(x_cam);

  CameraPose pose;
  pose.transform.setIdentity();
  pose.transform.block<3, 1>(0, 0) = x_cam;
  pose.transform.block<3, 1>(0, 1) = y_cam;
  pose.transform.block<3, 1>(0, 2) = z_cam;
  pose.transform.block<3, 1>(0, 3) = pos;
  return pose;
}

SphericalPose pose_to_spherical(const CameraPose& p) {
  Eigen::Vector3d pos = p.position();
  double r = pos.norm();
  require_argument(r > 1e-12, "pose_to_spherical: camera at the origin");
  double xy = std::hypot(pos.x(), pos.y());
  require_argument(xy > 1e-9 * r, "pose_to_spherical: camera on the up axis is degenerate");
  SphericalPose s;
  s.radius = r;
  s.theta = std::acos(std::clamp(pos.z() / r, -1.0, 1.0));
  s.phi = std::atan2(pos.y(), pos.x());
  return s;
}

}  // namespace ipanerf
