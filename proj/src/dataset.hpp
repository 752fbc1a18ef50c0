#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "image.hpp"

namespace ipanerf {

enum class Split { train, test, val };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct View {
  Image image;
  CameraPose pose;
  Split split = Split::train;
  std::string name;  // e.g. "train/r_3"
};

struct ViewDataset {
  CameraIntrinsics intrinsics;
  std::vector<View> views;
  std::string scene_name;
  double near = 2.0;
  double far = 6.0;

  std::vector<int> split_indices(Split s) const;
  int count(Split s) const { return int(split_indices(s).size()); }
  void validate() const;
};

// Blender-synthetic layout: transforms_{train,test,val}.json at the root,
// each with "camera_angle_x" and "frames" of {"file_path", "transform_matrix"}.
// All three splits are merged, RGBA composited onto white, and optionally
// downsampled by area averaging.
ViewDataset load_blender_dataset(const std::filesystem::path& root, int downsample_factor);

// Inverse of the loader: writes transforms_*.json plus 8-bit PNGs into
// {train,test,val}/r_<i>.png under the directory.
void save_blender_dataset(const ViewDataset& ds, const std::filesystem::path& dir);

struct ToySceneOptions {
  uint64_t seed = 0;
  int n_train = 8;
  int n_test = 4;
  int n_val = 0;
  int resolution = 64;
  double radius = 4.0;
  double camera_angle_x = 0.6911112;  // matches the Blender-synthetic cameras
  double near = 2.0;
  double far = 6.0;
};

// Deterministic desk-scale stand-in for a Blender scene: colored spheres on a
// white background, cameras on the upper hemisphere looking at the origin.
// Images are snapped to the 8-bit grid so disk round-trips are exact.
ViewDataset make_toy_scene(const ToySceneOptions& opt);
ViewDataset make_toy_scene(uint64_t seed, int n_train, int n_test, int resolution);

// Procedural illusory targets bundled with the artifact. Kind is
// "textured-sphere" or "starfield".
Image make_target_image(const std::string& kind, int width, int height);

}  // namespace ipanerf
