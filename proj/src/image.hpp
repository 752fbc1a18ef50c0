#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ipanerf {

// RGB image, row-major, channels interleaved, values in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // height*width*3

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(size_t(w) * h * 3, 0.0) {}

  static Image filled(int w, int h, double r, double g, double b);

  double& at(int y, int x, int c) { return data[(size_t(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return data[(size_t(y) * width + x) * 3 + c]; }

  size_t pixel_count() const { return size_t(width) * height; }
  size_t value_count() const { return data.size(); }

  bool same_shape(const Image& o) const { return width == o.width && height == o.height; }
};

// Round half away from zero, clamped to [0,255].
uint8_t quantize8(double v);

// Snap every value onto the 8-bit grid k/255.
Image quantize_to_8bit_grid(const Image& img);

// 8-bit PNG. RGBA inputs are composited onto a white background before
// conversion to float. Throws format errors on unreadable files.
Image load_png(const std::filesystem::path& path);

// Quantizes (round half away from zero) and writes atomically.
void save_png(const Image& img, const std::filesystem::path& path);

// Area averaging over factor x factor blocks; factor must divide both dims.
Image downsample(const Image& img, int factor);

double max_abs_diff(const Image& a, const Image& b);
double mse(const Image& a, const Image& b);

}  // namespace ipanerf
