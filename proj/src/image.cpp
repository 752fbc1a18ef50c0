#include "image.hpp"

#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "errors.hpp"
#include "fsio.hpp"

namespace fs = std::filesystem;

namespace ipanerf {

Image Image::filled(int w, int h, double r, double g, double b) {
  Image img(w, h);
  for (size_t p = 0; p < img.pixel_count(); ++p) {
    img.data[p * 3 + 0] = r;
    img.data[p * 3 + 1] = g;
    img.data[p * 3 + 2] = b;
  }
  return img;
}

uint8_t quantize8(double v) {
  double scaled = v * 255.0;
  double q = scaled >= 0.0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5);
  if (q < 0.0) q = 0.0;
  if (q > 255.0) q = 255.0;
  return uint8_t(q);
}

Image quantize_to_8bit_grid(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = quantize8(v) / 255.0;
  return out;
}

Image load_png(const fs::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) fail_format("cannot decode image: " + path.string());
  if (raw.depth() != CV_8U) fail_format("only 8-bit images supported: " + path.string());

  Image img(raw.cols, raw.rows);
  const int ch = raw.channels();
  for (int y = 0; y < raw.rows; ++y) {
    const uint8_t* row = raw.ptr<uint8_t>(y);
    for (int x = 0; x < raw.cols; ++x) {
      double r, g, b;
      if (ch == 1) {
        r = g = b = row[x] / 255.0;
      } else if (ch == 3) {
        b = row[x * 3 + 0] / 255.0;
        g = row[x * 3 + 1] / 255.0;
        r = row[x * 3 + 2] / 255.0;
      } else if (ch == 4) {
        double a = row[x * 4 + 3] / 255.0;
        b = a * (row[x * 4 + 0] / 255.0) + (1.0 - a);
        g = a * (row[x * 4 + 1] / 255.0) + (1.0 - a);
        r = a * (row[x * 4 + 2] / 255.0) + (1.0 - a);
      } else {
        fail_format("unsupported channel count in " + path.string());
      }
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  }
  return img;
}

void save_png(const Image& img, const fs::path& path) {
  require_argument(img.width > 0 && img.height > 0, "cannot save empty image");
  cv::Mat mat(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    uint8_t* row = mat.ptr<uint8_t>(y);
    for (int x = 0; x < img.width; ++x) {
      row[x * 3 + 0] = quantize8(img.at(y, x, 2));  // BGR for OpenCV
      row[x * 3 + 1] = quantize8(img.at(y, x, 1));
      row[x * 3 + 2] = quantize8(img.at(y, x, 0));
    }
  }
  std::vector<uint8_t> buf;
  if (!cv::imencode(".png", mat, buf)) fail_runtime("png encode failed for " + path.string());
  atomic_write(path, buf.data(), buf.size());
}

Image downsample(const Image& img, int factor) {
  require_argument(factor >= 1, "downsample factor must be >= 1");
  if (factor == 1) return img;
  require_argument(img.width % factor == 0 && img.height % factor == 0,
                   "downsample factor " + std::to_string(factor) + " does not divide " +
                       std::to_string(img.width) + "x" + std::to_string(img.height));
  Image out(img.width / factor, img.height / factor);
  const double inv = 1.0 / (double(factor) * factor);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) acc += img.at(y * factor + dy, x * factor + dx, c);
        out.at(y, x, c) = acc * inv;
      }
    }
  }
  return out;
}

double max_abs_diff(const Image& a, const Image& b) {
  require_argument(a.same_shape(b), "image shape mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

double mse(const Image& a, const Image& b) {
  require_argument(a.same_shape(b), "image shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return a.data.empty() ? 0.0 : acc / double(a.data.size());
}

}  // namespace ipanerf
