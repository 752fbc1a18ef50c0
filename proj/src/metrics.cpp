#include "metrics.hpp"

#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>

#include "errors.hpp"
#include "fsio.hpp"

namespace fs = std::filesystem;

namespace ipanerf {

double psnr(const Image& a, const Image& b) {
  require_argument(a.same_shape(b), "psnr: image shape mismatch");
  double m = mse(a, b);
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

// ---------------------------------------------------------------------------
// SSIM

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

const std::array<double, kWin>& gaussian_kernel() {
  static const std::array<double, kWin> kernel = [] {
    std::array<double, kWin> k{};
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
      double d = i - (kWin - 1) / 2.0;
      k[size_t(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      sum += k[size_t(i)];
    }
    for (double& v : k) v /= sum;
    return k;
  }();
  return kernel;
}

// Separable valid-region filter; out is (h-10) x (w-10).
void filter_valid(const std::vector<double>& in, int w, int h, std::vector<double>& out) {
  const auto& k = gaussian_kernel();
  const int ow = w - kWin + 1, oh = h - kWin + 1;
  std::vector<double> tmp(size_t(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWin; ++i) acc += k[size_t(i)] * in[size_t(y) * w + x + i];
      tmp[size_t(y) * ow + x] = acc;
    }
  }
  out.resize(size_t(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWin; ++i) acc += k[size_t(i)] * tmp[size_t(y + i) * ow + x];
      out[size_t(y) * ow + x] = acc;
    }
  }
}

double ssim_channel(const std::vector<double>& x, const std::vector<double>& y, int w, int h) {
  const double c1 = kK1 * kK1, c2 = kK2 * kK2;  // dynamic range 1.0
  const size_t n = x.size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  std::vector<double> mu_x, mu_y, m_xx, m_yy, m_xy;
  filter_valid(x, w, h, mu_x);
  filter_valid(y, w, h, mu_y);
  filter_valid(xx, w, h, m_xx);
  filter_valid(yy, w, h, m_yy);
  filter_valid(xy, w, h, m_xy);

  double acc = 0.0;
  for (size_t i = 0; i < mu_x.size(); ++i) {
    double var_x = m_xx[i] - mu_x[i] * mu_x[i];
    double var_y = m_yy[i] - mu_y[i] * mu_y[i];
    double cov = m_xy[i] - mu_x[i] * mu_y[i];
    double num = (2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * cov + c2);
    double den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (var_x + var_y + c2);
    acc += num / den;
  }
  return acc / double(mu_x.size());
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  require_argument(a.same_shape(b), "ssim: image shape mismatch");
  require_argument(std::min(a.width, a.height) >= kWin,
                   "ssim: image smaller than the 11x11 window");
  double acc = 0.0;
  std::vector<double> ca(a.pixel_count()), cb(a.pixel_count());
  for (int c = 0; c < 3; ++c) {
    for (size_t p = 0; p < a.pixel_count(); ++p) {
      ca[p] = a.data[p * 3 + c];
      cb[p] = b.data[p * 3 + c];
    }
    acc += ssim_channel(ca, cb, a.width, a.height);
  }
  return acc / 3.0;
}

// ---------------------------------------------------------------------------
// LPIPS plugin seam

namespace {
LpipsFn g_lpips;
std::mutex g_lpips_mutex;
}  // namespace

void register_lpips_plugin(LpipsFn fn) {
  std::lock_guard<std::mutex> lock(g_lpips_mutex);
  g_lpips = std::move(fn);
}

void clear_lpips_plugin() {
  std::lock_guard<std::mutex> lock(g_lpips_mutex);
  g_lpips = nullptr;
}

bool lpips_available() {
  std::lock_guard<std::mutex> lock(g_lpips_mutex);
  return bool(g_lpips);
}

double lpips(const Image& a, const Image& b) {
  LpipsFn fn;
  {
    std::lock_guard<std::mutex> lock(g_lpips_mutex);
    fn = g_lpips;
  }
  require_argument(bool(fn), "lpips: no plugin registered");
  require_argument(a.same_shape(b), "lpips: image shape mismatch");
  return fn(a, b);
}

MetricTriple measure(const Image& a, const Image& b) {
  MetricTriple t;
  t.psnr = psnr(a, b);
  t.ssim = ssim(a, b);
  if (lpips_available()) t.lpips = lpips(a, b);
  return t;
}

// ---------------------------------------------------------------------------
// Partition evaluation

static const char* kPartitions[] = {"V-Illusory", "V-Train", "V-Test", "V-Constraint"};

void PartitionReport::recompute_means() {
  means.clear();
  for (const char* part : kPartitions) {
    double sp = 0.0, ss = 0.0, sl = 0.0;
    int n = 0;
    bool all_lpips = true;
    for (const ViewMetric& vm : per_view) {
      if (vm.partition != part) continue;
      sp += vm.metrics.psnr;
      ss += vm.metrics.ssim;
      if (vm.metrics.lpips)
        sl += *vm.metrics.lpips;
      else
        all_lpips = false;
      ++n;
    }
    if (n == 0) continue;
    MetricTriple mean;
    mean.psnr = sp / n;
    mean.ssim = ss / n;
    if (all_lpips) mean.lpips = sl / n;
    means[part] = mean;
  }
}

PartitionReport evaluate_partitions(const NerfModel& model, const ViewDataset& ds,
                                    const IllusoryTarget& target, const ConstraintViewSet* constraints,
                                    const RenderConfig& rc) {
  std::vector<int> train_ids = ds.split_indices(Split::train);
  require_argument(target.backdoor_view_index >= 0 && target.backdoor_view_index < int(train_ids.size()),
                   "evaluate_partitions: backdoor view index outside the train split");
  require_argument(target.image.width == ds.intrinsics.width && target.image.height == ds.intrinsics.height,
                   "evaluate_partitions: target image resolution must match the dataset");
  if (constraints && constraints->size() > 0)
    require_argument(constraints->has_images(),
                     "evaluate_partitions: constraint set has no approximate ground truth images");

  PartitionReport report;
  report.scene = ds.scene_name;
  report.notes = {"psnr peak 1.0, identical-image cap 99.0 dB",
                  "ssim 11x11 gaussian window sigma 1.5, K1 0.01, K2 0.03, range 1.0",
                  "V-Train excludes the backdoor view; it is reported under V-Illusory"};

  const int backdoor_view = train_ids[size_t(target.backdoor_view_index)];
  auto render_at = [&](const CameraPose& pose) {
    return render_view(model, pose, ds.intrinsics, ds.near, ds.far, rc);
  };

  report.per_view.push_back(
      {"V-Illusory", ds.views[size_t(backdoor_view)].name,
       measure(render_at(ds.views[size_t(backdoor_view)].pose), target.image)});

  for (int id : train_ids) {
    if (id == backdoor_view) continue;
    report.per_view.push_back(
        {"V-Train", ds.views[size_t(id)].name, measure(render_at(ds.views[size_t(id)].pose), ds.views[size_t(id)].image)});
  }
  for (int id : ds.split_indices(Split::test)) {
    report.per_view.push_back(
        {"V-Test", ds.views[size_t(id)].name, measure(render_at(ds.views[size_t(id)].pose), ds.views[size_t(id)].image)});
  }
  if (constraints && constraints->size() > 0) {
    std::vector<CameraPose> poses = constraints->camera_poses();
    for (size_t i = 0; i < poses.size(); ++i) {
      const auto& s = constraints->pose_at(i);
      char name[64];
      std::snprintf(name, sizeof(name), "constraint/%g deg/%zu", constraints->groups[i / 8].angle_deg, i % 8);
      report.per_view.push_back({"V-Constraint", name, measure(render_at(poses[i]), constraints->images[i])});
      (void)s;
    }
  }
  report.recompute_means();
  return report;
}

// ---------------------------------------------------------------------------
// Export

static std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_report_csv(const PartitionReport& report, const fs::path& path) {
  std::ostringstream out;
  out << "partition,view,psnr,ssim,lpips\n";
  for (const ViewMetric& vm : report.per_view) {
    out << vm.partition << "," << vm.view << "," << fmt(vm.metrics.psnr) << "," << fmt(vm.metrics.ssim)
        << "," << (vm.metrics.lpips ? fmt(*vm.metrics.lpips) : std::string()) << "\n";
  }
  atomic_write(path, out.str());
}

std::string format_report_table(const PartitionReport& report) {
  std::ostringstream out;
  out << "scene: " << report.scene;
  if (!report.schedule_hash.empty()) out << "  schedule: " << report.schedule_hash;
  out << "\n";
  for (const std::string& n : report.notes) out << "# " << n << "\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-14s %10s %10s %10s %8s\n", "partition", "PSNR", "SSIM", "LPIPS",
                "views");
  out << line;
  for (const char* part : kPartitions) {
    auto it = report.means.find(part);
    if (it == report.means.end()) continue;
    int n = 0;
    for (const ViewMetric& vm : report.per_view)
      if (vm.partition == part) ++n;
    std::snprintf(line, sizeof(line), "%-14s %10.4f %10.4f %10s %8d\n", part, it->second.psnr,
                  it->second.ssim, it->second.lpips ? fmt(*it->second.lpips).c_str() : "-", n);
    out << line;
  }
  return out.str();
}

void write_report_table(const PartitionReport& report, const fs::path& path) {
  atomic_write(path, format_report_table(report));
}

}  // namespace ipanerf
