#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "constraints.hpp"
#include "dataset.hpp"
#include "image.hpp"
#include "nerf_model.hpp"
#include "renderer.hpp"

namespace ipanerf {

// Identical images report the documented cap instead of +inf.
constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) with peak 1.0 in float image space.
double psnr(const Image& a, const Image& b);

// Mean local SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03,
// dynamic range 1.0, averaged over channels; valid-region convolution.
double ssim(const Image& a, const Image& b);

// LPIPS is a plugin seam: without a registered backend the metric is reported
// as absent, never as zero.
using LpipsFn = std::function<double(const Image&, const Image&)>;
void register_lpips_plugin(LpipsFn fn);
void clear_lpips_plugin();
bool lpips_available();
double lpips(const Image& a, const Image& b);

struct MetricTriple {
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> lpips;
};

MetricTriple measure(const Image& a, const Image& b);

struct IllusoryTarget {
  int backdoor_view_index = 0;  // index into the train split
  Image image;                  // B_{v'}
};

struct ViewMetric {
  std::string partition;  // V-Illusory | V-Train | V-Test | V-Constraint
  std::string view;
  MetricTriple metrics;
};

struct PartitionReport {
  std::string scene;
  std::string schedule_hash;
  std::vector<ViewMetric> per_view;
  std::map<std::string, MetricTriple> means;
  std::vector<std::string> notes;

  void recompute_means();
};

// Renders the attacked model at every partition pose and compares against the
// partition's reference set: the illusory target at v', dataset ground truth
// for train (v' excluded) and test, clean-model renders for constraint views.
PartitionReport evaluate_partitions(const NerfModel& model, const ViewDataset& ds,
                                    const IllusoryTarget& target, const ConstraintViewSet* constraints,
                                    const RenderConfig& rc);

void write_report_csv(const PartitionReport& report, const std::filesystem::path& path);
void write_report_table(const PartitionReport& report, const std::filesystem::path& path);
std::string format_report_table(const PartitionReport& report);

}  // namespace ipanerf
