#include "renderer.hpp"

#include <cmath>

#include "rng.hpp"

namespace ipanerf {

SampleSet sample_stratified(const RayBundle& rays, int n_samples, bool jitter, uint64_t seed) {
  require_argument(n_samples >= 2, "sample_stratified: n_samples must be >= 2");
  require_argument(rays.near >= 0.0 && rays.near < rays.far, "sample_stratified: need 0 <= near < far");

  SampleSet set;
  set.n_rays = rays.count();
  set.n_samples = n_samples;
  set.near = rays.near;
  set.far = rays.far;
  set.depths.resize(set.n_rays, n_samples);

  const double bin = (rays.far - rays.near) / n_samples;
  if (jitter) {
    RngStream rng(seed, "stratified");
    for (Eigen::Index r = 0; r < set.n_rays; ++r)
      for (int i = 0; i < n_samples; ++i)
        set.depths(r, i) = rays.near + (i + rng.uniform01()) * bin;
  } else {
    for (Eigen::Index r = 0; r < set.n_rays; ++r)
      for (int i = 0; i < n_samples; ++i) set.depths(r, i) = rays.near + (i + 0.5) * bin;
  }

  set.points.resize(set.n_rays * n_samples, 3);
  set.dirs.resize(set.n_rays * n_samples, 3);
  for (int c = 0; c < 3; ++c) {
    double* points = set.points.col(c).data();
    double* dirs = set.dirs.col(c).data();
    for (Eigen::Index r = 0; r < set.n_rays; ++r) {
      const double o = rays.origins(r, c);
      const double d = rays.directions(r, c);
      const Eigen::Index base = r * n_samples;
      for (int i = 0; i < n_samples; ++i) {
        points[base + i] = o + set.depths(r, i) * d;
        dirs[base + i] = d;
      }
    }
  }
  return set;
}

Eigen::MatrixXd deltas_from_depths(const Eigen::MatrixXd& depths) {
  Eigen::MatrixXd deltas(depths.rows(), depths.cols());
  const Eigen::Index n = depths.cols();
  deltas.leftCols(n - 1) = depths.rightCols(n - 1) - depths.leftCols(n - 1);
  deltas.col(n - 1).setConstant(kLastDelta);
  return deltas;
}

void composite_rays(const Eigen::VectorXd& sigma, const Eigen::Matrix<double, Eigen::Dynamic, 3>& color,
                    const Eigen::MatrixXd& deltas, const Eigen::MatrixXd& depths, RenderOutput& out,
                    Eigen::MatrixXd* weights) {
  const Eigen::Index n_rays = deltas.rows();
  const Eigen::Index n_samples = deltas.cols();
  require_argument(sigma.size() == n_rays * n_samples && color.rows() == sigma.size(),
                   "composite_rays: sample count mismatch");

  out.color.setZero(n_rays, 3);
  out.opacity.setZero(n_rays);
  out.depth.setZero(n_rays);
  if (weights) weights->setZero(n_rays, n_samples);

  for (Eigen::Index r = 0; r < n_rays; ++r) {
    double transmittance = 1.0;
    for (Eigen::Index i = 0; i < n_samples; ++i) {
      const Eigen::Index s = r * n_samples + i;
      double x = sigma[s] * deltas(r, i);
      double alpha = -std::expm1(-x);  // 1 - exp(-x)
      double w = transmittance * alpha;
      out.color.row(r) += w * color.row(s);
      out.opacity[r] += w;
      out.depth[r] += w * depths(r, i);
      if (weights) (*weights)(r, i) = w;
      transmittance *= std::exp(-x);
    }
  }
}

void composite_rays_backward(const Eigen::VectorXd& sigma, const Eigen::Matrix<double, Eigen::Dynamic, 3>& color,
                             const Eigen::MatrixXd& deltas,
                             const Eigen::Matrix<double, Eigen::Dynamic, 3>& dout_color,
                             Eigen::VectorXd& dsigma, Eigen::Matrix<double, Eigen::Dynamic, 3>& dcolor) {
  const Eigen::Index n_rays = deltas.rows();
  const Eigen::Index n_samples = deltas.cols();
  dsigma.setZero(sigma.size());
  dcolor.setZero(color.rows(), 3);

  // Per ray: w_i = T_i (1 - e^{-x_i}), x_i = sigma_i delta_i.
  //   dL/dc_i = w_i dL/dC
  //   dL/dx_i = g_i T_i e^{-x_i} - sum_{j>i} g_j w_j,   g_i = dL/dw_i = dC . c_i
  // The suffix sum is produced by a reverse scan.
  for (Eigen::Index r = 0; r < n_rays; ++r) {
    double transmittance = 1.0;
    Eigen::VectorXd t_exp(n_samples), w(n_samples), g(n_samples);
    for (Eigen::Index i = 0; i < n_samples; ++i) {
      const Eigen::Index s = r * n_samples + i;
      double x = sigma[s] * deltas(r, i);
      double e = std::exp(-x);
      double alpha = -std::expm1(-x);
      w[i] = transmittance * alpha;
      t_exp[i] = transmittance * e;
      g[i] = dout_color.row(r).dot(color.row(s));
      dcolor.row(s) = w[i] * dout_color.row(r);
      transmittance *= e;
    }
    double suffix = 0.0;
    for (Eigen::Index i = n_samples - 1; i >= 0; --i) {
      const Eigen::Index s = r * n_samples + i;
      double dx = g[i] * t_exp[i] - suffix;
      dsigma[s] = dx * deltas(r, i);
      suffix += g[i] * w[i];
    }
  }
}

namespace {

// Encode + evaluate the model for samples [ray_begin, ray_end).
void eval_chunk(const NerfModel& model, const SampleSet& samples, Eigen::Index ray_begin,
                Eigen::Index ray_end, Eigen::Matrix<double, Eigen::Dynamic, 3>& color,
                Eigen::VectorXd& sigma, NerfModel::ForwardCache* cache) {
  const Eigen::Index s0 = ray_begin * samples.n_samples;
  const Eigen::Index ns = (ray_end - ray_begin) * samples.n_samples;
  const EncodingConfig& enc = model.architecture().encoding;
  Eigen::MatrixXd enc_pos, enc_dir;
  positional_encode(samples.points.middleRows(s0, ns), enc.n_freq_position, enc.include_input, enc_pos);
  positional_encode(samples.dirs.middleRows(s0, ns), enc.n_freq_direction, enc.include_input, enc_dir);
  model.forward(enc_pos, enc_dir, color, sigma, cache);
}

}  // namespace

RenderOutput render_rays(const NerfModel& model, const SampleSet& samples, int chunk) {
  require_argument(chunk >= 1, "render_rays: chunk must be >= 1");
  const Eigen::Index rays_per_chunk = std::max<Eigen::Index>(1, chunk / samples.n_samples);

  RenderOutput out;
  out.color.resize(samples.n_rays, 3);
  out.opacity.resize(samples.n_rays);
  out.depth.resize(samples.n_rays);

  for (Eigen::Index r0 = 0; r0 < samples.n_rays; r0 += rays_per_chunk) {
    const Eigen::Index r1 = std::min(samples.n_rays, r0 + rays_per_chunk);
    Eigen::Matrix<double, Eigen::Dynamic, 3> color;
    Eigen::VectorXd sigma;
    eval_chunk(model, samples, r0, r1, color, sigma, nullptr);
    Eigen::MatrixXd depths = samples.depths.middleRows(r0, r1 - r0);
    RenderOutput part;
    composite_rays(sigma, color, deltas_from_depths(depths), depths, part);
    out.color.middleRows(r0, r1 - r0) = part.color;
    out.opacity.segment(r0, r1 - r0) = part.opacity;
    out.depth.segment(r0, r1 - r0) = part.depth;
  }
  return out;
}

double rgb_loss(const Eigen::Matrix<double, Eigen::Dynamic, 3>& rendered,
                const Eigen::Matrix<double, Eigen::Dynamic, 3>& truth) {
  require_argument(rendered.rows() == truth.rows(), "rgb_loss: ray count mismatch");
  require_argument(rendered.rows() > 0, "rgb_loss: empty batch");
  return (rendered - truth).squaredNorm() / double(rendered.rows());
}

double render_loss_backward(const NerfModel& model, const SampleSet& samples,
                            const Eigen::Matrix<double, Eigen::Dynamic, 3>& truth, int chunk,
                            Eigen::VectorXd& grad,
                            Eigen::Matrix<double, Eigen::Dynamic, 3>* rendered) {
  require_argument(truth.rows() == samples.n_rays, "render_loss_backward: truth count mismatch");
  require_argument(samples.n_rays > 0, "render_loss_backward: empty batch");
  grad.setZero(model.parameter_count());
  if (rendered) rendered->resize(samples.n_rays, 3);

  const Eigen::Index rays_per_chunk = std::max<Eigen::Index>(1, chunk / samples.n_samples);
  const double inv_rays = 1.0 / double(samples.n_rays);
  double loss = 0.0;

  for (Eigen::Index r0 = 0; r0 < samples.n_rays; r0 += rays_per_chunk) {
    const Eigen::Index r1 = std::min(samples.n_rays, r0 + rays_per_chunk);
    NerfModel::ForwardCache cache;
    Eigen::Matrix<double, Eigen::Dynamic, 3> color;
    Eigen::VectorXd sigma;
    eval_chunk(model, samples, r0, r1, color, sigma, &cache);

    Eigen::MatrixXd depths = samples.depths.middleRows(r0, r1 - r0);
    Eigen::MatrixXd deltas = deltas_from_depths(depths);
    RenderOutput part;
    composite_rays(sigma, color, deltas, depths, part);
    if (rendered) rendered->middleRows(r0, r1 - r0) = part.color;

    Eigen::Matrix<double, Eigen::Dynamic, 3> diff = part.color - truth.middleRows(r0, r1 - r0);
    loss += diff.squaredNorm() * inv_rays;

    Eigen::Matrix<double, Eigen::Dynamic, 3> dout = 2.0 * inv_rays * diff;
    Eigen::VectorXd dsigma;
    Eigen::Matrix<double, Eigen::Dynamic, 3> dcolor;
    composite_rays_backward(sigma, color, deltas, dout, dsigma, dcolor);
    model.backward(cache, dcolor, dsigma, grad);
  }
  return loss;
}

Image render_view(const NerfModel& model, const CameraPose& pose, const CameraIntrinsics& intr,
                  double near, double far, const RenderConfig& rc, int chunk_rays) {
  require_argument(chunk_rays >= 1, "render_view: chunk must be >= 1");
  RayBundle rays = generate_rays(pose, intr, near, far);
  Image img(intr.width, intr.height);

  for (Eigen::Index r0 = 0; r0 < rays.count(); r0 += chunk_rays) {
    const Eigen::Index r1 = std::min<Eigen::Index>(rays.count(), r0 + chunk_rays);
    RayBundle part;
    part.origins = rays.origins.middleRows(r0, r1 - r0);
    part.directions = rays.directions.middleRows(r0, r1 - r0);
    part.near = near;
    part.far = far;
    SampleSet samples = sample_stratified(part, rc.n_samples, /*jitter=*/false, /*seed=*/0);
    RenderOutput out = render_rays(model, samples, rc.chunk);
    for (Eigen::Index r = r0; r < r1; ++r)
      for (int c = 0; c < 3; ++c)
        img.data[size_t(r) * 3 + c] = std::clamp(out.color(r - r0, c), 0.0, 1.0);
  }
  return img;
}

}  // namespace ipanerf
