#pragma once

#include <Eigen/Dense>

#include "geometry.hpp"
#include "image.hpp"
#include "nerf_model.hpp"

namespace ipanerf {

// The last interval gets a quasi-infinite length so the final sample can
// absorb whatever transmittance is left.
constexpr double kLastDelta = 1e10;

struct RenderConfig {
  int n_samples = 64;
  int chunk = 16384;  // max samples processed per forward pass
};

struct SampleSet {
  Eigen::Index n_rays = 0;
  int n_samples = 0;
  double near = 0.0, far = 0.0;
  Eigen::MatrixXd depths;                              // n_rays x n_samples, strictly increasing
  Eigen::Matrix<double, Eigen::Dynamic, 3> points;     // (n_rays*n_samples) x 3, ray-major
  Eigen::Matrix<double, Eigen::Dynamic, 3> dirs;       // same layout, repeated per sample
};

// Equal bins over [near, far]; midpoints without jitter, one uniform draw per
// bin with jitter. Deterministic in the seed.
SampleSet sample_stratified(const RayBundle& rays, int n_samples, bool jitter, uint64_t seed);

// delta_i = t_{i+1} - t_i, final delta = kLastDelta.
Eigen::MatrixXd deltas_from_depths(const Eigen::MatrixXd& depths);

struct RenderOutput {
  Eigen::Matrix<double, Eigen::Dynamic, 3> color;  // \hat{C} per ray
  Eigen::VectorXd opacity;                         // sum of compositing weights
  Eigen::VectorXd depth;                           // expected depth
};

// Quadrature core: C = sum_i T_i * (1 - exp(-sigma_i * delta_i)) * c_i with
// T_i = exp(-sum_{j<i} sigma_j delta_j). sigma/color are ray-major flattened,
// deltas is n_rays x n_samples. weights (optional out) has delta layout.
void composite_rays(const Eigen::VectorXd& sigma, const Eigen::Matrix<double, Eigen::Dynamic, 3>& color,
                    const Eigen::MatrixXd& deltas, const Eigen::MatrixXd& depths, RenderOutput& out,
                    Eigen::MatrixXd* weights = nullptr);

// Adjoint of composite_rays: given dL/dC per ray, produce dL/dsigma and
// dL/dcolor per sample.
void composite_rays_backward(const Eigen::VectorXd& sigma, const Eigen::Matrix<double, Eigen::Dynamic, 3>& color,
                             const Eigen::MatrixXd& deltas,
                             const Eigen::Matrix<double, Eigen::Dynamic, 3>& dout_color,
                             Eigen::VectorXd& dsigma, Eigen::Matrix<double, Eigen::Dynamic, 3>& dcolor);

// Full model evaluation + quadrature, chunked, no gradients.
RenderOutput render_rays(const NerfModel& model, const SampleSet& samples, int chunk = 16384);

// Mean over rays of the squared color error (summed over channels).
double rgb_loss(const Eigen::Matrix<double, Eigen::Dynamic, 3>& rendered,
                const Eigen::Matrix<double, Eigen::Dynamic, 3>& truth);

// Fused loss + dL/dtheta for training. Returns the loss value; grad is
// overwritten. Chunks are whole numbers of rays, accumulated sequentially so
// the result does not depend on the chunk size. rendered (optional) receives
// the per-ray colors of the forward pass.
double render_loss_backward(const NerfModel& model, const SampleSet& samples,
                            const Eigen::Matrix<double, Eigen::Dynamic, 3>& truth, int chunk,
                            Eigen::VectorXd& grad,
                            Eigen::Matrix<double, Eigen::Dynamic, 3>* rendered = nullptr);

// Row-major full image render, no gradients, deterministic (midpoint samples).
Image render_view(const NerfModel& model, const CameraPose& pose, const CameraIntrinsics& intr,
                  double near, double far, const RenderConfig& rc, int chunk_rays = 4096);

}  // namespace ipanerf
