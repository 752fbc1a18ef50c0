#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "encoding.hpp"

namespace ipanerf {

struct ModelArchitecture {
  int depth = 8;       // trunk layers
  int width = 256;     // trunk width
  int skip_layer = 4;  // trunk layer whose input is concat(h, encoded position)
  EncodingConfig encoding;

  void validate() const;
  int dir_width() const { return std::max(1, width / 2); }
};

// Vanilla NeRF field F: (x, d) -> (c, tau). Color is squashed by a sigmoid,
// density by a shifted softplus, so the range invariants hold by construction.
// Parameters live in one flat vector; the layer views map into it, which keeps
// the optimizer, checkpoints and finite differencing trivial.
class NerfModel {
 public:
  explicit NerfModel(const ModelArchitecture& arch);

  const ModelArchitecture& architecture() const { return arch_; }
  Eigen::Index parameter_count() const { return params_.size(); }
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer, deterministic in the seed.
  void init_parameters(uint64_t seed);

  // Flat index of the density head's bias (useful for warm-starting or
  // silencing the field).
  Eigen::Index sigma_bias_index() const;

  // Activations kept for the backward pass. One entry per trunk layer.
  struct ForwardCache {
    Eigen::MatrixXd enc_pos, enc_dir;
    std::vector<Eigen::MatrixXd> trunk;  // post-ReLU
    Eigen::VectorXd sigma_pre;           // pre-softplus
    Eigen::MatrixXd feature;             // linear output
    Eigen::MatrixXd dir_hidden;          // post-ReLU
    Eigen::Matrix<double, Eigen::Dynamic, 3> color;  // post-sigmoid
  };

  // enc_pos: B x position_dim, enc_dir: B x direction_dim.
  void forward(const Eigen::MatrixXd& enc_pos, const Eigen::MatrixXd& enc_dir,
               Eigen::Matrix<double, Eigen::Dynamic, 3>& color, Eigen::VectorXd& sigma,
               ForwardCache* cache) const;

  // Accumulates dL/dtheta into grad (must be sized parameter_count, may carry
  // prior contributions).
  void backward(const ForwardCache& cache, const Eigen::Matrix<double, Eigen::Dynamic, 3>& dcolor,
                const Eigen::VectorXd& dsigma, Eigen::VectorXd& grad) const;

 private:
  struct LayerSpec {
    int in = 0, out = 0;
    Eigen::Index offset = 0;  // into the flat vector: weights (in*out) then bias (out)
    Eigen::Index size() const { return Eigen::Index(in) * out + out; }
  };

  // Weight view is (in x out) so forward is X * W + b.
  Eigen::Map<const Eigen::MatrixXd> weights(const LayerSpec& l) const;
  Eigen::Map<const Eigen::VectorXd> bias(const LayerSpec& l) const;

  ModelArchitecture arch_;
  std::vector<LayerSpec> trunk_;
  LayerSpec sigma_head_, feature_, dir_hidden_, rgb_head_;
  Eigen::VectorXd params_;
};

inline double softplus_shifted(double x) {
  double y = x - 1.0;
  return y > 30.0 ? y : std::log1p(std::exp(std::min(y, 30.0)));
}

inline double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace ipanerf
