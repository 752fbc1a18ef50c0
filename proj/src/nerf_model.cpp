#include "nerf_model.hpp"

#include <malloc.h>

#include "rng.hpp"

namespace ipanerf {

namespace {

// The training loop cycles through tens-of-MB activation buffers every step.
// With glibc defaults those land in fresh mmap regions that are handed back
// to the kernel on free, so every layer pays page-fault cost again; keeping
// them on the heap roughly triples training throughput.
struct AllocatorTuning {
  AllocatorTuning() {
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, -1);
  }
};
const AllocatorTuning g_allocator_tuning;

}  // namespace

void ModelArchitecture::validate() const {
  require_argument(depth >= 1, "model: depth must be >= 1");
  require_argument(width >= 1, "model: width must be >= 1");
  require_argument(skip_layer >= 0 && skip_layer < depth, "model: skip layer out of range");
  encoding.validate();
}

NerfModel::NerfModel(const ModelArchitecture& arch) : arch_(arch) {
  arch_.validate();
  const int dp = arch_.encoding.position_dim();
  const int dd = arch_.encoding.direction_dim();
  const int w = arch_.width;

  Eigen::Index offset = 0;
  auto add = [&](int in, int out) {
    LayerSpec l{in, out, offset};
    offset += l.size();
    return l;
  };

  for (int i = 0; i < arch_.depth; ++i) {
    int in = (i == 0) ? dp : w;
    if (i == arch_.skip_layer && i > 0) in = w + dp;
    trunk_.push_back(add(in, w));
  }
  sigma_head_ = add(w, 1);
  feature_ = add(w, w);
  dir_hidden_ = add(w + dd, arch_.dir_width());
  rgb_head_ = add(arch_.dir_width(), 3);

  params_.setZero(offset);
}

Eigen::Index NerfModel::sigma_bias_index() const {
  return sigma_head_.offset + Eigen::Index(sigma_head_.in) * sigma_head_.out;
}

Eigen::Map<const Eigen::MatrixXd> NerfModel::weights(const LayerSpec& l) const {
  return {params_.data() + l.offset, l.in, l.out};
}

Eigen::Map<const Eigen::VectorXd> NerfModel::bias(const LayerSpec& l) const {
  return {params_.data() + l.offset + Eigen::Index(l.in) * l.out, l.out};
}

void NerfModel::init_parameters(uint64_t seed) {
  RngStream rng(seed, "model-init");
  auto fill = [&](const LayerSpec& l) {
    double bound = 1.0 / std::sqrt(double(l.in));
    for (Eigen::Index i = 0; i < l.size(); ++i)
      params_[l.offset + i] = rng.uniform(-bound, bound);
  };
  for (const LayerSpec& l : trunk_) fill(l);
  fill(sigma_head_);
  fill(feature_);
  fill(dir_hidden_);
  fill(rgb_head_);
}

void NerfModel::forward(const Eigen::MatrixXd& enc_pos, const Eigen::MatrixXd& enc_dir,
                        Eigen::Matrix<double, Eigen::Dynamic, 3>& color, Eigen::VectorXd& sigma,
                        ForwardCache* cache) const {
  const Eigen::Index n = enc_pos.rows();
  const Eigen::Index w = arch_.width;
  require_argument(enc_pos.cols() == arch_.encoding.position_dim(), "forward: bad position encoding width");
  require_argument(enc_dir.cols() == arch_.encoding.direction_dim(), "forward: bad direction encoding width");
  require_argument(enc_dir.rows() == n, "forward: row count mismatch");

  std::vector<Eigen::MatrixXd> local_trunk;
  std::vector<Eigen::MatrixXd>& trunk = cache ? cache->trunk : local_trunk;
  trunk.assign(size_t(arch_.depth), {});

  // Concatenated inputs ([h, enc] * W) are evaluated as two block products so
  // the wide activation matrices are never copied.
  for (int i = 0; i < arch_.depth; ++i) {
    const LayerSpec& l = trunk_[size_t(i)];
    Eigen::MatrixXd z;
    if (i == 0) {
      z.noalias() = enc_pos * weights(l);
    } else if (i == arch_.skip_layer) {
      z.noalias() = trunk[size_t(i - 1)] * weights(l).topRows(w);
      z.noalias() += enc_pos * weights(l).bottomRows(enc_pos.cols());
    } else {
      z.noalias() = trunk[size_t(i - 1)] * weights(l);
    }
    z.rowwise() += bias(l).transpose();
    z = z.cwiseMax(0.0);
    trunk[size_t(i)] = std::move(z);
  }
  const Eigen::MatrixXd& h = trunk.back();

  Eigen::VectorXd sigma_pre = h * weights(sigma_head_);
  sigma_pre.array() += bias(sigma_head_)[0];
  {
    // softplus(x - 1), linear past the overflow knee
    Eigen::ArrayXd y = sigma_pre.array() - 1.0;
    sigma = (y > 30.0).select(y, (1.0 + y.min(30.0).exp()).log()).matrix();
  }

  Eigen::MatrixXd feature = h * weights(feature_);
  feature.rowwise() += bias(feature_).transpose();

  Eigen::MatrixXd g;
  g.noalias() = feature * weights(dir_hidden_).topRows(w);
  g.noalias() += enc_dir * weights(dir_hidden_).bottomRows(enc_dir.cols());
  g.rowwise() += bias(dir_hidden_).transpose();
  g = g.cwiseMax(0.0);

  Eigen::MatrixXd rgb_pre = g * weights(rgb_head_);
  rgb_pre.rowwise() += bias(rgb_head_).transpose();
  color = (1.0 / (1.0 + (-rgb_pre.array()).exp())).matrix();

  if (cache) {
    cache->enc_pos = enc_pos;
    cache->enc_dir = enc_dir;
    cache->sigma_pre = std::move(sigma_pre);
    cache->feature = std::move(feature);
    cache->dir_hidden = std::move(g);
    cache->color = color;
  }
}

void NerfModel::backward(const ForwardCache& cache, const Eigen::Matrix<double, Eigen::Dynamic, 3>& dcolor,
                         const Eigen::VectorXd& dsigma, Eigen::VectorXd& grad) const {
  require_argument(grad.size() == params_.size(), "backward: gradient vector size mismatch");
  const Eigen::Index n = cache.enc_pos.rows();

  auto grad_w = [&](const LayerSpec& l) {
    return Eigen::Map<Eigen::MatrixXd>(grad.data() + l.offset, l.in, l.out);
  };
  auto grad_b = [&](const LayerSpec& l) {
    return Eigen::Map<Eigen::VectorXd>(grad.data() + l.offset + Eigen::Index(l.in) * l.out, l.out);
  };

  const Eigen::Index w = arch_.width;

  // rgb head (sigmoid)
  Eigen::MatrixXd dz_rgb = dcolor.array() * cache.color.array() * (1.0 - cache.color.array());
  grad_w(rgb_head_).noalias() += cache.dir_hidden.transpose() * dz_rgb;
  grad_b(rgb_head_) += dz_rgb.colwise().sum().transpose();

  // direction layer (ReLU); concatenated weights get their block gradients
  Eigen::MatrixXd dg = dz_rgb * weights(rgb_head_).transpose();
  dg.array() *= (cache.dir_hidden.array() > 0.0).cast<double>();
  grad_w(dir_hidden_).topRows(w).noalias() += cache.feature.transpose() * dg;
  grad_w(dir_hidden_).bottomRows(cache.enc_dir.cols()).noalias() += cache.enc_dir.transpose() * dg;
  grad_b(dir_hidden_) += dg.colwise().sum().transpose();
  Eigen::MatrixXd dfeature = dg * weights(dir_hidden_).topRows(w).transpose();

  // feature layer (linear)
  const Eigen::MatrixXd& h_last = cache.trunk.back();
  grad_w(feature_).noalias() += h_last.transpose() * dfeature;
  grad_b(feature_) += dfeature.colwise().sum().transpose();
  Eigen::MatrixXd dh = dfeature * weights(feature_).transpose();

  // density head (shifted softplus); d softplus(x-1)/dx = sigmoid(x-1)
  Eigen::VectorXd dz_sigma =
      (dsigma.array() * (1.0 / (1.0 + (1.0 - cache.sigma_pre.array()).exp()))).matrix();
  grad_w(sigma_head_).noalias() += h_last.transpose() * dz_sigma;
  grad_b(sigma_head_)[0] += dz_sigma.sum();
  dh.noalias() += dz_sigma * weights(sigma_head_).transpose().row(0);

  // trunk
  for (int i = arch_.depth - 1; i >= 0; --i) {
    const LayerSpec& l = trunk_[size_t(i)];
    Eigen::MatrixXd dz = std::move(dh);
    dz.array() *= (cache.trunk[size_t(i)].array() > 0.0).cast<double>();
    if (i == 0) {
      grad_w(l).noalias() += cache.enc_pos.transpose() * dz;
    } else if (i == arch_.skip_layer) {
      grad_w(l).topRows(w).noalias() += cache.trunk[size_t(i - 1)].transpose() * dz;
      grad_w(l).bottomRows(cache.enc_pos.cols()).noalias() += cache.enc_pos.transpose() * dz;
    } else {
      grad_w(l).noalias() += cache.trunk[size_t(i - 1)].transpose() * dz;
    }
    grad_b(l) += dz.colwise().sum().transpose();
    if (i > 0) {
      // only the h block of a concatenated input feeds the previous layer
      dh.noalias() = dz * weights(l).topRows(w).transpose();
    }
  }
}

}  // namespace ipanerf
