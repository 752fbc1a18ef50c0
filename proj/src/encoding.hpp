#pragma once

#include <Eigen/Dense>

#include "errors.hpp"

namespace ipanerf {

struct EncodingConfig {
  int n_freq_position = 10;
  int n_freq_direction = 4;
  bool include_input = true;

  int position_dim() const { return (include_input ? 3 : 0) + 6 * n_freq_position; }
  int direction_dim() const { return (include_input ? 3 : 0) + 6 * n_freq_direction; }

  void validate() const {
    require_argument(n_freq_position >= 0 && n_freq_direction >= 0, "encoding: negative frequency count");
  }
};

// [p?, sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^{L-1} pi p), cos(2^{L-1} pi p)],
// componentwise over the 3 coordinates. One input row per sample. Higher
// octaves come from the double-angle recurrence (sin 2x = 2 sin x cos x,
// cos 2x = 2 cos^2 x - 1), which stays within ~1e-12 of direct evaluation for
// the frequency counts used here and avoids scalar trig in the hot path.
inline void positional_encode(const Eigen::Ref<const Eigen::Matrix<double, Eigen::Dynamic, 3>>& p,
                              int n_freq, bool include_input, Eigen::MatrixXd& out) {
  const Eigen::Index n = p.rows();
  const int dim = (include_input ? 3 : 0) + 6 * n_freq;
  out.resize(n, dim);
  int col = 0;
  if (include_input) {
    out.leftCols<3>() = p;
    col = 3;
  }
  if (n_freq == 0) return;
  out.middleCols(col, 3) = (p.array() * 3.14159265358979323846).sin();
  out.middleCols(col + 3, 3) = (p.array() * 3.14159265358979323846).cos();
  for (int k = 1; k < n_freq; ++k) {
    auto s = out.middleCols(col, 3).array();
    auto c = out.middleCols(col + 3, 3).array();
    out.middleCols(col + 6, 3) = 2.0 * s * c;
    out.middleCols(col + 9, 3) = 2.0 * c * c - 1.0;
    col += 6;
  }
}

inline Eigen::VectorXd positional_encode(const Eigen::Vector3d& p, int n_freq, bool include_input) {
  Eigen::Matrix<double, Eigen::Dynamic, 3> m(1, 3);
  m.row(0) = p.transpose();
  Eigen::MatrixXd out;
  positional_encode(m, n_freq, include_input, out);
  return out.row(0).transpose();
}

}  // namespace ipanerf
