#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>

#include "xqc/core/common.hpp"
#include "xqc/core/rng.hpp"

namespace xqc::netlib {

// Orthogonal initialization: QR of a Gaussian matrix with the sign of
// diag(R) folded into Q, scaled by gain. Deterministic given the rng state.
inline MatD orthogonal_init(int rows, int cols, double gain, Rng& rng) {
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Eigen::MatrixXd a(big, small);
  for (int i = 0; i < big; ++i)
    for (int j = 0; j < small; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  Eigen::MatrixXd r = qr.matrixQR().topRows(small).template triangularView<Eigen::Upper>();
  for (int j = 0; j < small; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);

  MatD out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      out.at(i, j) = gain * (rows < cols ? q(j, i) : q(i, j));
  return out;
}

inline MatD uniform_init(int rows, int cols, double bound, Rng& rng) {
  MatD out(rows, cols);
  for (auto& v : out.data) v = rng.uniform(-bound, bound);
  return out;
}

}  // namespace xqc::netlib
