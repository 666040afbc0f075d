#pragma once

#include <vector>

#include "xqc/core/common.hpp"

namespace xqc::sacloop {

// Adaptive moment estimation with bias correction, (0.9, 0.999, 1e-8).
class Adam {
public:
  explicit Adam(size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(double* params, const double* grad, size_t n, double lr) {
    if (n != m_.size()) throw ConfigError("adam: size mismatch");
    ++t_;
    double c1 = 1.0 - std::pow(beta1_, t_);
    double c2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < n; ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      double mhat = m_[i] / c1;
      double vhat = v_[i] / c2;
      params[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }

  long steps_taken() const { return t_; }

private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace xqc::sacloop
