#pragma once

#include <vector>

#include "xqc/core/common.hpp"
#include "xqc/distcrit/support.hpp"

namespace xqc::distcrit {

// -sum_i t_i log softmax(logits)_i with log-sum-exp stabilization.
inline double ce_bellman_loss(const std::vector<double>& logits,
                              const CategoricalValueDistribution& target) {
  if (logits.size() != target.probs.size())
    throw ConfigError("ce_bellman_loss: size mismatch");
  if (!all_finite(logits.data(), logits.size()))
    throw NumericError("ce_bellman_loss: non-finite logits");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double denom = 0;
  for (double v : logits) denom += std::exp(v - mx);
  double lse = mx + std::log(denom);
  double loss = 0;
  for (size_t i = 0; i < logits.size(); ++i) loss += target.probs[i] * (lse - logits[i]);
  return loss;
}

// Gradient w.r.t. the logits: softmax(logits) - target.
inline std::vector<double> ce_bellman_grad(const std::vector<double>& logits,
                                           const CategoricalValueDistribution& target) {
  if (logits.size() != target.probs.size()) throw ConfigError("ce_bellman_grad: size mismatch");
  if (!all_finite(logits.data(), logits.size()))
    throw NumericError("ce_bellman_grad: non-finite logits");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double denom = 0;
  std::vector<double> g(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    g[i] = std::exp(logits[i] - mx);
    denom += g[i];
  }
  for (size_t i = 0; i < logits.size(); ++i) g[i] = g[i] / denom - target.probs[i];
  return g;
}

inline double mse_bellman_loss(double q, double target) {
  double d = q - target;
  return 0.5 * d * d;
}

inline double mse_bellman_grad(double q, double target) { return q - target; }

}  // namespace xqc::distcrit
