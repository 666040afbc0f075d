#pragma once

#include <string>
#include <vector>

#include "xqc/core/common.hpp"
#include "xqc/netlib/config.hpp"

namespace xqc::distcrit {

// Empirical certificate that the effective update stays under the
// eta * sqrt(2) * L_f / C envelope (C = 1 for projected layers). L_f has no
// closed form for these networks, so it is estimated from per-step secants
// ||f(theta_t+1) - f(theta_t)|| / ||theta_t+1 - theta_t|| and the result is a
// report, not a hard guarantee.
struct ElrBoundReport {
  int window = 0;
  double max_effective_update = 0;  // max over layers and steps of eta * ||grad_l|| / ||W_l||
  double max_layer_norm_dev = 0;    // max |  ||W_l|| - 1  | observed over the window
  double lipschitz_estimate = 0;    // max secant ratio ||df|| / ||dtheta||
  double max_lr = 0;
  double bound = 0;  // max_lr * sqrt(2) * lipschitz_estimate
  bool satisfied = false;

  struct LayerPeak {
    std::string name;
    double effective_update = 0;
  };
  std::vector<LayerPeak> layer_peaks;
};

// Trainer contract: arch() (critic_loss / weight_projection flags),
// step_once(), critic_lr_now(), critic_theta(), last_critic_grad(),
// projected_layers() -> (name, offset, count) triples over the critic
// parameter span, probe_outputs() -> critic outputs on a fixed batch.
template <class Trainer>
ElrBoundReport certify_elr_bound(Trainer& trainer, int window) {
  if (trainer.arch().critic_loss != netlib::CriticLoss::CE)
    throw PreconditionError("elr certificate requires the cross-entropy critic");
  if (!trainer.arch().weight_projection)
    throw PreconditionError("elr certificate requires weight projection (fixed layer norms)");
  if (window < 1) throw PreconditionError("elr certificate: window must be >= 1");

  ElrBoundReport report;
  report.window = window;
  auto layers = trainer.projected_layers();
  report.layer_peaks.resize(layers.size());
  for (size_t l = 0; l < layers.size(); ++l) report.layer_peaks[l].name = layers[l].name;

  std::vector<double> prev_theta = trainer.critic_theta();
  std::vector<double> prev_f = trainer.probe_outputs();

  auto span_norm = [](const std::vector<double>& v, size_t off, size_t n) {
    double s = 0;
    for (size_t i = 0; i < n; ++i) s += v[off + i] * v[off + i];
    return std::sqrt(s);
  };

  for (int step = 0; step < window; ++step) {
    trainer.step_once();
    double lr = trainer.critic_lr_now();
    report.max_lr = std::max(report.max_lr, lr);

    const std::vector<double>& grad = trainer.last_critic_grad();
    std::vector<double> theta = trainer.critic_theta();
    if (grad.empty()) continue;  // still in warmup, no update happened

    for (size_t l = 0; l < layers.size(); ++l) {
      double wnorm = span_norm(theta, layers[l].offset, layers[l].count);
      double gnorm = span_norm(grad, layers[l].offset, layers[l].count);
      report.max_layer_norm_dev = std::max(report.max_layer_norm_dev, std::abs(wnorm - 1.0));
      double eff = lr * gnorm / wnorm;
      report.max_effective_update = std::max(report.max_effective_update, eff);
      report.layer_peaks[l].effective_update =
          std::max(report.layer_peaks[l].effective_update, eff);
    }

    std::vector<double> f = trainer.probe_outputs();
    double df = 0, dth = 0;
    for (size_t i = 0; i < f.size(); ++i) df += (f[i] - prev_f[i]) * (f[i] - prev_f[i]);
    for (size_t i = 0; i < theta.size(); ++i)
      dth += (theta[i] - prev_theta[i]) * (theta[i] - prev_theta[i]);
    if (dth > 0)
      report.lipschitz_estimate =
          std::max(report.lipschitz_estimate, std::sqrt(df) / std::sqrt(dth));
    prev_theta = std::move(theta);
    prev_f = std::move(f);
  }

  report.bound = report.max_lr * std::sqrt(2.0) * report.lipschitz_estimate;
  report.satisfied = report.max_effective_update <= report.bound;
  return report;
}

}  // namespace xqc::distcrit
