#pragma once

#include <memory>

#include "xqc/diffcore/loss_function.hpp"
#include "xqc/netlib/network.hpp"

namespace xqc::sacloop {

// Critic Bellman loss at a frozen snapshot: fixed probe minibatch, fixed
// targets, eval-mode normalization. A deterministic function of the critic
// parameter span (both critics), suitable for spectral analysis.
class CriticBellmanLoss final : public diffcore::LossFunction {
public:
  CriticBellmanLoss(netlib::CriticNetwork c0, netlib::CriticNetwork c1, size_t critic_span,
                    MatD sa, MatD targets)
      : c0_(std::move(c0)), c1_(std::move(c1)), span_(critic_span), sa_(std::move(sa)),
        targets_(std::move(targets)) {
    bool ce = c0_.config.critic_loss == netlib::CriticLoss::CE;
    int want = ce ? c0_.config.atoms : 1;
    if (targets_.cols != want || targets_.rows != sa_.rows)
      throw ConfigError("critic loss probe: target shape mismatch");
  }

  size_t dim() const override { return span_; }
  int build(diffcore::Graph<double>& g) const override { return build_impl(g); }
  int build(diffcore::Graph<diffcore::Dual>& g) const override { return build_impl(g); }

private:
  netlib::CriticNetwork c0_, c1_;
  size_t span_;
  MatD sa_;
  MatD targets_;

  template <class T>
  int build_impl(diffcore::Graph<T>& g) const {
    int sa = g.constant(sa_);
    int total = -1;
    for (const netlib::CriticNetwork* net : {&c0_, &c1_}) {
      int out = netlib::append_critic(g, *net, sa, netlib::Mode::Eval);
      int loss = net->config.critic_loss == netlib::CriticLoss::CE
                     ? g.ce_with_logits_mean(out, targets_)
                     : g.mse_mean(out, targets_);
      total = total < 0 ? loss : g.add(total, loss);
    }
    return total;
  }
};

}  // namespace xqc::sacloop
