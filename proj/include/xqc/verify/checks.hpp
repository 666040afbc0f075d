#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "xqc/distcrit/losses.hpp"
#include "xqc/distcrit/support.hpp"
#include "xqc/envs/tasks.hpp"
#include "xqc/netlib/network.hpp"
#include "xqc/sacloop/trainer.hpp"
#include "xqc/spectra/stats.hpp"

namespace xqc::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

template <class F>
class BuilderLoss final : public diffcore::LossFunction {
public:
  BuilderLoss(size_t n, F f) : n_(n), f_(std::move(f)) {}
  size_t dim() const override { return n_; }
  int build(diffcore::Graph<double>& g) const override { return f_(g); }
  int build(diffcore::Graph<diffcore::Dual>& g) const override { return f_(g); }

private:
  size_t n_;
  F f_;
};

template <class F>
std::shared_ptr<diffcore::LossFunction> loss_of(size_t n, F f) {
  return std::make_shared<BuilderLoss<F>>(n, std::move(f));
}

inline std::vector<double> random_vec(size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

inline MatD random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  MatD m(r, c);
  for (auto& x : m.data) x = scale * rng.normal();
  return m;
}

inline MatD random_simplex(int rows, int cols, Rng& rng) {
  MatD t(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double s = 0;
    for (int c = 0; c < cols; ++c) {
      t.at(r, c) = -std::log(1.0 - rng.uniform());
      s += t.at(r, c);
    }
    for (int c = 0; c < cols; ++c) t.at(r, c) /= s;
  }
  return t;
}

inline double eval_loss(const diffcore::LossFunction& f, const std::vector<double>& theta) {
  diffcore::Graph<double> g(theta);
  return g.scalar(f.build(g));
}

inline std::vector<double> fd_gradient(const diffcore::LossFunction& f,
                                       std::vector<double> theta, double h = 1e-5) {
  std::vector<double> g(theta.size());
  for (size_t i = 0; i < theta.size(); ++i) {
    double orig = theta[i];
    theta[i] = orig + h;
    double up = eval_loss(f, theta);
    theta[i] = orig - h;
    double down = eval_loss(f, theta);
    theta[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double rel_err_inf(const std::vector<double>& got, const std::vector<double>& ref) {
  double scale = 1e-12, dev = 0;
  for (double r : ref) scale = std::max(scale, std::abs(r));
  for (size_t i = 0; i < got.size(); ++i) dev = std::max(dev, std::abs(got[i] - ref[i]));
  return dev / scale;
}

// Mirrors the shape used in training: linear -> norm -> relu -> head, with
// the chosen loss on top.
template <class T>
int probe_net(diffcore::Graph<T>& g, const MatD& x, const MatD& target, int in, int h, int out,
              netlib::Norm norm, bool ce) {
  size_t off = 0;
  int w1 = g.param_slice(off, h, in);
  off += static_cast<size_t>(h) * in;
  int b1 = g.param_slice(off, 1, h);
  off += h;
  int gamma = g.param_slice(off, 1, h);
  off += h;
  int beta = g.param_slice(off, 1, h);
  off += h;
  int w2 = g.param_slice(off, out, h);
  off += static_cast<size_t>(out) * h;
  int b2 = g.param_slice(off, 1, out);
  int z = g.add_rowvec(g.linear(g.constant(x), w1), b1);
  if (norm == netlib::Norm::BN) z = g.batchnorm_train(z, gamma, beta, 1e-5).var;
  if (norm == netlib::Norm::LN) z = g.layernorm(z, gamma, beta, 1e-5);
  z = g.relu(z);
  int y = g.add_rowvec(g.linear(z, w2), b2);
  return ce ? g.ce_with_logits_mean(y, target) : g.mse_mean(y, target);
}

inline size_t probe_net_dim(int in, int h, int out) {
  return static_cast<size_t>(h) * in + 3 * h + static_cast<size_t>(out) * h + out;
}

}  // namespace detail

// Analytic gradients against central differences for every layer primitive
// and both losses; Hessian-vector products against gradient differences and
// the symmetry identity.
inline CheckResult check_gradient_and_hvp_oracles() {
  using namespace detail;
  std::ostringstream os;
  bool pass = true;

  struct Case {
    const char* name;
    netlib::Norm norm;
    bool ce;
  };
  double worst_grad = 0;
  for (const Case& c : {Case{"dense+mse", netlib::Norm::None, false},
                        Case{"bn+mse", netlib::Norm::BN, false},
                        Case{"ln+mse", netlib::Norm::LN, false},
                        Case{"bn+ce", netlib::Norm::BN, true},
                        Case{"ln+ce", netlib::Norm::LN, true}}) {
    for (int trial = 0; trial < 4; ++trial) {
      Rng rng(4000 + trial);
      MatD x = random_mat(6, 3, rng);
      MatD t = c.ce ? random_simplex(6, 5, rng) : random_mat(6, 5, rng);
      auto loss = loss_of(probe_net_dim(3, 4, 5), [x, t, c](auto& g) {
        return probe_net(g, x, t, 3, 4, 5, c.norm, c.ce);
      });
      auto theta = random_vec(loss->dim(), rng, 0.7);
      auto vg = diffcore::value_and_grad(*loss, theta);
      worst_grad = std::max(worst_grad, rel_err_inf(vg.grad, fd_gradient(*loss, theta)));
    }
  }
  // elementwise primitives through a mixed chain
  for (int trial = 0; trial < 8; ++trial) {
    Rng rng(4400 + trial);
    auto loss = loss_of(6, [](auto& g) {
      int x = g.param_slice(0, 2, 3);
      int sm = g.softmax_rows(x);
      int chain = g.mul(g.tanh_(x), g.softplus(g.scale(x, 1.5)));
      chain = g.add(chain, g.min_elem(x, g.exp_(g.scale(x, 0.5))));
      chain = g.add(chain, g.log_(g.add_scalar(sm, 0.1)));
      chain = g.add(chain, g.clamp(x, -3.0, 3.0));
      int j = g.concat_rows(chain, g.scale(chain, -0.5));
      return g.mean_all(g.row_sum(g.slice_rows(j, 1, 2)));
    });
    auto theta = random_vec(6, rng);
    auto vg = diffcore::value_and_grad(*loss, theta);
    worst_grad = std::max(worst_grad, rel_err_inf(vg.grad, fd_gradient(*loss, theta)));
  }
  os << "grad-vs-fd " << fmt6(worst_grad);
  pass = pass && worst_grad < 1e-6;

  // hvp against central differences of gradients
  Rng rng(5000);
  MatD x = random_mat(8, 3, rng);
  MatD t = random_simplex(8, 5, rng);
  auto loss = loss_of(probe_net_dim(3, 6, 5), [x, t](auto& g) {
    return probe_net(g, x, t, 3, 6, 5, netlib::Norm::BN, true);
  });
  auto theta = random_vec(loss->dim(), rng, 0.7);
  diffcore::HvpOracle oracle(loss, theta);
  double worst_hvp = 0, worst_sym = 0;
  for (int trial = 0; trial < 6; ++trial) {
    auto v = random_vec(theta.size(), rng);
    auto hv = oracle.hvp(v);
    const double h = 1e-4;
    std::vector<double> plus(theta), minus(theta);
    for (size_t i = 0; i < theta.size(); ++i) {
      plus[i] += h * v[i];
      minus[i] -= h * v[i];
    }
    auto gp = diffcore::value_and_grad(*loss, plus).grad;
    auto gm = diffcore::value_and_grad(*loss, minus).grad;
    std::vector<double> fd(theta.size());
    for (size_t i = 0; i < theta.size(); ++i) fd[i] = (gp[i] - gm[i]) / (2 * h);
    worst_hvp = std::max(worst_hvp, rel_err_inf(hv, fd));

    auto u = random_vec(theta.size(), rng);
    auto hu = oracle.hvp(u);
    double uhv = 0, vhu = 0;
    for (size_t i = 0; i < u.size(); ++i) {
      uhv += u[i] * hv[i];
      vhu += v[i] * hu[i];
    }
    worst_sym =
        std::max(worst_sym, std::abs(uhv - vhu) / std::max({std::abs(uhv), std::abs(vhu), 1e-12}));
  }
  os << ", hvp-vs-fd " << fmt6(worst_hvp) << ", symmetry " << fmt6(worst_sym);
  pass = pass && worst_hvp < 1e-3 && worst_sym < 1e-8;
  return {"gradient and hvp oracles", pass, os.str()};
}

// Cross-entropy gradient norm bounded by sqrt(2); squared-error gradient norm
// equal to the error magnitude.
inline CheckResult check_loss_gradient_bounds() {
  double worst = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    Rng rng(66000 + trial);
    std::vector<double> logits(101);
    double scale = std::pow(10.0, rng.uniform(-2, 3));
    for (auto& v : logits) v = scale * rng.normal();
    distcrit::CategoricalValueDistribution t;
    t.probs.assign(101, 0.0);
    if (trial % 2 == 0) {
      // dense target on the simplex
      double mass = 0;
      for (auto& p : t.probs) {
        p = -std::log(1.0 - rng.uniform());
        mass += p;
      }
      for (auto& p : t.probs) p /= mass;
    } else {
      // two-atom target, the shape the categorical projection produces
      int i = static_cast<int>(rng.uniform_index(100));
      double w = rng.uniform();
      t.probs[i] = w;
      t.probs[i + 1] = 1.0 - w;
    }
    auto g = distcrit::ce_bellman_grad(logits, t);
    double n = 0;
    for (double v : g) n += v * v;
    worst = std::max(worst, std::sqrt(n));
  }
  bool pass = worst <= std::sqrt(2.0) + 1e-9;
  for (double c : {1.0, 10.0, 100.0})
    pass = pass && std::abs(distcrit::mse_bellman_grad(0.0, c)) == c;
  return {"loss gradient bounds", pass,
          "max ce grad norm " + fmt17(worst) + " vs sqrt(2) = " + fmt17(std::sqrt(2.0))};
}

// Categorical projection against a brute-force triangular-overlap oracle.
inline CheckResult check_projection_oracle() {
  distcrit::CategoricalSupport s(-5, 5, 11);
  double worst = 0, worst_mass = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Rng rng(91000 + trial);
    std::vector<double> w(11);
    double mass = 0;
    for (auto& p : w) {
      p = -std::log(1.0 - rng.uniform());
      mass += p;
    }
    for (auto& p : w) p /= mass;
    double r = rng.uniform(-8, 8), discount = rng.uniform(0, 1), shift = rng.uniform(-3, 3);
    auto got = distcrit::project_shifted(s, w, r, discount, shift);

    std::vector<double> expect(11, 0.0);
    for (int j = 0; j < 11; ++j) {
      double z = std::min(std::max(r + discount * (s.atom(j) + shift), s.v_min), s.v_max);
      for (int i = 0; i < 11; ++i) {
        double overlap = 1.0 - std::abs(z - s.atom(i)) / s.delta();
        if (overlap > 0) expect[i] += w[j] * overlap;
      }
    }
    double total = 0;
    for (int i = 0; i < 11; ++i) {
      worst = std::max(worst, std::abs(got.probs[i] - expect[i]));
      total += got.probs[i];
    }
    worst_mass = std::max(worst_mass, std::abs(total - 1.0));
  }
  // discount zero: exact delta at the reward atom
  auto delta = distcrit::project_target({0.0}, {1.0}, s);
  bool delta_exact = delta.probs[5] == 1.0;
  bool pass = worst <= 1e-12 && worst_mass <= 1e-12 && delta_exact;
  return {"categorical projection oracle", pass,
          "max dev " + fmt6(worst) + ", mass dev " + fmt6(worst_mass)};
}

// Scaling a hidden linear layer leaves normalized bodies unchanged in train
// mode and visibly changes the unnormalized one.
inline CheckResult check_scale_invariance() {
  Rng rng(31);
  MatD sa = detail::random_mat(16, 5, rng);
  auto run = [&](netlib::Norm norm, double lambda, int block) {
    netlib::ArchitectureConfig cfg;
    cfg.norm = norm;
    cfg.hidden_dim = 8;
    cfg.num_blocks = 2;
    cfg.atoms = 11;
    auto built = netlib::build_networks(cfg, 3, 2, 11);
    MatD base = netlib::critic_forward(built.critic[0], built.params, sa, netlib::Mode::Train);
    std::string prefix = "critic0/block" + std::to_string(block);
    for (const auto& e : built.params.layout)
      if (e.name == prefix + "/W" || e.name == prefix + "/b")
        for (size_t i = 0; i < e.count(); ++i) built.params.values[e.offset + i] *= lambda;
    MatD scaled = netlib::critic_forward(built.critic[0], built.params, sa, netlib::Mode::Train);
    double dev = 0;
    for (size_t i = 0; i < base.size(); ++i)
      dev = std::max(dev, std::abs(base.data[i] - scaled.data[i]));
    return dev;
  };
  double worst_norm = 0, best_dense = 1e300;
  for (double lambda : {0.5, 2.0, 10.0}) {
    for (int block : {0, 1}) {
      worst_norm = std::max(worst_norm, run(netlib::Norm::BN, lambda, block));
      worst_norm = std::max(worst_norm, run(netlib::Norm::LN, lambda, block));
      best_dense = std::min(best_dense, run(netlib::Norm::None, lambda, block));
    }
  }
  bool pass = worst_norm <= 1e-5 && best_dense > 1e-3;
  return {"scale invariance of normalized bodies", pass,
          "bn/ln max dev " + fmt6(worst_norm) + ", dense min dev " + fmt6(best_dense)};
}

// Unit frobenius norms after every update of a short projected run, plus
// bit-exact idempotence of the projection.
inline CheckResult check_weight_projection() {
  netlib::ArchitectureConfig arch;
  arch.hidden_dim = 8;
  arch.num_blocks = 1;
  arch.atoms = 11;
  sacloop::TrainerConfig cfg;
  cfg.batch_size = 16;
  cfg.warmup_steps = 32;
  cfg.utd = 1;
  cfg.probe_batch_size = 16;
  sacloop::Trainer trainer(envs::make_env("pendulum"), arch, cfg, 77);
  double worst = 0;
  for (int step = 0; step < 120; ++step) {
    trainer.step_once();
    if (trainer.critic_updates() > 0)
      for (const auto& [name, norm] : netlib::projected_norms(trainer.params()))
        worst = std::max(worst, std::abs(norm - 1.0));
  }
  auto params = trainer.params();
  netlib::project_weights(params);
  auto once = params.values;
  netlib::project_weights(params);
  bool idempotent = params.values == once;
  bool pass = trainer.critic_updates() > 0 && worst <= 1e-10 && idempotent;
  return {"weight projection unit norms", pass,
          "max |norm-1| " + fmt6(worst) + (idempotent ? ", idempotent" : ", NOT idempotent")};
}

inline CheckResult check_discount_heuristic() {
  bool pass = sacloop::discount_heuristic(1000, 2) == 0.99 &&
              sacloop::discount_heuristic(100, 5) == 0.95 &&
              sacloop::discount_heuristic(10000, 1) == 0.995;
  return {"discount heuristic clip cases", pass,
          fmt17(sacloop::discount_heuristic(1000, 2)) + ", " +
              fmt17(sacloop::discount_heuristic(100, 5)) + ", " +
              fmt17(sacloop::discount_heuristic(10000, 1))};
}

inline CheckResult check_iqm() {
  std::vector<double> v;
  for (int i = 0; i < 12; ++i) v.push_back(i);
  auto r = spectra::aggregate_iqm(v, 200, 1);
  bool pass = r.iqm == 5.5 && r.ci_low <= r.iqm && r.ci_high >= r.iqm;
  auto c = spectra::aggregate_iqm(std::vector<double>(7, 3.25), 200, 2);
  pass = pass && c.iqm == 3.25 && c.ci_low == 3.25 && c.ci_high == 3.25;
  return {"iqm and bootstrap interval", pass,
          "iqm(0..11) = " + fmt17(r.iqm) + ", constant ci degenerate"};
}

// The fast certificate suite behind `xqc verify`.
inline std::vector<CheckResult> run_fast_checks() {
  return {
      check_gradient_and_hvp_oracles(), check_loss_gradient_bounds(), check_projection_oracle(),
      check_scale_invariance(),         check_weight_projection(),    check_discount_heuristic(),
      check_iqm(),
  };
}

}  // namespace xqc::verify
