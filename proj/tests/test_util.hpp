#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "xqc/core/rng.hpp"
#include "xqc/diffcore/loss_function.hpp"

namespace xqc::test {

// Wraps a generic graph-builder lambda as a LossFunction so tests can probe
// individual primitives without declaring a class per case.
template <class F>
class GenericLoss final : public diffcore::LossFunction {
public:
  GenericLoss(size_t n, F f) : n_(n), f_(std::move(f)) {}
  size_t dim() const override { return n_; }
  int build(diffcore::Graph<double>& g) const override { return f_(g); }
  int build(diffcore::Graph<diffcore::Dual>& g) const override { return f_(g); }

private:
  size_t n_;
  F f_;
};

template <class F>
std::shared_ptr<diffcore::LossFunction> make_loss(size_t n, F f) {
  return std::make_shared<GenericLoss<F>>(n, std::move(f));
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

inline double eval_loss(const diffcore::LossFunction& f, const std::vector<double>& theta) {
  diffcore::Graph<double> g(theta);
  return g.scalar(f.build(g));
}

// Central-difference gradient of a loss at theta.
inline std::vector<double> fd_gradient(const diffcore::LossFunction& f, std::vector<double> theta,
                                       double h = 1e-5) {
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

// Central difference of the analytic gradient along direction v.
inline std::vector<double> fd_hvp(const diffcore::LossFunction& f,
                                  const std::vector<double>& theta,
                                  const std::vector<double>& v, double h = 1e-4) {
  std::vector<double> plus(theta), minus(theta);
  for (size_t i = 0; i < theta.size(); ++i) {
    plus[i] += h * v[i];
    minus[i] -= h * v[i];
  }
  auto gp = diffcore::value_and_grad(f, plus).grad;
  auto gm = diffcore::value_and_grad(f, minus).grad;
  std::vector<double> out(theta.size());
  for (size_t i = 0; i < theta.size(); ++i) out[i] = (gp[i] - gm[i]) / (2.0 * h);
  return out;
}

// Max deviation normalized by the reference vector's largest magnitude.
inline double rel_err_inf(const std::vector<double>& got, const std::vector<double>& ref,
                          double floor = 1e-12) {
  double scale = floor, dev = 0;
  for (double r : ref) scale = std::max(scale, std::abs(r));
  for (size_t i = 0; i < got.size(); ++i) dev = std::max(dev, std::abs(got[i] - ref[i]));
  return dev / scale;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// One-hidden-layer net with a chosen normalization, ending in a configurable
// loss. theta: [W1 (h x in), b1 (h), gamma (h), beta (h), W2 (out x h), b2 (out)].
enum class NormKind { None, Bn, Ln };

template <class T>
int small_net(diffcore::Graph<T>& g, const MatD& x, const MatD& target, int in, int h, int out,
              NormKind norm, bool ce_loss, bool relu_act = true) {
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

  int xc = g.constant(x);
  int z = g.add_rowvec(g.linear(xc, w1), b1);
  if (norm == NormKind::Bn) z = g.batchnorm_train(z, gamma, beta, 1e-5).var;
  if (norm == NormKind::Ln) z = g.layernorm(z, gamma, beta, 1e-5);
  z = relu_act ? g.relu(z) : g.tanh_(z);
  int y = g.add_rowvec(g.linear(z, w2), b2);
  if (ce_loss) return g.ce_with_logits_mean(y, target);
  return g.mse_mean(y, target);
}

inline size_t small_net_dim(int in, int h, int out) {
  return static_cast<size_t>(h) * in + 3 * h + static_cast<size_t>(out) * h + out;
}

inline MatD random_simplex_rows(int rows, int cols, Rng& rng) {
  MatD t(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double s = 0;
    for (int c = 0; c < cols; ++c) {
      double e = -std::log(1.0 - rng.uniform());
      t.at(r, c) = e;
      s += e;
    }
    for (int c = 0; c < cols; ++c) t.at(r, c) /= s;
  }
  return t;
}

}  // namespace xqc::test
