#pragma once

#include <memory>
#include <vector>

#include "xqc/diffcore/graph.hpp"
#include "xqc/diffcore/param_vector.hpp"

namespace xqc::diffcore {

// A scalar loss over a flattened parameter vector, buildable on a double
// graph (gradients) and a dual graph (Hessian-vector products). Minibatch
// data, if any, is captured inside the concrete loss at construction.
class LossFunction {
public:
  virtual ~LossFunction() = default;
  virtual size_t dim() const = 0;
  virtual int build(Graph<double>& g) const = 0;
  virtual int build(Graph<Dual>& g) const = 0;
};

struct ValueGrad {
  double value = 0;
  std::vector<double> grad;
};

inline ValueGrad value_and_grad(const LossFunction& f, const std::vector<double>& theta) {
  if (theta.size() != f.dim())
    throw ConfigError("value_and_grad: theta length does not match loss layer set");
  Graph<double> g(theta);
  int loss = f.build(g);
  g.backward(loss);
  return {g.scalar(loss), g.param_gradient()};
}

inline ValueGrad value_and_grad(const LossFunction& f, const ParamVector& theta) {
  return value_and_grad(f, theta.values);
}

// Binds a loss evaluation at fixed parameters; exposes v -> H v computed as
// the directional derivative of the reverse-mode gradient. Immutable after
// construction: concurrent hvp() calls are safe.
class HvpOracle {
public:
  HvpOracle(std::shared_ptr<const LossFunction> loss, std::vector<double> theta)
      : loss_(std::move(loss)), theta_(std::move(theta)) {
    if (theta_.size() != loss_->dim())
      throw ConfigError("HvpOracle: theta length does not match loss layer set");
  }

  size_t dim() const { return theta_.size(); }
  const std::vector<double>& theta() const { return theta_; }

  std::vector<double> hvp(const std::vector<double>& v) const {
    if (v.size() != theta_.size()) throw ConfigError("hvp: direction length mismatch");
    std::vector<Dual> th(theta_.size());
    for (size_t i = 0; i < th.size(); ++i) th[i] = {theta_[i], v[i]};
    Graph<Dual> g(std::move(th));
    int loss = loss_->build(g);
    g.backward(loss);
    std::vector<Dual> grad = g.param_gradient();
    std::vector<double> out(grad.size());
    for (size_t i = 0; i < grad.size(); ++i) out[i] = grad[i].d;
    return out;
  }

  double loss_value() const {
    Graph<double> g(theta_);
    return g.scalar(loss_->build(g));
  }

private:
  std::shared_ptr<const LossFunction> loss_;
  std::vector<double> theta_;
};

// Assembles the full Hessian column-by-column from basis-vector products.
// Test oracle only; refuses dimensions above the cap to protect memory.
inline MatD dense_hessian(const HvpOracle& oracle, size_t dim_cap = 4096) {
  const size_t n = oracle.dim();
  if (n > dim_cap)
    throw PreconditionError("dense_hessian: dimension " + std::to_string(n) + " exceeds cap " +
                            std::to_string(dim_cap));
  MatD h(static_cast<int>(n), static_cast<int>(n));
  std::vector<double> e(n, 0.0);
  for (size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    std::vector<double> col = oracle.hvp(e);
    e[j] = 0.0;
    for (size_t i = 0; i < n; ++i) h.at(static_cast<int>(i), static_cast<int>(j)) = col[i];
  }
  double max_abs = 0, max_asym = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i; j < n; ++j) {
      max_abs = std::max(max_abs, std::abs(h.at(i, j)));
      max_asym = std::max(max_asym, std::abs(h.at(i, j) - h.at(j, i)));
    }
  if (max_abs > 0 && max_asym > 1e-8 * max_abs)
    throw NumericError("dense_hessian: asymmetry " + std::to_string(max_asym / max_abs));
  return h;
}

// Convenience loss for tests and calibration: 0.5 * theta' A theta with a
// fixed symmetric matrix A.
class QuadraticLoss final : public LossFunction {
public:
  explicit QuadraticLoss(MatD a) : a_(std::move(a)) {
    if (a_.rows != a_.cols) throw ConfigError("QuadraticLoss: A must be square");
  }
  size_t dim() const override { return static_cast<size_t>(a_.rows); }
  int build(Graph<double>& g) const override { return build_impl(g); }
  int build(Graph<Dual>& g) const override { return build_impl(g); }

private:
  MatD a_;

  template <class T>
  int build_impl(Graph<T>& g) const {
    int theta_row = g.param_slice(0, 1, a_.rows);     // [1, n]
    int a = g.constant(a_);                           // [n, n]
    int ath = g.linear(theta_row, a);                 // [1, n] = theta' A'; A symmetric
    int prod = g.mul(theta_row, ath);                 // elementwise theta_i (A theta)_i
    int s = g.row_sum(prod);                          // [1, 1]
    return g.scale(s, 0.5);
  }
};

}  // namespace xqc::diffcore
