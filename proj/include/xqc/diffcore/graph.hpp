#pragma once

#include <memory>
#include <string>
#include <vector>

#include "xqc/core/common.hpp"
#include "xqc/diffcore/dual.hpp"
#include "xqc/diffcore/matops.hpp"

namespace xqc::diffcore {

enum class Op : uint8_t {
  ParamSlice,
  Linear,
  AddRowVec,
  BatchNormTrain,
  BatchNormEval,
  LayerNorm,
  Relu,
  Tanh,
  SoftmaxRows,
  Exp,
  Log,
  Softplus,
  Clamp,
  Add,
  Sub,
  Mul,
  MinElem,
  Scale,
  AddScalar,
  ConcatRows,
  ConcatCols,
  SliceRows,
  RowSum,
  MeanAll,
  CeWithLogitsMean,
  MseMean,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::ParamSlice: return "param_slice";
    case Op::Linear: return "linear";
    case Op::AddRowVec: return "add_rowvec";
    case Op::BatchNormTrain: return "batchnorm_train";
    case Op::BatchNormEval: return "batchnorm_eval";
    case Op::LayerNorm: return "layernorm";
    case Op::Relu: return "relu";
    case Op::Tanh: return "tanh";
    case Op::SoftmaxRows: return "softmax_rows";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Softplus: return "softplus";
    case Op::Clamp: return "clamp";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::MinElem: return "min_elem";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::ConcatRows: return "concat_rows";
    case Op::ConcatCols: return "concat_cols";
    case Op::SliceRows: return "slice_rows";
    case Op::RowSum: return "row_sum";
    case Op::MeanAll: return "mean_all";
    case Op::CeWithLogitsMean: return "ce_with_logits_mean";
    case Op::MseMean: return "mse_mean";
  }
  return "?";
}

struct BnHandle {
  int var = -1;
  int node = -1;
};

// Eager tape over matrix-level primitives. Building an expression computes
// its forward value immediately and records a node; backward() then walks the
// nodes in reverse. The scalar type T is double/float for plain gradients and
// Dual for Hessian-vector products.
template <class T>
class Graph {
public:
  explicit Graph(std::vector<T> theta) {
    Matrix<T> m(static_cast<int>(theta.size()), 1);
    m.data = std::move(theta);
    vals_.push_back(std::move(m));
    needs_grad_.push_back(true);
  }

  int num_vars() const { return static_cast<int>(vals_.size()); }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const Matrix<T>& val(int v) const { return vals_[v]; }
  const Matrix<T>& grad(int v) const { return grads_[v]; }
  double scalar(int v) const { return value(vals_[v].data[0]); }
  size_t param_dim() const { return vals_[0].size(); }

  int constant(const MatD& m) {
    Matrix<T> c(m.rows, m.cols);
    for (size_t i = 0; i < m.size(); ++i) c.data[i] = T(m.data[i]);
    return add_var(std::move(c), false);
  }

  int param_slice(size_t offset, int rows, int cols) {
    size_t n = static_cast<size_t>(rows) * cols;
    if (offset + n > vals_[0].size()) throw ConfigError("param_slice out of range");
    Node nd;
    nd.op = Op::ParamSlice;
    nd.in0 = 0;
    nd.i0 = static_cast<int64_t>(offset);
    return emit(nd, rows, cols);
  }

  // y[B,out] = x[B,in] * W^T with W stored [out,in].
  int linear(int x, int w) {
    expect(vals_[x].cols == vals_[w].cols, "linear: inner dims");
    Node nd;
    nd.op = Op::Linear;
    nd.in0 = x;
    nd.in1 = w;
    return emit(nd, vals_[x].rows, vals_[w].rows);
  }

  int add_rowvec(int x, int b) {
    expect(vals_[b].rows == 1 && vals_[b].cols == vals_[x].cols, "add_rowvec: shape");
    Node nd;
    nd.op = Op::AddRowVec;
    nd.in0 = x;
    nd.in1 = b;
    return emit(nd, vals_[x].rows, vals_[x].cols);
  }

  BnHandle batchnorm_train(int x, int gamma, int beta, double eps) {
    if (vals_[x].rows < 2)
      throw PreconditionError("batchnorm_train: batch size must be >= 2");
    Node nd;
    nd.op = Op::BatchNormTrain;
    nd.in0 = x;
    nd.in1 = gamma;
    nd.in2 = beta;
    nd.c0 = eps;
    int v = emit(nd, vals_[x].rows, vals_[x].cols);
    return {v, static_cast<int>(nodes_.size()) - 1};
  }

  // running mean in stats row 0, running var in row 1 (treated as constants).
  int batchnorm_eval(int x, int gamma, int beta, const MatD& stats, double eps) {
    expect(stats.rows == 2 && stats.cols == vals_[x].cols, "batchnorm_eval: stats shape");
    Node nd;
    nd.op = Op::BatchNormEval;
    nd.in0 = x;
    nd.in1 = gamma;
    nd.in2 = beta;
    nd.c0 = eps;
    nd.cdata = stats;
    return emit(nd, vals_[x].rows, vals_[x].cols);
  }

  int layernorm(int x, int gamma, int beta, double eps) {
    Node nd;
    nd.op = Op::LayerNorm;
    nd.in0 = x;
    nd.in1 = gamma;
    nd.in2 = beta;
    nd.c0 = eps;
    return emit(nd, vals_[x].rows, vals_[x].cols);
  }

  int relu(int x) { return unary(Op::Relu, x); }
  int tanh_(int x) { return unary(Op::Tanh, x); }
  int softmax_rows(int x) { return unary(Op::SoftmaxRows, x); }
  int exp_(int x) { return unary(Op::Exp, x); }
  int log_(int x) { return unary(Op::Log, x); }
  int softplus(int x) { return unary(Op::Softplus, x); }

  int clamp(int x, double lo, double hi) {
    Node nd;
    nd.op = Op::Clamp;
    nd.in0 = x;
    nd.c0 = lo;
    nd.c1 = hi;
    return emit(nd, vals_[x].rows, vals_[x].cols);
  }

  int add(int a, int b) { return binary(Op::Add, a, b); }
  int sub(int a, int b) { return binary(Op::Sub, a, b); }
  int mul(int a, int b) { return binary(Op::Mul, a, b); }
  int min_elem(int a, int b) { return binary(Op::MinElem, a, b); }

  int scale(int x, double c) {
    Node nd;
    nd.op = Op::Scale;
    nd.in0 = x;
    nd.c0 = c;
    return emit(nd, vals_[x].rows, vals_[x].cols);
  }

  int add_scalar(int x, double c) {
    Node nd;
    nd.op = Op::AddScalar;
    nd.in0 = x;
    nd.c0 = c;
    return emit(nd, vals_[x].rows, vals_[x].cols);
  }

  int concat_rows(int a, int b) {
    expect(vals_[a].cols == vals_[b].cols, "concat_rows: cols");
    Node nd;
    nd.op = Op::ConcatRows;
    nd.in0 = a;
    nd.in1 = b;
    return emit(nd, vals_[a].rows + vals_[b].rows, vals_[a].cols);
  }

  int concat_cols(int a, int b) {
    expect(vals_[a].rows == vals_[b].rows, "concat_cols: rows");
    Node nd;
    nd.op = Op::ConcatCols;
    nd.in0 = a;
    nd.in1 = b;
    return emit(nd, vals_[a].rows, vals_[a].cols + vals_[b].cols);
  }

  int slice_rows(int x, int r0, int n) {
    expect(r0 >= 0 && r0 + n <= vals_[x].rows, "slice_rows: range");
    Node nd;
    nd.op = Op::SliceRows;
    nd.in0 = x;
    nd.i0 = r0;
    nd.i1 = n;
    return emit(nd, n, vals_[x].cols);
  }

  int row_sum(int x) {
    Node nd;
    nd.op = Op::RowSum;
    nd.in0 = x;
    return emit(nd, vals_[x].rows, 1);
  }

  int mean_all(int x) {
    Node nd;
    nd.op = Op::MeanAll;
    nd.in0 = x;
    return emit(nd, 1, 1);
  }

  int ce_with_logits_mean(int logits, const MatD& target_probs) {
    expect(target_probs.rows == vals_[logits].rows && target_probs.cols == vals_[logits].cols,
           "ce: target shape");
    Node nd;
    nd.op = Op::CeWithLogitsMean;
    nd.in0 = logits;
    nd.cdata = target_probs;
    return emit(nd, 1, 1);
  }

  int mse_mean(int pred, const MatD& target) {
    expect(target.rows == vals_[pred].rows && target.cols == vals_[pred].cols,
           "mse: target shape");
    Node nd;
    nd.op = Op::MseMean;
    nd.in0 = pred;
    nd.cdata = target;
    return emit(nd, 1, 1);
  }

  // Batch statistics recorded by the most recent evaluation of a
  // BatchNormTrain node (value parts only).
  void bn_batch_stats(int node, MatD& mean, MatD& var) const {
    const Node& nd = nodes_[node];
    expect(nd.op == Op::BatchNormTrain, "bn_batch_stats: wrong node");
    mean = nd.stat_mean;
    var = nd.stat_var;
  }

  // Re-executes every recorded node in order; values are overwritten with
  // bit-identical results (same code path as eager construction).
  void replay() {
    for (size_t i = 0; i < nodes_.size(); ++i) compute(static_cast<int>(i));
  }

  void backward(int loss_var) {
    expect(vals_[loss_var].rows == 1 && vals_[loss_var].cols == 1, "backward: loss not scalar");
    grads_.assign(vals_.size(), Matrix<T>());
    for (size_t v = 0; v < vals_.size(); ++v)
      if (needs_grad_[v]) grads_[v] = Matrix<T>(vals_[v].rows, vals_[v].cols);
    if (!needs_grad_[loss_var]) return;  // loss independent of parameters
    grads_[loss_var].data[0] = T(1);
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) backprop(i);
  }

  std::vector<T> param_gradient() const {
    if (grads_.empty()) throw PreconditionError("param_gradient: run backward first");
    return grads_[0].data;
  }

private:
  struct Node {
    Op op;
    int out = -1;
    int in0 = -1, in1 = -1, in2 = -1;
    int64_t i0 = 0;
    int i1 = 0;
    double c0 = 0, c1 = 0;
    MatD cdata;            // constant payload (targets, running stats)
    Matrix<T> cache0;      // op-specific forward caches
    Matrix<T> cache1;
    MatD stat_mean, stat_var;  // BatchNormTrain batch statistics
  };

  std::vector<Matrix<T>> vals_;
  std::vector<Matrix<T>> grads_;
  std::vector<bool> needs_grad_;
  std::vector<Node> nodes_;

  static void expect(bool ok, const char* msg) {
    if (!ok) throw ConfigError(std::string("graph: ") + msg);
  }

  int add_var(Matrix<T> m, bool needs) {
    vals_.push_back(std::move(m));
    needs_grad_.push_back(needs);
    return static_cast<int>(vals_.size()) - 1;
  }

  int unary(Op op, int x) {
    Node nd;
    nd.op = op;
    nd.in0 = x;
    return emit(nd, vals_[x].rows, vals_[x].cols);
  }

  int binary(Op op, int a, int b) {
    expect(vals_[a].rows == vals_[b].rows && vals_[a].cols == vals_[b].cols, "binary: shape");
    Node nd;
    nd.op = op;
    nd.in0 = a;
    nd.in1 = b;
    return emit(nd, vals_[a].rows, vals_[a].cols);
  }

  int emit(Node nd, int out_rows, int out_cols) {
    bool needs = false;
    for (int in : {nd.in0, nd.in1, nd.in2})
      if (in >= 0 && needs_grad_[in]) needs = true;
    int out = add_var(Matrix<T>(out_rows, out_cols), needs);
    nd.out = out;
    nodes_.push_back(std::move(nd));
    compute(static_cast<int>(nodes_.size()) - 1);
    return out;
  }

  void check_finite(const Node& nd, int node_id) const {
    const Matrix<T>& y = vals_[nd.out];
    for (const T& t : y.data)
      if (!std::isfinite(value(t)))
        throw NumericError(std::string("non-finite value in ") + op_name(nd.op) + " node " +
                           std::to_string(node_id));
  }

  static T stable_softplus(const T& x) {
    using std::exp;
    using std::log1p;
    if (value(x) > 0) return x + log1p(exp(T(0) - x));
    return log1p(exp(x));
  }

  void compute(int node_id) {
    Node& nd = nodes_[node_id];
    const int out = nd.out;
    Matrix<T>& y = vals_[out];
    switch (nd.op) {
      case Op::ParamSlice: {
        const Matrix<T>& th = vals_[0];
        size_t off = static_cast<size_t>(nd.i0);
        for (size_t i = 0; i < y.size(); ++i) y.data[i] = th.data[off + i];
        break;
      }
      case Op::Linear:
        gemm(vals_[nd.in0], false, vals_[nd.in1], true, y, false);
        break;
      case Op::AddRowVec: {
        const Matrix<T>& x = vals_[nd.in0];
        const Matrix<T>& b = vals_[nd.in1];
        for (int r = 0; r < x.rows; ++r)
          for (int c = 0; c < x.cols; ++c) y.at(r, c) = x.at(r, c) + b.at(0, c);
        break;
      }
      case Op::BatchNormTrain: {
        const Matrix<T>& x = vals_[nd.in0];
        const Matrix<T>& gamma = vals_[nd.in1];
        const Matrix<T>& beta = vals_[nd.in2];
        const int B = x.rows, F = x.cols;
        nd.cache0 = Matrix<T>(B, F);   // xhat
        nd.cache1 = Matrix<T>(1, F);   // inv_std
        nd.stat_mean = MatD(1, F);
        nd.stat_var = MatD(1, F);
        for (int c = 0; c < F; ++c) {
          T mu(0);
          for (int r = 0; r < B; ++r) mu += x.at(r, c);
          mu = mu / double(B);
          T var(0);
          for (int r = 0; r < B; ++r) {
            T d = x.at(r, c) - mu;
            var += d * d;
          }
          var = var / double(B);
          using std::sqrt;
          T inv = T(1) / sqrt(var + nd.c0);
          nd.cache1.at(0, c) = inv;
          nd.stat_mean.at(0, c) = value(mu);
          nd.stat_var.at(0, c) = value(var);
          for (int r = 0; r < B; ++r) {
            T xh = (x.at(r, c) - mu) * inv;
            nd.cache0.at(r, c) = xh;
            y.at(r, c) = gamma.at(0, c) * xh + beta.at(0, c);
          }
        }
        break;
      }
      case Op::BatchNormEval: {
        const Matrix<T>& x = vals_[nd.in0];
        const Matrix<T>& gamma = vals_[nd.in1];
        const Matrix<T>& beta = vals_[nd.in2];
        for (int c = 0; c < x.cols; ++c) {
          double inv = 1.0 / std::sqrt(nd.cdata.at(1, c) + nd.c0);
          double mu = nd.cdata.at(0, c);
          for (int r = 0; r < x.rows; ++r)
            y.at(r, c) = gamma.at(0, c) * ((x.at(r, c) - mu) * inv) + beta.at(0, c);
        }
        break;
      }
      case Op::LayerNorm: {
        const Matrix<T>& x = vals_[nd.in0];
        const Matrix<T>& gamma = vals_[nd.in1];
        const Matrix<T>& beta = vals_[nd.in2];
        const int B = x.rows, F = x.cols;
        nd.cache0 = Matrix<T>(B, F);  // xhat
        nd.cache1 = Matrix<T>(B, 1);  // inv_std per row
        for (int r = 0; r < B; ++r) {
          T mu(0);
          for (int c = 0; c < F; ++c) mu += x.at(r, c);
          mu = mu / double(F);
          T var(0);
          for (int c = 0; c < F; ++c) {
            T d = x.at(r, c) - mu;
            var += d * d;
          }
          var = var / double(F);
          using std::sqrt;
          T inv = T(1) / sqrt(var + nd.c0);
          nd.cache1.at(r, 0) = inv;
          for (int c = 0; c < F; ++c) {
            T xh = (x.at(r, c) - mu) * inv;
            nd.cache0.at(r, c) = xh;
            y.at(r, c) = gamma.at(0, c) * xh + beta.at(0, c);
          }
        }
        break;
      }
      case Op::Relu: {
        const Matrix<T>& x = vals_[nd.in0];
        for (size_t i = 0; i < x.size(); ++i)
          y.data[i] = value(x.data[i]) > 0 ? x.data[i] : T(0);
        break;
      }
      case Op::Tanh: {
        using std::tanh;
        const Matrix<T>& x = vals_[nd.in0];
        for (size_t i = 0; i < x.size(); ++i) y.data[i] = tanh(x.data[i]);
        break;
      }
      case Op::SoftmaxRows: {
        using std::exp;
        const Matrix<T>& x = vals_[nd.in0];
        for (int r = 0; r < x.rows; ++r) {
          double mx = value(x.at(r, 0));
          for (int c = 1; c < x.cols; ++c) mx = std::max(mx, value(x.at(r, c)));
          T denom(0);
          for (int c = 0; c < x.cols; ++c) {
            T e = exp(x.at(r, c) - mx);
            y.at(r, c) = e;
            denom += e;
          }
          for (int c = 0; c < x.cols; ++c) y.at(r, c) = y.at(r, c) / denom;
        }
        check_finite(nd, node_id);
        break;
      }
      case Op::Exp: {
        using std::exp;
        const Matrix<T>& x = vals_[nd.in0];
        for (size_t i = 0; i < x.size(); ++i) y.data[i] = exp(x.data[i]);
        check_finite(nd, node_id);
        break;
      }
      case Op::Log: {
        using std::log;
        const Matrix<T>& x = vals_[nd.in0];
        for (size_t i = 0; i < x.size(); ++i) y.data[i] = log(x.data[i]);
        check_finite(nd, node_id);
        break;
      }
      case Op::Softplus: {
        const Matrix<T>& x = vals_[nd.in0];
        for (size_t i = 0; i < x.size(); ++i) y.data[i] = stable_softplus(x.data[i]);
        break;
      }
      case Op::Clamp: {
        const Matrix<T>& x = vals_[nd.in0];
        for (size_t i = 0; i < x.size(); ++i) {
          double v = value(x.data[i]);
          y.data[i] = v < nd.c0 ? T(nd.c0) : (v > nd.c1 ? T(nd.c1) : x.data[i]);
        }
        break;
      }
      case Op::Add: {
        const Matrix<T>& a = vals_[nd.in0];
        const Matrix<T>& b = vals_[nd.in1];
        for (size_t i = 0; i < a.size(); ++i) y.data[i] = a.data[i] + b.data[i];
        break;
      }
      case Op::Sub: {
        const Matrix<T>& a = vals_[nd.in0];
        const Matrix<T>& b = vals_[nd.in1];
        for (size_t i = 0; i < a.size(); ++i) y.data[i] = a.data[i] - b.data[i];
        break;
      }
      case Op::Mul: {
        const Matrix<T>& a = vals_[nd.in0];
        const Matrix<T>& b = vals_[nd.in1];
        for (size_t i = 0; i < a.size(); ++i) y.data[i] = a.data[i] * b.data[i];
        break;
      }
      case Op::MinElem: {
        const Matrix<T>& a = vals_[nd.in0];
        const Matrix<T>& b = vals_[nd.in1];
        for (size_t i = 0; i < a.size(); ++i)
          y.data[i] = value(a.data[i]) <= value(b.data[i]) ? a.data[i] : b.data[i];
        break;
      }
      case Op::Scale: {
        const Matrix<T>& x = vals_[nd.in0];
        for (size_t i = 0; i < x.size(); ++i) y.data[i] = nd.c0 * x.data[i];
        break;
      }
      case Op::AddScalar: {
        const Matrix<T>& x = vals_[nd.in0];
        for (size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] + nd.c0;
        break;
      }
      case Op::ConcatRows: {
        const Matrix<T>& a = vals_[nd.in0];
        const Matrix<T>& b = vals_[nd.in1];
        std::copy(a.data.begin(), a.data.end(), y.data.begin());
        std::copy(b.data.begin(), b.data.end(), y.data.begin() + a.size());
        break;
      }
      case Op::ConcatCols: {
        const Matrix<T>& a = vals_[nd.in0];
        const Matrix<T>& b = vals_[nd.in1];
        for (int r = 0; r < a.rows; ++r) {
          for (int c = 0; c < a.cols; ++c) y.at(r, c) = a.at(r, c);
          for (int c = 0; c < b.cols; ++c) y.at(r, a.cols + c) = b.at(r, c);
        }
        break;
      }
      case Op::SliceRows: {
        const Matrix<T>& x = vals_[nd.in0];
        int r0 = static_cast<int>(nd.i0);
        for (int r = 0; r < y.rows; ++r)
          for (int c = 0; c < y.cols; ++c) y.at(r, c) = x.at(r0 + r, c);
        break;
      }
      case Op::RowSum: {
        const Matrix<T>& x = vals_[nd.in0];
        for (int r = 0; r < x.rows; ++r) {
          T s(0);
          for (int c = 0; c < x.cols; ++c) s += x.at(r, c);
          y.at(r, 0) = s;
        }
        break;
      }
      case Op::MeanAll: {
        const Matrix<T>& x = vals_[nd.in0];
        T s(0);
        for (size_t i = 0; i < x.size(); ++i) s += x.data[i];
        y.data[0] = s / double(x.size());
        break;
      }
      case Op::CeWithLogitsMean: {
        using std::exp;
        using std::log;
        const Matrix<T>& x = vals_[nd.in0];
        const int B = x.rows, m = x.cols;
        nd.cache0 = Matrix<T>(B, m);  // softmax probabilities
        T total(0);
        for (int r = 0; r < B; ++r) {
          double mx = value(x.at(r, 0));
          for (int c = 1; c < m; ++c) mx = std::max(mx, value(x.at(r, c)));
          T denom(0);
          for (int c = 0; c < m; ++c) {
            T e = exp(x.at(r, c) - mx);
            nd.cache0.at(r, c) = e;
            denom += e;
          }
          T lse = log(denom) + mx;
          for (int c = 0; c < m; ++c) {
            nd.cache0.at(r, c) = nd.cache0.at(r, c) / denom;
            double t = nd.cdata.at(r, c);
            if (t != 0.0) total += t * (lse - x.at(r, c));
          }
        }
        y.data[0] = total / double(B);
        check_finite(nd, node_id);
        break;
      }
      case Op::MseMean: {
        const Matrix<T>& p = vals_[nd.in0];
        T total(0);
        for (size_t i = 0; i < p.size(); ++i) {
          T d = p.data[i] - nd.cdata.data[i];
          total += 0.5 * (d * d);
        }
        y.data[0] = total / double(p.size());
        check_finite(nd, node_id);
        break;
      }
    }
  }

  void backprop(int node_id) {
    Node& nd = nodes_[node_id];
    if (!needs_grad_[nd.out]) return;
    const Matrix<T>& gy = grads_[nd.out];
    switch (nd.op) {
      case Op::ParamSlice: {
        Matrix<T>& gth = grads_[0];
        size_t off = static_cast<size_t>(nd.i0);
        for (size_t i = 0; i < gy.size(); ++i) gth.data[off + i] += gy.data[i];
        break;
      }
      case Op::Linear: {
        if (needs_grad_[nd.in0]) gemm(gy, false, vals_[nd.in1], false, grads_[nd.in0], true);
        if (needs_grad_[nd.in1]) gemm(gy, true, vals_[nd.in0], false, grads_[nd.in1], true);
        break;
      }
      case Op::AddRowVec: {
        if (needs_grad_[nd.in0]) {
          Matrix<T>& gx = grads_[nd.in0];
          for (size_t i = 0; i < gy.size(); ++i) gx.data[i] += gy.data[i];
        }
        if (needs_grad_[nd.in1]) {
          Matrix<T>& gb = grads_[nd.in1];
          for (int r = 0; r < gy.rows; ++r)
            for (int c = 0; c < gy.cols; ++c) gb.at(0, c) += gy.at(r, c);
        }
        break;
      }
      case Op::BatchNormTrain: {
        const Matrix<T>& gamma = vals_[nd.in1];
        const int B = gy.rows, F = gy.cols;
        for (int c = 0; c < F; ++c) {
          T sum_dxh(0), sum_dxh_xh(0);
          for (int r = 0; r < B; ++r) {
            T dxh = gy.at(r, c) * gamma.at(0, c);
            sum_dxh += dxh;
            sum_dxh_xh += dxh * nd.cache0.at(r, c);
          }
          if (needs_grad_[nd.in1]) {
            T gg(0);
            for (int r = 0; r < B; ++r) gg += gy.at(r, c) * nd.cache0.at(r, c);
            grads_[nd.in1].at(0, c) += gg;
          }
          if (needs_grad_[nd.in2]) {
            T gb(0);
            for (int r = 0; r < B; ++r) gb += gy.at(r, c);
            grads_[nd.in2].at(0, c) += gb;
          }
          if (needs_grad_[nd.in0]) {
            T mean_dxh = sum_dxh / double(B);
            T mean_dxh_xh = sum_dxh_xh / double(B);
            T inv = nd.cache1.at(0, c);
            for (int r = 0; r < B; ++r) {
              T dxh = gy.at(r, c) * gamma.at(0, c);
              grads_[nd.in0].at(r, c) +=
                  inv * (dxh - mean_dxh - nd.cache0.at(r, c) * mean_dxh_xh);
            }
          }
        }
        break;
      }
      case Op::BatchNormEval: {
        const Matrix<T>& x = vals_[nd.in0];
        const Matrix<T>& gamma = vals_[nd.in1];
        for (int c = 0; c < gy.cols; ++c) {
          double inv = 1.0 / std::sqrt(nd.cdata.at(1, c) + nd.c0);
          double mu = nd.cdata.at(0, c);
          for (int r = 0; r < gy.rows; ++r) {
            if (needs_grad_[nd.in0])
              grads_[nd.in0].at(r, c) += gy.at(r, c) * gamma.at(0, c) * inv;
            if (needs_grad_[nd.in1])
              grads_[nd.in1].at(0, c) += gy.at(r, c) * ((x.at(r, c) - mu) * inv);
            if (needs_grad_[nd.in2]) grads_[nd.in2].at(0, c) += gy.at(r, c);
          }
        }
        break;
      }
      case Op::LayerNorm: {
        const Matrix<T>& gamma = vals_[nd.in1];
        const int B = gy.rows, F = gy.cols;
        for (int r = 0; r < B; ++r) {
          T sum_dxh(0), sum_dxh_xh(0);
          for (int c = 0; c < F; ++c) {
            T dxh = gy.at(r, c) * gamma.at(0, c);
            sum_dxh += dxh;
            sum_dxh_xh += dxh * nd.cache0.at(r, c);
          }
          T mean_dxh = sum_dxh / double(F);
          T mean_dxh_xh = sum_dxh_xh / double(F);
          T inv = nd.cache1.at(r, 0);
          for (int c = 0; c < F; ++c) {
            if (needs_grad_[nd.in0]) {
              T dxh = gy.at(r, c) * gamma.at(0, c);
              grads_[nd.in0].at(r, c) +=
                  inv * (dxh - mean_dxh - nd.cache0.at(r, c) * mean_dxh_xh);
            }
            if (needs_grad_[nd.in1]) grads_[nd.in1].at(0, c) += gy.at(r, c) * nd.cache0.at(r, c);
            if (needs_grad_[nd.in2]) grads_[nd.in2].at(0, c) += gy.at(r, c);
          }
        }
        break;
      }
      case Op::Relu: {
        if (!needs_grad_[nd.in0]) break;
        const Matrix<T>& x = vals_[nd.in0];
        Matrix<T>& gx = grads_[nd.in0];
        for (size_t i = 0; i < gy.size(); ++i)
          if (value(x.data[i]) > 0) gx.data[i] += gy.data[i];
        break;
      }
      case Op::Tanh: {
        if (!needs_grad_[nd.in0]) break;
        const Matrix<T>& y = vals_[nd.out];
        Matrix<T>& gx = grads_[nd.in0];
        for (size_t i = 0; i < gy.size(); ++i)
          gx.data[i] += gy.data[i] * (T(1) - y.data[i] * y.data[i]);
        break;
      }
      case Op::SoftmaxRows: {
        if (!needs_grad_[nd.in0]) break;
        const Matrix<T>& y = vals_[nd.out];
        Matrix<T>& gx = grads_[nd.in0];
        for (int r = 0; r < y.rows; ++r) {
          T dot(0);
          for (int c = 0; c < y.cols; ++c) dot += gy.at(r, c) * y.at(r, c);
          for (int c = 0; c < y.cols; ++c)
            gx.at(r, c) += y.at(r, c) * (gy.at(r, c) - dot);
        }
        break;
      }
      case Op::Exp: {
        if (!needs_grad_[nd.in0]) break;
        const Matrix<T>& y = vals_[nd.out];
        Matrix<T>& gx = grads_[nd.in0];
        for (size_t i = 0; i < gy.size(); ++i) gx.data[i] += gy.data[i] * y.data[i];
        break;
      }
      case Op::Log: {
        if (!needs_grad_[nd.in0]) break;
        const Matrix<T>& x = vals_[nd.in0];
        Matrix<T>& gx = grads_[nd.in0];
        for (size_t i = 0; i < gy.size(); ++i) gx.data[i] += gy.data[i] / x.data[i];
        break;
      }
      case Op::Softplus: {
        if (!needs_grad_[nd.in0]) break;
        using std::exp;
        const Matrix<T>& x = vals_[nd.in0];
        Matrix<T>& gx = grads_[nd.in0];
        for (size_t i = 0; i < gy.size(); ++i) {
          T sig;
          if (value(x.data[i]) >= 0)
            sig = T(1) / (T(1) + exp(T(0) - x.data[i]));
          else {
            T e = exp(x.data[i]);
            sig = e / (T(1) + e);
          }
          gx.data[i] += gy.data[i] * sig;
        }
        break;
      }
      case Op::Clamp: {
        if (!needs_grad_[nd.in0]) break;
        const Matrix<T>& x = vals_[nd.in0];
        Matrix<T>& gx = grads_[nd.in0];
        for (size_t i = 0; i < gy.size(); ++i) {
          double v = value(x.data[i]);
          if (v > nd.c0 && v < nd.c1) gx.data[i] += gy.data[i];
        }
        break;
      }
      case Op::Add: {
        for (int in : {nd.in0, nd.in1}) {
          if (!needs_grad_[in]) continue;
          Matrix<T>& g = grads_[in];
          for (size_t i = 0; i < gy.size(); ++i) g.data[i] += gy.data[i];
        }
        break;
      }
      case Op::Sub: {
        if (needs_grad_[nd.in0]) {
          Matrix<T>& g = grads_[nd.in0];
          for (size_t i = 0; i < gy.size(); ++i) g.data[i] += gy.data[i];
        }
        if (needs_grad_[nd.in1]) {
          Matrix<T>& g = grads_[nd.in1];
          for (size_t i = 0; i < gy.size(); ++i) g.data[i] -= gy.data[i];
        }
        break;
      }
      case Op::Mul: {
        if (needs_grad_[nd.in0]) {
          const Matrix<T>& b = vals_[nd.in1];
          Matrix<T>& g = grads_[nd.in0];
          for (size_t i = 0; i < gy.size(); ++i) g.data[i] += gy.data[i] * b.data[i];
        }
        if (needs_grad_[nd.in1]) {
          const Matrix<T>& a = vals_[nd.in0];
          Matrix<T>& g = grads_[nd.in1];
          for (size_t i = 0; i < gy.size(); ++i) g.data[i] += gy.data[i] * a.data[i];
        }
        break;
      }
      case Op::MinElem: {
        const Matrix<T>& a = vals_[nd.in0];
        const Matrix<T>& b = vals_[nd.in1];
        for (size_t i = 0; i < gy.size(); ++i) {
          bool take_a = value(a.data[i]) <= value(b.data[i]);
          int in = take_a ? nd.in0 : nd.in1;
          if (needs_grad_[in]) grads_[in].data[i] += gy.data[i];
        }
        break;
      }
      case Op::Scale: {
        if (!needs_grad_[nd.in0]) break;
        Matrix<T>& g = grads_[nd.in0];
        for (size_t i = 0; i < gy.size(); ++i) g.data[i] += nd.c0 * gy.data[i];
        break;
      }
      case Op::AddScalar: {
        if (!needs_grad_[nd.in0]) break;
        Matrix<T>& g = grads_[nd.in0];
        for (size_t i = 0; i < gy.size(); ++i) g.data[i] += gy.data[i];
        break;
      }
      case Op::ConcatRows: {
        const size_t na = vals_[nd.in0].size();
        if (needs_grad_[nd.in0]) {
          Matrix<T>& g = grads_[nd.in0];
          for (size_t i = 0; i < na; ++i) g.data[i] += gy.data[i];
        }
        if (needs_grad_[nd.in1]) {
          Matrix<T>& g = grads_[nd.in1];
          for (size_t i = 0; i < g.size(); ++i) g.data[i] += gy.data[na + i];
        }
        break;
      }
      case Op::ConcatCols: {
        const Matrix<T>& a = vals_[nd.in0];
        const Matrix<T>& b = vals_[nd.in1];
        for (int r = 0; r < gy.rows; ++r) {
          if (needs_grad_[nd.in0])
            for (int c = 0; c < a.cols; ++c) grads_[nd.in0].at(r, c) += gy.at(r, c);
          if (needs_grad_[nd.in1])
            for (int c = 0; c < b.cols; ++c) grads_[nd.in1].at(r, c) += gy.at(r, a.cols + c);
        }
        break;
      }
      case Op::SliceRows: {
        if (!needs_grad_[nd.in0]) break;
        Matrix<T>& g = grads_[nd.in0];
        int r0 = static_cast<int>(nd.i0);
        for (int r = 0; r < gy.rows; ++r)
          for (int c = 0; c < gy.cols; ++c) g.at(r0 + r, c) += gy.at(r, c);
        break;
      }
      case Op::RowSum: {
        if (!needs_grad_[nd.in0]) break;
        Matrix<T>& g = grads_[nd.in0];
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < g.cols; ++c) g.at(r, c) += gy.at(r, 0);
        break;
      }
      case Op::MeanAll: {
        if (!needs_grad_[nd.in0]) break;
        Matrix<T>& g = grads_[nd.in0];
        T s = gy.data[0] / double(g.size());
        for (size_t i = 0; i < g.size(); ++i) g.data[i] += s;
        break;
      }
      case Op::CeWithLogitsMean: {
        if (!needs_grad_[nd.in0]) break;
        Matrix<T>& g = grads_[nd.in0];
        const int B = g.rows, m = g.cols;
        T scale = gy.data[0] / double(B);
        for (int r = 0; r < B; ++r)
          for (int c = 0; c < m; ++c)
            g.at(r, c) += scale * (nd.cache0.at(r, c) - nd.cdata.at(r, c));
        break;
      }
      case Op::MseMean: {
        if (!needs_grad_[nd.in0]) break;
        const Matrix<T>& p = vals_[nd.in0];
        Matrix<T>& g = grads_[nd.in0];
        T scale = gy.data[0] / double(p.size());
        for (size_t i = 0; i < p.size(); ++i)
          g.data[i] += scale * (p.data[i] - nd.cdata.data[i]);
        break;
      }
      default:
        break;
    }
  }
};

}  // namespace xqc::diffcore
