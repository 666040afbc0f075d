#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "xqc/diffcore/graph.hpp"
#include "xqc/diffcore/param_vector.hpp"
#include "xqc/netlib/config.hpp"
#include "xqc/netlib/init.hpp"

namespace xqc::netlib {

using diffcore::Graph;
using diffcore::LayoutEntry;
using diffcore::ParamKind;
using diffcore::ParamVector;

enum class Mode { Train, Eval };

struct DenseRef {
  LayoutEntry weight;
  LayoutEntry bias;
};

struct NormRef {
  LayoutEntry scale;
  LayoutEntry shift;
  int state_index = -1;  // into the owning network's running-statistics table
};

struct MlpBody {
  int in_dim = 0;
  int out_dim = 0;
  std::optional<NormRef> input_norm;
  struct Block {
    DenseRef dense;
    std::optional<NormRef> norm;
  };
  std::vector<Block> blocks;
};

// Running statistics for every BatchNorm layer of one network instance:
// each entry is a [2, F] matrix, mean in row 0 and variance in row 1.
struct NormStates {
  std::vector<MatD> stats;

  static MatD fresh(int features) {
    MatD m(2, features);
    for (int c = 0; c < features; ++c) m.at(1, c) = 1.0;
    return m;
  }
};

struct CriticNetwork {
  ArchitectureConfig config;
  int obs_dim = 0, act_dim = 0;
  MlpBody body;
  DenseRef head;
  NormStates norm_state;

  int output_dim() const { return config.critic_loss == CriticLoss::CE ? config.atoms : 1; }
};

struct ActorNetwork {
  ArchitectureConfig config;
  int obs_dim = 0, act_dim = 0;
  MlpBody body;
  DenseRef mean_head;
  DenseRef logstd_head;
  NormStates norm_state;
};

inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 2.0;

namespace detail {

inline NormRef make_norm(ParamVector& p, const std::string& prefix, int features,
                         NormStates& states, Norm kind) {
  NormRef n;
  n.scale = append_param(p, prefix + "/scale", ParamKind::NormScale, 1, features);
  n.shift = append_param(p, prefix + "/shift", ParamKind::NormShift, 1, features);
  for (int c = 0; c < features; ++c) p.values[n.scale.offset + c] = 1.0;
  if (kind == Norm::BN) {
    n.state_index = static_cast<int>(states.stats.size());
    states.stats.push_back(NormStates::fresh(features));
  }
  return n;
}

inline MlpBody make_body(ParamVector& p, const std::string& prefix, int in_dim,
                         const ArchitectureConfig& cfg, NormStates& states, bool input_norm,
                         Rng& rng) {
  MlpBody body;
  body.in_dim = in_dim;
  body.out_dim = cfg.hidden_dim;
  if (cfg.norm != Norm::None && input_norm)
    body.input_norm = make_norm(p, prefix + "/in_norm", in_dim, states, cfg.norm);
  int prev = in_dim;
  for (int b = 0; b < cfg.num_blocks; ++b) {
    MlpBody::Block block;
    std::string bp = prefix + "/block" + std::to_string(b);
    block.dense.weight = append_param(p, bp + "/W", ParamKind::HiddenWeight, cfg.hidden_dim, prev);
    block.dense.bias = append_param(p, bp + "/b", ParamKind::Bias, 1, cfg.hidden_dim);
    p.pack(block.dense.weight, orthogonal_init(cfg.hidden_dim, prev, std::sqrt(2.0), rng));
    if (cfg.norm != Norm::None)
      block.norm = make_norm(p, bp + "/norm", cfg.hidden_dim, states, cfg.norm);
    body.blocks.push_back(std::move(block));
    prev = cfg.hidden_dim;
  }
  return body;
}

inline DenseRef make_head(ParamVector& p, const std::string& prefix, int in_dim, int out_dim,
                          Rng& rng, bool zero_weights = false) {
  DenseRef head;
  head.weight = append_param(p, prefix + "/W", ParamKind::HeadWeight, out_dim, in_dim);
  head.bias = append_param(p, prefix + "/b", ParamKind::Bias, 1, out_dim);
  if (!zero_weights) p.pack(head.weight, uniform_init(out_dim, in_dim, 3e-3, rng));
  return head;
}

}  // namespace detail

struct BuiltNetworks {
  CriticNetwork critic[2];
  ActorNetwork actor;
  ParamVector params;           // [critic0 | critic1 | actor]
  size_t critic_param_count = 0;  // per critic
  size_t critic_span = 0;         // both critics; actor params start here
};

// Constructs both critics and the actor with a deterministic initialization:
// orthogonal (gain sqrt(2)) hidden weights, uniform(-3e-3, 3e-3) heads, zero
// biases, unit norm scales.
inline BuiltNetworks build_networks(const ArchitectureConfig& cfg, int obs_dim, int act_dim,
                                    uint64_t seed) {
  cfg.validate();
  if (obs_dim < 1 || act_dim < 1) throw ConfigError("build_networks: dims must be >= 1");
  BuiltNetworks out;
  Rng rng(derive_seed(seed, 0x1217));
  for (int c = 0; c < 2; ++c) {
    CriticNetwork& net = out.critic[c];
    net.config = cfg;
    net.obs_dim = obs_dim;
    net.act_dim = act_dim;
    std::string prefix = "critic" + std::to_string(c);
    net.body = detail::make_body(out.params, prefix, obs_dim + act_dim, cfg, net.norm_state,
                                 /*input_norm=*/true, rng);
    net.head = detail::make_head(out.params, prefix + "/head", cfg.hidden_dim, net.output_dim(),
                                 rng);
    if (c == 0) out.critic_param_count = out.params.size();
  }
  out.critic_span = out.params.size();
  ActorNetwork& actor = out.actor;
  actor.config = cfg;
  actor.obs_dim = obs_dim;
  actor.act_dim = act_dim;
  actor.body = detail::make_body(out.params, "actor", obs_dim, cfg, actor.norm_state,
                                 cfg.actor_input_norm, rng);
  actor.mean_head = detail::make_head(out.params, "actor/mean_head", cfg.hidden_dim, act_dim, rng);
  actor.logstd_head =
      detail::make_head(out.params, "actor/logstd_head", cfg.hidden_dim, act_dim, rng);
  out.params.check_layout();
  return out;
}

// Parameter source for graph building: slices of graph var 0, or constants
// materialized from a fixed snapshot (used when a network must not receive
// gradient, e.g. critics inside the actor objective).
struct ParamSource {
  const std::vector<double>* constants = nullptr;
};

// (BatchNormTrain node id, running-state index) pairs recorded during a
// train-mode pass; the owner applies momentum updates from them.
using BnHooks = std::vector<std::pair<int, int>>;

namespace detail {

template <class T>
int fetch(Graph<T>& g, const LayoutEntry& e, const ParamSource& src) {
  if (src.constants) {
    MatD m(e.rows, e.cols);
    std::copy(src.constants->begin() + e.offset, src.constants->begin() + e.offset + e.count(),
              m.data.begin());
    return g.constant(m);
  }
  return g.param_slice(e.offset, e.rows, e.cols);
}

template <class T>
int append_norm(Graph<T>& g, const NormRef& n, const ArchitectureConfig& cfg,
                const NormStates& states, int x, Mode mode, const ParamSource& src,
                BnHooks* hooks) {
  int scale = fetch(g, n.scale, src);
  int shift = fetch(g, n.shift, src);
  if (cfg.norm == Norm::LN) return g.layernorm(x, scale, shift, cfg.norm_eps);
  if (mode == Mode::Train) {
    auto h = g.batchnorm_train(x, scale, shift, cfg.norm_eps);
    if (hooks) hooks->emplace_back(h.node, n.state_index);
    return h.var;
  }
  return g.batchnorm_eval(x, scale, shift, states.stats[n.state_index], cfg.norm_eps);
}

template <class T>
int append_body(Graph<T>& g, const MlpBody& body, const ArchitectureConfig& cfg,
                const NormStates& states, int x, Mode mode, const ParamSource& src,
                BnHooks* hooks) {
  int z = x;
  if (body.input_norm) z = append_norm(g, *body.input_norm, cfg, states, z, mode, src, hooks);
  for (const auto& block : body.blocks) {
    z = g.add_rowvec(g.linear(z, fetch(g, block.dense.weight, src)),
                     fetch(g, block.dense.bias, src));
    if (block.norm) z = append_norm(g, *block.norm, cfg, states, z, mode, src, hooks);
    z = g.relu(z);
  }
  return z;
}

}  // namespace detail

// Appends one critic's forward pass; returns the logits (CE) or scalar (MSE)
// variable of shape [B, atoms] or [B, 1].
template <class T>
int append_critic(Graph<T>& g, const CriticNetwork& net, int sa, Mode mode,
                  const ParamSource& src = {}, BnHooks* hooks = nullptr) {
  int z = detail::append_body(g, net.body, net.config, net.norm_state, sa, mode, src, hooks);
  return g.add_rowvec(g.linear(z, detail::fetch(g, net.head.weight, src)),
                      detail::fetch(g, net.head.bias, src));
}

struct ActorHeads {
  int mean = -1;
  int log_std = -1;  // clamped to [kLogStdMin, kLogStdMax]
};

template <class T>
ActorHeads append_actor(Graph<T>& g, const ActorNetwork& net, int s, Mode mode,
                        const ParamSource& src = {}, BnHooks* hooks = nullptr) {
  int z = detail::append_body(g, net.body, net.config, net.norm_state, s, mode, src, hooks);
  ActorHeads heads;
  heads.mean = g.add_rowvec(g.linear(z, detail::fetch(g, net.mean_head.weight, src)),
                            detail::fetch(g, net.mean_head.bias, src));
  int ls = g.add_rowvec(g.linear(z, detail::fetch(g, net.logstd_head.weight, src)),
                        detail::fetch(g, net.logstd_head.bias, src));
  heads.log_std = g.clamp(ls, kLogStdMin, kLogStdMax);
  return heads;
}

// Applies momentum updates new = (1 - m) * old + m * batch to the running
// statistics recorded by a train-mode pass.
template <class T>
void apply_bn_updates(const Graph<T>& g, const BnHooks& hooks, NormStates& states,
                      double momentum) {
  MatD mean, var;
  for (const auto& [node, state_index] : hooks) {
    g.bn_batch_stats(node, mean, var);
    MatD& st = states.stats[state_index];
    for (int c = 0; c < st.cols; ++c) {
      st.at(0, c) = (1.0 - momentum) * st.at(0, c) + momentum * mean.at(0, c);
      st.at(1, c) = (1.0 - momentum) * st.at(1, c) + momentum * var.at(0, c);
    }
  }
}

// Plain forward pass. Train mode uses batch statistics and advances running
// statistics; eval mode uses the stored running statistics.
inline MatD critic_forward(CriticNetwork& net, const ParamVector& theta, const MatD& sa,
                           Mode mode) {
  Graph<double> g(theta.values);
  BnHooks hooks;
  int out = append_critic(g, net, g.constant(sa), mode, {}, &hooks);
  if (mode == Mode::Train) apply_bn_updates(g, hooks, net.norm_state, net.config.bn_momentum);
  return {g.val(out).rows, g.val(out).cols, g.val(out).data};
}

inline std::pair<MatD, MatD> actor_forward(ActorNetwork& net, const ParamVector& theta,
                                           const MatD& s, Mode mode) {
  Graph<double> g(theta.values);
  BnHooks hooks;
  ActorHeads heads = append_actor(g, net, g.constant(s), mode, {}, &hooks);
  if (mode == Mode::Train) apply_bn_updates(g, hooks, net.norm_state, net.config.bn_momentum);
  MatD mean{g.val(heads.mean).rows, g.val(heads.mean).cols, g.val(heads.mean).data};
  MatD log_std{g.val(heads.log_std).rows, g.val(heads.log_std).cols, g.val(heads.log_std).data};
  return {std::move(mean), std::move(log_std)};
}

namespace detail {

// Compensated sum of squares; keeps the Frobenius norm accurate enough that
// re-projecting an already projected matrix is detected and skipped, making
// projection idempotent at the bit level.
inline double frobenius_norm(const double* p, size_t n) {
  double sum = 0, comp = 0;
  for (size_t i = 0; i < n; ++i) {
    double term = p[i] * p[i] - comp;
    double next = sum + term;
    comp = (next - sum) - term;
    sum = next;
  }
  return std::sqrt(sum);
}

inline void project_span(double* p, size_t n, const std::string& name) {
  double norm = frobenius_norm(p, n);
  if (!(norm > 1e-150))
    throw NumericError("degenerate weight: zero-norm matrix in " + name);
  if (std::abs(norm - 1.0) <= 1e-13) return;
  double inv = 1.0 / norm;
  for (size_t i = 0; i < n; ++i) p[i] *= inv;
}

}  // namespace detail

// Projects every hidden dense weight matrix onto the unit sphere (Frobenius
// norm 1). Head weights, biases and norm affine parameters are untouched.
inline void project_weights(ParamVector& theta, bool per_row = false) {
  for (const auto& e : theta.layout) {
    if (e.kind != ParamKind::HiddenWeight) continue;
    double* base = theta.values.data() + e.offset;
    if (per_row) {
      for (int r = 0; r < e.rows; ++r)
        detail::project_span(base + static_cast<size_t>(r) * e.cols, e.cols,
                             e.name + " row " + std::to_string(r));
    } else {
      detail::project_span(base, e.count(), e.name);
    }
  }
}

// Frobenius norms of every projectable matrix, for diagnostics and tests.
inline std::vector<std::pair<std::string, double>> projected_norms(const ParamVector& theta) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& e : theta.layout) {
    if (e.kind != ParamKind::HiddenWeight) continue;
    out.emplace_back(e.name, detail::frobenius_norm(theta.values.data() + e.offset, e.count()));
  }
  return out;
}

}  // namespace xqc::netlib
