#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "xqc/distcrit/losses.hpp"
#include "xqc/distcrit/support.hpp"
#include "xqc/envs/env.hpp"
#include "xqc/netlib/checkpoint.hpp"
#include "xqc/netlib/network.hpp"
#include "xqc/sacloop/adam.hpp"
#include "xqc/sacloop/hessian_probe.hpp"
#include "xqc/sacloop/replay.hpp"
#include "xqc/sacloop/reward_norm.hpp"
#include "xqc/sacloop/run_io.hpp"
#include "xqc/spectra/lanczos.hpp"
#include "xqc/spectra/plasticity.hpp"
#include "xqc/spectra/stats.hpp"

namespace xqc::sacloop {

struct TrainerConfig {
  double critic_lr = 3e-4;
  double actor_lr = 3e-4;
  double temp_lr = 3e-4;
  int batch_size = 256;
  int utd = 2;
  int policy_delay = 3;
  double target_momentum = 0.005;
  double init_temperature = 0.01;
  double target_entropy = std::nan("");  // resolved to -act_dim / 2
  bool lr_schedule = true;               // linear decay to 10%; active only with projection
  int warmup_steps = 1000;
  size_t replay_capacity = 1000000;
  double discount = std::nan("");  // resolved via discount_heuristic
  int action_repeat = 1;
  bool use_target_networks = true;  // false: bootstrap from the online critics (eval mode)
  bool joint_forward = true;        // mix (s,a) and (s',a') statistics in one train pass
  enum class TargetAggregate { MeanMin, Average } target_aggregate = TargetAggregate::MeanMin;
  bool f32 = false;  // run the update-loss graphs in single precision
  int probe_batch_size = 256;

  void validate() const {
    if (!(critic_lr >= 0 && actor_lr >= 0 && temp_lr >= 0))
      throw ConfigError("trainer: learning rates must be nonnegative");
    if (batch_size < 2) throw ConfigError("trainer: batch_size must be >= 2");
    if (utd < 1) throw ConfigError("trainer: utd must be a positive integer");
    if (policy_delay < 1) throw ConfigError("trainer: policy_delay must be >= 1");
    if (!(target_momentum > 0 && target_momentum <= 1))
      throw ConfigError("trainer: target_momentum in (0, 1]");
    if (init_temperature <= 0) throw ConfigError("trainer: init_temperature must be positive");
    if (warmup_steps < batch_size) throw ConfigError("trainer: warmup must cover one batch");
  }
};

struct RunOptions {
  std::vector<long> probe_schedule;       // plasticity rows (diag.csv)
  std::vector<long> spectrum_schedule;    // Lanczos spectra + conditioning rows
  std::vector<long> checkpoint_schedule;  // ckpt_<step>.xqc
  int lanczos_steps = 64;
  int lanczos_probes = 8;
  double kappa_floor_ratio = 1e-8;
  std::function<void(class Trainer&, long)> on_probe;
};

struct RunArtifacts {
  std::vector<std::pair<long, double>> episode_returns;  // (env step, raw return)
  std::vector<spectra::PlasticityRecord> diagnostics;
  std::vector<std::pair<long, spectra::ConditioningSummary>> conditioning;
  std::string run_dir;
};

// Raw-return score of a finished run: interquartile mean of the episode
// returns completed in the final fifth of training.
inline double final_score(const RunArtifacts& artifacts, long total_steps) {
  std::vector<double> tail;
  for (const auto& [step, ret] : artifacts.episode_returns)
    if (step > (4 * total_steps) / 5) tail.push_back(ret);
  if (tail.empty()) return std::nan("");
  if (tail.size() < 3) {
    double s = 0;
    for (double v : tail) s += v;
    return s / tail.size();
  }
  return spectra::iqm(tail);
}

struct HessianProbe {
  std::shared_ptr<const diffcore::LossFunction> loss;
  std::vector<double> theta;  // critic span at the snapshot
};

class Trainer {
public:
  Trainer(std::unique_ptr<envs::Env> env, netlib::ArchitectureConfig arch, TrainerConfig cfg,
          uint64_t seed, RunWriter* writer = nullptr)
      : env_(std::move(env)),
        arch_(arch),
        cfg_(cfg),
        seed_(seed),
        writer_(writer),
        env_reset_rng_(derive_seed(seed, 1)),
        warmup_rng_(derive_seed(seed, 2)),
        policy_rng_(derive_seed(seed, 3)),
        update_noise_rng_(derive_seed(seed, 5)),
        buffer_(cfg.replay_capacity, derive_seed(seed, 4)),
        support_(arch.v_min, arch.v_max, arch.atoms),
        normalizer_(0.0) {
    arch_.validate();
    cfg_.validate();
    if (std::isnan(cfg_.discount))
      cfg_.discount = discount_heuristic(env_->episode_limit(), cfg_.action_repeat);
    if (std::isnan(cfg_.target_entropy)) cfg_.target_entropy = -env_->act_dim() / 2.0;
    normalizer_ = RewardNormalizer(cfg_.discount);
    log_alpha_ = std::log(cfg_.init_temperature);

    nets_ = netlib::build_networks(arch_, env_->obs_dim(), env_->act_dim(), derive_seed(seed, 0));
    target_theta_ = nets_.params.values;
    for (int c = 0; c < 2; ++c) target_norm_[c] = nets_.critic[c].norm_state;

    adam_critic_ = std::make_unique<Adam>(nets_.critic_span);
    adam_actor_ = std::make_unique<Adam>(nets_.params.size() - nets_.critic_span);
    adam_temp_ = std::make_unique<Adam>(1);

    collect_probe_batch();
    obs_ = env_->reset(env_reset_rng_.next_u64());
  }

  struct ActorSample {
    MatD a;
    std::vector<double> logpi;
  };

  const netlib::ArchitectureConfig& arch() const { return arch_; }
  const TrainerConfig& config() const { return cfg_; }
  const netlib::BuiltNetworks& networks() const { return nets_; }
  const diffcore::ParamVector& params() const { return nets_.params; }
  diffcore::ParamVector& mutable_params() { return nets_.params; }
  ReplayBuffer& replay() { return buffer_; }
  size_t critic_span() const { return nets_.critic_span; }
  long env_steps() const { return env_steps_; }
  long critic_updates() const { return critic_updates_; }
  double temperature() const { return std::exp(log_alpha_); }
  double discount() const { return cfg_.discount; }
  const envs::Env& env() const { return *env_; }
  const std::vector<double>& last_critic_grad() const { return last_critic_grad_; }
  const std::vector<std::pair<long, double>>& episode_returns() const {
    return episode_returns_;
  }
  double last_critic_loss() const { return last_critic_loss_; }
  double last_mean_logpi() const { return last_mean_logpi_; }
  const RewardNormalizer& normalizer() const { return normalizer_; }
  void set_total_steps(long t) { total_steps_ = t; }

  double lr_scale() const {
    if (!(cfg_.lr_schedule && arch_.weight_projection) || total_steps_ <= 0) return 1.0;
    double frac = std::min(1.0, static_cast<double>(env_steps_) / total_steps_);
    return 1.0 - 0.9 * frac;
  }
  double critic_lr_now() const { return cfg_.critic_lr * lr_scale(); }
  double actor_lr_now() const { return cfg_.actor_lr * lr_scale(); }
  double temp_lr_now() const { return cfg_.temp_lr * lr_scale(); }

  std::vector<spectra::LayerSpan> projected_layers() const {
    std::vector<spectra::LayerSpan> out;
    for (const auto& e : nets_.params.layout) {
      if (e.offset >= nets_.critic_span) break;
      if (e.kind == diffcore::ParamKind::HiddenWeight)
        out.push_back({e.name, e.offset, e.count()});
    }
    return out;
  }

  std::vector<double> critic_theta() const {
    return {nets_.params.values.begin(), nets_.params.values.begin() + nets_.critic_span};
  }

  // Eval-mode outputs of both online critics on the fixed probe batch.
  std::vector<double> probe_outputs() {
    MatD sa = hcat(probe_batch_.s, probe_batch_.a);
    std::vector<double> out;
    for (int c = 0; c < 2; ++c) {
      MatD o = eval_critic(c, nets_.params.values, nets_.critic[c].norm_state, sa);
      out.insert(out.end(), o.data.begin(), o.data.end());
    }
    return out;
  }

  // One environment interaction plus the update work it triggers.
  void step_once() {
    std::vector<double> action = env_steps_ < cfg_.warmup_steps ? uniform_action(warmup_rng_)
                                                                : sample_policy_action();
    auto result = env_->step(action);
    for (double v : result.obs)
      if (!std::isfinite(v)) throw NumericError("train: environment produced non-finite obs");
    bool ended = result.terminated || result.truncated;
    normalizer_.observe(result.reward, ended);
    buffer_.push({obs_, action, result.reward, result.obs, result.terminated});
    episode_return_ += result.reward;
    ++env_steps_;
    if (ended) {
      episode_returns_.emplace_back(env_steps_, episode_return_);
      if (writer_) writer_->append_return(env_steps_, episode_return_);
      episode_return_ = 0.0;
      obs_ = env_->reset(env_reset_rng_.next_u64());
    } else {
      obs_ = std::move(result.obs);
    }
    if (env_steps_ > cfg_.warmup_steps) {
      for (int u = 0; u < cfg_.utd; ++u) {
        Batch batch = buffer_.sample(cfg_.batch_size);
        critic_update(batch);
        ++critic_updates_;
        if (critic_updates_ % cfg_.policy_delay == 0) {
          Batch abatch = buffer_.sample(cfg_.batch_size);
          actor_and_temperature_update(abatch);
        }
      }
    }
  }

  void critic_update(const Batch& batch) {
    try {
      if (cfg_.f32) critic_update_impl<float>(batch);
      else critic_update_impl<double>(batch);
    } catch (const NumericError&) {
      if (writer_) writer_->write_checkpoint(-env_steps_, snapshot_checkpoint());
      throw;
    }
  }

  void actor_and_temperature_update(const Batch& batch) {
    try {
      if (cfg_.f32) actor_update_impl<float>(batch);
      else actor_update_impl<double>(batch);
    } catch (const NumericError&) {
      if (writer_) writer_->write_checkpoint(-env_steps_, snapshot_checkpoint());
      throw;
    }
  }

  RunArtifacts train(long total_steps, const RunOptions& opts = {}) {
    total_steps_ = total_steps;
    if (writer_) {
      writer_->write_config(config_kv());
      writer_->write_checkpoint(0, snapshot_checkpoint());
    }
    std::set<long> probe_at(opts.probe_schedule.begin(), opts.probe_schedule.end());
    std::set<long> spectrum_at(opts.spectrum_schedule.begin(), opts.spectrum_schedule.end());
    std::set<long> ckpt_at(opts.checkpoint_schedule.begin(), opts.checkpoint_schedule.end());
    for (long at : probe_at)
      if (at > total_steps) throw ConfigError("train: probe step beyond total_steps");

    RunArtifacts artifacts;
    auto emit = [&](long step) {
      if (probe_at.count(step)) {
        artifacts.diagnostics.push_back(plasticity_now(step));
        if (writer_) writer_->append_diag(artifacts.diagnostics.back());
        if (opts.on_probe) opts.on_probe(*this, step);
      }
      if (ckpt_at.count(step) && step != 0 && writer_)
        writer_->write_checkpoint(step, snapshot_checkpoint());
      if (spectrum_at.count(step)) {
        HessianProbe probe = make_hessian_probe();
        diffcore::HvpOracle oracle(probe.loss, probe.theta);
        auto est = spectra::lanczos_spectrum(oracle, opts.lanczos_steps, opts.lanczos_probes,
                                             derive_seed(seed_, 7000 + step));
        auto summary = spectra::conditioning_summary(est, opts.kappa_floor_ratio);
        artifacts.conditioning.emplace_back(step, summary);
        if (writer_) {
          writer_->write_spectrum(step, est);
          writer_->append_conditioning(step, summary);
        }
      }
    };
    emit(0);
    for (long step = 1; step <= total_steps; ++step) {
      step_once();
      emit(step);
    }
    artifacts.episode_returns = episode_returns_;
    if (writer_) artifacts.run_dir = writer_->dir();
    return artifacts;
  }

  spectra::PlasticityRecord plasticity_now(long step) {
    std::vector<double> grad = last_critic_grad_;
    if (grad.empty()) grad.assign(nets_.critic_span, 0.0);
    return spectra::plasticity_probe(step, critic_theta(), projected_layers(), grad,
                                     critic_lr_now(), temperature(), last_critic_loss_);
  }

  // Critic Bellman loss at the current snapshot on the held-out probe batch,
  // over the critic parameter span, with eval-mode normalization.
  HessianProbe make_hessian_probe() {
    std::vector<double> r_hat(probe_batch_.size);
    double sig = normalizer_.sigma();
    for (int i = 0; i < probe_batch_.size; ++i) r_hat[i] = probe_batch_.r[i] / sig;
    Rng probe_rng(derive_seed(seed_, 6001));
    ActorSample next = sample_actor_batch(probe_batch_.s2, probe_rng);
    MatD targets = build_targets(probe_batch_, r_hat, next);
    HessianProbe probe;
    probe.loss = std::make_shared<CriticBellmanLoss>(
        nets_.critic[0], nets_.critic[1], nets_.critic_span, hcat(probe_batch_.s, probe_batch_.a),
        std::move(targets));
    probe.theta = critic_theta();
    return probe;
  }

  netlib::Checkpoint snapshot_checkpoint() const {
    netlib::Checkpoint c;
    c.config_hash = netlib::config_hash(arch_, env_->obs_dim(), env_->act_dim());
    c.params = nets_.params;
    c.arrays.emplace_back(
        "target_params",
        std::vector<double>(target_theta_.begin(), target_theta_.begin() + nets_.critic_span));
    auto put_norm = [&](const std::string& prefix, const netlib::NormStates& ns) {
      for (size_t i = 0; i < ns.stats.size(); ++i)
        c.arrays.emplace_back(prefix + std::to_string(i), ns.stats[i].data);
    };
    put_norm("norm/critic0/", nets_.critic[0].norm_state);
    put_norm("norm/critic1/", nets_.critic[1].norm_state);
    put_norm("norm/actor/", nets_.actor.norm_state);
    put_norm("norm/target0/", target_norm_[0]);
    put_norm("norm/target1/", target_norm_[1]);
    c.arrays.emplace_back("normalizer", normalizer_.state());
    c.arrays.emplace_back("scalars",
                          std::vector<double>{log_alpha_, static_cast<double>(env_steps_),
                                              static_cast<double>(critic_updates_)});
    return c;
  }

  std::vector<std::pair<std::string, std::string>> config_kv() const {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("task", env_->name());
    kv.emplace_back("arch", arch_.cell_name());
    kv.emplace_back("norm", netlib::to_string(arch_.norm));
    kv.emplace_back("weight_projection", arch_.weight_projection ? "1" : "0");
    kv.emplace_back("critic_loss", netlib::to_string(arch_.critic_loss));
    kv.emplace_back("hidden_dim", std::to_string(arch_.hidden_dim));
    kv.emplace_back("num_blocks", std::to_string(arch_.num_blocks));
    kv.emplace_back("atoms", std::to_string(arch_.atoms));
    kv.emplace_back("support", fmt17(arch_.v_min) + ".." + fmt17(arch_.v_max));
    kv.emplace_back("bn_momentum", fmt17(arch_.bn_momentum));
    kv.emplace_back("per_row_projection", arch_.per_row_projection ? "1" : "0");
    kv.emplace_back("actor_input_norm", arch_.actor_input_norm ? "1" : "0");
    kv.emplace_back("seed", std::to_string(seed_));
    kv.emplace_back("critic_lr", fmt17(cfg_.critic_lr));
    kv.emplace_back("actor_lr", fmt17(cfg_.actor_lr));
    kv.emplace_back("temp_lr", fmt17(cfg_.temp_lr));
    kv.emplace_back("batch_size", std::to_string(cfg_.batch_size));
    kv.emplace_back("utd", std::to_string(cfg_.utd));
    kv.emplace_back("policy_delay", std::to_string(cfg_.policy_delay));
    kv.emplace_back("target_momentum", fmt17(cfg_.target_momentum));
    kv.emplace_back("init_temperature", fmt17(cfg_.init_temperature));
    kv.emplace_back("target_entropy", fmt17(cfg_.target_entropy));
    kv.emplace_back("lr_schedule", cfg_.lr_schedule ? "1" : "0");
    kv.emplace_back("warmup_steps", std::to_string(cfg_.warmup_steps));
    kv.emplace_back("discount", fmt17(cfg_.discount));
    kv.emplace_back("use_target_networks", cfg_.use_target_networks ? "1" : "0");
    kv.emplace_back("joint_forward", cfg_.joint_forward ? "1" : "0");
    kv.emplace_back("target_aggregate",
                    cfg_.target_aggregate == TrainerConfig::TargetAggregate::MeanMin ? "mean_min"
                                                                                      : "average");
    kv.emplace_back("f32", cfg_.f32 ? "1" : "0");
    kv.emplace_back("random_score_anchor", fmt17(env_->random_policy_score()));
    kv.emplace_back("reference_score_anchor", fmt17(env_->reference_score()));
    return kv;
  }

  static MatD hcat(const MatD& a, const MatD& b) {
    MatD out(a.rows, a.cols + b.cols);
    for (int r = 0; r < a.rows; ++r) {
      std::copy(a.data.begin() + static_cast<size_t>(r) * a.cols,
                a.data.begin() + static_cast<size_t>(r + 1) * a.cols,
                out.data.begin() + static_cast<size_t>(r) * out.cols);
      std::copy(b.data.begin() + static_cast<size_t>(r) * b.cols,
                b.data.begin() + static_cast<size_t>(r + 1) * b.cols,
                out.data.begin() + static_cast<size_t>(r) * out.cols + a.cols);
    }
    return out;
  }

private:
  std::unique_ptr<envs::Env> env_;
  netlib::ArchitectureConfig arch_;
  TrainerConfig cfg_;
  uint64_t seed_;
  RunWriter* writer_;

  Rng env_reset_rng_, warmup_rng_, policy_rng_, update_noise_rng_;
  ReplayBuffer buffer_;
  distcrit::CategoricalSupport support_;
  RewardNormalizer normalizer_;

  netlib::BuiltNetworks nets_;
  std::vector<double> target_theta_;  // full-length copy; only the critic span is read
  netlib::NormStates target_norm_[2];
  std::unique_ptr<Adam> adam_critic_, adam_actor_, adam_temp_;
  double log_alpha_ = 0;

  std::vector<double> obs_;
  double episode_return_ = 0;
  long env_steps_ = 0;
  long critic_updates_ = 0;
  long total_steps_ = 0;
  std::vector<std::pair<long, double>> episode_returns_;

  std::vector<double> last_critic_grad_;
  double last_critic_loss_ = 0;
  double last_mean_logpi_ = 0;

  Batch probe_batch_;

  static double softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }

  std::vector<double> uniform_action(Rng& rng) {
    std::vector<double> a(env_->act_dim());
    for (auto& v : a) v = rng.uniform(-1.0, 1.0);
    return a;
  }

  std::vector<double> sample_policy_action() {
    MatD s(1, env_->obs_dim());
    std::copy(obs_.begin(), obs_.end(), s.data.begin());
    ActorSample sample = sample_actor_batch(s, policy_rng_);
    return {sample.a.data.begin(), sample.a.data.end()};
  }

public:
  // Tanh-squashed reparameterized sample with its log density.
  ActorSample sample_actor_batch(const MatD& s, Rng& rng) {
    auto [mean, log_std] = netlib::actor_forward(nets_.actor, nets_.params, s, netlib::Mode::Eval);
    const int B = s.rows, A = env_->act_dim();
    ActorSample out;
    out.a = MatD(B, A);
    out.logpi.assign(B, 0.0);
    constexpr double kHalfLog2Pi = 0.91893853320467274;  // 0.5 * log(2 pi)
    for (int i = 0; i < B; ++i) {
      for (int j = 0; j < A; ++j) {
        double ls = log_std.at(i, j);
        double xi = rng.normal();
        double u = mean.at(i, j) + std::exp(ls) * xi;
        out.a.at(i, j) = std::tanh(u);
        out.logpi[i] += -ls - 0.5 * xi * xi - kHalfLog2Pi -
                        (2.0 * std::log(2.0) - 2.0 * u - 2.0 * softplus(-2.0 * u));
      }
    }
    return out;
  }

private:
  void collect_probe_batch() {
    auto probe_env = env_ ? env_->clone_fresh() : nullptr;
    Rng rng(derive_seed(seed_, 6000));
    const int n = cfg_.probe_batch_size;
    std::vector<Transition> transitions;
    std::vector<double> obs = probe_env->reset(rng.next_u64());
    while (static_cast<int>(transitions.size()) < n) {
      std::vector<double> a(env_->act_dim());
      for (auto& v : a) v = rng.uniform(-1.0, 1.0);
      auto r = probe_env->step(a);
      transitions.push_back({obs, a, r.reward, r.obs, r.terminated});
      obs = (r.terminated || r.truncated) ? probe_env->reset(rng.next_u64()) : r.obs;
    }
    const int obs_dim = env_->obs_dim(), act_dim = env_->act_dim();
    probe_batch_.size = n;
    probe_batch_.s = MatD(n, obs_dim);
    probe_batch_.a = MatD(n, act_dim);
    probe_batch_.s2 = MatD(n, obs_dim);
    probe_batch_.r.resize(n);
    probe_batch_.done.resize(n);
    for (int i = 0; i < n; ++i) {
      const Transition& t = transitions[i];
      std::copy(t.s.begin(), t.s.end(), probe_batch_.s.data.begin() + (size_t)i * obs_dim);
      std::copy(t.a.begin(), t.a.end(), probe_batch_.a.data.begin() + (size_t)i * act_dim);
      std::copy(t.s2.begin(), t.s2.end(), probe_batch_.s2.data.begin() + (size_t)i * obs_dim);
      probe_batch_.r[i] = t.r;
      probe_batch_.done[i] = t.done ? 1.0 : 0.0;
    }
  }

  // Eval-mode critic outputs using an explicit parameter source and
  // normalization state (for target networks and frozen snapshots).
  MatD eval_critic(int c, const std::vector<double>& theta_src, const netlib::NormStates& ns,
                   const MatD& sa) {
    netlib::CriticNetwork tmp = nets_.critic[c];
    tmp.norm_state = ns;
    diffcore::Graph<double> g(std::vector<double>{});
    netlib::ParamSource src{&theta_src};
    int out = netlib::append_critic(g, tmp, g.constant(sa), netlib::Mode::Eval, src);
    return {g.val(out).rows, g.val(out).cols, g.val(out).data};
  }

public:
  // Bootstrapped targets: the categorical projection of the min-mean target
  // distribution with the entropy term as a support shift, or the scalar
  // min-q target for the mse critic.
  MatD build_targets(const Batch& batch, const std::vector<double>& r_hat,
                     const ActorSample& next) {
    const int B = batch.size;
    const double alpha = temperature();
    MatD s2a2 = hcat(batch.s2, next.a);
    const std::vector<double>& tsrc =
        cfg_.use_target_networks ? target_theta_ : nets_.params.values;
    MatD out0 = eval_critic(0, tsrc,
                            cfg_.use_target_networks ? target_norm_[0]
                                                     : nets_.critic[0].norm_state,
                            s2a2);
    MatD out1 = eval_critic(1, tsrc,
                            cfg_.use_target_networks ? target_norm_[1]
                                                     : nets_.critic[1].norm_state,
                            s2a2);
    if (arch_.critic_loss == netlib::CriticLoss::MSE) {
      MatD y(B, 1);
      for (int i = 0; i < B; ++i) {
        double q = std::min(out0.at(i, 0), out1.at(i, 0));
        y.at(i, 0) =
            r_hat[i] + cfg_.discount * (1.0 - batch.done[i]) * (q - alpha * next.logpi[i]);
      }
      return y;
    }
    const int m = arch_.atoms;
    auto softmax_row = [m](const MatD& logits, int row, std::vector<double>& probs) {
      double mx = logits.at(row, 0);
      for (int c = 1; c < m; ++c) mx = std::max(mx, logits.at(row, c));
      double denom = 0;
      for (int c = 0; c < m; ++c) {
        probs[c] = std::exp(logits.at(row, c) - mx);
        denom += probs[c];
      }
      for (int c = 0; c < m; ++c) probs[c] /= denom;
    };
    MatD targets(B, m);
    std::vector<double> p0(m), p1(m), blend(m);
    for (int i = 0; i < B; ++i) {
      softmax_row(out0, i, p0);
      softmax_row(out1, i, p1);
      const std::vector<double>* chosen;
      if (cfg_.target_aggregate == TrainerConfig::TargetAggregate::MeanMin) {
        double m0 = distcrit::mean_from_probs(p0.data(), support_);
        double m1 = distcrit::mean_from_probs(p1.data(), support_);
        chosen = m0 <= m1 ? &p0 : &p1;
      } else {
        for (int c = 0; c < m; ++c) blend[c] = 0.5 * (p0[c] + p1[c]);
        chosen = &blend;
      }
      auto projected = distcrit::project_shifted(
          support_, *chosen, r_hat[i], cfg_.discount * (1.0 - batch.done[i]),
          -alpha * next.logpi[i]);
      for (int c = 0; c < m; ++c) targets.at(i, c) = projected.probs[c];
    }
    return targets;
  }

private:
  template <class Real>
  void critic_update_impl(const Batch& batch) {
    const int B = batch.size;
    std::vector<double> r_hat(B);
    double sig = normalizer_.sigma();
    for (int i = 0; i < B; ++i) r_hat[i] = batch.r[i] / sig;
    ActorSample next = sample_actor_batch(batch.s2, update_noise_rng_);
    MatD targets = build_targets(batch, r_hat, next);

    std::vector<Real> theta(nets_.params.values.begin(), nets_.params.values.end());
    diffcore::Graph<Real> g(std::move(theta));
    int sa = g.constant(hcat(batch.s, batch.a));
    int input = sa;
    if (cfg_.joint_forward) input = g.concat_rows(sa, g.constant(hcat(batch.s2, next.a)));
    netlib::BnHooks hooks[2];
    int total = -1;
    for (int c = 0; c < 2; ++c) {
      int out = netlib::append_critic(g, nets_.critic[c], input, netlib::Mode::Train, {},
                                      &hooks[c]);
      int half = cfg_.joint_forward ? g.slice_rows(out, 0, B) : out;
      int loss = arch_.critic_loss == netlib::CriticLoss::CE ? g.ce_with_logits_mean(half, targets)
                                                             : g.mse_mean(half, targets);
      total = total < 0 ? loss : g.add(total, loss);
    }
    double loss_value = g.scalar(total);
    if (!std::isfinite(loss_value)) throw NumericError("critic update: non-finite loss");
    g.backward(total);
    for (int c = 0; c < 2; ++c)
      netlib::apply_bn_updates(g, hooks[c], nets_.critic[c].norm_state, arch_.bn_momentum);

    auto grad = g.param_gradient();
    last_critic_grad_.resize(nets_.critic_span);
    for (size_t i = 0; i < nets_.critic_span; ++i)
      last_critic_grad_[i] = static_cast<double>(diffcore::value(grad[i]));
    adam_critic_->step(nets_.params.values.data(), last_critic_grad_.data(), nets_.critic_span,
                       critic_lr_now());
    if (arch_.weight_projection) netlib::project_weights(nets_.params, arch_.per_row_projection);

    const double tau = cfg_.target_momentum;
    for (size_t i = 0; i < nets_.critic_span; ++i)
      target_theta_[i] = (1.0 - tau) * target_theta_[i] + tau * nets_.params.values[i];
    for (int c = 0; c < 2; ++c)
      for (size_t k = 0; k < target_norm_[c].stats.size(); ++k)
        for (size_t i = 0; i < target_norm_[c].stats[k].size(); ++i)
          target_norm_[c].stats[k].data[i] =
              (1.0 - tau) * target_norm_[c].stats[k].data[i] +
              tau * nets_.critic[c].norm_state.stats[k].data[i];
    last_critic_loss_ = loss_value;
  }

  template <class Real>
  void actor_update_impl(const Batch& batch) {
    const int B = batch.size;
    const int A = env_->act_dim();
    const double alpha = temperature();

    std::vector<Real> theta(nets_.params.values.begin(), nets_.params.values.end());
    diffcore::Graph<Real> g(std::move(theta));
    int s = g.constant(batch.s);
    netlib::BnHooks hooks;
    auto heads = netlib::append_actor(g, nets_.actor, s, netlib::Mode::Train, {}, &hooks);

    MatD xi(B, A);
    for (auto& v : xi.data) v = update_noise_rng_.normal();
    MatD logpi_const(B, A);
    constexpr double kHalfLog2Pi = 0.91893853320467274;
    for (size_t i = 0; i < xi.data.size(); ++i)
      logpi_const.data[i] = -0.5 * xi.data[i] * xi.data[i] - kHalfLog2Pi - 2.0 * std::log(2.0);

    int xic = g.constant(xi);
    int u = g.add(heads.mean, g.mul(g.exp_(heads.log_std), xic));
    int a = g.tanh_(u);
    int per_dim = g.add(g.scale(heads.log_std, -1.0), g.constant(logpi_const));
    per_dim = g.add(per_dim, g.scale(u, 2.0));
    per_dim = g.add(per_dim, g.scale(g.softplus(g.scale(u, -2.0)), 2.0));
    int logpi = g.row_sum(per_dim);  // [B, 1]

    // critics as constants, eval-mode normalization
    int sa = g.concat_cols(s, a);
    netlib::ParamSource frozen{&nets_.params.values};
    int q = -1;
    MatD z_row(1, arch_.atoms);
    for (int c = 0; c < arch_.atoms; ++c) z_row.at(0, c) = support_.atom(c);
    for (int c = 0; c < 2; ++c) {
      int out = netlib::append_critic(g, nets_.critic[c], sa, netlib::Mode::Eval, frozen);
      int qc = arch_.critic_loss == netlib::CriticLoss::CE
                   ? g.linear(g.softmax_rows(out), g.constant(z_row))
                   : out;
      q = q < 0 ? qc : g.min_elem(q, qc);
    }
    int loss = g.mean_all(g.sub(g.scale(logpi, alpha), q));
    double loss_value = g.scalar(loss);
    if (!std::isfinite(loss_value)) throw NumericError("actor update: non-finite loss");
    g.backward(loss);
    netlib::apply_bn_updates(g, hooks, nets_.actor.norm_state, arch_.bn_momentum);

    auto grad = g.param_gradient();
    size_t actor_span = nets_.params.size() - nets_.critic_span;
    std::vector<double> agrad(actor_span);
    for (size_t i = 0; i < actor_span; ++i)
      agrad[i] = static_cast<double>(diffcore::value(grad[nets_.critic_span + i]));
    adam_actor_->step(nets_.params.values.data() + nets_.critic_span, agrad.data(), actor_span,
                      actor_lr_now());
    if (arch_.weight_projection) netlib::project_weights(nets_.params, arch_.per_row_projection);

    double mean_logpi = 0;
    const auto& lp = g.val(logpi);
    for (int i = 0; i < B; ++i) mean_logpi += diffcore::value(lp.data[i]);
    mean_logpi /= B;
    last_mean_logpi_ = mean_logpi;
    // temperature loss alpha * (-logpi - target_entropy), optimized in log space
    double grad_log_alpha = temperature() * (-mean_logpi - cfg_.target_entropy);
    adam_temp_->step(&log_alpha_, &grad_log_alpha, 1, temp_lr_now());
  }
};

}  // namespace xqc::sacloop
