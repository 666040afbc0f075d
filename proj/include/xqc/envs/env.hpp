#pragma once

#include <memory>
#include <string>
#include <vector>

#include "xqc/core/common.hpp"
#include "xqc/core/rng.hpp"

namespace xqc::envs {

struct StepResult {
  std::vector<double> obs;
  double reward = 0;
  bool terminated = false;  // true termination; time-limit exits use truncated
  bool truncated = false;
};

// Deterministic toy continuous-control task. Actions live in [-1, 1]^act_dim
// and are clipped before the dynamics; identical seed and action sequence
// reproduce trajectories bit-exactly.
class Env {
public:
  virtual ~Env() = default;
  virtual std::string name() const = 0;
  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;
  virtual int episode_limit() const = 0;
  virtual std::vector<double> reset(uint64_t seed) = 0;
  virtual StepResult step(const std::vector<double>& action) = 0;

  // Score anchors: a uniformly random policy maps to ~0 and the scripted
  // reference controller to ~1 under normalized_score().
  virtual double random_policy_score() const = 0;
  virtual double reference_score() const = 0;

  // Scripted reference controller (a function of the observation only).
  virtual std::vector<double> reference_action(const std::vector<double>& obs) const = 0;

  virtual std::unique_ptr<Env> clone_fresh() const = 0;

protected:
  void check_action(const std::vector<double>& a) const {
    if (static_cast<int>(a.size()) != act_dim())
      throw PreconditionError(name() + ": action length " + std::to_string(a.size()) +
                              ", expected " + std::to_string(act_dim()));
    for (double v : a)
      if (!std::isfinite(v)) throw PreconditionError(name() + ": non-finite action");
  }

  static double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

  static double wrap_angle(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a < 0) a += 2.0 * M_PI;
    return a - M_PI;
  }
};

inline double normalized_score(const Env& env, double raw) {
  return (raw - env.random_policy_score()) / (env.reference_score() - env.random_policy_score());
}

std::unique_ptr<Env> make_env(const std::string& name);

}  // namespace xqc::envs
