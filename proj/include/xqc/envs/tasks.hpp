#pragma once

#include "xqc/envs/env.hpp"

namespace xqc::envs {

// Torque-limited pendulum swing-up. Angle 0 is upright; dynamics follow the
// classic rod-on-pivot formulation with semi-implicit Euler at dt = 0.05,
// angular velocity capped at +/-8, torque = 2 * action.
// Reward: -(angle^2 + 0.1 * speed^2 + 0.001 * torque^2) on the pre-step state.
class Pendulum final : public Env {
public:
  static constexpr double kDt = 0.05;
  static constexpr double kGravity = 10.0;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;

  // Anchors measured over 500 episodes of the uniform-random policy and the
  // scripted energy controller (seed stream 0..499); frozen here.
  static constexpr double kRandomScore = -1248.29;
  static constexpr double kReferenceScore = -152.87;

  std::string name() const override { return "pendulum"; }
  int obs_dim() const override { return 3; }
  int act_dim() const override { return 1; }
  int episode_limit() const override { return 200; }
  double random_policy_score() const override { return kRandomScore; }
  double reference_score() const override { return kReferenceScore; }
  std::unique_ptr<Env> clone_fresh() const override { return std::make_unique<Pendulum>(); }

  std::vector<double> reset(uint64_t seed) override {
    Rng rng(seed);
    theta_ = rng.uniform(-M_PI, M_PI);
    theta_dot_ = rng.uniform(-1.0, 1.0);
    steps_ = 0;
    return observe();
  }

  StepResult step(const std::vector<double>& action) override {
    check_action(action);
    double u = kMaxTorque * clip(action[0], -1.0, 1.0);
    double angle = wrap_angle(theta_);
    double reward = -(angle * angle + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u);

    double acc = 1.5 * kGravity * std::sin(theta_) + 3.0 * u;
    theta_dot_ = clip(theta_dot_ + acc * kDt, -kMaxSpeed, kMaxSpeed);
    theta_ += theta_dot_ * kDt;
    ++steps_;
    if (!std::isfinite(theta_) || !std::isfinite(theta_dot_))
      throw NumericError("pendulum: non-finite state");
    return {observe(), reward, false, steps_ >= episode_limit()};
  }

  // Energy pumping toward the upright level set, with a PD catch near the top.
  std::vector<double> reference_action(const std::vector<double>& obs) const override {
    double cos_t = obs[0], sin_t = obs[1], speed = obs[2];
    double angle = std::atan2(sin_t, cos_t);
    double energy = 0.5 * (1.0 / 3.0) * speed * speed + 5.0 * cos_t;
    double u;
    if (std::abs(angle) < 0.6 && std::abs(speed) < 3.5) {
      u = -12.0 * angle - 3.0 * speed;
    } else {
      u = 2.0 * speed * (5.0 - energy);
      // near rest, push with gravity so no torque-balanced stall can form
      if (std::abs(speed) < 0.05) u = sin_t >= 0 ? kMaxTorque : -kMaxTorque;
    }
    u = clip(u, -kMaxTorque, kMaxTorque);
    return {u / kMaxTorque};
  }

private:
  double theta_ = M_PI;
  double theta_dot_ = 0;
  int steps_ = 0;

  std::vector<double> observe() const {
    return {std::cos(theta_), std::sin(theta_), theta_dot_};
  }
};

// Point mass on a line with force control; quadratic cost around the origin.
class DoubleIntegrator final : public Env {
public:
  static constexpr double kDt = 0.05;
  static constexpr double kRandomScore = -772.13;
  static constexpr double kReferenceScore = -6.24;

  std::string name() const override { return "double_integrator"; }
  int obs_dim() const override { return 2; }
  int act_dim() const override { return 1; }
  int episode_limit() const override { return 200; }
  double random_policy_score() const override { return kRandomScore; }
  double reference_score() const override { return kReferenceScore; }
  std::unique_ptr<Env> clone_fresh() const override {
    return std::make_unique<DoubleIntegrator>();
  }

  std::vector<double> reset(uint64_t seed) override {
    Rng rng(seed);
    x_ = rng.uniform(-1.0, 1.0);
    v_ = rng.uniform(-0.5, 0.5);
    steps_ = 0;
    return {x_, v_};
  }

  StepResult step(const std::vector<double>& action) override {
    check_action(action);
    double u = clip(action[0], -1.0, 1.0);
    double reward = -(x_ * x_ + 0.1 * v_ * v_ + 0.001 * u * u);
    v_ = clip(v_ + u * kDt, -5.0, 5.0);
    x_ = clip(x_ + v_ * kDt, -5.0, 5.0);
    ++steps_;
    return {{x_, v_}, reward, false, steps_ >= episode_limit()};
  }

  std::vector<double> reference_action(const std::vector<double>& obs) const override {
    return {clip(-4.0 * obs[0] - 4.0 * obs[1], -1.0, 1.0)};
  }

private:
  double x_ = 0, v_ = 0;
  int steps_ = 0;
};

// Two-link kinematic reacher: velocity-controlled joints, fingertip chasing a
// per-episode random target. Reward is the negative post-step distance with a
// small control penalty.
class Reacher2 final : public Env {
public:
  static constexpr double kDt = 0.05;
  static constexpr double kLink = 0.5;
  static constexpr double kMaxJointSpeed = 2.0;
  static constexpr double kRandomScore = -167.88;
  static constexpr double kReferenceScore = -11.15;

  std::string name() const override { return "reacher2"; }
  int obs_dim() const override { return 6; }
  int act_dim() const override { return 2; }
  int episode_limit() const override { return 200; }
  double random_policy_score() const override { return kRandomScore; }
  double reference_score() const override { return kReferenceScore; }
  std::unique_ptr<Env> clone_fresh() const override { return std::make_unique<Reacher2>(); }

  std::vector<double> reset(uint64_t seed) override {
    Rng rng(seed);
    q1_ = rng.uniform(-M_PI, M_PI);
    q2_ = rng.uniform(-M_PI, M_PI);
    double radius = rng.uniform(0.3, 0.9);
    double angle = rng.uniform(-M_PI, M_PI);
    tx_ = radius * std::cos(angle);
    ty_ = radius * std::sin(angle);
    steps_ = 0;
    return observe();
  }

  StepResult step(const std::vector<double>& action) override {
    check_action(action);
    double u1 = clip(action[0], -1.0, 1.0);
    double u2 = clip(action[1], -1.0, 1.0);
    q1_ = wrap_angle(q1_ + kMaxJointSpeed * u1 * kDt);
    q2_ = wrap_angle(q2_ + kMaxJointSpeed * u2 * kDt);
    auto [px, py] = tip(q1_, q2_);
    double dx = px - tx_, dy = py - ty_;
    double reward = -(std::sqrt(dx * dx + dy * dy) + 0.001 * (u1 * u1 + u2 * u2));
    ++steps_;
    return {observe(), reward, false, steps_ >= episode_limit()};
  }

  // Jacobian-transpose pursuit of the target.
  std::vector<double> reference_action(const std::vector<double>& obs) const override {
    double q1 = std::atan2(obs[1], obs[0]);
    double q2 = std::atan2(obs[3], obs[2]);
    double tx = obs[4], ty = obs[5];
    auto [px, py] = tip(q1, q2);
    double ex = tx - px, ey = ty - py;
    double s1 = std::sin(q1), c1 = std::cos(q1);
    double s12 = std::sin(q1 + q2), c12 = std::cos(q1 + q2);
    // d(tip)/dq columns
    double j11 = -kLink * s1 - kLink * s12, j21 = kLink * c1 + kLink * c12;
    double j12 = -kLink * s12, j22 = kLink * c12;
    double g1 = j11 * ex + j21 * ey;
    double g2 = j12 * ex + j22 * ey;
    return {clip(8.0 * g1, -1.0, 1.0), clip(8.0 * g2, -1.0, 1.0)};
  }

private:
  double q1_ = 0, q2_ = 0, tx_ = 0, ty_ = 0;
  int steps_ = 0;

  static std::pair<double, double> tip(double q1, double q2) {
    return {kLink * std::cos(q1) + kLink * std::cos(q1 + q2),
            kLink * std::sin(q1) + kLink * std::sin(q1 + q2)};
  }

  std::vector<double> observe() const {
    return {std::cos(q1_), std::sin(q1_), std::cos(q2_), std::sin(q2_), tx_, ty_};
  }
};

inline std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "pendulum") return std::make_unique<Pendulum>();
  if (name == "double_integrator") return std::make_unique<DoubleIntegrator>();
  if (name == "reacher2") return std::make_unique<Reacher2>();
  throw ConfigError("unknown task: " + name);
}

}  // namespace xqc::envs
