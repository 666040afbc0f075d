#pragma once

#include <vector>

#include "xqc/core/common.hpp"

namespace xqc::sacloop {

// Running statistics of the discounted return accumulator
// R_t = r_t + discount * R_{t-1} (reset at episode boundaries); rewards are
// scaled by 1 / std(R) with an epsilon floor.
class RewardNormalizer {
public:
  explicit RewardNormalizer(double discount, double eps = 1e-8)
      : discount_(discount), eps_(eps) {}

  void observe(double r, bool episode_end) {
    accumulator_ = r + discount_ * accumulator_;
    ++count_;
    double delta = accumulator_ - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (accumulator_ - mean_);
    if (episode_end) accumulator_ = 0.0;
  }

  double sigma() const {
    if (count_ == 0) return eps_;
    double var = m2_ / static_cast<double>(count_);
    return std::max(std::sqrt(var), eps_);
  }

  double normalize(double r) const { return r / sigma(); }

  double observe_and_normalize(double r, bool episode_end) {
    observe(r, episode_end);
    return normalize(r);
  }

  std::vector<double> state() const {
    return {accumulator_, static_cast<double>(count_), mean_, m2_};
  }
  void restore(const std::vector<double>& s) {
    if (s.size() != 4) throw ConfigError("reward normalizer: bad state");
    accumulator_ = s[0];
    count_ = static_cast<long>(s[1]);
    mean_ = s[2];
    m2_ = s[3];
  }

private:
  double discount_;
  double eps_;
  double accumulator_ = 0.0;
  long count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Effective-horizon discount: T = episode_length / action_repeat,
// discount = clip((T/5 - 1) / (T/5), 0.95, 0.995).
inline double discount_heuristic(int episode_length, int action_repeat) {
  if (episode_length < 1 || action_repeat < 1)
    throw PreconditionError("discount_heuristic: lengths must be >= 1");
  double t_eff = static_cast<double>(episode_length) / action_repeat;
  double raw = (t_eff / 5.0 - 1.0) / (t_eff / 5.0);
  return std::min(std::max(raw, 0.95), 0.995);
}

}  // namespace xqc::sacloop
