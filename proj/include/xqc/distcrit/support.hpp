#pragma once

#include <vector>

#include "xqc/core/common.hpp"

namespace xqc::distcrit {

// Fixed, evenly spaced support atoms on [v_min, v_max].
struct CategoricalSupport {
  double v_min = -5.0;
  double v_max = 5.0;
  int m = 101;

  CategoricalSupport() = default;
  CategoricalSupport(double lo, double hi, int atoms) : v_min(lo), v_max(hi), m(atoms) {
    validate();
  }

  void validate() const {
    if (m < 2) throw ConfigError("support: need at least two atoms");
    if (!(v_min < v_max)) throw ConfigError("support: v_min must be below v_max");
  }

  double delta() const { return (v_max - v_min) / (m - 1); }
  // Endpoint-exact interpolation so atom(m-1) == v_max bit-for-bit.
  double atom(int i) const { return v_min + (v_max - v_min) * (double(i) / (m - 1)); }

  std::vector<double> atoms() const {
    std::vector<double> z(m);
    for (int i = 0; i < m; ++i) z[i] = atom(i);
    return z;
  }
};

// Probabilities over the support atoms.
struct CategoricalValueDistribution {
  std::vector<double> probs;

  void validate() const {
    double s = 0;
    for (double p : probs) {
      if (p < 0) throw ConfigError("distribution: negative mass");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("distribution: mass " + fmt17(s));
  }
};

inline double mean_value(const CategoricalValueDistribution& d, const CategoricalSupport& s) {
  if (static_cast<int>(d.probs.size()) != s.m)
    throw ConfigError("mean_value: distribution size does not match support");
  double mean = 0;
  for (int i = 0; i < s.m; ++i) mean += d.probs[i] * s.atom(i);
  return mean;
}

inline double mean_from_probs(const double* probs, const CategoricalSupport& s) {
  double mean = 0;
  for (int i = 0; i < s.m; ++i) mean += probs[i] * s.atom(i);
  return mean;
}

// Projects a weighted set of target positions back onto the support: each
// position is clamped into [v_min, v_max] and its mass split linearly between
// the two nearest atoms.
inline CategoricalValueDistribution project_target(const std::vector<double>& target_values,
                                                   const std::vector<double>& weights,
                                                   const CategoricalSupport& s) {
  if (target_values.size() != weights.size())
    throw ConfigError("project_target: values/weights length mismatch");
  CategoricalValueDistribution out;
  out.probs.assign(s.m, 0.0);
  for (size_t j = 0; j < target_values.size(); ++j) {
    double z = std::min(std::max(target_values[j], s.v_min), s.v_max);
    double b = (z - s.v_min) / (s.v_max - s.v_min) * (s.m - 1);
    if (b < 0) b = 0;
    if (b > s.m - 1) b = s.m - 1;
    int l = static_cast<int>(std::floor(b));
    int u = std::min(l + 1, s.m - 1);
    // an exact atom hit keeps all mass on that atom regardless of rounding in b
    if (l == u || z == s.atom(l)) {
      out.probs[l] += weights[j];
    } else if (z == s.atom(u)) {
      out.probs[u] += weights[j];
    } else {
      out.probs[l] += weights[j] * (u - b);
      out.probs[u] += weights[j] * (b - l);
    }
  }
  return out;
}

// Shift-and-project used for bootstrapped targets: positions are
// r + discount * (atom + shift) with the input distribution's weights.
inline CategoricalValueDistribution project_shifted(const CategoricalSupport& s,
                                                    const std::vector<double>& weights, double r,
                                                    double discount, double shift) {
  std::vector<double> tz(s.m);
  for (int j = 0; j < s.m; ++j) tz[j] = r + discount * (s.atom(j) + shift);
  return project_target(tz, weights, s);
}

}  // namespace xqc::distcrit
