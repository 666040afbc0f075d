#pragma once

#include <algorithm>
#include <vector>

#include "xqc/core/common.hpp"
#include "xqc/core/rng.hpp"

namespace xqc::spectra {

struct IqmResult {
  double iqm = 0;
  double ci_low = 0;
  double ci_high = 0;
};

// Mean of the middle 50% by rank (floor(n/4) trimmed from each side).
inline double iqm(std::vector<double> values) {
  if (values.size() < 3) throw PreconditionError("iqm: need at least 3 values");
  std::sort(values.begin(), values.end());
  size_t cut = values.size() / 4;
  double sum = 0;
  for (size_t i = cut; i < values.size() - cut; ++i) sum += values[i];
  return sum / static_cast<double>(values.size() - 2 * cut);
}

// Interquartile mean with a 90% bootstrap percentile interval.
inline IqmResult aggregate_iqm(const std::vector<double>& values, int bootstrap, uint64_t seed) {
  IqmResult r;
  r.iqm = iqm(values);
  if (bootstrap < 1) {
    r.ci_low = r.ci_high = r.iqm;
    return r;
  }
  Rng rng(seed);
  std::vector<double> stats(bootstrap);
  std::vector<double> sample(values.size());
  for (int b = 0; b < bootstrap; ++b) {
    for (auto& v : sample) v = values[rng.uniform_index(values.size())];
    stats[b] = iqm(sample);
  }
  std::sort(stats.begin(), stats.end());
  auto pick = [&](double p) {
    double idx = p * (bootstrap - 1);
    return stats[static_cast<size_t>(std::llround(idx))];
  };
  r.ci_low = pick(0.05);
  r.ci_high = pick(0.95);
  return r;
}

inline double median(std::vector<double> values) {
  if (values.empty()) throw PreconditionError("median: empty");
  std::sort(values.begin(), values.end());
  size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// (Q3 - Q1) / |median|, the scale-free dispersion used for stability
// comparisons of time series.
inline double relative_iqr(std::vector<double> values) {
  if (values.size() < 4) throw PreconditionError("relative_iqr: need at least 4 values");
  std::sort(values.begin(), values.end());
  auto quantile = [&](double p) {
    double idx = p * (values.size() - 1);
    size_t lo = static_cast<size_t>(idx);
    double frac = idx - lo;
    return lo + 1 < values.size() ? values[lo] * (1 - frac) + values[lo + 1] * frac
                                  : values[lo];
  };
  double q1 = quantile(0.25), q3 = quantile(0.75);
  double med = values.size() % 2 ? values[values.size() / 2]
                                 : 0.5 * (values[values.size() / 2 - 1] +
                                          values[values.size() / 2]);
  if (med == 0) throw NumericError("relative_iqr: zero median");
  return (q3 - q1) / std::abs(med);
}

}  // namespace xqc::spectra
