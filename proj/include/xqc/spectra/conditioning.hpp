#pragma once

#include "xqc/spectra/lanczos.hpp"

namespace xqc::spectra {

// Condition number, extreme eigenvalue and kurtosis of a spectrum estimate.
// The smallest absolute eigenvalue is floored at floor_ratio * lambda_max
// before forming kappa: near-singular directions would otherwise drive the
// ratio to infinity. The floor used is recorded in the summary.
struct ConditioningSummary {
  double kappa = 1;
  double lambda_max = 0;
  double lambda_min_abs = 0;
  double kurtosis = 0;
  double floor_ratio = 0;
  double floor_abs = 0;
};

inline ConditioningSummary conditioning_summary(const SpectrumEstimate& est,
                                                double floor_ratio = 1e-8) {
  if (est.ritz_values.empty()) throw PreconditionError("conditioning: empty spectrum");
  ConditioningSummary s;
  s.floor_ratio = floor_ratio;
  for (double v : est.ritz_values) s.lambda_max = std::max(s.lambda_max, std::abs(v));
  if (s.lambda_max < 1e-300)
    throw NumericError("conditioning: degenerate spectrum, all eigenvalues ~0");
  s.floor_abs = floor_ratio * s.lambda_max;
  s.lambda_min_abs = s.lambda_max;
  for (double v : est.ritz_values) {
    double a = std::abs(v);
    if (a >= s.floor_abs) s.lambda_min_abs = std::min(s.lambda_min_abs, a);
  }
  s.kappa = s.lambda_max / s.lambda_min_abs;

  double mean = 0;
  for (size_t i = 0; i < est.ritz_values.size(); ++i)
    mean += est.ritz_weights[i] * est.ritz_values[i];
  double m2 = 0, m4 = 0;
  for (size_t i = 0; i < est.ritz_values.size(); ++i) {
    double d = est.ritz_values[i] - mean;
    m2 += est.ritz_weights[i] * d * d;
    m4 += est.ritz_weights[i] * d * d * d * d;
  }
  s.kurtosis = m2 > 0 ? m4 / (m2 * m2) : 0.0;
  return s;
}

}  // namespace xqc::spectra
