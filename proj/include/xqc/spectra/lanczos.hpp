#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <vector>

#include "xqc/core/rng.hpp"
#include "xqc/diffcore/loss_function.hpp"

namespace xqc::spectra {

// Ritz values and density weights from stochastic Lanczos quadrature.
// Weights are the squared first eigenvector components of the tridiagonal
// matrix, so each probe contributes total mass 1/num_probes.
struct SpectrumEstimate {
  std::vector<double> ritz_values;   // sorted ascending
  std::vector<double> ritz_weights;  // nonnegative, sums to 1
  int num_probes = 0;
  int lanczos_steps = 0;
  uint64_t seed = 0;

  void validate() const {
    double mass = 0;
    for (double w : ritz_weights) {
      if (w < 0) throw NumericError("spectrum: negative ritz weight");
      mass += w;
    }
    if (std::abs(mass - 1.0) > 1e-9) throw NumericError("spectrum: mass " + fmt17(mass));
    if (!std::is_sorted(ritz_values.begin(), ritz_values.end()))
      throw NumericError("spectrum: ritz values not sorted");
  }
};

namespace detail {

struct TridiagEig {
  std::vector<double> values;
  std::vector<double> first_components_sq;
};

inline TridiagEig tridiag_eigen(const std::vector<double>& alpha,
                                const std::vector<double>& beta) {
  const int k = static_cast<int>(alpha.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  TridiagEig out;
  out.values.resize(k);
  out.first_components_sq.resize(k);
  for (int i = 0; i < k; ++i) {
    out.values[i] = es.eigenvalues()(i);
    double c = es.eigenvectors()(0, i);
    out.first_components_sq[i] = c * c;
  }
  return out;
}

}  // namespace detail

// k independent Lanczos runs with unit Gaussian probes and full
// reorthogonalization; a residual below 1e-12 truncates that probe's run,
// which is exact by construction. Probe runs only read the shared oracle.
inline SpectrumEstimate lanczos_spectrum(const diffcore::HvpOracle& oracle, int m, int k,
                                         uint64_t seed) {
  const size_t n = oracle.dim();
  if (m < 2) throw PreconditionError("lanczos: need at least 2 steps");
  if (k < 1) throw PreconditionError("lanczos: need at least 1 probe");
  if (static_cast<size_t>(m) > n)
    throw PreconditionError("lanczos: steps exceed parameter dimension");

  SpectrumEstimate est;
  est.num_probes = k;
  est.lanczos_steps = m;
  est.seed = seed;

  std::vector<std::pair<double, double>> pairs;
  for (int probe = 0; probe < k; ++probe) {
    Rng rng(derive_seed(seed, probe));
    std::vector<std::vector<double>> q;  // stored basis for reorthogonalization
    std::vector<double> alpha, beta;

    std::vector<double> v(n);
    double norm = 0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    q.push_back(v);

    for (int j = 0; j < m; ++j) {
      std::vector<double> w = oracle.hvp(q[j]);
      double a = std::inner_product(w.begin(), w.end(), q[j].begin(), 0.0);
      alpha.push_back(a);
      for (size_t i = 0; i < n; ++i) w[i] -= a * q[j][i];
      if (j > 0)
        for (size_t i = 0; i < n; ++i) w[i] -= beta[j - 1] * q[j - 1][i];
      // two passes of classical Gram-Schmidt against the whole basis
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& qi : q) {
          double proj = std::inner_product(w.begin(), w.end(), qi.begin(), 0.0);
          for (size_t i = 0; i < n; ++i) w[i] -= proj * qi[i];
        }
      }
      double b = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
      if (j + 1 == m) break;
      if (b < 1e-12) break;  // breakdown: Krylov space exhausted
      beta.push_back(b);
      for (auto& x : w) x /= b;
      q.push_back(std::move(w));
    }

    auto eig = detail::tridiag_eigen(alpha, beta);
    for (size_t i = 0; i < eig.values.size(); ++i)
      pairs.emplace_back(eig.values[i], eig.first_components_sq[i] / k);
  }

  std::sort(pairs.begin(), pairs.end());
  est.ritz_values.reserve(pairs.size());
  est.ritz_weights.reserve(pairs.size());
  for (const auto& [v, w] : pairs) {
    est.ritz_values.push_back(v);
    est.ritz_weights.push_back(w);
  }
  est.validate();
  return est;
}

// Eigenvalues of the dense symmetric oracle, for cross-checks against the
// Lanczos estimates on small problems.
inline std::vector<double> dense_eigenvalues(const MatD& h) {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      h.data.data(), h.rows, h.cols);
  Eigen::MatrixXd sym = m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  std::vector<double> out(h.rows);
  for (int i = 0; i < h.rows; ++i) out[i] = es.eigenvalues()(i);
  return out;
}

}  // namespace xqc::spectra
