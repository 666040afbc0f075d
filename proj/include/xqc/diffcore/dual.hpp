#pragma once

#include <cmath>

namespace xqc::diffcore {

// First-order dual number: v carries the primal value, d the directional
// derivative. Running a gradient computation on Dual scalars yields the
// directional derivative of that gradient, i.e. an exact Hessian-vector
// product (forward-over-reverse).
struct Dual {
  double v = 0.0;
  double d = 0.0;

  Dual() = default;
  Dual(double value) : v(value), d(0.0) {}  // NOLINT: implicit by design
  Dual(double value, double tangent) : v(value), d(tangent) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(const Dual& a, const Dual& b) {
  double inv = 1.0 / b.v;
  return {a.v * inv, (a.d * b.v - a.v * b.d) * inv * inv};
}

inline Dual operator*(double s, const Dual& a) { return {s * a.v, s * a.d}; }
inline Dual operator*(const Dual& a, double s) { return {s * a.v, s * a.d}; }
inline Dual operator+(const Dual& a, double s) { return {a.v + s, a.d}; }
inline Dual operator+(double s, const Dual& a) { return {a.v + s, a.d}; }
inline Dual operator-(const Dual& a, double s) { return {a.v - s, a.d}; }
inline Dual operator-(double s, const Dual& a) { return {s - a.v, -a.d}; }
inline Dual operator/(const Dual& a, double s) { return {a.v / s, a.d / s}; }
inline Dual operator/(double s, const Dual& a) {
  double inv = 1.0 / a.v;
  return {s * inv, -s * a.d * inv * inv};
}

inline Dual exp(const Dual& a) { double e = std::exp(a.v); return {e, a.d * e}; }
inline Dual log(const Dual& a) { return {std::log(a.v), a.d / a.v}; }
inline Dual log1p(const Dual& a) { return {std::log1p(a.v), a.d / (1.0 + a.v)}; }
inline Dual sqrt(const Dual& a) { double s = std::sqrt(a.v); return {s, 0.5 * a.d / s}; }
inline Dual tanh(const Dual& a) { double t = std::tanh(a.v); return {t, a.d * (1.0 - t * t)}; }

// Primal value of a scalar; branch decisions in generic kernels go through
// this so they never depend on tangents.
inline double value(double x) { return x; }
inline double value(float x) { return x; }
inline double value(const Dual& x) { return x.v; }

inline double tangent(double) { return 0.0; }
inline double tangent(const Dual& x) { return x.d; }

}  // namespace xqc::diffcore
