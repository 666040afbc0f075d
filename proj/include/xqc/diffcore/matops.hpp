#pragma once

#include <Eigen/Dense>

#include "xqc/core/common.hpp"
#include "xqc/diffcore/dual.hpp"

namespace xqc::diffcore {

namespace detail {

template <class Real>
using EigenMap = Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class Real>
using EigenCMap =
    Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// C (+)= op(A) * op(B) for plain floating-point scalars.
template <class Real>
void gemm_real(const Matrix<Real>& A, bool tA, const Matrix<Real>& B, bool tB, Matrix<Real>& C,
               bool accumulate) {
  EigenCMap<Real> a(A.data.data(), A.rows, A.cols);
  EigenCMap<Real> b(B.data.data(), B.rows, B.cols);
  EigenMap<Real> c(C.data.data(), C.rows, C.cols);
  if (!tA && !tB) {
    if (accumulate) c.noalias() += a * b; else c.noalias() = a * b;
  } else if (!tA && tB) {
    if (accumulate) c.noalias() += a * b.transpose(); else c.noalias() = a * b.transpose();
  } else if (tA && !tB) {
    if (accumulate) c.noalias() += a.transpose() * b; else c.noalias() = a.transpose() * b;
  } else {
    if (accumulate) c.noalias() += a.transpose() * b.transpose();
    else c.noalias() = a.transpose() * b.transpose();
  }
}

inline void split_dual(const Matrix<Dual>& M, MatD& v, MatD& d) {
  v.rows = d.rows = M.rows;
  v.cols = d.cols = M.cols;
  v.data.resize(M.size());
  d.data.resize(M.size());
  for (size_t i = 0; i < M.size(); ++i) {
    v.data[i] = M.data[i].v;
    d.data[i] = M.data[i].d;
  }
}

}  // namespace detail

// C (+)= op(A) * op(B). Dual matrices are split into value/tangent parts so
// the three underlying products run as plain double GEMMs.
template <class T>
void gemm(const Matrix<T>& A, bool tA, const Matrix<T>& B, bool tB, Matrix<T>& C,
          bool accumulate) {
  if constexpr (std::is_same_v<T, Dual>) {
    MatD av, ad, bv, bd;
    detail::split_dual(A, av, ad);
    detail::split_dual(B, bv, bd);
    MatD cv(C.rows, C.cols), cd(C.rows, C.cols);
    detail::gemm_real(av, tA, bv, tB, cv, false);
    detail::gemm_real(ad, tA, bv, tB, cd, false);
    detail::gemm_real(av, tA, bd, tB, cd, true);
    if (accumulate) {
      for (size_t i = 0; i < C.size(); ++i) {
        C.data[i].v += cv.data[i];
        C.data[i].d += cd.data[i];
      }
    } else {
      for (size_t i = 0; i < C.size(); ++i) C.data[i] = {cv.data[i], cd.data[i]};
    }
  } else {
    detail::gemm_real(A, tA, B, tB, C, accumulate);
  }
}

}  // namespace xqc::diffcore
