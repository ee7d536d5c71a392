#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>

#include "finsler/dual.hpp"
#include "finsler/errors.hpp"

namespace finsler {

inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

// Storage for jet-valued vectors and matrices. Eigen is kept for the plain
// double API; the templated kernels only need a handful of operations.
template <typename T>
using JetVec = std::array<T, kMaxDim>;

template <typename T>
struct JetMat {
  std::array<T, kMaxDim * kMaxDim> a{};
  T& operator()(int i, int j) { return a[i * kMaxDim + j]; }
  const T& operator()(int i, int j) const { return a[i * kMaxDim + j]; }
};

template <typename T>
inline JetVec<T> toJet(const Vec& v) {
  JetVec<T> out{};
  for (int i = 0; i < v.size(); ++i) out[i] = T(v[i]);
  return out;
}

template <typename T>
inline Vec primalVec(const JetVec<T>& v, int n) {
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = primal(v[i]);
  return out;
}

template <typename T>
inline Mat primalMat(const JetMat<T>& m, int n) {
  Mat out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = primal(m(i, j));
  return out;
}

// Flat rank-3 array with the same fixed capacity as Mat.
struct Tensor3 {
  int n = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> a{};

  Tensor3() = default;
  explicit Tensor3(int dim) : n(dim) {}
  double& operator()(int i, int j, int k) { return a[(i * kMaxDim + j) * kMaxDim + k]; }
  double operator()(int i, int j, int k) const { return a[(i * kMaxDim + j) * kMaxDim + k]; }
};

// LDL^T solve for symmetric positive definite systems, valid for any jet
// scalar. Returns false if a pivot is not positive.
template <typename T>
inline bool solveSpd(int n, JetMat<T> A, JetVec<T>& b) {
  for (int k = 0; k < n; ++k) {
    if (!(primal(A(k, k)) > 0.0)) return false;
    T inv = 1.0 / A(k, k);
    for (int i = k + 1; i < n; ++i) {
      T f = A(i, k) * inv;
      for (int j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
      b[i] -= f * b[k];
    }
  }
  for (int i = n - 1; i >= 0; --i) {
    T s = b[i];
    for (int j = i + 1; j < n; ++j) s -= A(i, j) * b[j];
    b[i] = s / A(i, i);
  }
  return true;
}

template <typename T>
inline bool inverseSpd(int n, const JetMat<T>& A, JetMat<T>& inv) {
  for (int c = 0; c < n; ++c) {
    JetVec<T> e{};
    for (int i = 0; i < n; ++i) e[i] = T(i == c ? 1.0 : 0.0);
    if (!solveSpd(n, A, e)) return false;
    for (int i = 0; i < n; ++i) inv(i, c) = e[i];
  }
  return true;
}

template <typename T>
inline T determinant(int n, JetMat<T> A) {
  T det(1.0);
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(primal(A(i, k))) > std::abs(primal(A(p, k)))) p = i;
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(A(k, j), A(p, j));
      det = -det;
    }
    if (primal(A(k, k)) == 0.0) return T(0.0);
    det = det * A(k, k);
    T inv = 1.0 / A(k, k);
    for (int i = k + 1; i < n; ++i) {
      T f = A(i, k) * inv;
      for (int j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
    }
  }
  return det;
}

}  // namespace finsler
