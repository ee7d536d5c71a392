#pragma once

#include <cmath>

#include "finsler/sampling.hpp"
#include "finsler/space.hpp"

namespace finsler {

// g_ij(x, v) = 1/2 d^2 F^2 / dv^i dv^j for jet-valued x and v. When grad is
// non-null it also receives 1/2 dF^2/dv^i.
template <typename T>
inline void metricJet(const FinslerSpace& s, const T* x, const T* v, JetMat<T>& g, JetVec<T>* grad = nullptr) {
  using D = Dual<Dual<T>>;
  const int n = s.dim();
  JetVec<D> xs{}, vs{};
  for (int i = 0; i < n; ++i) xs[i] = D(Dual<T>(x[i], T(0.0)), Dual<T>(0.0));
  for (int i = 0; i < n; ++i) {
    for (int k = i; k < n; ++k) {
      for (int m = 0; m < n; ++m)
        vs[m] = D(Dual<T>(v[m], T(m == i ? 1.0 : 0.0)), Dual<T>(T(m == k ? 1.0 : 0.0), T(0.0)));
      D f = s.normSquared<D>(xs.data(), vs.data());
      g(i, k) = 0.5 * f.du.du;
      g(k, i) = g(i, k);
      if (grad && i == k) (*grad)[i] = 0.5 * f.re.du;
    }
  }
}

struct MetricAtDirection {
  Mat g;
  Mat gInv;
  TangentVector anchor;
};

inline Mat metricAt(const FinslerSpace& s, const Vec& x, const Vec& v) {
  JetMat<double> g;
  metricJet<double>(s, x.data(), v.data(), g);
  return primalMat(g, s.dim());
}

inline MetricAtDirection fundamentalTensor(const FinslerSpace& s, const TangentVector& v) {
  s.requireInDomain(v.base);
  requireNonzero(v);
  MetricAtDirection out{metricAt(s, v.base, v.comp), Mat(), v};
  Eigen::SelfAdjointEigenSolver<Mat> es(out.g);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin > 1e12)
    throw FinslerError(ErrorCode::kSingularMetric, "fundamental tensor is not positive definite or is ill-conditioned");
  out.gInv = out.g.inverse();
  return out;
}

inline double innerProduct(const FinslerSpace& s, const TangentVector& ref, const Vec& w1, const Vec& w2) {
  return w1.dot(fundamentalTensor(s, ref).g * w2);
}

struct CartanAtDirection {
  Tensor3 A;
  TangentVector anchor;
};

// A_ijk = (F/2) dg_ij/dv^k = (F/4) d^3 F^2 / dv^i dv^j dv^k.
inline CartanAtDirection cartanTensor(const FinslerSpace& s, const TangentVector& v) {
  s.requireInDomain(v.base);
  requireNonzero(v);
  const int n = s.dim();
  const double F = s.F(v.base, v.comp);
  CartanAtDirection out{Tensor3(n), v};
  using T = D3;
  JetVec<T> xs{}, vs{};
  for (int i = 0; i < n; ++i) xs[i] = T(v.base[i]);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (int k = j; k < n; ++k) {
        for (int m = 0; m < n; ++m) {
          double d[3] = {m == i ? 1.0 : 0.0, m == j ? 1.0 : 0.0, m == k ? 1.0 : 0.0};
          vs[m] = seeded<T>(v.comp[m], d);
        }
        const double c = 0.25 * F * mixedPartial(s.normSquared<T>(xs.data(), vs.data()));
        out.A(i, j, k) = out.A(i, k, j) = out.A(j, i, k) = out.A(j, k, i) = out.A(k, i, j) = out.A(k, j, i) = c;
      }
  return out;
}

// Checks positivity, positive homogeneity and strong convexity on seeded
// samples of the sampling box. Throws ValidationFailure on the first defect.
inline void validateSpace(const FinslerSpace& s, int samples = 500, std::uint64_t seed = 12345) {
  Sampler rng(seed);
  const Box box = s.sampleBox();
  for (int k = 0; k < samples; ++k) {
    const Vec x = rng.pointIn(box);
    if (!s.inDomain(x)) throw FinslerError(ErrorCode::kValidationFailure, "sampling box leaves the domain");
    const double phi = s.Phi(x);
    if (!std::isfinite(phi)) throw FinslerError(ErrorCode::kValidationFailure, "log-weight not finite");
    Vec v = rng.cube(s.dim());
    if (v.norm() < 1e-6) continue;
    const double f = s.F(x, v);
    if (!(f > 0.0) || !std::isfinite(f))
      throw FinslerError(ErrorCode::kValidationFailure, "F is not positive on a nonzero vector");
    for (double lam : {0.5, 2.0, 3.7}) {
      if (std::abs(s.F(x, lam * v) - lam * f) > 1e-10 * lam * f)
        throw FinslerError(ErrorCode::kValidationFailure, "F is not positively 1-homogeneous");
    }
    const Mat g = metricAt(s, x, v);
    Eigen::SelfAdjointEigenSolver<Mat> es(g);
    if (!(es.eigenvalues().minCoeff() > 1e-10 * es.eigenvalues().maxCoeff()))
      throw FinslerError(ErrorCode::kValidationFailure, "F^2 is not strongly convex");
  }
}

}  // namespace finsler
