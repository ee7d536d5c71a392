#pragma once

#include <array>
#include <cmath>
#include <limits>

#include "finsler/connection.hpp"
#include "finsler/geodesics.hpp"

namespace finsler {

// R^i_k(v) = dG^i/dx^k - 1/2 v^j d^2G^i/dx^j dv^k + 1/2 G^j d^2G^i/dv^j dv^k
//            - 1/4 dG^i/dv^j dG^j/dv^k
inline Mat sprayCurvature(const FinslerSpace& s, const TangentVector& v) {
  s.requireInDomain(v.base);
  requireNonzero(v);
  const int n = s.dim();
  Mat R = Mat::Zero(n, n);
  if (s.xIndependent()) return R;
  const Vec& x = v.base;
  const Vec& y = v.comp;
  Mat Gx(n, n), Gv(n, n), Gxv(n, n), Gvv(n, n);
  Vec G(n);
  {
    JetVec<D1> xs{}, vs{}, out{};
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) {
        xs[i] = D1(x[i], i == k ? 1.0 : 0.0);
        vs[i] = D1(y[i]);
      }
      sprayJet<D1>(s, xs.data(), vs.data(), out.data());
      for (int i = 0; i < n; ++i) Gx(i, k) = out[i].du;
      for (int i = 0; i < n; ++i) {
        xs[i] = D1(x[i]);
        vs[i] = D1(y[i], i == k ? 1.0 : 0.0);
      }
      sprayJet<D1>(s, xs.data(), vs.data(), out.data());
      for (int i = 0; i < n; ++i) {
        Gv(i, k) = out[i].du;
        G[i] = out[i].re;
      }
    }
  }
  {
    JetVec<D2> xs{}, vs{}, out{};
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) {
        const double dx[2] = {0.0, y[i]};
        const double dv[2] = {i == k ? 1.0 : 0.0, 0.0};
        xs[i] = seeded<D2>(x[i], dx);
        vs[i] = seeded<D2>(y[i], dv);
      }
      sprayJet<D2>(s, xs.data(), vs.data(), out.data());
      for (int i = 0; i < n; ++i) Gxv(i, k) = mixedPartial(out[i]);
      for (int i = 0; i < n; ++i) {
        const double dv[2] = {i == k ? 1.0 : 0.0, G[i]};
        xs[i] = D2(x[i]);
        vs[i] = seeded<D2>(y[i], dv);
      }
      sprayJet<D2>(s, xs.data(), vs.data(), out.data());
      for (int i = 0; i < n; ++i) Gvv(i, k) = mixedPartial(out[i]);
    }
  }
  R = Gx - 0.5 * Gxv + 0.5 * Gvv - 0.25 * Gv * Gv;
  return R;
}

struct FlagValue {
  TangentVector pole;
  Vec flagDirection;
  double value = 0.0;
};

inline FlagValue flagCurvature(const FinslerSpace& s, const TangentVector& v, const Vec& w) {
  const Mat g = fundamentalTensor(s, v).g;
  const Vec& y = v.comp;
  const double gvv = y.dot(g * y);
  const Vec wp = w - (y.dot(g * w) / gvv) * y;
  const double gww = w.dot(g * w);
  const double gpp = wp.dot(g * wp);
  if (!(gpp > 1e-12 * gww)) throw FinslerError(ErrorCode::kDegenerateFlag, "flag direction parallel to the pole");
  const Mat R = sprayCurvature(s, v);
  return {v, w, wp.dot(g * (R * wp)) / (gvv * gpp)};
}

inline double ricci(const FinslerSpace& s, const TangentVector& v) { return sprayCurvature(s, v).trace(); }

// Psi(v) = 1/2 log det g(v) - Phi(x), the density of m against the volume of g_v.
inline double psiValue(const FinslerSpace& s, const Vec& x, const Vec& v) {
  return 0.5 * std::log(metricAt(s, x, v).determinant()) - s.Phi(x);
}

struct PsiAlongGeodesic {
  double value = 0.0;
  double d1 = 0.0;  // (Psi o eta')'(0)
  double d2 = 0.0;  // (Psi o eta')''(0)
  std::vector<double> times;
  std::vector<double> values;
};

// Derivatives come from five-point stencils at spacing h and 2h combined by
// Richardson extrapolation; h = 1e-3 * window. With profilePoints > 0 the
// function is also sampled on [-window, window].
inline PsiAlongGeodesic psiAlongGeodesic(const FinslerSpace& s, const TangentVector& v, double window = 1.0,
                                         int profilePoints = 0, double step = 1e-3) {
  s.requireInDomain(v.base);
  requireNonzero(v);
  const double f = s.F(v.base, v.comp);
  if (std::abs(f - 1.0) > 1e-9) throw FinslerError(ErrorCode::kInvalidArgument, "psiAlongGeodesic needs a unit vector");
  const double h = 1e-3 * window;
  std::array<double, 9> psi{};  // t = (k - 4) h
  psi[4] = psiValue(s, v.base, v.comp);
  for (int dir : {1, -1}) {
    Vec x = v.base, y = v.comp;
    for (int k = 1; k <= 4; ++k) {
      detail::rk4Step(s, x, y, dir * h);
      if (!s.inDomain(x)) throw FinslerError(ErrorCode::kLeftDomain, "geodesic left the domain", k * h);
      psi[4 + dir * k] = psiValue(s, x, y);
    }
  }
  auto d1 = [&](int m, double hh) {
    return (-psi[4 + 2 * m] + 8.0 * psi[4 + m] - 8.0 * psi[4 - m] + psi[4 - 2 * m]) / (12.0 * hh);
  };
  auto d2 = [&](int m, double hh) {
    return (-psi[4 + 2 * m] + 16.0 * psi[4 + m] - 30.0 * psi[4] + 16.0 * psi[4 - m] - psi[4 - 2 * m]) / (12.0 * hh * hh);
  };
  PsiAlongGeodesic out;
  out.value = psi[4];
  out.d1 = (16.0 * d1(1, h) - d1(2, 2.0 * h)) / 15.0;
  out.d2 = (16.0 * d2(1, h) - d2(2, 2.0 * h)) / 15.0;
  if (profilePoints > 0) {
    const int steps = detail::stepCount(window, step);
    const double dt = window / steps;
    const int every = std::max(1, steps / profilePoints);
    std::vector<std::pair<double, double>> samples{{0.0, psi[4]}};
    for (int dir : {1, -1}) {
      Vec x = v.base, y = v.comp;
      for (int k = 1; k <= steps; ++k) {
        detail::rk4Step(s, x, y, dir * dt);
        if (!s.inDomain(x)) throw FinslerError(ErrorCode::kLeftDomain, "geodesic left the domain", k * dt);
        if (k % every == 0) samples.push_back({dir * k * dt, psiValue(s, x, y)});
      }
    }
    std::sort(samples.begin(), samples.end());
    for (const auto& [t, p] : samples) {
      out.times.push_back(t);
      out.values.push_back(p);
    }
  }
  return out;
}

struct EffectiveDim {
  double value = std::numeric_limits<double>::infinity();
  bool infinite() const { return std::isinf(value); }
  static EffectiveDim inf() { return {}; }
  static EffectiveDim of(double N) { return {N}; }
};

struct WeightedRicciValue {
  double value = 0.0;
  double ricci = 0.0;  // unweighted, at the unit vector
  double psi1 = 0.0;
  double psi2 = 0.0;
  double scale = 1.0;  // F(v)^2
  bool minusInfinity = false;
};

// Threshold below which (Psi o eta')'(0) counts as zero for N = n.
inline constexpr double kPsiFlatTol = 1e-7;

inline WeightedRicciValue weightedRicci(const FinslerSpace& s, const TangentVector& v, EffectiveDim N) {
  s.requireInDomain(v.base);
  requireNonzero(v);
  const int n = s.dim();
  if (!N.infinite() && N.value < n)
    throw FinslerError(ErrorCode::kInvalidArgument, "effective dimension below the manifold dimension");
  const double f = s.F(v.base, v.comp);
  const TangentVector u{v.base, v.comp / f};
  WeightedRicciValue r;
  r.scale = f * f;
  r.ricci = ricci(s, u);
  const PsiAlongGeodesic p = psiAlongGeodesic(s, u);
  r.psi1 = p.d1;
  r.psi2 = p.d2;
  double val;
  if (N.infinite()) {
    val = r.ricci + r.psi2;
  } else if (N.value == n) {
    if (std::abs(r.psi1) > kPsiFlatTol) {
      r.minusInfinity = true;
      r.value = -std::numeric_limits<double>::infinity();
      return r;
    }
    val = r.ricci + r.psi2;
  } else {
    val = r.ricci + r.psi2 - r.psi1 * r.psi1 / (N.value - n);
  }
  r.value = r.scale * val;
  return r;
}

// ---- osculating Riemannian metric of a geodesic field

// Quadratic vector field V(x0 + h) = v + A h + 1/2 B[h, h] whose integral
// curves are geodesics to second order at x0, with V(x0) = v.
struct GeodesicFieldJet {
  int n = 0;
  Vec x0;
  Vec v;
  Mat A;
  Tensor3 B;  // B(i, j, k) = B^i[e_j, e_k]

  template <typename T>
  JetVec<T> eval(const JetVec<T>& x) const {
    JetVec<T> h{}, out{};
    for (int i = 0; i < n; ++i) h[i] = x[i] - x0[i];
    for (int i = 0; i < n; ++i) {
      T s(v[i]);
      for (int j = 0; j < n; ++j) {
        if (A(i, j) != 0.0) s += A(i, j) * h[j];
        for (int k = 0; k < n; ++k)
          if (B(i, j, k) != 0.0) s += (0.5 * B(i, j, k)) * (h[j] * h[k]);
      }
      out[i] = s;
    }
    return out;
  }

  VectorField field() const {
    GeodesicFieldJet copy = *this;
    return VectorField::fromGeneric<4>(n, [copy](const auto& x) { return copy.eval(x); });
  }
};

inline GeodesicFieldJet geodesicFieldJet(const FinslerSpace& s, const TangentVector& v) {
  s.requireInDomain(v.base);
  requireNonzero(v);
  const int n = s.dim();
  Vec G = Vec::Zero(n);
  Mat Gx = Mat::Zero(n, n), Gv = Mat::Zero(n, n);
  if (!s.xIndependent()) {
    JetVec<D1> xs{}, vs{}, out{};
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) {
        xs[i] = D1(v.base[i], i == k ? 1.0 : 0.0);
        vs[i] = D1(v.comp[i]);
      }
      sprayJet<D1>(s, xs.data(), vs.data(), out.data());
      for (int i = 0; i < n; ++i) Gx(i, k) = out[i].du;
      for (int i = 0; i < n; ++i) {
        xs[i] = D1(v.base[i]);
        vs[i] = D1(v.comp[i], i == k ? 1.0 : 0.0);
      }
      sprayJet<D1>(s, xs.data(), vs.data(), out.data());
      for (int i = 0; i < n; ++i) {
        Gv(i, k) = out[i].du;
        G[i] = out[i].re;
      }
    }
  }
  const Mat g = metricAt(s, v.base, v.comp);
  const Vec ell = (g * v.comp) / v.comp.dot(g * v.comp);
  GeodesicFieldJet J;
  J.n = n;
  J.x0 = v.base;
  J.v = v.comp;
  J.A = -G * ell.transpose();
  const Mat M = -(J.A * J.A + Gx + Gv * J.A);
  const Vec Mv = M * v.comp;
  J.B = Tensor3(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) J.B(i, j, k) = ell[j] * M(i, k) + ell[k] * M(i, j) - ell[j] * ell[k] * Mv[i];
  return J;
}

namespace detail {

template <typename T>
using Christoffel = std::array<T, kMaxDim * kMaxDim * kMaxDim>;

inline int cidx(int l, int i, int j) { return (l * kMaxDim + i) * kMaxDim + j; }

// Levi-Civita symbols of h(x) = g(x, V(x)) at a jet point x.
template <typename T>
Christoffel<T> osculatingChristoffel(const FinslerSpace& s, const GeodesicFieldJet& V, const JetVec<T>& x,
                                     JetMat<T>* hOut = nullptr) {
  using E = Dual<T>;
  const int n = s.dim();
  JetMat<T> h;
  std::array<JetMat<T>, kMaxDim> dh;
  for (int k = 0; k < n; ++k) {
    JetVec<E> xs{};
    for (int i = 0; i < n; ++i) xs[i] = E(x[i], T(i == k ? 1.0 : 0.0));
    const JetVec<E> vv = V.eval<E>(xs);
    JetMat<E> hk;
    metricJet<E>(s, xs.data(), vv.data(), hk);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        dh[k](i, j) = hk(i, j).du;
        h(i, j) = hk(i, j).re;
      }
  }
  JetMat<T> hInv;
  if (!inverseSpd(n, h, hInv)) throw FinslerError(ErrorCode::kSingularMetric, "osculating metric not positive definite");
  Christoffel<T> G{};
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        T sum(0.0);
        for (int m = 0; m < n; ++m) sum += hInv(l, m) * (dh[i](j, m) + dh[j](i, m) - dh[m](i, j));
        G[cidx(l, i, j)] = 0.5 * sum;
      }
  if (hOut) *hOut = h;
  return G;
}

// R(X, Y) Z of the osculating metric at x0, returned as a function of the
// three vectors through the full tensor R^l_ijk.
struct OsculatingCurvature {
  int n = 0;
  Mat h;
  Christoffel<double> gamma{};
  std::array<double, kMaxDim * kMaxDim * kMaxDim * kMaxDim> R{};  // R^l_ijk at ((l*4+i)*4+j)*4+k

  Vec apply(const Vec& X, const Vec& Y, const Vec& Z) const {
    Vec out = Vec::Zero(n);
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            out[l] += R[((l * kMaxDim + i) * kMaxDim + j) * kMaxDim + k] * Z[i] * X[j] * Y[k];
    return out;
  }
};

inline OsculatingCurvature osculatingCurvature(const FinslerSpace& s, const GeodesicFieldJet& V) {
  const int n = s.dim();
  OsculatingCurvature c;
  c.n = n;
  JetMat<double> h;
  c.gamma = osculatingChristoffel<double>(s, V, toJet<double>(V.x0), &h);
  c.h = primalMat(h, n);
  std::array<Christoffel<double>, kMaxDim> dG;
  for (int a = 0; a < n; ++a) {
    JetVec<D1> xs{};
    for (int i = 0; i < n; ++i) xs[i] = D1(V.x0[i], i == a ? 1.0 : 0.0);
    const Christoffel<D1> Ga = osculatingChristoffel<D1>(s, V, xs);
    for (std::size_t q = 0; q < Ga.size(); ++q) dG[a][q] = Ga[q].du;
  }
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double r = dG[j][cidx(l, k, i)] - dG[k][cidx(l, j, i)];
          for (int m = 0; m < n; ++m)
            r += c.gamma[cidx(l, j, m)] * c.gamma[cidx(m, k, i)] - c.gamma[cidx(l, k, m)] * c.gamma[cidx(m, j, i)];
          c.R[((l * kMaxDim + i) * kMaxDim + j) * kMaxDim + k] = r;
        }
  return c;
}

}  // namespace detail

// Sectional curvature of the osculating metric g_V on span(v, w); an
// independent route to the flag curvature.
inline double osculatingSectionalCurvature(const FinslerSpace& s, const TangentVector& v, const Vec& w) {
  const GeodesicFieldJet V = geodesicFieldJet(s, v);
  const auto c = detail::osculatingCurvature(s, V);
  const Vec& X = v.comp;
  const Vec RY = c.apply(X, w, w);
  const double denom = X.dot(c.h * X) * w.dot(c.h * w) - std::pow(X.dot(c.h * w), 2);
  if (!(denom > 1e-14)) throw FinslerError(ErrorCode::kDegenerateFlag, "flag direction parallel to the pole");
  return RY.dot(c.h * X) / denom;
}

// Ricci curvature of g_V in the direction v.
inline double osculatingRicci(const FinslerSpace& s, const TangentVector& v) {
  const GeodesicFieldJet V = geodesicFieldJet(s, v);
  const auto c = detail::osculatingCurvature(s, V);
  const int n = s.dim();
  double r = 0.0;
  for (int j = 0; j < n; ++j) {
    Vec e = Vec::Zero(n);
    e[j] = 1.0;
    r += c.apply(e, v.comp, v.comp)[j];
  }
  return r;
}

struct OsculatingLemmaResidual {
  double alongField = 0.0;   // |D^V_V W - D^{g_V}_V W|
  double alongVector = 0.0;  // |D^V_W V - D^{g_V}_W V|
};

// Compares the Chern covariant derivative with reference V against the
// Levi-Civita derivative of g_V at the base point of v.
inline OsculatingLemmaResidual osculatingLemma(const FinslerSpace& s, const TangentVector& v, const VectorField& W) {
  const int n = s.dim();
  const GeodesicFieldJet V = geodesicFieldJet(s, v);
  const ConnectionData c = connectionAt(s, v);
  const auto gl = detail::osculatingChristoffel<double>(s, V, toJet<double>(v.base));
  JetVec<D1> xs{};
  for (int i = 0; i < n; ++i) xs[i] = D1(v.base[i], v.comp[i]);
  const JetVec<D1> Wj = W.eval<D1>(xs);
  Vec w(n), dW(n);
  for (int i = 0; i < n; ++i) {
    w[i] = Wj[i].re;
    dW[i] = Wj[i].du;
  }
  const Vec dV = V.A * w;
  Vec a1 = dW, a2 = dW, b1 = dV, b2 = dV;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        a1[i] += c.chern(i, j, k) * v.comp[j] * w[k];
        a2[i] += gl[detail::cidx(i, j, k)] * v.comp[j] * w[k];
        b1[i] += c.chern(i, j, k) * w[j] * v.comp[k];
        b2[i] += gl[detail::cidx(i, j, k)] * w[j] * v.comp[k];
      }
  return {(a1 - a2).norm(), (b1 - b2).norm()};
}

}  // namespace finsler
