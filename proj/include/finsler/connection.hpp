#pragma once

#include <cmath>
#include <functional>

#include "finsler/fields.hpp"
#include "finsler/sampling.hpp"
#include "finsler/tensors.hpp"

namespace finsler {

// Spray G^i = gamma^i_jk v^j v^k, computed in its second-order form
// G^i = 1/2 g^il ( v^k d^2F^2/dx^k dv^l - dF^2/dx^l ). Works on any jet type.
template <typename T>
inline void sprayJet(const FinslerSpace& s, const T* x, const T* v, T* G) {
  const int n = s.dim();
  if (s.xIndependent()) {
    for (int i = 0; i < n; ++i) G[i] = T(0.0);
    return;
  }
  JetMat<T> g;
  metricJet<T>(s, x, v, g);
  using D = Dual<Dual<T>>;
  using E = Dual<T>;
  JetVec<T> rhs{};
  JetVec<D> xs{}, vs{};
  JetVec<E> x1{}, v1{};
  for (int i = 0; i < n; ++i) {
    xs[i] = D(E(x[i], T(0.0)), E(v[i], T(0.0)));
    v1[i] = E(v[i], T(0.0));
  }
  for (int l = 0; l < n; ++l) {
    for (int i = 0; i < n; ++i) vs[i] = D(E(v[i], T(i == l ? 1.0 : 0.0)), E(0.0));
    const T mixed = s.normSquared<D>(xs.data(), vs.data()).du.du;
    for (int i = 0; i < n; ++i) x1[i] = E(x[i], T(i == l ? 1.0 : 0.0));
    const T dx = s.normSquared<E>(x1.data(), v1.data()).du;
    rhs[l] = 0.5 * (mixed - dx);
  }
  if (!solveSpd(n, g, rhs)) throw FinslerError(ErrorCode::kSingularMetric, "fundamental tensor not positive definite");
  for (int i = 0; i < n; ++i) G[i] = rhs[i];
}

namespace detail {

// Second-order form of the spray for F = alpha + beta with the derivatives
// of F^2 written out by the chain rule (beta = 0 for Riemannian spaces).
inline Vec sprayQuadraticLinear(const FinslerSpace& s, const Vec& x, const Vec& v) {
  const int n = s.dim();
  FinslerSpace::CoefficientJet c;
  s.coefficientJet(x, c);
  const Vec av = c.a * v;
  const double alpha = std::sqrt(v.dot(av));
  const double beta = c.b.dot(v);
  const double F = alpha + beta;
  const Vec al = av / alpha;  // d alpha / dv
  Mat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      g(i, j) = (al[i] + c.b[i]) * (al[j] + c.b[j]) + F * (c.a(i, j) - al[i] * al[j]) / alpha;
  // dA(l, k) = d a_lj / dx^k v^j, db stays as is
  Mat dA(n, n);
  Vec dxA(n);  // d (v a v) / dx^l
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k) {
      double t = 0.0;
      for (int j = 0; j < n; ++j) t += c.da(l, j, k) * v[j];
      dA(l, k) = t;
    }
  for (int l = 0; l < n; ++l) dxA[l] = v.dot(dA.col(l));
  const Vec dbv = c.db.transpose() * v;        // d beta / dx^l
  const Vec vdA = dA * v;                       // v^k d a_lj/dx^k v^j
  const Vec vdb = c.db * v;                     // v^k d b_l / dx^k
  const double vdalpha = v.dot(dxA) / (2.0 * alpha);
  const double vdF = vdalpha + v.dot(dbv);
  Vec rhs(n);
  for (int l = 0; l < n; ++l) {
    const double dxF = dxA[l] / (2.0 * alpha) + dbv[l];
    const double vdal = vdA[l] / alpha - av[l] * vdalpha / (alpha * alpha);
    const double mixed = 2.0 * vdF * (al[l] + c.b[l]) + 2.0 * F * (vdal + vdb[l]);
    rhs[l] = 0.5 * (mixed - 2.0 * F * dxF);
  }
  return g.llt().solve(rhs);
}

}  // namespace detail

inline Vec sprayAt(const FinslerSpace& s, const Vec& x, const Vec& v) {
  if (s.xIndependent()) return Vec::Zero(s.dim());
  if (s.family() != Family::kMinkowski) return detail::sprayQuadraticLinear(s, x, v);
  JetVec<double> G{};
  sprayJet<double>(s, x.data(), v.data(), G.data());
  return primalVec(G, s.dim());
}

// Spray through jets of F^2 only; the reference the fast path is tested against.
inline Vec sprayAtJet(const FinslerSpace& s, const Vec& x, const Vec& v) {
  JetVec<double> G{};
  sprayJet<double>(s, x.data(), v.data(), G.data());
  return primalVec(G, s.dim());
}

// Spray and N^i_j = 1/2 dG^i/dv^j in one pass.
inline void sprayAndNonlinear(const FinslerSpace& s, const Vec& x, const Vec& v, Vec& G, Mat& N) {
  const int n = s.dim();
  G = Vec::Zero(n);
  N = Mat::Zero(n, n);
  if (s.xIndependent()) return;
  JetVec<D1> xs{}, vs{}, out{};
  for (int i = 0; i < n; ++i) xs[i] = D1(x[i]);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) vs[i] = D1(v[i], i == j ? 1.0 : 0.0);
    sprayJet<D1>(s, xs.data(), vs.data(), out.data());
    for (int i = 0; i < n; ++i) {
      N(i, j) = 0.5 * out[i].du;
      if (j == 0) G[i] = out[i].re;
    }
  }
}

inline Mat nonlinearConnection(const FinslerSpace& s, const TangentVector& v) {
  s.requireInDomain(v.base);
  requireNonzero(v);
  Vec G;
  Mat N;
  sprayAndNonlinear(s, v.base, v.comp, G, N);
  return N;
}

struct ConnectionData {
  TangentVector anchor;
  Mat g;
  Mat gInv;
  Tensor3 dgdx;     // d g_ij / dx^k stored at (i, j, k)
  Tensor3 cartan;   // A_ijk
  Tensor3 formal;   // gamma^i_jk
  Vec spray;        // G^i
  Mat nonlinear;    // N^i_j
  Mat nonlinearAlt; // gamma^i_jk v^k - A^i_jk gamma^k_lm v^l v^m / F
  Tensor3 chern;    // Gamma^i_jk
  double F = 0.0;
};

inline ConnectionData connectionAt(const FinslerSpace& s, const TangentVector& v) {
  s.requireInDomain(v.base);
  requireNonzero(v);
  const int n = s.dim();
  ConnectionData c;
  c.anchor = v;
  const MetricAtDirection m = fundamentalTensor(s, v);
  c.g = m.g;
  c.gInv = m.gInv;
  c.F = s.F(v.base, v.comp);
  c.cartan = cartanTensor(s, v).A;

  c.dgdx = Tensor3(n);
  if (!s.xIndependent()) {
    JetVec<D3> xs{}, vs{};
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          for (int a = 0; a < n; ++a) {
            const double dx[3] = {a == k ? 1.0 : 0.0, 0.0, 0.0};
            const double dv[3] = {0.0, a == i ? 1.0 : 0.0, a == j ? 1.0 : 0.0};
            xs[a] = seeded<D3>(v.base[a], dx);
            vs[a] = seeded<D3>(v.comp[a], dv);
          }
          const double d = 0.5 * mixedPartial(s.normSquared<D3>(xs.data(), vs.data()));
          c.dgdx(i, j, k) = c.dgdx(j, i, k) = d;
        }
  }

  c.formal = Tensor3(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double sum = 0.0;
        for (int l = 0; l < n; ++l)
          sum += c.gInv(i, l) * (c.dgdx(j, l, k) + c.dgdx(l, k, j) - c.dgdx(j, k, l));
        c.formal(i, j, k) = 0.5 * sum;
      }

  sprayAndNonlinear(s, v.base, v.comp, c.spray, c.nonlinear);

  const Vec& y = v.comp;
  Vec gvv = Vec::Zero(n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (int m2 = 0; m2 < n; ++m2) gvv[k] += c.formal(k, l, m2) * y[l] * y[m2];
  c.nonlinearAlt = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double a = 0.0;
      for (int k = 0; k < n; ++k) a += c.formal(i, j, k) * y[k];
      double b = 0.0;
      for (int l = 0; l < n; ++l)
        for (int k = 0; k < n; ++k) b += c.gInv(i, l) * c.cartan(l, j, k) * gvv[k];
      c.nonlinearAlt(i, j) = a - b / c.F;
    }

  c.chern = Tensor3(n);
  const Mat& N = c.nonlinear;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double corr = 0.0;
        for (int l = 0; l < n; ++l) {
          double t = 0.0;
          for (int m2 = 0; m2 < n; ++m2)
            t += c.cartan(j, l, m2) * N(m2, k) + c.cartan(l, k, m2) * N(m2, j) - c.cartan(j, k, m2) * N(m2, l);
          corr += c.gInv(i, l) * t;
        }
        c.chern(i, j, k) = c.formal(i, j, k) - corr / c.F;
      }
  return c;
}

// D^w_v X = v^j dX^i/dx^j + Gamma^i_jk(w) v^j X^k at the base point of w.
inline Vec covariantDerivative(const FinslerSpace& s, const TangentVector& ref, const Vec& dir, const VectorField& X) {
  if (ref.comp.cwiseAbs().maxCoeff() == 0.0)
    throw FinslerError(ErrorCode::kZeroReference, "reference vector vanishes");
  const int n = s.dim();
  const ConnectionData c = connectionAt(s, ref);
  JetVec<D1> xs{};
  for (int i = 0; i < n; ++i) xs[i] = D1(ref.base[i], dir[i]);
  const JetVec<D1> Xj = X.eval<D1>(xs);
  Vec out(n);
  for (int i = 0; i < n; ++i) {
    double sum = Xj[i].du;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) sum += c.chern(i, j, k) * dir[j] * Xj[k].re;
    out[i] = sum;
  }
  return out;
}

struct CurvePoint {
  Vec x;
  Vec dx;
};
using Curve = std::function<CurvePoint(double)>;  // parameter runs over [0, 1]

// Transport with reference vector the curve velocity. Along any curve
// Gamma^i_jk(c') c'^j = N^i_k(c'), so the equation reads V' = -N(c') V.
inline Vec parallelTransport(const FinslerSpace& s, const Curve& curve, const Vec& v0, int steps = 1000) {
  const int n = s.dim();
  auto rhs = [&](double t, const Vec& V) {
    const CurvePoint p = curve(t);
    if (p.dx.cwiseAbs().maxCoeff() == 0.0)
      throw FinslerError(ErrorCode::kZeroReference, "curve velocity vanishes");
    Vec G;
    Mat N;
    sprayAndNonlinear(s, p.x, p.dx, G, N);
    return Vec(-(N * V));
  };
  Vec V = v0;
  const double h = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const Vec k1 = rhs(t, V);
    const Vec k2 = rhs(t + 0.5 * h, V + 0.5 * h * k1);
    const Vec k3 = rhs(t + 0.5 * h, V + 0.5 * h * k2);
    const Vec k4 = rhs(t + h, V + h * k3);
    V += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  (void)n;
  return V;
}

struct TransportResult {
  Vec value;
  Vec endPoint;
  Vec endVelocity;
};

// Integrates the geodesic from `initial` jointly with the transported vector.
inline TransportResult parallelTransportAlongGeodesic(const FinslerSpace& s, const TangentVector& initial, double tEnd,
                                                      const Vec& v0, double step = 1e-3) {
  requireNonzero(initial);
  const int n = s.dim();
  const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(tEnd) / step - 1e-9)));
  const double h = tEnd / steps;
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3 * kMaxDim, 1> y(3 * n);
  y << initial.base, initial.comp, v0;
  auto rhs = [&](const decltype(y)& z) {
    decltype(y) out(3 * n);
    Vec G;
    Mat N;
    sprayAndNonlinear(s, z.head(n), z.segment(n, n), G, N);
    out.head(n) = z.segment(n, n);
    out.segment(n, n) = -G;
    out.tail(n) = -(N * z.tail(n));
    return out;
  };
  for (int k = 0; k < steps; ++k) {
    const auto k1 = rhs(y);
    const auto k2 = rhs(y + 0.5 * h * k1);
    const auto k3 = rhs(y + 0.5 * h * k2);
    const auto k4 = rhs(y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!s.inDomain(y.head(n)))
      throw FinslerError(ErrorCode::kLeftDomain, "transport path left the domain", (k + 1) * h);
  }
  return {y.tail(n), y.head(n), y.segment(n, n)};
}

struct BerwaldReport {
  bool berwald = false;
  double maxSpread = 0.0;
  int basePoints = 0;
  int directions = 0;
};

// Samples Gamma(v) over several directions per base point and reports the
// largest spread of any component.
inline BerwaldReport isBerwald(const FinslerSpace& s, int basePoints = 10, int directions = 4, double tol = 1e-6,
                               std::uint64_t seed = 7) {
  if (directions < 2 || basePoints < 1)
    throw FinslerError(ErrorCode::kInvalidArgument, "need at least two directions per base point");
  Sampler rng(seed);
  const Box box = s.sampleBox();
  const int n = s.dim();
  BerwaldReport r;
  r.basePoints = basePoints;
  r.directions = directions;
  for (int b = 0; b < basePoints; ++b) {
    const Vec x = rng.pointIn(box);
    std::vector<Tensor3> gs;
    for (int d = 0; d < directions; ++d) gs.push_back(connectionAt(s, {x, rng.unitVectorAt(s, x)}).chern);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double lo = gs[0](i, j, k), hi = lo;
          for (const auto& g : gs) {
            lo = std::min(lo, g(i, j, k));
            hi = std::max(hi, g(i, j, k));
          }
          r.maxSpread = std::max(r.maxSpread, hi - lo);
        }
  }
  r.berwald = r.maxSpread < tol;
  return r;
}

}  // namespace finsler
