#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "finsler/connection.hpp"
#include "finsler/curvature.hpp"
#include "finsler/fields.hpp"
#include "finsler/tensors.hpp"

namespace finsler {

// Sum with pairwise splitting so results do not depend on accumulation order
// beyond the fixed recursion.
inline double pairwiseSum(const double* a, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwiseSum(a, h) + pairwiseSum(a + h, n - h);
}

inline double pairwiseSum(const std::vector<double>& a) { return pairwiseSum(a.data(), a.size()); }

namespace detail {

inline constexpr double kLegendreTol = 1e-10;

// Newton on v -> g_v(v, .) - alpha, which is the gradient of the strictly
// convex function F^2/2 - alpha, so a backtracking line search on that
// function makes the iteration global.
inline Vec legendreSolve(const FinslerSpace& s, const Vec& x, const Vec& alpha, double* residualOut = nullptr) {
  const int n = s.dim();
  const double scale = std::max(1.0, alpha.cwiseAbs().maxCoeff());
  auto objective = [&](const Vec& v) { return 0.5 * s.F2(x, v) - alpha.dot(v); };
  auto residualAt = [&](const Vec& v, Mat* gOut) {
    JetMat<double> g;
    JetVec<double> grad{};
    metricJet<double>(s, x.data(), v.data(), g, &grad);
    if (gOut) *gOut = primalMat(g, n);
    return Vec(primalVec(grad, n) - alpha);
  };
  // seed with the sharp of alpha against g at the direction alpha itself
  Vec v = metricAt(s, x, alpha).ldlt().solve(alpha);
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 60; ++it) {
    Mat g;
    const Vec r = residualAt(v, &g);
    const double rn = r.cwiseAbs().maxCoeff();
    best = std::min(best, rn);
    if (rn < 1e-14 * scale) break;
    const Vec dv = g.ldlt().solve(r);
    const double f0 = objective(v);
    double t = 1.0;
    Vec next = v - dv;
    for (int ls = 0; ls < 30 && objective(next) > f0 + 1e-15 * std::abs(f0); ++ls) {
      t *= 0.5;
      next = v - t * dv;
    }
    v = next;
  }
  const double res = residualAt(v, nullptr).cwiseAbs().maxCoeff();
  if (residualOut) *residualOut = res;
  if (!(res < kLegendreTol * scale))
    throw FinslerError(ErrorCode::kNoConvergence, "Legendre transform did not converge", res);
  return v;
}

// Jet lift of the transform: the double solution is refined by Newton steps in
// jet arithmetic, each of which doubles the number of correct derivative orders.
template <typename T>
JetVec<T> legendreJet(const FinslerSpace& s, const JetVec<T>& x, const JetVec<T>& alpha) {
  const int n = s.dim();
  const Vec v0 = legendreSolve(s, primalVec(x, n), primalVec(alpha, n));
  JetVec<T> v = toJet<T>(v0);
  if constexpr (!std::is_same_v<T, double>) {
    constexpr int depth = dual_depth<T>::value;
    const int steps = depth <= 1 ? 1 : (depth <= 3 ? 2 : 3);
    for (int it = 0; it < steps; ++it) {
      JetMat<T> g;
      JetVec<T> grad{};
      metricJet<T>(s, x.data(), v.data(), g, &grad);
      JetVec<T> r{};
      for (int i = 0; i < n; ++i) r[i] = grad[i] - alpha[i];
      if (!solveSpd(n, g, r)) throw FinslerError(ErrorCode::kSingularMetric, "singular metric in Legendre refinement");
      for (int i = 0; i < n; ++i) v[i] -= r[i];
    }
  }
  return v;
}

template <typename T>
JetVec<T> differentialJet(const ScalarField& u, int n, const JetVec<T>& x) {
  using E = Dual<T>;
  JetVec<T> du{};
  for (int k = 0; k < n; ++k) {
    JetVec<E> xs{};
    for (int i = 0; i < n; ++i) xs[i] = E(x[i], T(i == k ? 1.0 : 0.0));
    du[k] = u.eval<E>(xs).du;
  }
  return du;
}

template <typename T>
bool allZero(const JetVec<T>& a, int n) {
  for (int i = 0; i < n; ++i)
    if (primal(a[i]) != 0.0) return false;
  return true;
}

// grad u as a jet-valued map; throws ZeroGradient where Du vanishes.
template <typename T>
JetVec<T> gradientJet(const FinslerSpace& s, const ScalarField& u, const JetVec<T>& x) {
  const int n = s.dim();
  const JetVec<T> du = differentialJet<T>(u, n, x);
  if (allZero(du, n)) throw FinslerError(ErrorCode::kZeroGradient, "Du vanishes");
  return legendreJet<T>(s, x, du);
}

// div_m V = sum_i dV^i/dx^i + V^i dPhi/dx^i for a jet-capable map V.
template <typename T, typename Field>
T divergenceJet(const FinslerSpace& s, const Field& V, const JetVec<T>& x) {
  using E = Dual<T>;
  const int n = s.dim();
  T sum(0.0);
  for (int k = 0; k < n; ++k) {
    JetVec<E> xs{};
    for (int i = 0; i < n; ++i) xs[i] = E(x[i], T(i == k ? 1.0 : 0.0));
    const JetVec<E> Vk = V(xs);
    const E phi = s.logWeight<E>(xs.data());
    sum += Vk[k].du + Vk[k].re * phi.du;
  }
  return sum;
}

template <typename T>
T laplacianJet(const FinslerSpace& s, const ScalarField& u, const JetVec<T>& x) {
  auto grad = [&](const auto& xs) { return gradientJet(s, u, xs); };
  return divergenceJet<T>(s, grad, x);
}

}  // namespace detail

inline TangentVector legendre(const FinslerSpace& s, const Covector& alpha) {
  s.requireInDomain(alpha.base);
  if (alpha.comp.cwiseAbs().maxCoeff() == 0.0) throw FinslerError(ErrorCode::kZeroCovector, "covector vanishes");
  return {alpha.base, detail::legendreSolve(s, alpha.base, alpha.comp)};
}

// g_v(v, .), the inverse of the Legendre transform.
inline Covector dualCovector(const FinslerSpace& s, const TangentVector& v) {
  s.requireInDomain(v.base);
  if (v.comp.cwiseAbs().maxCoeff() == 0.0) return {v.base, Vec::Zero(s.dim())};
  return {v.base, metricAt(s, v.base, v.comp) * v.comp};
}

// F*(alpha) = F(legendre(alpha)).
inline double dualNorm(const FinslerSpace& s, const Covector& alpha) {
  if (alpha.comp.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  const TangentVector v = legendre(s, alpha);
  return s.F(v.base, v.comp);
}

inline Vec differential(const ScalarField& u, const Vec& x) {
  const int n = static_cast<int>(x.size());
  return primalVec(detail::differentialJet<double>(u, n, toJet<double>(x)), n);
}

inline TangentVector gradient(const FinslerSpace& s, const ScalarField& u, const Vec& x) {
  s.requireInDomain(x);
  const Vec du = differential(u, x);
  if (du.cwiseAbs().maxCoeff() == 0.0) return {x, Vec::Zero(s.dim())};
  return {x, detail::legendreSolve(s, x, du)};
}

// grad u as a VectorField; jet level is limited by u (two below its own).
inline VectorField gradientField(const FinslerSpace& s, const ScalarField& u) {
  return VectorField::fromGeneric<2>(s.dim(), [s, u](const auto& x) { return detail::gradientJet(s, u, x); });
}

struct HessianValue {
  TangentVector grad;
  Mat map;  // H^i_j, so that H v = D^{grad u}_v grad u
  double hsNormSquared = 0.0;
};

inline HessianValue hessian(const FinslerSpace& s, const ScalarField& u, const Vec& x) {
  s.requireInDomain(x);
  const int n = s.dim();
  JetVec<D1> xs{};
  HessianValue h;
  h.map = Mat::Zero(n, n);
  Vec w(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) xs[i] = D1(x[i], i == j ? 1.0 : 0.0);
    const JetVec<D1> W = detail::gradientJet<D1>(s, u, xs);
    for (int i = 0; i < n; ++i) {
      h.map(i, j) = W[i].du;
      w[i] = W[i].re;
    }
  }
  h.grad = {x, w};
  const ConnectionData c = connectionAt(s, h.grad);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) h.map(i, j) += c.chern(i, j, k) * w[k];
  // ||H||^2 = H^i_j H^k_l g_ik g^jl
  const Mat HS = c.g * h.map * c.gInv * h.map.transpose();
  h.hsNormSquared = HS.trace();
  return h;
}

inline double divergence(const FinslerSpace& s, const VectorField& V, const Vec& x) {
  s.requireInDomain(x);
  return detail::divergenceJet<double>(s, [&V](const auto& xs) { return V.eval(xs); }, toJet<double>(x));
}

inline double laplacian(const FinslerSpace& s, const ScalarField& u, const Vec& x) {
  s.requireInDomain(x);
  return detail::laplacianJet<double>(s, u, toJet<double>(x));
}

// Delta^V u = div_m(g_V^{-1} Du), the Laplacian of the weighted Riemannian
// metric g_V.
inline double linearizedLaplacian(const FinslerSpace& s, const VectorField& ref, const ScalarField& u, const Vec& x) {
  s.requireInDomain(x);
  const int n = s.dim();
  auto field = [&](const auto& xs) {
    using T = std::decay_t<decltype(xs[0])>;
    const JetVec<T> r = ref.eval(xs);
    if (detail::allZero(r, n)) throw FinslerError(ErrorCode::kZeroReference, "reference field vanishes");
    JetMat<T> g;
    metricJet<T>(s, xs.data(), r.data(), g);
    JetVec<T> du = detail::differentialJet<T>(u, n, xs);
    if (!solveSpd(n, g, du)) throw FinslerError(ErrorCode::kSingularMetric, "singular metric along reference field");
    return du;
  };
  return detail::divergenceJet<double>(s, field, toJet<double>(x));
}

struct WeakFormResult {
  double lhs = 0.0;  // int phi Delta u dm
  double rhs = 0.0;  // -int Dphi(grad u) dm
  double difference = 0.0;
  double excisedMeasure = 0.0;
  std::size_t nodes = 0;
};

struct QuadratureSpec {
  int cells = 64;   // per axis over the support of phi
  int points = 3;   // Gauss-Legendre points per cell and axis
  std::function<bool(const Vec&)> excise;  // nodes where this is true are skipped
};

namespace detail {

inline void gaussLegendre(int m, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(m, 0.0);
  weights.assign(m, 0.0);
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= m; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = m * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    nodes[i] = z;
    weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

// Composite tensor-product Gauss rule on a box; calls f(x, weight).
template <typename Fn>
void boxQuadrature(const Box& box, int cells, int points, Fn&& f) {
  const int n = static_cast<int>(box.lower.size());
  std::vector<double> gx, gw;
  gaussLegendre(points, gx, gw);
  std::vector<std::vector<double>> ax(n), aw(n);
  for (int d = 0; d < n; ++d) {
    const double h = (box.upper[d] - box.lower[d]) / cells;
    for (int c = 0; c < cells; ++c)
      for (int p = 0; p < points; ++p) {
        ax[d].push_back(box.lower[d] + h * (c + 0.5 * (gx[p] + 1.0)));
        aw[d].push_back(0.5 * h * gw[p]);
      }
  }
  const std::size_t m = ax[0].size();
  std::vector<std::size_t> idx(n, 0);
  Vec x(n);
  while (true) {
    double w = 1.0;
    for (int d = 0; d < n; ++d) {
      x[d] = ax[d][idx[d]];
      w *= aw[d][idx[d]];
    }
    f(x, w);
    int d = n - 1;
    while (d >= 0 && ++idx[d] == m) idx[d--] = 0;
    if (d < 0) break;
  }
}

}  // namespace detail

inline WeakFormResult weakFormCheck(const FinslerSpace& s, const ScalarField& u, const TestFunction& phi,
                                    const QuadratureSpec& q = {}) {
  const Box support = phi.support();
  std::vector<double> left, right;
  WeakFormResult r;
  detail::boxQuadrature(support, q.cells, q.points, [&](const Vec& x, double w) {
    const double p = phi.value(x);
    const Vec dp = phi.gradient(x);
    if (p == 0.0 && dp.cwiseAbs().maxCoeff() == 0.0) return;
    const double dm = w * std::exp(s.Phi(x));
    if (q.excise && q.excise(x)) {
      r.excisedMeasure += dm;
      return;
    }
    ++r.nodes;
    const TangentVector g = gradient(s, u, x);
    left.push_back(p == 0.0 ? 0.0 : p * laplacian(s, u, x) * dm);
    right.push_back(-dp.dot(g.comp) * dm);
  });
  r.lhs = pairwiseSum(left);
  r.rhs = pairwiseSum(right);
  r.difference = std::abs(r.lhs - r.rhs);
  return r;
}

// Pointwise terms of the Bochner-Weitzenbock formula at x, where Du(x) != 0.
struct BochnerTerms {
  TangentVector grad;
  double linearizedEnergy = 0.0;  // Delta^{grad u}(F(grad u)^2 / 2)
  double laplacianDerivative = 0.0;  // D(Delta u)(grad u)
  double laplacian = 0.0;
  double ricciInfinity = 0.0;  // Ric_inf(grad u)
  double hsNormSquared = 0.0;
  double lhs() const { return linearizedEnergy - laplacianDerivative; }
  double residual() const { return lhs() - ricciInfinity - hsNormSquared; }
  // lhs - (Ric_N + (Delta u)^2 / N); nonnegative when the inequality holds.
  double inequalityMargin(double ricN, double N) const {
    const double tail = std::isinf(N) ? 0.0 : laplacian * laplacian / N;
    return lhs() - (ricN + tail);
  }
};

inline BochnerTerms bochnerTerms(const FinslerSpace& s, const ScalarField& u, const Vec& x) {
  s.requireInDomain(x);
  const int n = s.dim();
  BochnerTerms b;
  const HessianValue H = hessian(s, u, x);
  b.grad = H.grad;
  b.hsNormSquared = H.hsNormSquared;

  // f = F(grad u)^2 / 2 = Du(grad u) / 2 as a jet map.
  auto energy = [&](const auto& xs) {
    using T = std::decay_t<decltype(xs[0])>;
    const JetVec<T> du = detail::differentialJet<T>(u, n, xs);
    const JetVec<T> w = detail::legendreJet<T>(s, xs, du);
    T e(0.0);
    for (int i = 0; i < n; ++i) e += du[i] * w[i];
    return T(0.5 * e);
  };
  // g_{grad u}^{-1} Df, the g_{grad u}-gradient of f, as a jet map.
  auto flux = [&](const auto& xs) {
    using T = std::decay_t<decltype(xs[0])>;
    using E = Dual<T>;
    const JetVec<T> w = detail::gradientJet<T>(s, u, xs);
    JetMat<T> g;
    metricJet<T>(s, xs.data(), w.data(), g);
    JetVec<T> df{};
    for (int k = 0; k < n; ++k) {
      JetVec<E> xe{};
      for (int i = 0; i < n; ++i) xe[i] = E(xs[i], T(i == k ? 1.0 : 0.0));
      df[k] = energy(xe).du;
    }
    if (!solveSpd(n, g, df)) throw FinslerError(ErrorCode::kSingularMetric, "singular metric along gradient");
    return df;
  };
  b.linearizedEnergy = detail::divergenceJet<double>(s, flux, toJet<double>(x));

  JetVec<D1> xs{};
  for (int i = 0; i < n; ++i) xs[i] = D1(x[i], b.grad.comp[i]);
  const D1 lap = detail::laplacianJet<D1>(s, u, xs);
  b.laplacian = lap.re;
  b.laplacianDerivative = lap.du;
  b.ricciInfinity = weightedRicci(s, b.grad, EffectiveDim::inf()).value;
  return b;
}

}  // namespace finsler
