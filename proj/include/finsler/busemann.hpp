#pragma once

// Busemann functions of rays, tabulated lazily on a grid and interpolated
// with tensor-product cubic Lagrange stencils, plus the checks of their
// analytic properties.

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>

#include "finsler/calculus.hpp"
#include "finsler/geodesics.hpp"
#include "finsler/report.hpp"
#include "finsler/sampling.hpp"

namespace finsler {

struct GridSpec {
  Box box;
  int cells = 32;  // per axis; nodes sit at lower + i h, i = 0..cells

  double spacing(int d) const { return (box.upper[d] - box.lower[d]) / cells; }
};

// Default truncation horizon: 0.4 times the exit time of the ray from the domain.
inline double defaultHorizon(const FinslerSpace& s, const Ray& ray, double cap = 1e4) {
  return 0.4 * exitTime(s, ray.origin, ray.direction, cap);
}

class BusemannField {
 public:
  struct Node {
    double value = 0.0;
    Vec velocity;
    Mat jacobian;
    double residual = 0.0;
    bool ok = false;
  };

  BusemannField() = default;

  // b_T(x) = T - d(x, eta(T)); with extrapolate the field is 2 b_{2T} - b_T,
  // which cancels the 1/T part of the truncation error.
  static BusemannField build(const FinslerSpace& s, const Ray& ray, double horizon, const GridSpec& grid,
                             bool extrapolate = true, const DistanceOptions& opts = {}) {
    if (grid.cells < 3) throw FinslerError(ErrorCode::kInvalidArgument, "Busemann grid needs at least 3 cells");
    if (!(horizon > 0.0)) throw FinslerError(ErrorCode::kInvalidArgument, "horizon must be positive");
    for (int d = 0; d < s.dim(); ++d)
      if (!(grid.box.upper[d] > grid.box.lower[d]))
        throw FinslerError(ErrorCode::kInvalidArgument, "empty Busemann grid box");
    BusemannField b;
    b.impl_ = std::make_shared<Impl>();
    b.impl_->space = s;
    b.impl_->ray = ray;
    b.impl_->grid = grid;
    b.impl_->extrapolate = extrapolate;
    b.impl_->opts = opts;
    const int levels = extrapolate ? 2 : 1;
    for (int l = 0; l < levels; ++l) {
      Level& L = b.impl_->levels[l];
      L.T = horizon * (l == 0 ? 1.0 : 2.0);
      L.target = rayPoint(s, ray, L.T, opts.step);
      if (!s.inDomain(L.target)) throw FinslerError(ErrorCode::kDomainError, "ray leaves the domain before the horizon");
    }
    return b;
  }

  template <typename T>
  T evalLevel(int level, const JetVec<T>& x) const {
    const Impl& I = *impl_;
    const int n = I.space.dim();
    std::array<int, kMaxDim> base{};
    std::array<std::array<T, 4>, kMaxDim> w;
    for (int d = 0; d < n; ++d) {
      const double h = I.grid.spacing(d);
      const double u = (primal(x[d]) - I.grid.box.lower[d]) / h;
      if (!(u >= -1e-9 && u <= I.grid.cells + 1e-9))
        throw FinslerError(ErrorCode::kDomainError, "point outside the Busemann grid");
      const int i0 = std::clamp(static_cast<int>(std::floor(u)) - 1, 0, I.grid.cells - 3);
      base[d] = i0;
      const T s = (x[d] - (I.grid.box.lower[d] + i0 * h)) / h;
      const T s1 = s - 1.0, s2 = s - 2.0, s3 = s - 3.0;
      w[d][0] = -(1.0 / 6.0) * (s1 * s2 * s3);
      w[d][1] = 0.5 * (s * s2 * s3);
      w[d][2] = -0.5 * (s * s1 * s3);
      w[d][3] = (1.0 / 6.0) * (s * s1 * s2);
    }
    T sum(0.0);
    std::array<int, kMaxDim> k{};
    const int total = 1 << (2 * n);
    for (int flat = 0; flat < total; ++flat) {
      std::array<int, kMaxDim> idx{};
      int f = flat;
      T wt(1.0);
      for (int d = 0; d < n; ++d) {
        k[d] = f & 3;
        f >>= 2;
        idx[d] = base[d] + k[d];
        wt = wt * w[d][k[d]];
      }
      sum += wt * node(level, idx).value;
    }
    return sum;
  }

  template <typename T>
  T eval(const JetVec<T>& x) const {
    if (!impl_->extrapolate) return evalLevel<T>(0, x);
    return 2.0 * evalLevel<T>(1, x) - evalLevel<T>(0, x);
  }

  double operator()(const Vec& x) const { return eval<double>(toJet<double>(x)); }
  double atHorizon(int level, const Vec& x) const { return evalLevel<double>(level, toJet<double>(x)); }

  // |b_{2T} - b_T|, the truncation-error estimate.
  double truncationEstimate(const Vec& x) const {
    if (!impl_->extrapolate) return std::numeric_limits<double>::quiet_NaN();
    return std::abs(atHorizon(1, x) - atHorizon(0, x));
  }

  ScalarField field() const {
    BusemannField self = *this;
    return ScalarField::fromGeneric<4>([self](const auto& x) { return self.eval(x); });
  }

  ScalarField levelField(int level) const {
    BusemannField self = *this;
    return ScalarField::fromGeneric<4>([self, level](const auto& x) { return self.evalLevel(level, x); });
  }

  const FinslerSpace& space() const { return impl_->space; }
  const Ray& ray() const { return impl_->ray; }
  const GridSpec& grid() const { return impl_->grid; }
  double horizon() const { return impl_->levels[0].T; }
  bool extrapolated() const { return impl_->extrapolate; }

  std::size_t solvedNodes() const {
    std::lock_guard<std::mutex> lock(impl_->mutex);
    return impl_->levels[0].nodes.size() + impl_->levels[1].nodes.size();
  }

  std::size_t failedNodes() const {
    std::lock_guard<std::mutex> lock(impl_->mutex);
    std::size_t c = 0;
    for (const auto& L : impl_->levels)
      for (const auto& [k, v] : L.nodes)
        if (!v.ok) ++c;
    return c;
  }

  // Tabulated nodes in key order: level, coordinates, b_T, gradient of b_T
  // from the first variation, shooting residual.
  void writeCsv(std::ostream& os) const {
    std::lock_guard<std::mutex> lock(impl_->mutex);
    const Impl& I = *impl_;
    const int n = I.space.dim();
    os << "level,horizon";
    for (int d = 0; d < n; ++d) os << ",x" << d + 1;
    os << ",b";
    for (int d = 0; d < n; ++d) os << ",db" << d + 1;
    os << ",residual,ok\n";
    char buf[64];
    auto put = [&](double v) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      os << buf;
    };
    for (int l = 0; l < 2; ++l)
      for (const auto& [key, nd] : I.levels[l].nodes) {
        os << l;
        put(I.levels[l].T);
        const Vec x = nodePoint(key);
        for (int d = 0; d < n; ++d) put(x[d]);
        put(nd.value);
        const Vec g = nd.ok ? firstVariation(x, nd.velocity) : Vec::Constant(n, std::nan(""));
        for (int d = 0; d < n; ++d) put(g[d]);
        put(nd.residual);
        os << "," << (nd.ok ? 1 : 0) << "\n";
      }
  }

 private:
  using Key = std::array<int, kMaxDim>;
  struct Level {
    double T = 0.0;
    Vec target;
    std::map<Key, Node> nodes;
  };
  struct Impl {
    FinslerSpace space;
    Ray ray;
    GridSpec grid;
    bool extrapolate = true;
    DistanceOptions opts;
    std::array<Level, 2> levels;
    std::mutex mutex;
  };

  Vec nodePoint(const Key& k) const {
    const Impl& I = *impl_;
    Vec x(I.space.dim());
    for (int d = 0; d < I.space.dim(); ++d) x[d] = I.grid.box.lower[d] + k[d] * I.grid.spacing(d);
    return x;
  }

  // D b_T at x = dF/dv (x, v) for the minimizing initial velocity v.
  Vec firstVariation(const Vec& x, const Vec& v) const {
    const FinslerSpace& s = impl_->space;
    const int n = s.dim();
    Vec g(n);
    JetVec<D1> xs{}, vs{};
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) {
        xs[i] = D1(x[i]);
        vs[i] = D1(v[i], i == k ? 1.0 : 0.0);
      }
      g[k] = s.norm<D1>(xs.data(), vs.data()).du;
    }
    return g;
  }

  const Node& node(int level, const Key& key) const {
    std::lock_guard<std::mutex> lock(impl_->mutex);
    Impl& I = *impl_;
    Level& L = I.levels[level];
    auto it = L.nodes.find(key);
    if (it == L.nodes.end()) it = L.nodes.emplace(key, solveNode(L, key)).first;
    if (!it->second.ok)
      throw FinslerError(ErrorCode::kNoConvergence, "Busemann grid node failed to converge", it->second.residual);
    return it->second;
  }

  Node solveNode(const Level& L, const Key& key) const {
    const Impl& I = *impl_;
    const int n = I.space.dim();
    const Vec x = nodePoint(key);
    Node out;
    if (!I.space.inDomain(x)) {
      out.residual = std::numeric_limits<double>::infinity();
      return out;
    }
    // warm start from a tabulated neighbour: shift its velocity by the offset
    const Node* nb = nullptr;
    Vec xnb;
    for (int step = 1; step <= 2 && !nb; ++step)
      for (int d = 0; d < n && !nb; ++d)
        for (int sgn : {-1, 1}) {
          Key k2 = key;
          k2[d] += sgn * step;
          auto it = L.nodes.find(k2);
          if (it != L.nodes.end() && it->second.ok) {
            nb = &it->second;
            xnb = nodePoint(k2);
            break;
          }
        }
    auto record = [&](const DistanceResult& r) {
      out.value = L.T - r.distance;
      out.velocity = r.initialVelocity;
      out.jacobian = r.jacobian;
      out.residual = r.residual;
      out.ok = true;
    };
    if (nb) {
      DistanceOptions o = I.opts;
      o.multistart = 0;
      o.chordSeed = false;
      o.warmStart = Vec(nb->velocity - (x - xnb));
      if (nb->jacobian.size() > 0) o.warmJacobian = nb->jacobian;
      try {
        record(distance(I.space, x, L.target, o));
        return out;
      } catch (const FinslerError& e) {
        if (e.code() != ErrorCode::kNoConvergence) throw;
      }
    }
    try {
      record(distance(I.space, x, L.target, I.opts));
    } catch (const FinslerError& e) {
      if (e.code() != ErrorCode::kNoConvergence) throw;
      out.residual = e.detail();
    }
    return out;
  }

  std::shared_ptr<Impl> impl_;
};

inline BusemannField buildBusemann(const FinslerSpace& s, const Ray& ray, double horizon, const GridSpec& grid,
                                   bool extrapolate = true, const DistanceOptions& opts = {}) {
  return BusemannField::build(s, ray, horizon, grid, extrapolate, opts);
}

// Ray for the reverse structure through the same line traversed backwards.
inline Ray reverseRay(const FinslerSpace& s, const Ray& ray, double tMax) {
  return makeRay(s.reversedSpace(), ray.origin, -ray.direction, tMax);
}

// The geodesic leaving x with initial vector grad b(x).
inline Ray asymptoticRay(const FinslerSpace& s, const BusemannField& b, const Vec& x, double tMax) {
  const TangentVector g = gradient(s, b.field(), x);
  const double f = s.F(x, g.comp);
  if (!(std::abs(f - 1.0) <= 2e-3))
    throw FinslerError(ErrorCode::kGradientDegenerate, "Busemann gradient is not unit length", std::abs(f - 1.0));
  return makeRay(s, x, g.comp, tMax);
}

// ---- checks

inline nlohmann::json gridSpecJson(const BusemannField& b) {
  nlohmann::json j;
  j["cells"] = b.grid().cells;
  j["horizon"] = b.horizon();
  j["extrapolated"] = b.extrapolated();
  std::vector<double> lo(b.grid().box.lower.data(), b.grid().box.lower.data() + b.grid().box.lower.size());
  std::vector<double> hi(b.grid().box.upper.data(), b.grid().box.upper.data() + b.grid().box.upper.size());
  j["box"] = {lo, hi};
  return j;
}

inline VerificationReport checkClosedForm(const FinslerSpace& s, const BusemannField& b, const ScalarField& oracle,
                                          const std::vector<Vec>& points, double budget) {
  VerificationReport r;
  r.invariant = "busemann-closed-form";
  r.space = s.name();
  r.sampleSpec = {{"points", points.size()}, {"grid", gridSpecJson(b)}};
  double worst = 0.0, trunc = 0.0;
  for (const Vec& x : points) {
    worst = std::max(worst, std::abs(b(x) - oracle(x)));
    if (b.extrapolated()) trunc = std::max(trunc, b.truncationEstimate(x));
  }
  r.maxResidual = worst;
  r.budget = budget;
  r.details["truncationEstimate"] = trunc;
  return r.finalize();
}

inline VerificationReport checkUnitGradient(const FinslerSpace& s, const BusemannField& b,
                                            const std::vector<Vec>& points, double budget) {
  VerificationReport r;
  r.invariant = "busemann-unit-gradient";
  r.space = s.name();
  r.sampleSpec = {{"points", points.size()}, {"grid", gridSpecJson(b)}};
  const ScalarField u = b.field();
  for (const Vec& x : points) {
    const TangentVector g = gradient(s, u, x);
    r.maxResidual = std::max(r.maxResidual, std::abs(s.F(x, g.comp) - 1.0));
  }
  r.budget = budget;
  return r.finalize();
}

// b_{2T} >= b_T - tol and b(y) - b(x) <= d(x, y) + tol.
inline VerificationReport checkMonotoneLipschitz(const FinslerSpace& s, const BusemannField& b,
                                                 const std::vector<Vec>& points, double budget,
                                                 const DistanceOptions& opts = {}) {
  VerificationReport r;
  r.invariant = "busemann-monotone-lipschitz";
  r.space = s.name();
  r.sampleSpec = {{"points", points.size()}, {"pairs", points.size() / 2}, {"grid", gridSpecJson(b)}};
  double mono = 0.0, lip = 0.0;
  if (b.extrapolated())
    for (const Vec& x : points) mono = std::max(mono, b.atHorizon(0, x) - b.atHorizon(1, x));
  for (std::size_t i = 0; i + 1 < points.size(); i += 2) {
    const Vec& x = points[i];
    const Vec& y = points[i + 1];
    lip = std::max(lip, b(y) - b(x) - distance(s, x, y, opts).distance);
    lip = std::max(lip, b(x) - b(y) - distance(s, y, x, opts).distance);
  }
  r.maxResidual = std::max(mono, lip);
  r.budget = budget;
  r.details = {{"monotonicityViolation", mono}, {"lipschitzViolation", lip}};
  return r.finalize();
}

// -int Dphi(grad b) dm for one test function.
inline double weakLaplacianPairing(const FinslerSpace& s, const ScalarField& u, const TestFunction& phi,
                                   const QuadratureSpec& q) {
  std::vector<double> parts;
  detail::boxQuadrature(phi.support(), q.cells, q.points, [&](const Vec& x, double w) {
    const Vec dp = phi.gradient(x);
    if (dp.cwiseAbs().maxCoeff() == 0.0) return;
    parts.push_back(-dp.dot(gradient(s, u, x).comp) * w * std::exp(s.Phi(x)));
  });
  return pairwiseSum(parts);
}

// Delta b >= 0 in the weak sense: -int Dphi(grad b) dm >= -budget for bumps phi >= 0.
inline VerificationReport checkSubharmonic(const FinslerSpace& s, const BusemannField& b,
                                           const std::vector<TestFunction>& tests, const QuadratureSpec& q,
                                           double budget, std::vector<Precondition> pre) {
  VerificationReport r;
  r.invariant = "busemann-subharmonic";
  r.space = s.name();
  r.preconditions = std::move(pre);
  r.sampleSpec = {{"testFunctions", tests.size()}, {"quadratureCells", q.cells}, {"grid", gridSpecJson(b)}};
  r.budget = budget;
  if (!r.preconditionsHold()) return r.finalize();
  const ScalarField u = b.field();
  nlohmann::json vals = nlohmann::json::array();
  double worst = 0.0;
  for (const auto& phi : tests) {
    const double v = weakLaplacianPairing(s, u, phi, q);
    vals.push_back(v);
    worst = std::max(worst, -v);
  }
  r.maxResidual = worst;
  r.details["pairings"] = vals;
  return r.finalize();
}

// b + b_rev = 0 and both are harmonic, for a line and its reverse.
inline VerificationReport checkHarmonicPair(const FinslerSpace& s, const BusemannField& forward,
                                            const BusemannField& backward, const std::vector<Vec>& points,
                                            const std::vector<TestFunction>& tests, const QuadratureSpec& q,
                                            double budget, std::vector<Precondition> pre) {
  VerificationReport r;
  r.invariant = "busemann-harmonic-pair";
  r.space = s.name();
  r.preconditions = std::move(pre);
  r.budget = budget;
  r.sampleSpec = {{"points", points.size()}, {"testFunctions", tests.size()}, {"quadratureCells", q.cells},
                  {"grid", gridSpecJson(forward)}};
  if (!r.preconditionsHold()) return r.finalize();
  const FinslerSpace rs = s.reversedSpace();
  double sum = 0.0, d1 = 0.0, d2 = 0.0;
  for (const Vec& x : points) sum = std::max(sum, std::abs(forward(x) + backward(x)));
  const ScalarField uf = forward.field(), ub = backward.field();
  for (const auto& phi : tests) {
    d1 = std::max(d1, std::abs(weakLaplacianPairing(s, uf, phi, q)));
    d2 = std::max(d2, std::abs(weakLaplacianPairing(rs, ub, phi, q)));
  }
  r.maxResidual = std::max({sum, d1, d2});
  r.details = {{"sum", sum}, {"defectForward", d1}, {"defectReverse", d2}};
  return r.finalize();
}

inline VerificationReport checkParallelHessian(const FinslerSpace& s, const BusemannField& b,
                                               const std::vector<Vec>& points, double budget,
                                               std::vector<Precondition> pre) {
  VerificationReport r;
  r.invariant = "busemann-parallel-hessian";
  r.space = s.name();
  r.preconditions = std::move(pre);
  r.budget = budget;
  r.sampleSpec = {{"points", points.size()}, {"grid", gridSpecJson(b)}};
  if (!r.preconditionsHold()) return r.finalize();
  const ScalarField u = b.field();
  for (const Vec& x : points) r.maxResidual = std::max(r.maxResidual, std::sqrt(std::max(0.0, hessian(s, u, x).hsNormSquared)));
  return r.finalize();
}

// b(sigma(t)) = b(sigma(0)) + t along the asymptotic ray, measured per unit t.
inline VerificationReport checkAsymptoticRay(const FinslerSpace& s, const BusemannField& b,
                                             const std::vector<Vec>& points, double length, double budget,
                                             int stations = 4) {
  VerificationReport r;
  r.invariant = "busemann-asymptotic-ray";
  r.space = s.name();
  r.budget = budget;
  r.sampleSpec = {{"points", points.size()}, {"length", length}, {"grid", gridSpecJson(b)}};
  for (const Vec& x : points) {
    const Ray ray = asymptoticRay(s, b, x, length);
    const double b0 = b(x);
    for (int k = 1; k <= stations; ++k) {
      const double t = length * k / stations;
      const Vec y = rayPoint(s, ray, t);
      r.maxResidual = std::max(r.maxResidual, std::abs(b(y) - b0 - t) / std::max(1.0, t));
    }
  }
  return r.finalize();
}

// Minimality of a geodesic on [a, b]: d(eta(t_i), eta(t_j)) = t_j - t_i on
// sampled parameter pairs. With twoSided the window is [-window, window].
inline VerificationReport verifyMinimizing(const FinslerSpace& s, const Vec& origin, const Vec& unitDir, double window,
                                           bool twoSided, int stations, double budget,
                                           const DistanceOptions& opts = {}) {
  VerificationReport r;
  r.invariant = twoSided ? "straight-line-window" : "ray-window";
  r.space = s.name();
  r.budget = budget;
  r.sampleSpec = {{"window", window}, {"stations", stations}};
  std::vector<std::pair<double, Vec>> pts;
  const double lo = twoSided ? -window : 0.0;
  for (int k = 0; k <= stations; ++k) {
    const double t = lo + (window - lo) * k / stations;
    Vec p = origin;
    if (t > 0.0) p = geodesicFlow(s, origin, t * unitDir, 1.0, opts.step).x;
    if (t < 0.0) p = geodesicFlow(s.reversedSpace(), origin, -t * (-unitDir), 1.0, opts.step).x;
    pts.push_back({t, p});
  }
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double d = distance(s, pts[i].second, pts[j].second, opts).distance;
      r.maxResidual = std::max(r.maxResidual, std::abs(d - (pts[j].first - pts[i].first)));
    }
  return r.finalize();
}

// ---- grid refinement study

struct RefinementStudy {
  int coarseCells = 0;
  int fineCells = 0;
  std::array<double, 2> valueError{};     // RMS, coarse then fine
  std::array<double, 2> gradientError{};
  std::array<double, 2> hessianError{};
  double valueOrder = 0.0;
  double gradientOrder = 0.0;
  double hessianOrder = 0.0;
};

namespace detail {

// Grid-free b_T, D b_T and D^2 b_T at x. With v(x) the minimizing initial
// velocity, D b_T = F_v(x, v) and D^2 b_T = F_vx + F_vv v_x where
// v_x = -(d exp/dv)^{-1} (d exp/dx), the latter by fourth-order differences.
struct TruncatedJet {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

inline TruncatedJet truncatedJet(const FinslerSpace& s, const Vec& x, const Vec& target, double T,
                                 const DistanceOptions& opts) {
  const int n = s.dim();
  const DistanceResult dr = distance(s, x, target, opts);
  const Vec v = dr.initialVelocity;
  TruncatedJet out;
  out.value = T - dr.distance;
  out.grad = Vec(n);
  Mat Fvv(n, n), Fvx(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      JetVec<D2> xs{}, vs{};
      for (int a = 0; a < n; ++a) {
        const double dv[2] = {a == i ? 1.0 : 0.0, a == j ? 1.0 : 0.0};
        xs[a] = D2(x[a]);
        vs[a] = seeded<D2>(v[a], dv);
      }
      const D2 f = s.norm<D2>(xs.data(), vs.data());
      Fvv(i, j) = mixedPartial(f);
      if (j == 0) out.grad[i] = f.re.du;
      for (int a = 0; a < n; ++a) {
        const double dv[2] = {a == i ? 1.0 : 0.0, 0.0};
        const double dx[2] = {0.0, a == j ? 1.0 : 0.0};
        xs[a] = seeded<D2>(x[a], dx);
        vs[a] = seeded<D2>(v[a], dv);
      }
      Fvx(i, j) = mixedPartial(s.norm<D2>(xs.data(), vs.data()));
    }
  const double h = 1e-3;
  auto diff = [&](auto&& endpoint) {
    Mat D(n, n);
    for (int j = 0; j < n; ++j) {
      const Vec p2 = endpoint(j, 2 * h), p1 = endpoint(j, h), m1 = endpoint(j, -h), m2 = endpoint(j, -2 * h);
      D.col(j) = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
    }
    return D;
  };
  const double hv = h * std::max(1.0, v.cwiseAbs().maxCoeff());
  const Mat Px = diff([&](int j, double e) {
    Vec xe = x;
    xe[j] += e;
    return geodesicFlow(s, xe, v, 1.0, opts.step).x;
  });
  Mat Pv = diff([&](int j, double e) {
    Vec ve = v;
    ve[j] += e * hv / h;
    return geodesicFlow(s, x, ve, 1.0, opts.step).x;
  });
  Pv *= h / hv;
  const Mat vx = -Pv.partialPivLu().solve(Px);
  out.hess = Fvx + Fvv * vx;
  return out;
}

}  // namespace detail

inline RefinementStudy refinementStudy(const FinslerSpace& s, const Ray& ray, double horizon, const GridSpec& coarse,
                                       const std::vector<Vec>& points, const DistanceOptions& opts = {}) {
  RefinementStudy st;
  st.coarseCells = coarse.cells;
  st.fineCells = 2 * coarse.cells;
  const Vec target = rayPoint(s, ray, horizon, opts.step);
  std::vector<detail::TruncatedJet> ref;
  for (const Vec& x : points) ref.push_back(detail::truncatedJet(s, x, target, horizon, opts));
  const int n = s.dim();
  for (int level = 0; level < 2; ++level) {
    GridSpec g = coarse;
    g.cells = level == 0 ? coarse.cells : 2 * coarse.cells;
    const BusemannField b = buildBusemann(s, ray, horizon, g, false, opts);
    double ev = 0.0, eg = 0.0, eh = 0.0;
    for (std::size_t p = 0; p < points.size(); ++p) {
      const Vec& x = points[p];
      Mat H(n, n);
      Vec G(n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          JetVec<D2> xs{};
          for (int a = 0; a < n; ++a) {
            const double dirs[2] = {a == i ? 1.0 : 0.0, a == j ? 1.0 : 0.0};
            xs[a] = seeded<D2>(x[a], dirs);
          }
          const D2 val = b.evalLevel<D2>(0, xs);
          H(i, j) = mixedPartial(val);
          if (j == 0) G[i] = val.re.du;
          if (i == 0 && j == 0) ev += std::pow(val.re.re - ref[p].value, 2);
        }
      eg += (G - ref[p].grad).squaredNorm();
      eh += (H - ref[p].hess).squaredNorm();
    }
    const double m = static_cast<double>(points.size());
    st.valueError[level] = std::sqrt(ev / m);
    st.gradientError[level] = std::sqrt(eg / m);
    st.hessianError[level] = std::sqrt(eh / m);
  }
  auto order = [](const std::array<double, 2>& e) { return std::log2(e[0] / e[1]); };
  st.valueOrder = order(st.valueError);
  st.gradientOrder = order(st.gradientError);
  st.hessianOrder = order(st.hessianError);
  return st;
}

// Observed orders are rounded to one decimal before comparison.
inline VerificationReport checkRefinementOrder(const FinslerSpace& s, const RefinementStudy& st, double minOrder) {
  VerificationReport r;
  r.invariant = "busemann-grid-order";
  r.space = s.name();
  r.sampleSpec = {{"coarseCells", st.coarseCells}, {"fineCells", st.fineCells}};
  auto rounded = [](double p) { return std::round(10.0 * p) / 10.0; };
  const double worst = std::min({rounded(st.valueOrder), rounded(st.gradientOrder), rounded(st.hessianOrder)});
  // residual is the shortfall below the required order
  r.maxResidual = std::max(0.0, minOrder - worst);
  r.budget = 1e-12;
  r.details = {{"valueError", st.valueError},       {"gradientError", st.gradientError},
               {"hessianError", st.hessianError},   {"valueOrder", st.valueOrder},
               {"gradientOrder", st.gradientOrder}, {"hessianOrder", st.hessianOrder}};
  return r.finalize();
}

}  // namespace finsler
