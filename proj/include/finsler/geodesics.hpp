#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <vector>

#include "finsler/connection.hpp"
#include "finsler/sampling.hpp"

namespace finsler {

struct GeodesicPath {
  std::vector<double> times;
  std::vector<Vec> points;
  std::vector<Vec> velocities;
  double speed = 0.0;       // F of the initial velocity
  double speedDrift = 0.0;  // max |F(velocity) - speed| / speed
  double residual = 0.0;    // max |eta'' + G(eta')| at step midpoints

  const Vec& endPoint() const { return points.back(); }
  const Vec& endVelocity() const { return velocities.back(); }

  void writeCsv(std::ostream& os) const {
    const int n = points.empty() ? 0 : static_cast<int>(points[0].size());
    os << "t";
    for (int i = 0; i < n; ++i) os << ",x" << i + 1;
    for (int i = 0; i < n; ++i) os << ",v" << i + 1;
    os << "\n";
    char buf[64];
    for (std::size_t k = 0; k < times.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", times[k]);
      os << buf;
      for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, ",%.17g", points[k][i]);
        os << buf;
      }
      for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, ",%.17g", velocities[k][i]);
        os << buf;
      }
      os << "\n";
    }
  }
};

namespace detail {

inline int stepCount(double tEnd, double step) {
  return std::max(1, static_cast<int>(std::ceil(std::abs(tEnd) / step - 1e-9)));
}

inline void rk4Step(const FinslerSpace& s, Vec& x, Vec& v, double h) {
  const Vec G1 = sprayAt(s, x, v);
  const Vec v2 = v - 0.5 * h * G1;
  const Vec G2 = sprayAt(s, x + 0.5 * h * v, v2);
  const Vec v3 = v - 0.5 * h * G2;
  const Vec G3 = sprayAt(s, x + 0.5 * h * v2, v3);
  const Vec v4 = v - h * G3;
  const Vec G4 = sprayAt(s, x + h * v3, v4);
  x += (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4);
  v -= (h / 6.0) * (G1 + 2.0 * G2 + 2.0 * G3 + G4);
}

}  // namespace detail

struct PhasePoint {
  Vec x;
  Vec v;
};

// Geodesic flow without recording the path. Throws LeftDomain with the exit
// time in detail().
inline PhasePoint geodesicFlow(const FinslerSpace& s, const Vec& x0, const Vec& v0, double tEnd, double step = 1e-3) {
  if (s.xIndependent()) {
    const Vec x1 = x0 + tEnd * v0;
    if (!s.inDomain(x1)) {
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (s.inDomain(x0 + mid * tEnd * v0) ? lo : hi) = mid;
      }
      throw FinslerError(ErrorCode::kLeftDomain, "geodesic left the domain", lo * tEnd);
    }
    return {x1, v0};
  }
  const int steps = detail::stepCount(tEnd, step);
  const double h = tEnd / steps;
  Vec x = x0, v = v0;
  for (int k = 0; k < steps; ++k) {
    detail::rk4Step(s, x, v, h);
    if (!s.inDomain(x)) throw FinslerError(ErrorCode::kLeftDomain, "geodesic left the domain", (k + 1) * h);
    if (!std::isfinite(x.sum()) || !std::isfinite(v.sum()))
      throw FinslerError(ErrorCode::kIntegratorFailure, "non-finite state");
  }
  return {x, v};
}

inline GeodesicPath integrateGeodesic(const FinslerSpace& s, const TangentVector& v0, double tEnd, double step = 1e-3) {
  s.requireInDomain(v0.base);
  GeodesicPath p;
  const int steps = detail::stepCount(tEnd, step);
  const double h = tEnd / steps;
  Vec x = v0.base, v = v0.comp;
  p.speed = s.F(x, v);
  p.times.push_back(0.0);
  p.points.push_back(x);
  p.velocities.push_back(v);
  for (int k = 0; k < steps; ++k) {
    const Vec xPrev = x, vPrev = v;
    detail::rk4Step(s, x, v, h);
    if (!std::isfinite(x.sum()) || !std::isfinite(v.sum()))
      throw FinslerError(ErrorCode::kIntegratorFailure, "non-finite state");
    if (!s.inDomain(x)) throw FinslerError(ErrorCode::kLeftDomain, "geodesic left the domain", (k + 1) * h);
    // midpoint residual from cubic Hermite data of the step
    const Vec xm = 0.5 * (xPrev + x) + (h / 8.0) * (vPrev - v);
    const Vec vm = 1.5 * (x - xPrev) / h - 0.25 * (vPrev + v);
    const Vec acc = (v - vPrev) / h;
    p.residual = std::max(p.residual, (acc + sprayAt(s, xm, vm)).cwiseAbs().maxCoeff());
    if (p.speed > 0.0) p.speedDrift = std::max(p.speedDrift, std::abs(s.F(x, v) - p.speed) / p.speed);
    p.times.push_back((k + 1) * h);
    p.points.push_back(x);
    p.velocities.push_back(v);
  }
  return p;
}

inline Vec exponentialMap(const FinslerSpace& s, const TangentVector& v, double step = 1e-3) {
  s.requireInDomain(v.base);
  if (v.comp.cwiseAbs().maxCoeff() == 0.0) return v.base;
  return geodesicFlow(s, v.base, v.comp, 1.0, step).x;
}

// ---- distance by Newton shooting

struct DistanceOptions {
  int multistart = 16;
  bool chordSeed = true;
  int maxIterations = 40;
  double tolerance = 1e-11;  // on |exp_x(v) - y|, scaled by max(1, |y|)
  double jacobianStep = 1e-6;
  double step = 1e-3;
  std::optional<Vec> warmStart;
  std::optional<Mat> warmJacobian;  // endpoint-map Jacobian to try first with warmStart
};

struct DistanceResult {
  double distance = 0.0;
  Vec initialVelocity;
  Vec endVelocity;
  double residual = 0.0;
  int seedIndex = -1;
  int convergedSeeds = 0;
  Mat jacobian;  // last endpoint-map Jacobian of the winning seed, if one was formed
};

namespace detail {

struct ShootOutcome {
  bool converged = false;
  bool duplicate = false;
  Vec v;
  Vec endVelocity;
  Mat jacobian;
  double residual = std::numeric_limits<double>::infinity();
};

inline std::vector<Vec> rayDirections(int n, int count) {
  std::vector<Vec> out;
  if (n == 2) {
    for (int k = 0; k < count; ++k) {
      const double a = 2.0 * std::numbers::pi * k / count;
      Vec u(2);
      u << std::cos(a), std::sin(a);
      out.push_back(u);
    }
    return out;
  }
  if (n == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      const double z = 1.0 - (2.0 * k + 1.0) / count;
      const double r = std::sqrt(1.0 - z * z);
      Vec u(3);
      u << r * std::cos(golden * k), r * std::sin(golden * k), z;
      out.push_back(u);
    }
    return out;
  }
  Sampler rng(99);
  for (int k = 0; k < count; ++k) {
    Vec u = rng.cube(n);
    out.push_back(u / u.norm());
  }
  return out;
}

inline ShootOutcome shoot(const FinslerSpace& s, const Vec& x, const Vec& y, Vec v, const DistanceOptions& o,
                          const std::vector<Vec>& found, const Mat* J0 = nullptr) {
  const int n = s.dim();
  const double tolAbs = o.tolerance * std::max(1.0, y.cwiseAbs().maxCoeff());
  ShootOutcome out;
  auto endpoint = [&](const Vec& w, PhasePoint& pp) -> bool {
    try {
      pp = geodesicFlow(s, x, w, 1.0, o.step);
      return true;
    } catch (const FinslerError& e) {
      if (e.code() == ErrorCode::kLeftDomain || e.code() == ErrorCode::kIntegratorFailure ||
          e.code() == ErrorCode::kSingularMetric)
        return false;
      throw;
    }
  };
  PhasePoint pp;
  if (!endpoint(v, pp)) return out;
  Vec r = pp.x - y;
  double rn = r.norm();
  Mat J;
  bool haveJ = false;
  if (J0) {
    J = *J0;
    haveJ = true;
  }
  for (int it = 0; it < o.maxIterations; ++it) {
    if (rn <= tolAbs) {
      out.converged = true;
      out.v = v;
      out.endVelocity = pp.v;
      out.residual = rn;
      out.jacobian = J;
      return out;
    }
    for (const Vec& f : found)
      if ((v - f).norm() < 1e-4 * (1.0 + f.norm())) {
        out.duplicate = true;
        return out;
      }
    if (!haveJ) {
      J.resize(n, n);
      const double h = o.jacobianStep * std::max(1.0, v.cwiseAbs().maxCoeff());
      for (int j = 0; j < n; ++j) {
        Vec vp = v, vm = v;
        vp[j] += h;
        vm[j] -= h;
        PhasePoint a, b;
        if (!endpoint(vp, a) || !endpoint(vm, b)) return out;
        J.col(j) = (a.x - b.x) / (2.0 * h);
      }
      haveJ = true;
    }
    Eigen::PartialPivLU<Mat> lu(J);
    if (!(std::abs(lu.determinant()) > 1e-300)) return out;
    const Vec delta = -lu.solve(r);
    double lam = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 8; ++ls, lam *= 0.5) {
      const Vec vt = v + lam * delta;
      PhasePoint pt;
      if (!endpoint(vt, pt)) continue;
      const Vec rt = pt.x - y;
      const double rtn = rt.norm();
      if (rtn < rn || rtn <= tolAbs) {
        // keep the Jacobian only while convergence is fast
        haveJ = lam == 1.0 && rtn < 0.1 * rn;
        v = vt;
        pp = pt;
        r = rt;
        rn = rtn;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!haveJ) break;
      haveJ = false;  // retry once with a fresh Jacobian
    }
  }
  out.residual = rn;
  return out;
}

inline bool lexLess(const Vec& a, const Vec& b) {
  const Vec ua = a / a.norm(), ub = b / b.norm();
  for (int i = 0; i < ua.size(); ++i) {
    if (ua[i] < ub[i]) return true;
    if (ua[i] > ub[i]) return false;
  }
  return false;
}

}  // namespace detail

inline DistanceResult distance(const FinslerSpace& s, const Vec& x, const Vec& y, const DistanceOptions& o = {}) {
  s.requireInDomain(x);
  s.requireInDomain(y);
  const int n = s.dim();
  DistanceResult best;
  if ((x - y).cwiseAbs().maxCoeff() == 0.0) {
    best.initialVelocity = Vec::Zero(n);
    best.endVelocity = Vec::Zero(n);
    best.seedIndex = 0;
    best.convergedSeeds = 1;
    return best;
  }
  std::vector<Vec> seeds;
  if (o.warmStart) seeds.push_back(*o.warmStart);
  const Vec chord = y - x;
  if (o.chordSeed) seeds.push_back(chord);
  for (const Vec& u : detail::rayDirections(n, o.multistart)) seeds.push_back(chord.norm() * u);

  std::vector<Vec> found;
  double bestResidual = std::numeric_limits<double>::infinity();
  bool have = false;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const Mat* J0 = (o.warmStart && o.warmJacobian && k == 0) ? &*o.warmJacobian : nullptr;
    const detail::ShootOutcome r = detail::shoot(s, x, y, seeds[k], o, found, J0);
    if (!r.converged) {
      if (!r.duplicate) bestResidual = std::min(bestResidual, r.residual);
      continue;
    }
    found.push_back(r.v);
    ++best.convergedSeeds;
    const double d = s.F(x, r.v);
    const bool better = !have || d < best.distance - 1e-8 ||
                        (std::abs(d - best.distance) <= 1e-8 && detail::lexLess(r.v, best.initialVelocity));
    if (better) {
      best.distance = d;
      best.initialVelocity = r.v;
      best.endVelocity = r.endVelocity;
      best.residual = r.residual;
      best.jacobian = r.jacobian;
      best.seedIndex = static_cast<int>(k);
      have = true;
    }
  }
  if (!have)
    throw FinslerError(ErrorCode::kNoConvergence, "no shooting seed converged", bestResidual);
  return best;
}

// ---- cut heuristic

struct CutResult {
  double time = 0.0;
  bool conjugatePoint = false;  // stopped at a sign change of det d(exp)/dv
  bool shorterPath = false;     // stopped where a shorter connection appeared
  bool leftDomain = false;
};

inline CutResult cutHeuristic(const FinslerSpace& s, const TangentVector& v, double tMax, const DistanceOptions& o = {}) {
  s.requireInDomain(v.base);
  requireNonzero(v);
  const int n = s.dim();
  const Vec u = v.comp / s.F(v.base, v.comp);
  CutResult res;
  res.time = tMax;

  // Jacobi matrix d eta(t) / d v0 by central differences of the flow.
  const double eps = 1e-6;
  const double h = o.step;
  std::vector<Vec> xs(2 * n + 1), vs(2 * n + 1);
  xs[0] = v.base;
  vs[0] = u;
  for (int j = 0; j < n; ++j) {
    xs[1 + 2 * j] = xs[2 + 2 * j] = v.base;
    vs[1 + 2 * j] = u;
    vs[2 + 2 * j] = u;
    vs[1 + 2 * j][j] += eps;
    vs[2 + 2 * j][j] -= eps;
  }
  double t = 0.0;
  double prevDet = 0.0;
  const int steps = detail::stepCount(tMax, h);
  const double dt = tMax / steps;
  for (int k = 0; k < steps; ++k) {
    bool out = false;
    for (int m = 0; m < 2 * n + 1; ++m) {
      detail::rk4Step(s, xs[m], vs[m], dt);
      if (!s.inDomain(xs[m])) out = true;
    }
    t = (k + 1) * dt;
    if (out) {
      res.time = k * dt;
      res.leftDomain = true;
      break;
    }
    Mat J(n, n);
    for (int j = 0; j < n; ++j) J.col(j) = (xs[1 + 2 * j] - xs[2 + 2 * j]) / (2.0 * eps);
    const double det = J.determinant();
    if (k > 10 && prevDet > 0.0 && det <= 0.0) {
      const double tc = t - dt * det / (det - prevDet);
      res.time = tc - 1e-4;
      res.conjugatePoint = true;
      break;
    }
    prevDet = det;
  }

  // minimality scan on the window that survived
  auto minimal = [&](double tt) {
    const Vec y = geodesicFlow(s, v.base, tt * u, 1.0, o.step).x;
    const double d = distance(s, v.base, y, o).distance;
    return d >= tt - 1e-4 * std::max(1.0, tt);
  };
  const double window = res.time;
  double lo = 0.0;
  for (int k = 1; k <= 8; ++k) {
    const double tt = window * k / 8.0;
    if (minimal(tt)) {
      lo = tt;
      continue;
    }
    double hi = tt;
    while (hi - lo > 1e-4) {
      const double mid = 0.5 * (lo + hi);
      (minimal(mid) ? lo : hi) = mid;
    }
    res.time = lo;
    res.shorterPath = true;
    res.conjugatePoint = false;
    break;
  }
  return res;
}

// ---- rays

struct Ray {
  Vec origin;
  Vec direction;  // unit initial velocity
  double tMax = 0.0;
  GeodesicPath path;
};

inline Vec rayPoint(const FinslerSpace& s, const Ray& r, double t, double step = 1e-3) {
  if (t == 0.0) return r.origin;
  return geodesicFlow(s, r.origin, t * r.direction, 1.0, step).x;
}

// Exit time of the unit-speed geodesic from the domain, capped at cap.
inline double exitTime(const FinslerSpace& s, const Vec& x, const Vec& unitDir, double cap) {
  try {
    geodesicFlow(s, x, cap * unitDir, 1.0, 1e-3);
    return cap;
  } catch (const FinslerError& e) {
    if (e.code() != ErrorCode::kLeftDomain) throw;
    return e.detail() * cap;
  }
}

inline Ray makeRay(const FinslerSpace& s, const Vec& origin, const Vec& direction, double tMax) {
  s.requireInDomain(origin);
  const double f = s.F(origin, direction);
  if (!(f > 0.0)) throw FinslerError(ErrorCode::kDegenerateVector, "ray direction vanishes");
  Ray r;
  r.origin = origin;
  r.direction = direction / f;
  r.tMax = tMax;
  r.path = integrateGeodesic(s, {origin, r.direction}, tMax, tMax / 2000.0);
  return r;
}

}  // namespace finsler
