#pragma once

// Gradient flow of a Busemann function and the checks of the splitting
// structure it induces on Berwald spaces.

#include <vector>

#include "finsler/busemann.hpp"
#include "finsler/calculus.hpp"
#include "finsler/connection.hpp"
#include "finsler/curvature.hpp"
#include "finsler/report.hpp"

namespace finsler {

// phi_t generated by grad b, integrated with classical RK4.
class FlowMap {
 public:
  FlowMap(const FinslerSpace& s, ScalarField b, double step = 1e-3) : space_(s), b_(std::move(b)), step_(step) {}

  Vec generator(const Vec& x) const { return gradient(space_, b_, x).comp; }

  Vec operator()(const Vec& x0, double t) const {
    if (t == 0.0) return x0;
    const int steps = detail::stepCount(std::abs(t), step_);
    const double h = t / steps;
    Vec x = x0;
    for (int k = 0; k < steps; ++k) {
      const Vec k1 = generator(x);
      const Vec k2 = generator(x + 0.5 * h * k1);
      const Vec k3 = generator(x + 0.5 * h * k2);
      const Vec k4 = generator(x + h * k3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
  }

  // D phi_t at x by central differences of neighbouring trajectories.
  Mat jacobian(const Vec& x, double t, double h = 1e-5) const {
    const int n = space_.dim();
    Mat J(n, n);
    for (int j = 0; j < n; ++j) {
      Vec xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      J.col(j) = ((*this)(xp, t) - (*this)(xm, t)) / (2.0 * h);
    }
    return J;
  }

  const FinslerSpace& space() const { return space_; }
  const ScalarField& busemann() const { return b_; }
  double step() const { return step_; }

 private:
  FinslerSpace space_;
  ScalarField b_;
  double step_;
};

namespace detail {

// Integration step near 1e-3 that divides the station spacing exactly.
inline double stationStep(double dt) { return dt / stepCount(dt, 1e-3); }

}  // namespace detail

inline Precondition berwaldPrecondition(const FinslerSpace& s) {
  return {"berwald", isBerwald(s).berwald};
}

// phi_{s+t} = phi_t o phi_s.
inline VerificationReport flowGroupCheck(const FinslerSpace& s, const FlowMap& flow, const std::vector<Vec>& seeds,
                                         double a, double b, double budget) {
  VerificationReport r;
  r.invariant = "flow-group-property";
  r.space = s.name();
  r.budget = budget;
  r.sampleSpec = {{"seeds", seeds.size()}, {"s", a}, {"t", b}, {"step", flow.step()}};
  for (const Vec& x : seeds) r.maxResidual = std::max(r.maxResidual, (flow(x, a + b) - flow(flow(x, a), b)).norm());
  return r.finalize();
}

// b(phi_t(x)) = b(x) + t.
inline VerificationReport flowLevelSetCheck(const FinslerSpace& s, const FlowMap& flow, const std::vector<Vec>& seeds,
                                            double t, double budget) {
  VerificationReport r;
  r.invariant = "flow-level-sets";
  r.space = s.name();
  r.budget = budget;
  r.sampleSpec = {{"seeds", seeds.size()}, {"t", t}};
  const ScalarField& b = flow.busemann();
  for (const Vec& x : seeds) r.maxResidual = std::max(r.maxResidual, std::abs(b(flow(x, t)) - b(x) - t));
  return r.finalize();
}

// Flow lines are geodesics: |c'' + G(c')| with c' = grad b and c'' = D(grad b) grad b.
inline VerificationReport flowGeodesicCheck(const FinslerSpace& s, const FlowMap& flow, const std::vector<Vec>& seeds,
                                            double t, int stations, double budget) {
  VerificationReport r;
  r.invariant = "flow-lines-geodesic";
  r.space = s.name();
  r.budget = budget;
  r.sampleSpec = {{"seeds", seeds.size()}, {"t", t}, {"stations", stations}};
  const int n = s.dim();
  const ScalarField& b = flow.busemann();
  for (const Vec& x0 : seeds)
    for (int k = 0; k <= stations; ++k) {
      const Vec x = flow(x0, t * k / stations);
      const Vec w = flow.generator(x);
      JetVec<D1> xs{};
      for (int i = 0; i < n; ++i) xs[i] = D1(x[i], w[i]);
      const JetVec<D1> W = detail::gradientJet<D1>(s, b, xs);
      Vec acc(n);
      for (int i = 0; i < n; ++i) acc[i] = W[i].du;
      r.maxResidual = std::max(r.maxResidual, (acc + sprayAt(s, x, w)).norm());
    }
  return r.finalize();
}

// F(D phi_t v) = F(v) and det(D phi_t) e^{Phi(phi_t x)} = e^{Phi(x)}.
inline VerificationReport flowIsometryCheck(const FinslerSpace& s, const FlowMap& flow, double t,
                                            const std::vector<TangentVector>& samples, double budget,
                                            std::vector<Precondition> pre) {
  VerificationReport r;
  r.invariant = "flow-isometry";
  r.space = s.name();
  r.budget = budget;
  r.preconditions = std::move(pre);
  r.sampleSpec = {{"samples", samples.size()}, {"t", t}, {"displacement", 1e-5}, {"step", flow.step()}};
  if (!r.preconditionsHold()) return r.finalize();
  double iso = 0.0, meas = 0.0;
  for (const TangentVector& v : samples) {
    const Vec y = flow(v.base, t);
    const Mat J = flow.jacobian(v.base, t);
    const double f0 = s.F(v.base, v.comp);
    iso = std::max(iso, std::abs(s.F(y, J * v.comp) - f0) / f0);
    meas = std::max(meas, std::abs(J.determinant() * std::exp(s.Phi(y) - s.Phi(v.base)) - 1.0));
  }
  r.maxResidual = std::max(iso, meas);
  r.details = {{"isometry", iso}, {"measure", meas}};
  return r.finalize();
}

// (b o xi)'' = 0 along geodesics, by second differences on a uniform grid.
inline VerificationReport levelSetConvexityCheck(const FinslerSpace& s, const ScalarField& b,
                                                 const std::vector<TangentVector>& geodesics, double length,
                                                 int stations, double budget, std::vector<Precondition> pre) {
  VerificationReport r;
  r.invariant = "level-set-convexity";
  r.space = s.name();
  r.budget = budget;
  r.preconditions = std::move(pre);
  r.sampleSpec = {{"geodesics", geodesics.size()}, {"length", length}, {"stations", stations}};
  if (!r.preconditionsHold()) return r.finalize();
  const double dt = length / stations;
  for (const TangentVector& v : geodesics) {
    const TangentVector u{v.base, v.comp / s.F(v.base, v.comp)};
    const GeodesicPath p = integrateGeodesic(s, u, length, detail::stationStep(dt));
    std::vector<double> vals;
    const std::size_t every = (p.points.size() - 1) / stations;
    for (std::size_t k = 0; k < p.points.size(); k += every) vals.push_back(b(p.points[k]));
    for (std::size_t k = 1; k + 1 < vals.size(); ++k)
      r.maxResidual = std::max(r.maxResidual, std::abs(vals[k + 1] - 2.0 * vals[k] + vals[k - 1]) / (dt * dt));
  }
  return r.finalize();
}

// Product chart description: M has coordinates (factor, line) and the factor
// carries its own Finsler structure.
struct ProductChart {
  std::vector<int> factorCoordinates;
  int lineCoordinate = -1;
  FinslerSpace factor;
  bool sphereFactor = false;  // factor is the round sphere in (colatitude, longitude)
  Mat frame;                  // x = frame * y for chart coordinates y; empty means identity
};

namespace detail {

inline Vec project(const ProductChart& c, const Vec& x) {
  Vec y(static_cast<int>(c.factorCoordinates.size()));
  for (std::size_t i = 0; i < c.factorCoordinates.size(); ++i) y[i] = x[c.factorCoordinates[i]];
  return y;
}

inline Vec toChart(const ProductChart& c, const Vec& x) {
  return c.frame.size() == 0 ? x : Vec(c.frame.partialPivLu().solve(x));
}

inline Vec fromChart(const ProductChart& c, const Vec& y) { return c.frame.size() == 0 ? y : Vec(c.frame * y); }

inline Vec sphereEmbedding(const Vec& p) {
  Vec e(3);
  e << std::sin(p[0]) * std::cos(p[1]), std::sin(p[0]) * std::sin(p[1]), std::cos(p[0]);
  return e;
}

}  // namespace detail

// Forward: geodesics of M project to factor geodesics and b is affine along
// them. Converse: factor geodesics lifted with constant line speed are
// geodesics of M.
inline VerificationReport geodesicSplittingCheck(const FinslerSpace& s, const ScalarField& b, const ProductChart& chart,
                                                 const std::vector<TangentVector>& samples, double length,
                                                 int stations, double budget, std::vector<Precondition> pre) {
  VerificationReport r;
  r.invariant = "geodesic-splitting";
  r.space = s.name();
  r.budget = budget;
  r.preconditions = std::move(pre);
  r.sampleSpec = {{"samples", samples.size()}, {"length", length}, {"stations", stations}};
  if (!r.preconditionsHold()) return r.finalize();
  const int n = s.dim();
  double factorRes = 0.0, affine = 0.0, circle = 0.0, lift = 0.0;
  const double dt = length / stations;
  for (const TangentVector& v : samples) {
    const TangentVector u{v.base, v.comp / s.F(v.base, v.comp)};
    const GeodesicPath p = integrateGeodesic(s, u, length, detail::stationStep(dt));
    const std::size_t every = (p.points.size() - 1) / stations;
    std::vector<double> bv;
    std::vector<Vec> emb;
    for (std::size_t k = 0; k < p.points.size(); k += every) {
      const Vec& x = p.points[k];
      const Vec& w = p.velocities[k];
      const Vec px = detail::project(chart, detail::toChart(chart, x));
      const Vec pw = detail::project(chart, detail::toChart(chart, w));
      const Vec pg = detail::project(chart, detail::toChart(chart, sprayAt(s, x, w)));
      if (pw.norm() > 1e-9) factorRes = std::max(factorRes, (pg - sprayAt(chart.factor, px, pw)).norm());
      bv.push_back(b(x));
      if (chart.sphereFactor) emb.push_back(detail::sphereEmbedding(px));
    }
    for (std::size_t k = 1; k + 1 < bv.size(); ++k)
      affine = std::max(affine, std::abs(bv[k + 1] - 2.0 * bv[k] + bv[k - 1]) / (dt * dt));
    if (chart.sphereFactor && emb.size() >= 3) {
      // great circle: every point lies on the plane through 0 spanned by the first two
      Vec nrm = Eigen::Vector3d(emb[0]).cross(Eigen::Vector3d(emb.back()));
      if (nrm.norm() > 1e-6) {
        nrm /= nrm.norm();
        for (const Vec& e : emb) circle = std::max(circle, std::abs(nrm.dot(e)));
      }
    }
    // converse: lift the factor geodesic through the projected start
    const Vec yb = detail::toChart(chart, u.base), yc = detail::toChart(chart, u.comp);
    const Vec px = detail::project(chart, yb), pw = detail::project(chart, yc);
    if (pw.norm() > 1e-9 && chart.lineCoordinate >= 0) {
      const double lineSpeed = yc[chart.lineCoordinate];
      const GeodesicPath fp = integrateGeodesic(chart.factor, {px, pw}, length, detail::stationStep(dt));
      for (std::size_t k = 0; k < fp.points.size(); k += every) {
        Vec x(n), w(n), acc = Vec::Zero(n);
        const Vec facc = -sprayAt(chart.factor, fp.points[k], fp.velocities[k]);
        for (std::size_t i = 0; i < chart.factorCoordinates.size(); ++i) {
          x[chart.factorCoordinates[i]] = fp.points[k][i];
          w[chart.factorCoordinates[i]] = fp.velocities[k][i];
          acc[chart.factorCoordinates[i]] = facc[i];
        }
        x[chart.lineCoordinate] = yb[chart.lineCoordinate] + lineSpeed * fp.times[k];
        w[chart.lineCoordinate] = lineSpeed;
        acc[chart.lineCoordinate] = 0.0;
        lift = std::max(lift, (detail::fromChart(chart, acc) +
                               sprayAt(s, detail::fromChart(chart, x), detail::fromChart(chart, w))).norm());
      }
    }
  }
  r.maxResidual = std::max({factorRes, affine, circle, lift});
  r.details = {{"factorGeodesic", factorRes}, {"busemannAffine", affine}, {"liftedGeodesic", lift}};
  if (chart.sphereFactor) r.details["greatCircle"] = circle;
  return r.finalize();
}

// Flag curvature of 2-flags spanned by line directions; needs at least two lines.
inline VerificationReport leafFlatnessCheck(const FinslerSpace& s, const std::vector<Vec>& lineDirections,
                                            const std::vector<Vec>& points, int flagsPerPoint, double budget,
                                            std::uint64_t seed = 11) {
  if (lineDirections.size() < 2)
    return VerificationReport::notApplicable("leaf-flatness", s.name(), "fewer than two line directions");
  VerificationReport r;
  r.invariant = "leaf-flatness";
  r.space = s.name();
  r.budget = budget;
  r.sampleSpec = {{"points", points.size()}, {"flagsPerPoint", flagsPerPoint}, {"lines", lineDirections.size()},
                  {"seed", seed}};
  Sampler rng(seed);
  for (const Vec& x : points)
    for (int f = 0; f < flagsPerPoint; ++f) {
      Vec v = Vec::Zero(s.dim()), w = Vec::Zero(s.dim());
      for (const Vec& d : lineDirections) {
        v += rng.uniform(-1.0, 1.0) * d;
        w += rng.uniform(-1.0, 1.0) * d;
      }
      try {
        r.maxResidual = std::max(r.maxResidual, std::abs(flagCurvature(s, {x, v}, w).value));
      } catch (const FinslerError& e) {
        if (e.code() != ErrorCode::kDegenerateFlag && e.code() != ErrorCode::kDegenerateVector) throw;
      }
    }
  return r.finalize();
}

// Parallel transport along a path is a linear isometry on Berwald spaces.
inline VerificationReport transportFrameIsometryCheck(const FinslerSpace& s, const Curve& path,
                                                      const std::vector<Vec>& frame, double budget,
                                                      std::vector<Precondition> pre, int steps = 1000) {
  VerificationReport r;
  r.invariant = "transport-isometry";
  r.space = s.name();
  r.budget = budget;
  r.preconditions = std::move(pre);
  r.sampleSpec = {{"frame", frame.size()}, {"steps", steps}};
  if (!r.preconditionsHold()) return r.finalize();
  const Vec x0 = path(0.0).x, x1 = path(1.0).x;
  for (const Vec& e : frame) {
    const Vec t = parallelTransport(s, path, e, steps);
    const double f0 = s.F(x0, e);
    r.maxResidual = std::max(r.maxResidual, std::abs(s.F(x1, t) - f0) / f0);
  }
  return r.finalize();
}

}  // namespace finsler
