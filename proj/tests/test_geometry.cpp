// Jets, spaces, tensors, connection, geodesics and curvature.

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "finsler/finsler.hpp"

using namespace finsler;

namespace {

const ModelEntry& model(const std::string& name) {
  static std::map<std::string, ModelEntry> cache;
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, loadModel(name)).first;
  return it->second;
}

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

template <typename Fn>
void expectThrowsCode(Fn fn, ErrorCode code) {
  try {
    fn();
    ADD_FAILURE() << "expected " << errorName(code);
  } catch (const FinslerError& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

// ---- dual numbers and expressions

TEST(Dual, FirstDerivativeOfProduct) {
  const D1 x(0.7, 1.0);
  const D1 f = sin(x) * exp(x);
  EXPECT_NEAR(f.re, std::sin(0.7) * std::exp(0.7), 1e-15);
  EXPECT_NEAR(f.du, (std::cos(0.7) + std::sin(0.7)) * std::exp(0.7), 1e-14);
}

TEST(Dual, MixedSecondPartial) {
  // f = x^2 y, seeded x along the outer level and y along the inner one
  const D2 x(D1(1.3, 0.0), D1(1.0, 0.0));
  const D2 y(D1(0.4, 1.0), D1(0.0, 0.0));
  const D2 f = x * x * y;
  EXPECT_NEAR(f.du.du, 2.0 * 1.3, 1e-14);
  EXPECT_NEAR(f.re.du, 1.3 * 1.3, 1e-14);
  EXPECT_NEAR(f.du.re, 2.0 * 1.3 * 0.4, 1e-14);
}

TEST(Expression, EvaluatesCoordinatesAndConstants) {
  const Expression e = Expression::parse("x1^2 + sin(x2) - pi", 2, false);
  const Vec x = vec({1.5, 0.3});
  EXPECT_NEAR(e.eval<double>(x.data(), nullptr), 2.25 + std::sin(0.3) - std::numbers::pi, 1e-15);
  EXPECT_TRUE(e.usesX());
  EXPECT_FALSE(e.usesV());
}

TEST(Expression, RejectsMalformedInput) {
  expectThrowsCode([] { Expression::parse("x1 + * 2", 2, false); }, ErrorCode::kParseError);
  expectThrowsCode([] { Expression::parse("v1", 2, false); }, ErrorCode::kParseError);
  expectThrowsCode([] { Expression::parse("x3", 2, false); }, ErrorCode::kParseError);
}

// ---- spaces

TEST(Space, GalleryModelsLoadAndValidate) {
  for (const auto& name : modelNames()) {
    const ModelEntry& m = model(name);
    EXPECT_EQ(m.space.name(), name);
    EXPECT_TRUE(m.has("certificates")) << name;
  }
}

TEST(Space, UnknownModelRejected) {
  expectThrowsCode([] { loadModel("TORUS9"); }, ErrorCode::kUnknownModel);
}

TEST(Space, MalformedDefinitionRejected) {
  const auto bad = nlohmann::json::parse(R"({"name": "bad", "dim": 1, "family": "riemannian",
      "params": {"metric": [["1"]]}, "domain": {"lower": [-1], "upper": [1]}})");
  expectThrowsCode([&] { FinslerSpace::fromJson(bad); }, ErrorCode::kValidationFailure);
}

TEST(Space, NonConvexNormFailsValidation) {
  const auto j = nlohmann::json::parse(R"({"name": "wedge", "dim": 2, "family": "randers",
      "params": {"metric": [["1", "0"], ["0", "1"]], "oneForm": ["1.2", "0"]},
      "domain": {"lower": [-1, -1], "upper": [1, 1]}})");
  const FinslerSpace s = FinslerSpace::fromJson(j);
  expectThrowsCode([&] { validateSpace(s); }, ErrorCode::kValidationFailure);
}

TEST(Space, PositiveHomogeneityProperty) {
  for (const auto& name : modelNames()) {
    const FinslerSpace& s = model(name).space;
    Sampler rng(3);
    for (int k = 0; k < 50; ++k) {
      const Vec x = rng.pointIn(s.sampleBox());
      const Vec v = rng.vectorAt(s, x);
      const double lam = rng.uniform(0.1, 5.0);
      EXPECT_NEAR(s.F(x, lam * v), lam * s.F(x, v), 1e-12 * lam * s.F(x, v)) << name;
    }
  }
}

TEST(Space, ReverseStructureFlipsVectors) {
  const FinslerSpace& s = model("NBRANDERS2").space;
  const FinslerSpace r = s.reversedSpace();
  Sampler rng(5);
  for (int k = 0; k < 20; ++k) {
    const Vec x = rng.pointIn(s.sampleBox());
    const Vec v = rng.vectorAt(s, x);
    EXPECT_NEAR(r.F(x, v), s.F(x, -v), 1e-14);
  }
}

TEST(Space, OutsideDomainIsAnError) {
  const FinslerSpace& s = model("SPHERE2").space;
  expectThrowsCode([&] { fundamentalTensor(s, {vec({0.01, 0.0}), vec({1.0, 0.0})}); }, ErrorCode::kDomainError);
}

// ---- tensors

TEST(Tensors, RandersFundamentalTensor) {
  const Mat g = metricAt(model("RANDERS2").space, vec({0.0, 0.0}), vec({1.0, 0.0}));
  EXPECT_NEAR(g(0, 0), 2.25, 1e-14);
  EXPECT_NEAR(g(1, 1), 1.5, 1e-14);
  EXPECT_NEAR(g(0, 1), 0.0, 1e-14);
}

TEST(Tensors, FundamentalTensorIsZeroHomogeneous) {
  const FinslerSpace& s = model("FLATLEAF3").space;
  Sampler rng(9);
  for (int k = 0; k < 20; ++k) {
    const Vec x = rng.pointIn(s.sampleBox());
    const Vec v = rng.vectorAt(s, x);
    EXPECT_LT((metricAt(s, x, 3.7 * v) - metricAt(s, x, v)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Tensors, CartanIsTotallySymmetric) {
  const FinslerSpace& s = model("FLATLEAF3").space;
  Sampler rng(11);
  for (int k = 0; k < 10; ++k) {
    const Vec x = rng.pointIn(s.sampleBox());
    const Tensor3 A = cartanTensor(s, {x, rng.vectorAt(s, x)}).A;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int l = 0; l < 3; ++l) {
          EXPECT_NEAR(A(i, j, l), A(j, i, l), 1e-12);
          EXPECT_NEAR(A(i, j, l), A(i, l, j), 1e-12);
        }
  }
}

TEST(Tensors, ZeroVectorRejected) {
  expectThrowsCode([] { fundamentalTensor(model("E2").space, {vec({0.0, 0.0}), vec({0.0, 0.0})}); },
                   ErrorCode::kDegenerateVector);
}

// ---- connection

TEST(Connection, SphereChristoffelSymbols) {
  const double th = 1.1;
  const ConnectionData c = connectionAt(model("SPHERE2").space, {vec({th, 0.2}), vec({0.3, 0.8})});
  EXPECT_NEAR(c.chern(0, 1, 1), -std::sin(th) * std::cos(th), 1e-12);
  EXPECT_NEAR(c.chern(1, 0, 1), std::cos(th) / std::sin(th), 1e-12);
  EXPECT_NEAR(c.chern(0, 0, 0), 0.0, 1e-12);
}

TEST(Connection, ChernIsTorsionFree) {
  const FinslerSpace& s = model("NBRANDERS2").space;
  Sampler rng(13);
  for (int k = 0; k < 20; ++k) {
    const Vec x = rng.pointIn(s.sampleBox());
    const ConnectionData c = connectionAt(s, {x, rng.vectorAt(s, x)});
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(c.chern(i, 0, 1), c.chern(i, 1, 0), 1e-12);
  }
}

TEST(Connection, BerwaldClassificationMatchesGallery) {
  double minBerwald = 1e300, maxBerwald = 0.0;
  for (const auto& name : modelNames()) {
    const BerwaldReport r = isBerwald(model(name).space);
    const bool expected = name != "NBRANDERS2";
    EXPECT_EQ(r.berwald, expected) << name << " spread " << r.maxSpread;
    if (r.berwald)
      maxBerwald = std::max(maxBerwald, r.maxSpread);
    else
      minBerwald = std::min(minBerwald, r.maxSpread);
  }
  EXPECT_GE(minBerwald, 1e3 * std::max(maxBerwald, 1e-300));
}

TEST(Connection, TransportPreservesNormOnBerwald) {
  const FinslerSpace& s = model("S2xR_RANDERS").space;
  const Vec a = vec({1.2, -0.3, 0.1}), b = vec({1.9, 0.4, 0.6});
  const Curve path = [a, b](double t) { return CurvePoint{a + t * (b - a), b - a}; };
  for (int i = 0; i < 3; ++i) {
    const Vec e = Vec::Unit(3, i);
    EXPECT_NEAR(s.F(b, parallelTransport(s, path, e)), s.F(a, e), 1e-9);
  }
}

TEST(Connection, CovariantDerivativeOfConstantFieldOnFlatSpace) {
  const VectorField X = VectorField::fromTexts({"1", "2"}, 2);
  const Vec d = covariantDerivative(model("RANDERS2").space, {vec({0.3, 0.1}), vec({1.0, 1.0})}, vec({0.5, -1.0}), X);
  EXPECT_LT(d.cwiseAbs().maxCoeff(), 1e-14);
}

// ---- geodesics and distance

TEST(Geodesics, GreatCircleEndpoint) {
  const ModelEntry& m = model("SPHERE2");
  const auto& o = m.oracle("great circle from (1,0.2)");
  const Vec y = exponentialMap(m.space, {jsonVec(o["x"]), jsonVec(o["v"])}, 1e-3);
  EXPECT_LT((y - jsonVec(o["value"])).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Geodesics, SpeedIsConserved) {
  const FinslerSpace& s = model("NBRANDERS2").space;
  Sampler rng(17);
  for (int k = 0; k < 5; ++k) {
    const Vec x = rng.pointIn(s.sampleBox());
    const TangentVector v{x, rng.unitVectorAt(s, x)};
    const GeodesicPath p = integrateGeodesic(s, v, 1.0);
    for (std::size_t j = 0; j < p.points.size(); j += 100)
      EXPECT_NEAR(s.F(p.points[j], p.velocities[j]), 1.0, 1e-10);
  }
}

TEST(Geodesics, ZeroVectorExponentialIsBasePoint) {
  const Vec x = vec({1.0, 0.5});
  EXPECT_EQ(exponentialMap(model("SPHERE2").space, {x, Vec::Zero(2)}), x);
}

TEST(Geodesics, LeavingTheDomainIsReported) {
  expectThrowsCode([] { geodesicFlow(model("SPHERE2").space, vec({1.5, 0.0}), vec({5.0, 0.0}), 1.0); },
                   ErrorCode::kLeftDomain);
}

TEST(Distance, RandersIsNonsymmetric) {
  const FinslerSpace& s = model("RANDERS2").space;
  EXPECT_NEAR(distance(s, vec({0, 0}), vec({1, 0})).distance, 1.5, 1e-6);
  EXPECT_NEAR(distance(s, vec({1, 0}), vec({0, 0})).distance, 0.5, 1e-6);
}

TEST(Distance, MinkowskiMatchesNorm) {
  const FinslerSpace& s = model("FLATLEAF3").space;
  Sampler rng(19);
  for (int k = 0; k < 10; ++k) {
    const Vec x = rng.pointIn(s.sampleBox()), y = rng.pointIn(s.sampleBox());
    EXPECT_NEAR(distance(s, x, y).distance, s.F(x, y - x), 1e-6);
  }
}

TEST(Distance, ReverseSpaceSwapsEndpoints) {
  const FinslerSpace& s = model("S2xR_RANDERS").space;
  const FinslerSpace r = s.reversedSpace();
  Sampler rng(23);
  for (int k = 0; k < 3; ++k) {
    const Vec x = rng.pointIn(s.sampleBox()), y = rng.pointIn(s.sampleBox());
    EXPECT_NEAR(distance(r, y, x).distance, distance(s, x, y).distance, 1e-6);
  }
}

TEST(Distance, WarmStartReproducesColdSolve) {
  const FinslerSpace& s = model("SPHERE2").space;
  const Vec x = vec({1.0, -0.5}), y = vec({1.8, 0.7});
  const DistanceResult cold = distance(s, x, y);
  DistanceOptions o;
  o.multistart = 0;
  o.chordSeed = false;
  o.warmStart = cold.initialVelocity;
  o.warmJacobian = cold.jacobian;
  EXPECT_NEAR(distance(s, x, y + vec({1e-4, 0.0}), o).distance, distance(s, x, y + vec({1e-4, 0.0})).distance, 1e-10);
}

// ---- curvature

TEST(Curvature, SphereHasUnitFlagCurvature) {
  const FinslerSpace& s = model("SPHERE2").space;
  Sampler rng(29);
  for (int k = 0; k < 20; ++k) {
    const Vec x = rng.pointIn(s.sampleBox());
    const Vec v = rng.vectorAt(s, x), w = rng.vectorAt(s, x);
    try {
      EXPECT_NEAR(flagCurvature(s, {x, v}, w).value, 1.0, 1e-8);
    } catch (const FinslerError& e) {
      EXPECT_EQ(e.code(), ErrorCode::kDegenerateFlag);
    }
  }
}

TEST(Curvature, DegenerateFlagRejected) {
  expectThrowsCode([] { flagCurvature(model("SPHERE2").space, {vec({1.0, 0.0}), vec({1.0, 1.0})}, vec({2.0, 2.0})); },
                   ErrorCode::kDegenerateFlag);
}

TEST(Curvature, OsculatingLemmaHoldsOffBerwald) {
  const FinslerSpace& s = model("NBRANDERS2").space;
  const VectorField W = VectorField::fromTexts({"sin(x2)", "x1*x2"}, 2);
  const OsculatingLemmaResidual r = osculatingLemma(s, {vec({0.4, 0.9}), vec({1.0, 0.3})}, W);
  EXPECT_LT(r.alongField, 1e-10);
  EXPECT_LT(r.alongVector, 1e-10);
}

TEST(Curvature, WeightedRicciOrderingInN) {
  const FinslerSpace& s = model("S2xR_RANDERS").space;
  Sampler rng(31);
  for (int k = 0; k < 20; ++k) {
    const Vec x = rng.pointIn(s.sampleBox());
    const TangentVector v{x, rng.unitVectorAt(s, x)};
    const WeightedRicciValue a = weightedRicci(s, v, EffectiveDim::of(4));
    const WeightedRicciValue b = weightedRicci(s, v, EffectiveDim::of(8));
    const WeightedRicciValue c = weightedRicci(s, v, EffectiveDim::inf());
    EXPECT_LE(a.value, b.value + 1e-12);
    EXPECT_LE(b.value, c.value + 1e-12);
  }
}

TEST(Curvature, GaussianSpaceWeightedRicci) {
  const FinslerSpace& s = model("GAUSS2").space;
  const TangentVector v{vec({0.3, -0.2}), vec({0.6, 0.8})};
  EXPECT_NEAR(weightedRicci(s, v, EffectiveDim::inf()).value, 1.0, 1e-6);
  EXPECT_TRUE(weightedRicci(s, v, EffectiveDim::of(2)).minusInfinity);
  // radial direction at the origin: Psi' = 0 so Ric_n is finite
  EXPECT_FALSE(weightedRicci(s, {vec({0.0, 0.0}), vec({1.0, 0.0})}, EffectiveDim::of(2)).minusInfinity);
}

TEST(Curvature, RicciIsDegreeTwoHomogeneous) {
  const FinslerSpace& s = model("S2xR_RANDERS").space;
  const Vec x = vec({1.3, 0.2, -0.4}), v = vec({0.3, -0.5, 0.7});
  EXPECT_NEAR(ricci(s, {x, 2.0 * v}), 4.0 * ricci(s, {x, v}), 1e-10);
}
