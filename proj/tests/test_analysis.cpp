// Calculus, Busemann functions, splitting checks, reports and suites.

#include <cmath>

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

GridSpec grid2(double half, int cells) {
  GridSpec g;
  g.box = Box{vec({-half, -half}), vec({half, half})};
  g.cells = cells;
  return g;
}

}  // namespace

// ---- field calculus

TEST(Calculus, LegendreRoundTrip) {
  for (const char* name : {"RANDERS2", "NBRANDERS2", "FLATLEAF3", "S2xR_RANDERS"}) {
    const FinslerSpace& s = model(name).space;
    Sampler rng(41);
    for (int k = 0; k < 20; ++k) {
      const Vec x = rng.pointIn(s.sampleBox());
      const Vec v = rng.vectorAt(s, x, 1e-2);
      const Covector a = dualCovector(s, {x, v});
      EXPECT_LT((legendre(s, a).comp - v).cwiseAbs().maxCoeff(), 1e-9) << name;
      EXPECT_NEAR(dualNorm(s, a), s.F(x, v), 1e-9) << name;
    }
  }
}

TEST(Calculus, RandersLegendreOracle) {
  const TangentVector v = legendre(model("RANDERS2").space, {vec({0, 0}), vec({1, 0})});
  EXPECT_NEAR(v.comp[0], 4.0 / 9.0, 1e-10);
  EXPECT_NEAR(v.comp[1], 0.0, 1e-12);
}

TEST(Calculus, ZeroCovectorRejected) {
  try {
    legendre(model("E2").space, {vec({0, 0}), vec({0, 0})});
    ADD_FAILURE();
  } catch (const FinslerError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroCovector);
  }
}

TEST(Calculus, EuclideanLaplacians) {
  const FinslerSpace& s = model("E2").space;
  EXPECT_NEAR(laplacian(s, ScalarField::fromText("(x1^2 + x2^2)/2", 2), vec({0.4, -1.1})), 2.0, 1e-12);
  // distance from the origin: Delta r = 1/r in the plane
  EXPECT_NEAR(laplacian(s, ScalarField::fromText("sqrt(x1^2 + x2^2)", 2), vec({1.2, 1.6})), 0.5, 1e-12);
}

TEST(Calculus, WeightedLaplacianOfCoordinate) {
  const FinslerSpace& s = model("GAUSS2").space;
  const ScalarField u = ScalarField::fromText("x1", 2);
  EXPECT_NEAR(laplacian(s, u, vec({0.7, 0.2})), -0.7, 1e-12);
  const VectorField ref = gradientField(s, u);
  EXPECT_NEAR(linearizedLaplacian(s, ref, u, vec({0.7, 0.2})), -0.7, 1e-12);
}

TEST(Calculus, GradientIsUnitForDistanceFunction) {
  const FinslerSpace& s = model("RANDERS2").space;
  // d(0, x) = F(x) on a Minkowski plane
  const ScalarField u = ScalarField::fromText("sqrt(x1^2 + x2^2) + 0.5*x1", 2);
  Sampler rng(43);
  for (int k = 0; k < 10; ++k) {
    const Vec x = rng.pointIn(s.sampleBox());
    EXPECT_NEAR(s.F(x, gradient(s, u, x).comp), 1.0, 1e-12);
  }
}

TEST(Calculus, CriticalPoints) {
  const ScalarField u = ScalarField::fromText("x1^2 + x2^2", 2);
  // the gradient itself is simply zero there; the Laplacian needs Du != 0
  EXPECT_EQ(gradient(model("E2").space, u, vec({0, 0})).comp, Vec::Zero(2));
  try {
    laplacian(model("E2").space, u, vec({0, 0}));
    ADD_FAILURE();
  } catch (const FinslerError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroGradient);
  }
}

TEST(Calculus, WeakFormMatchesPointwiseLaplacian) {
  const FinslerSpace& s = model("NBRANDERS2").space;
  const ScalarField u = ScalarField::fromText("x1 + 0.3*sin(x2)", 2);
  const TestFunction phi{vec({0.2, -0.1}), vec({0.8, 0.8}), 4};
  const WeakFormResult r = weakFormCheck(s, u, phi, {32, 3, {}});
  EXPECT_LT(std::abs(r.difference), 1e-8);
}

TEST(Calculus, BochnerIdentityResidual) {
  for (const char* name : {"SPHERE2", "NBRANDERS2", "S2xR_RANDERS"}) {
    const FinslerSpace& s = model(name).space;
    const ScalarField u = ScalarField::fromText("sin(x1) + x2", s.dim());
    const BochnerTerms b = bochnerTerms(s, u, s.sampleBox().center() + Vec::Constant(s.dim(), 0.1));
    EXPECT_LT(std::abs(b.residual()), 1e-6) << name;
  }
}

TEST(Calculus, PairwiseSumIsExactOnIntegers) {
  std::vector<double> a(1000, 1.0);
  EXPECT_EQ(pairwiseSum(a), 1000.0);
}

// ---- Busemann functions

TEST(Busemann, EuclideanClosedForm) {
  const FinslerSpace& s = model("E2").space;
  DistanceOptions o;
  o.tolerance = 1e-14;
  const Ray ray = makeRay(s, vec({0, 0}), vec({1, 0}), 1.0);
  const BusemannField b = buildBusemann(s, ray, 4000.0, grid2(2.5, 16), true, o);
  for (const Vec& x : {vec({0.3, 1.1}), vec({-1.7, -0.4}), vec({2.0, 2.0})}) {
    EXPECT_NEAR(b(x), x[0], 1e-6);
    EXPECT_NEAR(s.F(x, gradient(s, b.field(), x).comp), 1.0, 1e-6);
  }
}

TEST(Busemann, RandersClosedFormAndReverse) {
  const FinslerSpace& s = model("RANDERS2").space;
  DistanceOptions o;
  o.tolerance = 1e-14;
  const Ray ray = makeRay(s, vec({0, 0}), vec({1, 0}), 1.0);
  const BusemannField b = buildBusemann(s, ray, 4000.0, grid2(2.5, 16), true, o);
  const FinslerSpace rs = s.reversedSpace();
  const BusemannField br = buildBusemann(rs, reverseRay(s, ray, 1.0), 4000.0, grid2(2.5, 16), true, o);
  for (const Vec& x : {vec({0.3, 1.1}), vec({-1.7, -0.4})}) {
    EXPECT_NEAR(b(x), 1.5 * x[0], 1e-6);
    EXPECT_NEAR(b(x) + br(x), 0.0, 1e-6);
  }
}

TEST(Busemann, LipschitzAndMonotoneAlongRay) {
  const FinslerSpace& s = model("E2").space;
  const Ray ray = makeRay(s, vec({0, 0}), vec({1, 0}), 1.0);
  const BusemannField b = buildBusemann(s, ray, 4000.0, grid2(2.5, 16));
  const VerificationReport r = checkMonotoneLipschitz(s, b, {vec({0.1, 0.2}), vec({-1.0, 1.0})}, 1e-6);
  EXPECT_EQ(r.status, Status::kPass);
}

TEST(Busemann, AsymptoticRayRequiresUnitGradient) {
  const FinslerSpace& s = model("E2").space;
  const Ray ray = makeRay(s, vec({0, 0}), vec({1, 0}), 1.0);
  const BusemannField b = buildBusemann(s, ray, 4000.0, grid2(2.5, 16));
  const Ray a = asymptoticRay(s, b, vec({0.5, 0.5}), 1.0);
  EXPECT_NEAR(a.direction[0], 1.0, 1e-6);
  EXPECT_NEAR(a.direction[1], 0.0, 1e-6);
}

TEST(Busemann, GridPointOutsideBoxRejected) {
  const FinslerSpace& s = model("E2").space;
  const Ray ray = makeRay(s, vec({0, 0}), vec({1, 0}), 1.0);
  const BusemannField b = buildBusemann(s, ray, 100.0, grid2(1.0, 8));
  EXPECT_THROW(b(vec({3.0, 0.0})), FinslerError);
}

TEST(Busemann, SubharmonicGateOnUnboundedPsi) {
  const ModelEntry& m = model("GAUSS2");
  const Precondition p = psiBoundedPrecondition(m.space);
  EXPECT_FALSE(p.holds);
  EXPECT_TRUE(psiBoundedPrecondition(model("SPHERE2").space).holds);
}

TEST(Busemann, RicciCertificates) {
  EXPECT_TRUE(ricciCertificate(model("SPHERE2").space, 2.0).holds);
  EXPECT_TRUE(ricciCertificate(model("GAUSS2").space, std::numeric_limits<double>::infinity()).holds);
  EXPECT_FALSE(ricciCertificate(model("GAUSS2").space, 2.0).holds);
  EXPECT_FALSE(ricciCertificate(model("NBRANDERS2").space, std::nullopt).holds);
}

// ---- splitting

TEST(Splitting, MinkowskiFlowIsTranslation) {
  const FinslerSpace& s = model("FLATLEAF3").space;
  const FlowMap flow(s, ScalarField::fromText("0.25*x1 + x3", 3), 1e-2);
  const Vec x = vec({0.3, -0.2, 0.5});
  EXPECT_LT((flow(x, 0.7) - (x + 0.7 * Vec::Unit(3, 2))).cwiseAbs().maxCoeff(), 1e-12);
  const Mat J = flow.jacobian(x, 0.7);
  EXPECT_LT((J - Mat::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Splitting, FlowGroupProperty) {
  const FinslerSpace& s = model("SPHERE2").space;
  const FlowMap flow(s, ScalarField::fromText("x1", 2), 1e-3);
  const VerificationReport r = flowGroupCheck(s, flow, {vec({1.2, 0.1})}, 0.234, 0.317, 1e-9);
  EXPECT_EQ(r.status, Status::kPass) << r.maxResidual;
}

TEST(Splitting, LeafFlatnessNeedsTwoLines) {
  const FinslerSpace& s = model("S2xR_RANDERS").space;
  const VerificationReport r = leafFlatnessCheck(s, {Vec::Unit(3, 2)}, {s.sampleBox().center()}, 3, 1e-6);
  EXPECT_EQ(r.status, Status::kNotApplicable);
}

TEST(Splitting, LeafFlatnessOnMinkowski) {
  const FinslerSpace& s = model("FLATLEAF3").space;
  const VerificationReport r = leafFlatnessCheck(s, {Vec::Unit(3, 0), Vec::Unit(3, 1), Vec::Unit(3, 2)},
                                                 {vec({0.1, 0.2, 0.3})}, 5, 1e-6);
  EXPECT_EQ(r.status, Status::kPass);
}

TEST(Splitting, TransportIsometryGatedOffBerwald) {
  const FinslerSpace& s = model("NBRANDERS2").space;
  const Curve path = [](double t) { return CurvePoint{vec({t, t}), vec({1.0, 1.0})}; };
  const VerificationReport r = transportFrameIsometryCheck(s, path, {Vec::Unit(2, 0)}, 1e-5, {berwaldPrecondition(s)});
  EXPECT_EQ(r.status, Status::kPreconditionUnsatisfied);
}

TEST(Splitting, TransportIsNotIsometricOffBerwald) {
  // with the gate removed the defect is visible
  const FinslerSpace& s = model("NBRANDERS2").space;
  const Curve path = [](double t) { return CurvePoint{vec({0.0, -1.5 + 3.0 * t}), vec({0.0, 3.0})}; };
  const VerificationReport r = transportFrameIsometryCheck(s, path, {Vec::Unit(2, 0), Vec::Unit(2, 1)}, 1e-5, {});
  EXPECT_EQ(r.status, Status::kFail);
}

// ---- reports

TEST(Report, FinalizeRules) {
  VerificationReport r;
  r.maxResidual = 1e-7;
  r.budget = 1e-6;
  EXPECT_EQ(r.finalize().status, Status::kPass);
  r.maxResidual = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(r.finalize().status, Status::kFail);
  r.maxResidual = 0.0;
  r.preconditions = {{"berwald", false}};
  EXPECT_EQ(r.finalize().status, Status::kPreconditionUnsatisfied);
  EXPECT_EQ(VerificationReport::notApplicable("x", "E2", "why").finalize().status, Status::kNotApplicable);
}

TEST(Report, JsonCarriesInfinityAsString) {
  VerificationReport r;
  r.maxResidual = std::numeric_limits<double>::infinity();
  EXPECT_EQ(r.toJson()["maxResidual"], "inf");
}

TEST(Report, TableHidesResidualOfGatedChecks) {
  VerificationReport r;
  r.invariant = "gated";
  r.space = "M";
  r.preconditions = {{"p", false}};
  r.finalize();
  const std::string t = formatTable({r});
  EXPECT_NE(t.find("precondition-unsatisfied"), std::string::npos);
  EXPECT_FALSE(anyFailed({r}));
}

// ---- suites

TEST(Suites, EuclideanCoreIdentitiesPass) {
  for (const auto& r : runSuite(model("E2"), "core-identities", {}))
    EXPECT_EQ(r.status, Status::kPass) << r.invariant << " " << r.maxResidual;
}

TEST(Suites, NegativeControlIsGated) {
  const auto rs = runSuite(model("NBRANDERS2"), "splitting", {});
  ASSERT_FALSE(rs.empty());
  for (const auto& r : rs) EXPECT_NE(r.status, Status::kPass) << r.invariant;
  const auto core = runSuite(model("NBRANDERS2"), "core-identities", {});
  bool seen = false;
  for (const auto& r : core)
    if (r.invariant == "reference-dependence-detected") {
      seen = true;
      EXPECT_EQ(r.status, Status::kPass);
    }
  EXPECT_TRUE(seen);
}

TEST(Suites, SameSeedSameReport) {
  SuiteConfig c;
  c.seed = 5;
  const std::string a = reportsToJson(runSuite(model("RANDERS2"), "bochner", c)).dump();
  const std::string b = reportsToJson(runSuite(model("RANDERS2"), "bochner", c)).dump();
  EXPECT_EQ(a, b);
}

TEST(Suites, UnknownSuiteRejected) {
  EXPECT_THROW(runSuite(model("E2"), "nope", {}), FinslerError);
}

TEST(Suites, TolScaleLoosensBudgets) {
  SuiteConfig c;
  c.tolScale = 10.0;
  const auto rs = runSuite(model("E2"), "bochner", c);
  EXPECT_DOUBLE_EQ(rs.front().budget, 1e-2);
}
