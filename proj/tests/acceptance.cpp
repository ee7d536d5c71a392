// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "finsler/finsler.hpp"

using namespace finsler;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

void note(Outcome& o, bool ok, const std::string& what) {
  if (!ok) {
    o.pass = false;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += what;
  }
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

const VerificationReport* find(const std::vector<VerificationReport>& rs, const std::string& inv) {
  for (const auto& r : rs)
    if (r.invariant == inv) return &r;
  return nullptr;
}

void requireStatus(Outcome& o, const std::vector<VerificationReport>& rs, const std::string& model,
                   const std::string& inv, Status want) {
  const VerificationReport* r = find(rs, inv);
  if (!r) {
    note(o, false, model + " " + inv + " missing");
    return;
  }
  note(o, r->status == want,
       model + " " + inv + " is " + statusName(r->status) + " (residual " + sci(r->maxResidual) + ")");
}

void requireAllPass(Outcome& o, const std::vector<VerificationReport>& rs, const std::string& model) {
  for (const auto& r : rs)
    note(o, r.status == Status::kPass, model + " " + r.invariant + " " + statusName(r.status) + " (" +
                                           sci(r.maxResidual) + " vs " + sci(r.budget) + ")");
}

// 1. exact-jet identities on every model
Outcome coreIdentities() {
  Outcome o;
  const std::vector<std::string> invs{"euler-homogeneity-F", "euler-homogeneity-F2", "fundamental-tensor-vv",
                                      "cartan-contraction", "nonlinear-connection-spray",
                                      "nonlinear-connection-two-forms"};
  double worst = 0.0;
  for (const auto& name : modelNames()) {
    const auto rs = runSuite(loadModel(name), "core-identities", {});
    for (const auto& inv : invs) {
      const VerificationReport* r = find(rs, inv);
      note(o, r && r->status == Status::kPass && r->maxResidual < 1e-8, name + " " + inv);
      if (r) worst = std::max(worst, r->maxResidual);
    }
  }
  if (o.pass) o.detail = "max residual " + sci(worst) + " over 7 models x 100 samples";
  return o;
}

// 2. Riemannian and Berwald classification with a spread gap
Outcome classification() {
  Outcome o;
  double berwaldMax = 0.0, otherMin = 1e300;
  for (const auto& name : modelNames()) {
    const ModelEntry m = loadModel(name);
    double cartan = 0.0;
    Sampler rng(101);
    for (int k = 0; k < 20; ++k) {
      const Vec x = rng.pointIn(m.space.sampleBox());
      for (double a : cartanTensor(m.space, {x, rng.unitVectorAt(m.space, x)}).A.a) cartan = std::max(cartan, std::abs(a));
    }
    const bool riemannian = cartan < 1e-8;
    const bool wantRiemannian = name == "E2" || name == "GAUSS2" || name == "SPHERE2";
    note(o, riemannian == wantRiemannian, name + " Cartan classification");
    const BerwaldReport b = isBerwald(m.space);
    note(o, b.berwald == (name != "NBRANDERS2"), name + " Berwald detector");
    if (name == "NBRANDERS2")
      otherMin = std::min(otherMin, b.maxSpread);
    else
      berwaldMax = std::max(berwaldMax, b.maxSpread);
  }
  const double gap = otherMin / std::max(berwaldMax, 1e-300);
  note(o, gap >= 1e3, "spread gap " + sci(gap));
  if (o.pass) o.detail = "Berwald spread <= " + sci(berwaldMax) + ", NBRANDERS2 " + sci(otherMin);
  return o;
}

// 3. geodesic and distance accuracy
Outcome geodesicAccuracy() {
  Outcome o;
  const ModelEntry sphere = loadModel("SPHERE2");
  const auto& gc = sphere.oracle("great circle from (1,0.2)");
  const double endErr =
      (exponentialMap(sphere.space, {jsonVec(gc["x"]), jsonVec(gc["v"])}, 1e-3) - jsonVec(gc["value"])).cwiseAbs().maxCoeff();
  note(o, endErr < 1e-8, "great circle endpoint " + sci(endErr));

  double mink = 0.0;
  for (const char* name : {"RANDERS2", "FLATLEAF3"}) {
    const FinslerSpace s = loadModel(name).space;
    Sampler rng(103);
    for (int k = 0; k < 20; ++k) {
      const Vec x = rng.pointIn(s.sampleBox()), y = rng.pointIn(s.sampleBox());
      mink = std::max(mink, std::abs(distance(s, x, y).distance - s.F(x, y - x)));
    }
  }
  const FinslerSpace r2 = loadModel("RANDERS2").space;
  const double fwd = distance(r2, vec({0, 0}), vec({1, 0})).distance;
  const double bwd = distance(r2, vec({1, 0}), vec({0, 0})).distance;
  mink = std::max({mink, std::abs(fwd - 1.5), std::abs(bwd - 0.5)});
  note(o, mink < 1e-6, "Minkowski distances " + sci(mink));

  const FinslerSpace nb = loadModel("NBRANDERS2").space;
  const FinslerSpace rev = nb.reversedSpace();
  double revErr = 0.0;
  Sampler rng(107);
  for (int k = 0; k < 50; ++k) {
    const Vec x = rng.pointIn(nb.sampleBox()), y = rng.pointIn(nb.sampleBox());
    revErr = std::max(revErr, std::abs(distance(rev, y, x).distance - distance(nb, x, y).distance));
  }
  note(o, revErr < 1e-6, "reverse identity " + sci(revErr));
  if (o.pass)
    o.detail = "endpoint " + sci(endErr) + ", Minkowski " + sci(mink) + ", reverse (50 pairs) " + sci(revErr);
  return o;
}

// 4. Laplacian comparison
Outcome laplacianComparison() {
  Outcome o;
  const auto e2 = runSuite(loadModel("E2"), "laplacian-comparison", {});
  requireStatus(o, e2, "E2", "laplacian-comparison", Status::kPass);
  const auto g = runSuite(loadModel("GAUSS2"), "laplacian-comparison", {});
  requireStatus(o, g, "GAUSS2", "laplacian-comparison", Status::kPreconditionUnsatisfied);
  requireStatus(o, g, "GAUSS2", "laplacian-comparison-truncated", Status::kPass);
  if (o.pass) {
    const auto* r = find(e2, "laplacian-comparison");
    o.detail = "E2 |Delta d - 1/d| " + sci(r->details.value("equalityResidual", 0.0)) +
               " on 200 points; GAUSS2 gated, truncated N_Omega = " +
               sci(find(g, "laplacian-comparison-truncated")->details.value("NOmega", 0.0));
  }
  return o;
}

// 5. Bochner-Weitzenbock residual and inequality slack
Outcome bochner() {
  Outcome o;
  double worst = 0.0;
  for (const auto& name : modelNames()) {
    const auto rs = runSuite(loadModel(name), "bochner", {});
    requireAllPass(o, rs, name);
    worst = std::max(worst, rs.front().maxResidual);
  }
  if (o.pass) o.detail = "identity residual <= " + sci(worst) + ", slack >= -1e-3 for N in {n, n+2, inf}";
  return o;
}

// 6. Busemann suite
Outcome busemann() {
  Outcome o;
  for (const char* name : {"E2", "RANDERS2"}) requireAllPass(o, runSuite(loadModel(name), "busemann", {}), name);
  const auto s = runSuite(loadModel("S2xR_RANDERS"), "busemann", {});
  requireAllPass(o, s, "S2xR_RANDERS");
  for (const auto& r : s)
    if (r.invariant != "busemann-grid-order") note(o, r.maxResidual <= 1e-2, "S2xR_RANDERS " + r.invariant + " above 1e-2");
  if (const auto* r = find(s, "busemann-grid-order"); r && o.pass) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "S2xR orders value %.2f gradient %.2f hessian %.2f",
                  r->details.value("valueOrder", 0.0), r->details.value("gradientOrder", 0.0),
                  r->details.value("hessianOrder", 0.0));
    o.detail = buf;
  }
  return o;
}

// 7. Splitting suite
Outcome splitting() {
  Outcome o;
  for (const char* name : {"S2xR_RANDERS", "FLATLEAF3"}) {
    const auto rs = runSuite(loadModel(name), "splitting", {});
    for (const auto& r : rs) {
      if (r.invariant == "leaf-flatness" && std::string(name) == "S2xR_RANDERS") {
        // a single line: there is no leaf to test
        note(o, r.status == Status::kNotApplicable, "S2xR_RANDERS leaf-flatness should be not-applicable");
        continue;
      }
      note(o, r.status == Status::kPass, std::string(name) + " " + r.invariant + " " + statusName(r.status) + " (" +
                                             sci(r.maxResidual) + " vs " + sci(r.budget) + ")");
    }
  }
  if (o.pass) o.detail = "flow, isometry, measure, convexity, splitting, transport and leaf checks";
  return o;
}

// 8. Negative control
Outcome negativeControl() {
  Outcome o;
  const ModelEntry m = loadModel("NBRANDERS2");
  const auto rs = runSuite(m, "splitting", {});
  int gated = 0;
  for (const auto& r : rs) {
    if (r.status == Status::kNotApplicable) continue;
    note(o, r.status == Status::kPreconditionUnsatisfied, r.invariant + " " + statusName(r.status));
    ++gated;
  }
  note(o, gated >= 4, "too few gated checks");
  const auto core = runSuite(m, "core-identities", {});
  const VerificationReport* dep = find(core, "reference-dependence-detected");
  note(o, dep && dep->status == Status::kPass, "reference dependence not detected");
  if (o.pass)
    o.detail = std::to_string(gated) + " gated checks, reference spread " + sci(dep->details.value("spread", 0.0));
  return o;
}

// 9. Determinism
Outcome determinism() {
  Outcome o;
  SuiteConfig c;
  c.seed = 42;
  const ModelEntry m = loadModel("E2");
  const std::string a = reportsToJson(runSuite(m, "all", c)).dump();
  const std::string b = reportsToJson(runSuite(m, "all", c)).dump();
  note(o, a == b, "E2 all reports differ between runs");
  if (o.pass) o.detail = "E2 all: " + std::to_string(a.size()) + " identical bytes";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 core identities", coreIdentities},
      {"2 riemannian/berwald classification", classification},
      {"3 geodesic and distance accuracy", geodesicAccuracy},
      {"4 laplacian comparison", laplacianComparison},
      {"5 bochner-weitzenbock", bochner},
      {"6 busemann suite", busemann},
      {"7 splitting suite", splitting},
      {"8 negative control", negativeControl},
      {"9 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  %-38s %6.1fs  %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
