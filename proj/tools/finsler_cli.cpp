// finsler: batch front end for the library and the verification suites.
//
// Exit codes: 0 ok, 1 a check failed or a computation did not converge,
// 2 configuration or I/O error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "finsler/finsler.hpp"

using namespace finsler;
using nlohmann::json;

namespace {

struct Common {
  std::string spaceFile;
  std::string model;
  std::string modelsDir = defaultModelsDir();
  std::uint64_t seed = 1;
  double step = 1e-3;
  int grid = 0;
  double horizon = 0.0;
  std::string out;
  std::string format = "json";
  double tolScale = 1.0;
};

struct ExitError {
  int code;
  std::string message;
};

Vec parseVec(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  Vec v(static_cast<int>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v[i] = jsonConstant(json(parts[i]));
  return v;
}

json vecJson(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json matJson(const Mat& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) a.push_back(vecJson(m.row(i).transpose()));
  return a;
}

json tensorJson(const Tensor3& t) {
  json a = json::array();
  for (int i = 0; i < t.n; ++i) {
    json b = json::array();
    for (int j = 0; j < t.n; ++j) {
      json c = json::array();
      for (int k = 0; k < t.n; ++k) c.push_back(t(i, j, k));
      b.push_back(c);
    }
    a.push_back(b);
  }
  return a;
}

ModelEntry loadEntry(const Common& c) {
  if (!c.model.empty()) return loadModel(c.model, c.modelsDir);
  if (c.spaceFile.empty()) throw ExitError{2, "one of --model or --space is required"};
  ModelEntry m;
  m.space = loadSpaceFile(c.spaceFile);
  return m;
}

json configEcho(const Common& c, const FinslerSpace& s) {
  json j{{"space", s.name()}, {"seed", c.seed}, {"step", c.step}, {"tolScale", c.tolScale}};
  if (c.grid > 0) j["grid"] = c.grid;
  if (c.horizon > 0) j["horizon"] = c.horizon;
  return j;
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw ExitError{2, "cannot write " + c.out};
  f << text;
}

std::string dumpJson(const json& j) { return j.dump(2) + "\n"; }

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Vec orDefault(const std::string& text, const Vec& dflt) { return text.empty() ? dflt : parseVec(text); }

int errorExit(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownModel:
    case ErrorCode::kValidationFailure:
    case ErrorCode::kParseError:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kIoError:
    case ErrorCode::kDomainError:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical Finsler geometry and invariant verification"};
  app.require_subcommand(1);
  Common c;
  auto addCommon = [&c](CLI::App* sub) {
    sub->add_option("--space", c.spaceFile, "space definition JSON");
    sub->add_option("--model", c.model, "gallery model name");
    sub->add_option("--models-dir", c.modelsDir, "directory holding the gallery")->capture_default_str();
    sub->add_option("--seed", c.seed, "sampling seed")->capture_default_str();
    sub->add_option("--step", c.step, "RK4 step")->capture_default_str();
    sub->add_option("--grid", c.grid, "Busemann grid cells per axis (0 = model default)");
    sub->add_option("--horizon", c.horizon, "Busemann truncation horizon (0 = model default)");
    sub->add_option("--out", c.out, "output file (default stdout)");
    sub->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--tol-scale", c.tolScale, "multiplier on every budget")->capture_default_str();
  };

  std::string xs, vs, ws, ys, suite = "all", nText;
  double tEnd = 1.0;
  bool berwaldFlag = false, reverse = false;
  int lattice = 5;

  auto* tensor = app.add_subcommand("tensor", "g, A, Chern Gamma, G and N at (x, v)");
  addCommon(tensor);
  tensor->add_option("--x", xs, "base point, comma separated");
  tensor->add_option("--v", vs, "tangent vector");
  tensor->add_flag("--berwald", berwaldFlag, "also run the Berwald detector");

  auto* geo = app.add_subcommand("geodesic", "integrate a geodesic");
  addCommon(geo);
  geo->add_option("--x", xs)->required();
  geo->add_option("--v", vs)->required();
  geo->add_option("--t", tEnd, "end time")->capture_default_str();

  auto* dist = app.add_subcommand("distance", "distance by geodesic shooting");
  addCommon(dist);
  dist->add_option("--from", xs)->required();
  dist->add_option("--to", ys)->required();
  dist->add_flag("--reverse", reverse, "use the reverse structure");

  auto* curv = app.add_subcommand("curvature", "flag, Ricci and weighted Ricci curvature");
  addCommon(curv);
  curv->add_option("--x", xs);
  curv->add_option("--v", vs);
  curv->add_option("--w", ws, "transverse vector of the flag");
  curv->add_option("--N", nText, "effective dimension (number or inf)");

  auto* bus = app.add_subcommand("busemann", "tabulate a Busemann function on a lattice");
  addCommon(bus);
  bus->add_option("--origin", xs);
  bus->add_option("--direction", vs);
  bus->add_option("--lattice", lattice, "lattice points per axis over the model point box")->capture_default_str();

  auto* ver = app.add_subcommand("verify", "run a verification suite");
  addCommon(ver);
  ver->add_option("--suite", suite, "core-identities | laplacian-comparison | bochner | busemann | splitting | all")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const ModelEntry m = loadEntry(c);
    const FinslerSpace& s = m.space;
    const int n = s.dim();
    const Vec center = s.sampleBox().center();
    json out = configEcho(c, s);
    int rc = 0;

    if (*tensor) {
      const Vec x = orDefault(xs, center), v = orDefault(vs, Vec::Unit(n, 0));
      const ConnectionData cd = connectionAt(s, {x, v});
      out["x"] = vecJson(x);
      out["v"] = vecJson(v);
      out["F"] = cd.F;
      out["g"] = matJson(cd.g);
      out["cartan"] = tensorJson(cd.cartan);
      out["chern"] = tensorJson(cd.chern);
      out["spray"] = vecJson(cd.spray);
      out["nonlinear"] = matJson(cd.nonlinear);
      if (berwaldFlag) {
        const BerwaldReport b = isBerwald(s, 10, 4, 1e-6, c.seed);
        out["berwald"] = b.berwald;
        out["berwaldSpread"] = b.maxSpread;
      }
      emit(c, dumpJson(out));
    } else if (*geo) {
      const TangentVector v0{parseVec(xs), parseVec(vs)};
      const GeodesicPath p = integrateGeodesic(s, v0, tEnd, c.step);
      const double f0 = s.F(v0.base, v0.comp);
      if (c.format == "csv") {
        std::string text = "# " + out.dump() + "\nt";
        for (int i = 0; i < n; ++i) text += ",x" + std::to_string(i + 1);
        for (int i = 0; i < n; ++i) text += ",v" + std::to_string(i + 1);
        text += ",speed_residual\n";
        for (std::size_t k = 0; k < p.times.size(); ++k) {
          text += num(p.times[k]);
          for (int i = 0; i < n; ++i) text += "," + num(p.points[k][i]);
          for (int i = 0; i < n; ++i) text += "," + num(p.velocities[k][i]);
          text += "," + num(s.F(p.points[k], p.velocities[k]) - f0) + "\n";
        }
        emit(c, text);
      } else {
        out["endPoint"] = vecJson(p.points.back());
        out["endVelocity"] = vecJson(p.velocities.back());
        out["speedResidual"] = s.F(p.points.back(), p.velocities.back()) - f0;
        out["steps"] = p.times.size() - 1;
        emit(c, dumpJson(out));
      }
    } else if (*dist) {
      const FinslerSpace space = reverse ? s.reversedSpace() : s;
      DistanceOptions o;
      o.step = c.step;
      const DistanceResult r = distance(space, parseVec(xs), parseVec(ys), o);
      out["reverse"] = reverse;
      out["distance"] = r.distance;
      out["residual"] = r.residual;
      out["initialVelocity"] = vecJson(r.initialVelocity);
      out["convergedSeeds"] = r.convergedSeeds;
      emit(c, dumpJson(out));
    } else if (*curv) {
      const Vec x = orDefault(xs, center), v = orDefault(vs, Vec::Unit(n, 0)), w = orDefault(ws, Vec::Unit(n, 1));
      const TangentVector tv{x, v};
      out["x"] = vecJson(x);
      out["v"] = vecJson(v);
      out["w"] = vecJson(w);
      out["flagCurvature"] = flagCurvature(s, tv, w).value;
      out["ricci"] = ricci(s, tv);
      if (!nText.empty()) {
        const double N = jsonParameter(json(nText));
        const WeightedRicciValue r = weightedRicci(s, tv, std::isinf(N) ? EffectiveDim::inf() : EffectiveDim::of(N));
        out["N"] = nText;
        out["weightedRicci"] = r.minusInfinity ? json("-inf") : json(r.value);
      }
      emit(c, dumpJson(out));
    } else if (*bus) {
      const json cfg = m.has("busemann") ? m.section("busemann") : json::object();
      if (xs.empty() && !cfg.contains("origin")) throw ExitError{2, "--origin and --direction are required"};
      const Vec origin = xs.empty() ? jsonVec(cfg["origin"]) : parseVec(xs);
      const Vec dir = vs.empty() ? jsonVec(cfg["direction"]) : parseVec(vs);
      const Ray ray = makeRay(s, origin, dir, 1.0);
      GridSpec g;
      if (cfg.contains("grid")) {
        g.box = jsonBox(cfg["grid"]["box"]);
        g.cells = cfg["grid"].value("cells", 32);
      } else {
        const Box sb = s.sampleBox();
        const Vec pad = 0.1 * sb.width();
        g.box = Box{sb.lower - pad, sb.upper + pad};
      }
      if (c.grid > 0) g.cells = c.grid;
      const double T = c.horizon > 0 ? c.horizon : defaultHorizon(s, ray);
      DistanceOptions o;
      o.step = c.step;
      const BusemannField b = buildBusemann(s, ray, T, g, true, o);
      const Box pb = cfg.contains("pointBox") ? jsonBox(cfg["pointBox"]) : s.sampleBox();
      std::vector<Vec> pts;
      const int L = std::max(2, lattice);
      std::vector<int> idx(n, 0);
      while (true) {
        Vec x(n);
        for (int i = 0; i < n; ++i) x[i] = pb.lower[i] + (pb.upper[i] - pb.lower[i]) * idx[i] / (L - 1);
        pts.push_back(x);
        int d = 0;
        while (d < n && ++idx[d] == L) idx[d++] = 0;
        if (d == n) break;
      }
      out["horizon"] = T;
      out["grid"] = gridSpecJson(b);
      if (c.format == "csv") {
        std::string text = "# " + out.dump() + "\n";
        for (int i = 0; i < n; ++i) text += "x" + std::to_string(i + 1) + ",";
        text += "b,truncation_estimate,gradient_norm_residual\n";
        for (const Vec& x : pts) {
          for (int i = 0; i < n; ++i) text += num(x[i]) + ",";
          const double gn = s.F(x, gradient(s, b.field(), x).comp) - 1.0;
          text += num(b(x)) + "," + num(b.truncationEstimate(x)) + "," + num(gn) + "\n";
        }
        emit(c, text);
      } else {
        json rows = json::array();
        for (const Vec& x : pts) {
          const double gn = s.F(x, gradient(s, b.field(), x).comp) - 1.0;
          rows.push_back({{"x", vecJson(x)}, {"b", b(x)}, {"truncationEstimate", b.truncationEstimate(x)},
                          {"gradientNormResidual", gn}});
        }
        out["values"] = rows;
        emit(c, dumpJson(out));
      }
    } else if (*ver) {
      if (c.model.empty()) throw ExitError{2, "verify needs --model"};
      SuiteConfig sc;
      sc.seed = c.seed;
      sc.tolScale = c.tolScale;
      sc.step = c.step;
      if (c.grid > 0) sc.grid = c.grid;
      if (c.horizon > 0) sc.horizon = c.horizon;
      const std::vector<VerificationReport> reports = runSuite(m, suite, sc);
      out["suite"] = suite;
      out["reports"] = reportsToJson(reports);
      const std::string table = formatTable(reports);
      if (c.out.empty()) {
        std::cout << (c.format == "json" ? dumpJson(out) : table);
      } else {
        emit(c, dumpJson(out));
        std::ofstream(c.out + ".txt") << table;
        std::cout << table;
      }
      rc = anyFailed(reports) ? 1 : 0;
    }
    return rc;
  } catch (const ExitError& e) {
    std::cerr << json{{"error", "ConfigError"}, {"message", e.message}}.dump() << "\n";
    return e.code;
  } catch (const FinslerError& e) {
    std::cerr << json{{"error", errorName(e.code())}, {"message", e.what()}}.dump() << "\n";
    return errorExit(e.code());
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Exception"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }
}
