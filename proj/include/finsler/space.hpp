#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finsler/dual.hpp"
#include "finsler/errors.hpp"
#include "finsler/expression.hpp"
#include "finsler/linalg.hpp"

namespace finsler {

enum class Family { kRiemannian, kRanders, kMinkowski };

inline const char* familyName(Family f) {
  switch (f) {
    case Family::kRiemannian: return "riemannian";
    case Family::kRanders: return "randers";
    case Family::kMinkowski: return "minkowski";
  }
  return "?";
}

// Open axis-aligned box; infinite bounds are allowed.
struct Box {
  Vec lower;
  Vec upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& x) const {
    for (int i = 0; i < dim(); ++i)
      if (!(x[i] > lower[i] && x[i] < upper[i])) return false;
    return true;
  }
  bool bounded() const {
    for (int i = 0; i < dim(); ++i)
      if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) return false;
    return true;
  }
  Vec center() const { return 0.5 * (lower + upper); }
  Vec width() const { return upper - lower; }
};

struct TangentVector {
  Vec base;
  Vec comp;
};

struct Covector {
  Vec base;
  Vec comp;
};

class FinslerSpace {
 public:
  static FinslerSpace fromJson(const nlohmann::json& j) {
    FinslerSpace s;
    try {
      s.name_ = j.value("name", std::string("unnamed"));
      s.dim_ = j.at("dim").get<int>();
      if (s.dim_ < 2 || s.dim_ > kMaxDim)
        throw FinslerError(ErrorCode::kValidationFailure, "dim must be in [2, " + std::to_string(kMaxDim) + "]");
      const std::string fam = j.at("family").get<std::string>();
      const auto& p = j.at("params");
      const int n = s.dim_;
      if (fam == "riemannian" || fam == "randers") {
        s.family_ = fam == "riemannian" ? Family::kRiemannian : Family::kRanders;
        const auto& m = p.at("metric");
        if (!m.is_array() || static_cast<int>(m.size()) != n)
          throw FinslerError(ErrorCode::kValidationFailure, "metric must be an n x n array");
        s.metric_.resize(n * n);
        for (int i = 0; i < n; ++i) {
          if (!m[i].is_array() || static_cast<int>(m[i].size()) != n)
            throw FinslerError(ErrorCode::kValidationFailure, "metric must be an n x n array");
          for (int k = 0; k < n; ++k) s.metric_[i * n + k] = parseEntry(m[i][k], n, false);
        }
        if (s.family_ == Family::kRanders) {
          const auto& b = p.at("oneForm");
          if (!b.is_array() || static_cast<int>(b.size()) != n)
            throw FinslerError(ErrorCode::kValidationFailure, "oneForm must have n entries");
          for (int i = 0; i < n; ++i) s.oneForm_.push_back(parseEntry(b[i], n, false));
        }
      } else if (fam == "minkowski") {
        s.family_ = Family::kMinkowski;
        s.norm_ = Expression::parse(p.at("norm").get<std::string>(), n, true);
        if (s.norm_.usesX())
          throw FinslerError(ErrorCode::kValidationFailure, "minkowski norm must not depend on coordinates");
      } else {
        throw FinslerError(ErrorCode::kValidationFailure, "unknown family '" + fam + "'");
      }
      s.logWeight_ = j.contains("logWeight") ? parseEntry(j["logWeight"], n, false) : Expression(0.0);
      s.domain_ = parseBox(j.at("domain"), n);
      if (j.contains("sampleBox")) s.sampleBox_ = parseBox(j["sampleBox"], n);
      s.reversed_ = j.value("reversed", false);
    } catch (const nlohmann::json::exception& e) {
      throw FinslerError(ErrorCode::kValidationFailure, std::string("malformed space definition: ") + e.what());
    }
    s.xIndependent_ = s.computeXIndependent();
    return s;
  }

  nlohmann::json toJson() const {
    nlohmann::json j;
    j["name"] = name_;
    j["dim"] = dim_;
    j["family"] = familyName(family_);
    nlohmann::json p = nlohmann::json::object();
    if (family_ == Family::kMinkowski) {
      p["norm"] = norm_.text();
    } else {
      nlohmann::json m = nlohmann::json::array();
      for (int i = 0; i < dim_; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < dim_; ++k) row.push_back(metric_[i * dim_ + k].text());
        m.push_back(row);
      }
      p["metric"] = m;
      if (family_ == Family::kRanders) {
        nlohmann::json b = nlohmann::json::array();
        for (const auto& e : oneForm_) b.push_back(e.text());
        p["oneForm"] = b;
      }
    }
    j["params"] = p;
    j["logWeight"] = logWeight_.text();
    j["domain"] = boxJson(domain_);
    if (sampleBox_) j["sampleBox"] = boxJson(*sampleBox_);
    if (reversed_) j["reversed"] = true;
    return j;
  }

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  Family family() const { return family_; }
  const Box& domain() const { return domain_; }
  bool reversed() const { return reversed_; }
  // True when F does not depend on the base point, so the spray vanishes.
  bool xIndependent() const { return xIndependent_; }
  const Expression& logWeightExpr() const { return logWeight_; }

  Box sampleBox() const {
    if (sampleBox_) return *sampleBox_;
    Box b{Vec(dim_), Vec(dim_)};
    for (int i = 0; i < dim_; ++i) {
      double lo = domain_.lower[i], hi = domain_.upper[i];
      if (!std::isfinite(lo)) lo = std::isfinite(hi) ? hi - 2.0 : -1.0;
      if (!std::isfinite(hi)) hi = std::isfinite(domain_.lower[i]) ? domain_.lower[i] + 2.0 : 1.0;
      const double m = 0.1 * (hi - lo);
      b.lower[i] = lo + m;
      b.upper[i] = hi - m;
    }
    return b;
  }

  bool inDomain(const Vec& x) const { return domain_.contains(x); }

  void requireInDomain(const Vec& x) const {
    if (x.size() != dim_) throw FinslerError(ErrorCode::kInvalidArgument, "point has wrong dimension");
    if (!inDomain(x)) throw FinslerError(ErrorCode::kDomainError, "base point outside the domain of " + name_);
  }

  // F(x, v)^2, the quantity every tensor is derived from.
  template <typename T>
  T normSquared(const T* x, const T* v) const {
    JetVec<T> w;
    const T* vv = v;
    if (reversed_) {
      for (int i = 0; i < dim_; ++i) w[i] = -v[i];
      vv = w.data();
    }
    switch (family_) {
      case Family::kRiemannian:
        return quadratic(x, vv);
      case Family::kRanders: {
        T f = sqrt(quadratic(x, vv)) + linear(x, vv);
        return f * f;
      }
      case Family::kMinkowski: {
        T f = norm_.eval(x, vv);
        return f * f;
      }
    }
    return T(0.0);
  }

  template <typename T>
  T norm(const T* x, const T* v) const {
    JetVec<T> w;
    const T* vv = v;
    if (reversed_) {
      for (int i = 0; i < dim_; ++i) w[i] = -v[i];
      vv = w.data();
    }
    switch (family_) {
      case Family::kRiemannian:
        return sqrt(quadratic(x, vv));
      case Family::kRanders:
        return sqrt(quadratic(x, vv)) + linear(x, vv);
      case Family::kMinkowski:
        return norm_.eval(x, vv);
    }
    return T(0.0);
  }

  template <typename T>
  T logWeight(const T* x) const {
    return logWeight_.eval<T>(x, nullptr);
  }

  double F(const Vec& x, const Vec& v) const {
    if (v.cwiseAbs().maxCoeff() == 0.0) return 0.0;
    return norm<double>(x.data(), v.data());
  }
  double F2(const Vec& x, const Vec& v) const { return normSquared<double>(x.data(), v.data()); }
  double Phi(const Vec& x) const { return logWeight<double>(x.data()); }

  // Coefficients of the quadratic and linear parts and their first
  // coordinate derivatives: da(i, j, k) = d a_ij / dx^k, db(i, k) = d b_i / dx^k.
  // The one-form already carries the sign flip of a reversed space.
  struct CoefficientJet {
    Mat a;
    Tensor3 da;
    Vec b;
    Mat db;
  };

  void coefficientJet(const Vec& x, CoefficientJet& c) const {
    const int n = dim_;
    c.a.resize(n, n);
    c.da = Tensor3(n);
    c.b = Vec::Zero(n);
    c.db = Mat::Zero(n, n);
    JetVec<D1> xs{};
    for (int i = 0; i < n; ++i) xs[i] = D1(x[i]);
    auto fill = [&](const Expression& e, double& val, auto&& deriv) {
      if (e.isConstant()) {
        val = e.constantValue();
        for (int k = 0; k < n; ++k) deriv(k) = 0.0;
        return;
      }
      for (int k = 0; k < n; ++k) {
        xs[k].du = 1.0;
        const D1 r = e.eval<D1>(xs.data(), nullptr);
        xs[k].du = 0.0;
        val = r.re;
        deriv(k) = r.du;
      }
    };
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double val = 0.0;
        fill(metric_[i * n + j], val, [&](int k) -> double& { return c.da(i, j, k); });
        c.a(i, j) = c.a(j, i) = val;
        for (int k = 0; k < n; ++k) c.da(j, i, k) = c.da(i, j, k);
      }
    if (family_ == Family::kRanders) {
      const double sign = reversed_ ? -1.0 : 1.0;
      for (int i = 0; i < n; ++i) {
        double val = 0.0;
        fill(oneForm_[i], val, [&](int k) -> double& { return c.db(i, k); });
        c.b[i] = sign * val;
        for (int k = 0; k < n; ++k) c.db(i, k) *= sign;
      }
    }
  }

  FinslerSpace reversedSpace() const {
    FinslerSpace r = *this;
    r.reversed_ = !reversed_;
    return r;
  }

 private:
  static Expression parseEntry(const nlohmann::json& e, int n, bool allowV) {
    if (e.is_number()) return Expression(e.get<double>());
    if (e.is_string()) return Expression::parse(e.get<std::string>(), n, allowV);
    throw FinslerError(ErrorCode::kValidationFailure, "expression entries must be strings or numbers");
  }

  static double parseBound(const nlohmann::json& e, double inf) {
    if (e.is_null()) return inf;
    if (e.is_string()) {
      const auto s = e.get<std::string>();
      if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
      throw FinslerError(ErrorCode::kValidationFailure, "bad domain bound '" + s + "'");
    }
    return e.get<double>();
  }

  static Box parseBox(const nlohmann::json& j, int n) {
    const auto& lo = j.at("lower");
    const auto& hi = j.at("upper");
    if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n)
      throw FinslerError(ErrorCode::kValidationFailure, "box bounds must have n entries");
    Box b{Vec(n), Vec(n)};
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      b.lower[i] = parseBound(lo[i], -inf);
      b.upper[i] = parseBound(hi[i], inf);
      if (!(b.lower[i] < b.upper[i])) throw FinslerError(ErrorCode::kValidationFailure, "empty box");
    }
    return b;
  }

  static nlohmann::json boxJson(const Box& b) {
    nlohmann::json lo = nlohmann::json::array(), hi = nlohmann::json::array();
    for (int i = 0; i < b.dim(); ++i) {
      lo.push_back(std::isfinite(b.lower[i]) ? nlohmann::json(b.lower[i]) : nlohmann::json(nullptr));
      hi.push_back(std::isfinite(b.upper[i]) ? nlohmann::json(b.upper[i]) : nlohmann::json(nullptr));
    }
    return {{"lower", lo}, {"upper", hi}};
  }

  bool computeXIndependent() const {
    if (family_ == Family::kMinkowski) return true;
    for (const auto& e : metric_)
      if (e.usesX()) return false;
    for (const auto& e : oneForm_)
      if (e.usesX()) return false;
    return true;
  }

  template <typename T>
  T quadratic(const T* x, const T* v) const {
    T s(0.0);
    for (int i = 0; i < dim_; ++i) {
      for (int k = i; k < dim_; ++k) {
        const Expression& e = metric_[i * dim_ + k];
        const double mult = i == k ? 1.0 : 2.0;
        if (e.isConstant()) {
          const double c = e.constantValue();
          if (c != 0.0) s += (mult * c) * (v[i] * v[k]);
        } else {
          s += mult * (e.eval<T>(x, nullptr) * (v[i] * v[k]));
        }
      }
    }
    return s;
  }

  template <typename T>
  T linear(const T* x, const T* v) const {
    T s(0.0);
    for (int i = 0; i < dim_; ++i) {
      const Expression& e = oneForm_[i];
      if (e.isConstant()) {
        if (e.constantValue() != 0.0) s += e.constantValue() * v[i];
      } else {
        s += e.eval<T>(x, nullptr) * v[i];
      }
    }
    return s;
  }

  std::string name_;
  int dim_ = 0;
  Family family_ = Family::kRiemannian;
  std::vector<Expression> metric_;
  std::vector<Expression> oneForm_;
  Expression norm_;
  Expression logWeight_;
  Box domain_;
  std::optional<Box> sampleBox_;
  bool reversed_ = false;
  bool xIndependent_ = false;
};

// ---- jets of F^2 along seed directions

struct JetValue {
  int order = 0;
  std::vector<double> coeff;  // indexed by a bitmask over seed levels

  double value() const { return coeff[0]; }
  double partial(unsigned mask) const { return coeff[mask]; }
  double mixed() const { return coeff.back(); }
};

namespace detail {

template <int K>
JetValue evalJetImpl(const FinslerSpace& s, const TangentVector& v, const std::vector<Vec>& xDirs,
                     const std::vector<Vec>& vDirs, bool squared) {
  using T = Nest<K>;
  const int n = s.dim();
  const int nx = static_cast<int>(xDirs.size());
  JetVec<T> x{}, w{};
  for (int i = 0; i < n; ++i) {
    double dx[4] = {0, 0, 0, 0}, dv[4] = {0, 0, 0, 0};
    for (int l = 0; l < K; ++l) {
      if (l < nx) dx[l] = xDirs[l][i];
      else dv[l] = vDirs[l - nx][i];
    }
    x[i] = seeded<T>(v.base[i], dx);
    w[i] = seeded<T>(v.comp[i], dv);
  }
  T f = squared ? s.normSquared<T>(x.data(), w.data()) : s.norm<T>(x.data(), w.data());
  JetValue out;
  out.order = K;
  out.coeff.resize(1u << K);
  for (unsigned m = 0; m < (1u << K); ++m) out.coeff[m] = coefficient(f, m);
  return out;
}

}  // namespace detail

// Derivatives of F^2 (or F) at v, seeded first along xDirs then along vDirs.
inline JetValue evalJet(const FinslerSpace& s, const TangentVector& v, const std::vector<Vec>& xDirs,
                        const std::vector<Vec>& vDirs, int order, bool squared = true) {
  if (order > 4) throw FinslerError(ErrorCode::kOrderExceeded, "jet order above 4");
  if (order < 0 || static_cast<int>(xDirs.size() + vDirs.size()) != order)
    throw FinslerError(ErrorCode::kInvalidArgument, "number of seed directions must equal the order");
  s.requireInDomain(v.base);
  if (v.comp.cwiseAbs().maxCoeff() == 0.0 && !vDirs.empty())
    throw FinslerError(ErrorCode::kDegenerateVector, "jet requested at the zero vector");
  switch (order) {
    case 0: return detail::evalJetImpl<0>(s, v, xDirs, vDirs, squared);
    case 1: return detail::evalJetImpl<1>(s, v, xDirs, vDirs, squared);
    case 2: return detail::evalJetImpl<2>(s, v, xDirs, vDirs, squared);
    case 3: return detail::evalJetImpl<3>(s, v, xDirs, vDirs, squared);
    default: return detail::evalJetImpl<4>(s, v, xDirs, vDirs, squared);
  }
}

inline double evalF(const FinslerSpace& s, const TangentVector& v) {
  s.requireInDomain(v.base);
  return s.F(v.base, v.comp);
}

inline void requireNonzero(const TangentVector& v) {
  if (v.comp.size() == 0 || v.comp.cwiseAbs().maxCoeff() == 0.0)
    throw FinslerError(ErrorCode::kDegenerateVector, "operation undefined at the zero vector");
}

}  // namespace finsler
