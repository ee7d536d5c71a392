#pragma once

// Type-erased scalar and vector fields on a chart. A field is built from a
// generic callable and keeps one instantiation per jet level, so calculus
// operators can differentiate through it exactly.

#include <functional>
#include <memory>
#include <string>
#include <tuple>
#include <utility>

#include "finsler/dual.hpp"
#include "finsler/errors.hpp"
#include "finsler/expression.hpp"
#include "finsler/linalg.hpp"
#include "finsler/space.hpp"

namespace finsler {

namespace detail {

template <typename R, typename T>
std::function<R(const JetVec<T>&)> orderGuard(int level) {
  return [level](const JetVec<T>&) -> R {
    throw FinslerError(ErrorCode::kOrderExceeded, "field evaluated at jet level " + std::to_string(level) +
                                                      " beyond its differentiability");
  };
}

}  // namespace detail

class ScalarField {
 public:
  ScalarField() = default;

  // fn must accept const JetVec<T>& for T = Nest<0..MaxLevel> and return T.
  template <int MaxLevel = 4, typename Fn>
  static ScalarField fromGeneric(Fn fn) {
    ScalarField f;
    f.maxLevel_ = MaxLevel;
    f.assign<0, MaxLevel>(fn);
    f.assign<1, MaxLevel>(fn);
    f.assign<2, MaxLevel>(fn);
    f.assign<3, MaxLevel>(fn);
    f.assign<4, MaxLevel>(fn);
    return f;
  }

  static ScalarField fromExpression(const Expression& e) {
    return fromGeneric<4>([e](const auto& x) {
      using T = std::decay_t<decltype(x[0])>;
      return e.eval<T>(x.data(), nullptr);
    });
  }

  static ScalarField fromText(const std::string& text, int dim) {
    return fromExpression(Expression::parse(text, dim, false));
  }

  template <typename T>
  T eval(const JetVec<T>& x) const {
    return std::get<std::function<T(const JetVec<T>&)>>(fns_)(x);
  }

  double operator()(const Vec& x) const { return eval<double>(toJet<double>(x)); }
  int maxLevel() const { return maxLevel_; }
  bool valid() const { return static_cast<bool>(std::get<0>(fns_)); }

 private:
  template <int L, int MaxLevel, typename Fn>
  void assign(const Fn& fn) {
    using T = Nest<L>;
    auto& slot = std::get<L>(fns_);
    if constexpr (L <= MaxLevel) {
      slot = [fn](const JetVec<T>& x) -> T { return fn(x); };
    } else {
      slot = detail::orderGuard<T, T>(L);
    }
  }

  std::tuple<std::function<double(const JetVec<double>&)>, std::function<D1(const JetVec<D1>&)>,
             std::function<D2(const JetVec<D2>&)>, std::function<D3(const JetVec<D3>&)>,
             std::function<D4(const JetVec<D4>&)>>
      fns_;
  int maxLevel_ = -1;
};

class VectorField {
 public:
  VectorField() = default;

  template <int MaxLevel = 4, typename Fn>
  static VectorField fromGeneric(int dim, Fn fn) {
    VectorField f;
    f.dim_ = dim;
    f.maxLevel_ = MaxLevel;
    f.assign<0, MaxLevel>(fn);
    f.assign<1, MaxLevel>(fn);
    f.assign<2, MaxLevel>(fn);
    f.assign<3, MaxLevel>(fn);
    f.assign<4, MaxLevel>(fn);
    return f;
  }

  static VectorField fromExpressions(const std::vector<Expression>& es) {
    const int n = static_cast<int>(es.size());
    return fromGeneric<4>(n, [es, n](const auto& x) {
      using T = std::decay_t<decltype(x[0])>;
      JetVec<T> out{};
      for (int i = 0; i < n; ++i) out[i] = es[i].eval<T>(x.data(), nullptr);
      return out;
    });
  }

  static VectorField fromTexts(const std::vector<std::string>& texts, int dim) {
    std::vector<Expression> es;
    for (const auto& t : texts) es.push_back(Expression::parse(t, dim, false));
    return fromExpressions(es);
  }

  template <typename T>
  JetVec<T> eval(const JetVec<T>& x) const {
    return std::get<std::function<JetVec<T>(const JetVec<T>&)>>(fns_)(x);
  }

  Vec operator()(const Vec& x) const { return primalVec(eval<double>(toJet<double>(x)), dim_); }
  int dim() const { return dim_; }
  int maxLevel() const { return maxLevel_; }

 private:
  template <int L, int MaxLevel, typename Fn>
  void assign(const Fn& fn) {
    using T = Nest<L>;
    auto& slot = std::get<L>(fns_);
    if constexpr (L <= MaxLevel) {
      slot = [fn](const JetVec<T>& x) -> JetVec<T> { return fn(x); };
    } else {
      slot = detail::orderGuard<JetVec<T>, T>(L);
    }
  }

  std::tuple<std::function<JetVec<double>(const JetVec<double>&)>, std::function<JetVec<D1>(const JetVec<D1>&)>,
             std::function<JetVec<D2>(const JetVec<D2>&)>, std::function<JetVec<D3>(const JetVec<D3>&)>,
             std::function<JetVec<D4>(const JetVec<D4>&)>>
      fns_;
  int dim_ = 0;
  int maxLevel_ = -1;
};

// Smooth bump prod_i (1 - s_i^2)^p with s_i = (x_i - c_i) / r_i, supported
// in the box c +- r.
struct TestFunction {
  Vec center;
  Vec halfWidth;
  int power = 4;

  Box support() const { return Box{center - halfWidth, center + halfWidth}; }

  double value(const Vec& x) const {
    double p = 1.0;
    for (int i = 0; i < center.size(); ++i) {
      const double s = (x[i] - center[i]) / halfWidth[i];
      if (std::abs(s) >= 1.0) return 0.0;
      p *= std::pow(1.0 - s * s, power);
    }
    return p;
  }

  Vec gradient(const Vec& x) const {
    const int n = static_cast<int>(center.size());
    Vec g = Vec::Zero(n);
    Vec f(n), df(n);
    for (int i = 0; i < n; ++i) {
      const double s = (x[i] - center[i]) / halfWidth[i];
      if (std::abs(s) >= 1.0) return g;
      f[i] = std::pow(1.0 - s * s, power);
      df[i] = power * std::pow(1.0 - s * s, power - 1) * (-2.0 * s / halfWidth[i]);
    }
    for (int i = 0; i < n; ++i) {
      double p = df[i];
      for (int k = 0; k < n; ++k)
        if (k != i) p *= f[k];
      g[i] = p;
    }
    return g;
  }
};

}  // namespace finsler
