#pragma once

// Nested forward-mode dual numbers. Dual<Dual<double>> carries the mixed
// second partial along two seed directions, and so on up to order four.

#include <cmath>
#include <cstddef>
#include <type_traits>

namespace finsler {

template <typename T>
struct Dual {
  T re{};
  T du{};

  constexpr Dual() = default;
  constexpr Dual(double c) : re(c), du(0.0) {}  // NOLINT: constants lift implicitly
  constexpr Dual(const T& r, const T& d) : re(r), du(d) {}

  Dual& operator+=(const Dual& o) {
    re += o.re;
    du += o.du;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    re -= o.re;
    du -= o.du;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    du = du * o.re + re * o.du;
    re *= o.re;
    return *this;
  }
  Dual& operator*=(double c) {
    re *= c;
    du *= c;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    *this = *this / o;
    return *this;
  }
};

template <typename T>
struct is_dual : std::false_type {};
template <typename T>
struct is_dual<Dual<T>> : std::true_type {};

template <int K>
struct NestedDual {
  using type = Dual<typename NestedDual<K - 1>::type>;
};
template <>
struct NestedDual<0> {
  using type = double;
};
template <int K>
using Nest = typename NestedDual<K>::type;

using D1 = Nest<1>;
using D2 = Nest<2>;
using D3 = Nest<3>;
using D4 = Nest<4>;

template <typename T>
struct dual_depth : std::integral_constant<int, 0> {};
template <typename T>
struct dual_depth<Dual<T>> : std::integral_constant<int, 1 + dual_depth<T>::value> {};

// ---- arithmetic

template <typename T>
inline Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  return {a.re + b.re, a.du + b.du};
}
template <typename T>
inline Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  return {a.re - b.re, a.du - b.du};
}
template <typename T>
inline Dual<T> operator-(const Dual<T>& a) {
  return {-a.re, -a.du};
}
template <typename T>
inline Dual<T> operator+(const Dual<T>& a) {
  return a;
}
template <typename T>
inline Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.re * b.re, a.du * b.re + a.re * b.du};
}
template <typename T>
inline Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  T inv = 1.0 / b.re;
  T q = a.re * inv;
  return {q, (a.du - q * b.du) * inv};
}

template <typename T>
inline Dual<T> operator+(const Dual<T>& a, double c) {
  return {a.re + c, a.du};
}
template <typename T>
inline Dual<T> operator+(double c, const Dual<T>& a) {
  return {c + a.re, a.du};
}
template <typename T>
inline Dual<T> operator-(const Dual<T>& a, double c) {
  return {a.re - c, a.du};
}
template <typename T>
inline Dual<T> operator-(double c, const Dual<T>& a) {
  return {c - a.re, -a.du};
}
template <typename T>
inline Dual<T> operator*(const Dual<T>& a, double c) {
  return {a.re * c, a.du * c};
}
template <typename T>
inline Dual<T> operator*(double c, const Dual<T>& a) {
  return {c * a.re, c * a.du};
}
template <typename T>
inline Dual<T> operator/(const Dual<T>& a, double c) {
  double inv = 1.0 / c;
  return {a.re * inv, a.du * inv};
}
template <typename T>
inline Dual<T> operator/(double c, const Dual<T>& b) {
  T inv = 1.0 / b.re;
  T q = c * inv;
  return {q, -(q * b.du) * inv};
}

// comparisons look at the primal value only
template <typename T>
inline double primal(const T& x) {
  if constexpr (std::is_same_v<T, double>) {
    return x;
  } else {
    return primal(x.re);
  }
}

// ---- elementary functions

using std::cos;
using std::exp;
using std::log;
using std::pow;
using std::sin;
using std::sqrt;
using std::tan;

template <typename T>
inline Dual<T> sin(const Dual<T>& a) {
  return {sin(a.re), cos(a.re) * a.du};
}
template <typename T>
inline Dual<T> cos(const Dual<T>& a) {
  return {cos(a.re), -(sin(a.re) * a.du)};
}
template <typename T>
inline Dual<T> tan(const Dual<T>& a) {
  T t = tan(a.re);
  return {t, (1.0 + t * t) * a.du};
}
template <typename T>
inline Dual<T> exp(const Dual<T>& a) {
  T e = exp(a.re);
  return {e, e * a.du};
}
template <typename T>
inline Dual<T> log(const Dual<T>& a) {
  return {log(a.re), a.du / a.re};
}
template <typename T>
inline Dual<T> sqrt(const Dual<T>& a) {
  T s = sqrt(a.re);
  return {s, a.du / (2.0 * s)};
}
// Integer exponents stay valid for negative bases.
template <typename T>
inline Dual<T> pow(const Dual<T>& a, double k) {
  if (k == 0.0) return Dual<T>(1.0);
  return {pow(a.re, k), k * pow(a.re, k - 1.0) * a.du};
}
template <typename T>
inline Dual<T> pow(const Dual<T>& a, const Dual<T>& b) {
  return exp(b * log(a));
}
template <typename T>
inline Dual<T> pow(double c, const Dual<T>& b) {
  return exp(b * std::log(c));
}

// ---- seeding and extraction

// Lifts a constant into T with all infinitesimal parts zero.
template <typename T>
inline T lift(double c) {
  return T(c);
}

// Builds a T whose level-k infinitesimal part carries dirs[k] (k = 0 is the
// innermost level). dirs must hold dual_depth<T> entries.
template <typename T>
inline T seeded(double value, const double* dirs) {
  if constexpr (std::is_same_v<T, double>) {
    return value;
  } else {
    using Inner = decltype(T{}.re);
    constexpr int depth = dual_depth<T>::value;
    return T(seeded<Inner>(value, dirs), Inner(dirs[depth - 1]));
  }
}

// Coefficient selected by a bitmask over levels; bit k picks the
// infinitesimal part at level k.
template <typename T>
inline double coefficient(const T& x, unsigned mask) {
  if constexpr (std::is_same_v<T, double>) {
    return x;
  } else {
    constexpr int depth = dual_depth<T>::value;
    if (mask & (1u << (depth - 1))) return coefficient(x.du, mask & ~(1u << (depth - 1)));
    return coefficient(x.re, mask);
  }
}

// Derivative along every seed direction at once.
template <typename T>
inline double mixedPartial(const T& x) {
  if constexpr (std::is_same_v<T, double>) {
    return x;
  } else {
    return mixedPartial(x.du);
  }
}

// Drops the outermost infinitesimal level.
template <typename T>
inline auto outerValue(const Dual<T>& x) -> T {
  return x.re;
}
template <typename T>
inline auto outerDerivative(const Dual<T>& x) -> T {
  return x.du;
}

}  // namespace finsler
