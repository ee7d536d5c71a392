#pragma once

#include <cstdint>
#include <random>

#include "finsler/space.hpp"

namespace finsler {

// Seeded uniform sampler. The conversion from raw bits is done by hand so
// the stream does not depend on the standard library's distributions.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  Vec pointIn(const Box& b) {
    Vec x(b.dim());
    for (int i = 0; i < b.dim(); ++i) x[i] = uniform(b.lower[i], b.upper[i]);
    return x;
  }

  Vec cube(int n, double r = 1.0) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(-r, r);
    return v;
  }

  // Nonzero vector at x, rejecting anything within eps (in F units) of 0.
  Vec vectorAt(const FinslerSpace& s, const Vec& x, double eps = 1e-8) {
    for (;;) {
      Vec v = cube(s.dim());
      if (s.F(x, v) > eps) return v;
    }
  }

  Vec unitVectorAt(const FinslerSpace& s, const Vec& x) {
    Vec v = vectorAt(s, x, 1e-3);
    return v / s.F(x, v);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace finsler
