#pragma once

// First-order forward-mode number used as the tape element type for
// forward-over-reverse Hessian-vector products.

#include <cmath>

namespace isgd::ad {

struct Tangent {
  double v = 0.0;
  double t = 0.0;

  constexpr Tangent() = default;
  constexpr Tangent(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  constexpr Tangent(double value, double tangent) : v(value), t(tangent) {}

  Tangent& operator+=(const Tangent& o) {
    v += o.v;
    t += o.t;
    return *this;
  }
  Tangent& operator-=(const Tangent& o) {
    v -= o.v;
    t -= o.t;
    return *this;
  }
  Tangent& operator*=(const Tangent& o) {
    t = t * o.v + v * o.t;
    v *= o.v;
    return *this;
  }

  friend constexpr Tangent operator-(const Tangent& a) { return {-a.v, -a.t}; }
  friend constexpr Tangent operator+(const Tangent& a, const Tangent& b) {
    return {a.v + b.v, a.t + b.t};
  }
  friend constexpr Tangent operator-(const Tangent& a, const Tangent& b) {
    return {a.v - b.v, a.t - b.t};
  }
  friend constexpr Tangent operator*(const Tangent& a, const Tangent& b) {
    return {a.v * b.v, a.t * b.v + a.v * b.t};
  }
  friend constexpr Tangent operator/(const Tangent& a, const Tangent& b) {
    const double q = a.v / b.v;
    return {q, (a.t - q * b.t) / b.v};
  }
  friend constexpr bool operator>(const Tangent& a, double b) { return a.v > b; }
  friend constexpr bool operator==(const Tangent&, const Tangent&) = default;
};

inline Tangent tanh(const Tangent& x) {
  const double th = std::tanh(x.v);
  return {th, (1.0 - th * th) * x.t};
}

inline Tangent sin(const Tangent& x) { return {std::sin(x.v), std::cos(x.v) * x.t}; }

inline bool isfinite(const Tangent& x) { return std::isfinite(x.v) && std::isfinite(x.t); }

inline double primal(double x) { return x; }
inline double primal(const Tangent& x) { return x.v; }

}  // namespace isgd::ad
