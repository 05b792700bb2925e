#pragma once

// Second-order forward-mode numbers. Seeding x = (x0, 1, 0) and evaluating f
// yields (f(x0), f'(x0), f''(x0)); arithmetic is the truncated Taylor algebra
// in one direction.

#include <cmath>
#include <ostream>

namespace isgd::ad {

template <class T = double>
struct DualScalar {
  T value{};
  T d1{};
  T d2{};

  constexpr DualScalar() = default;
  constexpr DualScalar(T v) : value(v) {}  // NOLINT(google-explicit-constructor): constants
  constexpr DualScalar(T v, T first, T second) : value(v), d1(first), d2(second) {}

  static constexpr DualScalar variable(T x) { return {x, T(1), T(0)}; }

  DualScalar& operator+=(const DualScalar& o) {
    value += o.value;
    d1 += o.d1;
    d2 += o.d2;
    return *this;
  }
  DualScalar& operator-=(const DualScalar& o) {
    value -= o.value;
    d1 -= o.d1;
    d2 -= o.d2;
    return *this;
  }
  DualScalar& operator*=(const DualScalar& o) { return *this = *this * o; }
  DualScalar& operator/=(const DualScalar& o) { return *this = *this / o; }

  friend constexpr DualScalar operator-(const DualScalar& a) { return {-a.value, -a.d1, -a.d2}; }
  friend constexpr DualScalar operator+(DualScalar a, const DualScalar& b) { return a += b; }
  friend constexpr DualScalar operator-(DualScalar a, const DualScalar& b) { return a -= b; }
  friend constexpr DualScalar operator*(const DualScalar& a, const DualScalar& b) {
    return {a.value * b.value, a.d1 * b.value + a.value * b.d1,
            a.d2 * b.value + T(2) * a.d1 * b.d1 + a.value * b.d2};
  }
  friend constexpr DualScalar operator/(const DualScalar& a, const DualScalar& b) {
    const T u = a.value / b.value;
    const T u1 = (a.d1 - u * b.d1) / b.value;
    const T u2 = (a.d2 - T(2) * u1 * b.d1 - u * b.d2) / b.value;
    return {u, u1, u2};
  }
  friend constexpr bool operator==(const DualScalar&, const DualScalar&) = default;
  friend std::ostream& operator<<(std::ostream& os, const DualScalar& d) {
    return os << '(' << d.value << ", " << d.d1 << ", " << d.d2 << ')';
  }
};

namespace detail {
// g applied to x with g' and g'' known at x.value
template <class T>
constexpr DualScalar<T> chain(const DualScalar<T>& x, T g, T dg, T d2g) {
  return {g, dg * x.d1, d2g * x.d1 * x.d1 + dg * x.d2};
}
}  // namespace detail

template <class T>
DualScalar<T> sin(const DualScalar<T>& x) {
  const T s = std::sin(x.value);
  return detail::chain(x, s, std::cos(x.value), -s);
}

template <class T>
DualScalar<T> cos(const DualScalar<T>& x) {
  const T c = std::cos(x.value);
  return detail::chain(x, c, -std::sin(x.value), -c);
}

template <class T>
DualScalar<T> exp(const DualScalar<T>& x) {
  const T e = std::exp(x.value);
  return detail::chain(x, e, e, e);
}

template <class T>
DualScalar<T> expm1(const DualScalar<T>& x) {
  const T e = std::exp(x.value);
  return detail::chain(x, std::expm1(x.value), e, e);
}

template <class T>
DualScalar<T> tanh(const DualScalar<T>& x) {
  const T t = std::tanh(x.value);
  const T s = T(1) - t * t;
  return detail::chain(x, t, s, T(-2) * t * s);
}

template <class T>
DualScalar<T> sqrt(const DualScalar<T>& x) {
  const T r = std::sqrt(x.value);
  return detail::chain(x, r, T(0.5) / r, T(-0.25) / (r * x.value));
}

/// ReLU has no second derivative at the kink; elsewhere it is zero. Callers
/// needing second input derivatives must reject ReLU networks up front.
template <class T>
DualScalar<T> relu(const DualScalar<T>& x) {
  return x.value > T(0) ? DualScalar<T>{x.value, x.d1, T(0)} : DualScalar<T>{};
}

template <class T>
bool isfinite(const DualScalar<T>& x) {
  return std::isfinite(x.value) && std::isfinite(x.d1) && std::isfinite(x.d2);
}

}  // namespace isgd::ad
