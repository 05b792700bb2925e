#pragma once

#include <functional>
#include <utility>

#include "isgd/autodiff/param_vector.hpp"
#include "isgd/autodiff/tangent.hpp"
#include "isgd/autodiff/tape.hpp"

namespace isgd::ad {

/// A scalar loss recorded on a tape. Built from a generic callable
/// `[](auto& tape) -> Var` so that the same definition serves both plain
/// gradients (Tape<double>) and Hessian-vector products (Tape<Tangent>).
class LossFn {
 public:
  LossFn() = default;

  template <class F>
  explicit LossFn(F f) : f64_(f), tangent_(std::move(f)) {}

  Var operator()(Tape<double>& tape) const { return f64_(tape); }
  Var operator()(Tape<Tangent>& tape) const { return tangent_(tape); }
  explicit operator bool() const { return static_cast<bool>(f64_); }

 private:
  std::function<Var(Tape<double>&)> f64_;
  std::function<Var(Tape<Tangent>&)> tangent_;
};

struct ValueAndGradient {
  double value = 0.0;
  ParamVector gradient;
};

/// Loss value only (forward sweep).
[[nodiscard]] double value(const LossFn& loss, const ParamVector& theta);

/// (L(theta), grad L(theta)); the gradient shares theta's layout.
[[nodiscard]] ValueAndGradient grad(const LossFn& loss, const ParamVector& theta);

/// Hessian-vector product by forward-over-reverse: the reverse sweep runs on
/// tangent numbers seeded with v.
[[nodiscard]] ParamVector hvp(const LossFn& loss, const ParamVector& theta, const ParamVector& v);

}  // namespace isgd::ad
