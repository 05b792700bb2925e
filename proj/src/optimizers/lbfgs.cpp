#include <algorithm>
#include <cmath>
#include <deque>

#include "isgd/optimizers/optimizers.hpp"

namespace isgd::opt {

namespace {

struct Trial {
  double a = 0.0;
  double f = 0.0;
  double dphi = 0.0;
  ParamVector x;
  ParamVector g;
  bool finite = true;
};

// Relative size below which differences in f are treated as rounding noise.
constexpr double kValueNoise = 1e-12;

class LineSearch {
 public:
  LineSearch(const GradFn& f, const ParamVector& x, double f0, const ParamVector& d, double dphi0,
             const LbfgsOptions& opt)
      : f_(f), x_(x), f0_(f0), d_(d), dphi0_(dphi0), opt_(opt) {}

  std::size_t evaluations() const { return evals_; }

  /// Returns a point satisfying the strong Wolfe conditions, or at least
  /// sufficient decrease; nullopt when no decrease was found at all.
  std::optional<Trial> run(double a0) {
    Trial prev;
    prev.a = 0.0;
    prev.f = f0_;
    prev.dphi = dphi0_;
    double a = a0;
    for (std::size_t i = 0; i < opt_.max_line_search; ++i) {
      Trial t = eval(a);
      if (approx_wolfe(t)) return t;
      if (!t.finite || t.f > f0_ + opt_.c1 * a * dphi0_ || (i > 0 && t.f >= prev.f)) {
        return zoom(prev, t);
      }
      if (std::abs(t.dphi) <= -opt_.c2 * dphi0_) return t;
      if (t.dphi >= 0.0) return zoom(t, prev);
      prev = std::move(t);
      a *= 2.0;
    }
    return prev.a > 0.0 ? std::optional<Trial>(std::move(prev)) : std::nullopt;
  }

 private:
  Trial eval(double a) {
    Trial t;
    t.a = a;
    t.x = x_;
    t.x.axpy(a, d_);
    ++evals_;
    try {
      ValueAndGradient vg = f_(t.x);
      t.f = vg.value;
      t.g = std::move(vg.gradient);
      t.finite = std::isfinite(t.f) && t.g.all_finite();
      if (t.finite) t.dphi = t.g.dot(d_);
    } catch (const ad::NonFiniteError&) {
      t.finite = false;
    }
    if (!t.finite) t.f = std::numeric_limits<double>::infinity();
    return t;
  }

  // Near a minimizer the Armijo test drowns in rounding; accept a point with
  // strong curvature whose value is within noise of f0 (approximate Wolfe).
  bool approx_wolfe(const Trial& t) const {
    return t.finite && std::abs(t.dphi) <= -opt_.c2 * dphi0_ &&
           t.f <= f0_ + kValueNoise * std::abs(f0_);
  }

  static double interpolate(const Trial& lo, const Trial& hi) {
    const double lo_a = lo.a;
    const double hi_a = hi.a;
    const double width = hi_a - lo_a;
    double a = 0.5 * (lo_a + hi_a);
    if (hi.finite) {
      const double d1 = lo.dphi + hi.dphi - 3.0 * (lo.f - hi.f) / (lo_a - hi_a);
      const double disc = d1 * d1 - lo.dphi * hi.dphi;
      if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), width);
        const double c = hi_a - width * (hi.dphi + d2 - d1) / (hi.dphi - lo.dphi + 2.0 * d2);
        if (std::isfinite(c)) a = c;
      }
    }
    // keep away from the bracket ends
    const double lo_b = std::min(lo_a, hi_a) + 0.1 * std::abs(width);
    const double hi_b = std::max(lo_a, hi_a) - 0.1 * std::abs(width);
    if (!(a >= lo_b && a <= hi_b)) a = 0.5 * (lo_a + hi_a);
    return a;
  }

  std::optional<Trial> zoom(Trial lo, Trial hi) {
    for (std::size_t j = 0; j < opt_.max_line_search; ++j) {
      if (std::abs(hi.a - lo.a) <= 1e-16 * std::max(1.0, std::abs(lo.a))) break;
      Trial t = eval(interpolate(lo, hi));
      if (approx_wolfe(t)) return t;
      if (!t.finite || t.f > f0_ + opt_.c1 * t.a * dphi0_ || t.f >= lo.f) {
        hi = std::move(t);
        continue;
      }
      if (std::abs(t.dphi) <= -opt_.c2 * dphi0_) return t;
      if (t.dphi * (hi.a - lo.a) >= 0.0) hi = std::move(lo);
      lo = std::move(t);
    }
    // lo always satisfies sufficient decrease; accept it if it moved.
    if (lo.a > 0.0 && lo.f < f0_) return lo;
    return std::nullopt;
  }

  const GradFn& f_;
  const ParamVector& x_;
  double f0_;
  const ParamVector& d_;
  double dphi0_;
  const LbfgsOptions& opt_;
  std::size_t evals_ = 0;
};

struct Pair {
  ParamVector s;
  ParamVector y;
  double rho;
};

ParamVector two_loop(const ParamVector& g, const std::deque<Pair>& hist) {
  ParamVector q = g;
  std::vector<double> alpha(hist.size());
  for (std::size_t i = hist.size(); i-- > 0;) {
    alpha[i] = hist[i].rho * hist[i].s.dot(q);
    q.axpy(-alpha[i], hist[i].y);
  }
  if (!hist.empty()) {
    const Pair& last = hist.back();
    q *= last.s.dot(last.y) / last.y.dot(last.y);
  }
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double beta = hist[i].rho * hist[i].y.dot(q);
    q.axpy(alpha[i] - beta, hist[i].s);
  }
  q *= -1.0;
  return q;
}

}  // namespace

LbfgsResult lbfgs_minimize(const GradFn& f, const ParamVector& theta0,
                           const LbfgsOptions& options) {
  LbfgsResult res;
  res.theta = theta0;
  ParamVector x = theta0;
  ValueAndGradient vg;
  try {
    vg = f(x);
  } catch (const ad::NonFiniteError&) {
    res.non_finite = true;
    res.value = std::numeric_limits<double>::quiet_NaN();
    res.evaluations = 1;
    return res;
  }
  res.evaluations = 1;
  double fx = vg.value;
  ParamVector g = std::move(vg.gradient);
  if (!std::isfinite(fx) || !g.all_finite()) {
    res.non_finite = true;
    res.value = fx;
    return res;
  }
  res.value = fx;
  res.grad_norm = g.norm();
  if (options.on_iteration) options.on_iteration(0, fx, res.grad_norm, x);

  std::deque<Pair> hist;
  for (std::size_t it = 0; it < options.max_iters; ++it) {
    const double gn = g.norm();
    if (gn < options.tolerance) break;

    ParamVector d = two_loop(g, hist);
    double dphi = d.dot(g);
    if (!(dphi < 0.0)) {
      hist.clear();
      d = -1.0 * g;
      dphi = -gn * gn;
    }
    const double a0 = hist.empty() ? std::min(1.0, 1.0 / gn) : 1.0;
    LineSearch ls(f, x, fx, d, dphi, options);
    std::optional<Trial> t = ls.run(a0);
    res.evaluations += ls.evaluations();
    if (!t && !hist.empty()) {
      // stale curvature; retry once along steepest descent
      hist.clear();
      d = -1.0 * g;
      dphi = -gn * gn;
      LineSearch retry(f, x, fx, d, dphi, options);
      t = retry.run(std::min(1.0, 1.0 / gn));
      res.evaluations += retry.evaluations();
    }
    if (!t) {
      res.line_search_failed = true;
      break;
    }

    ParamVector s = t->x - x;
    ParamVector y = t->g - g;
    const double sy = s.dot(y);
    if (sy > 0.0) {
      hist.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (hist.size() > options.history) hist.pop_front();
    }
    x = std::move(t->x);
    fx = t->f;
    g = std::move(t->g);
    ++res.iterations;
    const double new_norm = g.norm();
    if (fx <= res.value + kValueNoise * std::abs(res.value)) {
      res.theta = x;
      res.value = fx;
      res.grad_norm = new_norm;
    }
    if (options.on_iteration) options.on_iteration(res.iterations, fx, new_norm, x);
  }
  res.converged = res.grad_norm < options.tolerance;
  return res;
}

}  // namespace isgd::opt
