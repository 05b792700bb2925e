#include "isgd/optimizers/optimizers.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "isgd/simd/kernels.hpp"

namespace isgd::opt {

Objective Objective::deterministic(LossFn loss) {
  Objective o;
  o.full = loss;
  o.loss_at = [loss](std::uint64_t) { return loss; };
  return o;
}

NonFiniteGradient::NonFiniteGradient(std::uint64_t iteration)
    : std::runtime_error("non-finite gradient at iteration " + std::to_string(iteration)),
      iteration_(iteration) {}

ParamVector gd_step(const ParamVector& theta, const ParamVector& grad, double alpha,
                    std::uint64_t iteration) {
  theta.require_same_layout(grad);
  if (!grad.all_finite()) throw NonFiniteGradient(iteration);
  ParamVector out = theta;
  out.axpy(-alpha, grad);
  return out;
}

AdamState::AdamState(const ParamVector& like, double learning_rate)
    : lr(learning_rate), m(like.zeros_like()), v(like.zeros_like()) {}

void adam_step(AdamState& state, ParamVector& theta, const ParamVector& grad) {
  theta.require_same_layout(grad);
  theta.require_same_layout(state.m);
  if (!grad.all_finite()) throw NonFiniteGradient(state.step);
  ++state.step;
  const double t = static_cast<double>(state.step);
  simd::AdamCoefficients c{};
  c.beta1 = state.beta1;
  c.beta2 = state.beta2;
  c.eps = state.eps;
  c.step = state.lr / (1.0 - std::pow(state.beta1, t));
  c.inv_bias2 = 1.0 / (1.0 - std::pow(state.beta2, t));
  simd::kernels().adam_update(theta.values().data(), state.m.values().data(),
                              state.v.values().data(), grad.values().data(), theta.size(), c);
}

std::array<double, 2> igd_exact_quadratic(double k1, double k2, std::array<double, 2> theta,
                                          std::array<double, 2> theta_star, double alpha) {
  return {theta_star[0] + (theta[0] - theta_star[0]) / (1.0 + alpha * k1),
          theta_star[1] + (theta[1] - theta_star[1]) / (1.0 + alpha * k2)};
}

// ---------------------------------------------------------------------------

std::string to_string(Phase p) { return p == Phase::isgd ? "isgd" : "tail"; }

void TrainingTrace::push(const TraceRecord& r) {
  records.push_back(r);
  if (sink) sink(r);
}

void write_trace_header(std::ostream& os) {
  os << "iteration,phase,loss,grad_norm,rel_l2_error,elapsed_seconds\n";
}

void write_trace_row(std::ostream& os, const TraceRecord& r) {
  const auto old = os.precision(17);
  os << r.iteration << ',' << to_string(r.phase) << ',' << r.loss << ',' << r.grad_norm << ',';
  if (!std::isnan(r.rel_l2_error)) os << r.rel_l2_error;
  os.precision(6);
  os << ',' << r.elapsed_seconds << '\n';
  os.precision(old);
}

void write_trace_csv(std::ostream& os, const TrainingTrace& trace) {
  write_trace_header(os);
  for (const auto& r : trace.records) write_trace_row(os, r);
}

void write_prox_csv(std::ostream& os, const TrainingTrace& trace) {
  const auto old = os.precision(17);
  os << "outer,loss,grad_norm,prox_residual,inner_iterations\n";
  for (const auto& p : trace.prox) {
    os << p.outer << ',' << p.loss << ',' << p.grad_norm << ',' << p.prox_residual << ','
       << p.inner_iterations << '\n';
  }
  os.precision(old);
}

std::vector<TraceRecord> read_trace_csv(std::istream& is) {
  std::vector<TraceRecord> out;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty trace file");
  if (line.rfind("iteration,phase,loss", 0) != 0) throw std::runtime_error("not a trace file");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[6];
    for (auto& s : f) std::getline(ss, s, ',');
    TraceRecord r;
    // strtod rather than stod: stod rejects subnormals with out_of_range
    auto number = [](const std::string& s) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size()) throw std::runtime_error("bad number");
      return v;
    };
    try {
      r.iteration = std::stoull(f[0]);
      if (f[1] != "isgd" && f[1] != "tail") throw std::runtime_error("bad phase");
      r.phase = f[1] == "isgd" ? Phase::isgd : Phase::tail;
      r.loss = number(f[2]);
      r.grad_norm = number(f[3]);
      if (!f[4].empty()) r.rel_l2_error = number(f[4]);
      r.elapsed_seconds = f[5].empty() ? 0.0 : number(f[5]);
    } catch (const std::exception&) {
      throw std::runtime_error("malformed trace row: " + line);
    }
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::lbfgs: return "lbfgs";
    case OptimizerKind::isgd: return "isgd";
  }
  return "?";
}

std::string to_string(SolverKind k) {
  switch (k) {
    case SolverKind::adam: return "adam";
    case SolverKind::lbfgs: return "lbfgs";
    case SolverKind::sgd: return "sgd";
    case SolverKind::none: return "none";
  }
  return "?";
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sgd" || s == "gd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  if (s == "lbfgs") return OptimizerKind::lbfgs;
  if (s == "isgd") return OptimizerKind::isgd;
  throw OptimizerConfigError("unknown optimizer '" + s + "' (expected sgd, adam, lbfgs or isgd)");
}

SolverKind solver_kind_from_string(const std::string& s) {
  if (s == "adam") return SolverKind::adam;
  if (s == "lbfgs") return SolverKind::lbfgs;
  if (s == "sgd" || s == "gd") return SolverKind::sgd;
  if (s == "none") return SolverKind::none;
  throw OptimizerConfigError("unknown solver '" + s + "' (expected adam, lbfgs, sgd or none)");
}

void IsgdConfig::validate() const {
  if (!(alpha > 0.0)) throw OptimizerConfigError("isgd alpha must be positive");
  if (k0 > 0) {
    if (inner.kind == SolverKind::none) throw OptimizerConfigError("isgd needs an inner solver");
    if (inner.iterations < 1) throw OptimizerConfigError("isgd inner iterations K1 must be >= 1");
    if (inner.kind != SolverKind::lbfgs && !(inner.lr > 0.0)) {
      throw OptimizerConfigError("isgd inner learning rate must be positive");
    }
  }
  if (tail.kind != SolverKind::none && tail.kind != SolverKind::lbfgs && tail.iterations > 0 &&
      !(tail.lr > 0.0)) {
    throw OptimizerConfigError("tail learning rate must be positive");
  }
  if (inner_tolerance && *inner_tolerance < 0.0) {
    throw OptimizerConfigError("inner_tolerance must be >= 0");
  }
}

// ---------------------------------------------------------------------------

namespace {

bool diverging(double loss) { return !std::isfinite(loss) || loss > kDivergenceThreshold; }

class Runner {
 public:
  Runner(const Objective& objective, const Monitor& monitor,
         std::function<void(const TraceRecord&)> sink)
      : objective_(objective), monitor_(monitor), start_(std::chrono::steady_clock::now()) {
    trace.sink = std::move(sink);
  }

  TrainingTrace trace;

  /// Gradient of `loss` at theta; nullopt (and the trace flagged) on
  /// non-finite intermediate values.
  std::optional<ValueAndGradient> gradient(const LossFn& loss, const ParamVector& theta) {
    try {
      return ad::grad(loss, theta);
    } catch (const ad::NonFiniteError& e) {
      fail(std::string("non-finite value during evaluation: ") + e.what());
      return std::nullopt;
    }
  }

  void record(std::uint64_t it, Phase phase, double loss, double grad_norm,
              const ParamVector& theta, bool force_error = false) {
    TraceRecord r;
    r.iteration = it;
    r.phase = phase;
    r.loss = loss;
    r.grad_norm = grad_norm;
    if (monitor_.error_fn && monitor_.error_every > 0 &&
        (force_error || trace.records.size() % monitor_.error_every == 0)) {
      r.rel_l2_error = monitor_.error_fn(theta);
    }
    r.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    trace.push(r);
  }

  /// Checks a freshly recorded loss; returns true (and flags) on divergence.
  bool check(double loss, const ValueAndGradient& vg, std::uint64_t it) {
    if (diverging(loss) || !vg.gradient.all_finite()) {
      fail("diverged at iteration " + std::to_string(it) + " (loss " + std::to_string(loss) + ")");
      return true;
    }
    return false;
  }

  void fail(const std::string& why) {
    trace.diverged = true;
    if (trace.diagnostic.empty()) trace.diagnostic = why;
  }

  /// `steps` iterations of sgd/adam/lbfgs on the per-step objective starting
  /// at global iteration `start`. Records the state before every step; the
  /// state after the last step is recorded only when `final_record`.
  ParamVector run_plain(ParamVector theta, const SolverSpec& spec, std::uint64_t start,
                        bool final_record, Phase phase) {
    if (spec.kind == SolverKind::none || spec.iterations == 0) return theta;
    if (spec.kind == SolverKind::lbfgs) return run_lbfgs(std::move(theta), spec, start, phase);

    AdamState adam(theta, spec.lr);
    for (std::size_t k = 0; k < spec.iterations; ++k) {
      const std::uint64_t it = start + k;
      auto vg = gradient(objective_.loss_at(it), theta);
      if (!vg) return theta;
      record(it, phase, vg->value, vg->gradient.norm(), theta);
      if (check(vg->value, *vg, it)) return theta;
      if (spec.kind == SolverKind::adam) {
        adam_step(adam, theta, vg->gradient);
      } else {
        theta.axpy(-spec.lr, vg->gradient);
      }
    }
    if (final_record) record_final(theta, start + spec.iterations, phase);
    return theta;
  }

  void record_final(const ParamVector& theta, std::uint64_t it, Phase phase) {
    auto vg = gradient(objective_.full, theta);
    if (!vg) return;
    record(it, phase, vg->value, vg->gradient.norm(), theta, true);
    check(vg->value, *vg, it);
  }

 private:
  ParamVector run_lbfgs(ParamVector theta, const SolverSpec& spec, std::uint64_t start,
                        Phase phase) {
    const LossFn loss = objective_.full;
    GradFn f = [&loss](const ParamVector& x) { return ad::grad(loss, x); };
    LbfgsOptions opt;
    opt.max_iters = spec.iterations;
    opt.tolerance = 0.0;
    opt.on_iteration = [&](std::size_t k, double value, double gnorm, const ParamVector& x) {
      record(start + k, phase, value, gnorm, x, k == spec.iterations);
    };
    LbfgsResult res = lbfgs_minimize(f, theta, opt);
    if (res.non_finite) fail("non-finite loss at the L-BFGS starting point");
    if (diverging(res.value)) fail("L-BFGS loss above the divergence threshold");
    if (res.line_search_failed && trace.diagnostic.empty()) {
      trace.diagnostic = "L-BFGS line search failed after " + std::to_string(res.iterations) +
                         " iterations";
    }
    return res.theta;
  }

  const Objective& objective_;
  const Monitor& monitor_;
  std::chrono::steady_clock::time_point start_;
};

SolverSpec plain_solver(const OptimizerSpec& spec) {
  switch (spec.kind) {
    case OptimizerKind::sgd: return {SolverKind::sgd, spec.lr, spec.iterations};
    case OptimizerKind::adam: return {SolverKind::adam, spec.lr, spec.iterations};
    case OptimizerKind::lbfgs: return {SolverKind::lbfgs, spec.lr, spec.iterations};
    case OptimizerKind::isgd: break;
  }
  throw OptimizerConfigError("not a plain optimizer");
}

}  // namespace

TrainResult isgd_run(const Objective& objective, const ParamVector& theta0,
                     const IsgdConfig& config, const Monitor& monitor,
                     std::function<void(const TraceRecord&)> sink) {
  config.validate();
  Runner run(objective, monitor, std::move(sink));
  ParamVector theta = theta0;
  const double alpha = config.alpha;
  std::optional<ValueAndGradient> cached;  // grad L(theta_n) from the previous prox check

  for (std::size_t n = 0; n < config.k0; ++n) {
    const LossFn loss = objective.loss_at(n);  // frozen for the whole inner solve
    std::optional<ValueAndGradient> at_n = std::move(cached);
    cached.reset();
    if (!at_n) at_n = run.gradient(loss, theta);
    if (!at_n) return {theta, std::move(run.trace)};
    run.record(n, Phase::isgd, at_n->value, at_n->gradient.norm(), theta);
    if (run.check(at_n->value, *at_n, n)) return {theta, std::move(run.trace)};

    const double tol =
        config.inner_tolerance ? *config.inner_tolerance : 1e-8 * (1.0 + theta.norm());
    const ParamVector anchor = theta;
    bool inner_failed = false;
    // grad G(t) = (t - theta_n) + alpha grad L(t)
    GradFn prox = [&](const ParamVector& t) {
      ValueAndGradient vg = ad::grad(loss, t);
      ParamVector diff = t - anchor;
      ValueAndGradient g;
      g.value = 0.5 * diff.dot(diff) + alpha * vg.value;
      g.gradient = std::move(diff);
      g.gradient.axpy(alpha, vg.gradient);
      return g;
    };

    ParamVector next = theta;
    std::size_t inner_its = 0;
    if (config.inner.kind == SolverKind::lbfgs) {
      LbfgsOptions opt;
      opt.max_iters = config.inner.iterations;
      opt.tolerance = tol;
      LbfgsResult res = lbfgs_minimize(prox, theta, opt);
      inner_failed = res.non_finite;
      next = std::move(res.theta);
      inner_its = res.iterations;
    } else {
      AdamState adam(theta, config.inner.lr);
      try {
        for (; inner_its < config.inner.iterations; ++inner_its) {
          const ValueAndGradient g = prox(next);
          if (!std::isfinite(g.value) || !g.gradient.all_finite()) {
            inner_failed = true;
            break;
          }
          if (tol > 0.0 && g.gradient.norm() < tol) break;
          if (config.inner.kind == SolverKind::adam) {
            adam_step(adam, next, g.gradient);
          } else {
            next.axpy(-config.inner.lr, g.gradient);
          }
        }
      } catch (const ad::NonFiniteError&) {
        inner_failed = true;
      }
    }
    if (inner_failed || !next.all_finite()) {
      run.fail("inner solve diverged at outer iteration " + std::to_string(n));
      return {theta, std::move(run.trace)};
    }

    auto at_next = run.gradient(loss, next);
    if (!at_next) return {theta, std::move(run.trace)};
    ParamVector residual = next - theta;
    residual.axpy(alpha, at_next->gradient);
    run.trace.prox.push_back(
        {n, at_n->value, at_n->gradient.norm(), residual.norm(), inner_its});
    theta = std::move(next);
    if (!objective.stochastic) cached = std::move(at_next);
  }

  const Phase last = config.tail.kind != SolverKind::none && config.tail.iterations > 0
                         ? Phase::tail
                         : Phase::isgd;
  theta = run.run_plain(std::move(theta), config.tail, config.k0, false, Phase::tail);
  const bool lbfgs_tail = last == Phase::tail && config.tail.kind == SolverKind::lbfgs;
  if (!run.trace.diverged && !lbfgs_tail && (config.k0 > 0 || last == Phase::tail)) {
    const std::uint64_t end = config.k0 + (last == Phase::tail ? config.tail.iterations : 0);
    run.record_final(theta, end, last);
  }
  return {theta, std::move(run.trace)};
}

TrainResult train(const Objective& objective, const ParamVector& theta0, const OptimizerSpec& spec,
                  const Monitor& monitor, std::function<void(const TraceRecord&)> sink) {
  if (spec.kind == OptimizerKind::isgd) {
    return isgd_run(objective, theta0, spec.isgd, monitor, std::move(sink));
  }
  const SolverSpec solver = plain_solver(spec);
  if (solver.kind != SolverKind::lbfgs && !(solver.lr > 0.0)) {
    throw OptimizerConfigError("learning rate must be positive");
  }
  Runner run(objective, monitor, std::move(sink));
  ParamVector theta = run.run_plain(theta0, solver, 0, true, Phase::tail);
  return {theta, std::move(run.trace)};
}

}  // namespace isgd::opt
