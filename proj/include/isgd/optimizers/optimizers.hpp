#pragma once

// GD/SGD, Adam, L-BFGS, the closed-form implicit step for the stiff
// quadratic, and the proximal ISGD loop with an inner solver and a tail
// phase. Every driver records a TrainingTrace.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isgd/autodiff/derivatives.hpp"
#include "isgd/autodiff/param_vector.hpp"

namespace isgd::opt {

using ad::LossFn;
using ad::ParamVector;
using ad::ValueAndGradient;

using GradFn = std::function<ValueAndGradient(const ParamVector&)>;

/// What the optimizers minimize: a loss per stochastic step (the step index
/// picks the batch) and the full-data loss for reporting.
struct Objective {
  std::function<LossFn(std::uint64_t step)> loss_at;
  LossFn full;
  bool stochastic = false;

  static Objective deterministic(LossFn loss);
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(std::uint64_t iteration);
  [[nodiscard]] std::uint64_t iteration() const { return iteration_; }

 private:
  std::uint64_t iteration_;
};

class OptimizerConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Single steps

/// theta - alpha * grad. Throws NonFiniteGradient(iteration) on NaN/inf.
[[nodiscard]] ParamVector gd_step(const ParamVector& theta, const ParamVector& grad, double alpha,
                                  std::uint64_t iteration = 0);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  ParamVector m;
  ParamVector v;

  AdamState() = default;
  AdamState(const ParamVector& like, double learning_rate);
};

/// Bias-corrected Adam; updates state and theta in place.
void adam_step(AdamState& state, ParamVector& theta, const ParamVector& grad);

/// Closed-form implicit step on K1/2 d1^2 + K2/2 d2^2:
/// theta'_i - theta*_i = (theta_i - theta*_i) / (1 + alpha K_i).
[[nodiscard]] std::array<double, 2> igd_exact_quadratic(double k1, double k2,
                                                        std::array<double, 2> theta,
                                                        std::array<double, 2> theta_star,
                                                        double alpha);

// ---------------------------------------------------------------------------
// L-BFGS

struct LbfgsOptions {
  std::size_t max_iters = 1000;
  double tolerance = 1e-8;  // on the gradient norm
  std::size_t history = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  std::size_t max_line_search = 40;
  /// Called with (0, f0, |g0|, x0) and then after each accepted iteration.
  std::function<void(std::size_t, double, double, const ParamVector&)> on_iteration;
};

struct LbfgsResult {
  ParamVector theta;  // best point seen
  double value = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  bool line_search_failed = false;
  bool non_finite = false;
};

/// Two-loop recursion with a strong-Wolfe line search. Never throws on a
/// failed search or non-finite trial point; those are reported by flag.
[[nodiscard]] LbfgsResult lbfgs_minimize(const GradFn& f, const ParamVector& theta0,
                                         const LbfgsOptions& options = {});

// ---------------------------------------------------------------------------
// Traces

enum class Phase { isgd, tail };
std::string to_string(Phase p);

struct TraceRecord {
  std::uint64_t iteration = 0;
  Phase phase = Phase::tail;
  double loss = 0.0;
  double grad_norm = 0.0;
  double rel_l2_error = std::numeric_limits<double>::quiet_NaN();  // NaN = not evaluated
  double elapsed_seconds = 0.0;
};

/// Per outer ISGD iteration n: theta_n's loss and gradient norm and the
/// implicit-equation residual ||theta_{n+1} - theta_n + alpha grad L(theta_{n+1})||.
struct ProxRecord {
  std::uint64_t outer = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double prox_residual = 0.0;
  std::size_t inner_iterations = 0;
};

struct TrainingTrace {
  std::vector<TraceRecord> records;
  std::vector<ProxRecord> prox;
  bool diverged = false;
  std::string diagnostic;
  /// Streaming hook, called once per record as it is produced.
  std::function<void(const TraceRecord&)> sink;

  void push(const TraceRecord& r);
};

/// iteration,phase,loss,grad_norm,rel_l2_error,elapsed_seconds
void write_trace_header(std::ostream& os);
void write_trace_row(std::ostream& os, const TraceRecord& r);
void write_trace_csv(std::ostream& os, const TrainingTrace& trace);
void write_prox_csv(std::ostream& os, const TrainingTrace& trace);

/// Reads a trace CSV written by write_trace_csv.
std::vector<TraceRecord> read_trace_csv(std::istream& is);

// ---------------------------------------------------------------------------
// Drivers

enum class OptimizerKind { sgd, adam, lbfgs, isgd };
enum class SolverKind { adam, lbfgs, sgd, none };
std::string to_string(OptimizerKind k);
std::string to_string(SolverKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);
SolverKind solver_kind_from_string(const std::string& s);

struct SolverSpec {
  SolverKind kind = SolverKind::adam;
  double lr = 1e-3;
  std::size_t iterations = 0;
  friend bool operator==(const SolverSpec&, const SolverSpec&) = default;
};

struct IsgdConfig {
  double alpha = 0.1;
  std::size_t k0 = 1;
  SolverSpec inner{SolverKind::adam, 1e-3, 50};
  SolverSpec tail{SolverKind::adam, 1e-3, 0};
  /// Early stop of the inner solve on ||grad G||. nullopt = 1e-8 (1 + ||theta_n||);
  /// 0 disables.
  std::optional<double> inner_tolerance;

  void validate() const;
  friend bool operator==(const IsgdConfig&, const IsgdConfig&) = default;
};

/// Loss above this, or non-finite, counts as divergence.
inline constexpr double kDivergenceThreshold = 1e12;

struct Monitor {
  /// Relative L2 error evaluator; called every `error_every` records when set.
  std::function<double(const ParamVector&)> error_fn;
  std::size_t error_every = 0;
};

struct TrainResult {
  ParamVector theta;
  TrainingTrace trace;
};

/// Proximal-point loop: theta_{n+1} ~ argmin 1/2||t - theta_n||^2 + alpha L(t)
/// by the inner solver warm-started at theta_n, with the batch frozen for
/// the whole inner solve; then the tail optimizer on L.
TrainResult isgd_run(const Objective& objective, const ParamVector& theta0,
                     const IsgdConfig& config, const Monitor& monitor = {},
                     std::function<void(const TraceRecord&)> sink = {});

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  std::size_t iterations = 0;  // sgd/adam/lbfgs
  IsgdConfig isgd;             // kind == isgd
  friend bool operator==(const OptimizerSpec&, const OptimizerSpec&) = default;
};

TrainResult train(const Objective& objective, const ParamVector& theta0,
                  const OptimizerSpec& spec, const Monitor& monitor = {},
                  std::function<void(const TraceRecord&)> sink = {});

}  // namespace isgd::opt
