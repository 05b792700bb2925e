#pragma once

// Loss definitions: the analytic two-parameter stiff quadratic, PINN residual
// losses for the ODE/PDE benchmarks, and function regression.
//
// A Problem owns its sample points and knows how to record its loss on a tape
// for a given network. PINN problems split their data into interior
// (collocation) points, which are subject to mini-batching, and boundary
// points, which are always used in full.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "isgd/autodiff/derivatives.hpp"
#include "isgd/autodiff/dual.hpp"
#include "isgd/network/network.hpp"

namespace isgd::prob {

using net::PointSet;
using Dual = ad::DualScalar<double>;

class ProblemError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BatchSpec {
  bool minibatch = false;
  std::size_t size = 0;
  std::uint64_t seed = 0;

  static BatchSpec full() { return {}; }
  static BatchSpec mini(std::size_t size, std::uint64_t seed) { return {true, size, seed}; }
  friend bool operator==(const BatchSpec&, const BatchSpec&) = default;
};

enum class Sampling { random, grid };

/// Axis-aligned box [lo_a, hi_a].
struct Domain {
  std::vector<double> lo;
  std::vector<double> hi;
  [[nodiscard]] std::size_t dim() const { return lo.size(); }
};

class Problem {
 public:
  virtual ~Problem() = default;

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] const BatchSpec& batch_spec() const { return batch_; }
  void set_batch_spec(const BatchSpec& spec);

  /// Whether the loss is a function of a network's parameters.
  [[nodiscard]] virtual bool uses_network() const { return true; }
  [[nodiscard]] virtual std::size_t input_dim() const = 0;
  [[nodiscard]] virtual Domain domain() const = 0;

  /// Number of points subject to mini-batching.
  [[nodiscard]] virtual std::size_t dataset_size() const = 0;

  /// Loss over the given subset of the batchable points (empty = all).
  /// `net` must be non-null when uses_network().
  [[nodiscard]] virtual ad::LossFn loss(const net::Network* net,
                                        std::vector<std::size_t> batch = {}) const = 0;

  [[nodiscard]] virtual bool has_exact() const { return false; }
  [[nodiscard]] virtual double exact(std::span<const double> x) const;

  /// CSV dump of the points: x[,y], f, u_exact (one row per point).
  virtual void export_csv(std::ostream& os) const = 0;

 protected:
  Problem(std::string name, BatchSpec batch) : name_(std::move(name)), batch_(batch) {}
  const net::Network& require_net(const net::Network* net) const;

 private:
  std::string name_;
  BatchSpec batch_;
};

// ---------------------------------------------------------------------------
// Stiff quadratic L = K1/2 (t1 - t1*)^2 + K2/2 (t2 - t2*)^2

class QuadraticStiff final : public Problem {
 public:
  QuadraticStiff(double k1, double k2, std::array<double, 2> theta_star);

  [[nodiscard]] bool uses_network() const override { return false; }
  [[nodiscard]] std::size_t input_dim() const override { return 0; }
  [[nodiscard]] Domain domain() const override { return {}; }
  [[nodiscard]] std::size_t dataset_size() const override { return 0; }
  [[nodiscard]] ad::LossFn loss(const net::Network* net,
                                std::vector<std::size_t> batch = {}) const override;
  void export_csv(std::ostream& os) const override;

  [[nodiscard]] double k1() const { return k_[0]; }
  [[nodiscard]] double k2() const { return k_[1]; }
  [[nodiscard]] const std::array<double, 2>& k() const { return k_; }
  [[nodiscard]] const std::array<double, 2>& theta_star() const { return star_; }
  [[nodiscard]] std::shared_ptr<const ad::ParamLayout> layout() const { return layout_; }
  [[nodiscard]] ad::ParamVector make_theta(double t1, double t2) const;

  // Closed forms, used as oracles.
  [[nodiscard]] double value(std::span<const double> theta) const;
  [[nodiscard]] std::array<double, 2> gradient(std::span<const double> theta) const;
  [[nodiscard]] std::array<double, 2> gd_map(std::span<const double> theta, double alpha) const;
  [[nodiscard]] std::array<double, 2> igd_map(std::span<const double> theta, double alpha) const;

 private:
  std::array<double, 2> k_;
  std::array<double, 2> star_;
  std::shared_ptr<const ad::ParamLayout> layout_;
};

// ---------------------------------------------------------------------------
// PINN problems with a linear residual operator
//   r(x) = sum_l coeffs[l] * (jet lane l of u)(x) - f(x)
// over the lanes of JetShape{axes = input_dim, order = 2}.

enum class ResidualKind { poisson1d, singular_ode, poisson2d, helmholtz2d };
enum class PoissonVariant { smooth, multiscale };

std::string to_string(ResidualKind k);
std::string to_string(PoissonVariant v);
PoissonVariant poisson_variant_from_string(const std::string& s);

class PinnProblem : public Problem {
 public:
  [[nodiscard]] ResidualKind kind() const { return kind_; }
  [[nodiscard]] std::size_t input_dim() const override { return dim_; }
  [[nodiscard]] Domain domain() const override;
  [[nodiscard]] std::size_t dataset_size() const override { return interior_.count; }
  [[nodiscard]] ad::LossFn loss(const net::Network* net,
                                std::vector<std::size_t> batch = {}) const override;
  [[nodiscard]] bool has_exact() const override { return true; }
  [[nodiscard]] double exact(std::span<const double> x) const override;
  void export_csv(std::ostream& os) const override;

  [[nodiscard]] const PointSet& interior() const { return interior_; }
  [[nodiscard]] const PointSet& boundary() const { return boundary_; }
  [[nodiscard]] const std::vector<double>& forcing_values() const { return f_; }
  [[nodiscard]] const std::vector<double>& boundary_values() const { return g_; }
  /// Weights of the jet lanes (value, d/dx0, d2/dx0^2, d/dx1, ...).
  [[nodiscard]] const std::vector<double>& coefficients() const { return coeffs_; }

  [[nodiscard]] virtual double forcing(std::span<const double> x) const = 0;
  /// Exact solution with input-derivative carriers: x[a] is seeded by the
  /// caller (variable along one axis, constant along the others).
  [[nodiscard]] virtual Dual exact_dual(std::span<const Dual> x) const = 0;

  /// The residual operator applied to the exact solution at x (should be ~0).
  [[nodiscard]] double exact_residual(std::span<const double> x) const;
  /// The residual operator applied to precomputed jet lanes of u at x.
  [[nodiscard]] double residual(std::span<const double> lanes, std::span<const double> x) const;

 protected:
  PinnProblem(std::string name, ResidualKind kind, std::size_t dim, std::vector<double> coeffs,
              BatchSpec batch);
  /// Fills f_ and g_ from the sampled points; call at the end of construction.
  void finalize(PointSet interior, PointSet boundary);

 private:
  ResidualKind kind_;
  std::size_t dim_;
  std::vector<double> coeffs_;
  PointSet interior_;
  PointSet boundary_;
  std::vector<double> f_;
  std::vector<double> g_;
};

/// -u'' = f on (0,1), u(0) = u(1) = 0 with u = sin(2 pi x) [+ 0.1 sin(50 pi x)].
class Poisson1D final : public PinnProblem {
 public:
  Poisson1D(PoissonVariant variant, std::size_t n_r, std::uint64_t seed,
            Sampling sampling = Sampling::random, BatchSpec batch = {});
  [[nodiscard]] PoissonVariant variant() const { return variant_; }
  [[nodiscard]] double forcing(std::span<const double> x) const override;
  [[nodiscard]] Dual exact_dual(std::span<const Dual> x) const override;

 private:
  PoissonVariant variant_;
};

/// -eps y'' + y' = f on (0,1), y(0) = y(1) = 0, with a boundary layer at x=1.
class SingularOde final : public PinnProblem {
 public:
  SingularOde(double eps, std::size_t n, std::uint64_t seed, Sampling sampling = Sampling::random,
              BatchSpec batch = {});
  [[nodiscard]] double eps() const { return eps_; }
  [[nodiscard]] double forcing(std::span<const double> x) const override;
  [[nodiscard]] Dual exact_dual(std::span<const Dual> x) const override;

 private:
  double eps_;
};

/// -(u_xx + u_yy) = f on the unit square, homogeneous Dirichlet data.
class Poisson2D final : public PinnProblem {
 public:
  Poisson2D(std::size_t n_b, std::size_t n_f, std::uint64_t seed, BatchSpec batch = {});
  [[nodiscard]] double forcing(std::span<const double> x) const override;
  [[nodiscard]] Dual exact_dual(std::span<const Dual> x) const override;
};

/// u_xx + u_yy + k^2 u = f on the unit square with u = sin(pi x) sin(4 pi y).
class Helmholtz2D final : public PinnProblem {
 public:
  Helmholtz2D(double k, std::size_t n_b, std::size_t n_f, std::uint64_t seed,
              BatchSpec batch = {});
  [[nodiscard]] double wavenumber() const { return k_; }
  [[nodiscard]] double forcing(std::span<const double> x) const override;
  [[nodiscard]] Dual exact_dual(std::span<const Dual> x) const override;

 private:
  double k_;
};

// ---------------------------------------------------------------------------

enum class RegressionTarget { multiscale_c1, discontinuous_c2 };
std::string to_string(RegressionTarget t);
RegressionTarget regression_target_from_string(const std::string& s);
double regression_target(RegressionTarget t, double x);

/// Mean squared error against a target function on [-3, 3].
class Regression final : public Problem {
 public:
  Regression(RegressionTarget target, std::size_t n, std::uint64_t seed, BatchSpec batch = {});

  [[nodiscard]] std::size_t input_dim() const override { return 1; }
  [[nodiscard]] Domain domain() const override { return {{-3.0}, {3.0}}; }
  [[nodiscard]] std::size_t dataset_size() const override { return points_.count; }
  [[nodiscard]] ad::LossFn loss(const net::Network* net,
                                std::vector<std::size_t> batch = {}) const override;
  [[nodiscard]] bool has_exact() const override { return true; }
  [[nodiscard]] double exact(std::span<const double> x) const override;
  void export_csv(std::ostream& os) const override;

  [[nodiscard]] RegressionTarget target() const { return target_; }
  [[nodiscard]] const PointSet& points() const { return points_; }
  [[nodiscard]] const std::vector<double>& targets() const { return y_; }

 private:
  RegressionTarget target_;
  PointSet points_;
  std::vector<double> y_;
};

// ---------------------------------------------------------------------------

/// Mini-batch schedule. Batch t is a pure function of (seed, t): epoch
/// e = t / batches_per_epoch shuffles the index set with a generator seeded by
/// (seed, e), and the batches of an epoch partition it.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, const BatchSpec& spec);

  [[nodiscard]] std::size_t batches_per_epoch() const { return per_epoch_; }
  /// Full-batch specs return every index in order.
  [[nodiscard]] std::vector<std::size_t> batch(std::uint64_t iteration) const;

 private:
  std::size_t n_;
  BatchSpec spec_;
  std::size_t per_epoch_ = 1;
};

/// Indices of the batch for `iteration`.
std::vector<std::size_t> sample_batch(const Problem& problem, std::uint64_t iteration);

}  // namespace isgd::prob
