#pragma once

// Stiffness and loss-decay instrumentation: Hessian spectra assembled from
// Hessian-vector products, the one-step loss-change identities of explicit
// and implicit gradient descent, and error norms against exact solutions.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "isgd/autodiff/derivatives.hpp"
#include "isgd/network/network.hpp"
#include "isgd/problems/problems.hpp"

namespace isgd::diag {

using ad::LossFn;
using ad::ParamVector;

enum class SpectrumMethod { dense, lanczos };
std::string to_string(SpectrumMethod m);
SpectrumMethod spectrum_method_from_string(const std::string& s);

/// Largest parameter count for which the dense Hessian is assembled.
inline constexpr std::size_t kDenseLimit = 8000;

class SpectrumError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LanczosOptions {
  std::size_t k = 20;
  double tolerance = 1e-6;   // Ritz residual relative to |lambda|
  std::size_t max_iters = 300;
  std::uint64_t seed = 1;
};

struct SpectrumReport {
  SpectrumMethod method = SpectrumMethod::dense;
  std::string snapshot;
  /// dense: every eigenvalue, ascending. lanczos: all final Ritz values, ascending.
  std::vector<double> eigenvalues;
  /// lanczos only: the k smallest / largest Ritz values (ascending) and
  /// their residual bounds, aligned with them.
  std::vector<double> smallest;
  std::vector<double> largest;
  std::vector<double> smallest_residuals;
  std::vector<double> largest_residuals;
  std::size_t mv_products = 0;
  /// dense only: ||H - H^T||_inf / ||H||_inf before symmetrization.
  double asymmetry = 0.0;
  bool converged = true;

  [[nodiscard]] double lambda_max() const;
  [[nodiscard]] double lambda_min() const;
};

using HvpFn = std::function<ParamVector(const ParamVector&)>;

[[nodiscard]] SpectrumReport hessian_spectrum(const LossFn& loss, const ParamVector& theta,
                                              SpectrumMethod method,
                                              const LanczosOptions& options = {},
                                              std::string snapshot = {});

/// The same on an arbitrary symmetric operator (`like` fixes the layout).
[[nodiscard]] SpectrumReport dense_spectrum(const HvpFn& op, const ParamVector& like);
[[nodiscard]] SpectrumReport lanczos_spectrum(const HvpFn& op, const ParamVector& like,
                                              const LanczosOptions& options = {});

void write_spectrum_csv(std::ostream& os, const SpectrumReport& report);

// ---------------------------------------------------------------------------

/// Both sides of a one-step loss-change identity. The Hessian is evaluated at
/// the pre-step point (GD) or post-step point (IGD); the identities are exact
/// only when the Hessian is constant, otherwise `exact` is false and the
/// residual is informational.
struct DecayReport {
  double lhs = 0.0;       // L(theta_{n+1}) - L(theta_n)
  double rhs = 0.0;
  double residual = 0.0;  // |lhs - rhs| / max(|lhs|, |rhs|), 0 when both vanish
  double grad_norm = 0.0;
  bool exact = true;
};

/// rhs = -alpha |g|^2 + alpha^2/2 g^T H g with g = grad L(theta_n).
[[nodiscard]] DecayReport gd_decay_identity(const LossFn& loss, const ParamVector& theta_n,
                                            const ParamVector& theta_next, double alpha,
                                            bool constant_hessian);
/// rhs = -alpha |g|^2 - alpha^2/2 g^T H g with g = grad L(theta_{n+1}).
[[nodiscard]] DecayReport igd_decay_identity(const LossFn& loss, const ParamVector& theta_n,
                                             const ParamVector& theta_next, double alpha,
                                             bool constant_hessian);

/// Problem-level forms; exactness is decided by the problem type.
[[nodiscard]] DecayReport gd_decay_identity(const prob::Problem& problem, const net::Network* net,
                                            const ParamVector& theta_n,
                                            const ParamVector& theta_next, double alpha);
[[nodiscard]] DecayReport igd_decay_identity(const prob::Problem& problem, const net::Network* net,
                                             const ParamVector& theta_n,
                                             const ParamVector& theta_next, double alpha);

void write_decay_csv(std::ostream& os, std::span<const DecayReport> reports);

// ---------------------------------------------------------------------------

/// Uniform tensor grid over the domain with `per_axis` points per axis
/// (endpoints included).
[[nodiscard]] net::PointSet uniform_grid(const prob::Domain& domain, std::size_t per_axis);
/// 1001 points in 1D, 101 x 101 in 2D.
[[nodiscard]] net::PointSet default_grid(const prob::Domain& domain);

struct ErrorReport {
  double rel_l2 = 0.0;
  double max_abs = 0.0;
};

using ExactFn = std::function<double(std::span<const double>)>;

[[nodiscard]] ErrorReport rel_l2_error(std::span<const double> predicted,
                                       std::span<const double> exact);
[[nodiscard]] ErrorReport rel_l2_error(const net::Network& net, const ParamVector& theta,
                                       const ExactFn& exact, const net::PointSet& grid);
/// Uses the problem's exact solution on its default grid; throws when the
/// problem has none.
[[nodiscard]] ErrorReport rel_l2_error(const prob::Problem& problem, const net::Network& net,
                                       const ParamVector& theta);

}  // namespace isgd::diag
