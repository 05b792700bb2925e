#pragma once

// Empirical checks of the linear-convergence result for implicit gradient
// descent on the two-layer network u = m^{-1/2} sum_r a_r s(w_r . x) with the
// output layer frozen, and of the auxiliary bounds used in its proof.
//
// Loss: L(W) = sum_i 1/2 (y_i - u(x_i))^2.
// Gram matrix: H_ij = sum_r <du_i/dw_r, du_j/dw_r>
//                   = (1/m) x_i.x_j sum_r s'(w_r.x_i) s'(w_r.x_j).
// Limit: H_inf_ij = x_i.x_j E_{w~N(0,I)} s'(w.x_i) s'(w.x_j); lambda0 = lambda_min(H_inf).

#include <Eigen/Dense>
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

namespace isgd::theory {

using ad::ParamVector;

class TheoryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TheoremData {
  std::vector<std::vector<double>> x;  // N inputs of dimension d
  std::vector<double> y;

  [[nodiscard]] std::size_t size() const { return x.size(); }
  [[nodiscard]] std::size_t dim() const { return x.empty() ? 0 : x.front().size(); }
  [[nodiscard]] net::PointSet points() const;
  /// Largest |cos| between two distinct inputs.
  [[nodiscard]] double max_abs_cosine() const;
  /// Throws unless no two inputs are parallel (|cos| < 1 - 1e-6).
  void require_non_parallel() const;
};

/// N random unit vectors in R^d (pairwise non-parallel) with targets
/// uniform on [-1, 1].
[[nodiscard]] TheoremData make_unit_data(std::size_t n, std::size_t d, std::uint64_t seed);

using Derivative = std::function<double(double)>;
[[nodiscard]] Derivative activation_derivative(ad::Activation act);

enum class GramSource { empirical, limit };

struct GramMatrix {
  Eigen::MatrixXd entries;
  GramSource source = GramSource::empirical;
  std::size_t n_samples = 0;      // data count N
  std::size_t mc_samples = 0;     // limit only
  std::uint64_t seed = 0;         // limit only
  Eigen::MatrixXd standard_error;  // limit only, per entry
  double lambda_min_stderr = 0.0;  // limit only

  [[nodiscard]] double lambda_min() const;
  [[nodiscard]] double asymmetry() const;
};

/// Closed form from the hidden weights W (m x d, row-major) and inputs.
[[nodiscard]] GramMatrix gram_from_weights(std::span<const double> w, std::size_t m,
                                           const TheoremData& data, const Derivative& ds);

/// H(theta) for a theorem-architecture network.
[[nodiscard]] GramMatrix gram_empirical(const net::Network& net, const ParamVector& theta,
                                        const TheoremData& data);

/// Monte-Carlo estimate of H_inf. Draws are generated in fixed-size chunks
/// with per-chunk seeds, so the estimate does not depend on how chunks are
/// scheduled.
[[nodiscard]] GramMatrix gram_limit(const TheoremData& data, const Derivative& ds,
                                    std::size_t mc_samples, std::uint64_t seed);

[[nodiscard]] double spectral_norm(const Eigen::MatrixXd& symmetric);

/// The quadratic loss sum_i 1/2 (y_i - u_i)^2 on a tape.
[[nodiscard]] ad::LossFn quadratic_loss(const net::Network& net, const TheoremData& data);

struct TheoremInstance {
  TheoremData data;
  std::size_t width = 10000;  // m
  double alpha = 0.0;
  double lambda0 = 0.0;
  double delta = 0.1;  // nominal failure probability, reported only
  std::uint64_t init_seed = 0;
  ad::Activation activation = ad::Activation::tanh;
  double inner_tolerance = 1e-10;
  std::size_t inner_max_iters = 500;
};

struct InstanceOptions {
  std::size_t n = 5;
  std::size_t d = 3;
  std::size_t width = 10000;
  std::uint64_t data_seed = 7;
  std::uint64_t init_seed = 0;
  std::size_t mc_samples = 1000000;
  std::uint64_t mc_seed = 11;
  double alpha_scale = 0.1;  // alpha = alpha_scale * lambda0 / N^2
  ad::Activation activation = ad::Activation::tanh;
};

/// Draws the data, estimates lambda0 from H_inf and fills in alpha. `limit`
/// receives the H_inf estimate when non-null.
[[nodiscard]] TheoremInstance make_instance(const InstanceOptions& options,
                                            GramMatrix* limit = nullptr);

struct TheoremStep {
  std::size_t n = 0;
  double loss = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // bound - loss
  std::size_t inner_iterations = 0;
  double inner_grad_norm = 0.0;
};

struct TheoremReport {
  std::vector<TheoremStep> steps;
  bool bound_held = true;
  bool monotone = true;
  bool inner_solves_converged = true;
  /// theta_0 .. theta_K, for verify_lemmas.
  std::vector<ParamVector> trajectory;
};

struct TheoremSetup {
  net::Network net;
  ParamVector theta0;
};

[[nodiscard]] TheoremSetup build_network(const TheoremInstance& instance);

/// Runs K implicit steps W(n+1) = argmin 1/2||W - W(n)||^2 + alpha L(W), each
/// solved by L-BFGS to the configured gradient tolerance, and checks
/// L(n) <= (1 + alpha lambda0 / 2)^{-n} L(0).
[[nodiscard]] TheoremReport verify_theorem(const TheoremInstance& instance, std::size_t k);

struct LemmaStep {
  std::size_t s = 0;
  double max_displacement = 0.0;  // max_r ||w_r(s) - w_r(0)||
  double gram_change = 0.0;       // ||H(s) - H(0)||_2
  double gram_lambda_min = 0.0;   // lambda_min(H(s))
  double i0_norm = 0.0;           // ||I_0(s)||, s >= 1
  double i0_bound = 0.0;          // alpha lambda0 / 8 ||y - u(s)||
};

struct LemmaReport {
  std::vector<LemmaStep> steps;
  bool gram_change_held = true;  // ||H(s) - H(0)|| <= lambda0 / 4
  bool lambda_min_held = true;   // lambda_min(H(s)) >= lambda0 / 2
  bool i0_held = true;
  double max_displacement = 0.0;
};

/// I_0(s) = (y - u(s-1)) - (I + alpha H(s)) (y - u(s)), H at the post-step weights.
[[nodiscard]] LemmaReport verify_lemmas(const TheoremInstance& instance,
                                        const TheoremReport& trajectory);

struct ScalingPoint {
  std::size_t width = 0;
  /// Geometric mean over seeds of max displacement / ||y - u(0)||.
  double normalized_displacement = 0.0;
  std::vector<double> raw;  // per seed, unnormalized
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  double slope = 0.0;  // least squares of log displacement on log m
};

/// Re-runs `base` for each width and init seed (same data, alpha, lambda0).
[[nodiscard]] ScalingReport displacement_scaling(const TheoremInstance& base,
                                                 std::span<const std::size_t> widths,
                                                 std::span<const std::uint64_t> seeds,
                                                 std::size_t k);

/// iteration,loss,bound,margin,max_displacement,gram_change,gram_lambda_min,i0_norm,i0_bound
void write_theory_csv(std::ostream& os, const TheoremReport& theorem, const LemmaReport* lemmas);
void write_theory_summary(std::ostream& os, const TheoremInstance& instance,
                          const TheoremReport& theorem, const LemmaReport* lemmas);

}  // namespace isgd::theory
