#pragma once

// Small instances of every problem type with matching tanh networks, sized so
// that the quad-precision oracle stays cheap.

#include <memory>
#include <string>
#include <vector>

#include "isgd/network/network.hpp"
#include "isgd/problems/problems.hpp"

namespace fixtures {

struct Case {
  std::string label;
  std::unique_ptr<isgd::prob::Problem> problem;
  std::unique_ptr<isgd::net::Network> net;  // null for the quadratic
  isgd::ad::ParamVector theta0;
};

inline Case with_net(std::string label, std::unique_ptr<isgd::prob::Problem> p,
                     std::vector<std::size_t> widths = {5, 5}) {
  isgd::net::NetworkConfig c;
  c.input_dim = p->input_dim();
  c.hidden_widths = std::move(widths);
  auto [n, theta] = isgd::net::build(c, {isgd::net::InitKind::glorot_uniform, 3});
  return {std::move(label), std::move(p), std::make_unique<isgd::net::Network>(std::move(n)),
          std::move(theta)};
}

/// One case per problem type (plus both Poisson-1D variants and both ODE
/// regimes).
inline std::vector<Case> all_problem_types() {
  using namespace isgd::prob;
  std::vector<Case> out;
  auto q = std::make_unique<QuadraticStiff>(1e-4, 1e4, std::array<double, 2>{0.3, -0.2});
  auto theta = q->make_theta(1.0, 1.0);
  out.push_back({"quadratic_stiff", std::move(q), nullptr, std::move(theta)});
  out.push_back(with_net("poisson1d_smooth",
                         std::make_unique<Poisson1D>(PoissonVariant::smooth, 12, 1)));
  out.push_back(with_net("poisson1d_multiscale",
                         std::make_unique<Poisson1D>(PoissonVariant::multiscale, 12, 1)));
  out.push_back(with_net("singular_ode_eps2", std::make_unique<SingularOde>(2.0, 12, 1)));
  out.push_back(with_net("singular_ode_eps001", std::make_unique<SingularOde>(0.01, 12, 1)));
  out.push_back(with_net("poisson2d", std::make_unique<Poisson2D>(6, 8, 1)));
  out.push_back(with_net("helmholtz2d", std::make_unique<Helmholtz2D>(4.0, 6, 8, 1)));
  out.push_back(with_net("regression_multiscale",
                         std::make_unique<Regression>(RegressionTarget::multiscale_c1, 12, 1)));
  out.push_back(with_net("regression_discontinuous",
                         std::make_unique<Regression>(RegressionTarget::discontinuous_c2, 12, 1)));
  return out;
}

}  // namespace fixtures
