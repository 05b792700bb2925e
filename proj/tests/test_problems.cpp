#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "isgd/autodiff/derivatives.hpp"
#include "isgd/problems/problems.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace isgd;
using namespace isgd::prob;
using std::numbers::pi;

namespace {

// Values computed with mpmath at 40+ digits.
constexpr double kMultiscaleForcingAt001 = 2469.879970623912449185145;
constexpr double kOdeExactAt099Eps001 = 0.6319971913102182770433834;
constexpr double kPoisson2dForcingCentre = 19.73920880217871723766898;
constexpr double kHelmholtzForcing = -151.7832748185190965201863;
constexpr double kMultiscaleTargetAt1 = -0.2682864590002174858326871;

// The loss with the exact solution substituted for the network: mean squared
// exact residual at the interior points plus mean squared boundary mismatch.
double manufactured_loss(const PinnProblem& p) {
  double interior = 0;
  for (std::size_t i = 0; i < p.interior().count; ++i) {
    interior += std::pow(p.exact_residual(p.interior().point(i)), 2);
  }
  double boundary = 0;
  for (std::size_t i = 0; i < p.boundary().count; ++i) {
    boundary += std::pow(p.exact(p.boundary().point(i)) - p.boundary_values()[i], 2);
  }
  return interior / p.interior().count + boundary / p.boundary().count;
}

std::vector<std::unique_ptr<PinnProblem>> pinn_problems() {
  std::vector<std::unique_ptr<PinnProblem>> out;
  out.push_back(std::make_unique<Poisson1D>(PoissonVariant::smooth, 200, 1));
  out.push_back(std::make_unique<Poisson1D>(PoissonVariant::multiscale, 200, 1));
  out.push_back(std::make_unique<SingularOde>(2.0, 200, 1));
  out.push_back(std::make_unique<SingularOde>(0.01, 200, 1));
  out.push_back(std::make_unique<Poisson2D>(100, 200, 1));
  out.push_back(std::make_unique<Helmholtz2D>(4.0, 100, 200, 1));
  return out;
}

}  // namespace

TEST(Poisson1D, Forcing) {
  Poisson1D smooth(PoissonVariant::smooth, 10, 0);
  const double q = 0.25;
  EXPECT_NEAR(smooth.forcing(std::span(&q, 1)), 4 * pi * pi, 1e-12);
  Poisson1D multi(PoissonVariant::multiscale, 10, 0);
  const double x = 0.01;
  EXPECT_NEAR(multi.forcing(std::span(&x, 1)), kMultiscaleForcingAt001, 1e-10);
}

TEST(Poisson1D, RejectsTooFewPoints) {
  EXPECT_THROW(Poisson1D(PoissonVariant::smooth, 1, 0), ProblemError);
}

TEST(Poisson1D, GridSampling) {
  Poisson1D p(PoissonVariant::smooth, 4, 0, Sampling::grid);
  EXPECT_DOUBLE_EQ(p.interior().at(0, 0), 0.2);
  EXPECT_DOUBLE_EQ(p.interior().at(0, 3), 0.8);
}

TEST(SingularOde, BoundaryValuesVanish) {
  for (double eps : {2.0, 0.1, 0.01, 0.002}) {
    SingularOde p(eps, 10, 0);
    const double zero = 0.0, one = 1.0;
    EXPECT_EQ(p.exact(std::span(&zero, 1)), 0.0) << eps;
    EXPECT_NEAR(p.exact(std::span(&one, 1)), 0.0, 1e-16) << eps;
  }
}

TEST(SingularOde, StableFormAgainstHighPrecision) {
  SingularOde p(0.01, 10, 0);
  const double x = 0.99;
  const double y = p.exact(std::span(&x, 1));
  EXPECT_LT(std::abs(y - kOdeExactAt099Eps001) / kOdeExactAt099Eps001, 1e-12);
}

TEST(SingularOde, ManufacturedResidualEps2) {
  SingularOde p(2.0, 200, 3);
  for (std::size_t i = 0; i < p.interior().count; ++i) {
    EXPECT_LT(std::abs(p.exact_residual(p.interior().point(i))), 1e-8);
  }
}

TEST(SingularOde, RejectsNonPositiveEps) {
  EXPECT_THROW(SingularOde(0.0, 10, 0), ProblemError);
  EXPECT_THROW(SingularOde(-1.0, 10, 0), ProblemError);
}

TEST(Poisson2D, ForcingAndBoundary) {
  Poisson2D p(40, 10, 2);
  const double c[] = {0.5, 0.5};
  EXPECT_NEAR(p.forcing(c), kPoisson2dForcingCentre, 1e-12);
  for (double g : p.boundary_values()) EXPECT_LT(std::abs(g), 1e-15);
  EXPECT_LT(manufactured_loss(p), 1e-10);
  EXPECT_THROW(Poisson2D(3, 10, 0), ProblemError);
}

TEST(Poisson2D, BoundaryPointsLieOnEdges) {
  Poisson2D p(200, 10, 4);
  std::set<int> sides;
  for (std::size_t i = 0; i < p.boundary().count; ++i) {
    const double x = p.boundary().at(0, i), y = p.boundary().at(1, i);
    const bool on = x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0;
    EXPECT_TRUE(on);
    sides.insert(x == 0.0 ? 0 : x == 1.0 ? 1 : y == 0.0 ? 2 : 3);
  }
  EXPECT_EQ(sides.size(), 4u);
}

TEST(Helmholtz2D, ForcingAndBoundary) {
  Helmholtz2D p(4.0, 40, 10, 2);
  const double x[] = {0.5, 0.125};
  EXPECT_NEAR(p.forcing(x), kHelmholtzForcing, 1e-11);
  for (double g : p.boundary_values()) EXPECT_LT(std::abs(g), 1e-15);
  EXPECT_LT(manufactured_loss(p), 1e-10);
}

TEST(Manufactured, ExactSolutionZeroesEveryLoss) {
  for (const auto& p : pinn_problems()) {
    EXPECT_LT(manufactured_loss(*p), 1e-8) << p->name();
  }
}

TEST(Manufactured, ForcingConsistencyAtRandomPoints) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& p : pinn_problems()) {
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
      std::vector<double> x(p->input_dim());
      for (double& xi : x) xi = u(rng);
      worst = std::max(worst, std::abs(p->exact_residual(x)));
    }
    EXPECT_LT(worst, 1e-8) << p->name();
  }
}

TEST(Regression, Targets) {
  EXPECT_EQ(regression_target(RegressionTarget::multiscale_c1, 0.0), 0.0);
  EXPECT_NEAR(regression_target(RegressionTarget::multiscale_c1, 1.0), kMultiscaleTargetAt1, 1e-15);
  EXPECT_EQ(regression_target(RegressionTarget::discontinuous_c2, 0.0), 0.0);
  const double right = regression_target(RegressionTarget::discontinuous_c2, 1e-12);
  EXPECT_NEAR(right, 2.0, 1e-11);
  Regression r(RegressionTarget::multiscale_c1, 50, 3);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_GE(r.points().at(0, i), -3.0);
    EXPECT_LE(r.points().at(0, i), 3.0);
  }
}

TEST(QuadraticStiff, MinimumAndHessian) {
  QuadraticStiff q(1e-4, 1e4, {0.5, -2.0});
  const auto loss = q.loss(nullptr);
  const auto at_min = ad::grad(loss, q.make_theta(0.5, -2.0));
  EXPECT_EQ(at_min.value, 0.0);
  EXPECT_EQ(at_min.gradient[0], 0.0);
  EXPECT_EQ(at_min.gradient[1], 0.0);
  for (const auto& theta : {q.make_theta(0, 0), q.make_theta(3, 7)}) {
    const auto c0 = ad::hvp(loss, theta, q.make_theta(1, 0));
    const auto c1 = ad::hvp(loss, theta, q.make_theta(0, 1));
    EXPECT_EQ(c0[0], 1e-4);
    EXPECT_EQ(c0[1], 0.0);
    EXPECT_EQ(c1[0], 0.0);
    EXPECT_EQ(c1[1], 1e4);
  }
  EXPECT_THROW(QuadraticStiff(0.0, 1.0, {0, 0}), ProblemError);
}

TEST(QuadraticStiff, GdMap) {
  QuadraticStiff q(1e-4, 1e4, {0, 0});
  const double theta[] = {1.0, 1.0};
  const auto next = q.gd_map(theta, 1e-4);
  EXPECT_EQ(next[0], 1.0 - 1e-8);
  EXPECT_EQ(next[1], 0.0);
}

TEST(Loss, NonNegativeAtRandomParameters) {
  for (auto& c : fixtures::all_problem_types()) {
    const auto loss = c.problem->loss(c.net.get());
    for (int s = 0; s < 20; ++s) {
      EXPECT_GE(ad::value(loss, oracle::perturbed(c.theta0, 7000 + s, 2.0)), 0.0) << c.label;
    }
  }
}

TEST(Loss, SubsetMatchesGatheredData) {
  Poisson1D p(PoissonVariant::smooth, 30, 5);
  net::NetworkConfig cfg;
  cfg.hidden_widths = {6};
  auto [n, theta] = net::build(cfg, {});
  // with every index listed in order, a "batch" is the full loss
  std::vector<std::size_t> all(30);
  std::iota(all.begin(), all.end(), std::size_t{0});
  EXPECT_EQ(ad::value(p.loss(&n, all), theta), ad::value(p.loss(&n), theta));
  const std::vector<std::size_t> some{3, 17, 4};
  EXPECT_NE(ad::value(p.loss(&n, some), theta), ad::value(p.loss(&n), theta));
}

TEST(SampleBatch, FullBatchIsIdentity) {
  Poisson1D p(PoissonVariant::smooth, 25, 0);
  const auto b = sample_batch(p, 7);
  ASSERT_EQ(b.size(), 25u);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i], i);
}

TEST(SampleBatch, EpochOf40Over400) {
  SingularOde p(2.0, 400, 0, Sampling::random, BatchSpec::mini(40, 9));
  BatchSampler sampler(400, p.batch_spec());
  EXPECT_EQ(sampler.batches_per_epoch(), 10u);
  for (std::uint64_t epoch = 0; epoch < 3; ++epoch) {
    std::set<std::size_t> seen;
    for (std::uint64_t k = 0; k < 10; ++k) {
      const auto b = sample_batch(p, epoch * 10 + k);
      EXPECT_EQ(b.size(), 40u);
      for (std::size_t i : b) EXPECT_TRUE(seen.insert(i).second) << "index repeated in epoch";
    }
    EXPECT_EQ(seen.size(), 400u);
  }
  EXPECT_NE(sample_batch(p, 0), sample_batch(p, 10));
}

TEST(SampleBatch, DeterministicInSeedAndIteration) {
  SingularOde a(2.0, 400, 0, Sampling::random, BatchSpec::mini(40, 9));
  SingularOde b(2.0, 400, 0, Sampling::random, BatchSpec::mini(40, 9));
  SingularOde c(2.0, 400, 0, Sampling::random, BatchSpec::mini(40, 10));
  for (std::uint64_t t = 0; t < 25; ++t) EXPECT_EQ(sample_batch(a, t), sample_batch(b, t));
  EXPECT_NE(sample_batch(a, 0), sample_batch(c, 0));
}

TEST(SampleBatch, OversizedBatchRejected) {
  EXPECT_THROW(SingularOde(2.0, 30, 0, Sampling::random, BatchSpec::mini(40, 0)), ProblemError);
}

TEST(Export, CsvHasOneRowPerPoint) {
  Poisson2D p(8, 12, 0);
  std::ostringstream os;
  p.export_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "x,y,kind,f,u_exact");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 20u);
}
