#include "isgd/problems/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace isgd::prob {

using std::numbers::pi;

namespace {

// Shared, immutable data captured by loss closures so that copying a LossFn
// does not copy point sets.
struct PinnData {
  net::Network net;
  PointSet interior;
  std::vector<double> neg_f;
  PointSet boundary;
  std::vector<double> neg_g;
  std::vector<double> coeffs;
  std::vector<std::size_t> axes;
};

struct RegressionData {
  net::Network net;
  PointSet points;
  std::vector<double> neg_y;
};

void write_row(std::ostream& os, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) os << ',';
    os << values[i];
  }
  os << '\n';
}

PointSet unit_interval_points(std::size_t n, std::uint64_t seed, Sampling sampling) {
  PointSet p(1, n);
  if (sampling == Sampling::grid) {
    for (std::size_t i = 0; i < n; ++i) {
      p.at(0, i) = static_cast<double>(i + 1) / static_cast<double>(n + 1);
    }
    return p;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) p.at(0, i) = u(rng);
  return p;
}

PointSet unit_interval_ends() {
  PointSet p(1, 2);
  p.at(0, 0) = 0.0;
  p.at(0, 1) = 1.0;
  return p;
}

// Interior points first, then boundary points from the same stream.
std::pair<PointSet, PointSet> unit_square_points(std::size_t n_b, std::size_t n_f,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointSet interior(2, n_f);
  for (std::size_t i = 0; i < n_f; ++i) {
    interior.at(0, i) = u(rng);
    interior.at(1, i) = u(rng);
  }
  PointSet boundary(2, n_b);
  std::uniform_int_distribution<int> side(0, 3);
  for (std::size_t i = 0; i < n_b; ++i) {
    const double t = u(rng);
    switch (side(rng)) {
      case 0: boundary.at(0, i) = t; boundary.at(1, i) = 0.0; break;
      case 1: boundary.at(0, i) = 1.0; boundary.at(1, i) = t; break;
      case 2: boundary.at(0, i) = t; boundary.at(1, i) = 1.0; break;
      default: boundary.at(0, i) = 0.0; boundary.at(1, i) = t; break;
    }
  }
  return {std::move(interior), std::move(boundary)};
}

}  // namespace

// ---------------------------------------------------------------------------

void Problem::set_batch_spec(const BatchSpec& spec) {
  if (spec.minibatch && (spec.size == 0 || spec.size > dataset_size())) {
    throw ProblemError("batch size " + std::to_string(spec.size) + " invalid for dataset of " +
                       std::to_string(dataset_size()) + " points");
  }
  batch_ = spec;
}

double Problem::exact(std::span<const double>) const {
  throw ProblemError("problem '" + name_ + "' has no exact solution");
}

const net::Network& Problem::require_net(const net::Network* net) const {
  if (!net) throw ProblemError("problem '" + name_ + "' needs a network");
  if (net->config().input_dim != input_dim()) {
    throw ProblemError("network input_dim does not match problem '" + name_ + "'");
  }
  if (net->config().output_dim != 1) throw ProblemError("problems expect a scalar network output");
  return *net;
}

// ---------------------------------------------------------------------------

QuadraticStiff::QuadraticStiff(double k1, double k2, std::array<double, 2> theta_star)
    : Problem("quadratic_stiff", {}), k_{k1, k2}, star_(theta_star), layout_(ad::flat_layout(2)) {
  if (!(k1 > 0.0) || !(k2 > 0.0)) throw ProblemError("K1 and K2 must be positive");
}

ad::LossFn QuadraticStiff::loss(const net::Network*, std::vector<std::size_t>) const {
  const std::array<double, 2> neg_star{-star_[0], -star_[1]};
  const std::array<double, 2> half_k{0.5 * k_[0], 0.5 * k_[1]};
  return ad::LossFn([neg_star, half_k](auto& tape) {
    const ad::Var d = tape.add_const(tape.param(0, 2, 1), neg_star);
    return tape.sum(tape.mul_const(tape.square(d), half_k));
  });
}

ad::ParamVector QuadraticStiff::make_theta(double t1, double t2) const {
  return ad::ParamVector(layout_, {t1, t2});
}

double QuadraticStiff::value(std::span<const double> theta) const {
  const double d0 = theta[0] - star_[0];
  const double d1 = theta[1] - star_[1];
  return 0.5 * k_[0] * d0 * d0 + 0.5 * k_[1] * d1 * d1;
}

std::array<double, 2> QuadraticStiff::gradient(std::span<const double> theta) const {
  return {k_[0] * (theta[0] - star_[0]), k_[1] * (theta[1] - star_[1])};
}

std::array<double, 2> QuadraticStiff::gd_map(std::span<const double> theta, double alpha) const {
  std::array<double, 2> out{};
  for (int i = 0; i < 2; ++i) out[i] = star_[i] + (1.0 - alpha * k_[i]) * (theta[i] - star_[i]);
  return out;
}

std::array<double, 2> QuadraticStiff::igd_map(std::span<const double> theta, double alpha) const {
  std::array<double, 2> out{};
  for (int i = 0; i < 2; ++i) out[i] = star_[i] + (theta[i] - star_[i]) / (1.0 + alpha * k_[i]);
  return out;
}

void QuadraticStiff::export_csv(std::ostream& os) const {
  os << "k1,k2,theta1_star,theta2_star\n";
  write_row(os, std::array<double, 4>{k_[0], k_[1], star_[0], star_[1]});
}

// ---------------------------------------------------------------------------

std::string to_string(ResidualKind k) {
  switch (k) {
    case ResidualKind::poisson1d: return "poisson1d";
    case ResidualKind::singular_ode: return "singular_ode";
    case ResidualKind::poisson2d: return "poisson2d";
    case ResidualKind::helmholtz2d: return "helmholtz2d";
  }
  return "?";
}

std::string to_string(PoissonVariant v) {
  return v == PoissonVariant::smooth ? "smooth" : "multiscale";
}

PoissonVariant poisson_variant_from_string(const std::string& s) {
  if (s == "smooth") return PoissonVariant::smooth;
  if (s == "multiscale") return PoissonVariant::multiscale;
  throw ProblemError("unknown variant '" + s + "' (expected smooth or multiscale)");
}

PinnProblem::PinnProblem(std::string name, ResidualKind kind, std::size_t dim,
                         std::vector<double> coeffs, BatchSpec batch)
    : Problem(std::move(name), batch), kind_(kind), dim_(dim), coeffs_(std::move(coeffs)) {}

void PinnProblem::finalize(PointSet interior, PointSet boundary) {
  interior_ = std::move(interior);
  boundary_ = std::move(boundary);
  f_.resize(interior_.count);
  for (std::size_t i = 0; i < interior_.count; ++i) f_[i] = forcing(interior_.point(i));
  g_.resize(boundary_.count);
  for (std::size_t i = 0; i < boundary_.count; ++i) g_[i] = exact(boundary_.point(i));
  set_batch_spec(batch_spec());
}

Domain PinnProblem::domain() const {
  return {std::vector<double>(dim_, 0.0), std::vector<double>(dim_, 1.0)};
}

double PinnProblem::exact(std::span<const double> x) const {
  std::vector<Dual> xd(x.begin(), x.end());
  return exact_dual(xd).value;
}

double PinnProblem::residual(std::span<const double> lanes, std::span<const double> x) const {
  double r = -forcing(x);
  for (std::size_t l = 0; l < coeffs_.size(); ++l) r += coeffs_[l] * lanes[l];
  return r;
}

double PinnProblem::exact_residual(std::span<const double> x) const {
  std::vector<double> lanes(1 + 2 * dim_, 0.0);
  for (std::size_t a = 0; a < dim_; ++a) {
    std::vector<Dual> xd(x.begin(), x.end());
    xd[a] = Dual::variable(x[a]);
    const Dual u = exact_dual(xd);
    lanes[0] = u.value;
    lanes[1 + 2 * a] = u.d1;
    lanes[2 + 2 * a] = u.d2;
  }
  return residual(lanes, x);
}

ad::LossFn PinnProblem::loss(const net::Network* netp, std::vector<std::size_t> batch) const {
  const net::Network& net = require_net(netp);
  auto data = std::make_shared<PinnData>(PinnData{net, {}, {}, boundary_, {}, coeffs_, {}});
  data->interior = batch.empty() ? interior_ : interior_.gather(batch);
  data->neg_f.resize(data->interior.count);
  for (std::size_t i = 0; i < data->interior.count; ++i) {
    data->neg_f[i] = -f_[batch.empty() ? i : batch[i]];
  }
  data->neg_g.resize(g_.size());
  std::transform(g_.begin(), g_.end(), data->neg_g.begin(), std::negate<>());
  data->axes.resize(dim_);
  std::iota(data->axes.begin(), data->axes.end(), std::size_t{0});

  return ad::LossFn([data = std::shared_ptr<const PinnData>(data)](auto& tape) {
    const PinnData& d = *data;
    const ad::Var u = d.net.apply(tape, d.interior, d.axes, 2);
    const ad::Var r = tape.add_const(tape.lane_combine(u, d.coeffs, d.interior.count), d.neg_f);
    const ad::Var interior = tape.mean(tape.square(r));
    const ad::Var ub = d.net.apply(tape, d.boundary, {}, 0);
    const ad::Var bnd = tape.mean(tape.square(tape.add_const(ub, d.neg_g)));
    return tape.add(bnd, interior);
  });
}

void PinnProblem::export_csv(std::ostream& os) const {
  os << (dim_ == 1 ? "x" : "x,y") << ",kind,f,u_exact\n";
  auto row = [&](const PointSet& p, std::size_t i, const char* kind, double f) {
    for (std::size_t a = 0; a < dim_; ++a) os << p.at(a, i) << ',';
    os << kind << ',' << f << ',' << exact(p.point(i)) << '\n';
  };
  for (std::size_t i = 0; i < interior_.count; ++i) row(interior_, i, "interior", f_[i]);
  for (std::size_t i = 0; i < boundary_.count; ++i) {
    row(boundary_, i, "boundary", forcing(boundary_.point(i)));
  }
}

// ---------------------------------------------------------------------------

Poisson1D::Poisson1D(PoissonVariant variant, std::size_t n_r, std::uint64_t seed,
                     Sampling sampling, BatchSpec batch)
    : PinnProblem("poisson1d_" + to_string(variant), ResidualKind::poisson1d, 1, {0.0, 0.0, -1.0},
                  batch),
      variant_(variant) {
  if (n_r < 2) throw ProblemError("poisson1d needs N_r >= 2");
  finalize(unit_interval_points(n_r, seed, sampling), unit_interval_ends());
}

double Poisson1D::forcing(std::span<const double> x) const {
  double f = 4.0 * pi * pi * std::sin(2.0 * pi * x[0]);
  if (variant_ == PoissonVariant::multiscale) f += 250.0 * pi * pi * std::sin(50.0 * pi * x[0]);
  return f;
}

Dual Poisson1D::exact_dual(std::span<const Dual> x) const {
  Dual u = sin(2.0 * pi * x[0]);
  if (variant_ == PoissonVariant::multiscale) u += 0.1 * sin(50.0 * pi * x[0]);
  return u;
}

SingularOde::SingularOde(double eps, std::size_t n, std::uint64_t seed, Sampling sampling,
                         BatchSpec batch)
    : PinnProblem("singular_ode", ResidualKind::singular_ode, 1, {0.0, 1.0, -eps}, batch),
      eps_(eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ProblemError("singular_ode needs eps > 0");
  if (n < 2) throw ProblemError("singular_ode needs N >= 2");
  finalize(unit_interval_points(n, seed, sampling), unit_interval_ends());
}

double SingularOde::forcing(std::span<const double> x) const {
  const double h = 0.5 * pi;
  return eps_ * h * h * std::sin(h * x[0]) + h * std::cos(h * x[0]);
}

// (1 - e^{x/eps}) / (e^{1/eps} - 1), rewritten with every exponent <= 0 so
// that small eps neither overflows nor cancels.
Dual SingularOde::exact_dual(std::span<const Dual> x) const {
  const double tail = std::exp(-1.0 / eps_);
  const double denom = -std::expm1(-1.0 / eps_);
  const Dual layer = (exp((x[0] - 1.0) / eps_) - tail) / denom;
  return sin(0.5 * pi * x[0]) - layer;
}

Poisson2D::Poisson2D(std::size_t n_b, std::size_t n_f, std::uint64_t seed, BatchSpec batch)
    : PinnProblem("poisson2d", ResidualKind::poisson2d, 2, {0.0, 0.0, -1.0, 0.0, -1.0}, batch) {
  if (n_b < 4) throw ProblemError("poisson2d needs N_b >= 4");
  if (n_f < 1) throw ProblemError("poisson2d needs N_f >= 1");
  auto [interior, boundary] = unit_square_points(n_b, n_f, seed);
  finalize(std::move(interior), std::move(boundary));
}

double Poisson2D::forcing(std::span<const double> x) const {
  return 2.0 * pi * pi * std::sin(pi * x[0]) * std::sin(pi * x[1]) +
         20.0 * pi * pi * std::sin(10.0 * pi * x[0]) * std::sin(10.0 * pi * x[1]);
}

Dual Poisson2D::exact_dual(std::span<const Dual> x) const {
  return sin(pi * x[0]) * sin(pi * x[1]) + 0.1 * sin(10.0 * pi * x[0]) * sin(10.0 * pi * x[1]);
}

Helmholtz2D::Helmholtz2D(double k, std::size_t n_b, std::size_t n_f, std::uint64_t seed,
                         BatchSpec batch)
    : PinnProblem("helmholtz2d", ResidualKind::helmholtz2d, 2, {k * k, 0.0, 1.0, 0.0, 1.0}, batch),
      k_(k) {
  if (n_b < 4) throw ProblemError("helmholtz2d needs N_b >= 4");
  if (n_f < 1) throw ProblemError("helmholtz2d needs N_f >= 1");
  auto [interior, boundary] = unit_square_points(n_b, n_f, seed);
  finalize(std::move(interior), std::move(boundary));
}

double Helmholtz2D::forcing(std::span<const double> x) const {
  return (k_ * k_ - 17.0 * pi * pi) * std::sin(pi * x[0]) * std::sin(4.0 * pi * x[1]);
}

Dual Helmholtz2D::exact_dual(std::span<const Dual> x) const {
  return sin(pi * x[0]) * sin(4.0 * pi * x[1]);
}

// ---------------------------------------------------------------------------

std::string to_string(RegressionTarget t) {
  return t == RegressionTarget::multiscale_c1 ? "multiscale_c1" : "discontinuous_c2";
}

RegressionTarget regression_target_from_string(const std::string& s) {
  if (s == "multiscale_c1") return RegressionTarget::multiscale_c1;
  if (s == "discontinuous_c2") return RegressionTarget::discontinuous_c2;
  throw ProblemError("unknown regression target '" + s + "'");
}

double regression_target(RegressionTarget t, double x) {
  if (t == RegressionTarget::multiscale_c1) {
    return (x * x * x - x) * std::sin(4.0 * x) / 4.0 + std::sin(12.0 * x) / (x * x + 1.0);
  }
  return x <= 0.0 ? std::sin(4.0 * x) : 2.0 + x * std::sin(x);
}

Regression::Regression(RegressionTarget target, std::size_t n, std::uint64_t seed,
                       BatchSpec batch)
    : Problem("regression_" + to_string(target), batch), target_(target), points_(1, n) {
  if (n < 2) throw ProblemError("regression needs N >= 2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  y_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    points_.at(0, i) = u(rng);
    y_[i] = regression_target(target_, points_.at(0, i));
  }
  set_batch_spec(batch);
}

double Regression::exact(std::span<const double> x) const { return regression_target(target_, x[0]); }

ad::LossFn Regression::loss(const net::Network* netp, std::vector<std::size_t> batch) const {
  const net::Network& net = require_net(netp);
  auto data = std::make_shared<RegressionData>(RegressionData{net, {}, {}});
  data->points = batch.empty() ? points_ : points_.gather(batch);
  data->neg_y.resize(data->points.count);
  for (std::size_t i = 0; i < data->points.count; ++i) {
    data->neg_y[i] = -y_[batch.empty() ? i : batch[i]];
  }
  return ad::LossFn([data = std::shared_ptr<const RegressionData>(data)](auto& tape) {
    const ad::Var u = data->net.apply(tape, data->points, {}, 0);
    return tape.mean(tape.square(tape.add_const(u, data->neg_y)));
  });
}

void Regression::export_csv(std::ostream& os) const {
  os << "x,y,u_exact\n";
  for (std::size_t i = 0; i < points_.count; ++i) {
    write_row(os, std::array<double, 3>{points_.at(0, i), y_[i], y_[i]});
  }
}

// ---------------------------------------------------------------------------

BatchSampler::BatchSampler(std::size_t dataset_size, const BatchSpec& spec)
    : n_(dataset_size), spec_(spec) {
  if (!spec_.minibatch) return;
  if (spec_.size == 0 || spec_.size > n_) {
    throw ProblemError("batch size " + std::to_string(spec_.size) + " invalid for dataset of " +
                       std::to_string(n_) + " points");
  }
  per_epoch_ = (n_ + spec_.size - 1) / spec_.size;
}

std::vector<std::size_t> BatchSampler::batch(std::uint64_t iteration) const {
  std::vector<std::size_t> perm(n_);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (!spec_.minibatch) return perm;
  const std::uint64_t epoch = iteration / per_epoch_;
  const std::size_t k = iteration % per_epoch_;
  std::seed_seq seq{static_cast<std::uint32_t>(spec_.seed), static_cast<std::uint32_t>(spec_.seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t begin = k * spec_.size;
  const std::size_t end = std::min(n_, begin + spec_.size);
  return {perm.begin() + static_cast<std::ptrdiff_t>(begin),
          perm.begin() + static_cast<std::ptrdiff_t>(end)};
}

std::vector<std::size_t> sample_batch(const Problem& problem, std::uint64_t iteration) {
  return BatchSampler(problem.dataset_size(), problem.batch_spec()).batch(iteration);
}

}  // namespace isgd::prob
