#include "isgd/diagnostics/diagnostics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace isgd::diag {

std::string to_string(SpectrumMethod m) { return m == SpectrumMethod::dense ? "dense" : "lanczos"; }

SpectrumMethod spectrum_method_from_string(const std::string& s) {
  if (s == "dense") return SpectrumMethod::dense;
  if (s == "lanczos") return SpectrumMethod::lanczos;
  throw SpectrumError("unknown spectrum method '" + s + "' (expected dense or lanczos)");
}

double SpectrumReport::lambda_max() const {
  if (!largest.empty()) return largest.back();
  if (eigenvalues.empty()) throw SpectrumError("empty spectrum");
  return eigenvalues.back();
}

double SpectrumReport::lambda_min() const {
  if (!smallest.empty()) return smallest.front();
  if (eigenvalues.empty()) throw SpectrumError("empty spectrum");
  return eigenvalues.front();
}

SpectrumReport dense_spectrum(const HvpFn& op, const ParamVector& like) {
  const std::size_t n = like.size();
  if (n > kDenseLimit) {
    throw SpectrumError("dense spectrum needs at most " + std::to_string(kDenseLimit) +
                        " parameters (got " + std::to_string(n) + "); use lanczos");
  }
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd h(ni, ni);
  ParamVector e = like.zeros_like();
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const ParamVector col = op(e);
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    }
  }
  SpectrumReport r;
  r.method = SpectrumMethod::dense;
  r.mv_products = n;
  const double scale = h.cwiseAbs().rowwise().sum().maxCoeff();
  const Eigen::MatrixXd skew = h - h.transpose();
  r.asymmetry = scale > 0.0 ? skew.cwiseAbs().rowwise().sum().maxCoeff() / scale : 0.0;
  const Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw SpectrumError("symmetric eigensolver failed");
  const Eigen::VectorXd& ev = solver.eigenvalues();
  r.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  std::sort(r.eigenvalues.begin(), r.eigenvalues.end());
  return r;
}

SpectrumReport lanczos_spectrum(const HvpFn& op, const ParamVector& like,
                                const LanczosOptions& options) {
  const std::size_t n = like.size();
  if (n == 0) throw SpectrumError("empty parameter vector");
  const std::size_t m = std::min(options.max_iters, n);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  ParamVector q = like.zeros_like();
  for (double& x : q.values()) x = normal(rng);
  q *= 1.0 / q.norm();

  std::vector<ParamVector> basis;
  std::vector<double> alpha;
  std::vector<double> beta;
  SpectrumReport r;
  r.method = SpectrumMethod::lanczos;
  r.converged = false;

  Eigen::VectorXd ritz;
  Eigen::VectorXd resid;
  auto solve_tridiagonal = [&](double last_beta) {
    const auto j = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(j, j);
    for (Eigen::Index i = 0; i < j; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < j) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(t);
    ritz = solver.eigenvalues();
    resid = (last_beta * solver.eigenvectors().row(j - 1).transpose()).cwiseAbs();
  };
  auto extremes_converged = [&]() {
    const Eigen::Index last = ritz.size() - 1;
    const double big = std::max(std::abs(ritz(0)), std::abs(ritz(last)));
    auto ok = [&](Eigen::Index i) {
      return resid(i) <= options.tolerance * std::max(std::abs(ritz(i)), 1e-10 * big);
    };
    return ok(0) && ok(last);
  };

  for (std::size_t j = 0; j < m; ++j) {
    basis.push_back(q);
    ParamVector w = op(q);
    ++r.mv_products;
    const double a = w.dot(q);
    alpha.push_back(a);
    w.axpy(-a, q);
    if (j > 0) w.axpy(-beta.back(), basis[j - 1]);
    for (int pass = 0; pass < 2; ++pass) {
      for (const ParamVector& v : basis) w.axpy(-w.dot(v), v);
    }
    const double b = w.norm();
    double scale = 0.0;
    for (double x : alpha) scale = std::max(scale, std::abs(x));
    for (double x : beta) scale = std::max(scale, std::abs(x));
    const bool breakdown = b <= 1e-12 * std::max(scale, 1e-300);
    const bool check = breakdown || j + 1 == m || (j + 1 >= std::min(options.k, m) && j % 5 == 4);
    if (check) {
      solve_tridiagonal(breakdown ? 0.0 : b);
      if (breakdown || extremes_converged()) {
        r.converged = true;
        break;
      }
      if (j + 1 == m) break;
    }
    beta.push_back(b);
    q = std::move(w);
    q *= 1.0 / b;
  }
  if (ritz.size() == 0) solve_tridiagonal(0.0);

  const auto count = static_cast<std::size_t>(ritz.size());
  r.eigenvalues.assign(ritz.data(), ritz.data() + count);
  const std::size_t k = std::min(options.k, count);
  for (std::size_t i = 0; i < k; ++i) {
    r.smallest.push_back(ritz(static_cast<Eigen::Index>(i)));
    r.smallest_residuals.push_back(resid(static_cast<Eigen::Index>(i)));
    r.largest.push_back(ritz(static_cast<Eigen::Index>(count - k + i)));
    r.largest_residuals.push_back(resid(static_cast<Eigen::Index>(count - k + i)));
  }
  return r;
}

SpectrumReport hessian_spectrum(const LossFn& loss, const ParamVector& theta,
                                SpectrumMethod method, const LanczosOptions& options,
                                std::string snapshot) {
  HvpFn op = [&](const ParamVector& v) { return ad::hvp(loss, theta, v); };
  SpectrumReport r = method == SpectrumMethod::dense ? dense_spectrum(op, theta)
                                                     : lanczos_spectrum(op, theta, options);
  r.snapshot = std::move(snapshot);
  return r;
}

void write_spectrum_csv(std::ostream& os, const SpectrumReport& report) {
  const auto old = os.precision(17);
  if (report.method == SpectrumMethod::dense) {
    os << "index,eigenvalue\n";
    for (std::size_t i = 0; i < report.eigenvalues.size(); ++i) {
      os << i << ',' << report.eigenvalues[i] << '\n';
    }
  } else {
    os << "index,eigenvalue,end,residual\n";
    for (std::size_t i = 0; i < report.smallest.size(); ++i) {
      os << i << ',' << report.smallest[i] << ",smallest," << report.smallest_residuals[i] << '\n';
    }
    for (std::size_t i = 0; i < report.largest.size(); ++i) {
      os << i << ',' << report.largest[i] << ",largest," << report.largest_residuals[i] << '\n';
    }
  }
  os.precision(old);
}

// ---------------------------------------------------------------------------

namespace {

DecayReport finish(double lhs, double rhs, double grad_norm, bool exact) {
  DecayReport d;
  d.lhs = lhs;
  d.rhs = rhs;
  d.grad_norm = grad_norm;
  d.exact = exact;
  const double scale = std::max(std::abs(lhs), std::abs(rhs));
  d.residual = scale > 0.0 ? std::abs(lhs - rhs) / scale : 0.0;
  return d;
}

bool constant_hessian(const prob::Problem& problem) {
  return dynamic_cast<const prob::QuadraticStiff*>(&problem) != nullptr;
}

}  // namespace

DecayReport gd_decay_identity(const LossFn& loss, const ParamVector& theta_n,
                              const ParamVector& theta_next, double alpha, bool constant) {
  const auto at_n = ad::grad(loss, theta_n);
  const double l_next = ad::value(loss, theta_next);
  const ParamVector& g = at_n.gradient;
  const double gg = g.dot(g);
  const double ghg = gg > 0.0 ? g.dot(ad::hvp(loss, theta_n, g)) : 0.0;
  return finish(l_next - at_n.value, -alpha * gg + 0.5 * alpha * alpha * ghg, std::sqrt(gg),
                constant);
}

DecayReport igd_decay_identity(const LossFn& loss, const ParamVector& theta_n,
                               const ParamVector& theta_next, double alpha, bool constant) {
  const auto at_next = ad::grad(loss, theta_next);
  const double l_n = ad::value(loss, theta_n);
  const ParamVector& g = at_next.gradient;
  const double gg = g.dot(g);
  const double ghg = gg > 0.0 ? g.dot(ad::hvp(loss, theta_next, g)) : 0.0;
  return finish(at_next.value - l_n, -alpha * gg - 0.5 * alpha * alpha * ghg, std::sqrt(gg),
                constant);
}

DecayReport gd_decay_identity(const prob::Problem& problem, const net::Network* net,
                              const ParamVector& theta_n, const ParamVector& theta_next,
                              double alpha) {
  return gd_decay_identity(problem.loss(net), theta_n, theta_next, alpha,
                           constant_hessian(problem));
}

DecayReport igd_decay_identity(const prob::Problem& problem, const net::Network* net,
                               const ParamVector& theta_n, const ParamVector& theta_next,
                               double alpha) {
  return igd_decay_identity(problem.loss(net), theta_n, theta_next, alpha,
                            constant_hessian(problem));
}

void write_decay_csv(std::ostream& os, std::span<const DecayReport> reports) {
  const auto old = os.precision(17);
  os << "iteration,lhs,rhs,residual,grad_norm,exact\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& d = reports[i];
    os << i << ',' << d.lhs << ',' << d.rhs << ',' << d.residual << ',' << d.grad_norm << ','
       << (d.exact ? "true" : "false") << '\n';
  }
  os.precision(old);
}

// ---------------------------------------------------------------------------

net::PointSet uniform_grid(const prob::Domain& domain, std::size_t per_axis) {
  const std::size_t dim = domain.dim();
  if (dim == 0 || per_axis < 2) throw std::invalid_argument("grid needs a domain and >= 2 points");
  std::size_t total = 1;
  for (std::size_t a = 0; a < dim; ++a) total *= per_axis;
  net::PointSet p(dim, total);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    // first axis varies slowest
    for (std::size_t a = dim; a-- > 0;) {
      const std::size_t idx = rest % per_axis;
      rest /= per_axis;
      const double t = static_cast<double>(idx) / static_cast<double>(per_axis - 1);
      p.at(a, i) = domain.lo[a] + t * (domain.hi[a] - domain.lo[a]);
    }
  }
  return p;
}

net::PointSet default_grid(const prob::Domain& domain) {
  return uniform_grid(domain, domain.dim() == 1 ? 1001 : 101);
}

ErrorReport rel_l2_error(std::span<const double> predicted, std::span<const double> exact) {
  if (predicted.size() != exact.size()) throw std::invalid_argument("size mismatch");
  double diff2 = 0.0;
  double ref2 = 0.0;
  ErrorReport r;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const double d = predicted[i] - exact[i];
    diff2 += d * d;
    ref2 += exact[i] * exact[i];
    r.max_abs = std::max(r.max_abs, std::abs(d));
  }
  if (!(ref2 > 0.0)) throw std::invalid_argument("exact solution vanishes on the grid");
  r.rel_l2 = std::sqrt(diff2 / ref2);
  return r;
}

ErrorReport rel_l2_error(const net::Network& net, const ParamVector& theta, const ExactFn& exact,
                         const net::PointSet& grid) {
  if (!exact) throw std::invalid_argument("no exact solution supplied");
  const std::vector<double> u = net.forward_batch(theta, grid);
  std::vector<double> ref(grid.count);
  for (std::size_t i = 0; i < grid.count; ++i) ref[i] = exact(grid.point(i));
  return rel_l2_error(u, ref);
}

ErrorReport rel_l2_error(const prob::Problem& problem, const net::Network& net,
                         const ParamVector& theta) {
  if (!problem.has_exact()) {
    throw std::invalid_argument("problem '" + problem.name() + "' has no exact solution");
  }
  return rel_l2_error(net, theta, [&](std::span<const double> x) { return problem.exact(x); },
                      default_grid(problem.domain()));
}

}  // namespace isgd::diag
