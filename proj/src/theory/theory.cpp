#include "isgd/theory/theory.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <random>

#include "isgd/optimizers/optimizers.hpp"

namespace isgd::theory {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Eigen::MatrixXd input_products(const TheoremData& data) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      g(i, j) = dot(data.x[static_cast<std::size_t>(i)], data.x[static_cast<std::size_t>(j)]);
    }
  }
  return g;
}

void require_data(const TheoremData& data) {
  if (data.size() == 0 || data.dim() == 0) throw TheoryError("empty data set");
  if (data.y.size() != data.size()) throw TheoryError("targets and inputs differ in count");
  for (const auto& x : data.x) {
    if (x.size() != data.dim()) throw TheoryError("inputs differ in dimension");
  }
}

constexpr std::size_t kChunk = 1 << 16;

// Per-chunk generator: the draws of chunk c depend only on (seed, c).
std::mt19937_64 chunk_rng(std::uint64_t seed, std::size_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32)};
  return std::mt19937_64(seq);
}

// Calls visit(s) with s_i = ds(w . x_i) for every draw w ~ N(0, I_d).
template <class Visit>
void for_each_draw(const TheoremData& data, const Derivative& ds, std::size_t samples,
                   std::uint64_t seed, Visit&& visit) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  std::vector<double> w(d);
  std::vector<double> s(n);
  std::normal_distribution<double> normal;
  for (std::size_t start = 0, c = 0; start < samples; start += kChunk, ++c) {
    std::mt19937_64 rng = chunk_rng(seed, c);
    normal.reset();
    const std::size_t stop = std::min(samples, start + kChunk);
    for (std::size_t k = start; k < stop; ++k) {
      for (double& v : w) v = normal(rng);
      for (std::size_t i = 0; i < n; ++i) s[i] = ds(dot(w, data.x[i]));
      visit(std::span<const double>(s));
    }
  }
}

}  // namespace

net::PointSet TheoremData::points() const {
  net::PointSet p(dim(), size());
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t a = 0; a < dim(); ++a) p.at(a, i) = x[i][a];
  }
  return p;
}

double TheoremData::max_abs_cosine() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = i + 1; j < size(); ++j) {
      const double c = dot(x[i], x[j]) / std::sqrt(dot(x[i], x[i]) * dot(x[j], x[j]));
      worst = std::max(worst, std::abs(c));
    }
  }
  return worst;
}

void TheoremData::require_non_parallel() const {
  require_data(*this);
  for (const auto& xi : x) {
    if (!(dot(xi, xi) > 0.0)) throw TheoryError("zero input vector");
  }
  if (max_abs_cosine() >= 1.0 - 1e-6) throw TheoryError("two inputs are parallel");
}

TheoremData make_unit_data(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n == 0 || d == 0) throw TheoryError("need n > 0 and d > 0");
  if (d == 1 && n > 1) throw TheoryError("more than one non-parallel vector needs d >= 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> target(-1.0, 1.0);
  TheoremData data;
  while (data.x.size() < n) {
    std::vector<double> v(d);
    for (double& c : v) c = normal(rng);
    const double norm = std::sqrt(dot(v, v));
    if (!(norm > 0.0)) continue;
    for (double& c : v) c /= norm;
    bool ok = true;
    for (const auto& u : data.x) ok = ok && std::abs(dot(u, v)) < 1.0 - 1e-6;
    if (ok) data.x.push_back(std::move(v));
  }
  for (std::size_t i = 0; i < n; ++i) data.y.push_back(target(rng));
  return data;
}

Derivative activation_derivative(ad::Activation act) {
  if (act == ad::Activation::relu) return [](double z) { return z > 0.0 ? 1.0 : 0.0; };
  return [](double z) {
    const double t = std::tanh(z);
    return 1.0 - t * t;
  };
}

double GramMatrix::lambda_min() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (entries + entries.transpose()),
                                                        Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

double GramMatrix::asymmetry() const {
  const double scale = entries.cwiseAbs().maxCoeff();
  return scale > 0.0 ? (entries - entries.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
}

double spectral_norm(const Eigen::MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

GramMatrix gram_from_weights(std::span<const double> w, std::size_t m, const TheoremData& data,
                             const Derivative& ds) {
  require_data(data);
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  if (m == 0 || w.size() != m * d) throw TheoryError("weights are not m x d");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(n));
  Eigen::VectorXd s(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < m; ++r) {
    const auto wr = w.subspan(r * d, d);
    for (std::size_t i = 0; i < n; ++i) s(static_cast<Eigen::Index>(i)) = ds(dot(wr, data.x[i]));
    acc.noalias() += s * s.transpose();
  }
  GramMatrix g;
  g.entries = input_products(data).cwiseProduct(acc) / static_cast<double>(m);
  g.source = GramSource::empirical;
  g.n_samples = n;
  return g;
}

GramMatrix gram_empirical(const net::Network& net, const ParamVector& theta,
                          const TheoremData& data) {
  if (!net.theorem_architecture()) throw TheoryError("gram_empirical needs the theorem network");
  net.require_compatible(theta);
  if (net.config().input_dim != data.dim()) throw TheoryError("data dimension does not match");
  const auto& block = net.layout()->block(0, ad::BlockKind::weight);
  return gram_from_weights(theta.block(block), block.rows, data,
                           activation_derivative(net.config().activation));
}

GramMatrix gram_limit(const TheoremData& data, const Derivative& ds, std::size_t mc_samples,
                      std::uint64_t seed) {
  require_data(data);
  if (mc_samples < 10000) throw TheoryError("gram_limit needs at least 1e4 Monte-Carlo samples");
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(n, n);
  for_each_draw(data, ds, mc_samples, seed, [&](std::span<const double> s) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double p = s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(j)];
        sum(i, j) += p;
        sum2(i, j) += p * p;
      }
    }
  });
  const double m = static_cast<double>(mc_samples);
  const Eigen::MatrixXd mean = sum / m;
  const Eigen::MatrixXd var =
      ((sum2 - m * mean.cwiseProduct(mean)) / (m - 1.0)).cwiseMax(0.0);
  const Eigen::MatrixXd xx = input_products(data);

  GramMatrix g;
  g.source = GramSource::limit;
  g.n_samples = data.size();
  g.mc_samples = mc_samples;
  g.seed = seed;
  g.entries = xx.cwiseProduct(mean);
  g.standard_error = xx.cwiseAbs().cwiseProduct((var / m).cwiseSqrt());

  // Standard error of v^T H v along the bottom eigenvector: the per-draw value
  // is |sum_i v_i s_i x_i|^2, replayed from the same draws.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g.entries);
  const Eigen::VectorXd v = solver.eigenvectors().col(0);
  const std::size_t d = data.dim();
  double zs = 0.0;
  double zs2 = 0.0;
  std::vector<double> acc(d);
  for_each_draw(data, ds, mc_samples, seed, [&](std::span<const double> s) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double c = v(static_cast<Eigen::Index>(i)) * s[i];
      for (std::size_t a = 0; a < d; ++a) acc[a] += c * data.x[i][a];
    }
    const double z = dot(acc, acc);
    zs += z;
    zs2 += z * z;
  });
  const double zmean = zs / m;
  const double zvar = std::max(0.0, (zs2 - m * zmean * zmean) / (m - 1.0));
  g.lambda_min_stderr = std::sqrt(zvar / m);
  return g;
}

ad::LossFn quadratic_loss(const net::Network& net, const TheoremData& data) {
  require_data(data);
  auto points = std::make_shared<const net::PointSet>(data.points());
  std::vector<double> neg_y(data.y.size());
  std::transform(data.y.begin(), data.y.end(), neg_y.begin(), [](double v) { return -v; });
  return ad::LossFn([&net, points, neg_y](auto& tape) {
    const ad::Var u = net.apply(tape, *points, {}, 0);
    return tape.scale(tape.sum(tape.square(tape.add_const(u, neg_y))), 0.5);
  });
}

TheoremSetup build_network(const TheoremInstance& instance) {
  instance.data.require_non_parallel();
  net::NetworkConfig config;
  config.input_dim = instance.data.dim();
  config.hidden_widths = {instance.width};
  config.output_dim = 1;
  config.activation = instance.activation;
  config.output_scaling = net::OutputScaling::inv_sqrt_m;
  auto [net, theta] = net::build(config, {net::InitKind::theorem_init, instance.init_seed});
  return {std::move(net), std::move(theta)};
}

TheoremInstance make_instance(const InstanceOptions& options, GramMatrix* limit) {
  TheoremInstance inst;
  inst.data = make_unit_data(options.n, options.d, options.data_seed);
  inst.width = options.width;
  inst.init_seed = options.init_seed;
  inst.activation = options.activation;
  GramMatrix h = gram_limit(inst.data, activation_derivative(options.activation),
                            options.mc_samples, options.mc_seed);
  inst.lambda0 = h.lambda_min();
  if (!(inst.lambda0 > 0.0)) throw TheoryError("H_inf is not positive definite");
  const double n = static_cast<double>(options.n);
  inst.alpha = options.alpha_scale * inst.lambda0 / (n * n);
  if (limit) *limit = std::move(h);
  return inst;
}

TheoremReport verify_theorem(const TheoremInstance& instance, std::size_t k) {
  if (!(instance.alpha >= 0.0)) throw TheoryError("alpha must be non-negative");
  if (!(instance.lambda0 > 0.0)) throw TheoryError("lambda0 must be positive");
  const TheoremSetup setup = build_network(instance);
  const ad::LossFn loss = quadratic_loss(setup.net, instance.data);
  const double alpha = instance.alpha;
  const double rate = 1.0 / (1.0 + alpha * instance.lambda0 / 2.0);

  TheoremReport report;
  report.trajectory.reserve(k + 1);
  report.trajectory.push_back(setup.theta0);
  const double l0 = ad::value(loss, setup.theta0);
  report.steps.push_back({0, l0, l0, 0.0, 0, 0.0});

  opt::LbfgsOptions options;
  options.tolerance = instance.inner_tolerance;
  options.max_iters = instance.inner_max_iters;
  for (std::size_t n = 1; n <= k; ++n) {
    const ParamVector& anchor = report.trajectory.back();
    const opt::GradFn prox = [&](const ParamVector& w) {
      ad::ValueAndGradient vg = ad::grad(loss, w);
      ParamVector diff = w - anchor;
      ad::ValueAndGradient out;
      out.value = 0.5 * diff.dot(diff) + alpha * vg.value;
      diff.axpy(alpha, vg.gradient);
      out.gradient = std::move(diff);
      return out;
    };
    opt::LbfgsResult inner = opt::lbfgs_minimize(prox, anchor, options);
    if (!inner.converged) report.inner_solves_converged = false;
    const double ln = ad::value(loss, inner.theta);
    TheoremStep step;
    step.n = n;
    step.loss = ln;
    step.bound = l0 * std::pow(rate, static_cast<double>(n));
    step.margin = step.bound - ln;
    step.inner_iterations = inner.iterations;
    step.inner_grad_norm = inner.grad_norm;
    if (!(ln <= step.bound)) report.bound_held = false;
    if (!(ln <= report.steps.back().loss)) report.monotone = false;
    report.steps.push_back(step);
    report.trajectory.push_back(std::move(inner.theta));
  }
  return report;
}

LemmaReport verify_lemmas(const TheoremInstance& instance, const TheoremReport& theorem) {
  if (theorem.trajectory.empty()) throw TheoryError("empty trajectory");
  const TheoremSetup setup = build_network(instance);
  const auto& block = setup.net.layout()->block(0, ad::BlockKind::weight);
  const std::size_t m = block.rows;
  const std::size_t d = block.cols;
  const std::size_t n = instance.data.size();
  const net::PointSet points = instance.data.points();
  const Eigen::Map<const Eigen::VectorXd> y(instance.data.y.data(), static_cast<Eigen::Index>(n));

  auto residual = [&](const ParamVector& theta) {
    const std::vector<double> u = setup.net.forward_batch(theta, points);
    return Eigen::VectorXd(y - Eigen::Map<const Eigen::VectorXd>(u.data(), u.size()));
  };

  const auto w0 = theorem.trajectory.front().block(block);
  const GramMatrix h0 = gram_empirical(setup.net, theorem.trajectory.front(), instance.data);
  Eigen::VectorXd prev = residual(theorem.trajectory.front());

  LemmaReport report;
  for (std::size_t s = 0; s < theorem.trajectory.size(); ++s) {
    const ParamVector& theta = theorem.trajectory[s];
    const auto ws = theta.block(block);
    LemmaStep step;
    step.s = s;
    for (std::size_t r = 0; r < m; ++r) {
      double sq = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        const double diff = ws[r * d + a] - w0[r * d + a];
        sq += diff * diff;
      }
      step.max_displacement = std::max(step.max_displacement, std::sqrt(sq));
    }
    const GramMatrix hs = gram_empirical(setup.net, theta, instance.data);
    step.gram_change = spectral_norm(hs.entries - h0.entries);
    step.gram_lambda_min = hs.lambda_min();
    const Eigen::VectorXd res = residual(theta);
    if (s > 0) {
      const Eigen::MatrixXd ih =
          Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) +
          instance.alpha * hs.entries;
      step.i0_norm = (prev - ih * res).norm();
      step.i0_bound = instance.alpha * instance.lambda0 / 8.0 * res.norm();
      if (!(step.i0_norm <= step.i0_bound)) report.i0_held = false;
    }
    if (!(step.gram_change <= instance.lambda0 / 4.0)) report.gram_change_held = false;
    if (!(step.gram_lambda_min >= instance.lambda0 / 2.0)) report.lambda_min_held = false;
    report.max_displacement = std::max(report.max_displacement, step.max_displacement);
    report.steps.push_back(step);
    prev = res;
  }
  return report;
}

ScalingReport displacement_scaling(const TheoremInstance& base,
                                   std::span<const std::size_t> widths,
                                   std::span<const std::uint64_t> seeds, std::size_t k) {
  if (widths.size() < 2 || seeds.empty()) throw TheoryError("need >= 2 widths and >= 1 seed");
  ScalingReport report;
  for (std::size_t m : widths) {
    ScalingPoint p;
    p.width = m;
    double log_sum = 0.0;
    for (std::uint64_t seed : seeds) {
      TheoremInstance inst = base;
      inst.width = m;
      inst.init_seed = seed;
      const TheoremReport tr = verify_theorem(inst, k);
      const LemmaReport lr = verify_lemmas(inst, tr);
      const double r0 = std::sqrt(2.0 * tr.steps.front().loss);  // ||y - u(0)||
      p.raw.push_back(lr.max_displacement);
      log_sum += std::log(lr.max_displacement / r0);
    }
    p.normalized_displacement = std::exp(log_sum / static_cast<double>(seeds.size()));
    report.points.push_back(std::move(p));
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(report.points.size());
  for (const auto& p : report.points) {
    const double lx = std::log(static_cast<double>(p.width));
    const double ly = std::log(p.normalized_displacement);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  report.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return report;
}

void write_theory_csv(std::ostream& os, const TheoremReport& theorem, const LemmaReport* lemmas) {
  const auto old = os.precision(17);
  os << "iteration,loss,bound,margin";
  if (lemmas) os << ",max_displacement,gram_change,gram_lambda_min,i0_norm,i0_bound";
  os << '\n';
  for (std::size_t i = 0; i < theorem.steps.size(); ++i) {
    const auto& t = theorem.steps[i];
    os << t.n << ',' << t.loss << ',' << t.bound << ',' << t.margin;
    if (lemmas && i < lemmas->steps.size()) {
      const auto& l = lemmas->steps[i];
      os << ',' << l.max_displacement << ',' << l.gram_change << ',' << l.gram_lambda_min << ',';
      if (i > 0) os << l.i0_norm << ',' << l.i0_bound;
      else os << ',';
    }
    os << '\n';
  }
  os.precision(old);
}

void write_theory_summary(std::ostream& os, const TheoremInstance& instance,
                          const TheoremReport& theorem, const LemmaReport* lemmas) {
  const auto yes = [](bool b) { return b ? "yes" : "no"; };
  const auto old = os.precision(10);
  os << "samples N: " << instance.data.size() << '\n'
     << "input dim d: " << instance.data.dim() << '\n'
     << "width m: " << instance.width << '\n'
     << "activation: " << net::to_string(instance.activation) << '\n'
     << "lambda0: " << instance.lambda0 << '\n'
     << "alpha: " << instance.alpha << '\n'
     << "delta: " << instance.delta << '\n'
     << "init seed: " << instance.init_seed << '\n'
     << "steps: " << (theorem.steps.empty() ? 0 : theorem.steps.size() - 1) << '\n';
  if (!theorem.steps.empty()) {
    double worst = theorem.steps.front().margin;
    for (const auto& s : theorem.steps) worst = std::min(worst, s.margin);
    os << "initial loss: " << theorem.steps.front().loss << '\n'
       << "final loss: " << theorem.steps.back().loss << '\n'
       << "final bound: " << theorem.steps.back().bound << '\n'
       << "smallest margin: " << worst << '\n';
  }
  os << "bound held: " << yes(theorem.bound_held) << '\n'
     << "loss monotone: " << yes(theorem.monotone) << '\n'
     << "inner solves converged: " << yes(theorem.inner_solves_converged) << '\n';
  if (lemmas) {
    os << "max weight displacement: " << lemmas->max_displacement << '\n'
       << "gram change <= lambda0/4: " << yes(lemmas->gram_change_held) << '\n'
       << "lambda_min(H) >= lambda0/2: " << yes(lemmas->lambda_min_held) << '\n'
       << "I0 bound held: " << yes(lemmas->i0_held) << '\n';
  }
  os.precision(old);
}

}  // namespace isgd::theory
