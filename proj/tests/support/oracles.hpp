#pragma once

// Independent reference implementations for the test suites.
//
// The quad-precision oracle re-implements network evaluation, input jets and
// every loss from scratch in __float128, so central differences of it are
// free of double rounding (cancellation error ~1e-34 |L| / h). Only the
// sampled points and stored forcing/boundary values are shared with the code
// under test.

#include <quadmath.h>

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "isgd/autodiff/param_vector.hpp"
#include "isgd/network/network.hpp"
#include "isgd/problems/problems.hpp"

namespace oracle {

using quad = __float128;

// value, d/dx_a, d2/dx_a^2
struct Jet {
  quad v = 0;
  quad d1 = 0;
  quad d2 = 0;
};

struct DenseNet {
  std::size_t input_dim = 1;
  std::vector<std::size_t> widths;  // hidden
  bool theorem = false;             // W only, m^{-1/2} a^T tanh(W x)
  std::vector<double> frozen;

  explicit DenseNet(const isgd::net::Network& net)
      : input_dim(net.config().input_dim),
        widths(net.config().hidden_widths),
        theorem(net.theorem_architecture()),
        frozen(net.frozen_output()) {
    if (net.config().activation != isgd::net::Activation::tanh) {
      throw std::invalid_argument("oracle supports tanh networks only");
    }
  }

  // Output jet along `axis` (axis == input_dim means no derivative seed).
  Jet eval(std::span<const quad> p, std::span<const double> x, std::size_t axis) const {
    std::vector<Jet> h(input_dim);
    for (std::size_t d = 0; d < input_dim; ++d) h[d] = {quad(x[d]), d == axis ? quad(1) : quad(0), 0};
    std::size_t off = 0;
    if (theorem) {
      const std::size_t m = widths.front();
      Jet out;
      for (std::size_t r = 0; r < m; ++r) {
        Jet z;
        for (std::size_t d = 0; d < input_dim; ++d) {
          const quad w = p[r * input_dim + d];
          z.v += w * h[d].v;
          z.d1 += w * h[d].d1;
          z.d2 += w * h[d].d2;
        }
        const Jet t = tanh_jet(z);
        out.v += frozen[r] * t.v;
        out.d1 += frozen[r] * t.d1;
        out.d2 += frozen[r] * t.d2;
      }
      const quad s = 1 / sqrtq(quad(m));
      return {out.v * s, out.d1 * s, out.d2 * s};
    }
    std::size_t fan_in = input_dim;
    const std::size_t layers = widths.size() + 1;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t fan_out = l + 1 < layers ? widths[l] : 1;
      const quad* w = p.data() + off;
      const quad* b = w + fan_out * fan_in;
      off += fan_out * fan_in + fan_out;
      std::vector<Jet> z(fan_out);
      for (std::size_t i = 0; i < fan_out; ++i) {
        Jet acc{b[i], 0, 0};
        for (std::size_t j = 0; j < fan_in; ++j) {
          acc.v += w[i * fan_in + j] * h[j].v;
          acc.d1 += w[i * fan_in + j] * h[j].d1;
          acc.d2 += w[i * fan_in + j] * h[j].d2;
        }
        z[i] = l + 1 < layers ? tanh_jet(acc) : acc;
      }
      h = std::move(z);
      fan_in = fan_out;
    }
    return h[0];
  }

  static Jet tanh_jet(const Jet& z) {
    const quad t = tanhq(z.v);
    const quad s = 1 - t * t;
    return {t, s * z.d1, -2 * t * s * z.d1 * z.d1 + s * z.d2};
  }
};

using QuadLoss = std::function<quad(std::span<const quad>)>;

inline quad square(quad a) { return a * a; }

/// The loss of `problem` (full batch) as a quad-precision function of theta.
inline QuadLoss quad_loss(const isgd::prob::Problem& problem, const isgd::net::Network* net) {
  using namespace isgd::prob;
  if (const auto* q = dynamic_cast<const QuadraticStiff*>(&problem)) {
    const double k1 = q->k1(), k2 = q->k2();
    const auto s = q->theta_star();
    return [=](std::span<const quad> p) {
      return quad(0.5) * k1 * square(p[0] - s[0]) + quad(0.5) * k2 * square(p[1] - s[1]);
    };
  }
  DenseNet dn(*net);
  if (const auto* r = dynamic_cast<const Regression*>(&problem)) {
    const PointSet pts = r->points();
    const std::vector<double> y = r->targets();
    return [=](std::span<const quad> p) {
      quad acc = 0;
      for (std::size_t i = 0; i < pts.count; ++i) {
        acc += square(dn.eval(p, pts.point(i), 1).v - y[i]);
      }
      return acc / quad(pts.count);
    };
  }
  const auto& pinn = dynamic_cast<const PinnProblem&>(problem);
  const PointSet in = pinn.interior();
  const PointSet bd = pinn.boundary();
  const std::vector<double> f = pinn.forcing_values();
  const std::vector<double> g = pinn.boundary_values();
  const ResidualKind kind = pinn.kind();
  quad eps = 0, k2 = 0;
  if (const auto* ode = dynamic_cast<const SingularOde*>(&problem)) eps = ode->eps();
  if (const auto* h = dynamic_cast<const Helmholtz2D*>(&problem)) {
    k2 = quad(h->wavenumber()) * h->wavenumber();
  }
  return [=](std::span<const quad> p) {
    quad interior = 0;
    for (std::size_t i = 0; i < in.count; ++i) {
      const auto x = in.point(i);
      const Jet ux = dn.eval(p, x, 0);
      quad r = 0;
      switch (kind) {
        case ResidualKind::poisson1d: r = -ux.d2; break;
        case ResidualKind::singular_ode: r = -eps * ux.d2 + ux.d1; break;
        case ResidualKind::poisson2d: r = -(ux.d2 + dn.eval(p, x, 1).d2); break;
        case ResidualKind::helmholtz2d: r = ux.d2 + dn.eval(p, x, 1).d2 + k2 * ux.v; break;
      }
      interior += square(r - f[i]);
    }
    quad boundary = 0;
    for (std::size_t i = 0; i < bd.count; ++i) {
      boundary += square(dn.eval(p, bd.point(i), bd.dim).v - g[i]);
    }
    return boundary / quad(bd.count) + interior / quad(in.count);
  };
}

inline std::vector<quad> to_quad(std::span<const double> x) { return {x.begin(), x.end()}; }

/// Central differences of a quad loss, step h_i = step * max(1, |theta_i|).
inline std::vector<double> fd_gradient(const QuadLoss& loss, std::span<const double> theta,
                                       double step) {
  std::vector<quad> p = to_quad(theta);
  std::vector<double> g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const quad h = quad(step) * fmaxq(1, fabsq(p[i]));
    const quad x0 = p[i];
    p[i] = x0 + h;
    const quad fp = loss(p);
    p[i] = x0 - h;
    const quad fm = loss(p);
    p[i] = x0;
    g[i] = static_cast<double>((fp - fm) / (2 * h));
  }
  return g;
}

/// (grad L(theta + eps v) - grad L(theta - eps v)) / (2 eps) with the
/// gradient itself taken by quad central differences of step `step`.
inline std::vector<double> fd_hvp(const QuadLoss& loss, std::span<const double> theta,
                                  std::span<const double> v, double eps, double step = 1e-9) {
  std::vector<quad> plus = to_quad(theta), minus = to_quad(theta);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    plus[i] += quad(eps) * v[i];
    minus[i] -= quad(eps) * v[i];
  }
  auto partial = [&](std::vector<quad>& p, std::size_t i) {
    const quad h = quad(step) * fmaxq(1, fabsq(quad(theta[i])));
    const quad x0 = p[i];
    p[i] = x0 + h;
    const quad fp = loss(p);
    p[i] = x0 - h;
    const quad fm = loss(p);
    p[i] = x0;
    return (fp - fm) / (2 * h);
  };
  std::vector<double> hv(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    hv[i] = static_cast<double>((partial(plus, i) - partial(minus, i)) / (2 * quad(eps)));
  }
  return hv;
}

/// |a - b| <= rel * max(|b|, floor), the tolerance form used for every
/// derivative oracle comparison.
inline bool close(double a, double b, double rel, double floor = 1e-10) {
  return std::abs(a - b) <= rel * std::max(std::abs(b), floor);
}

inline double rel_error(double a, double b, double floor = 1e-10) {
  return std::abs(a - b) / std::max(std::abs(b), floor);
}

/// theta0 + N(0, scale^2) perturbation, deterministic in seed.
inline isgd::ad::ParamVector perturbed(const isgd::ad::ParamVector& theta0, std::uint64_t seed,
                                       double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  isgd::ad::ParamVector t = theta0;
  for (double& v : t.values()) v += n(rng);
  return t;
}

/// Hand-rolled dense forward pass in double: h <- tanh(W h + b), linear last layer.
inline double matmul_forward(const isgd::net::Network& net, std::span<const double> p,
                             std::span<const double> x) {
  const auto& c = net.config();
  std::vector<double> h(x.begin(), x.end());
  std::size_t off = 0;
  std::size_t fan_in = c.input_dim;
  for (std::size_t l = 0; l <= c.hidden_widths.size(); ++l) {
    const bool last = l == c.hidden_widths.size();
    const std::size_t fan_out = last ? c.output_dim : c.hidden_widths[l];
    std::vector<double> z(fan_out);
    for (std::size_t i = 0; i < fan_out; ++i) {
      double acc = p[off + fan_out * fan_in + i];
      for (std::size_t j = 0; j < fan_in; ++j) acc += p[off + i * fan_in + j] * h[j];
      z[i] = last ? acc : std::tanh(acc);
    }
    off += fan_out * fan_in + fan_out;
    h = std::move(z);
    fan_in = fan_out;
  }
  return h[0];
}

}  // namespace oracle
