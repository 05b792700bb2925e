#include "isgd/network/network.hpp"

#include <random>

namespace isgd::net {

void validate(const NetworkConfig& config) {
  if (config.input_dim == 0) throw ConfigError("input_dim must be positive");
  if (config.output_dim == 0) throw ConfigError("output_dim must be positive");
  if (config.hidden_widths.empty()) throw ConfigError("hidden_widths must not be empty");
  for (std::size_t w : config.hidden_widths) {
    if (w == 0) throw ConfigError("hidden widths must be positive");
  }
  if (config.output_scaling == OutputScaling::inv_sqrt_m) {
    if (config.hidden_widths.size() != 1) {
      throw ConfigError("inv_sqrt_m output scaling requires exactly one hidden layer");
    }
    if (config.output_dim != 1) throw ConfigError("inv_sqrt_m output scaling requires output_dim 1");
  }
}

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

std::string to_string(OutputScaling s) {
  return s == OutputScaling::none ? "none" : "inv_sqrt_m";
}

std::string to_string(InitKind k) {
  return k == InitKind::glorot_uniform ? "glorot_uniform" : "theorem_init";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + s + "' (expected tanh or relu)");
}

OutputScaling output_scaling_from_string(const std::string& s) {
  if (s == "none") return OutputScaling::none;
  if (s == "inv_sqrt_m") return OutputScaling::inv_sqrt_m;
  throw ConfigError("unknown output_scaling '" + s + "' (expected none or inv_sqrt_m)");
}

InitKind init_kind_from_string(const std::string& s) {
  if (s == "glorot_uniform") return InitKind::glorot_uniform;
  if (s == "theorem_init") return InitKind::theorem_init;
  throw ConfigError("unknown init '" + s + "' (expected glorot_uniform or theorem_init)");
}

std::vector<double> PointSet::point(std::size_t i) const {
  std::vector<double> p(dim);
  for (std::size_t a = 0; a < dim; ++a) p[a] = at(a, i);
  return p;
}

PointSet PointSet::gather(std::span<const std::size_t> indices) const {
  PointSet out(dim, indices.size());
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t k = 0; k < indices.size(); ++k) out.at(a, k) = at(a, indices[k]);
  }
  return out;
}

PointSet PointSet::from_points(std::size_t dim, std::span<const double> point_major) {
  if (dim == 0 || point_major.size() % dim != 0) {
    throw std::invalid_argument("point data is not a whole number of points");
  }
  PointSet out(dim, point_major.size() / dim);
  for (std::size_t i = 0; i < out.count; ++i) {
    for (std::size_t a = 0; a < dim; ++a) out.at(a, i) = point_major[i * dim + a];
  }
  return out;
}

namespace {

std::shared_ptr<const ad::ParamLayout> make_layout(const NetworkConfig& c) {
  auto layout = std::make_shared<ad::ParamLayout>();
  if (c.output_scaling == OutputScaling::inv_sqrt_m) {
    layout->add("W", 0, ad::BlockKind::weight, c.hidden_widths.front(), c.input_dim);
    return layout;
  }
  std::size_t fan_in = c.input_dim;
  const std::size_t layers = c.hidden_widths.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan_out = l + 1 < layers ? c.hidden_widths[l] : c.output_dim;
    layout->add("W" + std::to_string(l), l, ad::BlockKind::weight, fan_out, fan_in);
    layout->add("b" + std::to_string(l), l, ad::BlockKind::bias, fan_out, 1);
    fan_in = fan_out;
  }
  return layout;
}

}  // namespace

Network::Network(NetworkConfig config, std::vector<double> frozen_output)
    : config_(std::move(config)), frozen_output_(std::move(frozen_output)) {
  validate(config_);
  layout_ = make_layout(config_);
  if (theorem_architecture() && frozen_output_.size() != config_.hidden_widths.front()) {
    throw ConfigError("theorem network needs one frozen output weight per hidden unit");
  }
  if (!theorem_architecture() && !frozen_output_.empty()) {
    throw ConfigError("frozen output weights are only used by the theorem architecture");
  }
}

void Network::require_compatible(const ad::ParamVector& theta) const {
  if (!theta.layout() || *theta.layout() != *layout_) {
    throw ad::LayoutMismatch("parameter vector layout does not match the network");
  }
}

std::vector<double> Network::forward(const ad::ParamVector& theta,
                                     std::span<const double> x) const {
  return forward_batch(theta, PointSet::from_points(config_.input_dim, x));
}

std::vector<double> Network::forward_batch(const ad::ParamVector& theta,
                                           const PointSet& points) const {
  require_compatible(theta);
  ad::Tape<double> tape(theta.values());
  const ad::Var out = apply(tape, points, {}, 0);
  const auto v = tape.value(out);
  return {v.begin(), v.end()};
}

InputDerivatives Network::input_derivatives(const ad::ParamVector& theta,
                                            std::span<const double> x, std::size_t order,
                                            std::size_t axis) const {
  if (order < 1 || order > 2) throw std::invalid_argument("order must be 1 or 2");
  require_compatible(theta);
  const PointSet p = PointSet::from_points(config_.input_dim, x);
  ad::Tape<double> tape(theta.values());
  const std::size_t axes[] = {axis};
  const ad::Var out = apply(tape, p, axes, order);
  const auto v = tape.value(out);
  InputDerivatives d;
  d.u = v[0];
  d.du = v[1];
  if (order == 2) d.d2u = v[2];
  return d;
}

std::pair<Network, ad::ParamVector> build(const NetworkConfig& config, const InitScheme& init) {
  validate(config);
  const bool theorem = config.output_scaling == OutputScaling::inv_sqrt_m;
  if (theorem != (init.kind == InitKind::theorem_init)) {
    throw ConfigError("theorem_init and inv_sqrt_m output scaling must be used together");
  }
  std::mt19937_64 rng(init.seed);
  std::vector<double> frozen;
  if (theorem) {
    const std::size_t m = config.hidden_widths.front();
    Network probe(config, std::vector<double>(m, 1.0));
    ad::ParamVector theta(probe.layout());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& w : theta.values()) w = normal(rng);
    std::bernoulli_distribution coin(0.5);
    frozen.resize(m);
    for (double& a : frozen) a = coin(rng) ? 1.0 : -1.0;
    Network net(config, std::move(frozen));
    return {std::move(net), ad::ParamVector(net.layout(), theta.data())};
  }

  Network net(config, {});
  ad::ParamVector theta(net.layout());
  for (const auto& block : net.layout()->blocks()) {
    if (block.kind != ad::BlockKind::weight) continue;  // biases start at zero
    const double limit = std::sqrt(6.0 / static_cast<double>(block.rows + block.cols));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    for (double& w : theta.block(block)) w = uniform(rng);
  }
  return {std::move(net), std::move(theta)};
}

}  // namespace isgd::net
