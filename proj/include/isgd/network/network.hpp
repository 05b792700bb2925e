#pragma once

// Fully connected feed-forward networks.
//
// Two families share one type:
//  * PINN networks: affine layers with biases, an activation after every
//    hidden layer, a linear output layer. All weights and biases trainable.
//  * The two-layer theorem network u(x) = m^{-1/2} sum_r a_r s(w_r . x):
//    one hidden layer without bias, output weights a frozen in the network
//    and excluded from the trainable parameters.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "isgd/autodiff/param_vector.hpp"
#include "isgd/autodiff/tape.hpp"

namespace isgd::net {

using ad::Activation;

enum class OutputScaling { none, inv_sqrt_m };
enum class InitKind { glorot_uniform, theorem_init };

struct NetworkConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_widths;
  std::size_t output_dim = 1;
  Activation activation = Activation::tanh;
  OutputScaling output_scaling = OutputScaling::none;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct InitScheme {
  InitKind kind = InitKind::glorot_uniform;
  std::uint64_t seed = 0;

  friend bool operator==(const InitScheme&, const InitScheme&) = default;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws ConfigError when the configuration is inconsistent.
void validate(const NetworkConfig& config);

std::string to_string(Activation a);
std::string to_string(OutputScaling s);
std::string to_string(InitKind k);
Activation activation_from_string(const std::string& s);
OutputScaling output_scaling_from_string(const std::string& s);
InitKind init_kind_from_string(const std::string& s);

/// Input points stored coordinate-major: coords[axis * count + i].
struct PointSet {
  std::size_t dim = 0;
  std::size_t count = 0;
  std::vector<double> coords;

  PointSet() = default;
  PointSet(std::size_t d, std::size_t n) : dim(d), count(n), coords(d * n, 0.0) {}

  [[nodiscard]] double at(std::size_t axis, std::size_t i) const { return coords[axis * count + i]; }
  double& at(std::size_t axis, std::size_t i) { return coords[axis * count + i]; }
  [[nodiscard]] std::vector<double> point(std::size_t i) const;
  /// Subset in the given order.
  [[nodiscard]] PointSet gather(std::span<const std::size_t> indices) const;
  static PointSet from_points(std::size_t dim, std::span<const double> point_major);
};

struct InputDerivatives {
  double u = 0.0;
  double du = 0.0;
  double d2u = 0.0;
};

class Network {
 public:
  Network(NetworkConfig config, std::vector<double> frozen_output);

  [[nodiscard]] const NetworkConfig& config() const { return config_; }
  [[nodiscard]] const std::shared_ptr<const ad::ParamLayout>& layout() const { return layout_; }
  [[nodiscard]] std::size_t num_params() const { return layout_->size(); }
  [[nodiscard]] bool theorem_architecture() const {
    return config_.output_scaling == OutputScaling::inv_sqrt_m;
  }
  /// The frozen output weights a (theorem architecture only).
  [[nodiscard]] const std::vector<double>& frozen_output() const { return frozen_output_; }

  /// Records the network on a tape for a batch of points. `jet_axes` lists
  /// the input coordinates along which derivatives of order `order` are
  /// carried; the result is output_dim x (lanes * count) in JetShape layout.
  template <class T>
  ad::Var apply(ad::Tape<T>& tape, const PointSet& points, std::span<const std::size_t> jet_axes,
                std::size_t order) const;

  /// Output at one point.
  [[nodiscard]] std::vector<double> forward(const ad::ParamVector& theta,
                                            std::span<const double> x) const;
  /// output_dim x count outputs, row-major.
  [[nodiscard]] std::vector<double> forward_batch(const ad::ParamVector& theta,
                                                  const PointSet& points) const;

  /// u and its first/second derivative along `axis` at x (output 0).
  [[nodiscard]] InputDerivatives input_derivatives(const ad::ParamVector& theta,
                                                   std::span<const double> x, std::size_t order,
                                                   std::size_t axis) const;

  void require_compatible(const ad::ParamVector& theta) const;

 private:
  NetworkConfig config_;
  std::shared_ptr<const ad::ParamLayout> layout_;
  std::vector<double> frozen_output_;
};

/// Builds the network and its initial parameters; deterministic in the seed.
std::pair<Network, ad::ParamVector> build(const NetworkConfig& config, const InitScheme& init);

// ---------------------------------------------------------------------------

template <class T>
ad::Var Network::apply(ad::Tape<T>& tape, const PointSet& points,
                       std::span<const std::size_t> jet_axes, std::size_t order) const {
  if (points.dim != config_.input_dim) {
    throw std::invalid_argument("input dimension " + std::to_string(points.dim) +
                                " does not match network input_dim " +
                                std::to_string(config_.input_dim));
  }
  for (std::size_t a : jet_axes) {
    if (a >= config_.input_dim) throw std::invalid_argument("derivative axis out of range");
  }
  const ad::JetShape shape{points.count, order == 0 ? 0 : jet_axes.size(), order};
  const std::size_t b = points.count;
  const std::size_t width = shape.width();

  std::vector<double> input(config_.input_dim * width, 0.0);
  for (std::size_t d = 0; d < config_.input_dim; ++d) {
    std::copy_n(points.coords.begin() + static_cast<std::ptrdiff_t>(d * b), b,
                input.begin() + static_cast<std::ptrdiff_t>(d * width));
  }
  if (order > 0) {
    for (std::size_t k = 0; k < jet_axes.size(); ++k) {
      double* row = input.data() + jet_axes[k] * width + shape.d1(k);
      std::fill_n(row, b, 1.0);
    }
  }
  ad::Var h = tape.constant(config_.input_dim, width, input);

  const auto& blocks = *layout_;
  if (theorem_architecture()) {
    const auto& w = blocks.block(0, ad::BlockKind::weight);
    const ad::Var wv = tape.param(w.offset, w.rows, w.cols);
    h = tape.activation(config_.activation, tape.matmul(wv, h), shape);
    const ad::Var a = tape.constant(1, frozen_output_.size(), frozen_output_);
    return tape.scale(tape.matmul(a, h),
                      1.0 / std::sqrt(static_cast<double>(config_.hidden_widths.front())));
  }

  const std::size_t layers = config_.hidden_widths.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& w = blocks.block(l, ad::BlockKind::weight);
    const auto& bias = blocks.block(l, ad::BlockKind::bias);
    ad::Var z = tape.matmul(tape.param(w.offset, w.rows, w.cols), h);
    z = tape.add_bias(z, tape.param(bias.offset, bias.rows, 1), b);
    h = l + 1 < layers ? tape.activation(config_.activation, z, shape) : z;
  }
  return h;
}

}  // namespace isgd::net
