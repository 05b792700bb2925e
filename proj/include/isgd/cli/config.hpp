#pragma once

// Declarative experiment configuration. JSON on disk; every field has a
// default, unknown keys are rejected with their path, and serialize() writes
// every field relevant to the chosen kinds so parse(serialize(c)) == c.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isgd/diagnostics/diagnostics.hpp"
#include "isgd/network/network.hpp"
#include "isgd/optimizers/optimizers.hpp"

namespace isgd::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProblemConfig {
  // quadratic_stiff | poisson1d | singular_ode | poisson2d | helmholtz2d | regression
  std::string kind = "poisson1d";

  double k1 = 1e-4;  // quadratic_stiff
  double k2 = 1e4;
  std::array<double, 2> theta_star{0.0, 0.0};
  std::array<double, 2> theta0{1.0, 1.0};

  std::string variant = "smooth";  // poisson1d
  std::size_t n_r = 1000;
  std::string sampling = "random";  // poisson1d, singular_ode

  double eps = 2.0;  // singular_ode
  std::size_t n = 400;  // singular_ode, regression

  std::size_t n_b = 400;  // poisson2d, helmholtz2d
  std::size_t n_f = 4000;
  double k = 4.0;  // helmholtz2d

  std::string target = "multiscale_c1";  // regression

  std::size_t batch_size = 0;  // 0 = full batch

  friend bool operator==(const ProblemConfig&, const ProblemConfig&) = default;
};

struct NetworkSection {
  std::vector<std::size_t> hidden_widths{50, 50, 50, 50};
  std::string activation = "tanh";
  std::string output_scaling = "none";
  std::string init = "glorot_uniform";

  friend bool operator==(const NetworkSection&, const NetworkSection&) = default;
};

struct SpectrumConfig {
  bool enabled = false;
  std::string method = "dense";
  std::vector<std::string> snapshots{"final"};  // "init" and/or "final"
  std::size_t k = 20;
  double tolerance = 1e-6;
  std::size_t max_iters = 300;

  friend bool operator==(const SpectrumConfig&, const SpectrumConfig&) = default;
};

struct DiagnosticsConfig {
  std::size_t error_every = 0;  // 0 = final only
  SpectrumConfig spectrum;

  friend bool operator==(const DiagnosticsConfig&, const DiagnosticsConfig&) = default;
};

struct TheoremConfig {
  std::size_t n = 5;
  std::size_t d = 3;
  std::size_t width = 10000;
  std::size_t steps = 200;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::uint64_t data_seed = 7;
  std::size_t mc_samples = 1000000;
  std::uint64_t mc_seed = 11;
  double alpha_scale = 0.1;
  double delta = 0.1;
  std::vector<std::size_t> scaling_widths;  // empty = skip the width sweep
  std::vector<std::uint64_t> scaling_seeds{0, 1, 2, 3, 4};

  friend bool operator==(const TheoremConfig&, const TheoremConfig&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::string output_dir;  // empty = runs/<name>
  ProblemConfig problem;
  NetworkSection network;
  opt::OptimizerSpec optimizer;
  DiagnosticsConfig diagnostics;
  std::optional<TheoremConfig> theorem;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

[[nodiscard]] ExperimentConfig parse_config(const std::string& json_text);
[[nodiscard]] ExperimentConfig load_config(const std::string& path);
[[nodiscard]] std::string serialize_config(const ExperimentConfig& config);

/// Seeds derived from the global seed.
[[nodiscard]] std::uint64_t problem_seed(const ExperimentConfig& c);
[[nodiscard]] std::uint64_t init_seed(const ExperimentConfig& c);
[[nodiscard]] std::uint64_t batch_seed(const ExperimentConfig& c);

}  // namespace isgd::cli
