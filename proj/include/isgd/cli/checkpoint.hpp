#pragma once

// Parameter checkpoints: JSON with a format tag and version, the network
// configuration and init scheme, the frozen output weights (theorem
// networks) and the parameter values. Doubles round-trip exactly.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isgd/autodiff/param_vector.hpp"
#include "isgd/network/network.hpp"

namespace isgd::cli {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::string experiment;
  std::optional<net::NetworkConfig> network;  // absent for network-free problems
  net::InitScheme init;
  std::vector<double> frozen_output;
  std::vector<double> params;
};

void save_checkpoint(const std::string& path, const Checkpoint& c);
[[nodiscard]] Checkpoint load_checkpoint(const std::string& path);
[[nodiscard]] std::string checkpoint_to_string(const Checkpoint& c);
[[nodiscard]] Checkpoint checkpoint_from_string(const std::string& text);

}  // namespace isgd::cli
