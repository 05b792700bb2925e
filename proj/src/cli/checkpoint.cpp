#include "isgd/cli/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace isgd::cli {

using nlohmann::json;

std::string checkpoint_to_string(const Checkpoint& c) {
  json j;
  j["format"] = "isgd-checkpoint";
  j["version"] = kCheckpointVersion;
  j["experiment"] = c.experiment;
  if (c.network) {
    const auto& n = *c.network;
    j["network"] = {{"input_dim", n.input_dim},
                    {"hidden_widths", n.hidden_widths},
                    {"output_dim", n.output_dim},
                    {"activation", net::to_string(n.activation)},
                    {"output_scaling", net::to_string(n.output_scaling)}};
  } else {
    j["network"] = nullptr;
  }
  j["init"] = {{"kind", net::to_string(c.init.kind)}, {"seed", c.init.seed}};
  j["frozen_output"] = c.frozen_output;
  // nlohmann writes the shortest representation that parses back to the same double
  j["params"] = c.params;
  return j.dump() + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "isgd-checkpoint") throw CheckpointError("not an isgd checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    c.experiment = j.at("experiment").get<std::string>();
    if (!j.at("network").is_null()) {
      const json& n = j.at("network");
      net::NetworkConfig cfg;
      cfg.input_dim = n.at("input_dim").get<std::size_t>();
      cfg.hidden_widths = n.at("hidden_widths").get<std::vector<std::size_t>>();
      cfg.output_dim = n.at("output_dim").get<std::size_t>();
      cfg.activation = net::activation_from_string(n.at("activation").get<std::string>());
      cfg.output_scaling = net::output_scaling_from_string(n.at("output_scaling").get<std::string>());
      c.network = cfg;
    }
    c.init.kind = net::init_kind_from_string(j.at("init").at("kind").get<std::string>());
    c.init.seed = j.at("init").at("seed").get<std::uint64_t>();
    c.frozen_output = j.at("frozen_output").get<std::vector<double>>();
    c.params = j.at("params").get<std::vector<double>>();
    return c;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path);
  if (!out) throw CheckpointError(path + ": cannot write checkpoint");
  out << checkpoint_to_string(c);
  if (!out) throw CheckpointError(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError(path + ": cannot open checkpoint");
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace isgd::cli
