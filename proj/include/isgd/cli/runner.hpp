#pragma once

// Experiment plumbing behind the command-line verbs.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "isgd/cli/checkpoint.hpp"
#include "isgd/cli/config.hpp"
#include "isgd/diagnostics/diagnostics.hpp"
#include "isgd/optimizers/optimizers.hpp"
#include "isgd/problems/problems.hpp"
#include "isgd/theory/theory.hpp"

namespace isgd::cli {

namespace fs = std::filesystem;

/// Environment variable that overrides the output root (default: cwd).
inline constexpr const char* kOutputRootEnv = "ISGD_OUTPUT_ROOT";

[[nodiscard]] fs::path output_root();
/// root / config.output_dir, or root / runs / name when output_dir is empty.
/// Absolute output_dir values are used as given.
[[nodiscard]] fs::path output_dir(const ExperimentConfig& config, const fs::path& root);

struct Experiment {
  std::unique_ptr<prob::Problem> problem;
  std::optional<net::Network> net;
  ad::ParamVector theta0;
  net::InitScheme init;

  [[nodiscard]] const net::Network* network() const { return net ? &*net : nullptr; }
};

[[nodiscard]] std::unique_ptr<prob::Problem> build_problem(const ExperimentConfig& config);
[[nodiscard]] Experiment build_experiment(const ExperimentConfig& config);
/// Batches follow the problem's batch spec; `full` is the loss on all points.
[[nodiscard]] opt::Objective make_objective(const prob::Problem& problem, const net::Network* net);

struct RunOutcome {
  fs::path dir;
  opt::TrainResult result;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::optional<diag::ErrorReport> error;  // when the problem has an exact solution
  bool diverged = false;
};

/// Trains and writes config.json, trace.csv, prox.csv (isgd), summary.txt,
/// checkpoint.json and the configured spectrum_<snapshot>.csv files.
RunOutcome run_experiment(const ExperimentConfig& config, const fs::path& root);

enum class RunStatus { converged, stalled, diverged };
std::string to_string(RunStatus s);
/// diverged when flagged, converged when the final loss is <= 1e-2 of the
/// initial loss, stalled otherwise.
[[nodiscard]] RunStatus classify(const RunOutcome& outcome);

struct CompareRow {
  std::string label;
  RunOutcome outcome;
  RunStatus status = RunStatus::stalled;
};

/// Runs every config (all must share one problem section) under out_dir and
/// writes comparison.csv (loss per iteration, one column per run) and
/// comparison.txt (final metrics).
std::vector<CompareRow> compare(const std::vector<ExperimentConfig>& configs,
                                const fs::path& out_dir);

/// Long-format series,metric,x,y,scale rows from trace CSV files.
void emit_plot_data(const std::vector<fs::path>& traces, std::ostream& os);

/// Loads the checkpoint, rebuilds the problem from the config and writes
/// spectrum_checkpoint.csv next to the run's other outputs.
diag::SpectrumReport spectrum_from_checkpoint(const fs::path& checkpoint,
                                              const ExperimentConfig& config,
                                              const fs::path& root);

struct TheoremRun {
  std::uint64_t seed = 0;
  theory::TheoremReport theorem;
  theory::LemmaReport lemmas;
};

struct TheoremOutcome {
  fs::path dir;
  theory::GramMatrix limit;
  theory::TheoremInstance instance;
  std::vector<TheoremRun> runs;
  std::size_t bound_held = 0;
  std::optional<theory::ScalingReport> scaling;
};

/// Runs the theorem section of the config: one IGD trajectory per seed plus
/// the optional width sweep, with CSV and summary output.
TheoremOutcome verify_theorem_experiment(const ExperimentConfig& config, const fs::path& root);

}  // namespace isgd::cli
