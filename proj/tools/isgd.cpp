// isgd: command-line front end for the experiment runner.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "isgd/cli/runner.hpp"

namespace cli = isgd::cli;

int main(int argc, char** argv) {
  CLI::App app{"Implicit stochastic gradient descent experiments for PINNs"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "train one configuration");
  run->add_option("config", config_path, "experiment config (JSON)")->required();

  std::vector<std::string> compare_paths;
  std::string compare_out;
  auto* cmp = app.add_subcommand("compare", "run several configs on one problem");
  cmp->add_option("configs", compare_paths, "experiment configs")->required();
  cmp->add_option("--out", compare_out, "output directory (default <root>/runs/compare)");

  std::string checkpoint_path;
  std::string spectrum_config;
  auto* spec = app.add_subcommand("spectrum", "Hessian spectrum at a checkpoint");
  spec->add_option("checkpoint", checkpoint_path, "checkpoint.json")->required();
  spec->add_option("config", spectrum_config, "config the checkpoint was trained with")->required();

  std::string theorem_config;
  auto* thm = app.add_subcommand("verify-theorem", "check the IGD convergence bound");
  thm->add_option("config", theorem_config, "config with a theorem section")->required();

  std::vector<std::string> trace_paths;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot-data", "long-format plot data from traces");
  plot->add_option("traces", trace_paths, "trace.csv files")->required();
  plot->add_option("--out", plot_out, "write here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    const cli::fs::path root = cli::output_root();
    if (*run) {
      const auto out = cli::run_experiment(cli::load_config(config_path), root);
      std::cout << "wrote " << out.dir.string() << "\n"
                << "final_loss=" << out.final_loss
                << " diverged=" << (out.diverged ? "true" : "false") << "\n";
    } else if (*cmp) {
      std::vector<cli::ExperimentConfig> configs;
      for (const auto& p : compare_paths) configs.push_back(cli::load_config(p));
      const cli::fs::path dir = compare_out.empty() ? root / "runs" / "compare"
                                                    : cli::fs::path(compare_out);
      const auto rows = cli::compare(configs, dir);
      std::ifstream table(dir / "comparison.txt");
      std::cout << table.rdbuf();
      (void)rows;
    } else if (*spec) {
      const auto report =
          cli::spectrum_from_checkpoint(checkpoint_path, cli::load_config(spectrum_config), root);
      std::cout << "lambda_min=" << report.lambda_min() << " lambda_max=" << report.lambda_max()
                << " mv_products=" << report.mv_products << "\n";
    } else if (*thm) {
      const auto out = cli::verify_theorem_experiment(cli::load_config(theorem_config), root);
      std::ifstream summary(out.dir / "summary.txt");
      std::cout << summary.rdbuf();
    } else if (*plot) {
      std::vector<cli::fs::path> paths(trace_paths.begin(), trace_paths.end());
      if (plot_out.empty()) {
        cli::emit_plot_data(paths, std::cout);
      } else {
        std::ofstream out(plot_out);
        if (!out) throw std::runtime_error(plot_out + ": cannot open for writing");
        cli::emit_plot_data(paths, out);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
