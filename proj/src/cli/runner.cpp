#include "isgd/cli/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace isgd::cli {

namespace {

prob::Sampling sampling_of(const std::string& s) {
  return s == "grid" ? prob::Sampling::grid : prob::Sampling::random;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error(p.string() + ": cannot open for writing");
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out = open_out(p);
  out << text;
}

double checked_loss(const ad::LossFn& loss, const ad::ParamVector& theta) {
  try {
    return ad::value(loss, theta);
  } catch (const ad::NonFiniteError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

diag::SpectrumReport spectrum_at(const ExperimentConfig& config, const Experiment& ex,
                                 const ad::ParamVector& theta, const std::string& snapshot) {
  const SpectrumConfig& s = config.diagnostics.spectrum;
  diag::LanczosOptions opts;
  opts.k = s.k;
  opts.tolerance = s.tolerance;
  opts.max_iters = s.max_iters;
  opts.seed = config.seed;
  return diag::hessian_spectrum(ex.problem->loss(ex.network()), theta,
                                diag::spectrum_method_from_string(s.method), opts, snapshot);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

fs::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? fs::path(env) : fs::current_path();
}

fs::path output_dir(const ExperimentConfig& config, const fs::path& root) {
  if (config.output_dir.empty()) return root / "runs" / config.name;
  const fs::path p(config.output_dir);
  return p.is_absolute() ? p : root / p;
}

std::unique_ptr<prob::Problem> build_problem(const ExperimentConfig& config) {
  const ProblemConfig& p = config.problem;
  const std::uint64_t seed = problem_seed(config);
  const prob::BatchSpec batch = p.batch_size == 0
                                    ? prob::BatchSpec::full()
                                    : prob::BatchSpec::mini(p.batch_size, batch_seed(config));
  if (p.kind == "quadratic_stiff") {
    return std::make_unique<prob::QuadraticStiff>(p.k1, p.k2, p.theta_star);
  }
  if (p.kind == "poisson1d") {
    return std::make_unique<prob::Poisson1D>(prob::poisson_variant_from_string(p.variant), p.n_r,
                                             seed, sampling_of(p.sampling), batch);
  }
  if (p.kind == "singular_ode") {
    return std::make_unique<prob::SingularOde>(p.eps, p.n, seed, sampling_of(p.sampling), batch);
  }
  if (p.kind == "poisson2d") return std::make_unique<prob::Poisson2D>(p.n_b, p.n_f, seed, batch);
  if (p.kind == "helmholtz2d") {
    return std::make_unique<prob::Helmholtz2D>(p.k, p.n_b, p.n_f, seed, batch);
  }
  if (p.kind == "regression") {
    return std::make_unique<prob::Regression>(prob::regression_target_from_string(p.target), p.n,
                                              seed, batch);
  }
  throw ConfigError("problem.kind: unknown kind '" + p.kind + "'");
}

Experiment build_experiment(const ExperimentConfig& config) {
  Experiment ex;
  ex.problem = build_problem(config);
  if (auto* q = dynamic_cast<const prob::QuadraticStiff*>(ex.problem.get())) {
    ex.theta0 = q->make_theta(config.problem.theta0[0], config.problem.theta0[1]);
    return ex;
  }
  net::NetworkConfig nc;
  nc.input_dim = ex.problem->input_dim();
  nc.hidden_widths = config.network.hidden_widths;
  nc.output_dim = 1;
  nc.activation = net::activation_from_string(config.network.activation);
  nc.output_scaling = net::output_scaling_from_string(config.network.output_scaling);
  ex.init = {net::init_kind_from_string(config.network.init), init_seed(config)};
  auto [network, theta] = net::build(nc, ex.init);
  ex.net.emplace(std::move(network));
  ex.theta0 = std::move(theta);
  return ex;
}

opt::Objective make_objective(const prob::Problem& problem, const net::Network* net) {
  opt::Objective o;
  o.full = problem.loss(net);
  o.stochastic = problem.batch_spec().minibatch;
  if (o.stochastic) {
    o.loss_at = [&problem, net](std::uint64_t step) {
      return problem.loss(net, prob::sample_batch(problem, step));
    };
  } else {
    o.loss_at = [full = o.full](std::uint64_t) { return full; };
  }
  return o;
}

RunOutcome run_experiment(const ExperimentConfig& config, const fs::path& root) {
  const auto wall_start = std::chrono::steady_clock::now();
  Experiment ex = build_experiment(config);
  RunOutcome out;
  out.dir = output_dir(config, root);
  fs::create_directories(out.dir);
  write_text(out.dir / "config.json", serialize_config(config));

  const net::Network* network = ex.network();
  const prob::Problem& problem = *ex.problem;
  const opt::Objective objective = make_objective(problem, network);
  out.initial_loss = checked_loss(objective.full, ex.theta0);

  const SpectrumConfig& spec = config.diagnostics.spectrum;
  auto wants = [&](const char* snap) {
    return spec.enabled &&
           std::find(spec.snapshots.begin(), spec.snapshots.end(), snap) != spec.snapshots.end();
  };
  if (wants("init")) {
    std::ofstream s = open_out(out.dir / "spectrum_init.csv");
    diag::write_spectrum_csv(s, spectrum_at(config, ex, ex.theta0, "init"));
  }

  opt::Monitor monitor;
  if (problem.has_exact() && network && config.diagnostics.error_every > 0) {
    monitor.error_every = config.diagnostics.error_every;
    monitor.error_fn = [&](const ad::ParamVector& theta) {
      return diag::rel_l2_error(problem, *network, theta).rel_l2;
    };
  }

  // Rows are staged and handed to an unbuffered stream 100 at a time, so the
  // file only ever grows by whole rows and a killed run leaves a readable prefix.
  std::ofstream trace;
  trace.rdbuf()->pubsetbuf(nullptr, 0);
  trace.open(out.dir / "trace.csv");
  if (!trace) throw std::runtime_error((out.dir / "trace.csv").string() + ": cannot open for writing");
  std::ostringstream pending;
  opt::write_trace_header(pending);
  std::size_t rows = 0;
  auto flush_rows = [&] {
    const std::string chunk = pending.str();
    trace.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    trace.flush();
    pending.str({});
  };
  auto sink = [&](const opt::TraceRecord& r) {
    opt::write_trace_row(pending, r);
    if (++rows % 100 == 0) flush_rows();
  };
  out.result = opt::train(objective, ex.theta0, config.optimizer, monitor, sink);
  flush_rows();
  out.diverged = out.result.trace.diverged;

  if (config.optimizer.kind == opt::OptimizerKind::isgd) {
    std::ofstream prox = open_out(out.dir / "prox.csv");
    opt::write_prox_csv(prox, out.result.trace);
  }

  const ad::ParamVector& theta = out.result.theta;
  out.final_loss = checked_loss(objective.full, theta);
  if (problem.has_exact() && network && theta.all_finite()) {
    out.error = diag::rel_l2_error(problem, *network, theta);
  }
  if (wants("final") && theta.all_finite()) {
    std::ofstream s = open_out(out.dir / "spectrum_final.csv");
    diag::write_spectrum_csv(s, spectrum_at(config, ex, theta, "final"));
  }

  Checkpoint ck;
  ck.experiment = config.name;
  if (network) {
    ck.network = network->config();
    ck.frozen_output = network->frozen_output();
  }
  ck.init = ex.init;
  ck.params = theta.data();
  if (theta.all_finite()) save_checkpoint((out.dir / "checkpoint.json").string(), ck);

  const auto& records = out.result.trace.records;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  std::ostringstream summary;
  summary << "name=" << config.name << '\n'
          << "problem=" << problem.name() << '\n'
          << "optimizer=" << opt::to_string(config.optimizer.kind) << '\n'
          << "seed=" << config.seed << '\n'
          << "params=" << theta.size() << '\n'
          << "initial_loss=" << fmt(out.initial_loss) << '\n'
          << "final_loss=" << fmt(out.final_loss) << '\n'
          << "rel_l2_error=" << (out.error ? fmt(out.error->rel_l2) : "") << '\n'
          << "max_abs_error=" << (out.error ? fmt(out.error->max_abs) : "") << '\n'
          << "diverged=" << (out.diverged ? "true" : "false") << '\n'
          << "diagnostic=" << out.result.trace.diagnostic << '\n'
          << "trace_records=" << records.size() << '\n'
          << "last_iteration=" << (records.empty() ? 0 : records.back().iteration) << '\n';
  if (config.optimizer.kind == opt::OptimizerKind::isgd) {
    const auto& c = config.optimizer.isgd;
    summary << "outer_iterations=" << c.k0 << '\n'
            << "inner_iterations=" << c.inner.iterations << '\n'
            << "tail_iterations=" << c.tail.iterations << '\n'
            << "total_iterations=" << c.k0 * c.inner.iterations + c.tail.iterations << '\n';
  } else {
    summary << "total_iterations=" << config.optimizer.iterations << '\n';
  }
  summary << "wall_seconds=" << wall << '\n';
  write_text(out.dir / "summary.txt", summary.str());
  return out;
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::stalled: return "stalled";
    case RunStatus::diverged: return "diverged";
  }
  return "?";
}

RunStatus classify(const RunOutcome& o) {
  if (o.diverged || !std::isfinite(o.final_loss)) return RunStatus::diverged;
  return o.final_loss <= 1e-2 * o.initial_loss ? RunStatus::converged : RunStatus::stalled;
}

std::vector<CompareRow> compare(const std::vector<ExperimentConfig>& configs,
                                const fs::path& out_dir) {
  if (configs.size() < 2) throw ConfigError("compare needs at least two configs");
  for (const auto& c : configs) {
    if (!(c.problem == configs.front().problem) || c.seed != configs.front().seed) {
      throw ConfigError("compare: '" + c.name + "' does not share the problem of '" +
                        configs.front().name + "'");
    }
  }
  fs::create_directories(out_dir);
  std::vector<CompareRow> rows;
  std::map<std::string, int> used;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    ExperimentConfig c = configs[i];
    std::string label = c.name;
    if (int n = ++used[label]; n > 1) label += "#" + std::to_string(n);
    c.output_dir = (out_dir / (std::to_string(i) + "_" + c.name)).string();
    CompareRow row;
    row.label = label;
    row.outcome = run_experiment(c, out_dir);
    row.status = classify(row.outcome);
    rows.push_back(std::move(row));
  }

  // union of recorded iterations, one loss column per run
  std::map<std::uint64_t, std::vector<std::optional<double>>> table;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& r : rows[i].outcome.result.trace.records) {
      auto& cells = table[r.iteration];
      cells.resize(rows.size());
      cells[i] = r.loss;
    }
  }
  std::ofstream csv = open_out(out_dir / "comparison.csv");
  csv << "iteration";
  for (const auto& r : rows) csv << ',' << r.label;
  csv << '\n' << std::setprecision(17);
  for (auto& [it, cells] : table) {
    cells.resize(rows.size());
    csv << it;
    for (const auto& v : cells) {
      csv << ',';
      if (v) csv << *v;
    }
    csv << '\n';
  }

  std::ofstream txt = open_out(out_dir / "comparison.txt");
  txt << std::left << std::setw(28) << "run" << std::setw(10) << "optimizer" << std::setw(14)
      << "initial_loss" << std::setw(14) << "final_loss" << std::setw(14) << "rel_l2"
      << "status\n"
      << std::setprecision(6);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto& o = r.outcome;
    txt << std::setw(28) << r.label << std::setw(10) << opt::to_string(configs[i].optimizer.kind)
        << std::setw(14) << o.initial_loss << std::setw(14) << o.final_loss << std::setw(14)
        << (o.error ? fmt(o.error->rel_l2).substr(0, 12) : std::string("-")) << to_string(r.status)
        << '\n';
  }
  return rows;
}

void emit_plot_data(const std::vector<fs::path>& traces, std::ostream& os) {
  if (traces.empty()) throw std::invalid_argument("plot-data needs at least one trace");
  os << "series,metric,x,y,scale\n" << std::setprecision(17);
  for (const auto& path : traces) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot open trace");
    const auto records = opt::read_trace_csv(in);
    if (records.empty()) throw std::invalid_argument(path.string() + ": empty trace");
    const std::string series = path.filename() == "trace.csv" && path.has_parent_path()
                                   ? path.parent_path().filename().string()
                                   : path.stem().string();
    for (const auto& r : records) {
      os << series << ",loss," << r.iteration << ',' << r.loss << ",log\n";
    }
    for (const auto& r : records) {
      if (!std::isnan(r.rel_l2_error)) {
        os << series << ",rel_l2_error," << r.iteration << ',' << r.rel_l2_error << ",log\n";
      }
    }
  }
}

diag::SpectrumReport spectrum_from_checkpoint(const fs::path& checkpoint,
                                              const ExperimentConfig& config,
                                              const fs::path& root) {
  const Checkpoint ck = load_checkpoint(checkpoint.string());
  Experiment ex = build_experiment(config);
  if (ck.network.has_value() != ex.net.has_value() ||
      (ck.network && !(*ck.network == ex.net->config()))) {
    throw CheckpointError("checkpoint network does not match the config");
  }
  if (ck.network && ck.frozen_output != ex.net->frozen_output()) {
    throw CheckpointError("checkpoint output weights do not match the config's init");
  }
  ad::ParamVector theta = ex.theta0.zeros_like();
  if (ck.params.size() != theta.size()) throw CheckpointError("parameter count mismatch");
  std::copy(ck.params.begin(), ck.params.end(), theta.values().begin());
  const diag::SpectrumReport report = spectrum_at(config, ex, theta, "checkpoint");
  const fs::path dir = output_dir(config, root);
  fs::create_directories(dir);
  std::ofstream s = open_out(dir / "spectrum_checkpoint.csv");
  diag::write_spectrum_csv(s, report);
  return report;
}

TheoremOutcome verify_theorem_experiment(const ExperimentConfig& config, const fs::path& root) {
  if (!config.theorem) throw ConfigError("theorem: section missing");
  const TheoremConfig& t = *config.theorem;
  TheoremOutcome out;
  out.dir = output_dir(config, root);
  fs::create_directories(out.dir);
  write_text(out.dir / "config.json", serialize_config(config));

  theory::InstanceOptions opts;
  opts.n = t.n;
  opts.d = t.d;
  opts.width = t.width;
  opts.data_seed = t.data_seed;
  opts.mc_samples = t.mc_samples;
  opts.mc_seed = t.mc_seed;
  opts.alpha_scale = t.alpha_scale;
  out.instance = theory::make_instance(opts, &out.limit);
  out.instance.delta = t.delta;

  std::ostringstream summary;
  summary << std::setprecision(10) << "lambda0=" << out.instance.lambda0 << '\n'
          << "lambda0_stderr=" << out.limit.lambda_min_stderr << '\n'
          << "alpha=" << out.instance.alpha << '\n'
          << "mc_samples=" << t.mc_samples << '\n';
  for (std::uint64_t seed : t.seeds) {
    theory::TheoremInstance inst = out.instance;
    inst.init_seed = seed;
    TheoremRun run;
    run.seed = seed;
    run.theorem = theory::verify_theorem(inst, t.steps);
    run.lemmas = theory::verify_lemmas(inst, run.theorem);
    run.theorem.trajectory.clear();  // large; not needed past this point
    {
      std::ofstream csv = open_out(out.dir / ("theory_seed" + std::to_string(seed) + ".csv"));
      theory::write_theory_csv(csv, run.theorem, &run.lemmas);
      std::ofstream txt = open_out(out.dir / ("theory_seed" + std::to_string(seed) + ".txt"));
      theory::write_theory_summary(txt, inst, run.theorem, &run.lemmas);
    }
    if (run.theorem.bound_held) ++out.bound_held;
    summary << "seed " << seed << ": bound_held=" << (run.theorem.bound_held ? "true" : "false")
            << " lambda_min_held=" << (run.lemmas.lambda_min_held ? "true" : "false")
            << " gram_change_held=" << (run.lemmas.gram_change_held ? "true" : "false")
            << " i0_held=" << (run.lemmas.i0_held ? "true" : "false")
            << " monotone=" << (run.theorem.monotone ? "true" : "false") << '\n';
    out.runs.push_back(std::move(run));
  }
  summary << "bound_held_runs=" << out.bound_held << "/" << t.seeds.size() << '\n';

  if (!t.scaling_widths.empty()) {
    out.scaling = theory::displacement_scaling(out.instance, t.scaling_widths, t.scaling_seeds,
                                               t.steps);
    std::ofstream csv = open_out(out.dir / "scaling.csv");
    csv << "width,normalized_displacement\n" << std::setprecision(17);
    for (const auto& p : out.scaling->points) csv << p.width << ',' << p.normalized_displacement << '\n';
    summary << "displacement_slope=" << out.scaling->slope << '\n';
  }
  write_text(out.dir / "summary.txt", summary.str());
  return out;
}

}  // namespace isgd::cli
