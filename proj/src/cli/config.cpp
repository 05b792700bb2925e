#include "isgd/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace isgd::cli {

using nlohmann::json;

namespace {

// Reads fields of one JSON object, remembering which keys were consumed so
// leftovers can be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  [[nodiscard]] std::string at(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

  const json* take(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void get(const std::string& key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(at(key), "expected a number");
      out = v->get<double>();
    }
  }
  template <class T>
    requires(std::is_unsigned_v<T> && !std::is_same_v<T, bool>)
  void get(const std::string& key, T& out) {
    if (const json* v = take(key)) out = static_cast<T>(unsigned_of(*v, at(key)));
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  template <class T>
  void get_list(const std::string& key, std::vector<T>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(at(key), "expected an array");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const std::string p = at(key) + "[" + std::to_string(i) + "]";
        if constexpr (std::is_same_v<T, std::string>) {
          if (!(*v)[i].is_string()) fail(p, "expected a string");
          out.push_back((*v)[i].template get<std::string>());
        } else {
          out.push_back(static_cast<T>(unsigned_of((*v)[i], p)));
        }
      }
    }
  }
  void get_pair(const std::string& key, std::array<double, 2>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
        fail(at(key), "expected an array of two numbers");
      }
      out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
    }
  }

  void finish(const std::string& context = {}) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        fail(at(it.key()), context.empty() ? "unknown key" : "unknown key " + context);
      }
    }
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
  }

 private:
  static std::uint64_t unsigned_of(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) fail(path, "expected a non-negative integer");
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
    }
    fail(path, "expected a non-negative integer");
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require_one_of(const std::string& path, const std::string& value,
                    std::initializer_list<const char*> allowed) {
  std::string list;
  for (const char* a : allowed) {
    if (value == a) return;
    list += list.empty() ? a : std::string(", ") + a;
  }
  Reader::fail(path, "'" + value + "' is not one of " + list);
}

void read_problem(Reader& r, ProblemConfig& p) {
  r.get("kind", p.kind);
  require_one_of(r.at("kind"), p.kind,
                 {"quadratic_stiff", "poisson1d", "singular_ode", "poisson2d", "helmholtz2d",
                  "regression"});
  if (p.kind == "quadratic_stiff") {
    r.get("k1", p.k1);
    r.get("k2", p.k2);
    r.get_pair("theta_star", p.theta_star);
    r.get_pair("theta0", p.theta0);
    if (!(p.k1 > 0.0) || !(p.k2 > 0.0)) Reader::fail(r.at("k1"), "curvatures must be positive");
  } else {
    r.get("batch_size", p.batch_size);
  }
  if (p.kind == "poisson1d") {
    r.get("variant", p.variant);
    require_one_of(r.at("variant"), p.variant, {"smooth", "multiscale"});
    r.get("n_r", p.n_r);
  }
  if (p.kind == "singular_ode") {
    r.get("eps", p.eps);
    if (!(p.eps > 0.0)) Reader::fail(r.at("eps"), "must be positive");
  }
  if (p.kind == "singular_ode" || p.kind == "regression") r.get("n", p.n);
  if (p.kind == "poisson1d" || p.kind == "singular_ode") {
    r.get("sampling", p.sampling);
    require_one_of(r.at("sampling"), p.sampling, {"random", "grid"});
  }
  if (p.kind == "poisson2d" || p.kind == "helmholtz2d") {
    r.get("n_b", p.n_b);
    r.get("n_f", p.n_f);
  }
  if (p.kind == "helmholtz2d") r.get("k", p.k);
  if (p.kind == "regression") {
    r.get("target", p.target);
    require_one_of(r.at("target"), p.target, {"multiscale_c1", "discontinuous_c2"});
  }
  r.finish("for problem kind '" + p.kind + "'");
}

void read_network(Reader& r, NetworkSection& n) {
  r.get_list("hidden_widths", n.hidden_widths);
  r.get("activation", n.activation);
  require_one_of(r.at("activation"), n.activation, {"tanh", "relu"});
  r.get("output_scaling", n.output_scaling);
  require_one_of(r.at("output_scaling"), n.output_scaling, {"none", "inv_sqrt_m"});
  r.get("init", n.init);
  require_one_of(r.at("init"), n.init, {"glorot_uniform", "theorem_init"});
  r.finish();
}

void read_solver(Reader& r, opt::SolverSpec& s) {
  std::string kind = opt::to_string(s.kind);
  r.get("kind", kind);
  require_one_of(r.at("kind"), kind, {"adam", "lbfgs", "sgd", "gd", "none"});
  s.kind = opt::solver_kind_from_string(kind);
  if (s.kind == opt::SolverKind::adam || s.kind == opt::SolverKind::sgd) r.get("lr", s.lr);
  if (s.kind != opt::SolverKind::none) r.get("iterations", s.iterations);
  r.finish("for solver kind '" + kind + "'");
}

void read_optimizer(Reader& r, opt::OptimizerSpec& o) {
  std::string kind = opt::to_string(o.kind);
  r.get("kind", kind);
  require_one_of(r.at("kind"), kind, {"sgd", "gd", "adam", "lbfgs", "isgd"});
  o.kind = opt::optimizer_kind_from_string(kind);
  if (o.kind == opt::OptimizerKind::isgd) {
    r.get("alpha", o.isgd.alpha);
    r.get("k0", o.isgd.k0);
    if (const json* v = r.take("inner")) {
      Reader sub(*v, r.at("inner"));
      read_solver(sub, o.isgd.inner);
    }
    if (const json* v = r.take("tail")) {
      Reader sub(*v, r.at("tail"));
      read_solver(sub, o.isgd.tail);
    }
    if (const json* v = r.take("inner_tolerance")) {
      if (v->is_null()) {
        o.isgd.inner_tolerance.reset();
      } else if (v->is_number()) {
        o.isgd.inner_tolerance = v->get<double>();
      } else {
        Reader::fail(r.at("inner_tolerance"), "expected a number or null");
      }
    }
    try {
      o.isgd.validate();
    } catch (const std::exception& e) {
      Reader::fail(r.at("kind"), e.what());
    }
  } else {
    if (o.kind != opt::OptimizerKind::lbfgs) r.get("lr", o.lr);
    r.get("iterations", o.iterations);
  }
  r.finish("for optimizer kind '" + kind + "'");
}

void read_diagnostics(Reader& r, DiagnosticsConfig& d) {
  r.get("error_every", d.error_every);
  if (const json* v = r.take("spectrum")) {
    Reader s(*v, r.at("spectrum"));
    s.get("enabled", d.spectrum.enabled);
    s.get("method", d.spectrum.method);
    require_one_of(s.at("method"), d.spectrum.method, {"dense", "lanczos"});
    s.get_list("snapshots", d.spectrum.snapshots);
    for (const auto& snap : d.spectrum.snapshots) {
      require_one_of(s.at("snapshots"), snap, {"init", "final"});
    }
    s.get("k", d.spectrum.k);
    s.get("tolerance", d.spectrum.tolerance);
    s.get("max_iters", d.spectrum.max_iters);
    s.finish();
  }
  r.finish();
}

void read_theorem(Reader& r, TheoremConfig& t) {
  r.get("n", t.n);
  r.get("d", t.d);
  r.get("width", t.width);
  r.get("steps", t.steps);
  r.get_list("seeds", t.seeds);
  r.get("data_seed", t.data_seed);
  r.get("mc_samples", t.mc_samples);
  r.get("mc_seed", t.mc_seed);
  r.get("alpha_scale", t.alpha_scale);
  r.get("delta", t.delta);
  r.get_list("scaling_widths", t.scaling_widths);
  r.get_list("scaling_seeds", t.scaling_seeds);
  if (t.seeds.empty()) Reader::fail(r.at("seeds"), "needs at least one seed");
  if (t.mc_samples < 10000) Reader::fail(r.at("mc_samples"), "must be at least 10000");
  if (t.scaling_widths.size() == 1) Reader::fail(r.at("scaling_widths"), "needs >= 2 widths");
  r.finish();
}

json solver_json(const opt::SolverSpec& s) {
  json j;
  j["kind"] = opt::to_string(s.kind);
  if (s.kind == opt::SolverKind::adam || s.kind == opt::SolverKind::sgd) j["lr"] = s.lr;
  if (s.kind != opt::SolverKind::none) j["iterations"] = s.iterations;
  return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  Reader r(j, "");
  r.get("name", c.name);
  if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos) {
    Reader::fail("name", "must be non-empty and contain no path separators");
  }
  r.get("seed", c.seed);
  r.get("output_dir", c.output_dir);
  if (const json* v = r.take("problem")) {
    Reader sub(*v, "problem");
    read_problem(sub, c.problem);
  }
  if (const json* v = r.take("network")) {
    if (c.problem.kind == "quadratic_stiff") {
      Reader::fail("network", "not used by problem kind 'quadratic_stiff'");
    }
    Reader sub(*v, "network");
    read_network(sub, c.network);
  }
  if (const json* v = r.take("optimizer")) {
    Reader sub(*v, "optimizer");
    read_optimizer(sub, c.optimizer);
  }
  if (const json* v = r.take("diagnostics")) {
    Reader sub(*v, "diagnostics");
    read_diagnostics(sub, c.diagnostics);
  }
  if (const json* v = r.take("theorem")) {
    Reader sub(*v, "theorem");
    c.theorem.emplace();
    read_theorem(sub, *c.theorem);
  }
  r.finish();

  if (c.problem.kind != "quadratic_stiff") {
    net::NetworkConfig nc;
    nc.hidden_widths = c.network.hidden_widths;
    nc.activation = net::activation_from_string(c.network.activation);
    nc.output_scaling = net::output_scaling_from_string(c.network.output_scaling);
    try {
      net::validate(nc);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("network: ") + e.what());
    }
    if ((c.network.init == "theorem_init") != (c.network.output_scaling == "inv_sqrt_m")) {
      throw ConfigError("network.init: theorem_init goes with output_scaling inv_sqrt_m");
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string serialize_config(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;

  const ProblemConfig& p = c.problem;
  json pj;
  pj["kind"] = p.kind;
  if (p.kind == "quadratic_stiff") {
    pj["k1"] = p.k1;
    pj["k2"] = p.k2;
    pj["theta_star"] = p.theta_star;
    pj["theta0"] = p.theta0;
  } else {
    pj["batch_size"] = p.batch_size;
  }
  if (p.kind == "poisson1d") {
    pj["variant"] = p.variant;
    pj["n_r"] = p.n_r;
  }
  if (p.kind == "singular_ode") pj["eps"] = p.eps;
  if (p.kind == "singular_ode" || p.kind == "regression") pj["n"] = p.n;
  if (p.kind == "poisson1d" || p.kind == "singular_ode") pj["sampling"] = p.sampling;
  if (p.kind == "poisson2d" || p.kind == "helmholtz2d") {
    pj["n_b"] = p.n_b;
    pj["n_f"] = p.n_f;
  }
  if (p.kind == "helmholtz2d") pj["k"] = p.k;
  if (p.kind == "regression") pj["target"] = p.target;
  j["problem"] = pj;

  if (p.kind != "quadratic_stiff") {
    j["network"] = {{"hidden_widths", c.network.hidden_widths},
                    {"activation", c.network.activation},
                    {"output_scaling", c.network.output_scaling},
                    {"init", c.network.init}};
  }

  const opt::OptimizerSpec& o = c.optimizer;
  json oj;
  oj["kind"] = opt::to_string(o.kind);
  if (o.kind == opt::OptimizerKind::isgd) {
    oj["alpha"] = o.isgd.alpha;
    oj["k0"] = o.isgd.k0;
    oj["inner"] = solver_json(o.isgd.inner);
    oj["tail"] = solver_json(o.isgd.tail);
    oj["inner_tolerance"] = o.isgd.inner_tolerance ? json(*o.isgd.inner_tolerance) : json(nullptr);
  } else {
    if (o.kind != opt::OptimizerKind::lbfgs) oj["lr"] = o.lr;
    oj["iterations"] = o.iterations;
  }
  j["optimizer"] = oj;

  const SpectrumConfig& s = c.diagnostics.spectrum;
  j["diagnostics"] = {{"error_every", c.diagnostics.error_every},
                      {"spectrum",
                       {{"enabled", s.enabled},
                        {"method", s.method},
                        {"snapshots", s.snapshots},
                        {"k", s.k},
                        {"tolerance", s.tolerance},
                        {"max_iters", s.max_iters}}}};

  if (c.theorem) {
    const TheoremConfig& t = *c.theorem;
    j["theorem"] = {{"n", t.n},
                    {"d", t.d},
                    {"width", t.width},
                    {"steps", t.steps},
                    {"seeds", t.seeds},
                    {"data_seed", t.data_seed},
                    {"mc_samples", t.mc_samples},
                    {"mc_seed", t.mc_seed},
                    {"alpha_scale", t.alpha_scale},
                    {"delta", t.delta},
                    {"scaling_widths", t.scaling_widths},
                    {"scaling_seeds", t.scaling_seeds}};
  }
  return j.dump(2) + "\n";
}

std::uint64_t problem_seed(const ExperimentConfig& c) { return c.seed; }
std::uint64_t init_seed(const ExperimentConfig& c) { return c.seed + 1; }
std::uint64_t batch_seed(const ExperimentConfig& c) { return c.seed + 2; }

}  // namespace isgd::cli
