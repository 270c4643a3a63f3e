// Command-line front end.
//
//   cprop generate   --n 20 --c 8 --beta 100 --q 0.5:2 --seed 1 --out g.txt
//   cprop run        --graph g.txt --values-seed 3 --trace trace.csv
//   cprop spectrum   --graph g.txt --mode dense --block R
//   cprop experiment scaling --config t2.cfg --out results/
//
// Every subcommand reads an optional `key = value` config file (--config);
// flags override it. Exit status: 0 success, 1 I/O error, 2 bad
// configuration or input, 3 no convergence, 4 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cprop/config.hpp"
#include "cprop/consensus.hpp"
#include "cprop/error.hpp"
#include "cprop/experiments.hpp"
#include "cprop/generators.hpp"
#include "cprop/graph_io.hpp"
#include "cprop/linearize.hpp"
#include "cprop/oracle.hpp"
#include "cprop/spectral.hpp"

namespace {

using namespace cprop;
namespace fs = std::filesystem;

enum Exit : int { ok = 0, io_error = 1, config_error = 2, not_converged = 3, numerical_error = 4 };

/// Flags that map onto config keys. Values are kept as text and converted by
/// ConfigReader, so a flag and a config line behave identically.
class KeyFlags {
public:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = text_[key];
    options_.emplace_back(key, app->add_option(flag, slot, help));
  }
  void add_flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = flags_[key];
    options_.emplace_back(key, app->add_flag(flag, slot, help));
  }
  void apply(KeyValues& kv) const {
    for (const auto& [key, opt] : options_) {
      if (opt->count() == 0) continue;
      if (auto f = flags_.find(key); f != flags_.end()) kv.set(key, f->second ? "true" : "false");
      else kv.set(key, text_.at(key));
    }
  }

private:
  std::map<std::string, std::string> text_;
  std::map<std::string, bool> flags_;
  std::vector<std::pair<std::string, CLI::Option*>> options_;
};

struct Globals {
  std::string config;
  std::string out;
  std::size_t jobs = 1;
  KeyFlags keys;
};

KeyValues layered(const Globals& g, const KeyFlags& local) {
  KeyValues kv;
  if (!g.config.empty()) kv = KeyValues::load(g.config);
  g.keys.apply(kv);
  local.apply(kv);
  return kv;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("coupling range must be 'qmin:qmax', got '" + text + "'");
  try {
    return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ConfigError("cannot parse coupling range '" + text + "'");
  }
}

Eigen::VectorXd read_values(ConfigReader& r, const Graph& g) {
  const auto path = r.get<std::string>("values", "");
  const auto seed = r.get<long long>("values_seed", -1);
  if (!path.empty() && seed >= 0) throw ConfigError("give either --values or --values-seed, not both");
  if (!path.empty()) return load_values(path, g.num_nodes());
  if (seed >= 0) return random_node_values(g.num_nodes(), static_cast<std::uint64_t>(seed));
  throw ConfigError("missing required key 'values' (or 'values_seed')");
}

// ---------------------------------------------------------------------------

int cmd_generate(const Globals& gl, const KeyFlags& local) {
  const KeyValues kv = layered(gl, local);
  ConfigReader r(kv, "generate");
  GraphParams gp;
  gp.n = r.require<std::size_t>("n");
  gp.c = r.has("p") ? r.require<double>("p") * static_cast<double>(gp.n) : r.require<double>("c");
  if (kv.has("q")) std::tie(gp.q_min, gp.q_max) = parse_range(r.require<std::string>("q"));
  gp.q_min = r.get<double>("q_min", gp.q_min);
  gp.q_max = r.get<double>("q_max", gp.q_max);
  gp.beta = r.get<double>("beta", gp.beta);
  gp.require_connected = r.get<bool>("require_connected", false);
  Seeds seeds;
  seeds.graph = r.seed("graph");
  seeds.couplings = r.seed("couplings");
  r.finish();
  if (gl.out.empty()) throw ConfigError("generate needs --out");

  ErdosRenyiOptions opts;
  opts.require_connected = gp.require_connected;
  const auto er = generate_erdos_renyi(gp.n, gp.c, seeds.graph, opts);
  const Graph g = assign_couplings(er.graph, gp.q_min, gp.q_max, seeds.couplings).with_beta(gp.beta);

  std::ostringstream text;
  std::ostringstream cfg;
  r.resolved().write(cfg);
  std::istringstream lines(cfg.str());
  for (std::string line; std::getline(lines, line);) text << "# " << line << '\n';
  save_graph(text, g);
  write_text(gl.out, text.str());
  std::cout << "generate: n=" << g.num_nodes() << " edges=" << g.num_edges()
            << " mean_degree=" << format_real(g.mean_degree()) << " attempts=" << er.attempts << '\n';
  return ok;
}

int cmd_run(const Globals& gl, const KeyFlags& local) {
  const KeyValues kv = layered(gl, local);
  ConfigReader r(kv, "run");
  const auto graph_path = r.require<std::string>("graph");
  const Graph g = load_graph(graph_path);
  const Eigen::VectorXd y = read_values(r, g);
  RunOptions opts;
  opts.tol = r.get<double>("tol", 1e-10);
  opts.max_iter = r.get<std::size_t>("max_iter", 1'000'000);
  const auto trace_path = r.get<std::string>("trace", "");
  const auto ref = r.get<std::string>("error_ref", "oracle");
  if (ref != "oracle" && ref != "mean") throw ConfigError("run: error_ref must be oracle or mean");
  r.finish();

  const auto oracle = exact_marginal_modes(g, y);
  const Eigen::VectorXd target =
      ref == "oracle" ? oracle.x : Eigen::VectorXd(Eigen::VectorXd::Constant(y.size(), y.mean()));

  std::ofstream trace;
  if (!trace_path.empty()) {
    if (fs::path(trace_path).has_parent_path()) fs::create_directories(fs::path(trace_path).parent_path());
    trace.open(trace_path);
    if (!trace) throw Error("cannot write '" + trace_path + "'");
    trace << "iter,residual,belief_err_max,belief_err_l2\n";
    opts.observer = [&](std::size_t it, const MessageState& s, double residual) {
      const Eigen::VectorXd err = beliefs(g, s, y) - target;
      trace << it << ',' << format_real(residual) << ',' << format_real(err.lpNorm<Eigen::Infinity>()) << ','
            << format_real(err.norm()) << '\n';
    };
  }
  const auto fp = run_to_convergence(g, init_zero(g), y, opts);
  const Eigen::VectorXd err = beliefs(g, fp.state, y) - target;

  nlohmann::json j;
  j["converged"] = fp.converged;
  j["iterations"] = fp.iterations;
  j["residual"] = fp.residual;
  j["tolerance"] = fp.tolerance;
  j["error_reference"] = ref;
  j["belief_err_max"] = err.lpNorm<Eigen::Infinity>();
  j["belief_err_l2"] = err.norm();
  j["oracle_relative_residual"] = oracle.relative_residual;
  j["mean"] = y.mean();
  for (const auto& [k, v] : r.resolved().entries()) j["config"][k] = v;

  std::cout << "run: converged=" << (fp.converged ? "true" : "false") << " iterations=" << fp.iterations
            << " residual=" << format_real(fp.residual) << " belief_err_max=" << format_real(err.lpNorm<Eigen::Infinity>())
            << '\n';
  if (!gl.out.empty()) {
    std::ostringstream cfg;
    r.resolved().write(cfg);
    write_text(fs::path(gl.out) / "run.cfg", cfg.str());
    write_text(fs::path(gl.out) / "run_summary.json", j.dump(2) + "\n");
  } else {
    std::cout << j.dump() << '\n';
  }
  return fp.converged ? ok : not_converged;
}

int cmd_spectrum(const Globals& gl, const KeyFlags& local) {
  const KeyValues kv = layered(gl, local);
  ConfigReader r(kv, "spectrum");
  const Graph g = load_graph(r.require<std::string>("graph"));
  const auto mode = r.get<std::string>("mode", "power");
  const auto block = r.get<std::string>("block", "A");
  if (mode != "dense" && mode != "power") throw ConfigError("spectrum: mode must be dense or power");
  if (block != "A" && block != "B" && block != "R") throw ConfigError("spectrum: block must be A, B or R");
  const double tol = r.get<double>("tol", 1e-12);
  const auto max_iter = r.get<std::size_t>("max_iter", 1'000'000);
  const auto budget = r.get<std::size_t>("budget", default_dense_budget);
  const auto triplets = r.get<std::string>("triplets", "");
  PowerOptions po;
  po.tol = r.get<double>("power_tol", 1e-12);
  po.seed = r.get<std::uint64_t>("power_seed", po.seed);
  Eigen::VectorXd y;
  if (block == "R") y = read_values(r, g);
  r.finish();

  // Guard before any work so an oversized dense request is refused cleanly.
  const std::size_t dim = (block == "R" ? 2 : 1) * g.num_directed();
  if (mode == "dense" && dim > budget)
    throw ConfigError("dense spectrum of dimension " + std::to_string(dim) + " exceeds the budget of " +
                      std::to_string(budget) + "; use --mode power");

  SparseMatrix m;
  std::size_t mu_dim = g.num_directed();
  Eigen::VectorXd k;
  if (block == "R") {
    RunOptions ro;
    ro.tol = tol;
    ro.max_iter = max_iter;
    const auto fp = run_to_convergence(g, init_zero(g), y, ro);
    if (!fp.converged) {
      std::cerr << "spectrum: fixed point did not converge within " << max_iter << " rounds\n";
      return not_converged;
    }
    m = assemble_jacobian(jacobian_blocks(g, fp, y));
    k = fp.state.k;
  } else {
    const auto tk = converge_topology(g, tol, max_iter);
    if (!tk.converged) {
      std::cerr << "spectrum: topology messages did not converge within " << max_iter << " rounds\n";
      return not_converged;
    }
    k = tk.k;
    if (block == "B") mu_dim = 0;
  }

  SpectralReport report;
  if (mode == "dense") {
    if (block != "R") m = block == "A" ? averaging_kernel(g, k) : topology_kernel(g, k);
    report = dense_report(to_dense(m, budget), block == "B" ? 0 : mu_dim, budget);
  } else {
    PowerResult p;
    if (block == "R") {
      p = power_iteration(m, po);
    } else if (block == "A") {
      AveragingOperator a(g, k);
      p = power_iteration(a, a.dim(), po);
    } else {
      TopologyOperator b(g, k);
      p = power_iteration(b, b.dim(), po);
    }
    report = power_report(p);
  }
  if (!triplets.empty()) {
    if (block != "R" && m.rows() == 0) m = block == "A" ? averaging_kernel(g, k) : topology_kernel(g, k);
    std::ostringstream t;
    write_triplets(t, m, block);
    write_text(triplets, t.str());
  }

  std::ostringstream csv;
  write_spectral_csv(csv, report);
  if (gl.out.empty()) std::cout << csv.str();
  else write_text(gl.out, csv.str());
  std::cerr << "spectrum: block=" << block << " mode=" << mode << " dim=" << dim
            << " dominant_modulus=" << format_real(std::abs(report.eigenvalues.empty() ? 0.0 : std::abs(report.eigenvalues.front())))
            << " complex=" << (report.has_complex ? "yes" : "no") << '\n';
  if (!report.converged) {
    std::cerr << "spectrum: power iteration did not converge (residual " << format_real(report.residual) << ")\n";
    return not_converged;
  }
  return ok;
}

int cmd_experiment(const Globals& gl, const KeyFlags& local, const std::string& kind_text,
                   const std::vector<std::string>& sets) {
  const auto kind = parse_kind(kind_text);
  KeyValues kv = layered(gl, local);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  const auto rec = run_experiment(kind, kv, gl.jobs);
  write_record(rec, gl.out.empty() ? fs::path(".") : fs::path(gl.out));
  std::cout << rec.summary_line() << '\n';
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus propagation: simulation, linearization and spectra"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals gl;
  app.add_option("--config", gl.config, "key = value config file; flags override it");
  app.add_option("--out", gl.out, "output file (generate, spectrum) or directory (run, experiment)");
  app.add_option("--jobs", gl.jobs, "threads for ensemble members; 1 is the reproducible reference")
      ->check(CLI::PositiveNumber);
  gl.keys.add(&app, "--seed", "seed", "shared seed for every random stream");
  gl.keys.add(&app, "--tol", "tol", "convergence tolerance (max-norm change per round)");
  gl.keys.add(&app, "--max-iter", "max_iter", "round budget");

  KeyFlags gen_keys, run_keys, spectrum_keys, exp_keys;
  auto* gen = app.add_subcommand("generate", "write a seeded Erdos-Renyi graph with random couplings");
  gen_keys.add(gen, "--n", "n", "number of nodes");
  gen_keys.add(gen, "--c", "c", "mean degree (p = c / n)");
  gen_keys.add(gen, "--p", "p", "edge probability (alternative to --c)");
  gen_keys.add(gen, "--q", "q", "coupling range qmin:qmax");
  gen_keys.add(gen, "--beta", "beta", "inverse temperature");
  gen_keys.add_flag(gen, "--require-connected", "require_connected", "resample until the graph is connected");

  auto* run = app.add_subcommand("run", "iterate messages to a fixed point and compare with the exact modes");
  run_keys.add(run, "--graph", "graph", "graph file");
  run_keys.add(run, "--values", "values", "node-values file");
  run_keys.add(run, "--values-seed", "values_seed", "draw U[0,1) node values from this seed");
  run_keys.add(run, "--trace", "trace", "per-round CSV: iter,residual,belief_err_max,belief_err_l2");
  run_keys.add(run, "--error-ref", "error_ref", "oracle (exact modes, default) or mean");

  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues of the linearized update");
  spectrum_keys.add(spectrum, "--graph", "graph", "graph file");
  spectrum_keys.add(spectrum, "--values", "values", "node-values file (block R)");
  spectrum_keys.add(spectrum, "--values-seed", "values_seed", "U[0,1) node values from this seed (block R)");
  spectrum_keys.add(spectrum, "--mode", "mode", "dense or power");
  spectrum_keys.add(spectrum, "--block", "block", "A (mu to mu), B (K to K) or R (full Jacobian)");
  spectrum_keys.add(spectrum, "--budget", "budget", "largest dimension accepted by dense mode");
  spectrum_keys.add(spectrum, "--triplets", "triplets", "also write the block as 'row col value' triplets");
  spectrum_keys.add(spectrum, "--power-tol", "power_tol", "power iteration tolerance");

  auto* exp = app.add_subcommand("experiment", "run one of the studies and write its record");
  std::string kind;
  std::vector<std::string> sets;
  exp->add_option("kind", kind, "dyn-data, dyn-network, init-compare, scaling, degree or ab-table")->required();
  exp->add_option("--set", sets, "extra key=value overrides");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*gen) return cmd_generate(gl, gen_keys);
    if (*run) return cmd_run(gl, run_keys);
    if (*spectrum) return cmd_spectrum(gl, spectrum_keys);
    if (*exp) return cmd_experiment(gl, exp_keys, kind, sets);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return config_error;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return config_error;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return numerical_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return io_error;
  }
  return ok;
}
