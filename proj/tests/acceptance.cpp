// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
//
//   acceptance [--jobs N] [--only 3,5] [--out DIR] [--skip-large]
//
// Exit status is 0 only if every selected criterion passes.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cprop/config.hpp"
#include "cprop/consensus.hpp"
#include "cprop/experiments.hpp"
#include "cprop/generators.hpp"
#include "cprop/linearize.hpp"
#include "cprop/oracle.hpp"
#include "cprop/record.hpp"
#include "cprop/spectral.hpp"

using namespace cprop;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::size_t jobs = 1;
  fs::path out = "acceptance_out";
  bool skip_large = false;
};

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;
  std::string summary;

  void check(bool ok, const std::string& what) {
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    pass = pass && ok;
  }
  void info(const std::string& what) { details.push_back("info " + what); }
};

std::string fmt(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
  return buf;
}

KeyValues kv(const std::string& text) {
  std::istringstream in(text);
  return KeyValues::parse(in);
}

Graph connected_instance(std::size_t n, double c, double beta, std::uint64_t seed) {
  ErdosRenyiOptions opts;
  opts.require_connected = true;
  auto er = generate_erdos_renyi(n, c, derive_seed(seed, Stream::graph), opts);
  return assign_couplings(er.graph, 0.5, 2.0, derive_seed(seed, Stream::couplings)).with_beta(beta);
}

/// Largest relative deviation over entries with a nonzero analytic value, and
/// the largest |fd| where the analytic entry is exactly zero.
std::pair<double, double> compare_block(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd) {
  double rel = 0.0, stray = 0.0;
  for (Eigen::Index r = 0; r < analytic.rows(); ++r)
    for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
      if (analytic(r, c) == 0.0) stray = std::max(stray, std::abs(fd(r, c)));
      else rel = std::max(rel, std::abs(fd(r, c) - analytic(r, c)) / std::abs(analytic(r, c)));
    }
  return {rel, stray};
}

std::vector<std::vector<double>> read_csv(const fs::path& path, std::vector<std::string>& header) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  header.clear();
  for (std::stringstream s(line); std::getline(s, line, ',');) header.push_back(line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    for (std::stringstream s(line); std::getline(s, line, ',');) row.push_back(std::stod(line));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence(const Options&) {
  Outcome o;
  Rng rng(derive_seed(101, Stream::member));
  const double betas[] = {10.0, 100.0, 1000.0};
  double worst = 0.0;
  std::size_t converged = 0, max_iters = 0;
  for (int m = 0; m < 50; ++m) {
    const auto n = static_cast<std::size_t>(20 + rng.next() % 181);
    const double c = rng.uniform(4.0, 16.0);
    const double beta = betas[m % 3];
    const Graph g = connected_instance(n, c, beta, 1000 + static_cast<std::uint64_t>(m));
    const Eigen::VectorXd y = random_node_values(n, derive_seed(1000 + static_cast<std::uint64_t>(m), Stream::values));
    RunOptions ro;
    ro.tol = 1e-12;
    ro.max_iter = 5'000'000;
    const auto fp = run_to_convergence(g, init_zero(g), y, ro);
    converged += fp.converged;
    max_iters = std::max(max_iters, fp.iterations);
    const double err = (beliefs(g, fp.state, y) - exact_marginal_modes(g, y).x).lpNorm<Eigen::Infinity>();
    worst = std::max(worst, err);
  }
  o.check(converged == 50, std::to_string(converged) + "/50 runs converged to 1e-12 (max " +
                               std::to_string(max_iters) + " rounds)");
  o.check(worst <= 1e-7, "max |belief - exact mode| = " + fmt(worst) + " <= 1e-7");
  o.summary = "oracle equivalence, max error " + fmt(worst, 3);
  return o;
}

Outcome jacobian_correctness(const Options&) {
  Outcome o;
  Rng rng(derive_seed(202, Stream::member));
  const double betas[] = {1.0, 10.0, 100.0};
  double worst_a = 0, worst_b = 0, worst_c = 0, stray = 0, mu_to_k = 0;
  for (int m = 0; m < 10; ++m) {
    const auto n = static_cast<std::size_t>(10 + rng.next() % 21);
    const double c = rng.uniform(3.0, std::min(8.0, static_cast<double>(n) - 1.0));
    const Graph g = connected_instance(n, c, betas[m % 3], 2000 + static_cast<std::uint64_t>(m));
    const Eigen::VectorXd y = random_node_values(n, derive_seed(2000 + static_cast<std::uint64_t>(m), Stream::values));
    RunOptions ro;
    ro.tol = 1e-13;
    const auto fp = run_to_convergence(g, init_zero(g), y, ro);
    if (!fp.converged) {
      o.check(false, "instance " + std::to_string(m) + " did not converge");
      continue;
    }
    const auto blocks = jacobian_blocks(g, fp, y);
    const Eigen::MatrixXd fd = finite_diff_jacobian(g, fp.state, y);
    const auto d = static_cast<Eigen::Index>(g.num_directed());
    const auto a = compare_block(to_dense(blocks.a), fd.topLeftCorner(d, d));
    const auto b = compare_block(to_dense(blocks.b), fd.bottomRightCorner(d, d));
    const auto cc = compare_block(to_dense(blocks.c), fd.topRightCorner(d, d));
    worst_a = std::max(worst_a, a.first);
    worst_b = std::max(worst_b, b.first);
    worst_c = std::max(worst_c, cc.first);
    stray = std::max({stray, a.second, b.second, cc.second});
    mu_to_k = std::max(mu_to_k, fd.bottomLeftCorner(d, d).cwiseAbs().maxCoeff());
  }
  o.check(worst_a <= 1e-6, "block A max relative error " + fmt(worst_a) + " <= 1e-6");
  o.check(worst_b <= 1e-6, "block B max relative error " + fmt(worst_b) + " <= 1e-6");
  o.check(worst_c <= 1e-6, "block C max relative error " + fmt(worst_c) + " <= 1e-6");
  o.check(stray < 1e-10, "finite differences vanish off the analytic sparsity pattern (max " + fmt(stray) + ")");
  o.check(mu_to_k < 1e-10, "dK'/dmu block max |entry| " + fmt(mu_to_k) + " < 1e-10");
  o.summary = "Jacobian vs central differences on 10 instances, worst relative error " +
              fmt(std::max({worst_a, worst_b, worst_c}), 3);
  return o;
}

Outcome table_one(const Options& opt) {
  Outcome o;
  const auto rec = run_experiment(ExperimentKind::ab_table,
                                  kv("seed = 20261016\nbeta = 100\nq_min = 0.5\nq_max = 2\n"
                                     "pairs = 20:18,30:14,40:10,50:8\nmembers = 5\n"),
                                  opt.jobs);
  write_record(rec, opt.out / "table1");
  const auto& t = rec.table("table");
  const auto n = t.column("n"), c = t.column("c"), la = t.column("lambda_a"), lb = t.column("lambda_b"),
             ratio = t.column("ratio");
  bool a_ok = true, b_ok = true, r_ok = true;
  for (std::size_t i = 0; i < la.size(); ++i) {
    a_ok = a_ok && la[i] >= 0.995 && la[i] <= 0.9999;
    b_ok = b_ok && lb[i] < 0.01;
    r_ok = r_ok && ratio[i] < 0.01;
    if (i % 5 == 0)
      o.info("N=" + fmt(n[i]) + " c=" + fmt(c[i]) + ": lambda_A=" + fmt(la[i], 8) + " lambda_B=" + fmt(lb[i], 4) +
             " ratio=" + fmt(ratio[i], 4));
  }
  o.check(a_ok, "lambda_max(A) in [0.995, 0.9999] on all " + std::to_string(la.size()) + " instances (range " +
                    fmt(rec.scalar("min_lambda_a"), 8) + " .. " + fmt(rec.scalar("max_lambda_a"), 8) + ")");
  o.check(b_ok, "lambda_max(B) < 0.01 on every instance (max " + fmt(rec.scalar("max_lambda_b"), 4) + ")");
  o.check(r_ok, "lambda_max(B)/lambda_max(A) < 0.01 on every instance (max " + fmt(rec.scalar("max_ratio"), 4) + ")");
  o.summary = "A/B leading eigenvalues for four (N, c) pairs";
  return o;
}

Outcome table_two(const Options& opt) {
  Outcome o;
  const std::string sizes = opt.skip_large ? "20,40,80,160" : "20,40,80,160,5000";
  const auto start = std::chrono::steady_clock::now();
  const auto rec = run_experiment(ExperimentKind::scaling,
                                  kv("seed = 777\nc = 8\nbeta = 100\nsizes = " + sizes +
                                     "\nensemble = 100\nensemble_max_n = 160\n"),
                                  opt.jobs);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_record(rec, opt.out / "table2");
  const auto& t = rec.table("table");
  const auto ns = t.column("n"), mean = t.column("mean_lambda"), sd = t.column("std_lambda"),
             sdc = t.column("std_c"), mc = t.column("mean_c");
  bool means_ok = true, sd_decreasing = true;
  double prev_sd = 1e9;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    o.info("N=" + fmt(ns[i]) + ": mean lambda=" + fmt(mean[i], 7) + " std lambda=" + fmt(sd[i], 3) +
           " mean c=" + fmt(mc[i], 4) + " std c=" + fmt(sdc[i], 3));
    if (ns[i] > 160) continue;
    means_ok = means_ok && std::abs(mean[i] - 0.9985) <= 0.0005;
    sd_decreasing = sd_decreasing && sd[i] < prev_sd;
    prev_sd = sd[i];
  }
  o.check(means_ok, "ensemble mean lambda_max(A) within 0.9985 +- 0.0005 at N = 20, 40, 80, 160");
  o.check(sd_decreasing, "ensemble std of lambda_max(A) strictly decreasing from N=20 to N=160");
  if (!opt.skip_large) {
    const double big = mean.back();
    o.check(std::abs(big - 0.9985) <= 0.001, "N=5000 matrix-free lambda_max(A) = " + fmt(big, 7) + " within 0.9985 +- 0.001");
  } else {
    o.info("N=5000 run skipped (--skip-large)");
  }
  o.info("wall time " + fmt(secs, 3) + " s");
  o.summary = "size scaling of lambda_max(A) at c=8";
  return o;
}

Outcome q_lambda(const Options&) {
  Outcome o;
  const std::pair<std::size_t, double> cases[] = {{50, 8}, {40, 10}, {30, 14}, {20, 18}};
  double worst = 0.0;
  std::uint64_t seed = 5050;
  for (auto [n, c] : cases) {
    GraphParams gp;
    gp.n = n;
    gp.c = c;
    Seeds seeds{seed, seed + 1, seed + 2, 0};
    seed += 10;
    const Instance inst = make_instance(gp, seeds);
    const auto tk = converged_topology(inst.graph);
    const double lambda = dominant_averaging(inst.graph, tk.k).modulus;
    const auto q = affine_contraction(inst.graph, tk.k, inst.y, 3000);
    const double diff = std::abs(q.q - lambda);
    worst = std::max(worst, diff);
    o.check(diff <= 1e-3, "N=" + std::to_string(n) + " c=" + fmt(c) + ": q=" + fmt(q.q, 10) + " lambda=" + fmt(lambda, 10) +
                              " |q-lambda|=" + fmt(diff, 3) + " (window " + std::to_string(q.first) + ".." +
                              std::to_string(q.last) + ")");
  }
  o.summary = "affine averaging contraction ratio vs lambda_max(A), worst gap " + fmt(worst, 3);
  return o;
}

Outcome degree_trend(const Options& opt) {
  Outcome o;
  const auto rec = run_experiment(ExperimentKind::degree,
                                  kv("seed = 606\nn = 20\nbeta = 100\nestimator = q\nensemble = 30\n"
                                     "degrees = 8,10,12,14,16,18\n"),
                                  opt.jobs);
  write_record(rec, opt.out / "degree");
  const auto& t = rec.table("points");
  const auto cs = t.column("c"), means = t.column("mean");
  for (std::size_t i = 0; i < cs.size(); ++i) o.info("c=" + fmt(cs[i]) + ": mean q=" + fmt(means[i], 7));
  const double slope = rec.scalar("slope"), intercept = rec.scalar("intercept");
  o.check(rec.scalar("monotonic") == 1.0, "mean q strictly increasing in c over " + std::to_string(cs.size()) + " values");
  o.check(slope >= 0.0005 && slope <= 0.002, "log-fit slope " + fmt(slope, 5) + " in [0.0005, 0.002]");
  o.check(intercept >= 0.995 && intercept <= 0.998, "log-fit intercept " + fmt(intercept, 6) + " in [0.995, 0.998]");
  o.info("fit rms " + fmt(rec.scalar("fit_rms"), 3) + ", q range " + fmt(rec.scalar("q_range"), 3));

  // Not part of the verdict: the same estimator with the sparse end of the range included.
  const auto wide = run_experiment(ExperimentKind::degree,
                                   kv("seed = 606\nn = 20\nbeta = 100\nestimator = q\nensemble = 30\n"
                                      "degrees = 4,6,8,10,12,14,16,18\n"),
                                   opt.jobs);
  write_record(wide, opt.out / "degree_wide");
  o.info("sweep c=4..18: slope " + fmt(wide.scalar("slope"), 5) + ", intercept " + fmt(wide.scalar("intercept"), 6) +
         ", monotonic " + (wide.scalar("monotonic") == 1.0 ? "yes" : "no") + " (informational)");
  o.summary = "degree dependence of q at N=20";
  return o;
}

Outcome initialization(const Options& opt) {
  Outcome o;
  const auto rec = run_experiment(ExperimentKind::init_compare,
                                  kv("seed = 8080\nn = 80\np = 0.1\nbeta = 100\nalphas = 0.5,0.9,1.1\ntol = 1e-8\n"),
                                  opt.jobs);
  write_record(rec, opt.out / "init");
  const double zero = rec.scalar("iterations_zero");
  std::string detail = "zero-init " + fmt(zero) + " rounds";
  bool faster = true;
  for (const char* a : {"0.5", "0.9", "1.1"}) {
    const double it = rec.scalar(std::string("iterations_alpha_") + a);
    detail += ", alpha " + std::string(a) + ": " + fmt(it);
    faster = faster && zero < it;
  }
  o.check(faster, detail);

  const fs::path dir = opt.out / "dyn_data";
  const auto dyn = run_experiment(ExperimentKind::dyn_data,
                                  kv("seed = 9090\nn = 500\nc = 8\nbeta = 100\nrounds = 10000\nperturb_round = 5000\n"
                                     "scale = 0.9\n"),
                                  opt.jobs);
  write_record(dyn, dir);
  const double gap = std::abs(dyn.scalar("q_post") - dyn.scalar("lambda_a"));
  o.check(gap <= 1e-3, "N=500 after 0.9 rescale at round 5000: q=" + fmt(dyn.scalar("q_post"), 10) +
                           " lambda_max(A)=" + fmt(dyn.scalar("lambda_a"), 10) + " gap " + fmt(gap, 3));

  // Overshoot is read back from the written trajectory: sign changes of the
  // tracked belief's deviation from the exact mode of each phase.
  std::vector<std::string> header;
  const auto rows = read_csv(dir / "dyn-data_trajectory.csv", header);
  const std::size_t col = static_cast<std::size_t>(
      std::find(header.begin(), header.end(), "belief_tracked") - header.begin());
  const std::size_t perturb = 5000;
  std::vector<double> phase1, phase2;
  const double end1 = rows[perturb - 1][col], end2 = rows.back()[col];
  for (std::size_t i = 0; i < rows.size(); ++i)
    (i < perturb ? phase1 : phase2).push_back(rows[i][col] - (i < perturb ? end1 : end2));
  auto crossings = [](const std::vector<double>& dev) {
    double peak = 0.0;
    for (double d : dev) peak = std::max(peak, std::abs(d));
    return sign_changes(std::vector<double>(dev.begin(), dev.end() - static_cast<std::ptrdiff_t>(dev.size() / 10)),
                        1e-3 * peak);
  };
  const auto s1 = crossings(phase1), s2 = crossings(phase2);
  o.check(s1 > 0, "phase one overshoots (" + std::to_string(s1) + " sign changes of the tracked error)");
  o.check(s2 == 0, "phase two does not overshoot (" + std::to_string(s2) + " sign changes)");
  o.summary = "initialization ordering and post-rescale decay";
  return o;
}

Outcome manifolds(const Options& opt) {
  Outcome o;
  const std::pair<std::size_t, double> pairs[] = {{20, 18}, {30, 14}, {40, 10}, {50, 8}};
  for (auto [n, c] : pairs) {
    const auto rec = run_experiment(ExperimentKind::dyn_network,
                                    kv("seed = " + std::to_string(3000 + n) + "\nn = " + std::to_string(n) +
                                       "\nc = " + fmt(c) + "\nbeta = 100\nrounds = 2000\n"),
                                    opt.jobs);
    write_record(rec, opt.out / ("manifold_n" + std::to_string(n)));
    const double hk = rec.scalar("half_iters_k_only"), hm = rec.scalar("half_iters_mu_only");
    const double tk = rec.scalar("tail_ratio_k_only"), tm = rec.scalar("tail_ratio_mu_only");
    const double lb = rec.scalar("lambda_b"), la = rec.scalar("lambda_a");
    const std::string tag = "N=" + std::to_string(n) + " c=" + fmt(c) + ": ";
    o.check(hk < hm, tag + "half-error rounds K-only " + fmt(hk) + " < mu-only " + fmt(hm));
    o.check(std::abs(tk - lb) <= 1e-2, tag + "K-only tail ratio " + fmt(tk, 6) + " vs lambda_max(B) " + fmt(lb, 6));
    o.check(std::abs(tm - la) <= 1e-2, tag + "mu-only tail ratio " + fmt(tm, 8) + " vs lambda_max(A) " + fmt(la, 8));
    o.info(tag + "paired runs after rescaling y: network+data decay ratio " +
           fmt(rec.scalar("q_network_and_data"), 8) + ", data-only " + fmt(rec.scalar("q_data_only"), 8));
  }
  o.summary = "fast K manifold vs slow mu manifold";
  return o;
}

Outcome properties(const Options& opt) {
  Outcome o;
  bool bounds = true, hull = true, substochastic = true;
  double dense_power = 0.0, split = 0.0;
  for (std::uint64_t s = 0; s < 6; ++s) {
    const double beta = s % 2 ? 100.0 : 10.0;
    const Graph g = connected_instance(20 + 5 * s, 6, beta, 4000 + s);
    const Eigen::VectorXd y = random_node_values(g.num_nodes(), derive_seed(4000 + s, Stream::values), -1.0, 3.0);
    RunOptions ro;
    ro.tol = 1e-13;
    ro.observer = [&](std::size_t, const MessageState& st, double) {
      for (std::size_t d = 0; d < g.num_directed(); ++d) {
        const double k = st.k[static_cast<Eigen::Index>(d)], mu = st.mu[static_cast<Eigen::Index>(d)];
        bounds = bounds && k >= 0.0 && k < beta * g.coupling_of(d);
        hull = hull && mu >= y.minCoeff() && mu <= y.maxCoeff();
      }
    };
    const auto fp = run_to_convergence(g, init_zero(g), y, ro);
    const auto blocks = jacobian_blocks(g, fp, y);
    for (Eigen::Index r = 0; r < blocks.a.rows(); ++r) {
      double sum = 0.0;
      for (SparseMatrix::InnerIterator it(blocks.a, r); it; ++it) {
        substochastic = substochastic && it.value() >= 0.0;
        sum += it.value();
      }
      substochastic = substochastic && sum < 1.0;
    }
    const Eigen::MatrixXd a = to_dense(blocks.a), b = to_dense(blocks.b);
    AveragingOperator ao(g, fp.state.k);
    TopologyOperator bo(g, fp.state.k);
    dense_power = std::max(dense_power, std::abs(power_iteration(ao, ao.dim()).modulus - dominant_modulus_dense(a)));
    dense_power = std::max(dense_power, std::abs(power_iteration(bo, bo.dim()).modulus - dominant_modulus_dense(b)));

    const auto full = dense_spectrum(to_dense(assemble_jacobian(blocks)), default_dense_budget, false).values;
    Eigen::VectorXcd parts(a.rows() + b.rows());
    parts << dense_spectrum(a, default_dense_budget, false).values, dense_spectrum(b, default_dense_budget, false).values;
    std::vector<bool> used(static_cast<std::size_t>(parts.size()), false);
    for (const auto& ev : full) {
      std::size_t best = 0;
      double dist = 1e300;
      for (Eigen::Index j = 0; j < parts.size(); ++j)
        if (!used[static_cast<std::size_t>(j)] && std::abs(ev - parts[j]) < dist) {
          dist = std::abs(ev - parts[j]);
          best = static_cast<std::size_t>(j);
        }
      used[best] = true;
      split = std::max(split, dist);
    }
  }
  o.check(bounds, "0 <= K < beta Q on every round of 6 runs");
  o.check(hull, "mu stays inside [min y, max y] from zero initialization");
  o.check(substochastic, "block A is non-negative with row sums < 1");
  o.check(dense_power <= 1e-8, "dense vs power dominant modulus, max gap " + fmt(dense_power, 3) + " <= 1e-8");
  o.check(split <= 1e-8, "spectrum(R) = spectrum(A) + spectrum(B), max matching gap " + fmt(split, 3));

  const auto cfg = kv("seed = 11\nsizes = 20,40\nensemble = 8\n");
  const auto r1 = run_experiment(ExperimentKind::scaling, cfg, 1);
  const auto r2 = run_experiment(ExperimentKind::scaling, cfg, 1);
  const auto r3 = run_experiment(ExperimentKind::scaling, cfg, std::max<std::size_t>(opt.jobs, 2));
  o.check(r1.scalars == r2.scalars && r1.table("table").rows == r2.table("table").rows,
          "identical seeds give bit-identical records at --jobs 1");
  o.check(r1.scalars == r3.scalars, "ensemble reductions independent of the thread count");
  const auto g1 = generate_erdos_renyi(300, 8, 5), g2 = generate_erdos_renyi(300, 8, 5);
  o.check(g1.graph == g2.graph, "graph generation bit-reproducible");
  o.summary = "property suite";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  Options opt;
  std::vector<int> only;
  std::string out = opt.out.string();
  app.add_option("--jobs", opt.jobs, "threads for ensembles")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--out", out, "directory for experiment records");
  app.add_flag("--skip-large", opt.skip_large, "skip the N=5000 run");
  CLI11_PARSE(app, argc, argv);
  opt.out = out;

  const std::vector<std::pair<int, std::function<Outcome(const Options&)>>> criteria = {
      {1, oracle_equivalence}, {2, jacobian_correctness}, {3, table_one}, {4, table_two}, {5, q_lambda},
      {6, degree_trend},       {7, initialization},       {8, manifolds}, {9, properties}};
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome res;
    try {
      res = fn(opt);
    } catch (const std::exception& e) {
      res.pass = false;
      res.summary = std::string("aborted: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (res.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << res.summary << " [" << fmt(secs, 3)
              << " s]\n";
    for (const auto& d : res.details) std::cout << "     " << d << '\n';
    std::cout.flush();
    failed += res.pass ? 0 : 1;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion/criteria failed" : std::string("all criteria passed"))
            << '\n';
  return failed ? 1 : 0;
}
