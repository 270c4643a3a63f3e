#pragma once

// Seeded, reproducible studies built on the message-passing engine and its
// linearization. Each study reads a flat config, runs, and returns an
// ExperimentRecord; every random element is drawn from an explicitly seeded
// stream (see rng.hpp), so a config fully determines the record.
//
//   dyn-data      values change under a converged topology (step, noise, walk)
//   dyn-network   coupling changes vs value changes; fast/slow manifold test
//   init-compare  zero vs scaled-fixed-point initialization
//   scaling       dominant eigenvalue of the averaging kernel vs graph size
//   degree        dominant eigenvalue / contraction ratio vs mean degree
//   ab-table      dominant eigenvalues of the A and B blocks side by side

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "cprop/config.hpp"
#include "cprop/consensus.hpp"
#include "cprop/error.hpp"
#include "cprop/generators.hpp"
#include "cprop/linearize.hpp"
#include "cprop/oracle.hpp"
#include "cprop/record.hpp"
#include "cprop/spectral.hpp"

namespace cprop {

enum class ExperimentKind { dyn_data, dyn_network, init_compare, scaling, degree, ab_table };

inline std::string_view kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::dyn_data: return "dyn-data";
    case ExperimentKind::dyn_network: return "dyn-network";
    case ExperimentKind::init_compare: return "init-compare";
    case ExperimentKind::scaling: return "scaling";
    case ExperimentKind::degree: return "degree";
    case ExperimentKind::ab_table: return "ab-table";
  }
  return "?";
}

inline ExperimentKind parse_kind(std::string_view s) {
  for (auto k : {ExperimentKind::dyn_data, ExperimentKind::dyn_network, ExperimentKind::init_compare,
                 ExperimentKind::scaling, ExperimentKind::degree, ExperimentKind::ab_table})
    if (kind_name(k) == s) return k;
  throw ConfigError("unknown experiment kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Shared pieces

struct GraphParams {
  std::size_t n = 20;
  double c = 8.0;
  double q_min = 0.5;
  double q_max = 2.0;
  double beta = 100.0;
  bool require_connected = false;
};

/// Reads n, c (or p, with c = p n), q_min, q_max, beta, require_connected.
inline GraphParams read_graph_params(ConfigReader& r, std::size_t default_n, double default_c) {
  GraphParams gp;
  gp.n = r.get<std::size_t>("n", default_n);
  if (r.has("p")) gp.c = r.require<double>("p") * static_cast<double>(gp.n);
  else gp.c = r.get<double>("c", default_c);
  gp.q_min = r.get<double>("q_min", gp.q_min);
  gp.q_max = r.get<double>("q_max", gp.q_max);
  gp.beta = r.get<double>("beta", gp.beta);
  gp.require_connected = r.get<bool>("require_connected", gp.require_connected);
  return gp;
}

struct Seeds {
  std::uint64_t graph = 0;
  std::uint64_t couplings = 0;
  std::uint64_t values = 0;
  std::uint64_t perturbation = 0;
};

struct Instance {
  Graph graph;
  Eigen::VectorXd y;
  double realized_mean_degree = 0.0;
};

/// Ensemble member `member` of the (graph, couplings, values) family.
inline Instance make_instance(const GraphParams& gp, const Seeds& seeds, std::uint64_t member = 0) {
  ErdosRenyiOptions opts;
  opts.require_connected = gp.require_connected;
  auto er = generate_erdos_renyi(gp.n, gp.c, derive_seed(seeds.graph, Stream::member, member), opts);
  Graph g = assign_couplings(er.graph, gp.q_min, gp.q_max, derive_seed(seeds.couplings, Stream::member, member))
                .with_beta(gp.beta);
  Eigen::VectorXd y = random_node_values(gp.n, derive_seed(seeds.values, Stream::member, member));
  return {std::move(g), std::move(y), er.realized_mean_degree};
}

/// Runs fn(0..count-1) on up to `jobs` threads; results are stored by index.
template <class Fn>
auto parallel_map(std::size_t count, std::size_t jobs, Fn&& fn) {
  using Result = decltype(fn(std::size_t{}));
  std::vector<std::optional<Result>> slots(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(jobs, 1), std::max<std::size_t>(count, 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<Result> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline PowerResult dominant_averaging(const Graph& g, const Eigen::VectorXd& k, const PowerOptions& opts = {}) {
  AveragingOperator a(g, k);
  auto p = power_iteration(a, a.dim(), opts);
  if (!p.converged)
    throw NumericalError("power iteration on the averaging kernel did not converge (change " +
                         format_real(p.change) + ", residual " + format_real(p.residual) + ")");
  return p;
}

inline PowerResult dominant_topology(const Graph& g, const Eigen::VectorXd& k, const PowerOptions& opts = {}) {
  TopologyOperator b(g, k);
  auto p = power_iteration(b, b.dim(), opts);
  if (!p.converged)
    throw NumericalError("power iteration on the topology kernel did not converge (change " +
                         format_real(p.change) + ", residual " + format_real(p.residual) + ")");
  return p;
}

inline TopologyFixedPoint converged_topology(const Graph& g, double tol = 1e-12) {
  auto tk = converge_topology(g, tol);
  if (!tk.converged) throw NumericalError("topology messages did not converge");
  return tk;
}

/// Iterates mu <- b + A mu from mu = 0 for `rounds` rounds and estimates the
/// contraction ratio from the increments |mu_{n+1} - mu_n|, which equal
/// |A^n b| exactly for the affine map.
inline ConvergenceRatio affine_contraction(const Graph& g, const Eigen::VectorXd& k, const Eigen::VectorXd& y,
                                           std::size_t rounds, TransientPolicy policy = {}) {
  AveragingOperator a(g, k);
  const Eigen::VectorXd b = affine_offset(g, k, y);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd amu(b.size());
  std::vector<double> increments;
  increments.reserve(rounds);
  for (std::size_t n = 0; n < rounds; ++n) {
    a(mu, amu);
    Eigen::VectorXd next = b + amu;
    increments.push_back((next - mu).norm());
    mu = std::move(next);
  }
  if (policy.error_scale <= 0.0) policy.error_scale = std::max(increments.front(), mu.norm());
  return convergence_ratio(increments, policy);
}

/// Least-squares fit q = slope * ln(c) + intercept.
struct LogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
};

inline LogFit fit_log(std::span<const double> c, std::span<const double> q) {
  if (c.size() != q.size() || c.size() < 2) throw ConfigError("log fit needs at least two points");
  const double n = static_cast<double>(c.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double x = std::log(c[i]);
    sx += x;
    sy += q[i];
    sxx += x * x;
    sxy += x * q[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw ConfigError("log fit needs at least two distinct degrees");
  LogFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double r = q[i] - (f.slope * std::log(c[i]) + f.intercept);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

/// Number of sign changes in xs, ignoring entries with |x| <= threshold.
inline std::size_t sign_changes(std::span<const double> xs, double threshold) {
  std::size_t changes = 0;
  int last = 0;
  for (double x : xs) {
    if (std::abs(x) <= threshold) continue;
    const int s = x > 0 ? 1 : -1;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

/// Non-negative random direction with Euclidean norm `norm`.
inline Eigen::VectorXd positive_direction(std::size_t dim, double norm, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = rng.uniform_open();
  return v * (norm / v.norm());
}

// ---------------------------------------------------------------------------
// Dynamic data

enum class Schedule { step, noise, walk };
enum class ErrorReference { mean, oracle };

struct DynDataConfig {
  GraphParams graph{500, 8.0};
  Seeds seeds;
  std::size_t rounds = 10'000;
  std::size_t perturb_round = 5'000;
  double scale = 0.9;
  Schedule schedule = Schedule::step;
  double noise = 0.01;
  ErrorReference reference = ErrorReference::mean;
  std::size_t tracked_node = 0;
  std::size_t replay_rounds = 200;
};

inline DynDataConfig read_dyn_data(ConfigReader& r) {
  DynDataConfig c;
  c.graph = read_graph_params(r, 500, 8.0);
  c.seeds.graph = r.seed("graph");
  c.seeds.couplings = r.seed("couplings");
  c.seeds.values = r.seed("values");
  c.rounds = r.get<std::size_t>("rounds", c.rounds);
  c.perturb_round = r.get<std::size_t>("perturb_round", c.perturb_round);
  c.scale = r.get<double>("scale", c.scale);
  const auto sched = r.get<std::string>("schedule", "step");
  if (sched == "step") c.schedule = Schedule::step;
  else if (sched == "noise") c.schedule = Schedule::noise;
  else if (sched == "walk") c.schedule = Schedule::walk;
  else throw ConfigError(r.context() + ": schedule must be step, noise or walk");
  if (c.schedule != Schedule::step) {
    c.noise = r.get<double>("noise", c.noise);
    c.seeds.perturbation = r.seed("perturbation");
  }
  const auto ref = r.get<std::string>("error_reference", "mean");
  if (ref == "mean") c.reference = ErrorReference::mean;
  else if (ref == "oracle") c.reference = ErrorReference::oracle;
  else throw ConfigError(r.context() + ": error_reference must be mean or oracle");
  c.tracked_node = r.get<std::size_t>("tracked_node", c.tracked_node);
  c.replay_rounds = r.get<std::size_t>("replay_rounds", c.replay_rounds);
  if (c.tracked_node >= c.graph.n) throw ConfigError(r.context() + ": tracked_node out of range");
  if (c.perturb_round >= c.rounds) throw ConfigError(r.context() + ": perturb_round must be < rounds");
  return c;
}

/// Zero-initialized run; at `perturb_round` the values change without touching
/// the messages. The error column is measured against the current target
/// (mean of the current values, or the exact modes).
inline ExperimentRecord run_dynamic_data(const DynDataConfig& cfg) {
  ExperimentRecord rec;
  rec.kind = "dyn-data";
  const Instance inst = make_instance(cfg.graph, cfg.seeds);
  const Graph& g = inst.graph;
  const auto node = static_cast<Eigen::Index>(cfg.tracked_node);

  const auto system = mode_system(g);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(system);
  if (ldlt.info() != Eigen::Success) throw NumericalError("factorization of I + beta L failed");
  auto modes = [&](const Eigen::VectorXd& y) { return Eigen::VectorXd(ldlt.solve(y)); };

  Eigen::VectorXd y = inst.y;
  const Eigen::VectorXd y0 = inst.y;
  Eigen::VectorXd x_star = modes(y);
  const Eigen::VectorXd x_star_before = x_star;
  Rng noise_rng(derive_seed(cfg.seeds.perturbation, Stream::perturbation));

  auto& traj = rec.add_table("trajectory",
                             {"iter", "belief_tracked", "target_tracked", "err_max", "err_l2", "increment"});
  MessageState cur = init_zero(g), next;
  MessageState at_perturbation;
  std::vector<Eigen::VectorXd> cp_mu_after;
  std::vector<double> increments_after;
  std::vector<double> dev_phase1, dev_phase2;
  double k_residual_at_perturbation = 0.0;

  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    if (t == cfg.perturb_round + 1) {
      at_perturbation = cur;
      if (cfg.schedule == Schedule::step) y *= cfg.scale;
    }
    if (t > cfg.perturb_round && cfg.schedule != Schedule::step) {
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double u = cfg.noise * (2.0 * noise_rng.uniform() - 1.0);
        y[i] = cfg.schedule == Schedule::noise ? y0[i] + u : y[i] + u;
      }
    }
    if (t == cfg.perturb_round + 1 || (t > cfg.perturb_round && cfg.schedule != Schedule::step)) x_star = modes(y);

    step(g, cur, y, next);
    const double inc = std::max((next.k - cur.k).lpNorm<Eigen::Infinity>(), (next.mu - cur.mu).lpNorm<Eigen::Infinity>());
    if (t == cfg.perturb_round) k_residual_at_perturbation = (next.k - cur.k).lpNorm<Eigen::Infinity>();
    if (t > cfg.perturb_round && cfg.schedule == Schedule::step) {
      increments_after.push_back((next.mu - cur.mu).norm());
      if (cp_mu_after.size() < cfg.replay_rounds) cp_mu_after.push_back(next.mu);
    }
    std::swap(cur, next);

    const Eigen::VectorXd b = beliefs(g, cur, y);
    Eigen::VectorXd err;
    if (cfg.reference == ErrorReference::mean) err = b.array() - y.mean();
    else err = b - x_star;
    const double target = cfg.reference == ErrorReference::mean ? y.mean() : x_star[node];
    traj.add({static_cast<double>(t), b[node], target, err.lpNorm<Eigen::Infinity>(), err.norm(), inc});
    (t <= cfg.perturb_round ? dev_phase1 : dev_phase2).push_back(b[node] - x_star[node]);
  }

  // Dominant eigenvalue of the kernel the values perturbation sees.
  const auto lambda = dominant_averaging(g, at_perturbation.k);
  rec.set("lambda_a", lambda.modulus);
  rec.set("k_residual_at_perturbation", k_residual_at_perturbation);
  rec.set("err_max_at_perturbation", traj.rows[cfg.perturb_round - 1][3]);
  rec.set("err_max_final", traj.rows.back()[3]);

  auto overshoots = [](const std::vector<double>& dev) {
    double peak = 0.0;
    for (double d : dev) peak = std::max(peak, std::abs(d));
    return static_cast<double>(sign_changes(dev, 1e-6 * peak));
  };
  rec.set("overshoot_phase1", overshoots(dev_phase1));
  if (cfg.schedule == Schedule::step) {
    rec.set("overshoot_phase2", overshoots(dev_phase2));
    if (cfg.scale != 1.0) {
      TransientPolicy policy;
      policy.error_scale = cur.mu.norm();
      const auto q = convergence_ratio(increments_after, policy);
      rec.set("q_post", q.q);
      rec.set("q_post_minus_lambda", q.q - lambda.modulus);
    }

    // Replay the post-perturbation rounds with the frozen-K affine map.
    const SparseMatrix a = averaging_kernel(g, at_perturbation.k);
    const Eigen::VectorXd offset = affine_offset(g, at_perturbation.k, y);
    Eigen::VectorXd mu = at_perturbation.mu;
    double worst = 0.0;
    for (const auto& cp_mu : cp_mu_after) {
      mu = offset + a * mu;
      worst = std::max(worst, (mu - cp_mu).lpNorm<Eigen::Infinity>());
    }
    rec.set("replay_rounds", static_cast<double>(cp_mu_after.size()));
    rec.set("replay_max_diff", worst);
  }
  rec.set("shift_of_modes", (x_star - x_star_before).lpNorm<Eigen::Infinity>());
  return rec;
}

// ---------------------------------------------------------------------------
// Dynamic network

enum class CouplingChange { resample, perturb };

struct DynNetworkConfig {
  GraphParams graph{50, 8.0};
  Seeds seeds;
  double reference_tol = 1e-12;
  std::size_t max_iter = 1'000'000;
  double perturbation_scale = 1e-4;  // perturbation norm relative to |K*|
  std::size_t perturb_rounds = 1'500;
  std::size_t rounds = 6'000;
  double scale = 0.9;
  CouplingChange change = CouplingChange::resample;
  double amplitude = 0.2;
  std::size_t resample_period = 0;
};

inline DynNetworkConfig read_dyn_network(ConfigReader& r) {
  DynNetworkConfig c;
  c.graph = read_graph_params(r, 50, 8.0);
  c.seeds.graph = r.seed("graph");
  c.seeds.couplings = r.seed("couplings");
  c.seeds.values = r.seed("values");
  c.seeds.perturbation = r.seed("perturbation");
  c.reference_tol = r.get<double>("reference_tol", c.reference_tol);
  c.max_iter = r.get<std::size_t>("max_iter", c.max_iter);
  c.perturbation_scale = r.get<double>("perturbation_scale", c.perturbation_scale);
  c.perturb_rounds = r.get<std::size_t>("perturb_rounds", c.perturb_rounds);
  c.rounds = r.get<std::size_t>("rounds", c.rounds);
  c.scale = r.get<double>("scale", c.scale);
  const auto change = r.get<std::string>("coupling_change", "resample");
  if (change == "resample") c.change = CouplingChange::resample;
  else if (change == "perturb") c.change = CouplingChange::perturb;
  else throw ConfigError(r.context() + ": coupling_change must be resample or perturb");
  if (c.change == CouplingChange::perturb) c.amplitude = r.get<double>("amplitude", c.amplitude);
  c.resample_period = r.get<std::size_t>("resample_period", c.resample_period);
  if (c.change == CouplingChange::perturb && !(c.amplitude >= 0.0 && c.amplitude < 1.0))
    throw ConfigError(r.context() + ": amplitude must lie in [0, 1) so that perturbed couplings stay positive");
  if (!(c.perturbation_scale > 0.0)) throw ConfigError(r.context() + ": perturbation_scale must be positive");
  return c;
}

/// New couplings for coupling event `event`; the edge set never changes.
inline Graph change_couplings(const Graph& g, const DynNetworkConfig& cfg, std::uint64_t event) {
  const auto seed = derive_seed(cfg.seeds.perturbation, Stream::couplings, event);
  if (cfg.change == CouplingChange::resample) return assign_couplings(g, cfg.graph.q_min, cfg.graph.q_max, seed);
  Rng rng(seed);
  std::vector<double> q(g.couplings().begin(), g.couplings().end());
  for (auto& x : q) x *= 1.0 + cfg.amplitude * (2.0 * rng.uniform() - 1.0);
  return g.with_couplings(std::move(q));
}

inline ExperimentRecord run_dynamic_network(const DynNetworkConfig& cfg) {
  ExperimentRecord rec;
  rec.kind = "dyn-network";
  const Instance inst = make_instance(cfg.graph, cfg.seeds);
  const Graph& g = inst.graph;

  RunOptions ro;
  ro.tol = cfg.reference_tol;
  ro.max_iter = cfg.max_iter;
  const FixedPoint fp = run_to_convergence(g, init_zero(g), inst.y, ro);
  if (!fp.converged) throw NumericalError("reference fixed point did not converge");
  const double lambda_a = dominant_averaging(g, fp.state.k).modulus;
  const double lambda_b = dominant_topology(g, fp.state.k).modulus;
  rec.set("lambda_a", lambda_a);
  rec.set("lambda_b", lambda_b);
  rec.set("reference_iterations", static_cast<double>(fp.iterations));

  // Fast/slow manifolds: equal-norm kicks into K only and into mu only,
  // measured against an unperturbed twin so fixed-point error cancels.
  const double norm = cfg.perturbation_scale * fp.state.k.norm();
  const Eigen::VectorXd dir =
      positive_direction(g.num_directed(), norm, derive_seed(cfg.seeds.perturbation, Stream::perturbation));
  MessageState twin = fp.state, k_only = fp.state, mu_only = fp.state, tmp;
  k_only.k += dir;
  mu_only.mu += dir;

  auto& pt = rec.add_table("perturbation", {"iter", "konly_k_err", "konly_mu_err", "muonly_k_err", "muonly_mu_err"});
  std::vector<double> konly_k, muonly_mu;
  std::optional<std::size_t> half_k, half_mu;
  const double initial = norm;
  for (std::size_t t = 0; t <= cfg.perturb_rounds; ++t) {
    if (t > 0) {
      step(g, twin, inst.y, tmp);
      std::swap(twin, tmp);
      step(g, k_only, inst.y, tmp);
      std::swap(k_only, tmp);
      step(g, mu_only, inst.y, tmp);
      std::swap(mu_only, tmp);
    }
    const double kk = (k_only.k - twin.k).norm(), km = (k_only.mu - twin.mu).norm();
    const double mk = (mu_only.k - twin.k).norm(), mm = (mu_only.mu - twin.mu).norm();
    pt.add({static_cast<double>(t), kk, km, mk, mm});
    konly_k.push_back(kk);
    muonly_mu.push_back(mm);
    if (!half_k && std::hypot(kk, km) <= 0.5 * initial) half_k = t;
    if (!half_mu && std::hypot(mk, mm) <= 0.5 * initial) half_mu = t;
  }
  const double never = static_cast<double>(cfg.perturb_rounds + 1);
  rec.set("half_iters_k_only", half_k ? static_cast<double>(*half_k) : never);
  rec.set("half_iters_mu_only", half_mu ? static_cast<double>(*half_mu) : never);

  TransientPolicy fast;
  fast.stable_run = 3;
  fast.max_spread = 0.05;
  fast.min_points = 3;
  fast.floor_factor = 1e3;
  fast.error_scale = fp.state.k.norm();
  const auto tail_k = convergence_ratio(konly_k, fast);
  TransientPolicy slow;
  slow.error_scale = std::max(fp.state.mu.norm(), norm);
  const auto tail_mu = convergence_ratio(muonly_mu, slow);
  rec.set("tail_ratio_k_only", tail_k.q);
  rec.set("tail_ratio_mu_only", tail_mu.q);
  rec.set("tail_k_minus_lambda_b", tail_k.q - lambda_b);
  rec.set("tail_mu_minus_lambda_a", tail_mu.q - lambda_a);

  // Paired runs from the fixed point: values rescaled only, versus values
  // rescaled and couplings changed. Errors are against each run's own modes.
  const Eigen::VectorXd y_new = cfg.scale * inst.y;
  Graph g_net = change_couplings(g, cfg, 0);
  Eigen::VectorXd x_data = exact_marginal_modes(g, y_new).x;
  Eigen::VectorXd x_net = exact_marginal_modes(g_net, y_new).x;
  MessageState data = fp.state, net = fp.state;
  auto& traj = rec.add_table("trajectory", {"iter", "err_data_only", "err_network_and_data"});
  std::vector<double> err_data, err_net;
  std::uint64_t events = 1;
  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    if (cfg.resample_period > 0 && t > 1 && (t - 1) % cfg.resample_period == 0) {
      g_net = change_couplings(g_net, cfg, events++);
      x_net = exact_marginal_modes(g_net, y_new).x;
    }
    step(g, data, y_new, tmp);
    std::swap(data, tmp);
    step(g_net, net, y_new, tmp);
    std::swap(net, tmp);
    const double ed = (beliefs(g, data, y_new) - x_data).lpNorm<Eigen::Infinity>();
    const double en = (beliefs(g_net, net, y_new) - x_net).lpNorm<Eigen::Infinity>();
    traj.add({static_cast<double>(t), ed, en});
    err_data.push_back(ed);
    err_net.push_back(en);
  }
  rec.set("coupling_events", static_cast<double>(events));
  rec.set("err_data_only_final", err_data.back());
  rec.set("err_network_and_data_final", err_net.back());
  if (cfg.resample_period == 0) {
    TransientPolicy p;
    p.error_scale = std::max(err_data.front(), y_new.norm());
    rec.set("q_data_only", convergence_ratio(err_data, p).q);
    p.error_scale = std::max(err_net.front(), y_new.norm());
    rec.set("q_network_and_data", convergence_ratio(err_net, p).q);
    rec.set("lambda_a_after_change", dominant_averaging(g_net, converged_topology(g_net).k).modulus);
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Initialization comparison

struct InitCompareConfig {
  GraphParams graph{80, 8.0};
  Seeds seeds;
  std::vector<double> alphas{0.5, 0.9, 1.1};
  double tol = 1e-8;
  double reference_tol = 1e-12;
  std::size_t max_iter = 1'000'000;
  std::size_t trace_rounds = 500;
  std::optional<std::pair<NodeId, NodeId>> tracked;
};

inline InitCompareConfig read_init_compare(ConfigReader& r) {
  InitCompareConfig c;
  c.graph = read_graph_params(r, 80, 8.0);
  c.seeds.graph = r.seed("graph");
  c.seeds.couplings = r.seed("couplings");
  c.seeds.values = r.seed("values");
  c.alphas = r.list<double>("alphas", c.alphas);
  c.tol = r.get<double>("tol", c.tol);
  c.reference_tol = r.get<double>("reference_tol", c.reference_tol);
  c.max_iter = r.get<std::size_t>("max_iter", c.max_iter);
  c.trace_rounds = r.get<std::size_t>("trace_rounds", c.trace_rounds);
  const auto from = r.get<long long>("track_from", -1);
  const auto to = r.get<long long>("track_to", -1);
  if (from >= 0 && to >= 0) c.tracked = std::pair{static_cast<NodeId>(from), static_cast<NodeId>(to)};
  for (double a : c.alphas)
    if (!(a >= 0.0)) throw ConfigError(r.context() + ": alphas must be >= 0");
  return c;
}

inline ExperimentRecord run_init_comparison(const InitCompareConfig& cfg) {
  ExperimentRecord rec;
  rec.kind = "init-compare";
  const Instance inst = make_instance(cfg.graph, cfg.seeds);
  const Graph& g = inst.graph;
  if (g.num_edges() == 0) throw ConfigError("init-compare needs a graph with at least one edge");

  RunOptions ro;
  ro.tol = cfg.reference_tol;
  ro.max_iter = cfg.max_iter;
  const FixedPoint ref = run_to_convergence(g, init_zero(g), inst.y, ro);
  if (!ref.converged) throw NumericalError("reference fixed point did not converge");

  std::size_t tracked = 0;
  if (cfg.tracked) {
    auto d = g.directed_index(cfg.tracked->first, cfg.tracked->second);
    if (!d) throw ConfigError("tracked edge is not an edge of the generated graph");
    tracked = *d;
  } else if (auto d = g.num_nodes() > 15 ? g.directed_index(15, 10) : std::nullopt) {
    tracked = *d;
  }
  const auto te = static_cast<Eigen::Index>(tracked);
  rec.set("tracked_from", g.source(tracked));
  rec.set("tracked_to", g.target(tracked));
  rec.set("k_star_tracked", ref.state.k[te]);
  rec.set("mu_star_tracked", ref.state.mu[te]);
  rec.set("reference_iterations", static_cast<double>(ref.iterations));

  std::vector<double> schemes{0.0};
  for (double a : cfg.alphas)
    if (a != 0.0) schemes.push_back(a);

  auto& traj = rec.add_table("trajectory", {"alpha", "iter", "dk_tracked", "dmu_tracked", "k_err_max", "mu_err_max"});
  auto& iters = rec.add_table("iterations", {"alpha", "iterations", "converged"});
  std::size_t zero_iters = 0;
  bool zero_fastest = true;
  for (double alpha : schemes) {
    MessageState s0 = alpha == 0.0 ? init_zero(g) : init_scaled(ref, alpha);
    auto record_row = [&](std::size_t it, const MessageState& s) {
      if (it > cfg.trace_rounds) return;
      traj.add({alpha, static_cast<double>(it), ref.state.k[te] - s.k[te], ref.state.mu[te] - s.mu[te],
                (ref.state.k - s.k).lpNorm<Eigen::Infinity>(), (ref.state.mu - s.mu).lpNorm<Eigen::Infinity>()});
    };
    record_row(0, s0);
    RunOptions opts;
    opts.tol = cfg.tol;
    opts.max_iter = cfg.max_iter;
    opts.observer = [&](std::size_t it, const MessageState& s, double) { record_row(it, s); };
    const auto fp = run_to_convergence(g, std::move(s0), inst.y, opts);
    // The round that confirms the tolerance is not counted, so a start at the
    // fixed point needs zero iterations.
    const std::size_t used = fp.converged ? fp.iterations - 1 : fp.iterations;
    iters.add({alpha, static_cast<double>(used), fp.converged ? 1.0 : 0.0});
    if (alpha == 0.0) zero_iters = used;
    else if (alpha != 1.0 && used <= zero_iters) zero_fastest = false;
    if (!fp.converged) zero_fastest = false;
    const std::string key = alpha == 0.0 ? "iterations_zero" : "iterations_alpha_" + format_real(alpha);
    rec.set(key, static_cast<double>(used));
  }
  rec.set("zero_is_fastest", zero_fastest ? 1.0 : 0.0);
  return rec;
}

// ---------------------------------------------------------------------------
// Size scaling

struct ScalingConfig {
  GraphParams graph{20, 8.0};
  Seeds seeds;
  std::vector<std::size_t> sizes{20, 40, 80, 160};
  std::size_t ensemble = 100;
  std::size_t ensemble_max_n = 160;  // larger sizes get one run
  double k_tol = 1e-12;
  double power_tol = 1e-12;
};

inline ScalingConfig read_scaling(ConfigReader& r) {
  ScalingConfig c;
  c.graph = read_graph_params(r, 20, 8.0);
  c.seeds.graph = r.seed("graph");
  c.seeds.couplings = r.seed("couplings");
  c.sizes = r.list<std::size_t>("sizes", c.sizes);
  c.ensemble = r.get<std::size_t>("ensemble", c.ensemble);
  c.ensemble_max_n = r.get<std::size_t>("ensemble_max_n", c.ensemble_max_n);
  c.k_tol = r.get<double>("k_tol", c.k_tol);
  c.power_tol = r.get<double>("power_tol", c.power_tol);
  if (c.ensemble == 0) throw ConfigError(r.context() + ": ensemble must be >= 1");
  return c;
}

struct MemberResult {
  double lambda_a = 0.0;
  double lambda_b = 0.0;
  double mean_degree = 0.0;
};

inline MemberResult kernel_member(const GraphParams& gp, const Seeds& seeds, std::uint64_t member, double k_tol,
                                  double power_tol, bool with_b = false) {
  const Instance inst = make_instance(gp, seeds, member);
  const auto tk = converged_topology(inst.graph, k_tol);
  PowerOptions po;
  po.tol = power_tol;
  MemberResult m;
  m.lambda_a = dominant_averaging(inst.graph, tk.k, po).modulus;
  if (with_b) m.lambda_b = dominant_topology(inst.graph, tk.k, po).modulus;
  m.mean_degree = inst.realized_mean_degree;
  return m;
}

inline ExperimentRecord run_scaling_study(const ScalingConfig& cfg, std::size_t jobs = 1) {
  ExperimentRecord rec;
  rec.kind = "scaling";
  auto& table = rec.add_table("table", {"n", "p", "c_exp", "mean_c", "std_c", "lambda_single", "mean_lambda",
                                        "std_lambda", "members"});
  for (std::size_t n : cfg.sizes) {
    GraphParams gp = cfg.graph;
    gp.n = n;
    const std::size_t members = n <= cfg.ensemble_max_n ? cfg.ensemble : 1;
    // Each size gets its own seed family so rows are independent.
    Seeds seeds{derive_seed(cfg.seeds.graph, Stream::graph, n), derive_seed(cfg.seeds.couplings, Stream::couplings, n)};
    const auto results = parallel_map(members, jobs, [&](std::size_t m) {
      return kernel_member(gp, seeds, m, cfg.k_tol, cfg.power_tol);
    });
    std::vector<double> lam, deg;
    for (const auto& r : results) {
      lam.push_back(r.lambda_a);
      deg.push_back(r.mean_degree);
    }
    const auto sl = ensemble_stats(lam), sd = ensemble_stats(deg);
    table.add({static_cast<double>(n), gp.c / static_cast<double>(n), deg.front(), sd.mean, sd.std, lam.front(),
               sl.mean, sl.std, static_cast<double>(members)});
    const std::string suffix = "_n" + std::to_string(n);
    rec.set("mean_lambda" + suffix, sl.mean);
    rec.set("std_lambda" + suffix, sl.std);
    rec.set("mean_c" + suffix, sd.mean);
    rec.set("std_c" + suffix, sd.std);
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Degree dependence

enum class DegreeEstimator { lambda, q };

struct DegreeConfig {
  GraphParams graph{20, 8.0};
  Seeds seeds;
  std::vector<double> degrees{8, 10, 12, 14, 16, 18};
  std::size_t ensemble = 30;
  DegreeEstimator estimator = DegreeEstimator::lambda;
  std::size_t q_rounds = 3'000;
};

inline DegreeConfig read_degree(ConfigReader& r) {
  DegreeConfig c;
  c.graph = read_graph_params(r, 20, 8.0);
  c.seeds.graph = r.seed("graph");
  c.seeds.couplings = r.seed("couplings");
  c.degrees = r.list<double>("degrees", c.degrees);
  c.ensemble = r.get<std::size_t>("ensemble", c.ensemble);
  const auto est = r.get<std::string>("estimator", "lambda");
  if (est == "lambda") c.estimator = DegreeEstimator::lambda;
  else if (est == "q") c.estimator = DegreeEstimator::q;
  else throw ConfigError(r.context() + ": estimator must be lambda or q");
  if (c.estimator == DegreeEstimator::q) {
    c.seeds.values = r.seed("values");
    c.q_rounds = r.get<std::size_t>("q_rounds", c.q_rounds);
  }
  if (c.ensemble == 0) throw ConfigError(r.context() + ": ensemble must be >= 1");
  for (double d : c.degrees)
    if (!(d > 0.0 && d < static_cast<double>(c.graph.n)))
      throw ConfigError(r.context() + ": degree " + format_real(d) + " gives an empty or complete graph at n = " +
                        std::to_string(c.graph.n));
  return c;
}

inline ExperimentRecord run_degree_study(const DegreeConfig& cfg, std::size_t jobs = 1) {
  ExperimentRecord rec;
  rec.kind = "degree";
  auto& points = rec.add_table("points", {"c", "mean", "std", "members"});
  std::vector<double> cs, means;
  for (double c : cfg.degrees) {
    GraphParams gp = cfg.graph;
    gp.c = c;
    const auto tag = static_cast<std::uint64_t>(std::llround(c * 1000.0));
    Seeds seeds{derive_seed(cfg.seeds.graph, Stream::graph, tag), derive_seed(cfg.seeds.couplings, Stream::couplings, tag),
                derive_seed(cfg.seeds.values, Stream::values, tag)};
    const auto values = parallel_map(cfg.ensemble, jobs, [&](std::size_t m) {
      if (cfg.estimator == DegreeEstimator::lambda) return kernel_member(gp, seeds, m, 1e-12, 1e-12).lambda_a;
      const Instance inst = make_instance(gp, seeds, m);
      const auto tk = converged_topology(inst.graph);
      return affine_contraction(inst.graph, tk.k, inst.y, cfg.q_rounds).q;
    });
    const auto s = ensemble_stats(values);
    points.add({c, s.mean, s.std, static_cast<double>(s.count)});
    cs.push_back(c);
    means.push_back(s.mean);
  }
  bool increasing = true;
  for (std::size_t i = 1; i < means.size(); ++i)
    if (!(means[i] > means[i - 1] && cs[i] > cs[i - 1])) increasing = false;
  rec.set("monotonic", increasing ? 1.0 : 0.0);
  const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
  rec.set("q_range", *hi - *lo);
  std::vector<double> distinct(cs);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) {
    rec.set("point_estimate", means.front());
    rec.notes.push_back("single degree value: log fit declined");
    return rec;
  }
  const auto fit = fit_log(cs, means);
  rec.set("slope", fit.slope);
  rec.set("intercept", fit.intercept);
  rec.set("fit_rms", fit.rms);
  return rec;
}

// ---------------------------------------------------------------------------
// A/B eigenvalue table

struct AbTableConfig {
  GraphParams graph{20, 8.0};
  Seeds seeds;
  std::vector<std::pair<std::size_t, double>> pairs{{20, 18}, {30, 14}, {40, 10}, {50, 8}};
  std::size_t members = 1;
  bool dense = false;
};

inline AbTableConfig read_ab_table(ConfigReader& r) {
  AbTableConfig c;
  c.graph = read_graph_params(r, 20, 8.0);
  c.seeds.graph = r.seed("graph");
  c.seeds.couplings = r.seed("couplings");
  std::vector<std::string> defaults;
  for (auto [n, deg] : c.pairs) defaults.push_back(std::to_string(n) + ":" + format_real(deg));
  const auto items = r.list<std::string>("pairs", defaults);
  c.pairs.clear();
  for (const auto& item : items) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError(r.context() + ": pairs entries must be N:c");
    try {
      c.pairs.emplace_back(std::stoul(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
    } catch (const std::exception&) {
      throw ConfigError(r.context() + ": cannot parse pair '" + item + "'");
    }
  }
  c.members = r.get<std::size_t>("members", c.members);
  c.dense = r.get<std::string>("method", "power") == "dense";
  return c;
}

inline ExperimentRecord run_ab_eigen_table(const AbTableConfig& cfg, std::size_t jobs = 1) {
  ExperimentRecord rec;
  rec.kind = "ab-table";
  auto& table = rec.add_table("table", {"n", "c", "member", "c_exp", "lambda_a", "lambda_b", "ratio"});
  double max_ratio = 0.0, min_a = 1.0, max_a = 0.0, max_b = 0.0;
  for (auto [n, c] : cfg.pairs) {
    GraphParams gp = cfg.graph;
    gp.n = n;
    gp.c = c;
    const auto tag = static_cast<std::uint64_t>(n) * 1000 + static_cast<std::uint64_t>(std::llround(c));
    Seeds seeds{derive_seed(cfg.seeds.graph, Stream::graph, tag), derive_seed(cfg.seeds.couplings, Stream::couplings, tag)};
    const auto results = parallel_map(cfg.members, jobs, [&](std::size_t m) {
      if (!cfg.dense) return kernel_member(gp, seeds, m, 1e-12, 1e-12, true);
      const Instance inst = make_instance(gp, seeds, m);
      const auto tk = converged_topology(inst.graph);
      return MemberResult{dominant_modulus_dense(to_dense(averaging_kernel(inst.graph, tk.k))),
                          dominant_modulus_dense(to_dense(topology_kernel(inst.graph, tk.k))),
                          inst.realized_mean_degree};
    });
    for (std::size_t m = 0; m < results.size(); ++m) {
      const auto& r = results[m];
      const double ratio = r.lambda_b / r.lambda_a;
      table.add({static_cast<double>(n), c, static_cast<double>(m), r.mean_degree, r.lambda_a, r.lambda_b, ratio});
      max_ratio = std::max(max_ratio, ratio);
      min_a = std::min(min_a, r.lambda_a);
      max_a = std::max(max_a, r.lambda_a);
      max_b = std::max(max_b, r.lambda_b);
    }
  }
  rec.set("min_lambda_a", min_a);
  rec.set("max_lambda_a", max_a);
  rec.set("max_lambda_b", max_b);
  rec.set("max_ratio", max_ratio);
  return rec;
}

// ---------------------------------------------------------------------------
// Dispatch

/// Parses `kv` for `kind`, runs the study and fills the record's config echo
/// and wall-clock time. Unknown keys are rejected.
inline ExperimentRecord run_experiment(ExperimentKind kind, const KeyValues& kv, std::size_t jobs = 1) {
  ConfigReader reader(kv, std::string(kind_name(kind)));
  const auto start = std::chrono::steady_clock::now();
  ExperimentRecord rec;
  switch (kind) {
    case ExperimentKind::dyn_data: {
      auto cfg = read_dyn_data(reader);
      reader.finish();
      rec = run_dynamic_data(cfg);
      break;
    }
    case ExperimentKind::dyn_network: {
      auto cfg = read_dyn_network(reader);
      reader.finish();
      rec = run_dynamic_network(cfg);
      break;
    }
    case ExperimentKind::init_compare: {
      auto cfg = read_init_compare(reader);
      reader.finish();
      rec = run_init_comparison(cfg);
      break;
    }
    case ExperimentKind::scaling: {
      auto cfg = read_scaling(reader);
      reader.finish();
      rec = run_scaling_study(cfg, jobs);
      break;
    }
    case ExperimentKind::degree: {
      auto cfg = read_degree(reader);
      reader.finish();
      rec = run_degree_study(cfg, jobs);
      break;
    }
    case ExperimentKind::ab_table: {
      auto cfg = read_ab_table(reader);
      reader.finish();
      rec = run_ab_eigen_table(cfg, jobs);
      break;
    }
  }
  rec.config = reader.resolved();
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace cprop
