#pragma once

// Consensus Propagation: Gaussian belief propagation for distributed averaging.
//
// Every directed edge i -> j carries a topology message K_ij and a local state
// message mu_ij. One synchronous round reads only the previous iterate:
//
//   S_ij   = 1 + sum_{k in N(i)\j} K_ki
//   K'_ij  = S_ij / (1 + S_ij / (beta Q_ij))
//   mu'_ij = (y_i + sum_{k in N(i)\j} K_ki mu_ki) / S_ij
//
// and node i reads out the belief
//
//   b_i = (y_i + sum_{k in N(i)} K_ki mu_ki) / (1 + sum_{k in N(i)} K_ki).
//
// Neighbor sums are accumulated once per node in incidence order and the
// excluded term is subtracted per outgoing edge, so a round costs O(|E|) and
// every output element is a fixed function of the previous iterate: the rounds
// are safe to split across threads by node and give identical bits either way.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cprop/error.hpp"
#include "cprop/graph.hpp"

namespace cprop {

struct MessageState {
  Eigen::VectorXd k;   // topology messages, indexed by directed edge
  Eigen::VectorXd mu;  // local state messages, indexed by directed edge
};

struct FixedPoint {
  MessageState state;
  double residual = 0.0;  // max-norm of the last (K, mu) change
  std::size_t iterations = 0;
  bool converged = false;
  double tolerance = 0.0;
};

/// K-only fixed point. The K recursion never reads mu or y.
struct TopologyFixedPoint {
  Eigen::VectorXd k;
  double residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

template <class Real>
inline Real topology_update(Real cavity, Real beta_q) {
  const Real s = Real(1) + cavity;
  return s / (Real(1) + s / beta_q);
}

inline void check_sizes(const Graph& g, Eigen::Index k, Eigen::Index mu) {
  const auto d = static_cast<Eigen::Index>(g.num_directed());
  if (k != d || mu != d)
    throw ConfigError("message vectors must have length 2|E| = " + std::to_string(d));
}

inline void check_values(const Graph& g, const Eigen::VectorXd& y) {
  if (y.size() != static_cast<Eigen::Index>(g.num_nodes()))
    throw ConfigError("node values must have length n = " + std::to_string(g.num_nodes()));
}

}  // namespace detail

/// One synchronous round over spans. `Real` may be wider than double; the
/// finite-difference oracle evaluates this in extended precision.
template <class Real>
void step_messages(const Graph& g, std::span<const Real> k, std::span<const Real> mu, std::span<const Real> y,
                   std::span<Real> k_out, std::span<Real> mu_out) {
  const Real beta = static_cast<Real>(g.beta());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    const auto inc = g.incident(i);
    Real sum_k = 0;
    Real sum_kmu = 0;
    for (const auto& a : inc) {
      sum_k += k[a.in];
      sum_kmu += k[a.in] * mu[a.in];
    }
    for (const auto& a : inc) {
      const Real cav_k = sum_k - k[a.in];
      const Real s = Real(1) + cav_k;
      k_out[a.out] = detail::topology_update(cav_k, beta * static_cast<Real>(g.coupling_of(a.out)));
      mu_out[a.out] = (y[i] + (sum_kmu - k[a.in] * mu[a.in])) / s;
    }
  }
}

/// The K half of a round alone; bit-identical to the K part of step_messages.
template <class Real>
void step_topology(const Graph& g, std::span<const Real> k, std::span<Real> k_out) {
  const Real beta = static_cast<Real>(g.beta());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    const auto inc = g.incident(i);
    Real sum_k = 0;
    for (const auto& a : inc) sum_k += k[a.in];
    for (const auto& a : inc)
      k_out[a.out] = detail::topology_update(sum_k - k[a.in], beta * static_cast<Real>(g.coupling_of(a.out)));
  }
}

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
inline std::span<double> as_span(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

inline void step(const Graph& g, const MessageState& s, const Eigen::VectorXd& y, MessageState& out) {
  detail::check_sizes(g, s.k.size(), s.mu.size());
  detail::check_values(g, y);
  out.k.resize(s.k.size());
  out.mu.resize(s.mu.size());
  step_messages<double>(g, as_span(s.k), as_span(s.mu), as_span(y), as_span(out.k), as_span(out.mu));
}

inline MessageState step(const Graph& g, const MessageState& s, const Eigen::VectorXd& y) {
  MessageState out;
  step(g, s, y, out);
  return out;
}

inline Eigen::VectorXd step_topology(const Graph& g, const Eigen::VectorXd& k) {
  detail::check_sizes(g, k.size(), k.size());
  Eigen::VectorXd out(k.size());
  step_topology<double>(g, as_span(k), as_span(out));
  return out;
}

/// S_ij = 1 + sum_{k in N(i)\j} K_ki for every directed edge i -> j.
inline Eigen::VectorXd cavity_precision(const Graph& g, const Eigen::VectorXd& k) {
  Eigen::VectorXd s(k.size());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    const auto inc = g.incident(i);
    double sum_k = 0.0;
    for (const auto& a : inc) sum_k += k[static_cast<Eigen::Index>(a.in)];
    for (const auto& a : inc)
      s[static_cast<Eigen::Index>(a.out)] = 1.0 + (sum_k - k[static_cast<Eigen::Index>(a.in)]);
  }
  return s;
}

/// Belief per node; the sums run over all neighbors. Isolated nodes return y_i.
inline Eigen::VectorXd beliefs(const Graph& g, const MessageState& s, const Eigen::VectorXd& y) {
  detail::check_sizes(g, s.k.size(), s.mu.size());
  detail::check_values(g, y);
  Eigen::VectorXd b(y.size());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    double sum_k = 0.0;
    double sum_kmu = 0.0;
    for (const auto& a : g.incident(i)) {
      const auto in = static_cast<Eigen::Index>(a.in);
      sum_k += s.k[in];
      sum_kmu += s.k[in] * s.mu[in];
    }
    b[i] = (y[i] + sum_kmu) / (1.0 + sum_k);
  }
  return b;
}

// Initialization schemes.

inline MessageState init_zero(const Graph& g) {
  const auto d = static_cast<Eigen::Index>(g.num_directed());
  return {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
}

/// K = alpha K*, mu = alpha mu*.
inline MessageState init_scaled(const FixedPoint& reference, double alpha) {
  if (!(std::isfinite(alpha) && alpha >= 0.0)) throw ConfigError("scaling factor alpha must be finite and >= 0");
  return {alpha * reference.state.k, alpha * reference.state.mu};
}

inline MessageState init_explicit(const Graph& g, Eigen::VectorXd k, Eigen::VectorXd mu) {
  detail::check_sizes(g, k.size(), mu.size());
  if (!k.allFinite() || !mu.allFinite()) throw ConfigError("initial messages must be finite");
  if ((k.array() < 0.0).any()) throw ConfigError("initial topology messages must be non-negative");
  return {std::move(k), std::move(mu)};
}

struct RunOptions {
  double tol = 1e-10;
  std::size_t max_iter = 1'000'000;
  /// Called after every round with (round number, new state, residual).
  std::function<void(std::size_t, const MessageState&, double)> observer;
  /// If set, receives the residual of every round.
  std::vector<double>* residual_history = nullptr;
};

/// Iterates rounds until the max-norm change of (K, mu) is <= tol. Hitting
/// max_iter is reported through `converged`, not thrown.
inline FixedPoint run_to_convergence(const Graph& g, MessageState s0, const Eigen::VectorXd& y,
                                     const RunOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw ConfigError("tolerance must be positive");
  detail::check_sizes(g, s0.k.size(), s0.mu.size());
  detail::check_values(g, y);
  FixedPoint fp;
  fp.tolerance = opts.tol;
  MessageState cur = std::move(s0);
  MessageState next;
  double residual = 0.0;
  std::size_t it = 0;
  while (it < opts.max_iter) {
    step(g, cur, y, next);
    ++it;
    residual = 0.0;
    if (next.k.size() > 0)
      residual = std::max((next.k - cur.k).lpNorm<Eigen::Infinity>(), (next.mu - cur.mu).lpNorm<Eigen::Infinity>());
    std::swap(cur, next);
    if (opts.residual_history) opts.residual_history->push_back(residual);
    if (opts.observer) opts.observer(it, cur, residual);
    if (residual <= opts.tol) {
      fp.converged = true;
      break;
    }
  }
  fp.state = std::move(cur);
  fp.residual = residual;
  fp.iterations = it;
  return fp;
}

inline TopologyFixedPoint converge_topology(const Graph& g, double tol = 1e-12, std::size_t max_iter = 1'000'000,
                                            Eigen::VectorXd k0 = {}) {
  if (!(tol > 0.0)) throw ConfigError("tolerance must be positive");
  if (k0.size() == 0) k0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_directed()));
  detail::check_sizes(g, k0.size(), k0.size());
  TopologyFixedPoint out;
  Eigen::VectorXd cur = std::move(k0);
  Eigen::VectorXd next(cur.size());
  while (out.iterations < max_iter) {
    step_topology<double>(g, as_span(cur), as_span(next));
    ++out.iterations;
    out.residual = cur.size() ? (next - cur).lpNorm<Eigen::Infinity>() : 0.0;
    std::swap(cur, next);
    if (out.residual <= tol) {
      out.converged = true;
      break;
    }
  }
  out.k = std::move(cur);
  return out;
}

}  // namespace cprop
