#pragma once

// Seeded random instances: Erdos-Renyi graphs G(n, p = c/n), i.i.d. uniform
// couplings and node values. See rng.hpp for the bit-level generator contract.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cprop/error.hpp"
#include "cprop/graph.hpp"
#include "cprop/rng.hpp"

namespace cprop {

struct ErdosRenyiOptions {
  bool require_connected = false;
  std::size_t max_attempts = 100;
};

struct ErdosRenyiSample {
  Graph graph;  // unit couplings, unit beta
  double p = 0.0;
  double realized_mean_degree = 0.0;
  std::size_t attempts = 1;
};

namespace detail {

// Each of the n(n-1)/2 pairs is kept independently with probability p.
// Pairs (w, v), w < v, are visited in the order (0,1), (0,2), (1,2), (0,3), ...
// and the gap to the next kept pair is drawn geometrically
//   skip = floor(log(1 - r) / log(1 - p)),  r = uniform()
// so the cost is O(n + |E|) instead of O(n^2).
inline std::vector<Edge> sample_gnp_edges(std::size_t n, double p, Rng& rng) {
  std::vector<Edge> edges;
  if (p <= 0.0 || n < 2) return edges;
  if (p >= 1.0) {
    edges.reserve(n * (n - 1) / 2);
    for (std::size_t v = 1; v < n; ++v)
      for (std::size_t w = 0; w < v; ++w) edges.push_back({static_cast<NodeId>(w), static_cast<NodeId>(v)});
    return edges;
  }
  const double log_q = std::log1p(-p);
  std::size_t v = 1;
  long double w = -1;
  while (v < n) {
    const double r = rng.uniform();
    w += 1 + std::floor(std::log1p(-r) / log_q);
    while (w >= static_cast<long double>(v) && v < n) {
      w -= static_cast<long double>(v);
      ++v;
    }
    if (v < n) edges.push_back({static_cast<NodeId>(w), static_cast<NodeId>(v)});
  }
  return edges;
}

}  // namespace detail

/// G(n, p) with p = c / n. c may equal n (complete graph) but not exceed it.
inline ErdosRenyiSample generate_erdos_renyi_p(std::size_t n, double p, std::uint64_t seed,
                                               const ErdosRenyiOptions& opts = {}) {
  if (n < 2) throw ConfigError("Erdos-Renyi graph needs n >= 2, got " + std::to_string(n));
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("edge probability must lie in (0, 1], got " + std::to_string(p));
  const std::size_t attempts = opts.require_connected ? std::max<std::size_t>(opts.max_attempts, 1) : 1;
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    Rng rng(derive_seed(seed, Stream::graph, attempt));
    Graph g = Graph::uncoupled(n, detail::sample_gnp_edges(n, p, rng));
    if (opts.require_connected && !is_connected(g)) continue;
    const double deg = g.mean_degree();
    return {std::move(g), p, deg, attempt + 1};
  }
  throw ConfigError("no connected G(" + std::to_string(n) + ", " + std::to_string(p) + ") sample within " +
                    std::to_string(attempts) + " attempts");
}

inline ErdosRenyiSample generate_erdos_renyi(std::size_t n, double c, std::uint64_t seed,
                                             const ErdosRenyiOptions& opts = {}) {
  if (!(c > 0.0)) throw ConfigError("mean degree c must be positive");
  if (c > static_cast<double>(n))
    throw ConfigError("mean degree c = " + std::to_string(c) + " must not exceed n = " + std::to_string(n));
  return generate_erdos_renyi_p(n, c / static_cast<double>(n), seed, opts);
}

/// Every undirected edge gets an independent U[q_min, q_max] coupling, in edge order.
inline Graph assign_couplings(const Graph& g, double q_min, double q_max, std::uint64_t seed) {
  if (!(std::isfinite(q_min) && std::isfinite(q_max) && q_min > 0.0 && q_min <= q_max))
    throw ConfigError("couplings need 0 < q_min <= q_max, both finite");
  Rng rng(derive_seed(seed, Stream::couplings));
  std::vector<double> q(g.num_edges());
  for (auto& x : q) x = q_min == q_max ? q_min : rng.uniform(q_min, q_max);
  return g.with_couplings(std::move(q));
}

/// i.i.d. U[lo, hi) node values.
inline Eigen::VectorXd random_node_values(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(derive_seed(seed, Stream::values));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (auto& v : y) v = rng.uniform(lo, hi);
  return y;
}

}  // namespace cprop
