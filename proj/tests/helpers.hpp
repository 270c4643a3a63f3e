#pragma once

#include <vector>

#include "cprop/consensus.hpp"
#include "cprop/generators.hpp"
#include "cprop/graph.hpp"

namespace cprop::testing {

inline Graph path_graph(std::size_t n, double q = 1.0, double beta = 1.0) {
  std::vector<Edge> e;
  for (NodeId i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  return Graph(n, e, std::vector<double>(e.size(), q), beta);
}

inline Graph triangle(double q = 1.0, double beta = 1.0) {
  return Graph(3, {{0, 1}, {1, 2}, {0, 2}}, {q, q, q}, beta);
}

/// Connected G(n, c) with U[0.5, 2] couplings.
inline Graph random_graph(std::size_t n, double c, double beta, std::uint64_t seed) {
  ErdosRenyiOptions opts;
  opts.require_connected = true;
  auto er = generate_erdos_renyi(n, c, seed, opts);
  return assign_couplings(er.graph, 0.5, 2.0, seed).with_beta(beta);
}

inline FixedPoint converge(const Graph& g, const Eigen::VectorXd& y, double tol = 1e-12) {
  RunOptions o;
  o.tol = tol;
  return run_to_convergence(g, init_zero(g), y, o);
}

}  // namespace cprop::testing
