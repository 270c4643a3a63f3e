#pragma once

// Undirected weighted graph with per-edge couplings and a global coupling,
// plus the directed-edge numbering that indexes every message vector.
//
// Undirected edges are kept sorted by (smaller endpoint, larger endpoint).
// Undirected edge e = {u, v}, u < v, owns directed indices
//   2e     : u -> v
//   2e + 1 : v -> u
// so reverse(d) == d ^ 1.

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cprop/error.hpp"

namespace cprop {

using NodeId = std::uint32_t;

struct Edge {
  NodeId u;
  NodeId v;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// One neighbor of a node together with the two directed messages on that edge.
struct Incidence {
  NodeId neighbor;
  std::size_t in;   // neighbor -> node
  std::size_t out;  // node -> neighbor
};

class Graph {
public:
  Graph() = default;

  /// Validates and canonicalizes: endpoints are swapped to u < v and edges are
  /// sorted, with `couplings` permuted alongside.
  Graph(std::size_t n, std::vector<Edge> edges, std::vector<double> couplings, double beta)
      : n_(n), beta_(beta) {
    if (n == 0) throw ConfigError("graph must have at least one node");
    if (couplings.size() != edges.size())
      throw ConfigError("coupling count " + std::to_string(couplings.size()) +
                        " does not match edge count " + std::to_string(edges.size()));
    if (!(std::isfinite(beta) && beta > 0.0)) throw ConfigError("beta must be positive and finite");

    std::vector<std::size_t> order(edges.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (auto& e : edges) {
      if (e.u >= n || e.v >= n)
        throw ConfigError("edge {" + std::to_string(e.u) + "," + std::to_string(e.v) +
                          "} has an endpoint outside [0, " + std::to_string(n) + ")");
      if (e.u == e.v) throw ConfigError("self-loop at node " + std::to_string(e.u));
      if (e.u > e.v) std::swap(e.u, e.v);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return edges[a] < edges[b]; });

    edges_.reserve(edges.size());
    q_.reserve(edges.size());
    for (std::size_t idx : order) {
      if (!edges_.empty() && edges_.back() == edges[idx])
        throw ConfigError("duplicate edge {" + std::to_string(edges[idx].u) + "," +
                          std::to_string(edges[idx].v) + "}");
      const double q = couplings[idx];
      if (!(std::isfinite(q) && q > 0.0))
        throw ConfigError("coupling of edge {" + std::to_string(edges[idx].u) + "," +
                          std::to_string(edges[idx].v) + "} must be positive and finite");
      edges_.push_back(edges[idx]);
      q_.push_back(q);
    }
    build_adjacency();
  }

  /// Unit couplings and unit beta; the shape a random generator produces.
  static Graph uncoupled(std::size_t n, std::vector<Edge> edges) {
    std::vector<double> q(edges.size(), 1.0);
    return Graph(n, std::move(edges), std::move(q), 1.0);
  }

  std::size_t num_nodes() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  std::size_t num_directed() const noexcept { return 2 * edges_.size(); }
  double beta() const noexcept { return beta_; }

  std::span<const Edge> edges() const noexcept { return edges_; }
  std::span<const double> couplings() const noexcept { return q_; }

  NodeId source(std::size_t d) const noexcept { return (d & 1) ? edges_[d >> 1].v : edges_[d >> 1].u; }
  NodeId target(std::size_t d) const noexcept { return (d & 1) ? edges_[d >> 1].u : edges_[d >> 1].v; }
  static constexpr std::size_t reverse(std::size_t d) noexcept { return d ^ 1; }
  /// Coupling of the undirected edge carrying directed message d.
  double coupling_of(std::size_t d) const noexcept { return q_[d >> 1]; }

  std::span<const Incidence> incident(NodeId i) const noexcept {
    return {incidences_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::size_t degree(NodeId i) const noexcept { return offsets_[i + 1] - offsets_[i]; }

  /// Index of the directed message i -> j, if {i, j} is an edge.
  std::optional<std::size_t> directed_index(NodeId i, NodeId j) const {
    const Edge key{std::min(i, j), std::max(i, j)};
    auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
    if (it == edges_.end() || *it != key) return std::nullopt;
    const auto e = static_cast<std::size_t>(it - edges_.begin());
    return i < j ? 2 * e : 2 * e + 1;
  }

  double mean_degree() const noexcept { return 2.0 * static_cast<double>(edges_.size()) / static_cast<double>(n_); }

  Graph with_beta(double beta) const { return Graph(n_, edges_, q_, beta); }
  Graph with_couplings(std::vector<double> q) const { return Graph(n_, edges_, std::move(q), beta_); }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_ == b.n_ && a.beta_ == b.beta_ && a.edges_ == b.edges_ && a.q_ == b.q_;
  }

private:
  void build_adjacency() {
    offsets_.assign(n_ + 1, 0);
    for (const auto& e : edges_) {
      ++offsets_[e.u + 1];
      ++offsets_[e.v + 1];
    }
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
    incidences_.resize(2 * edges_.size());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    // Incidence lists come out sorted by neighbor because edges_ is sorted.
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto [u, v] = edges_[e];
      incidences_[fill[u]++] = {v, 2 * e + 1, 2 * e};
    }
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto [u, v] = edges_[e];
      incidences_[fill[v]++] = {u, 2 * e, 2 * e + 1};
    }
    for (std::size_t i = 0; i < n_; ++i)
      std::sort(incidences_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                incidences_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]),
                [](const Incidence& a, const Incidence& b) { return a.neighbor < b.neighbor; });
  }

  std::size_t n_ = 0;
  double beta_ = 1.0;
  std::vector<Edge> edges_;
  std::vector<double> q_;
  std::vector<std::size_t> offsets_;
  std::vector<Incidence> incidences_;
};

/// Component label per node (labels are 0..count-1 in order of first node).
struct Components {
  std::vector<std::size_t> label;
  std::size_t count = 0;
};

inline Components connected_components(const Graph& g) {
  constexpr auto unset = static_cast<std::size_t>(-1);
  Components out{std::vector<std::size_t>(g.num_nodes(), unset), 0};
  std::vector<NodeId> stack;
  for (NodeId start = 0; start < g.num_nodes(); ++start) {
    if (out.label[start] != unset) continue;
    out.label[start] = out.count;
    stack.push_back(start);
    while (!stack.empty()) {
      const NodeId i = stack.back();
      stack.pop_back();
      for (const auto& inc : g.incident(i)) {
        if (out.label[inc.neighbor] == unset) {
          out.label[inc.neighbor] = out.count;
          stack.push_back(inc.neighbor);
        }
      }
    }
    ++out.count;
  }
  return out;
}

inline bool is_connected(const Graph& g) { return connected_components(g).count == 1; }

/// L with L_ii = sum_j Q_ij and L_ij = -Q_ij; the matrix of sum_{ij in E} Q_ij (x_i - x_j)^2.
inline Eigen::SparseMatrix<double> weighted_laplacian(const Graph& g) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(4 * g.num_edges());
  const auto edges = g.edges();
  const auto q = g.couplings();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto u = static_cast<Eigen::Index>(edges[e].u);
    const auto v = static_cast<Eigen::Index>(edges[e].v);
    t.emplace_back(u, u, q[e]);
    t.emplace_back(v, v, q[e]);
    t.emplace_back(u, v, -q[e]);
    t.emplace_back(v, u, -q[e]);
  }
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Eigen::SparseMatrix<double> l(n, n);
  l.setFromTriplets(t.begin(), t.end());
  return l;
}

}  // namespace cprop
