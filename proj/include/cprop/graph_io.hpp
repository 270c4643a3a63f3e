#pragma once

// Plain-text graph and node-value files.
//
// Graph file:
//   N M beta
//   i j Q        (M lines, 0-based ids, i < j)
// Node-values file:
//   i y_i        (N lines, each node exactly once)
//
// Reals are written in shortest round-trip form, so load(save(g)) == g
// bit for bit. Blank lines and lines starting with '#' are ignored.

#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "cprop/error.hpp"
#include "cprop/graph.hpp"

namespace cprop {

/// Shortest decimal string that parses back to exactly `x`.
inline std::string format_real(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc{}) throw Error("cannot format real");
  return std::string(buf, end);
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    const std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t' && line[pos] != '\r') ++pos;
    if (pos > start) out.push_back(line.substr(start, pos - start));
  }
  return out;
}

inline bool skippable(std::string_view line) {
  const auto f = split_fields(line);
  return f.empty() || f.front().front() == '#';
}

template <class T>
T parse_field(std::string_view field, const std::string& source, std::size_t line, const char* what) {
  T value{};
  auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || end != field.data() + field.size())
    throw FormatError(source, line, std::string("cannot parse ") + what + " '" + std::string(field) + "'");
  return value;
}

/// Reads the next non-comment line; false at end of input.
inline bool next_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (!skippable(line)) return true;
  }
  return false;
}

}  // namespace detail

inline void save_graph(std::ostream& out, const Graph& g) {
  out << g.num_nodes() << ' ' << g.num_edges() << ' ' << format_real(g.beta()) << '\n';
  const auto edges = g.edges();
  const auto q = g.couplings();
  for (std::size_t e = 0; e < edges.size(); ++e)
    out << edges[e].u << ' ' << edges[e].v << ' ' << format_real(q[e]) << '\n';
}

inline void save_graph(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save_graph(out, g);
  if (!out) throw Error("write to '" + path + "' failed");
}

inline Graph load_graph(std::istream& in, const std::string& source = "<graph>") {
  using detail::parse_field;
  std::string line;
  std::size_t line_no = 0;
  if (!detail::next_line(in, line, line_no)) throw FormatError(source, line_no + 1, "missing header 'N M beta'");
  auto head = detail::split_fields(line);
  if (head.size() != 3) throw FormatError(source, line_no, "header must be 'N M beta'");
  const auto n = parse_field<std::uint64_t>(head[0], source, line_no, "node count");
  const auto m = parse_field<std::uint64_t>(head[1], source, line_no, "edge count");
  const auto beta = parse_field<double>(head[2], source, line_no, "beta");
  if (n == 0) throw FormatError(source, line_no, "node count must be positive");
  if (!(std::isfinite(beta) && beta > 0.0)) throw FormatError(source, line_no, "beta must be positive and finite");

  std::vector<Edge> edges;
  std::vector<double> q;
  std::vector<std::size_t> lines;
  edges.reserve(m);
  q.reserve(m);
  while (detail::next_line(in, line, line_no)) {
    auto f = detail::split_fields(line);
    if (f.size() != 3) throw FormatError(source, line_no, "edge line must be 'i j Q'");
    if (edges.size() == m) throw FormatError(source, line_no, "more edge lines than the declared " + std::to_string(m));
    const auto i = parse_field<std::uint64_t>(f[0], source, line_no, "node id");
    const auto j = parse_field<std::uint64_t>(f[1], source, line_no, "node id");
    const auto qij = parse_field<double>(f[2], source, line_no, "coupling");
    if (i >= n || j >= n)
      throw FormatError(source, line_no, "endpoint out of range [0, " + std::to_string(n) + ")");
    if (i == j) throw FormatError(source, line_no, "self-loop at node " + std::to_string(i));
    if (!(std::isfinite(qij) && qij > 0.0)) throw FormatError(source, line_no, "coupling must be positive and finite");
    edges.push_back({static_cast<NodeId>(std::min(i, j)), static_cast<NodeId>(std::max(i, j))});
    q.push_back(qij);
    lines.push_back(line_no);
  }
  if (edges.size() != m)
    throw FormatError(source, line_no, "expected " + std::to_string(m) + " edges, found " + std::to_string(edges.size()));

  // Duplicates are reported against the later of the two lines.
  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return edges[a] < edges[b]; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (edges[order[k]] == edges[order[k - 1]]) {
      const auto later = std::max(lines[order[k]], lines[order[k - 1]]);
      const auto earlier = std::min(lines[order[k]], lines[order[k - 1]]);
      throw FormatError(source, later,
                        "duplicate edge {" + std::to_string(edges[order[k]].u) + "," +
                            std::to_string(edges[order[k]].v) + "} (first seen on line " + std::to_string(earlier) + ")");
    }
  }
  return Graph(n, std::move(edges), std::move(q), beta);
}

inline Graph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open graph file '" + path + "'");
  return load_graph(in, path);
}

inline void save_values(std::ostream& out, const Eigen::VectorXd& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i) out << i << ' ' << format_real(y[i]) << '\n';
}

inline void save_values(const std::string& path, const Eigen::VectorXd& y) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save_values(out, y);
}

/// Reads a node-values file for a graph with n nodes.
inline Eigen::VectorXd load_values(std::istream& in, std::size_t n, const std::string& source = "<values>") {
  using detail::parse_field;
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  std::vector<bool> seen(n, false);
  std::string line;
  std::size_t line_no = 0;
  std::size_t count = 0;
  while (detail::next_line(in, line, line_no)) {
    auto f = detail::split_fields(line);
    if (f.size() != 2) throw FormatError(source, line_no, "value line must be 'i y_i'");
    const auto i = parse_field<std::uint64_t>(f[0], source, line_no, "node id");
    const auto v = parse_field<double>(f[1], source, line_no, "value");
    if (i >= n) throw FormatError(source, line_no, "node id out of range [0, " + std::to_string(n) + ")");
    if (seen[i]) throw FormatError(source, line_no, "node " + std::to_string(i) + " listed twice");
    if (!std::isfinite(v)) throw FormatError(source, line_no, "value must be finite");
    seen[i] = true;
    y[static_cast<Eigen::Index>(i)] = v;
    ++count;
  }
  if (count != n)
    throw FormatError(source, line_no, "expected " + std::to_string(n) + " values, found " + std::to_string(count));
  return y;
}

inline Eigen::VectorXd load_values(const std::string& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open values file '" + path + "'");
  return load_values(in, n, path);
}

}  // namespace cprop
