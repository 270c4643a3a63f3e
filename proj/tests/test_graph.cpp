#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <set>
#include <sstream>

#include "cprop/generators.hpp"
#include "cprop/graph.hpp"
#include "cprop/graph_io.hpp"
#include "cprop/rng.hpp"
#include "helpers.hpp"

using namespace cprop;
using cprop::testing::path_graph;
using cprop::testing::triangle;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
}

TEST(Rng, UniformRanges) {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const double v = r.uniform_open();
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Rng, DerivedSeedsDiffer) {
  std::set<std::uint64_t> seen;
  for (auto s : {Stream::graph, Stream::couplings, Stream::values, Stream::perturbation, Stream::power_start})
    for (std::uint64_t i = 0; i < 10; ++i) seen.insert(derive_seed(7, s, i));
  EXPECT_EQ(seen.size(), 50u);
  EXPECT_EQ(derive_seed(7, Stream::graph, 3), derive_seed(7, Stream::graph, 3));
}

TEST(Graph, CanonicalizesEdges) {
  Graph g(4, {{2, 1}, {0, 3}, {1, 0}}, {3.0, 1.0, 2.0}, 10.0);
  ASSERT_EQ(g.num_edges(), 3u);
  EXPECT_EQ(g.edges()[0], (Edge{0, 1}));
  EXPECT_EQ(g.edges()[1], (Edge{0, 3}));
  EXPECT_EQ(g.edges()[2], (Edge{1, 2}));
  EXPECT_DOUBLE_EQ(g.couplings()[0], 2.0);
  EXPECT_DOUBLE_EQ(g.couplings()[1], 1.0);
  EXPECT_DOUBLE_EQ(g.couplings()[2], 3.0);
  EXPECT_EQ(g.num_directed(), 6u);
}

TEST(Graph, DirectedIndexing) {
  const Graph g = triangle();
  for (std::size_t d = 0; d < g.num_directed(); ++d) {
    EXPECT_EQ(g.source(Graph::reverse(d)), g.target(d));
    EXPECT_EQ(g.target(Graph::reverse(d)), g.source(d));
    EXPECT_EQ(g.directed_index(g.source(d), g.target(d)), d);
  }
  EXPECT_FALSE(g.directed_index(0, 0).has_value());
  for (NodeId i = 0; i < 3; ++i) {
    EXPECT_EQ(g.degree(i), 2u);
    for (const auto& inc : g.incident(i)) {
      EXPECT_EQ(g.source(inc.out), i);
      EXPECT_EQ(g.target(inc.in), i);
      EXPECT_EQ(inc.in, Graph::reverse(inc.out));
    }
  }
}

TEST(Graph, RejectsBadInput) {
  EXPECT_THROW(Graph(0, {}, {}, 1.0), ConfigError);
  EXPECT_THROW(Graph(2, {{0, 0}}, {1.0}, 1.0), ConfigError);
  EXPECT_THROW(Graph(2, {{0, 2}}, {1.0}, 1.0), ConfigError);
  EXPECT_THROW(Graph(3, {{0, 1}, {1, 0}}, {1.0, 1.0}, 1.0), ConfigError);
  EXPECT_THROW(Graph(2, {{0, 1}}, {0.0}, 1.0), ConfigError);
  EXPECT_THROW(Graph(2, {{0, 1}}, {-1.0}, 1.0), ConfigError);
  EXPECT_THROW(Graph(2, {{0, 1}}, {1.0}, 0.0), ConfigError);
  EXPECT_THROW(Graph(2, {{0, 1}}, {1.0, 2.0}, 1.0), ConfigError);
}

TEST(Graph, Components) {
  Graph g(5, {{0, 1}, {3, 4}}, {1.0, 1.0}, 1.0);
  const auto c = connected_components(g);
  EXPECT_EQ(c.count, 3u);
  EXPECT_EQ(c.label[0], c.label[1]);
  EXPECT_EQ(c.label[3], c.label[4]);
  EXPECT_NE(c.label[0], c.label[2]);
  EXPECT_FALSE(is_connected(g));
  EXPECT_TRUE(is_connected(path_graph(6)));
}

TEST(Graph, LaplacianOfTriangle) {
  const Eigen::MatrixXd l(weighted_laplacian(triangle(2.0)));
  EXPECT_DOUBLE_EQ(l(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(l(0, 1), -2.0);
  EXPECT_NEAR(l.rowwise().sum().cwiseAbs().maxCoeff(), 0.0, 1e-15);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
  EXPECT_NEAR(es.eigenvalues()[0], 0.0, 1e-12);
  EXPECT_NEAR(es.eigenvalues()[1], 6.0, 1e-12);
  EXPECT_NEAR(es.eigenvalues()[2], 6.0, 1e-12);
}

TEST(ErdosRenyi, Deterministic) {
  const auto a = generate_erdos_renyi(200, 8, 11);
  const auto b = generate_erdos_renyi(200, 8, 11);
  const auto c = generate_erdos_renyi(200, 8, 12);
  EXPECT_TRUE(a.graph == b.graph);
  EXPECT_FALSE(a.graph == c.graph);
}

TEST(ErdosRenyi, MeanDegreeNearTarget) {
  double sum = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) sum += generate_erdos_renyi(1000, 8, s).realized_mean_degree;
  EXPECT_NEAR(sum / 20.0, 8.0 * 999.0 / 1000.0, 0.1);
}

TEST(ErdosRenyi, CompleteAndRejected) {
  const auto full = generate_erdos_renyi(2, 2, 1);
  EXPECT_EQ(full.graph.num_edges(), 1u);
  EXPECT_EQ(generate_erdos_renyi(10, 10, 1).graph.num_edges(), 45u);
  EXPECT_THROW(generate_erdos_renyi(20, 25, 1), ConfigError);
  EXPECT_THROW(generate_erdos_renyi(20, 0, 1), ConfigError);
  EXPECT_THROW(generate_erdos_renyi(1, 0.5, 1), ConfigError);
}

TEST(ErdosRenyi, RequireConnected) {
  ErdosRenyiOptions opts;
  opts.require_connected = true;
  for (std::uint64_t s = 0; s < 10; ++s) EXPECT_TRUE(is_connected(generate_erdos_renyi(30, 4, s, opts).graph));
  opts.max_attempts = 3;
  EXPECT_THROW(generate_erdos_renyi(200, 0.5, 1, opts), ConfigError);
}

TEST(Couplings, InRangeAndDeterministic) {
  const auto g = generate_erdos_renyi(50, 8, 3).graph;
  const auto a = assign_couplings(g, 0.5, 2.0, 9);
  const auto b = assign_couplings(g, 0.5, 2.0, 9);
  EXPECT_TRUE(a == b);
  for (double q : a.couplings()) {
    EXPECT_GE(q, 0.5);
    EXPECT_LT(q, 2.0);
  }
  const auto flat = assign_couplings(g, 1.5, 1.5, 9);
  for (double q : flat.couplings()) EXPECT_EQ(q, 1.5);
  EXPECT_THROW(assign_couplings(g, 0.0, 1.0, 1), ConfigError);
  EXPECT_THROW(assign_couplings(g, 2.0, 1.0, 1), ConfigError);
}

TEST(GraphIo, RoundTripIsExact) {
  const auto g = cprop::testing::random_graph(40, 6, 100.0, 5);
  std::stringstream s;
  save_graph(s, g);
  const std::string first = s.str();
  const Graph back = load_graph(s);
  EXPECT_TRUE(back == g);
  std::stringstream again;
  save_graph(again, back);
  EXPECT_EQ(again.str(), first);
}

TEST(GraphIo, CommentsAndBlankLines) {
  std::istringstream in("# header comment\n\n3 2 10\n0 1 1.5\n# mid\n2 1 0.5\n");
  const Graph g = load_graph(in);
  EXPECT_EQ(g.num_edges(), 2u);
  EXPECT_EQ(g.edges()[1], (Edge{1, 2}));
  EXPECT_DOUBLE_EQ(g.beta(), 10.0);
}

namespace {
std::size_t error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    load_graph(in);
  } catch (const FormatError& e) {
    return e.line();
  }
  return 0;
}
}  // namespace

TEST(GraphIo, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("3 2\n"), 1u);
  EXPECT_EQ(error_line("3 2 1\n0 1 1\n0 5 1\n"), 3u);
  EXPECT_EQ(error_line("3 2 1\n0 1 1\n1 1 1\n"), 3u);
  EXPECT_EQ(error_line("3 2 1\n0 1 1\n1 2 -1\n"), 3u);
  EXPECT_EQ(error_line("3 2 1\n0 1 1\n1 2\n"), 3u);
  EXPECT_EQ(error_line("3 2 1\n0 1 1\n1 0 2\n"), 3u);
  EXPECT_EQ(error_line("3 2 1\n0 1 1\n"), 2u);
  EXPECT_EQ(error_line("3 1 1\n0 1 1\n1 2 1\n"), 3u);
  EXPECT_EQ(error_line("3 1 x\n0 1 1\n"), 1u);
}

TEST(ValuesIo, RoundTripAndErrors) {
  Eigen::VectorXd y(3);
  y << 0.1, -2.5, 1e-300;
  std::stringstream s;
  save_values(s, y);
  EXPECT_EQ(load_values(s, 3), y);
  std::istringstream dup("0 1\n0 2\n1 3\n");
  EXPECT_THROW(load_values(dup, 2), FormatError);
  std::istringstream missing("0 1\n");
  EXPECT_THROW(load_values(missing, 2), FormatError);
  std::istringstream range("0 1\n2 1\n");
  EXPECT_THROW(load_values(range, 2), FormatError);
  std::istringstream nan("0 nan\n1 1\n");
  EXPECT_THROW(load_values(nan, 2), FormatError);
}
