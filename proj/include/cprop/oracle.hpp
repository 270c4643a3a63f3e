#pragma once

// Exact modes of the Gauss-Markov model
//   p(x) ~ exp(-|x - y|^2 - beta sum_{ij in E} Q_ij (x_i - x_j)^2),
// i.e. the solution of (I + beta L_Q) x = y. Gaussian BP beliefs at a fixed
// point must reproduce these.

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include "cprop/consensus.hpp"
#include "cprop/error.hpp"
#include "cprop/graph.hpp"

namespace cprop {

struct ModeSolution {
  Eigen::VectorXd x;
  double relative_residual = 0.0;  // |y - (I + beta L) x| / |y|
};

inline Eigen::SparseMatrix<double> mode_system(const Graph& g) {
  Eigen::SparseMatrix<double> m = g.beta() * weighted_laplacian(g);
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.coeffRef(i, i) += 1.0;
  m.makeCompressed();
  return m;
}

/// Sparse LDL^T with a few rounds of iterative refinement.
inline ModeSolution exact_marginal_modes(const Graph& g, const Eigen::VectorXd& y, int refinements = 3) {
  detail::check_values(g, y);
  const auto m = mode_system(g);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(m);
  if (ldlt.info() != Eigen::Success) throw NumericalError("factorization of I + beta L failed");
  ModeSolution out;
  out.x = ldlt.solve(y);
  for (int r = 0; r < refinements; ++r) {
    const Eigen::VectorXd res = y - m * out.x;
    out.x += ldlt.solve(res);
  }
  const double ny = y.norm();
  out.relative_residual = (y - m * out.x).norm() / (ny > 0.0 ? ny : 1.0);
  return out;
}

}  // namespace cprop
