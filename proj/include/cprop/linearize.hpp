#pragma once

// Linearization of one Consensus Propagation round around a fixed point.
//
// State vectors are ordered mu first, then K (each block of length 2|E|), so
// the Jacobian has the block form
//
//   R' = [ A  C ]     A = d mu'/d mu,  C = d mu'/d K
//        [ 0  B ]     B = d K'/d K,    d K'/d mu = 0
//
// For an outgoing edge i -> j and each in-neighbor message k -> i, k != j:
//
//   A[(i->j),(k->i)] = K_ki / S_ij
//   B[(i->j),(k->i)] = 1 / (1 + S_ij / (beta Q_ij))^2
//   C[(i->j),(k->i)] = (mu_ki - mu'_ij) / S_ij
//
// where mu'_ij is the updated mu message (equal to mu_ij at a fixed point).
// No other entries are nonzero.

#include <Eigen/Core>
#include <Eigen/Sparse>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cprop/consensus.hpp"
#include "cprop/error.hpp"
#include "cprop/graph.hpp"

namespace cprop {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Largest matrix dimension any dense conversion or dense eigensolve accepts.
inline constexpr std::size_t default_dense_budget = 4000;

struct JacobianBlocks {
  SparseMatrix a;
  SparseMatrix b;
  SparseMatrix c;
};

namespace detail {

// Visits every (row = i->j, col = k->i) pair of the message-locality pattern.
template <class Fn>
void for_each_coupling(const Graph& g, Fn&& fn) {
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    const auto inc = g.incident(i);
    for (const auto& out : inc)
      for (const auto& in : inc)
        if (in.neighbor != out.neighbor) fn(i, out.out, in.in);
  }
}

inline std::size_t coupling_count(const Graph& g) {
  std::size_t nnz = 0;
  for (NodeId i = 0; i < g.num_nodes(); ++i) nnz += g.degree(i) * (g.degree(i) ? g.degree(i) - 1 : 0);
  return nnz;
}

inline SparseMatrix from_triplets(std::size_t dim, std::vector<Eigen::Triplet<double>>& t) {
  SparseMatrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

}  // namespace detail

/// Block A, the kernel of the linear averaging process once K has converged.
inline SparseMatrix averaging_kernel(const Graph& g, const Eigen::VectorXd& k) {
  detail::check_sizes(g, k.size(), k.size());
  const Eigen::VectorXd s = cavity_precision(g, k);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(detail::coupling_count(g));
  detail::for_each_coupling(g, [&](NodeId, std::size_t row, std::size_t col) {
    t.emplace_back(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col),
                   k[static_cast<Eigen::Index>(col)] / s[static_cast<Eigen::Index>(row)]);
  });
  return detail::from_triplets(g.num_directed(), t);
}

/// Block B, the K-to-K part.
inline SparseMatrix topology_kernel(const Graph& g, const Eigen::VectorXd& k) {
  detail::check_sizes(g, k.size(), k.size());
  const Eigen::VectorXd s = cavity_precision(g, k);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(detail::coupling_count(g));
  detail::for_each_coupling(g, [&](NodeId, std::size_t row, std::size_t col) {
    const auto r = static_cast<Eigen::Index>(row);
    const double damp = 1.0 + s[r] / (g.beta() * g.coupling_of(row));
    t.emplace_back(r, static_cast<Eigen::Index>(col), 1.0 / (damp * damp));
  });
  return detail::from_triplets(g.num_directed(), t);
}

/// Block C, the action of K perturbations on the mu update.
inline SparseMatrix coupling_block(const Graph& g, const MessageState& state, const Eigen::VectorXd& y) {
  detail::check_sizes(g, state.k.size(), state.mu.size());
  detail::check_values(g, y);
  const Eigen::VectorXd s = cavity_precision(g, state.k);
  const MessageState next = step(g, state, y);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(detail::coupling_count(g));
  detail::for_each_coupling(g, [&](NodeId, std::size_t row, std::size_t col) {
    const auto r = static_cast<Eigen::Index>(row);
    const auto c = static_cast<Eigen::Index>(col);
    t.emplace_back(r, c, (state.mu[c] - next.mu[r]) / s[r]);
  });
  return detail::from_triplets(g.num_directed(), t);
}

/// Analytic blocks at a converged fixed point.
inline JacobianBlocks jacobian_blocks(const Graph& g, const FixedPoint& fp, const Eigen::VectorXd& y) {
  if (!fp.converged) throw ConfigError("jacobian_blocks needs a converged fixed point");
  return {averaging_kernel(g, fp.state.k), topology_kernel(g, fp.state.k), coupling_block(g, fp.state, y)};
}

/// [[A, C], [0, B]] as one sparse matrix, mu coordinates first.
inline SparseMatrix assemble_jacobian(const JacobianBlocks& blocks) {
  const Eigen::Index d = blocks.a.rows();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(blocks.a.nonZeros() + blocks.b.nonZeros() + blocks.c.nonZeros()));
  auto append = [&](const SparseMatrix& m, Eigen::Index r0, Eigen::Index c0) {
    for (Eigen::Index r = 0; r < m.outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(m, r); it; ++it) t.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
  };
  append(blocks.a, 0, 0);
  append(blocks.c, 0, d);
  append(blocks.b, d, d);
  SparseMatrix r(2 * d, 2 * d);
  r.setFromTriplets(t.begin(), t.end());
  r.makeCompressed();
  return r;
}

inline Eigen::MatrixXd to_dense(const SparseMatrix& m, std::size_t budget = default_dense_budget) {
  if (static_cast<std::size_t>(m.rows()) > budget)
    throw ConfigError("dense conversion of a " + std::to_string(m.rows()) + "-dimensional matrix exceeds the budget of " +
                      std::to_string(budget));
  return Eigen::MatrixXd(m);
}

/// Central-difference Jacobian of one full round at `state`, in the
/// [mu, K] ordering. Column j uses the step h * max(1, |z_j|); the round itself
/// is evaluated in long double so cancellation stays well below h^2 truncation.
inline Eigen::MatrixXd finite_diff_jacobian(const Graph& g, const MessageState& state, const Eigen::VectorXd& y,
                                            double h = 1e-6, std::size_t budget = default_dense_budget) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  detail::check_sizes(g, state.k.size(), state.mu.size());
  detail::check_values(g, y);
  const std::size_t d = g.num_directed();
  if (2 * d > budget) throw ConfigError("finite-difference Jacobian exceeds the dense budget");

  using Ld = long double;
  std::vector<Ld> z(2 * d);
  for (std::size_t e = 0; e < d; ++e) {
    z[e] = state.mu[static_cast<Eigen::Index>(e)];
    z[d + e] = state.k[static_cast<Eigen::Index>(e)];
  }
  std::vector<Ld> yl(y.data(), y.data() + y.size());
  std::vector<Ld> plus(2 * d), minus(2 * d);

  auto eval = [&](std::vector<Ld>& at, std::vector<Ld>& out) {
    std::span<const Ld> mu(at.data(), d), k(at.data() + d, d);
    step_messages<Ld>(g, k, mu, yl, std::span<Ld>(out.data() + d, d), std::span<Ld>(out.data(), d));
  };

  Eigen::MatrixXd jac(static_cast<Eigen::Index>(2 * d), static_cast<Eigen::Index>(2 * d));
  for (std::size_t col = 0; col < 2 * d; ++col) {
    const Ld orig = z[col];
    const Ld step_size = static_cast<Ld>(h) * std::max<Ld>(1, std::fabs(orig));
    z[col] = orig + step_size;
    eval(z, plus);
    z[col] = orig - step_size;
    eval(z, minus);
    z[col] = orig;
    for (std::size_t row = 0; row < 2 * d; ++row)
      jac(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
          static_cast<double>((plus[row] - minus[row]) / (2 * step_size));
  }
  return jac;
}

/// The dynamic-data process mu <- offset + kernel mu, valid once K has converged.
struct AffineAveraging {
  SparseMatrix kernel;     // block A
  Eigen::VectorXd offset;  // y_i / S_ij
  double residual = 0.0;   // |mu* - offset - kernel mu*|_inf
};

inline Eigen::VectorXd affine_offset(const Graph& g, const Eigen::VectorXd& k, const Eigen::VectorXd& y) {
  detail::check_values(g, y);
  const Eigen::VectorXd s = cavity_precision(g, k);
  Eigen::VectorXd b(s.size());
  for (std::size_t d = 0; d < g.num_directed(); ++d)
    b[static_cast<Eigen::Index>(d)] = y[g.source(d)] / s[static_cast<Eigen::Index>(d)];
  return b;
}

inline AffineAveraging affine_averaging(const Graph& g, const FixedPoint& fp, const Eigen::VectorXd& y,
                                        double max_residual = 1e-8) {
  if (!fp.converged) throw ConfigError("affine_averaging needs a converged fixed point");
  AffineAveraging out{averaging_kernel(g, fp.state.k), affine_offset(g, fp.state.k, y), 0.0};
  out.residual = fp.state.mu.size()
                     ? (fp.state.mu - out.offset - out.kernel * fp.state.mu).lpNorm<Eigen::Infinity>()
                     : 0.0;
  if (out.residual > max_residual)
    throw NumericalError("fixed point does not satisfy mu = b + A mu (residual " + std::to_string(out.residual) +
                         "); it is stale for these values");
  return out;
}

/// Matrix-free y = A x using per-node sums; O(|E|) memory and time.
class AveragingOperator {
public:
  AveragingOperator(const Graph& g, Eigen::VectorXd k) : g_(&g), k_(std::move(k)), s_(cavity_precision(g, k_)) {}

  std::size_t dim() const noexcept { return static_cast<std::size_t>(k_.size()); }

  void operator()(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    out.resize(x.size());
    for (NodeId i = 0; i < g_->num_nodes(); ++i) {
      const auto inc = g_->incident(i);
      double sum = 0.0;
      for (const auto& a : inc) sum += k_[idx(a.in)] * x[idx(a.in)];
      for (const auto& a : inc) out[idx(a.out)] = (sum - k_[idx(a.in)] * x[idx(a.in)]) / s_[idx(a.out)];
    }
  }

private:
  static Eigen::Index idx(std::size_t d) { return static_cast<Eigen::Index>(d); }
  const Graph* g_;
  Eigen::VectorXd k_;
  Eigen::VectorXd s_;
};

/// Matrix-free y = B x.
class TopologyOperator {
public:
  TopologyOperator(const Graph& g, const Eigen::VectorXd& k) : g_(&g), w_(cavity_precision(g, k)) {
    for (std::size_t d = 0; d < g.num_directed(); ++d) {
      const double damp = 1.0 + w_[static_cast<Eigen::Index>(d)] / (g.beta() * g.coupling_of(d));
      w_[static_cast<Eigen::Index>(d)] = 1.0 / (damp * damp);
    }
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(w_.size()); }

  void operator()(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    out.resize(x.size());
    for (NodeId i = 0; i < g_->num_nodes(); ++i) {
      const auto inc = g_->incident(i);
      double sum = 0.0;
      for (const auto& a : inc) sum += x[static_cast<Eigen::Index>(a.in)];
      for (const auto& a : inc) {
        const auto o = static_cast<Eigen::Index>(a.out);
        out[o] = w_[o] * (sum - x[static_cast<Eigen::Index>(a.in)]);
      }
    }
  }

private:
  const Graph* g_;
  Eigen::VectorXd w_;
};

/// Sparse triplet dump: header `# block=<name> dim=<rows> nnz=<count>` then `row col value`.
inline void write_triplets(std::ostream& out, const SparseMatrix& m, const std::string& name) {
  out << "# block=" << name << " dim=" << m.rows() << " nnz=" << m.nonZeros() << '\n';
  char buf[64];
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), it.value());
      (void)ec;
      out << it.row() << ' ' << it.col() << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf)) << '\n';
    }
  }
}

}  // namespace cprop
