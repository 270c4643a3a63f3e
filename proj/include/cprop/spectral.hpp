#pragma once

// Eigenvalue tools for the linearized operators: dense nonsymmetric spectra for
// small instances, power iteration for large ones, mu-subspace projections and
// empirical contraction ratios of error histories.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cprop/error.hpp"
#include "cprop/graph_io.hpp"
#include "cprop/linearize.hpp"
#include "cprop/rng.hpp"

namespace cprop {

struct PowerOptions {
  double tol = 1e-12;            // relative change of the modulus estimate between sweeps
  std::size_t max_iter = 100'000;
  std::uint64_t seed = 1;
  double residual_tol = 1e-6;    // |A v - theta v| / |A v| accepted at the end
};

struct PowerResult {
  double modulus = 0.0;     // dominant |lambda|
  double eigenvalue = 0.0;  // signed Rayleigh quotient v^T A v
  Eigen::VectorXd vector;   // unit norm
  std::size_t iterations = 0;
  double change = 0.0;      // last relative change of the modulus
  double residual = 0.0;
  bool converged = false;
};

/// Power iteration for an operator called as apply(x, out). The start vector
/// has i.i.d. U(0, 1] entries, which overlaps the Perron vector of any
/// nonnegative operator. A dominant complex pair shows up as a large final
/// residual and is reported as not converged.
template <class Apply>
PowerResult power_iteration(Apply&& apply, std::size_t dim, const PowerOptions& opts = {}) {
  if (dim == 0) throw ConfigError("power iteration needs dim >= 1");
  if (!(opts.tol > 0.0)) throw ConfigError("power iteration tolerance must be positive");
  Rng rng(derive_seed(opts.seed, Stream::power_start));
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = rng.uniform_open();
  v.normalize();
  Eigen::VectorXd w(v.size());

  PowerResult out;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (out.iterations = 1; out.iterations <= opts.max_iter; ++out.iterations) {
    apply(v, w);
    const double m = w.norm();
    if (m == 0.0) {
      out.modulus = out.eigenvalue = out.change = out.residual = 0.0;
      out.vector = v;
      out.converged = true;
      return out;
    }
    out.modulus = m;
    out.change = std::isnan(prev) ? 1.0 : std::abs(m - prev) / m;
    v = w / m;
    prev = m;
    if (out.change <= opts.tol) break;
  }
  out.iterations = std::min(out.iterations, opts.max_iter);
  apply(v, w);
  out.eigenvalue = v.dot(w);
  out.modulus = w.norm();
  out.residual = (w - out.eigenvalue * v).norm() / out.modulus;
  out.vector = std::move(v);
  out.converged = out.change <= opts.tol && out.residual <= opts.residual_tol;
  return out;
}

inline PowerResult power_iteration(const SparseMatrix& m, const PowerOptions& opts = {}) {
  if (m.rows() != m.cols()) throw ConfigError("power iteration needs a square matrix");
  return power_iteration([&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = m * x; },
                         static_cast<std::size_t>(m.rows()), opts);
}

struct Eigenpairs {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;  // columns, unit norm
};

/// All eigenpairs of a real nonsymmetric matrix (complex pairs allowed).
inline Eigenpairs dense_spectrum(const Eigen::MatrixXd& m, std::size_t budget = default_dense_budget,
                                 bool with_vectors = true) {
  if (m.rows() != m.cols()) throw ConfigError("dense spectrum needs a square matrix");
  if (static_cast<std::size_t>(m.rows()) > budget)
    throw ConfigError("dense eigensolve of dimension " + std::to_string(m.rows()) + " exceeds the budget of " +
                      std::to_string(budget));
  if (m.rows() == 0) return {};
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, with_vectors);
  if (es.info() != Eigen::Success) throw NumericalError("dense eigensolve did not converge");
  Eigenpairs out{es.eigenvalues(), {}};
  if (with_vectors) {
    out.vectors = es.eigenvectors();
    for (Eigen::Index c = 0; c < out.vectors.cols(); ++c) out.vectors.col(c).normalize();
  }
  return out;
}

inline double dominant_modulus_dense(const Eigen::MatrixXd& m, std::size_t budget = default_dense_budget) {
  const auto pairs = dense_spectrum(m, budget, false);
  return pairs.values.size() ? pairs.values.cwiseAbs().maxCoeff() : 0.0;
}

/// Euclidean length of the mu block (the first mu_dim coordinates) of the
/// normalized vector, using component moduli.
inline double mu_subspace_projection(const Eigen::VectorXcd& v, std::size_t mu_dim) {
  const double total = v.norm();
  if (total == 0.0) throw ConfigError("projection of a zero vector is undefined");
  if (mu_dim > static_cast<std::size_t>(v.size())) throw ConfigError("mu block longer than the vector");
  return v.head(static_cast<Eigen::Index>(mu_dim)).norm() / total;
}

enum class SpectralMethod { dense, power };

struct SpectralReport {
  SpectralMethod method = SpectralMethod::dense;
  std::vector<std::complex<double>> eigenvalues;  // by decreasing modulus (dense), or the dominant one
  std::vector<double> projections;                // mu-subspace projection per eigenvalue
  double residual = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
  bool has_complex = false;
};

/// Dense report of a square matrix. Projections are taken onto the first
/// mu_dim coordinates; pass mu_dim == rows for a block that lives in mu space.
inline SpectralReport dense_report(const Eigen::MatrixXd& m, std::size_t mu_dim,
                                   std::size_t budget = default_dense_budget) {
  const auto pairs = dense_spectrum(m, budget, true);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(pairs.values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return std::abs(pairs.values[a]) > std::abs(pairs.values[b]);
  });
  SpectralReport r;
  r.method = SpectralMethod::dense;
  for (auto idx : order) {
    r.eigenvalues.push_back(pairs.values[idx]);
    r.projections.push_back(mu_subspace_projection(pairs.vectors.col(idx), mu_dim));
    if (pairs.values[idx].imag() != 0.0) r.has_complex = true;
  }
  if (m.rows() > 0) {
    const Eigen::MatrixXcd mc = m.cast<std::complex<double>>();
    r.residual = ((mc * pairs.vectors) - pairs.vectors * pairs.values.asDiagonal()).norm() / std::max(1.0, m.norm());
  }
  return r;
}

inline SpectralReport power_report(const PowerResult& p) {
  SpectralReport r;
  r.method = SpectralMethod::power;
  r.eigenvalues = {std::complex<double>(p.eigenvalue, 0.0)};
  r.projections = {1.0};
  r.residual = p.residual;
  r.iterations = p.iterations;
  r.converged = p.converged;
  return r;
}

/// Dense: `index,re,im,modulus,mu_projection` rows. Power: one summary line.
inline void write_spectral_csv(std::ostream& out, const SpectralReport& r) {
  if (r.method == SpectralMethod::dense) {
    out << "index,re,im,modulus,mu_projection\n";
    for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
      const auto ev = r.eigenvalues[i];
      out << i << ',' << format_real(ev.real()) << ',' << format_real(ev.imag()) << ','
          << format_real(std::abs(ev)) << ',' << format_real(r.projections[i]) << '\n';
    }
  } else {
    out << "method,modulus,eigenvalue,iterations,residual,converged\n";
    out << "power," << format_real(std::abs(r.eigenvalues.front())) << ',' << format_real(r.eigenvalues.front().real())
        << ',' << r.iterations << ',' << format_real(r.residual) << ',' << (r.converged ? 1 : 0) << '\n';
  }
}

// Empirical contraction ratio of an error history.

struct TransientPolicy {
  std::size_t stable_run = 20;   // consecutive ratios that must agree ...
  double max_spread = 0.01;      // ... to within this relative spread
  std::size_t min_points = 50;   // ratios required after the transient
  std::size_t window = 0;        // ratios averaged after the transient; 0 = all above the floor
  double floor_factor = 1e2;     // errors <= floor_factor * eps * error_scale are discarded
  double error_scale = 0.0;      // 0 = the first error
};

struct ConvergenceRatio {
  double q = 0.0;
  std::size_t first = 0;  // window is ratios [first, last)
  std::size_t last = 0;
  std::vector<double> per_step_ratios;
};

/// q = geometric mean of e_{n+1}/e_n over the window that follows the first
/// run of `stable_run` ratios agreeing within `max_spread`.
inline ConvergenceRatio convergence_ratio(std::span<const double> errors, const TransientPolicy& policy = {}) {
  if (errors.empty()) throw NumericalError("empty error history");
  const double scale = policy.error_scale > 0.0 ? policy.error_scale : errors.front();
  const double floor = policy.floor_factor * std::numeric_limits<double>::epsilon() * scale;
  std::size_t valid = 0;
  while (valid < errors.size() && std::isfinite(errors[valid]) && errors[valid] > floor) ++valid;

  ConvergenceRatio out;
  for (std::size_t n = 0; n + 1 < valid; ++n) out.per_step_ratios.push_back(errors[n + 1] / errors[n]);
  const auto& r = out.per_step_ratios;
  const std::size_t run = std::max<std::size_t>(policy.stable_run, 1);

  std::size_t start = static_cast<std::size_t>(-1);
  for (std::size_t t = 0; t + run <= r.size(); ++t) {
    const auto [lo, hi] = std::minmax_element(r.begin() + static_cast<std::ptrdiff_t>(t),
                                              r.begin() + static_cast<std::ptrdiff_t>(t + run));
    if (*lo > 0.0 && (*hi - *lo) / *lo < policy.max_spread) {
      start = t + run;
      break;
    }
  }
  if (start == static_cast<std::size_t>(-1))
    throw NumericalError("no stable decay found before the error reached the numerical floor");
  std::size_t end = r.size();
  if (policy.window > 0) end = std::min(end, start + policy.window);
  if (end < start + policy.min_points)
    throw NumericalError("only " + std::to_string(end - start) + " post-transient ratios above the floor, need " +
                         std::to_string(policy.min_points));
  double log_sum = 0.0;
  for (std::size_t n = start; n < end; ++n) log_sum += std::log(r[n]);
  out.q = std::exp(log_sum / static_cast<double>(end - start));
  out.first = start;
  out.last = end;
  return out;
}

}  // namespace cprop
