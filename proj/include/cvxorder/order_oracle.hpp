#ifndef CVXORDER_ORDER_ORACLE_HPP
#define CVXORDER_ORDER_ORACLE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cvxorder/detail/simplex.hpp"
#include "cvxorder/errors.hpp"
#include "cvxorder/measure.hpp"
#include "cvxorder/rng.hpp"
#include "cvxorder/transport.hpp"

namespace cvxorder {

// Coupling whose conditional means reproduce the first marginal. The
// residual is max_i ||sum_j pi_ij y_j - mu_i x_i||_inf / mu_i over atoms
// with positive weight.
struct MartingaleCoupling {
  TransportPlan plan;
  double martingale_residual = 0.0;
};

struct OrderDecision {
  bool in_order = false;
  // Total L1 martingale violation at the LP optimum; the certificate value
  // when in_order is false, a numerical-noise bound when it is true.
  double violation = 0.0;
  MartingaleCoupling coupling;
};

// Decides mu ⪯ nu (convex order) on finite supports by minimizing the total
// L1 violation of the martingale constraints sum_j pi_ij y_j = mu_i x_i over
// couplings pi in Pi(mu, nu). The order holds iff some coupling satisfies
// them exactly, so the LP optimum is zero exactly on in-order pairs.
// tol <= 0 selects the default 1e-7 * (1 + diameter).
inline OrderDecision is_convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                     double tol = 0.0) {
  if (mu.dim() != nu.dim()) throw dimension_mismatch("is_convex_order: dimension mismatch");
  const Eigen::Index n = mu.size();
  const Eigen::Index m = nu.size();
  const Eigen::Index d = mu.dim();
  if (tol <= 0.0) tol = 1e-7 * (1.0 + diameter(mu, nu));

  // Columns: pi (n*m), then slack pairs (s+, s-) for each of the n*d
  // martingale rows. Rows: n row sums, m column sums, n*d martingale.
  const Eigen::Index pi_cols = n * m;
  detail::SparseLp lp(n + m + n * d, pi_cols + 2 * n * d);
  for (Eigen::Index i = 0; i < n; ++i) lp.set_rhs(i, mu.weights(i));
  for (Eigen::Index j = 0; j < m; ++j) lp.set_rhs(n + j, nu.weights(j));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k)
      lp.set_rhs(n + m + i * d + k, mu.weights(i) * mu.points(i, k));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index c = i * m + j;
      lp.add_entry(i, c, 1.0);
      lp.add_entry(n + j, c, 1.0);
      for (Eigen::Index k = 0; k < d; ++k) lp.add_entry(n + m + i * d + k, c, nu.points(j, k));
    }
  for (Eigen::Index r = 0; r < n * d; ++r) {
    lp.add_entry(n + m + r, pi_cols + 2 * r, -1.0);
    lp.add_entry(n + m + r, pi_cols + 2 * r + 1, 1.0);
    lp.set_cost(pi_cols + 2 * r, 1.0);
    lp.set_cost(pi_cols + 2 * r + 1, 1.0);
  }

  const detail::LpResult sol = lp.solve();
  if (sol.status != detail::LpStatus::Optimal)
    throw numerical_error("is_convex_order: feasibility LP did not solve");

  OrderDecision out;
  out.violation = std::max(0.0, sol.objective);
  out.in_order = out.violation <= tol;

  Eigen::MatrixXd plan(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) plan(i, j) = sol.x(i * m + j);
  out.coupling.plan.matrix = plan;
  out.coupling.plan.row_marginal = plan.rowwise().sum();
  out.coupling.plan.col_marginal = plan.colwise().sum();
  out.coupling.plan.cost = out.violation;
  double residual = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(mu.weights(i) > 0.0)) continue;
    const Eigen::VectorXd gap =
        nu.points.transpose() * plan.row(i).transpose() - mu.weights(i) * mu.points.row(i).transpose();
    residual = std::max(residual, gap.cwiseAbs().maxCoeff() / mu.weights(i));
  }
  out.coupling.martingale_residual = residual;
  return out;
}

// Equally spaced 1-D grid on [lo, hi] with `points` nodes, endpoints
// included.
struct Grid1D {
  double lo = 0.0;
  double hi = 1.0;
  Eigen::Index points = 2;
};

inline Eigen::VectorXd grid_nodes(const Grid1D& grid) {
  if (grid.points < 2) throw invalid_input("grid needs at least two points");
  if (!(grid.lo < grid.hi) || !std::isfinite(grid.lo) || !std::isfinite(grid.hi))
    throw invalid_input("grid needs finite lo < hi");
  return Eigen::VectorXd::LinSpaced(grid.points, grid.lo, grid.hi);
}

// Grid-restricted forward projection in one dimension: the least W2 cost of
// moving some grid-supported eta with mu ⪯ eta onto nu. Exact as the grid
// refines; an upper bound at any finite resolution. The LP couples mu to eta
// through P (martingale rows) and eta to nu through Q (the transport being
// priced), with eta eliminated by matching P column sums to Q row sums.
//
// The optimal dominating measure can live outside the hull of the data:
// when mu is a point mass it is a translate of nu, displaced by up to the
// data width. Pad the grid by about one data width on each side; covering
// the hull alone is only the hard feasibility floor enforced below.
inline double forward_projection_grid(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                      const Grid1D& grid) {
  if (mu.dim() != 1 || nu.dim() != 1)
    throw invalid_input("forward_projection_grid: measures must be one-dimensional");
  const Eigen::VectorXd nodes = grid_nodes(grid);
  const double lo = std::min(mu.points.minCoeff(), nu.points.minCoeff());
  const double hi = std::max(mu.points.maxCoeff(), nu.points.maxCoeff());
  if (grid.lo > lo || grid.hi < hi)
    throw grid_too_coarse("grid does not cover the supports of both measures");

  const Eigen::Index n = mu.size();
  const Eigen::Index m = nu.size();
  const Eigen::Index g_count = nodes.size();
  // Columns: P (n x G) then Q (G x m). Rows: n P-row-sums, m Q-column-sums,
  // G linking rows (P column sum = Q row sum), n martingale rows.
  const Eigen::Index p_cols = n * g_count;
  detail::SparseLp lp(2 * n + m + g_count, p_cols + g_count * m);
  for (Eigen::Index i = 0; i < n; ++i) lp.set_rhs(i, mu.weights(i));
  for (Eigen::Index j = 0; j < m; ++j) lp.set_rhs(n + j, nu.weights(j));
  for (Eigen::Index i = 0; i < n; ++i)
    lp.set_rhs(n + m + g_count + i, mu.weights(i) * mu.points(i, 0));

  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index g = 0; g < g_count; ++g) {
      const Eigen::Index c = i * g_count + g;
      lp.add_entry(i, c, 1.0);
      lp.add_entry(n + m + g, c, 1.0);
      lp.add_entry(n + m + g_count + i, c, nodes(g));
    }
  for (Eigen::Index g = 0; g < g_count; ++g)
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index c = p_cols + g * m + j;
      lp.add_entry(n + j, c, 1.0);
      lp.add_entry(n + m + g, c, -1.0);
      const double diff = nodes(g) - nu.points(j, 0);
      lp.set_cost(c, diff * diff);
    }

  // Coverage guarantees feasibility: each x_i is a convex combination of
  // its bracketing nodes, so a failure here is numerical, not structural.
  const detail::LpResult sol = lp.solve();
  if (sol.status != detail::LpStatus::Optimal)
    throw numerical_error("forward_projection_grid: LP did not solve");
  return std::sqrt(std::max(0.0, sol.objective));
}

// Piecewise-affine convex function phi(x) = max_k slopes.row(k) . x +
// offsets(k).
struct AffinePieces {
  Eigen::MatrixXd slopes;
  Eigen::VectorXd offsets;
};

inline double integral_max_affine(const DiscreteMeasure& m, const AffinePieces& phi) {
  if (phi.slopes.cols() != m.dim())
    throw dimension_mismatch("integral_max_affine: slope dimension mismatch");
  if (phi.offsets.size() != phi.slopes.rows())
    throw dimension_mismatch("integral_max_affine: offsets do not match slope rows");
  const Eigen::MatrixXd values =
      (m.points * phi.slopes.transpose()).rowwise() + phi.offsets.transpose();
  return (values.rowwise().maxCoeff().array() * m.weights.array()).sum();
}

struct ConvexViolation {
  AffinePieces phi;
  double mu_integral = 0.0;
  double nu_integral = 0.0;
};

struct ConvexCheckReport {
  long trials = 0;
  std::vector<ConvexViolation> violations;
};

// Monte-Carlo disproof search: tries random 5-piece max-affine convex
// functions and records every one whose mu-integral exceeds its nu-integral
// by more than 1e-9. Any hit certifies mu ⋠ nu; a clean report is necessary
// but not sufficient for the order.
inline ConvexCheckReport convex_inequality_check(const DiscreteMeasure& mu,
                                                 const DiscreteMeasure& nu, long trials,
                                                 std::uint64_t seed) {
  if (mu.dim() != nu.dim())
    throw dimension_mismatch("convex_inequality_check: dimension mismatch");
  if (trials < 0) throw invalid_input("convex_inequality_check: negative trial count");
  constexpr Eigen::Index kPieces = 5;
  ConvexCheckReport report;
  report.trials = trials;
  Rng rng(seed);
  for (long t = 0; t < trials; ++t) {
    AffinePieces phi;
    phi.slopes.resize(kPieces, mu.dim());
    phi.offsets.resize(kPieces);
    for (Eigen::Index k = 0; k < kPieces; ++k) {
      for (Eigen::Index c = 0; c < mu.dim(); ++c) phi.slopes(k, c) = rng.normal();
      phi.offsets(k) = rng.normal();
    }
    const double lhs = integral_max_affine(mu, phi);
    const double rhs = integral_max_affine(nu, phi);
    if (lhs > rhs + 1e-9) report.violations.push_back({std::move(phi), lhs, rhs});
  }
  return report;
}

}  // namespace cvxorder

#endif  // CVXORDER_ORDER_ORACLE_HPP
