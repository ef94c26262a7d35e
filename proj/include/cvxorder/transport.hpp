#ifndef CVXORDER_TRANSPORT_HPP
#define CVXORDER_TRANSPORT_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "cvxorder/errors.hpp"
#include "cvxorder/measure.hpp"

namespace cvxorder {

// Coupling between two finitely supported measures. Rows follow the first
// measure, columns the second; marginal violation stays below 1e-8.
struct TransportPlan {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd row_marginal;
  Eigen::VectorXd col_marginal;
  double cost = 0.0;
};

namespace detail {

// Primal network simplex on the dense transportation polytope. The basis is
// a spanning tree over supply nodes [0, n) and demand nodes [n, n+m).
// Pivoting uses Bland's rule, so termination holds even on degenerate data;
// a tiny demand perturbation (1e-12 * column index) steers the walk away
// from ties and is removed before flows are reported.
class TransportationSimplex {
 public:
  TransportationSimplex(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply,
                        const Eigen::VectorXd& demand)
      : cost_(cost),
        n_(static_cast<int>(supply.size())),
        m_(static_cast<int>(demand.size())),
        supply_(supply),
        demand_(demand) {}

  Eigen::MatrixXd solve() {
    Eigen::VectorXd supply_p = supply_;
    Eigen::VectorXd demand_p = demand_;
    for (int j = 0; j < m_; ++j) demand_p(j) += 1e-12 * (j + 1);
    supply_p(n_ - 1) += demand_p.sum() - supply_p.sum();

    run(supply_p, demand_p);
    Eigen::MatrixXd flows = tree_flows(supply_, demand_);
    if (flows.minCoeff() < -1e-10 * std::max(1.0, supply_.maxCoeff())) {
      // Perturbed basis is infeasible for the exact data; redo the walk on
      // exact data, where the ratio test keeps every flow nonnegative.
      run(supply_, demand_);
      flows = tree_flows(supply_, demand_);
    }
    return flows.cwiseMax(0.0);
  }

 private:
  struct Arc {
    int i;
    int j;
    double flow;
  };

  void run(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand) {
    northwest_init(supply, demand);
    const double pivot_tol = 1e-11 * (1.0 + cost_.cwiseAbs().maxCoeff());
    const long max_pivots = 2000L + 50L * static_cast<long>(n_ + m_) * (n_ + m_);
    Eigen::VectorXd u(n_), v(m_);
    for (long pivot = 0; pivot < max_pivots; ++pivot) {
      compute_duals(u, v);
      int ei = -1, ej = -1;
      for (int i = 0; i < n_ && ei < 0; ++i)
        for (int j = 0; j < m_; ++j)
          if (cost_(i, j) - u(i) - v(j) < -pivot_tol) {
            ei = i;
            ej = j;
            break;
          }
      if (ei < 0) return;  // dual feasible: optimal
      pivot_on(ei, ej);
    }
    throw numerical_error("transportation simplex: pivot limit exceeded");
  }

  void northwest_init(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand) {
    arcs_.clear();
    arcs_.reserve(n_ + m_ - 1);
    adj_.assign(n_ + m_, {});
    Eigen::VectorXd rem_a = supply;
    Eigen::VectorXd rem_b = demand;
    int i = 0, j = 0;
    while (true) {
      const double f = std::min(rem_a(i), rem_b(j));
      add_arc(i, j, std::max(f, 0.0));
      rem_a(i) -= f;
      rem_b(j) -= f;
      if (i == n_ - 1 && j == m_ - 1) break;
      if (i == n_ - 1)
        ++j;
      else if (j == m_ - 1)
        ++i;
      else if (rem_a(i) <= rem_b(j))
        ++i;
      else
        ++j;
    }
  }

  void add_arc(int i, int j, double flow) {
    adj_[i].push_back(static_cast<int>(arcs_.size()));
    adj_[n_ + j].push_back(static_cast<int>(arcs_.size()));
    arcs_.push_back(Arc{i, j, flow});
  }

  void compute_duals(Eigen::VectorXd& u, Eigen::VectorXd& v) const {
    std::vector<char> seen(n_ + m_, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    u(0) = 0.0;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      for (int arc_id : adj_[node]) {
        const Arc& a = arcs_[arc_id];
        const int other = (node == a.i) ? n_ + a.j : a.i;
        if (seen[other]) continue;
        seen[other] = 1;
        if (other >= n_)
          v(other - n_) = cost_(a.i, a.j) - u(a.i);
        else
          u(other) = cost_(a.i, a.j) - v(a.j);
        stack.push_back(other);
      }
    }
  }

  // Path from supply node `from` to demand node n_+`to_j` through the tree.
  std::vector<int> tree_path(int from, int to_j) const {
    const int target = n_ + to_j;
    std::vector<int> parent_arc(n_ + m_, -1);
    std::vector<char> seen(n_ + m_, 0);
    std::vector<int> stack{from};
    seen[from] = 1;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (node == target) break;
      for (int arc_id : adj_[node]) {
        const Arc& a = arcs_[arc_id];
        const int other = (node == a.i) ? n_ + a.j : a.i;
        if (seen[other]) continue;
        seen[other] = 1;
        parent_arc[other] = arc_id;
        stack.push_back(other);
      }
    }
    std::vector<int> path;
    int node = target;
    while (node != from) {
      const int arc_id = parent_arc[node];
      path.push_back(arc_id);
      const Arc& a = arcs_[arc_id];
      node = (node == a.i) ? n_ + a.j : a.i;
    }
    return path;  // ordered from the demand end back to `from`
  }

  void pivot_on(int ei, int ej) {
    const std::vector<int> path = tree_path(ei, ej);
    // Around the cycle (entering arc +, then alternating along the path
    // starting at the demand end), the odd positions give up flow.
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const Arc& a = arcs_[path[p]];
      const long long id = static_cast<long long>(a.i) * m_ + a.j;
      if (a.flow < theta - 1e-300 ||
          (a.flow == theta && (leaving < 0 || id < static_cast<long long>(arcs_[leaving].i) * m_ +
                                                      arcs_[leaving].j))) {
        theta = a.flow;
        leaving = path[p];
      }
    }
    for (std::size_t p = 0; p < path.size(); ++p)
      arcs_[path[p]].flow += (p % 2 == 0) ? -theta : theta;

    const Arc old = arcs_[leaving];
    auto drop = [&](int node, int arc_id) {
      auto& list = adj_[node];
      list.erase(std::find(list.begin(), list.end(), arc_id));
    };
    drop(old.i, leaving);
    drop(n_ + old.j, leaving);
    arcs_[leaving] = Arc{ei, ej, theta};
    adj_[ei].push_back(leaving);
    adj_[n_ + ej].push_back(leaving);
  }

  // Unique flows on the final spanning tree for the given right-hand side,
  // obtained by peeling leaves.
  Eigen::MatrixXd tree_flows(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand) const {
    Eigen::VectorXd value(n_ + m_);
    value.head(n_) = supply;
    value.tail(m_) = demand;
    std::vector<int> degree(n_ + m_);
    std::vector<std::vector<int>> adj = adj_;
    for (int node = 0; node < n_ + m_; ++node) degree[node] = static_cast<int>(adj[node].size());
    std::vector<char> done(arcs_.size(), 0);
    std::vector<int> leaves;
    for (int node = 0; node < n_ + m_; ++node)
      if (degree[node] == 1) leaves.push_back(node);

    Eigen::MatrixXd flows = Eigen::MatrixXd::Zero(n_, m_);
    while (!leaves.empty()) {
      const int node = leaves.back();
      leaves.pop_back();
      if (degree[node] != 1) continue;
      int arc_id = -1;
      for (int cand : adj[node])
        if (!done[cand]) arc_id = cand;
      if (arc_id < 0) continue;
      const Arc& a = arcs_[arc_id];
      flows(a.i, a.j) = value(node);
      const int other = (node == a.i) ? n_ + a.j : a.i;
      value(other) -= value(node);
      value(node) = 0.0;
      done[arc_id] = 1;
      degree[node] = 0;
      if (--degree[other] == 1) leaves.push_back(other);
    }
    return flows;
  }

  const Eigen::MatrixXd& cost_;
  int n_;
  int m_;
  Eigen::VectorXd supply_;
  Eigen::VectorXd demand_;
  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> adj_;
};

inline void check_marginal_inputs(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply,
                                  const Eigen::VectorXd& demand) {
  if (cost.rows() != supply.size() || cost.cols() != demand.size())
    throw dimension_mismatch("cost matrix does not match marginal sizes");
  if (!cost.allFinite()) throw invalid_input("cost matrix has non-finite entries");
  if ((supply.array() < 0).any() || (demand.array() < 0).any())
    throw invalid_input("marginals must be nonnegative");
  const double total_supply = supply.sum();
  if (!(total_supply > 0)) throw invalid_input("marginals have zero mass");
  if (std::abs(total_supply - demand.sum()) > 1e-9 * total_supply)
    throw invalid_input("marginal masses differ");
}

inline TransportPlan plan_from_matrix(const Eigen::MatrixXd& cost, Eigen::MatrixXd matrix) {
  TransportPlan plan;
  plan.cost = (cost.array() * matrix.array()).sum();
  plan.row_marginal = matrix.rowwise().sum();
  plan.col_marginal = matrix.colwise().sum();
  plan.matrix = std::move(matrix);
  return plan;
}

}  // namespace detail

// Exact minimum-cost coupling of (supply, demand) under the given cost.
inline TransportPlan min_cost_plan(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply,
                                   Eigen::VectorXd demand) {
  detail::check_marginal_inputs(cost, supply, demand);
  demand *= supply.sum() / demand.sum();
  detail::TransportationSimplex solver(cost, supply, demand);
  return detail::plan_from_matrix(cost, solver.solve());
}

inline Eigen::MatrixXd squared_distance_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd cross = a * b.transpose();
  Eigen::MatrixXd out = (-2.0 * cross).colwise() + a.rowwise().squaredNorm();
  out.rowwise() += b.rowwise().squaredNorm().transpose();
  return out.cwiseMax(0.0);
}

struct W2Result {
  double distance = 0.0;
  TransportPlan plan;
};

// 2-Wasserstein distance between discrete measures, solved exactly.
inline W2Result w2_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.dim() != nu.dim()) throw dimension_mismatch("w2: dimension mismatch");
  const Eigen::MatrixXd cost = squared_distance_matrix(mu.points, nu.points);
  TransportPlan plan = min_cost_plan(cost, mu.weights, nu.weights);
  return W2Result{std::sqrt(std::max(0.0, plan.cost)), std::move(plan)};
}

// --- Entropic regularization ------------------------------------------------

struct SinkhornOptions {
  double tol = 1e-8;  // L1 marginal violation at which scaling stops
  int max_iter = 5000;
  Eigen::VectorXd warm_f;  // optional warm-start potentials, natural units
  Eigen::VectorXd warm_g;
};

struct SinkhornResult {
  TransportPlan plan;
  Eigen::VectorXd f;  // final potentials for the original cost
  Eigen::VectorXd g;
  int iterations = 0;
  bool converged = false;
  bool used_log_domain = false;
};

namespace detail {

// Rescale toward exact marginals, then repair the remaining deficit with a
// rank-one correction. Keeps entries nonnegative and both marginals exact.
inline void round_to_marginals(Eigen::MatrixXd& plan, const Eigen::VectorXd& supply,
                               const Eigen::VectorXd& demand) {
  Eigen::VectorXd rows = plan.rowwise().sum();
  for (Eigen::Index i = 0; i < rows.size(); ++i)
    if (rows(i) > supply(i) && rows(i) > 0) plan.row(i) *= supply(i) / rows(i);
  Eigen::VectorXd cols = plan.colwise().sum();
  for (Eigen::Index j = 0; j < cols.size(); ++j)
    if (cols(j) > demand(j) && cols(j) > 0) plan.col(j) *= demand(j) / cols(j);
  const Eigen::VectorXd row_gap = (supply - plan.rowwise().sum()).cwiseMax(0.0);
  const Eigen::VectorXd col_gap = (demand - plan.colwise().sum().transpose()).cwiseMax(0.0);
  const double missing = row_gap.sum();
  if (missing > 0) plan.noalias() += row_gap * (col_gap.transpose() / missing);
}

}  // namespace detail

// Entropically regularized coupling via Sinkhorn scaling. Scaling factors
// that leave [1e-300, 1e300] trigger an automatic switch to log-domain
// updates (recorded on the result). The returned plan is rounded onto the
// marginal polytope, so its marginals are exact even when the scaling loop
// hits max_iter first.
inline SinkhornResult sinkhorn(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply,
                               const Eigen::VectorXd& demand, double epsilon,
                               SinkhornOptions opts = {}) {
  detail::check_marginal_inputs(cost, supply, demand);
  if (!(epsilon > 0)) throw invalid_input("sinkhorn: epsilon must be positive");
  if ((supply.array() <= 0).any() || (demand.array() <= 0).any())
    throw invalid_input("sinkhorn: marginals must be strictly positive");
  const Eigen::Index n = supply.size();
  const Eigen::Index m = demand.size();

  // Shifting the cost by row and column constants does not change the
  // optimal coupling; it keeps exp(-cost/eps) in range longer.
  const Eigen::VectorXd row_shift = cost.rowwise().minCoeff();
  Eigen::MatrixXd shifted = cost.colwise() - row_shift;
  const Eigen::RowVectorXd col_shift = shifted.colwise().minCoeff();
  shifted.rowwise() -= col_shift;

  SinkhornResult result;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
  if (opts.warm_f.size() == n && opts.warm_g.size() == m) {
    f = opts.warm_f - row_shift;
    g = opts.warm_g - col_shift.transpose();
  }

  const double lo_guard = 1e-300, hi_guard = 1e300;
  // Start in log domain when exp(-cost/eps) would underflow entrywise:
  // selectively vanishing kernel entries silently restrict the support,
  // which is worse than an overflowing scaling factor.
  bool log_domain = shifted.maxCoeff() / epsilon > 600.0 ||
                    f.cwiseAbs().maxCoeff() / epsilon > 600.0 ||
                    g.cwiseAbs().maxCoeff() / epsilon > 600.0;
  if (log_domain) result.used_log_domain = true;
  Eigen::MatrixXd kernel;
  Eigen::VectorXd u, v;
  if (!log_domain) {
    kernel = (-shifted / epsilon).array().exp();
    u = (f / epsilon).array().exp();
    v = (g / epsilon).array().exp();
  }

  const Eigen::VectorXd log_supply = supply.array().log();
  const Eigen::VectorXd log_demand = demand.array().log();
  Eigen::MatrixXd work;  // reused scratch so the log-domain loop stays allocation-free
  auto lse_rows = [&](const Eigen::VectorXd& pot_cols, Eigen::VectorXd& out) {
    // out_i = log sum_j exp((pot_cols_j - shifted_ij) / epsilon)
    work = ((-shifted).rowwise() + pot_cols.transpose()) / epsilon;
    const Eigen::VectorXd mx = work.rowwise().maxCoeff();
    work.colwise() -= mx;
    work.array() = work.array().exp();
    out = (work.rowwise().sum().array().log() + mx.array()).matrix();
  };
  auto lse_cols = [&](const Eigen::VectorXd& pot_rows, Eigen::VectorXd& out) {
    work = ((-shifted).colwise() + pot_rows) / epsilon;
    const Eigen::RowVectorXd mx = work.colwise().maxCoeff();
    work.rowwise() -= mx;
    work.array() = work.array().exp();
    out = (work.colwise().sum().array().log().transpose() + mx.transpose().array()).matrix();
  };

  int iter = 0;
  bool converged = false;
  Eigen::VectorXd lse(n), lg(m);
  // lse holds lse_rows(g) for the current g once a log-domain iteration has
  // completed; the next f-update can then reuse it instead of recomputing.
  bool lse_fresh = false;
  for (; iter < opts.max_iter; ++iter) {
    if (!log_domain) {
      // A vanishing denominator means the scaling factors are about to
      // leave range; detect it before dividing.
      Eigen::VectorXd u_next, v_next;
      bool out_of_range = false;
      Eigen::VectorXd ku = kernel * v;
      if (!ku.allFinite() || ku.minCoeff() <= lo_guard) {
        out_of_range = true;
      } else {
        u_next = supply.cwiseQuotient(ku);
        Eigen::VectorXd kv = kernel.transpose() * u_next;
        if (!kv.allFinite() || kv.minCoeff() <= lo_guard) {
          out_of_range = true;
        } else {
          v_next = demand.cwiseQuotient(kv);
          out_of_range = !u_next.allFinite() || !v_next.allFinite() ||
                         u_next.minCoeff() < lo_guard || u_next.maxCoeff() > hi_guard ||
                         v_next.minCoeff() < lo_guard || v_next.maxCoeff() > hi_guard;
        }
      }
      if (out_of_range) {
        f = epsilon * u.cwiseMax(lo_guard).array().log();
        g = epsilon * v.cwiseMax(lo_guard).array().log();
        log_domain = true;
        result.used_log_domain = true;
        kernel.resize(0, 0);
        continue;
      }
      u = std::move(u_next);
      v = std::move(v_next);
      const double violation = ((kernel * v).cwiseProduct(u) - supply).cwiseAbs().sum();
      if (violation <= opts.tol) {
        converged = true;
        ++iter;
        break;
      }
    } else {
      if (!lse_fresh) lse_rows(g, lse);
      f = epsilon * (log_supply - lse);
      lse_cols(f, lg);
      g = epsilon * (log_demand - lg);
      lse_rows(g, lse);
      lse_fresh = true;
      const double violation =
          (((f / epsilon + lse).array().exp()).matrix() - supply).cwiseAbs().sum();
      if (violation <= opts.tol) {
        converged = true;
        ++iter;
        break;
      }
    }
  }

  Eigen::MatrixXd plan;
  if (!log_domain) {
    plan = u.asDiagonal() * kernel * v.asDiagonal();
    f = epsilon * u.cwiseMax(lo_guard).array().log();
    g = epsilon * v.cwiseMax(lo_guard).array().log();
  } else {
    plan = ((((-shifted).colwise() + f).rowwise() + g.transpose()) / epsilon).array().exp();
  }
  detail::round_to_marginals(plan, supply, demand);
  if (!plan.allFinite()) throw numerical_error("sinkhorn: non-finite plan");

  result.plan = detail::plan_from_matrix(cost, std::move(plan));
  result.f = f + row_shift;
  result.g = g + col_shift.transpose();
  result.iterations = iter;
  result.converged = converged;
  return result;
}

}  // namespace cvxorder

#endif  // CVXORDER_TRANSPORT_HPP
