#ifndef CVXORDER_PROJECTION_HPP
#define CVXORDER_PROJECTION_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "cvxorder/errors.hpp"
#include "cvxorder/measure.hpp"
#include "cvxorder/transport.hpp"

namespace cvxorder {

// Weighted squared residual of the barycentric map: with rows of `coeff` on
// the simplex, J = sum_i w_i | sum_j coeff_ij y_j - x_i |^2. Its square root
// is the distance from mu to the set of measures dominated by nu in convex
// order, once coeff also satisfies the column constraint coeff' w = nu.
inline double projection_objective(const Eigen::MatrixXd& coeff, const DiscreteMeasure& mu,
                                   const DiscreteMeasure& nu) {
  if (coeff.rows() != mu.size() || coeff.cols() != nu.size())
    throw dimension_mismatch("objective: coefficient matrix has wrong shape");
  if (mu.dim() != nu.dim()) throw dimension_mismatch("objective: dimension mismatch");
  return ((coeff * nu.points - mu.points).rowwise().squaredNorm().array() *
          mu.weights.array())
      .sum();
}

inline Eigen::MatrixXd projection_gradient(const Eigen::MatrixXd& coeff,
                                           const DiscreteMeasure& mu,
                                           const DiscreteMeasure& nu) {
  if (coeff.rows() != mu.size() || coeff.cols() != nu.size())
    throw dimension_mismatch("gradient: coefficient matrix has wrong shape");
  return 2.0 * mu.weights.asDiagonal() * (coeff * nu.points - mu.points) *
         nu.points.transpose();
}

enum class OracleKind { ExactLP, Entropic };

struct EntropicParams {
  double eps0 = 0.0;  // 0 = auto: 0.1 * mean |oracle cost| at the first call
  double decay = 0.7;
  double min_eps = 1e-6;
  double sinkhorn_tol = 1e-8;
  int sinkhorn_max_iter = 200;
};

enum class StepRule { ClosedForm, Fixed };  // Fixed takes 2 / (k + 2)

struct SolverConfig {
  OracleKind oracle = OracleKind::ExactLP;
  EntropicParams entropic;
  int max_iter = 2000;
  double gap_tol = 0.0;  // 0 = auto: 1e-7 * (1 + initial objective)
  StepRule step_rule = StepRule::ClosedForm;
  // Pair the exact oracle with pairwise steps (linear instead of sublinear
  // convergence on the polytope), so near-zero distances can be certified.
  bool pairwise_steps = true;
};

enum class StepKind { Forward, Pairwise, Converged };

struct TraceRecord {
  int k = 0;
  double objective = 0.0;
  double gap = 0.0;
  double step = 0.0;
  double epsilon = 0.0;  // regularization used by this iteration's oracle
  OracleKind oracle = OracleKind::ExactLP;
  StepKind kind = StepKind::Forward;
};

struct ProjectionResult {
  Eigen::MatrixXd coefficients;  // rows on the simplex, columns resolving nu
  double distance = 0.0;
  DiscreteMeasure projected;
  std::vector<TraceRecord> trace;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

// Linear minimization over the feasible barycentric matrices. In coupling
// coordinates pi_ij = w_i * coeff_ij the feasible set is exactly the
// transportation polytope between the two weight vectors, with cost G/w.
class BarycentricOracle {
 public:
  BarycentricOracle(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const SolverConfig& cfg)
      : w_(mu.weights), b_(nu.weights), cfg_(cfg) {
    for (Eigen::Index j = 0; j < b_.size(); ++j)
      if (b_(j) > 0.0) support_.push_back(j);
  }

  Eigen::MatrixXd minimize(const Eigen::MatrixXd& gradient, int iteration, double& epsilon_used) {
    Eigen::MatrixXd cost = gradient.array().colwise() / w_.array();
    if (cfg_.oracle == OracleKind::ExactLP) {
      epsilon_used = 0.0;
      reliable_ = true;
      const TransportPlan plan = min_cost_plan(cost, w_, b_);
      return plan.matrix.array().colwise() / w_.array();
    }

    if (eps0_ <= 0.0) {
      eps0_ = cfg_.entropic.eps0 > 0.0 ? cfg_.entropic.eps0 : 0.1 * cost.cwiseAbs().mean();
      if (!(eps0_ > 0.0)) eps0_ = cfg_.entropic.min_eps;
    }
    epsilon_used =
        std::max(eps0_ * std::pow(cfg_.entropic.decay, iteration), cfg_.entropic.min_eps);

    // Columns of zero mass receive no coupling; solve on the support only.
    const auto js = static_cast<Eigen::Index>(support_.size());
    Eigen::MatrixXd sub_cost(cost.rows(), js);
    Eigen::VectorXd sub_b(js);
    for (Eigen::Index c = 0; c < js; ++c) {
      sub_cost.col(c) = cost.col(support_[c]);
      sub_b(c) = b_(support_[c]);
    }
    SinkhornOptions opts;
    opts.tol = cfg_.entropic.sinkhorn_tol;
    opts.max_iter = cfg_.entropic.sinkhorn_max_iter;
    opts.warm_f = warm_f_;
    opts.warm_g = warm_g_;
    SinkhornResult res = sinkhorn(sub_cost, w_, sub_b, epsilon_used, opts);
    warm_f_ = res.f;
    warm_g_ = res.g;
    reliable_ = res.converged;
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(cost.rows(), cost.cols());
    for (Eigen::Index c = 0; c < js; ++c) full.col(support_[c]) = res.plan.matrix.col(c);
    return full.array().colwise() / w_.array();
  }

  // Whether the last minimize() call solved its subproblem to tolerance; an
  // unconverged Sinkhorn pass yields a feasible direction but a gap value
  // that cannot certify convergence.
  bool reliable() const { return reliable_; }

 private:
  bool reliable_ = true;
  const Eigen::VectorXd& w_;
  const Eigen::VectorXd& b_;
  const SolverConfig& cfg_;
  std::vector<Eigen::Index> support_;
  double eps0_ = 0.0;
  Eigen::VectorXd warm_f_, warm_g_;
};

}  // namespace detail

// One call to the linear-minimization oracle: the feasible matrix S
// minimizing <gradient, S>. `epsilon` is required for the entropic kind.
inline Eigen::MatrixXd fw_oracle(const Eigen::MatrixXd& gradient, const DiscreteMeasure& mu,
                                 const DiscreteMeasure& nu, OracleKind kind,
                                 double epsilon = 0.0) {
  if (gradient.rows() != mu.size() || gradient.cols() != nu.size())
    throw dimension_mismatch("fw_oracle: gradient has wrong shape");
  if ((mu.weights.array() <= 0.0).any())
    throw invalid_input("fw_oracle: zero-weight atoms in the first measure");
  SolverConfig cfg;
  cfg.oracle = kind;
  if (kind == OracleKind::Entropic) {
    if (!(epsilon > 0.0)) throw invalid_input("fw_oracle: entropic oracle needs epsilon > 0");
    cfg.entropic.eps0 = epsilon;
    cfg.entropic.decay = 1.0;
  }
  detail::BarycentricOracle oracle(mu, nu, cfg);
  double used = 0.0;
  return oracle.minimize(gradient, 0, used);
}

// Frank-Wolfe solve of the backward projection: minimize the weighted
// squared residual over barycentric matrices whose coupling lies between the
// two weight vectors. Starts from the matrix with every row equal to nu's
// weights (all atoms mapped to nu's barycenter).
inline ProjectionResult project_backward(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                         const SolverConfig& cfg = {}) {
  if (mu.dim() != nu.dim()) throw dimension_mismatch("project_backward: dimension mismatch");
  if ((mu.weights.array() <= 0.0).any())
    throw invalid_input("project_backward: zero-weight atoms in the projected measure");
  if (cfg.max_iter < 1 || cfg.gap_tol < 0.0 || !(cfg.entropic.decay > 0.0) ||
      cfg.entropic.decay > 1.0 || !(cfg.entropic.min_eps > 0.0))
    throw invalid_input("project_backward: bad solver configuration");

  const Eigen::Index n = mu.size();
  const Eigen::MatrixXd& targets = nu.points;
  const Eigen::VectorXd& w = mu.weights;

  Eigen::MatrixXd coeff = Eigen::VectorXd::Ones(n) * nu.weights.transpose();
  detail::BarycentricOracle oracle(mu, nu, cfg);

  const bool use_pairwise = cfg.pairwise_steps && cfg.oracle == OracleKind::ExactLP &&
                            cfg.step_rule == StepRule::ClosedForm;
  std::vector<std::pair<Eigen::MatrixXd, double>> active;
  if (use_pairwise) active.emplace_back(coeff, 1.0);

  ProjectionResult result;
  result.trace.reserve(static_cast<std::size_t>(std::min(cfg.max_iter, 4096)));
  double gap_tol = cfg.gap_tol;

  auto weighted_quad = [&](const Eigen::MatrixXd& dir) {
    return ((dir * targets).rowwise().squaredNorm().array() * w.array()).sum();
  };

  int k = 0;
  for (; k < cfg.max_iter; ++k) {
    const double objective = projection_objective(coeff, mu, nu);
    if (!std::isfinite(objective))
      throw numerical_error("project_backward: non-finite objective");
    if (gap_tol <= 0.0 && k == 0) gap_tol = 1e-7 * (1.0 + objective);

    const Eigen::MatrixXd grad = projection_gradient(coeff, mu, nu);
    double epsilon_used = 0.0;
    const Eigen::MatrixXd vertex = oracle.minimize(grad, k, epsilon_used);
    const double gap = (grad.array() * (coeff - vertex).array()).sum();
    if (!std::isfinite(gap)) throw numerical_error("project_backward: non-finite gap");

    // The entropic oracle solves its linear subproblem only up to
    // epsilon * log(n*m) (the entropy range over the transportation
    // polytope), and the measured gap inherits that slack, possibly going
    // negative. Certify convergence against the corrected bound, never the
    // raw estimate.
    const double gap_slack =
        cfg.oracle == OracleKind::ExactLP
            ? 0.0
            : epsilon_used * std::log(static_cast<double>(n) * static_cast<double>(nu.size()));
    if (gap + gap_slack <= gap_tol && oracle.reliable()) {
      result.trace.push_back(
          {k, objective, gap, 0.0, epsilon_used, cfg.oracle, StepKind::Converged});
      result.converged = true;
      break;
    }

    // Pick between the forward direction and the pairwise direction that
    // moves mass straight off the worst active vertex onto the new one.
    // The objective is exactly quadratic along any line, so comparing the
    // closed-form decrease of both candidates is an exact greedy choice;
    // pairwise steps are what keep the iteration moving on degenerate
    // faces where pure forward (and away) steps shrink into a zigzag.
    StepKind kind = StepKind::Forward;
    Eigen::MatrixXd direction = vertex - coeff;
    double step = 0.0;
    std::size_t worst_index = 0;

    auto closed_step = [&](const Eigen::MatrixXd& dir, double cap) {
      const double slope = (grad.array() * dir.array()).sum();
      const double quad = weighted_quad(dir);
      const double s = quad > 0.0 ? std::clamp(-slope / (2.0 * quad), 0.0, cap) : cap;
      return std::make_pair(s, s * (slope + s * quad));
    };

    if (cfg.step_rule == StepRule::Fixed) {
      step = std::min(2.0 / (k + 2.0), 1.0);
    } else if (!use_pairwise || active.empty()) {
      step = closed_step(direction, 1.0).first;
    } else {
      double worst_score = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < active.size(); ++t) {
        const double score = (grad.array() * active[t].first.array()).sum();
        if (score > worst_score) {
          worst_score = score;
          worst_index = t;
        }
      }
      const auto [forward_step, forward_drop] = closed_step(direction, 1.0);
      const Eigen::MatrixXd swap = vertex - active[worst_index].first;
      const auto [pair_step, pair_drop] = closed_step(swap, active[worst_index].second);
      if (pair_drop < forward_drop) {
        kind = StepKind::Pairwise;
        direction = swap;
        step = pair_step;
      } else {
        step = forward_step;
      }
    }

    coeff.noalias() += step * direction;
    result.trace.push_back({k, objective, gap, step, epsilon_used, cfg.oracle, kind});

    if (use_pairwise) {
      if (kind == StepKind::Forward) {
        for (auto& entry : active) entry.second *= (1.0 - step);
        if (step >= 1.0) active.clear();
        bool merged = false;
        for (auto& entry : active)
          if ((entry.first - vertex).cwiseAbs().maxCoeff() < 1e-12) {
            entry.second += step;
            merged = true;
            break;
          }
        if (!merged && step > 0.0) active.emplace_back(vertex, step);
      } else {
        // Mass moves between the two endpoints; the total stays one.
        active[worst_index].second -= step;
        bool merged = false;
        for (auto& entry : active)
          if ((entry.first - vertex).cwiseAbs().maxCoeff() < 1e-12) {
            entry.second += step;
            merged = true;
            break;
          }
        if (!merged && step > 0.0) active.emplace_back(vertex, step);
        if (active[worst_index].second < 1e-14)
          active.erase(active.begin() + static_cast<std::ptrdiff_t>(worst_index));
      }
      // Periodically rebuild the iterate from its vertex decomposition to
      // cancel floating-point drift.
      if (k % 64 == 63 && !active.empty()) {
        double mass = 0.0;
        for (const auto& entry : active) mass += entry.second;
        Eigen::MatrixXd rebuilt = Eigen::MatrixXd::Zero(coeff.rows(), coeff.cols());
        for (const auto& entry : active) rebuilt += (entry.second / mass) * entry.first;
        coeff = std::move(rebuilt);
      }
    }
  }

  result.iterations = k;
  const double final_objective = projection_objective(coeff, mu, nu);
  result.distance = std::sqrt(std::max(0.0, final_objective));
  result.projected = DiscreteMeasure{coeff * targets, mu.weights};
  result.coefficients = std::move(coeff);
  return result;
}

inline double projection_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                  const SolverConfig& cfg = {}) {
  return project_backward(mu, nu, cfg).distance;
}

}  // namespace cvxorder

#endif  // CVXORDER_PROJECTION_HPP
