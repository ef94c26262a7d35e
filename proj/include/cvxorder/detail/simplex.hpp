#ifndef CVXORDER_DETAIL_SIMPLEX_HPP
#define CVXORDER_DETAIL_SIMPLEX_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "cvxorder/errors.hpp"

namespace cvxorder::detail {

enum class LpStatus { Optimal, Infeasible, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::IterationLimit;
  double objective = 0.0;
  Eigen::VectorXd x;
};

// Two-phase revised simplex for min c'x subject to Ax = b, x >= 0, with A
// held as sparse columns and the basis inverse kept dense. Sized for the
// ground-truth LPs in this library (hundreds of rows, thousands of
// columns), not for general use.
class SparseLp {
 public:
  SparseLp(Eigen::Index rows, Eigen::Index cols)
      : rows_(rows), cols_(cols), rhs_(Eigen::VectorXd::Zero(rows)),
        cost_(Eigen::VectorXd::Zero(cols)), columns_(static_cast<std::size_t>(cols)) {}

  void add_entry(Eigen::Index r, Eigen::Index c, double v) {
    columns_[static_cast<std::size_t>(c)].emplace_back(r, v);
  }
  void set_rhs(Eigen::Index r, double v) { rhs_(r) = v; }
  void set_cost(Eigen::Index c, double v) { cost_(c) = v; }

  LpResult solve(int max_pivots = 0) {
    // Normalize to a nonnegative right-hand side so the artificial basis
    // is feasible with coefficient +1 on every row.
    std::vector<double> row_sign(static_cast<std::size_t>(rows_), 1.0);
    Eigen::VectorXd b = rhs_;
    for (Eigen::Index r = 0; r < rows_; ++r)
      if (b(r) < 0.0) {
        b(r) = -b(r);
        row_sign[static_cast<std::size_t>(r)] = -1.0;
      }
    for (Eigen::Index c = 0; c < cols_; ++c)
      for (auto& [r, v] : columns_[static_cast<std::size_t>(c)])
        v *= row_sign[static_cast<std::size_t>(r)];

    if (max_pivots <= 0) max_pivots = 20000 + 60 * static_cast<int>(rows_);
    basis_.resize(static_cast<std::size_t>(rows_));
    for (Eigen::Index r = 0; r < rows_; ++r)
      basis_[static_cast<std::size_t>(r)] = cols_ + r;  // artificial ids
    binv_ = Eigen::MatrixXd::Identity(rows_, rows_);
    xb_ = b;

    // Phase 1: drive the artificial mass to zero.
    Eigen::VectorXd phase1_cost = Eigen::VectorXd::Zero(cols_);
    const double feas_tol = 1e-9 * (1.0 + b.lpNorm<1>());
    if (!iterate(phase1_cost, true, max_pivots)) return {LpStatus::IterationLimit, 0.0, {}};
    double artificial_mass = 0.0;
    for (Eigen::Index r = 0; r < rows_; ++r)
      if (basis_[static_cast<std::size_t>(r)] >= cols_) artificial_mass += xb_(r);
    if (artificial_mass > feas_tol) return {LpStatus::Infeasible, artificial_mass, {}};
    evict_artificials();

    if (!iterate(cost_, false, max_pivots)) return {LpStatus::IterationLimit, 0.0, {}};

    LpResult out;
    out.status = LpStatus::Optimal;
    out.x = Eigen::VectorXd::Zero(cols_);
    for (Eigen::Index r = 0; r < rows_; ++r) {
      const Eigen::Index id = basis_[static_cast<std::size_t>(r)];
      if (id < cols_) out.x(id) = std::max(0.0, xb_(r));
    }
    out.objective = cost_.dot(out.x);
    return out;
  }

 private:
  double column_dot(const Eigen::VectorXd& y, Eigen::Index c) const {
    double s = 0.0;
    for (const auto& [r, v] : columns_[static_cast<std::size_t>(c)]) s += y(r) * v;
    return s;
  }

  Eigen::VectorXd ftran(Eigen::Index c) const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(rows_);
    for (const auto& [r, v] : columns_[static_cast<std::size_t>(c)]) d += v * binv_.col(r);
    return d;
  }

  // Cost of basic variable `id` under the active phase objective.
  static double basic_cost(const Eigen::VectorXd& c, Eigen::Index id, Eigen::Index cols,
                           bool phase1) {
    if (id >= cols) return phase1 ? 1.0 : 0.0;
    return c(id);
  }

  bool iterate(const Eigen::VectorXd& c, bool phase1, int max_pivots) {
    int degenerate_run = 0;
    for (int pivot = 0; pivot < max_pivots; ++pivot) {
      Eigen::VectorXd cb(rows_);
      for (Eigen::Index r = 0; r < rows_; ++r)
        cb(r) = basic_cost(c, basis_[static_cast<std::size_t>(r)], cols_, phase1);
      const Eigen::VectorXd y = binv_.transpose() * cb;

      const bool bland = degenerate_run > 40;
      Eigen::Index entering = -1;
      double best = -1e-9;
      std::vector<char> in_basis(static_cast<std::size_t>(cols_), 0);
      for (Eigen::Index r = 0; r < rows_; ++r)
        if (basis_[static_cast<std::size_t>(r)] < cols_)
          in_basis[static_cast<std::size_t>(basis_[static_cast<std::size_t>(r)])] = 1;
      for (Eigen::Index j = 0; j < cols_; ++j) {
        if (in_basis[static_cast<std::size_t>(j)]) continue;
        const double reduced = c(j) - column_dot(y, j);
        if (bland) {
          if (reduced < -1e-10) {
            entering = j;
            break;
          }
        } else if (reduced < best) {
          best = reduced;
          entering = j;
        }
      }
      if (entering < 0) return true;  // optimal for this phase

      const Eigen::VectorXd d = ftran(entering);
      Eigen::Index leaving = -1;
      double theta = 0.0;
      for (Eigen::Index r = 0; r < rows_; ++r) {
        if (d(r) <= 1e-11) continue;
        const double ratio = std::max(0.0, xb_(r)) / d(r);
        if (leaving < 0 || ratio < theta - 1e-12) {
          leaving = r;
          theta = ratio;
        } else if (ratio < theta + 1e-12 &&
                   basis_[static_cast<std::size_t>(r)] <
                       basis_[static_cast<std::size_t>(leaving)]) {
          // Tie: prefer the smallest basis id so Bland's rule stays exact.
          leaving = r;
        }
      }
      if (leaving < 0) {
        // A descent ray: impossible for the bounded programs this engine
        // serves, so treat it as a numerical failure.
        throw numerical_error("simplex: unbounded descent direction");
      }
      degenerate_run = theta <= 1e-12 ? degenerate_run + 1 : 0;

      xb_ -= theta * d;
      xb_(leaving) = theta;
      for (Eigen::Index r = 0; r < rows_; ++r)
        if (r != leaving && xb_(r) < 0.0) xb_(r) = 0.0;
      basis_[static_cast<std::size_t>(leaving)] = entering;
      const double pivot_value = d(leaving);
      binv_.row(leaving) /= pivot_value;
      for (Eigen::Index r = 0; r < rows_; ++r)
        if (r != leaving && d(r) != 0.0) binv_.row(r) -= d(r) * binv_.row(leaving);

      if ((pivot + 1) % 256 == 0) refactorize();
    }
    return false;
  }

  // After phase 1, pivot zero-level artificials out wherever an original
  // column can replace them; rows where none can are inert (every original
  // column has a zero coefficient there in the current tableau).
  void evict_artificials() {
    for (Eigen::Index r = 0; r < rows_; ++r) {
      if (basis_[static_cast<std::size_t>(r)] < cols_) continue;
      const Eigen::VectorXd row = binv_.row(r).transpose();
      std::vector<char> in_basis(static_cast<std::size_t>(cols_), 0);
      for (Eigen::Index t = 0; t < rows_; ++t)
        if (basis_[static_cast<std::size_t>(t)] < cols_)
          in_basis[static_cast<std::size_t>(basis_[static_cast<std::size_t>(t)])] = 1;
      for (Eigen::Index j = 0; j < cols_; ++j) {
        if (in_basis[static_cast<std::size_t>(j)]) continue;
        const double alpha = column_dot(row, j);
        if (std::abs(alpha) <= 1e-7) continue;
        const Eigen::VectorXd d = ftran(j);
        basis_[static_cast<std::size_t>(r)] = j;
        binv_.row(r) /= d(r);
        for (Eigen::Index t = 0; t < rows_; ++t)
          if (t != r && d(t) != 0.0) binv_.row(t) -= d(t) * binv_.row(r);
        xb_(r) = 0.0;
        break;
      }
    }
  }

  void refactorize() {
    Eigen::MatrixXd basis_matrix = Eigen::MatrixXd::Zero(rows_, rows_);
    for (Eigen::Index r = 0; r < rows_; ++r) {
      const Eigen::Index id = basis_[static_cast<std::size_t>(r)];
      if (id < cols_) {
        for (const auto& [row, v] : columns_[static_cast<std::size_t>(id)])
          basis_matrix(row, r) = v;
      } else {
        basis_matrix(id - cols_, r) = 1.0;
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(basis_matrix);
    if (!lu.isInvertible()) return;  // keep the updated inverse
    binv_ = lu.inverse();
    Eigen::VectorXd b = rhs_;
    for (Eigen::Index r = 0; r < rows_; ++r) b(r) = std::abs(b(r));
    xb_ = (binv_ * b).cwiseMax(0.0);
  }

  Eigen::Index rows_, cols_;
  Eigen::VectorXd rhs_, cost_;
  std::vector<std::vector<std::pair<Eigen::Index, double>>> columns_;
  std::vector<Eigen::Index> basis_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
};

}  // namespace cvxorder::detail

#endif  // CVXORDER_DETAIL_SIMPLEX_HPP
