#ifndef CVXORDER_HYPOTHESIS_HPP
#define CVXORDER_HYPOTHESIS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <variant>

#include "cvxorder/errors.hpp"
#include "cvxorder/measure.hpp"
#include "cvxorder/projection.hpp"

namespace cvxorder {

// Distributional assumptions under which the concentration bounds hold.
// Exactly one of the two regimes applies.
struct LogSobolev {
  double kappa = 1.0;  // log-Sobolev constant, user-supplied (not estimated)
};

struct BoundedSupport {
  // 0 means "estimate from data" in run_test: the observed diameter of the
  // pooled samples, which under-estimates the population value.
  double diameter = 0.0;
  // Tail exponents; the theory needs both strictly above 4.
  double k1 = 5.0;
  double k2 = 5.0;
  // The bounded-support rate hides an unnamed constant C > 0 that the
  // source material never pins down; it enters as C^(k/2) and defaults to 1.
  double c_const = 1.0;
};

struct Regime {
  std::variant<LogSobolev, BoundedSupport> law = LogSobolev{};
  // Ambient dimension; only the log-Sobolev formulas depend on it.
  // 0 means "fill from data" in run_test.
  Eigen::Index dimension = 0;
};

// Fifth absolute moments of the two measures, needed by the log-Sobolev
// formulas. Plug-in sample values in practice; ignored by BoundedSupport.
struct MomentEstimates {
  double m5_mu = 0.0;
  double m5_nu = 0.0;
};

namespace detail {

inline void validate_alpha(double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw invalid_input("significance level must lie strictly between 0 and 1");
}

inline void validate_counts(Eigen::Index n, Eigen::Index m) {
  if (n < 1 || m < 1) throw invalid_input("sample counts must be at least 1");
}

inline void validate_regime(const Regime& regime) {
  if (const auto* ls = std::get_if<LogSobolev>(&regime.law)) {
    if (!(ls->kappa > 0.0) || !std::isfinite(ls->kappa))
      throw invalid_input("log-Sobolev constant must be positive");
    if (regime.dimension < 1)
      throw invalid_input("log-Sobolev regime needs the ambient dimension");
    return;
  }
  const auto& bs = std::get<BoundedSupport>(regime.law);
  if (!(bs.diameter > 0.0) || !std::isfinite(bs.diameter))
    throw invalid_input("support diameter must be positive");
  if (!(bs.k1 > 4.0) || !(bs.k2 > 4.0) || !std::isfinite(bs.k1) || !std::isfinite(bs.k2))
    throw invalid_input("tail exponents must exceed 4");
  if (!(bs.c_const > 0.0) || !std::isfinite(bs.c_const))
    throw invalid_input("rate constant must be positive");
}

inline double c1_of(double k) {
  return std::pow(3.0, 12.0 * k / (k - 4.0) + 1.0) *
         (1.0 / (std::pow(3.0, k / 2.0 - 2.0) - 1.0) + 3.0);
}

// The sample-size term of the critical value; also the threshold above
// which the p-value bound is rigorous.
inline double rate_term(const Regime& regime, Eigen::Index n, Eigen::Index m,
                        const MomentEstimates& stats) {
  const double lo = static_cast<double>(std::min(n, m));
  if (const auto* ls = std::get_if<LogSobolev>(&regime.law)) {
    (void)ls;
    const double d = static_cast<double>(regime.dimension);
    const double hi = static_cast<double>(std::max(n, m));
    const double m5 = std::max(stats.m5_mu, stats.m5_nu);
    const double log_pow = regime.dimension == 4 ? std::pow(std::log(hi), 2.0) : 1.0;
    return 80.0 * std::sqrt(d) * std::pow(m5, 0.2) *
           std::pow(log_pow / lo, 1.0 / std::max(d, 4.0));
  }
  const auto& bs = std::get<BoundedSupport>(regime.law);
  const double c = std::max(c1_of(bs.k1), std::pow(bs.c_const, bs.k1 / 2.0));
  const double denom = std::min(std::pow(static_cast<double>(n), 1.0 / bs.k1),
                                std::pow(static_cast<double>(m), 1.0 / bs.k2));
  return std::sqrt(8.0) * bs.diameter * std::sqrt(c) / denom;
}

}  // namespace detail

struct CriticalValueTerms {
  double rate = 0.0;           // sample-size floor, independent of alpha
  double concentration = 0.0;  // alpha-driven deviation term
};

// The two competing terms whose maximum is the critical value t(alpha).
inline CriticalValueTerms critical_value_terms(const Regime& regime, double alpha, Eigen::Index n,
                                               Eigen::Index m, const MomentEstimates& stats = {}) {
  detail::validate_alpha(alpha);
  detail::validate_counts(n, m);
  detail::validate_regime(regime);
  CriticalValueTerms terms;
  terms.rate = detail::rate_term(regime, n, m, stats);
  const double lo = static_cast<double>(std::min(n, m));
  if (const auto* ls = std::get_if<LogSobolev>(&regime.law)) {
    terms.concentration = std::sqrt(32.0 * ls->kappa * std::log(2.0 / alpha) / lo);
  } else {
    const auto& bs = std::get<BoundedSupport>(regime.law);
    terms.concentration =
        std::pow(32.0 * std::pow(bs.diameter, 4.0) * std::log(2.0 / alpha) / lo, 0.25);
  }
  return terms;
}

// Critical value: reject when the statistic reaches it and the type I error
// stays below alpha.
inline double critical_value(const Regime& regime, double alpha, Eigen::Index n, Eigen::Index m,
                             const MomentEstimates& stats = {}) {
  const auto terms = critical_value_terms(regime, alpha, n, m, stats);
  return std::max(terms.rate, terms.concentration);
}

struct PValueBound {
  double bound = 1.0;
  // The tail inequality behind the bound only applies above the rate term;
  // below it the number is reported anyway but is not rigorous.
  bool valid = false;
};

inline PValueBound p_value_bound(const Regime& regime, double t, Eigen::Index n, Eigen::Index m,
                                 const MomentEstimates& stats = {}) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw invalid_input("threshold t must be nonnegative");
  detail::validate_counts(n, m);
  detail::validate_regime(regime);
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  double sum = 0.0;
  if (const auto* ls = std::get_if<LogSobolev>(&regime.law)) {
    sum = std::exp(-nn * t * t / (32.0 * ls->kappa)) + std::exp(-mm * t * t / (32.0 * ls->kappa));
  } else {
    const auto& bs = std::get<BoundedSupport>(regime.law);
    const double d4 = 32.0 * std::pow(bs.diameter, 4.0);
    const double t4 = std::pow(t, 4.0);
    sum = std::exp(-nn * t4 / d4) + std::exp(-mm * t4 / d4);
  }
  PValueBound out;
  out.bound = std::min(1.0, sum);
  out.valid = t >= detail::rate_term(regime, n, m, stats);
  return out;
}

// Miss probability under the strict alternative (true distance at least
// 2 t(alpha)): exactly the significance level, for any threshold up to
// t(alpha).
inline double type2_bound(const Regime& regime, double alpha, Eigen::Index n, Eigen::Index m,
                          const MomentEstimates& stats = {}) {
  critical_value(regime, alpha, n, m, stats);  // validates the inputs
  return alpha;
}

struct RateBound {
  double epsilon = 0.0;      // deviation of the empirical statistic
  double probability = 0.0;  // confidence carried by that deviation
};

// How far the empirical projection distance can sit from the population
// one, with the stated confidence. Informational: drives sample-size
// advice, not the decision.
inline RateBound rate_bound(const Regime& regime, Eigen::Index n, Eigen::Index m,
                            const MomentEstimates& stats = {}) {
  detail::validate_counts(n, m);
  detail::validate_regime(regime);
  const double lo = static_cast<double>(std::min(n, m));
  RateBound out;
  if (const auto* ls = std::get_if<LogSobolev>(&regime.law)) {
    const double d = static_cast<double>(regime.dimension);
    const double m5 = std::max({stats.m5_mu, stats.m5_nu, 1.0});
    const double log_factor = regime.dimension == 4 ? std::sqrt(std::log(lo)) : 1.0;
    out.epsilon = 42.0 * std::sqrt(d) * std::pow(m5, 0.2) *
                  std::pow(lo, -std::min(1.0 / d, 0.25)) * log_factor;
    out.probability = 1.0 - 2.0 * std::exp(-std::sqrt(lo) / (2.0 * ls->kappa));
  } else {
    const auto& bs = std::get<BoundedSupport>(regime.law);
    const double k_hi = std::max(bs.k1, bs.k2);
    const double k_lo = std::min(bs.k1, bs.k2);
    const double c1 = std::pow(3.0, 12.0 * k_hi / (k_lo - 4.0) + 1.0) *
                      (1.0 / (std::pow(3.0, k_lo / 2.0 - 2.0) - 1.0) + 3.0);
    const double c = std::max(c1, std::pow(bs.c_const, k_hi / 2.0));
    out.epsilon = 2.0 * bs.diameter * std::sqrt(c) * std::pow(lo, -1.0 / k_hi);
    out.probability = 1.0 - 2.0 * std::exp(-2.0 * std::sqrt(lo) / std::pow(bs.diameter, 4.0));
  }
  out.probability = std::clamp(out.probability, 0.0, 1.0);
  return out;
}

enum class Decision { Accept, Reject };

struct TestDiagnostics {
  double m5_mu = 0.0;
  double m5_nu = 0.0;
  double diameter_used = 0.0;  // bounded regime only
  bool diameter_estimated = false;
  bool solver_converged = false;
  int solver_iterations = 0;
  double final_gap = 0.0;
  RateBound rate_bound;
};

struct TestReport {
  double statistic = 0.0;
  double t_alpha = 0.0;
  double alpha = 0.0;
  Decision decision = Decision::Accept;
  double p_value_bound = 1.0;
  bool p_value_valid = false;
  Regime regime;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  // Probability of accepting when the true distance is >= 2 t(alpha).
  double type2_bound = 0.0;
  TestDiagnostics diagnostics;
};

// Full decision procedure: estimate the regime's plug-in statistics from
// the data, compute the projection distance, and assemble the report.
// Rejects the hypothesis "first measure ⪯ second" when the statistic
// reaches the critical value.
inline TestReport run_test(const DiscreteMeasure& mu, const DiscreteMeasure& nu, Regime regime,
                           double alpha, const SolverConfig& solver = {}) {
  detail::validate_alpha(alpha);
  if (mu.dim() != nu.dim()) throw dimension_mismatch("run_test: dimension mismatch");
  if (regime.dimension == 0) regime.dimension = mu.dim();
  if (regime.dimension != mu.dim())
    throw invalid_input("run_test: regime dimension does not match the data");

  TestReport report;
  report.alpha = alpha;
  report.n = mu.size();
  report.m = nu.size();
  report.diagnostics.m5_mu = moment5(mu);
  report.diagnostics.m5_nu = moment5(nu);
  if (auto* bs = std::get_if<BoundedSupport>(&regime.law); bs != nullptr && bs->diameter == 0.0) {
    bs->diameter = diameter(mu, nu);
    report.diagnostics.diameter_estimated = true;
  }
  detail::validate_regime(regime);
  if (const auto* bs = std::get_if<BoundedSupport>(&regime.law))
    report.diagnostics.diameter_used = bs->diameter;
  report.regime = regime;

  const MomentEstimates stats{report.diagnostics.m5_mu, report.diagnostics.m5_nu};
  const ProjectionResult res = project_backward(mu, nu, solver);
  report.statistic = res.distance;
  report.diagnostics.solver_converged = res.converged;
  report.diagnostics.solver_iterations = res.iterations;
  report.diagnostics.final_gap = res.trace.empty() ? 0.0 : res.trace.back().gap;
  report.diagnostics.rate_bound = rate_bound(regime, report.n, report.m, stats);

  report.t_alpha = critical_value(regime, alpha, report.n, report.m, stats);
  report.decision = report.statistic >= report.t_alpha ? Decision::Reject : Decision::Accept;
  const PValueBound p = p_value_bound(regime, report.statistic, report.n, report.m, stats);
  report.p_value_bound = p.bound;
  report.p_value_valid = p.valid;
  report.type2_bound = alpha;
  return report;
}

inline TestReport run_test(const Eigen::MatrixXd& mu_samples, const Eigen::MatrixXd& nu_samples,
                           const Regime& regime, double alpha, const SolverConfig& solver = {}) {
  return run_test(empirical_from_samples(mu_samples), empirical_from_samples(nu_samples), regime,
                  alpha, solver);
}

}  // namespace cvxorder

#endif  // CVXORDER_HYPOTHESIS_HPP
