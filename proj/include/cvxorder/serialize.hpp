#ifndef CVXORDER_SERIALIZE_HPP
#define CVXORDER_SERIALIZE_HPP

#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvxorder/errors.hpp"
#include "cvxorder/hypothesis.hpp"
#include "cvxorder/measure.hpp"
#include "cvxorder/projection.hpp"

namespace cvxorder {

// Every JSON document carries this tag so downstream tooling can detect
// format changes.
inline constexpr const char* kJsonSchema = "cvxorder/1";

inline nlohmann::json to_json(const Regime& regime) {
  nlohmann::json j;
  if (const auto* ls = std::get_if<LogSobolev>(&regime.law)) {
    j["kind"] = "log-sobolev";
    j["kappa"] = ls->kappa;
  } else {
    const auto& bs = std::get<BoundedSupport>(regime.law);
    j["kind"] = "bounded";
    j["diameter"] = bs.diameter;
    j["k1"] = bs.k1;
    j["k2"] = bs.k2;
    j["c_const"] = bs.c_const;
  }
  j["dimension"] = regime.dimension;
  return j;
}

inline nlohmann::json to_json(const RateBound& rb) {
  return {{"epsilon", rb.epsilon}, {"probability", rb.probability}};
}

inline nlohmann::json to_json(const TestDiagnostics& d) {
  return {{"m5_mu", d.m5_mu},
          {"m5_nu", d.m5_nu},
          {"diameter_used", d.diameter_used},
          {"diameter_estimated", d.diameter_estimated},
          {"solver_converged", d.solver_converged},
          {"solver_iterations", d.solver_iterations},
          {"final_gap", d.final_gap},
          {"rate_bound", to_json(d.rate_bound)}};
}

inline nlohmann::json to_json(const TestReport& r) {
  nlohmann::json j;
  j["schema"] = kJsonSchema;
  j["statistic"] = r.statistic;
  j["t_alpha"] = r.t_alpha;
  j["alpha"] = r.alpha;
  j["decision"] = r.decision == Decision::Reject ? "reject" : "accept";
  j["p_value_bound"] = r.p_value_bound;
  j["p_value_valid"] = r.p_value_valid;
  j["regime"] = to_json(r.regime);
  j["n"] = r.n;
  j["m"] = r.m;
  j["type2_bound"] = r.type2_bound;
  j["diagnostics"] = to_json(r.diagnostics);
  return j;
}

// Summary form of a projection solve; the per-iteration trace and the
// projected measure travel as CSV, not JSON.
inline nlohmann::json to_json(const ProjectionResult& res) {
  nlohmann::json j;
  j["schema"] = kJsonSchema;
  j["distance"] = res.distance;
  j["iterations"] = res.iterations;
  j["converged"] = res.converged;
  j["final_objective"] = res.distance * res.distance;
  j["final_gap"] = res.trace.empty() ? 0.0 : res.trace.back().gap;
  j["trace_rows"] = res.trace.size();
  return j;
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace) {
  os << "k,objective,gap,step,epsilon\n";
  for (const auto& rec : trace) {
    os << rec.k << "," << detail::format_double(rec.objective) << ","
       << detail::format_double(rec.gap) << "," << detail::format_double(rec.step) << ","
       << detail::format_double(rec.epsilon) << "\n";
  }
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw invalid_input("cannot open for writing: " + path);
  write_trace_csv(os, trace);
}

}  // namespace cvxorder

#endif  // CVXORDER_SERIALIZE_HPP
