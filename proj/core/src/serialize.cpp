#include "zee/serialize.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "zee/version.hpp"

namespace zee {

namespace {

using nlohmann::json;

json vec_json(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json curve_json(const CumulativeHazard& lambda) {
  json j;
  j["knots"] = lambda.knots();
  j["atoms"] = lambda.atoms();
  j["slopes"] = lambda.slopes();
  json values = json::array();
  for (double t : lambda.knots()) values.push_back(lambda(t));
  j["values"] = std::move(values);
  return j;
}

json calibration_body(const CalibrationSolution& sol) {
  json j;
  j["gamma"] = vec_json(sol.gamma);
  j["weights"] = vec_json(sol.weights);
  j["constraint_residual"] = vec_json(sol.constraint_residual);
  j["residual_max_norm"] =
      sol.constraint_residual.size()
          ? sol.constraint_residual.cwiseAbs().maxCoeff()
          : 0.0;
  j["deviance"] = sol.deviance;
  j["iterations"] = sol.iterations;
  j["converged"] = sol.converged;
  return j;
}

}  // namespace

std::string fit_output_json(const FitOutput& out, int indent) {
  json j;
  j["schema"] = "fit_result-v1";
  j["schema_version"] = kSchemaVersion;
  j["library_version"] = kVersion;
  j["n"] = out.n;
  j["tau"] = out.tau;
  j["scheme"] = out.fit.scheme.name();
  j["theta"] = vec_json(out.fit.theta);
  j["lambda"] = curve_json(out.fit.lambda);
  j["a_matrix"] = mat_json(out.fit.a_matrix);
  j["b_matrix"] = mat_json(out.fit.b_matrix);

  json diag;
  diag["a_condition"] = out.fit.a_condition;
  j["diagnostics"] = std::move(diag);

  json var;
  if (out.var_theta_robust) {
    var["theta_robust"] = mat_json(*out.var_theta_robust);
    Vector se = out.var_theta_robust->diagonal().cwiseSqrt();
    j["se_robust"] = vec_json(se);
  }
  if (out.var_theta_model) {
    var["theta_model"] = mat_json(*out.var_theta_model);
    Vector se = out.var_theta_model->diagonal().cwiseSqrt();
    j["se_model"] = vec_json(se);
  }
  j["variance"] = std::move(var);

  json preds = json::array();
  for (const auto& p : out.predictions) {
    json pj;
    pj["z"] = vec_json(p.z);
    pj["s"] = p.s;
    pj["estimate"] = p.estimate;
    if (p.se_robust) pj["se_robust"] = *p.se_robust;
    if (p.se_model) pj["se_model"] = *p.se_model;
    preds.push_back(std::move(pj));
  }
  j["predictions"] = std::move(preds);

  if (out.calibration) j["calibration"] = calibration_body(*out.calibration);
  if (out.oracle_max_residual)
    j["oracle_max_residual"] = *out.oracle_max_residual;
  if (out.oracle_root_gap) j["oracle_root_gap"] = *out.oracle_root_gap;

  return j.dump(indent);
}

std::string calibration_json(const CalibrationSolution& sol, int n,
                             int indent) {
  json j;
  j["schema"] = "calibration-v1";
  j["schema_version"] = kSchemaVersion;
  j["library_version"] = kVersion;
  j["n"] = n;
  json body = calibration_body(sol);
  j.update(body);
  return j.dump(indent);
}

std::string report_json(const MetricsReport& report, int indent) {
  json j;
  j["schema"] = "simulation_report-v1";
  j["schema_version"] = kSchemaVersion;
  j["library_version"] = kVersion;
  j["n"] = report.n;
  j["seed"] = report.seed;
  j["alpha"] = report.alpha;
  j["replicates"] = report.replicates;
  j["failures"] = report.failures;
  j["valid"] = report.valid;
  if (!report.valid) j["invalid_reason"] = report.invalid_reason;
  j["s_star"] = report.s_star;
  j["z_star"] = vec_json(report.z_star);

  json truth;
  truth["pseudo_true"] = report.pseudo_true_targets;
  truth["theta"] = vec_json(report.truth_theta);
  truth["lambda"] = report.truth_lambda;
  truth["pred"] = report.truth_pred;
  j["truth"] = std::move(truth);

  json cells = json::array();
  for (const auto& c : report.cells) {
    json cj;
    cj["scheme"] = c.scheme;
    cj["estimand"] = c.estimand;
    cj["truth"] = c.truth;
    cj["mean"] = c.mean;
    cj["bias"] = c.bias;
    cj["mc_sd"] = c.mc_sd;
    cj["mc_var"] = c.mc_var;
    cj["mc_se_mean"] = c.mc_se_mean;
    cj["mc_var_se"] = c.mc_var_se;
    cj["se_robust_mean"] = c.se_robust_mean;
    cj["se_model_mean"] = c.se_model_mean;
    cj["ratio_robust"] = c.ratio_robust;
    cj["ratio_model"] = c.ratio_model;
    cj["coverage_robust"] = c.coverage_robust;
    cj["coverage_model"] = c.coverage_model;
    cj["coverage_se"] = c.coverage_se;
    cells.push_back(std::move(cj));
  }
  j["results"] = std::move(cells);

  json pen;
  pen["vps_trace_mean"] = report.penalty_trace_vps_mean;
  pen["cal_trace_mean"] = report.penalty_trace_cal_mean;
  pen["violations"] = report.penalty_violations;
  j["penalty_check"] = std::move(pen);

  return j.dump(indent);
}

std::string report_text(const MetricsReport& report) {
  std::ostringstream out;
  char line[256];

  out << "simulation report  n=" << report.n
      << "  replicates=" << report.replicates
      << "  failures=" << report.failures << "  alpha=" << report.alpha
      << "\n";
  out << (report.pseudo_true_targets ? "targets: pseudo-true (misspecified model)"
                                     : "targets: model parameters")
      << "   s*=" << report.s_star << "\n\n";

  std::snprintf(line, sizeof(line), "%-5s %-8s %10s %10s %9s %9s %9s %8s %8s %7s %7s\n",
                "schm", "estimand", "truth", "mean", "bias", "mc_sd",
                "se_rob", "se_mod", "ratio_r", "cov_r", "cov_m");
  out << line;
  for (const auto& c : report.cells) {
    std::snprintf(line, sizeof(line),
                  "%-5s %-8s %10.5f %10.5f %9.5f %9.5f %9.5f %8.5f %8.3f %7.3f %7.3f\n",
                  c.scheme.c_str(), c.estimand.c_str(), c.truth, c.mean,
                  c.bias, c.mc_sd, c.se_robust_mean, c.se_model_mean,
                  c.ratio_robust, c.coverage_robust, c.coverage_model);
    out << line;
  }
  out << "\npenalty traces (same-moment projection): vps="
      << report.penalty_trace_vps_mean
      << " cal=" << report.penalty_trace_cal_mean
      << " violations=" << report.penalty_violations << "\n";
  if (!report.valid) out << "REPORT INVALID: " << report.invalid_reason << "\n";
  return out.str();
}

}  // namespace zee
