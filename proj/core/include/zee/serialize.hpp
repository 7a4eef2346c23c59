#pragma once

#include <optional>
#include <string>
#include <vector>

#include "zee/calibration.hpp"
#include "zee/fit.hpp"
#include "zee/simulate.hpp"
#include "zee/variance.hpp"

namespace zee {

struct PredictionOutput {
  Vector z;
  double s = 0.0;
  double estimate = 0.0;
  std::optional<double> se_robust;
  std::optional<double> se_model;
};

// Everything the fit command emits. JSON layout is pinned by
// schemas/fit_result-v1.schema.json.
struct FitOutput {
  int n = 0;
  double tau = 0.0;
  FitResult fit;
  std::optional<Matrix> var_theta_robust;  // estimator variance (already /N)
  std::optional<Matrix> var_theta_model;
  std::vector<PredictionOutput> predictions;
  std::optional<CalibrationSolution> calibration;
  std::optional<double> oracle_max_residual;
  std::optional<double> oracle_root_gap;
};

std::string fit_output_json(const FitOutput& out, int indent = 2);

// layout pinned by schemas/calibration-v1.schema.json
std::string calibration_json(const CalibrationSolution& sol, int n,
                             int indent = 2);

// layout pinned by schemas/simulation_report-v1.schema.json
std::string report_json(const MetricsReport& report, int indent = 2);

// human-readable companion table
std::string report_text(const MetricsReport& report);

}  // namespace zee
