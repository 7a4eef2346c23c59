#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zee/fit.hpp"
#include "zee/types.hpp"

namespace zee {

// Phase-II selection probability as a function of the phase-I variables.
// CaseControl: pi depends on the event indicator only. Continuous: pi is an
// affine function of the surrogate, clamped to [floor, 1].
struct SamplingDesign {
  enum class Kind { CaseControl, Continuous };
  Kind kind = Kind::CaseControl;
  double pi_event = 1.0;
  double pi_nonevent = 0.25;
  double base = 0.5;
  double slope = 0.2;
  double floor = 0.05;
};

// Which phase-I quantities enter the calibration vector. The surrogate is a
// noisy copy of the first covariate, observed for everyone.
struct AuxiliarySpec {
  bool intercept = true;
  bool surrogate = true;
  bool event = true;
  double noise_sd = 0.1;
  int dim() const {
    return (intercept ? 1 : 0) + (surrogate ? 1 : 0) + (event ? 1 : 0);
  }
};

// Data generating process: covariates are independent uniforms, survival is
// exponential given covariates with rate baseline + z'theta0 (or a
// proportional-hazards alternative when misspecify is set), censoring is
// uniform on [0, c_max] truncated at tau so that Pr(C = tau) > 0.
struct DgpConfig {
  int n = 2000;
  Vector theta0;
  double baseline = 0.5;
  std::vector<std::pair<double, double>> covariate_ranges;
  double tau = 2.0;
  double c_max = 4.0;
  bool misspecify = false;
  Vector ph_beta;  // log hazard ratios under the misspecified alternative
  SamplingDesign sampling;
  AuxiliarySpec auxiliary;
  std::uint64_t seed = 1;
  int replicates = 1000;
  double sigma = 1e-6;

  int p() const { return static_cast<int>(covariate_ranges.size()); }
  double hazard_floor() const;
  void check() const;  // ConfigError on invariant violations
};

// The same draws seen two ways: complete records (every covariate observed,
// selected = 1, probability 1) for the random-sampling estimator, and the
// masked two-phase view where unselected subjects lose their covariates.
struct ReplicateViews {
  Dataset complete;
  Dataset masked;
};

ReplicateViews generate_views(const DgpConfig& config, int rep);

// The masked two-phase dataset for replicate rep; deterministic in
// (config.seed, rep).
Dataset generate(const DgpConfig& config, int rep);

// Root of the population estimating equation under the configured DGP,
// approximated by one closed-form random-sampling fit on a large complete
// sample. theta_se bounds the Monte Carlo uncertainty per coordinate.
struct PseudoTrue {
  Vector theta;
  Vector theta_se;
  CumulativeHazard lambda = CumulativeHazard::zero(1.0);
  double n_large = 0;
};

PseudoTrue pseudo_true(const DgpConfig& config, long n_large = 1000000);

struct ExperimentTargets {
  double s_star = 1.0;
  Vector z_star;
};

// scheme x estimand layout used by the replicate matrices:
// rows 0..2 = rs, ipw, cal; columns 0..p-1 = theta coordinates,
// column p = Lambda(s*), column p+1 = Lambda(s*|z*)
inline constexpr int kSchemeCount = 3;

struct ReplicateOutcome {
  bool ok = false;
  std::string error;
  Matrix est;      // kSchemeCount x (p+2)
  Matrix se_robust;
  Matrix se_model;
  // same-moments penalty traces for the theta target on the ipw rows
  double trace_vps = 0.0;
  double trace_cal = 0.0;
};

std::vector<ReplicateOutcome> run_replicates(const DgpConfig& config,
                                             const ExperimentTargets& targets,
                                             int jobs = 1);

struct EstimandMetrics {
  std::string scheme;
  std::string estimand;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double mc_sd = 0.0;
  double mc_var = 0.0;
  double mc_se_mean = 0.0;   // sd / sqrt(R)
  double mc_var_se = 0.0;    // se of the MC variance
  double se_robust_mean = 0.0;
  double se_model_mean = 0.0;
  double ratio_robust = 0.0;  // mean robust SE / MC sd
  double ratio_model = 0.0;
  double coverage_robust = 0.0;
  double coverage_model = 0.0;
  double coverage_se = 0.0;
};

struct MetricsReport {
  double alpha = 0.05;
  double s_star = 0.0;
  Vector z_star;
  int replicates = 0;
  int failures = 0;
  bool valid = false;
  std::string invalid_reason;
  bool pseudo_true_targets = false;
  Vector truth_theta;
  double truth_lambda = 0.0;
  double truth_pred = 0.0;
  std::vector<EstimandMetrics> cells;
  double penalty_trace_vps_mean = 0.0;
  double penalty_trace_cal_mean = 0.0;
  int penalty_violations = 0;  // replicates with cal trace above vps trace
  std::uint64_t seed = 0;
  int n = 0;
};

MetricsReport summarize(const DgpConfig& config,
                        const ExperimentTargets& targets, double alpha,
                        const std::vector<ReplicateOutcome>& outcomes);

// run_replicates + summarize; per-replicate errors are aggregated and the
// report is marked invalid when more than 1% of replicates fail.
MetricsReport run_experiment(const DgpConfig& config,
                             const ExperimentTargets& targets,
                             double alpha = 0.05, int jobs = 1);

// inverse standard normal CDF (Acklam's rational approximation, |rel err| < 1e-9)
double normal_quantile(double prob);

}  // namespace zee
