#include "zee/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "zee/calibration.hpp"
#include "zee/log.hpp"
#include "zee/rng.hpp"
#include "zee/variance.hpp"

namespace zee {

namespace {

constexpr std::uint64_t kPseudoTrueStream = 0x70736575ULL << 16;

double clamp(double x, double lo, double hi) {
  return std::min(hi, std::max(lo, x));
}

}  // namespace

double DgpConfig::hazard_floor() const {
  double floor = baseline;
  for (int j = 0; j < p(); ++j) {
    const auto& [lo, hi] = covariate_ranges[j];
    floor += std::min(theta0[j] * lo, theta0[j] * hi);
  }
  return floor;
}

void DgpConfig::check() const {
  if (n <= 0) fail(ErrorCode::ConfigError, "sample size must be positive");
  if (replicates <= 0)
    fail(ErrorCode::ConfigError, "replicate count must be positive");
  if (!(baseline > 0.0))
    fail(ErrorCode::ConfigError, "baseline hazard must be positive");
  if (theta0.size() != p())
    fail(ErrorCode::ConfigError,
         "theta0 dimension must match the covariate ranges");
  for (const auto& [lo, hi] : covariate_ranges)
    if (!(lo < hi)) fail(ErrorCode::ConfigError, "empty covariate range");
  if (!(tau > 0.0)) fail(ErrorCode::ConfigError, "tau must be positive");
  if (!(c_max > tau))
    fail(ErrorCode::ConfigError,
         "censoring bound must exceed tau so that Pr(C = tau) > 0");
  if (!misspecify && !(hazard_floor() > 0.0))
    fail(ErrorCode::ConfigError,
         "hazard floor is not positive on the covariate range");
  if (misspecify && ph_beta.size() != p())
    fail(ErrorCode::ConfigError,
         "ph_beta dimension must match the covariate ranges");
  if (auxiliary.surrogate && p() == 0)
    fail(ErrorCode::ConfigError, "surrogate auxiliary needs a covariate");
  switch (sampling.kind) {
    case SamplingDesign::Kind::CaseControl:
      if (!(sampling.pi_event > 0.0) || sampling.pi_event > 1.0 ||
          !(sampling.pi_nonevent > 0.0) || sampling.pi_nonevent > 1.0)
        fail(ErrorCode::ConfigError, "selection probabilities must lie in (0, 1]");
      break;
    case SamplingDesign::Kind::Continuous:
      if (!(sampling.floor > 0.0) || sampling.floor > 1.0)
        fail(ErrorCode::ConfigError, "selection floor must lie in (0, 1]");
      break;
  }
}

ReplicateViews generate_views(const DgpConfig& config, int rep) {
  config.check();
  Rng rng(config.seed, static_cast<std::uint64_t>(rep));

  const int p = config.p();
  const int q = config.auxiliary.dim();
  std::vector<SubjectRecord> complete, masked;
  complete.reserve(config.n);
  masked.reserve(config.n);

  for (int i = 0; i < config.n; ++i) {
    Vector z(p);
    for (int j = 0; j < p; ++j)
      z[j] = rng.uniform(config.covariate_ranges[j].first,
                         config.covariate_ranges[j].second);

    const double rate = config.misspecify
                            ? config.baseline * std::exp(z.dot(config.ph_beta))
                            : config.baseline + z.dot(config.theta0);
    const double t_event = rng.exponential(rate);
    const double censor = std::min(rng.uniform(0.0, config.c_max), config.tau);
    const double time = std::min(t_event, censor);
    const int event = t_event <= censor ? 1 : 0;

    double surrogate = 0.0;
    if (config.auxiliary.surrogate || config.sampling.kind ==
                                          SamplingDesign::Kind::Continuous)
      surrogate = z[0] + config.auxiliary.noise_sd * rng.normal();

    double pi = 1.0;
    switch (config.sampling.kind) {
      case SamplingDesign::Kind::CaseControl:
        pi = event ? config.sampling.pi_event : config.sampling.pi_nonevent;
        break;
      case SamplingDesign::Kind::Continuous:
        pi = clamp(config.sampling.base + config.sampling.slope * surrogate,
                   config.sampling.floor, 1.0);
        break;
    }
    const int selected = rng.bernoulli(pi) ? 1 : 0;

    Vector aux(q);
    {
      int k = 0;
      if (config.auxiliary.intercept) aux[k++] = 1.0;
      if (config.auxiliary.surrogate) aux[k++] = surrogate;
      if (config.auxiliary.event) aux[k++] = event;
    }
    Vector phase1(2);
    phase1 << event, surrogate;

    SubjectRecord full;
    full.time = time;
    full.event = event;
    full.covariates = z;
    full.phase1 = phase1;
    full.auxiliary = aux;
    full.selected = 1;
    full.sampling_prob = 1.0;
    complete.push_back(full);

    SubjectRecord two_phase = full;
    two_phase.selected = selected;
    two_phase.sampling_prob = pi;
    if (!selected) two_phase.covariates.reset();
    masked.push_back(std::move(two_phase));
  }

  return ReplicateViews{Dataset(std::move(complete), config.tau, config.sigma),
                        Dataset(std::move(masked), config.tau, config.sigma)};
}

Dataset generate(const DgpConfig& config, int rep) {
  return generate_views(config, rep).masked;
}

PseudoTrue pseudo_true(const DgpConfig& config, long n_large) {
  DgpConfig big = config;
  big.n = static_cast<int>(n_large);
  big.sampling.kind = SamplingDesign::Kind::CaseControl;
  big.sampling.pi_event = 1.0;
  big.sampling.pi_nonevent = 1.0;
  big.check();

  // one complete-data sample on a reserved stream
  DgpConfig streamed = big;
  streamed.seed = big.seed ^ kPseudoTrueStream;
  const ReplicateViews views = generate_views(streamed, 0);

  const WeightScheme unit = WeightScheme::unit();
  const FitResult fit = fit_additive_hazards(views.complete, unit);
  FitAnalysis analysis(views.complete, unit, fit);
  const Matrix rows = analysis.influence_theta();
  const VarianceEstimate var = analysis.robust_variance(rows);

  PseudoTrue out;
  out.theta = fit.theta;
  out.theta_se =
      (var.value.diagonal() / static_cast<double>(n_large)).cwiseSqrt();
  out.lambda = fit.lambda;
  out.n_large = static_cast<double>(n_large);
  return out;
}

namespace {

// one replicate: all three schemes, point estimates, robust and model SEs
ReplicateOutcome one_replicate(const DgpConfig& config,
                               const ExperimentTargets& targets, int rep) {
  ReplicateOutcome out;
  const int p = config.p();
  const int cols = p + 2;
  out.est.setZero(kSchemeCount, cols);
  out.se_robust.setZero(kSchemeCount, cols);
  out.se_model.setZero(kSchemeCount, cols);

  try {
    const ReplicateViews views = generate_views(config, rep);
    const double s = targets.s_star;
    const Vector& zs = targets.z_star;

    for (int sc = 0; sc < kSchemeCount; ++sc) {
      const Dataset& data = sc == 0 ? views.complete : views.masked;
      WeightScheme scheme = WeightScheme::unit();
      if (sc == 1) scheme = WeightScheme::ipw();
      if (sc == 2)
        scheme = WeightScheme::calibrated(solve_gamma(views.masked).gamma);

      const FitResult fit = fit_additive_hazards(data, scheme);
      FitAnalysis analysis(data, scheme, fit);

      for (int j = 0; j < p; ++j) out.est(sc, j) = fit.theta[j];
      out.est(sc, p) = fit.lambda(s);
      out.est(sc, p + 1) = predict_cumhaz(fit, zs, s);

      const Matrix theta_rows = analysis.influence_theta();
      const Vector lambda_rows = analysis.influence_lambda(s);
      const Vector pred_rows = analysis.influence_pred(s, zs);

      const VarianceEstimate vtr = analysis.robust_variance(theta_rows);
      const VarianceEstimate vlr = analysis.robust_variance(lambda_rows);
      const VarianceEstimate vpr = analysis.robust_variance(pred_rows);
      const VarianceEstimate vtm =
          analysis.model_based_variance(ThetaTarget{}, theta_rows);
      const VarianceEstimate vlm =
          analysis.model_based_variance(LambdaTarget{s}, lambda_rows);
      const VarianceEstimate vpm =
          analysis.model_based_variance(PredTarget{s, zs}, pred_rows);

      const double n = data.size();
      for (int j = 0; j < p; ++j) {
        out.se_robust(sc, j) = std::sqrt(vtr.value(j, j) / n);
        out.se_model(sc, j) = std::sqrt(vtm.value(j, j) / n);
      }
      out.se_robust(sc, p) = std::sqrt(vlr.scalar() / n);
      out.se_model(sc, p) = std::sqrt(vlm.scalar() / n);
      out.se_robust(sc, p + 1) = std::sqrt(vpr.scalar() / n);
      out.se_model(sc, p + 1) = std::sqrt(vpm.scalar() / n);

      // penalty traces on the ipw rows with matching projection moments
      if (sc == 1) {
        auto [vps, cal] = analysis.penalty_pair(theta_rows, true);
        out.trace_vps = vps.trace();
        out.trace_cal = cal.trace();
      }
    }
    out.ok = true;
  } catch (const Error& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

}  // namespace

std::vector<ReplicateOutcome> run_replicates(const DgpConfig& config,
                                             const ExperimentTargets& targets,
                                             int jobs) {
  config.check();
  if (targets.z_star.size() != config.p())
    fail(ErrorCode::ConfigError, "z_star dimension must match the covariates");
  if (!(targets.s_star >= 0.0) || targets.s_star > config.tau)
    fail(ErrorCode::ConfigError, "s_star must lie in [0, tau]");

  const int reps = config.replicates;
  std::vector<ReplicateOutcome> outcomes(reps);
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, reps));

  if (jobs == 1) {
    for (int r = 0; r < reps; ++r)
      outcomes[r] = one_replicate(config, targets, r);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= reps) return;
        outcomes[r] = one_replicate(config, targets, r);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return outcomes;
}

MetricsReport summarize(const DgpConfig& config,
                        const ExperimentTargets& targets, double alpha,
                        const std::vector<ReplicateOutcome>& outcomes) {
  const int p = config.p();
  const int cols = p + 2;
  const double zq = normal_quantile(1.0 - alpha / 2.0);

  MetricsReport report;
  report.alpha = alpha;
  report.s_star = targets.s_star;
  report.z_star = targets.z_star;
  report.seed = config.seed;
  report.n = config.n;
  report.replicates = static_cast<int>(outcomes.size());

  // truth: model parameters, or the pseudo-true root under misspecification
  report.pseudo_true_targets = config.misspecify;
  if (config.misspecify) {
    const PseudoTrue pt = pseudo_true(config);
    report.truth_theta = pt.theta;
    report.truth_lambda = pt.lambda(targets.s_star);
    report.truth_pred =
        pt.lambda(targets.s_star) +
        targets.z_star.dot(pt.theta) * targets.s_star;
    log::info("pseudo-true theta computed with max SE " +
              std::to_string(pt.theta_se.maxCoeff()));
  } else {
    report.truth_theta = config.theta0;
    report.truth_lambda = config.baseline * targets.s_star;
    report.truth_pred = report.truth_lambda +
                        targets.z_star.dot(config.theta0) * targets.s_star;
  }

  std::vector<const ReplicateOutcome*> good;
  for (const auto& o : outcomes)
    if (o.ok) good.push_back(&o);
  report.failures = report.replicates - static_cast<int>(good.size());

  const double r = static_cast<double>(good.size());
  if (good.empty()) {
    report.valid = false;
    report.invalid_reason = "every replicate failed";
    return report;
  }

  static const char* scheme_names[] = {"rs", "ipw", "cal"};
  for (int sc = 0; sc < kSchemeCount; ++sc) {
    for (int c = 0; c < cols; ++c) {
      EstimandMetrics cell;
      cell.scheme = scheme_names[sc];
      cell.estimand = c < p ? "theta" + std::to_string(c + 1)
                            : (c == p ? "lambda" : "pred");
      cell.truth = c < p ? report.truth_theta[c]
                         : (c == p ? report.truth_lambda : report.truth_pred);

      double mean = 0.0;
      for (const auto* o : good) mean += o->est(sc, c);
      mean /= r;

      double m2 = 0.0, m4 = 0.0, se_r_mean = 0.0, se_m_mean = 0.0;
      double cov_r = 0.0, cov_m = 0.0;
      for (const auto* o : good) {
        const double d = o->est(sc, c) - mean;
        m2 += d * d;
        m4 += d * d * d * d;
        se_r_mean += o->se_robust(sc, c);
        se_m_mean += o->se_model(sc, c);
        const double err = o->est(sc, c) - cell.truth;
        if (std::abs(err) <= zq * o->se_robust(sc, c)) cov_r += 1.0;
        if (std::abs(err) <= zq * o->se_model(sc, c)) cov_m += 1.0;
      }
      const double var = r > 1 ? m2 / (r - 1.0) : 0.0;
      m4 /= r;

      cell.mean = mean;
      cell.bias = mean - cell.truth;
      cell.mc_var = var;
      cell.mc_sd = std::sqrt(var);
      cell.mc_se_mean = cell.mc_sd / std::sqrt(r);
      cell.mc_var_se =
          r > 1 ? std::sqrt(std::max(0.0, m4 - var * var) / r) : 0.0;
      cell.se_robust_mean = se_r_mean / r;
      cell.se_model_mean = se_m_mean / r;
      cell.ratio_robust = cell.mc_sd > 0 ? cell.se_robust_mean / cell.mc_sd : 0;
      cell.ratio_model = cell.mc_sd > 0 ? cell.se_model_mean / cell.mc_sd : 0;
      cell.coverage_robust = cov_r / r;
      cell.coverage_model = cov_m / r;
      cell.coverage_se = std::sqrt(
          std::max(cell.coverage_robust * (1.0 - cell.coverage_robust), 1e-12) /
          r);
      report.cells.push_back(std::move(cell));
    }
  }

  double tv = 0.0, tc = 0.0;
  int violations = 0;
  for (const auto* o : good) {
    tv += o->trace_vps;
    tc += o->trace_cal;
    if (o->trace_cal > o->trace_vps * (1.0 + 1e-12) + 1e-15) ++violations;
  }
  report.penalty_trace_vps_mean = tv / r;
  report.penalty_trace_cal_mean = tc / r;
  report.penalty_violations = violations;

  if (report.failures > 0.01 * report.replicates) {
    report.valid = false;
    report.invalid_reason = "more than 1% of replicates failed";
  } else {
    report.valid = true;
  }
  return report;
}

MetricsReport run_experiment(const DgpConfig& config,
                             const ExperimentTargets& targets, double alpha,
                             int jobs) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    fail(ErrorCode::ConfigError, "alpha must lie in (0, 1)");
  const auto outcomes = run_replicates(config, targets, jobs);
  return summarize(config, targets, alpha, outcomes);
}

double normal_quantile(double prob) {
  if (!(prob > 0.0) || !(prob < 1.0))
    fail(ErrorCode::DomainError, "quantile level must lie in (0, 1)");
  // Acklam's rational approximation
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, x;
  if (prob < plow) {
    q = std::sqrt(-2.0 * std::log(prob));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (prob <= 1.0 - plow) {
    q = prob - 0.5;
    const double s = q * q;
    x = (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) *
        q /
        (((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0);
  } else {
    q = std::sqrt(-2.0 * std::log(1.0 - prob));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  return x;
}

}  // namespace zee
