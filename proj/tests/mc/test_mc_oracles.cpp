#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "../support/test_util.hpp"
#include "zee/calibration.hpp"
#include "zee/simulate.hpp"
#include "zee/variance.hpp"

using namespace zee;
using zee::test::make_dataset;
using zee::test::Row;
using zee::test::vec;

namespace {

// desk-scale generator for the small-sample Monte Carlo checks: a nearly
// balanced two-point covariate design keeps the design matrix stable, and a
// large censoring atom at tau keeps the risk set alive. At very small n the
// plug-in sandwich is biased low by O(1/n) (every event's own fitted jump
// absorbs part of its residual), so these agreement checks run at n = 30;
// the exact per-subject sensitivity identity is tested separately at n = 6.
Dataset small_draw(Rng& rng, int n) {
  for (;;) {
    std::vector<Row> rows;
    bool reaches_tau = false;
    for (int i = 0; i < n; ++i) {
      Row r;
      const double z = (i % 2 ? 0.5 : -0.5) + 0.05 * rng.normal();
      const double rate = 0.4 + 0.2 * z;
      const double t_event = rng.exponential(rate);
      const double censor = std::min(rng.uniform(0.0, 5.0), 0.5);
      r.time = std::min(t_event, censor);
      r.event = t_event <= censor ? 1 : 0;
      r.z = vec({z});
      if (r.time >= 0.5) reaches_tau = true;
      rows.push_back(std::move(r));
    }
    if (!reaches_tau) continue;
    try {
      return make_dataset(rows, 0.5);
    } catch (const Error&) {
      continue;
    }
  }
}

struct McAccumulator {
  std::vector<double> estimates;
  double var_sum = 0.0;
  int count = 0;

  void add(double est, double var_over_n) {
    estimates.push_back(est);
    var_sum += var_over_n;
    ++count;
  }
  double mc_variance() const {
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= estimates.size();
    double v = 0.0;
    for (double e : estimates) v += (e - mean) * (e - mean);
    return v / (estimates.size() - 1.0);
  }
  double mean_estimated() const { return var_sum / count; }
  double ratio() const { return mean_estimated() / mc_variance(); }
};

void check_within(double ratio, double tol) {
  CHECK(ratio >= 1.0 - tol);
  CHECK(ratio <= 1.0 + tol);
}

}  // namespace

TEST_CASE("mc: theta influence rows track the small-sample variance") {
  Rng rng(101);
  McAccumulator acc;
  while (acc.count < 2000) {
    const Dataset ds = small_draw(rng, 30);
    try {
      const WeightScheme scheme = WeightScheme::unit();
      const FitResult fit = fit_additive_hazards(ds, scheme);
      FitAnalysis analysis(ds, scheme, fit);
      const VarianceEstimate v =
          analysis.robust_variance(analysis.influence_theta());
      acc.add(fit.theta[0], v.value(0, 0) / ds.size());
    } catch (const Error&) {
      continue;
    }
  }
  MESSAGE("theta variance ratio (estimated/mc): " << acc.ratio());
  check_within(acc.ratio(), 0.15);
}

TEST_CASE("mc: lambda influence rows at the median event time") {
  Rng rng(202);
  const double s = 0.25;
  McAccumulator acc;
  while (acc.count < 2000) {
    const Dataset ds = small_draw(rng, 30);
    try {
      const WeightScheme scheme = WeightScheme::unit();
      const FitResult fit = fit_additive_hazards(ds, scheme);
      FitAnalysis analysis(ds, scheme, fit);
      const Vector rows = analysis.influence_lambda(s);
      const VarianceEstimate v = analysis.robust_variance(rows);
      acc.add(fit.lambda(s), v.scalar() / ds.size());
    } catch (const Error&) {
      continue;
    }
  }
  MESSAGE("lambda variance ratio: " << acc.ratio());
  check_within(acc.ratio(), 0.15);
}

TEST_CASE("mc: prediction influence rows") {
  Rng rng(303);
  const double s = 0.3;
  const Vector z = vec({0.4});
  McAccumulator acc;
  while (acc.count < 2000) {
    const Dataset ds = small_draw(rng, 30);
    try {
      const WeightScheme scheme = WeightScheme::unit();
      const FitResult fit = fit_additive_hazards(ds, scheme);
      FitAnalysis analysis(ds, scheme, fit);
      const Vector rows = analysis.influence_pred(s, z);
      const VarianceEstimate v = analysis.robust_variance(rows);
      acc.add(predict_cumhaz(fit, z, s), v.scalar() / ds.size());
    } catch (const Error&) {
      continue;
    }
  }
  MESSAGE("prediction variance ratio: " << acc.ratio());
  check_within(acc.ratio(), 0.15);
}

TEST_CASE("mc: two-phase robust variance tracks the IPW estimator") {
  DgpConfig cfg;
  cfg.n = 400;
  cfg.theta0 = vec({0.5, -0.3});
  cfg.baseline = 0.5;
  cfg.covariate_ranges = {{0.0, 1.0}, {0.0, 1.0}};
  cfg.tau = 2.0;
  cfg.c_max = 4.0;
  cfg.seed = 404;
  cfg.replicates = 1000;

  McAccumulator acc0, acc1;
  for (int rep = 0; rep < cfg.replicates; ++rep) {
    try {
      const Dataset ds = generate(cfg, rep);
      const WeightScheme scheme = WeightScheme::ipw();
      const FitResult fit = fit_additive_hazards(ds, scheme);
      FitAnalysis analysis(ds, scheme, fit);
      const VarianceEstimate v =
          analysis.robust_variance(analysis.influence_theta());
      acc0.add(fit.theta[0], v.value(0, 0) / ds.size());
      acc1.add(fit.theta[1], v.value(1, 1) / ds.size());
    } catch (const Error&) {
      continue;
    }
  }
  MESSAGE("ipw theta1 ratio: " << acc0.ratio() << "  theta2 ratio: "
                               << acc1.ratio());
  check_within(acc0.ratio(), 0.12);
  check_within(acc1.ratio(), 0.12);
}

TEST_CASE("mc: model-based and robust variances agree under the model") {
  DgpConfig cfg;
  cfg.n = 400;
  cfg.theta0 = vec({0.5, -0.3});
  cfg.baseline = 0.5;
  cfg.covariate_ranges = {{0.0, 1.0}, {0.0, 1.0}};
  cfg.tau = 2.0;
  cfg.c_max = 4.0;
  cfg.seed = 505;
  cfg.replicates = 1000;

  McAccumulator robust, model;
  for (int rep = 0; rep < cfg.replicates; ++rep) {
    try {
      const ReplicateViews views = generate_views(cfg, rep);
      const WeightScheme scheme = WeightScheme::unit();
      const FitResult fit = fit_additive_hazards(views.complete, scheme);
      FitAnalysis analysis(views.complete, scheme, fit);
      const Matrix rows = analysis.influence_theta();
      robust.add(fit.theta[0],
                 analysis.robust_variance(rows).value(0, 0) / cfg.n);
      model.add(fit.theta[0],
                analysis.model_based_variance(ThetaTarget{}, rows).value(0, 0) /
                    cfg.n);
    } catch (const Error&) {
      continue;
    }
  }
  MESSAGE("rs robust ratio: " << robust.ratio()
                              << "  model ratio: " << model.ratio());
  check_within(robust.ratio(), 0.10);
  check_within(model.ratio(), 0.10);
  check_within(model.mean_estimated() / robust.mean_estimated(), 0.10);
}

TEST_CASE("mc: misspecification keeps the robust variance honest") {
  DgpConfig cfg;
  cfg.n = 400;
  cfg.theta0 = vec({0.5, -0.3});
  cfg.baseline = 0.5;
  cfg.covariate_ranges = {{0.0, 1.0}, {0.0, 1.0}};
  cfg.tau = 2.0;
  cfg.c_max = 4.0;
  cfg.misspecify = true;
  cfg.ph_beta = vec({0.9, -0.6});
  cfg.seed = 606;
  cfg.replicates = 1000;

  McAccumulator robust, model;
  for (int rep = 0; rep < cfg.replicates; ++rep) {
    try {
      const ReplicateViews views = generate_views(cfg, rep);
      const WeightScheme scheme = WeightScheme::unit();
      const FitResult fit = fit_additive_hazards(views.complete, scheme);
      FitAnalysis analysis(views.complete, scheme, fit);
      const Matrix rows = analysis.influence_theta();
      robust.add(fit.theta[0],
                 analysis.robust_variance(rows).value(0, 0) / cfg.n);
      model.add(fit.theta[0],
                analysis.model_based_variance(ThetaTarget{}, rows).value(0, 0) /
                    cfg.n);
    } catch (const Error&) {
      continue;
    }
  }
  MESSAGE("misspecified: robust ratio " << robust.ratio()
                                        << ", model ratio (unconstrained) "
                                        << model.ratio());
  check_within(robust.ratio(), 0.15);
}
