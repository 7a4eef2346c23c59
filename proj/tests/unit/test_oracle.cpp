#include <doctest.h>

#include "../support/test_util.hpp"
#include "zee/fit.hpp"
#include "zee/oracle.hpp"

using namespace zee;
using zee::test::make_dataset;
using zee::test::vec;

namespace {

Dataset six_subjects() {
  return make_dataset({{0.4, 1, vec({0.8})},
                       {0.9, 0, vec({-0.2})},
                       {1.3, 1, vec({0.5})},
                       {1.6, 1, vec({-0.7})},
                       {2.0, 0, vec({0.3})},
                       {2.0, 1, vec({1.1})}},
                      2.0);
}

Vector closed_form_jumps(const FitResult& fit, const IndexGrid& grid) {
  Vector jumps = Vector::Zero(static_cast<int>(grid.event_times.size()));
  for (std::size_t k = 0; k < grid.event_times.size(); ++k)
    for (const auto& [t, a] : fit.lambda.jumps())
      if (t == grid.event_times[k]) jumps[static_cast<int>(k)] = a;
  return jumps;
}

}  // namespace

TEST_CASE("ee_residual: zero at the closed form, zero for empty data") {
  const Dataset ds = six_subjects();
  const WeightScheme scheme = WeightScheme::unit();
  const FitResult fit = fit_additive_hazards(ds, scheme);
  const IndexGrid grid = make_index_grid(ds, scheme);
  const Vector jumps = closed_form_jumps(fit, grid);
  for (int idx = 0; idx < grid.size(); ++idx)
    CHECK(std::abs(ee_residual(ds, scheme, fit.theta, jumps, idx)) <= 1e-10);

  // theta = 0, Lambda = 0, no events: every mass term vanishes
  const Dataset none = make_dataset(
      {{0.5, 0, vec({1.0})}, {2.0, 0, vec({-1.0})}}, 2.0);
  const Vector res = ee_residuals(none, scheme, vec({0.0}), Vector(0));
  CHECK(res.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ee_residual: first-order response to a theta perturbation") {
  const Dataset ds = six_subjects();
  const WeightScheme scheme = WeightScheme::unit();
  const FitResult fit = fit_additive_hazards(ds, scheme);
  const IndexGrid grid = make_index_grid(ds, scheme);
  const Vector jumps = closed_form_jumps(fit, grid);

  // with the jumps held fixed the coordinate equations are linear in theta,
  // so the residual equals -(A row 1) * 0.1 exactly
  Vector bumped = fit.theta;
  bumped[0] += 0.1;
  const double res = ee_residual(ds, scheme, bumped, jumps, 0);
  CHECK(res == doctest::Approx(-0.1 * fit.a_matrix(0, 0)).epsilon(1e-10));
  CHECK(res != 0.0);
}

TEST_CASE("solve_ee: an exact root is left in place") {
  const Dataset ds = six_subjects();
  const WeightScheme scheme = WeightScheme::unit();
  const FitResult fit = fit_additive_hazards(ds, scheme);
  const IndexGrid grid = make_index_grid(ds, scheme);
  const Vector jumps = closed_form_jumps(fit, grid);

  const OracleSolution sol = solve_ee(ds, scheme, fit.theta, jumps);
  CHECK(sol.converged);
  CHECK(sol.iterations <= 2);
  CHECK(sol.theta[0] == doctest::Approx(fit.theta[0]).epsilon(1e-12));
  for (int k = 0; k < sol.jumps.size(); ++k)
    CHECK(sol.jumps[k] == doctest::Approx(jumps[k]).epsilon(1e-12));
}

TEST_CASE("solve_ee: Newton from zero recovers the closed form") {
  const Dataset ds = six_subjects();
  const WeightScheme scheme = WeightScheme::unit();
  const FitResult fit = fit_additive_hazards(ds, scheme);
  const IndexGrid grid = make_index_grid(ds, scheme);

  const OracleSolution sol = solve_ee(ds, scheme);
  REQUIRE(sol.converged);
  CHECK(sol.theta[0] == doctest::Approx(fit.theta[0]).epsilon(1e-8));
  const Vector jumps = closed_form_jumps(fit, grid);
  for (int k = 0; k < sol.jumps.size(); ++k)
    CHECK(sol.jumps[k] ==
          doctest::Approx(jumps[k]).epsilon(1e-8));
}

TEST_CASE("solve_ee: no covariate variation gives a singular Jacobian") {
  const Dataset ds = make_dataset(
      {{0.5, 1, vec({1.0})}, {1.2, 1, vec({1.0})}, {2.0, 0, vec({1.0})}}, 2.0);
  try {
    (void)solve_ee(ds, WeightScheme::unit());
    FAIL("expected SingularJacobian");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularJacobian);
  }
}

TEST_CASE("solve_ee: dimension cap") {
  Rng rng(3);
  const Dataset ds = zee::test::random_rs_dataset(rng, 25, 1, 1.5);
  OracleOptions opts;
  opts.cap = 3;
  CHECK_THROWS_AS((void)solve_ee(ds, WeightScheme::unit(), opts), Error);
}

TEST_CASE("oracle agreement across schemes on random small datasets") {
  Rng rng(2024);
  int done = 0;
  while (done < 12) {
    const int n = 8 + static_cast<int>(rng.uniform(0.0, 22.0));
    const int p = 1 + static_cast<int>(rng.uniform(0.0, 3.0));
    const Dataset rs = zee::test::random_rs_dataset(rng, n, p, 1.5);
    const Dataset tp = zee::test::random_two_phase_dataset(rng, n, p, 1.5);

    for (int which = 0; which < 2; ++which) {
      const Dataset& ds = which == 0 ? rs : tp;
      const WeightScheme scheme =
          which == 0 ? WeightScheme::unit() : WeightScheme::ipw();
      FitResult fit;
      OracleSolution sol;
      try {
        fit = fit_additive_hazards(ds, scheme);
        sol = solve_ee(ds, scheme);
      } catch (const Error&) {
        continue;  // singular draws are exercised elsewhere
      }
      ++done;
      for (int j = 0; j < p; ++j)
        CHECK(std::abs(sol.theta[j] - fit.theta[j]) <=
              1e-8 * (1.0 + std::abs(fit.theta[j])));
      const IndexGrid grid = make_index_grid(ds, scheme);
      const Vector jumps = closed_form_jumps(fit, grid);
      for (int k = 0; k < sol.jumps.size(); ++k)
        CHECK(std::abs(sol.jumps[k] - jumps[k]) <=
              1e-8 * (1.0 + std::abs(jumps[k])));
    }
  }
}
