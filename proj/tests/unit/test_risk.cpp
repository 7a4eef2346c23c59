#include <doctest.h>

#include <cstring>

#include "../support/test_util.hpp"
#include "zee/risk.hpp"

using namespace zee;
using zee::test::make_dataset;
using zee::test::Row;
using zee::test::vec;

namespace {

// direct-summation oracle, deliberately naive
double atrisk_direct(const Dataset& ds, const WeightScheme& scheme, double t) {
  const Vector w = subject_weights(ds, scheme);
  double s = 0.0;
  for (int i = 0; i < ds.size(); ++i) {
    const double ti = std::min(ds.record(i).time, ds.tau());
    if (ti >= t) s += w[i];
  }
  return s / ds.size();
}

Vector zbar_direct(const Dataset& ds, const WeightScheme& scheme, double t) {
  const Vector w = subject_weights(ds, scheme);
  Vector num = Vector::Zero(ds.covariate_dim());
  double den = 0.0;
  for (int i = 0; i < ds.size(); ++i) {
    const double ti = std::min(ds.record(i).time, ds.tau());
    if (ti >= t && w[i] > 0.0) {
      num += w[i] * *ds.record(i).covariates;
      den += w[i];
    }
  }
  return num / den;
}

}  // namespace

TEST_CASE("at_risk_mean: unit weights count/N") {
  const Dataset ds = make_dataset(
      {{1.0, 1, vec({0.0})}, {3.0, 0, vec({1.0})}}, 3.0);
  const auto f = at_risk_mean(ds, WeightScheme::unit());
  CHECK(f(0.0) == doctest::Approx(1.0));
  CHECK(f(1.0) == doctest::Approx(1.0));  // closed at-risk set at t = 1
  CHECK(f(1.5) == doctest::Approx(0.5));
  CHECK(f(3.0) == doctest::Approx(0.5));
}

TEST_CASE("at_risk_mean: inverse probability weights") {
  const Dataset ds = make_dataset(
      {{1.0, 1, vec({0.0}), 1, 0.5}, {3.0, 0, vec({1.0}), 1, 0.5}}, 3.0);
  const auto f = at_risk_mean(ds, WeightScheme::ipw());
  CHECK(f(0.5) == doctest::Approx(2.0));
  CHECK(f(2.0) == doctest::Approx(1.0));
}

TEST_CASE("at-risk mass must persist to tau") {
  // nobody reaches tau: rejected when the dataset is assembled
  CHECK_THROWS_AS(
      (void)make_dataset({{1.0, 1, vec({0.0})}, {2.0, 0, vec({1.0})}}, 3.0),
      Error);
  // a subject reaches tau but carries no weight: the weighted risk set dies
  const Dataset ds = make_dataset(
      {{1.0, 1, vec({0.0}), 1, 0.5}, {3.0, 0, std::nullopt, 0, 0.5}}, 3.0);
  try {
    (void)at_risk_mean(ds, WeightScheme::ipw());
    FAIL("expected ZeroRiskSet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroRiskSet);
  }
}

TEST_CASE("zbar: single subject and equal-weight mean") {
  const Dataset one = make_dataset({{2.0, 1, vec({2.0})}}, 2.0);
  const auto f1 = zbar(one, WeightScheme::unit());
  CHECK(f1(0.7)[0] == doctest::Approx(2.0));
  CHECK(f1(2.0)[0] == doctest::Approx(2.0));

  const Dataset two = make_dataset(
      {{2.5, 0, vec({0.0})}, {2.2, 0, vec({1.0})}}, 2.0);
  const auto f2 = zbar(two, WeightScheme::unit());
  CHECK(f2(1.0)[0] == doctest::Approx(0.5));
}

TEST_CASE("zbar: unequal IPW weights match the direct-summation oracle") {
  const Dataset ds = make_dataset({{0.7, 1, vec({1.0, 0.0}), 1, 0.25},
                                   {1.4, 0, vec({0.0, 2.0}), 1, 0.5},
                                   {2.3, 1, vec({-1.0, 1.0}), 1, 1.0},
                                   {0.9, 0, std::nullopt, 0, 0.25},
                                   {2.0, 1, vec({0.5, 0.5}), 1, 0.8}},
                                  2.0);
  const auto f = zbar(ds, WeightScheme::ipw());
  for (double t : {0.0, 0.5, 0.7, 0.8, 1.4, 1.9, 2.0}) {
    const Vector direct = zbar_direct(ds, WeightScheme::ipw(), t);
    const Vector fast = f(t);
    for (int j = 0; j < 2; ++j)
      CHECK(fast[j] == doctest::Approx(direct[j]).epsilon(1e-13));
  }
  // the at-risk mean agrees with its oracle too
  const auto y = at_risk_mean(ds, WeightScheme::ipw());
  for (double t : {0.0, 0.7, 1.0, 2.0})
    CHECK(y(t) ==
          doctest::Approx(atrisk_direct(ds, WeightScheme::ipw(), t))
              .epsilon(1e-13));
}

TEST_CASE("stieltjes_event_sum: constants and empty sums") {
  const Dataset ds = make_dataset(
      {{0.5, 1, vec({1.0})}, {1.0, 1, vec({2.0})}, {2.5, 0, vec({0.0})}}, 2.0);
  const double events =
      stieltjes_event_sum(ds, WeightScheme::unit(),
                          [](double, const Vector&) { return 1.0; });
  CHECK(events == doctest::Approx(2.0 / 3.0));

  const Dataset none = make_dataset(
      {{0.5, 0, vec({1.0})}, {2.5, 0, vec({0.0})}}, 2.0);
  const double zero =
      stieltjes_event_sum(none, WeightScheme::unit(),
                          [](double, const Vector&) { return 1.0; });
  CHECK(zero == 0.0);
}

TEST_CASE("stieltjes_event_sum: centered covariate increment vs direct oracle") {
  const Dataset ds = make_dataset({{0.7, 1, vec({1.0}), 1, 0.25},
                                   {1.4, 1, vec({0.0}), 1, 0.5},
                                   {2.3, 1, vec({-1.0}), 1, 1.0},
                                   {0.9, 0, std::nullopt, 0, 0.25},
                                   {2.0, 1, vec({0.5}), 1, 0.8}},
                                  2.0);
  const WeightScheme scheme = WeightScheme::ipw();
  const auto zb = zbar(ds, scheme);
  const Vector got = stieltjes_event_sum(
      ds, scheme, [&](double t, const Vector& z) { return Vector(z - zb(t)); });

  // naive loop, independent of the risk-table machinery
  const Vector w = subject_weights(ds, scheme);
  Vector expect = Vector::Zero(1);
  for (int i = 0; i < ds.size(); ++i) {
    const auto& r = ds.record(i);
    if (w[i] == 0.0 || !r.event || r.time > ds.tau()) continue;
    expect += w[i] * (*r.covariates - zbar_direct(ds, scheme, r.time));
  }
  expect /= ds.size();
  CHECK(got[0] == doctest::Approx(expect[0]).epsilon(1e-13));
}

TEST_CASE("invariants: monotone, normalized, and degenerate-scheme equality") {
  Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset ds = zee::test::random_rs_dataset(rng, 25, 2, 1.5);
    const auto f = at_risk_mean(ds, WeightScheme::unit());
    const Vector w = subject_weights(ds, WeightScheme::unit());
    CHECK(f(0.0) == doctest::Approx(w.sum() / ds.size()).epsilon(1e-14));
    double prev = 2.0;
    for (double t = 0.0; t <= 1.5; t += 0.01) {
      const double v = f(t);
      CHECK(v <= prev + 1e-15);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      prev = v;
    }

    // pi = 1 everywhere: the IPW path must reproduce unit weights bitwise
    const auto fu = at_risk_mean(ds, WeightScheme::unit());
    const auto fi = at_risk_mean(ds, WeightScheme::ipw());
    for (double t = 0.0; t <= 1.5; t += 0.05) {
      const double a = fu(t), b = fi(t);
      CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
    }
  }
}
