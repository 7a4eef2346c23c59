#pragma once

#include <vector>

#include "zee/step_function.hpp"
#include "zee/types.hpp"

namespace zee {

// Cumulative hazard curve: atoms at the knots plus a piecewise-constant
// drift slope between them, so Lambda(s) = sum_{knot<=s} atom + int_0^s slope.
// The fitted baseline has Nelson-Aalen type atoms at event times and drift
// slope -zbar(t)'theta; it is exact at every s in [0, tau], not only at knots.
class CumulativeHazard {
 public:
  CumulativeHazard(double tau, std::vector<double> knots,
                   std::vector<double> atoms, std::vector<double> slopes);

  static CumulativeHazard zero(double tau);

  double operator()(double s) const;  // DomainError outside [0, tau]
  double domain_end() const { return tau_; }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& atoms() const { return atoms_; }
  // slopes_[j] holds on (knots_[j-1], knots_[j]] with knots_[-1] := 0
  const std::vector<double>& slopes() const { return slopes_; }

  // knots with a nonzero atom (the jump points)
  std::vector<std::pair<double, double>> jumps() const;

 private:
  double tau_;
  std::vector<double> knots_;
  std::vector<double> atoms_;
  std::vector<double> slopes_;
  std::vector<double> cum_;  // value at each knot
};

// Weighted at-risk aggregates on the grid of distinct observed times.
// Times are clamped at tau on entry (events after tau count as censored at
// tau; an event exactly at tau is kept). All per-time quantities use the
// closed at-risk convention Y(t) = 1[T >= t]: the value stored for grid point
// t_k includes subjects with T_i == t_k, and holds on the interval
// (t_{k-1}, t_k]. Ties contribute jointly at the shared grid point.
class RiskTable {
 public:
  RiskTable(const Dataset& dataset, const WeightScheme& scheme);

  int n() const { return n_; }
  int p() const { return p_; }
  double tau() const { return tau_; }
  int grid_size() const { return static_cast<int>(grid_.size()); }

  // clamped per-subject data
  double time(int i) const { return time_[i]; }
  int event(int i) const { return event_[i]; }
  double weight(int i) const { return w_[i]; }
  bool has_covariates(int i) const { return has_z_[i]; }
  // zero vector when covariates are absent (weight is 0 in that case)
  Eigen::Ref<const Vector> covariate(int i) const { return z_.row(i).transpose(); }
  int grid_index(int i) const { return subject_slot_[i]; }

  const std::vector<double>& grid() const { return grid_; }
  double interval_start(int k) const { return k == 0 ? 0.0 : grid_[k - 1]; }
  double interval_length(int k) const { return grid_[k] - interval_start(k); }

  // closed suffix aggregates at grid point k
  double s0(int k) const { return s0_[k]; }
  const Vector& s1(int k) const { return s1_[k]; }
  const Matrix& s2(int k) const { return s2_[k]; }
  double atrisk_mean(int k) const { return s0_[k] / n_; }
  const Vector& zmean(int k) const { return zmean_[k]; }
  double event_mass(int k) const { return dn_[k]; }      // sum of w over events at t_k
  const Vector& event_mass_z(int k) const { return dnz_[k]; }
  double na_jump(int k) const { return dn_[k] / s0_[k]; }

  // index of the first grid point >= t (grid_size() if none): the closed
  // at-risk aggregates valid on any interval containing t
  int suffix_index(double t) const;

  StepFunction<double> at_risk_mean_fn() const;
  StepFunction<Vector> covariate_mean_fn() const;

 private:
  int n_ = 0;
  int p_ = 0;
  double tau_ = 0.0;

  std::vector<double> time_;
  std::vector<int> event_;
  Vector w_;
  Matrix z_;  // n x p
  std::vector<char> has_z_;
  std::vector<int> subject_slot_;

  std::vector<double> grid_;
  std::vector<double> s0_;
  std::vector<Vector> s1_;
  std::vector<Matrix> s2_;
  std::vector<Vector> zmean_;
  std::vector<double> dn_;
  std::vector<Vector> dnz_;
};

// t -> (1/N) sum_i w_i 1(T_i >= t), left-continuous step function with knots
// at the distinct observed times; strictly positive on [0, tau] or ZeroRiskSet.
StepFunction<double> at_risk_mean(const Dataset& dataset,
                                  const WeightScheme& scheme);

// weighted covariate average among subjects still at risk
StepFunction<Vector> zbar(const Dataset& dataset, const WeightScheme& scheme);

// (1/N) sum_i w_i Delta_i g(T_i, Z_i) over events with T_i <= tau: the
// empirical integral of g against the weighted counting measure.
template <class F>
auto stieltjes_event_sum(const Dataset& dataset, const WeightScheme& scheme,
                         F&& g) {
  validate(dataset, scheme);
  const Vector w = subject_weights(dataset, scheme);
  using R = std::decay_t<decltype(g(0.0, std::declval<const Vector&>()))>;
  R acc{};
  bool first = true;
  for (int i = 0; i < dataset.size(); ++i) {
    const auto& r = dataset.record(i);
    if (w[i] == 0.0 || r.event == 0 || r.time > dataset.tau()) continue;
    R term = g(r.time, *r.covariates);
    if (first) {
      acc = w[i] * term;
      first = false;
    } else {
      acc += w[i] * term;
    }
  }
  if (first) {
    // no events: a zero of the right shape, probing g at an arbitrary subject
    for (int i = 0; i < dataset.size(); ++i) {
      if (dataset.record(i).covariates.has_value()) {
        acc = detail::zero_like(
            R(g(dataset.record(i).time, *dataset.record(i).covariates)));
        break;
      }
    }
    return acc;
  }
  return R(acc / static_cast<double>(dataset.size()));
}

}  // namespace zee
