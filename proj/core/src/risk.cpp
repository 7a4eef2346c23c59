#include "zee/risk.hpp"

#include <algorithm>
#include <cmath>

namespace zee {

CumulativeHazard::CumulativeHazard(double tau, std::vector<double> knots,
                                   std::vector<double> atoms,
                                   std::vector<double> slopes)
    : tau_(tau),
      knots_(std::move(knots)),
      atoms_(std::move(atoms)),
      slopes_(std::move(slopes)) {
  if (atoms_.size() != knots_.size() || slopes_.size() != knots_.size())
    fail(ErrorCode::DomainError,
         "cumulative hazard needs one atom and one slope per knot");
  for (std::size_t j = 0; j < knots_.size(); ++j) {
    if (knots_[j] < 0.0 || knots_[j] > tau_)
      fail(ErrorCode::DomainError, "knot outside [0, tau]");
    if (j > 0 && !(knots_[j - 1] < knots_[j]))
      fail(ErrorCode::DomainError, "knots must be strictly increasing");
  }
  if (!knots_.empty() && knots_.back() != tau_)
    fail(ErrorCode::DomainError, "last knot must equal tau");
  cum_.resize(knots_.size());
  double acc = 0.0, prev = 0.0;
  for (std::size_t j = 0; j < knots_.size(); ++j) {
    acc += slopes_[j] * (knots_[j] - prev) + atoms_[j];
    cum_[j] = acc;
    prev = knots_[j];
  }
}

CumulativeHazard CumulativeHazard::zero(double tau) {
  return CumulativeHazard(tau, {tau}, {0.0}, {0.0});
}

double CumulativeHazard::operator()(double s) const {
  if (s < 0.0 || s > tau_)
    fail(ErrorCode::DomainError, "evaluation outside [0, tau]");
  // number of knots <= s: atoms at s are included (cadlag)
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
  const std::size_t j = static_cast<std::size_t>(it - knots_.begin());
  const double base = j == 0 ? 0.0 : cum_[j - 1];
  const double from = j == 0 ? 0.0 : knots_[j - 1];
  const double slope = j < slopes_.size() ? slopes_[j] : 0.0;
  return base + slope * (s - from);
}

std::vector<std::pair<double, double>> CumulativeHazard::jumps() const {
  std::vector<std::pair<double, double>> out;
  for (std::size_t j = 0; j < knots_.size(); ++j)
    if (atoms_[j] != 0.0) out.emplace_back(knots_[j], atoms_[j]);
  return out;
}

RiskTable::RiskTable(const Dataset& dataset, const WeightScheme& scheme) {
  validate(dataset, scheme);

  n_ = dataset.size();
  p_ = dataset.covariate_dim();
  tau_ = dataset.tau();
  w_ = subject_weights(dataset, scheme);

  time_.resize(n_);
  event_.resize(n_);
  has_z_.resize(n_);
  z_.setZero(n_, p_);
  for (int i = 0; i < n_; ++i) {
    const auto& r = dataset.record(i);
    // events after tau count as censored at tau; an event at tau is kept
    if (r.time > tau_) {
      time_[i] = tau_;
      event_[i] = 0;
    } else {
      time_[i] = r.time;
      event_[i] = r.event;
    }
    has_z_[i] = r.covariates.has_value() ? 1 : 0;
    if (has_z_[i]) z_.row(i) = r.covariates->transpose();
  }

  grid_ = time_;
  std::sort(grid_.begin(), grid_.end());
  grid_.erase(std::unique(grid_.begin(), grid_.end()), grid_.end());
  const int K = static_cast<int>(grid_.size());

  subject_slot_.resize(n_);
  for (int i = 0; i < n_; ++i)
    subject_slot_[i] = static_cast<int>(
        std::lower_bound(grid_.begin(), grid_.end(), time_[i]) - grid_.begin());

  s0_.assign(K, 0.0);
  s1_.assign(K, Vector::Zero(p_));
  s2_.assign(K, Matrix::Zero(p_, p_));
  dn_.assign(K, 0.0);
  dnz_.assign(K, Vector::Zero(p_));

  for (int i = 0; i < n_; ++i) {
    if (w_[i] == 0.0) continue;
    const int k = subject_slot_[i];
    s0_[k] += w_[i];
    s1_[k] += w_[i] * z_.row(i).transpose();
    s2_[k] += w_[i] * z_.row(i).transpose() * z_.row(i);
    if (event_[i]) {
      dn_[k] += w_[i];
      dnz_[k] += w_[i] * z_.row(i).transpose();
    }
  }
  // suffix accumulation: aggregates over subjects with T_i >= t_k
  for (int k = K - 2; k >= 0; --k) {
    s0_[k] += s0_[k + 1];
    s1_[k] += s1_[k + 1];
    s2_[k] += s2_[k + 1];
  }

  if (!(s0_[K - 1] > 0.0))
    fail(ErrorCode::ZeroRiskSet,
         "A.7: weighted at-risk mass vanishes at or before tau");

  zmean_.resize(K);
  for (int k = 0; k < K; ++k) zmean_[k] = s1_[k] / s0_[k];
}

int RiskTable::suffix_index(double t) const {
  return static_cast<int>(
      std::lower_bound(grid_.begin(), grid_.end(), t) - grid_.begin());
}

StepFunction<double> RiskTable::at_risk_mean_fn() const {
  const int K = grid_size();
  std::vector<double> values(K + 1);
  // value on (t_{k-1}, t_k] is the closed suffix at t_k; the final segment
  // (t_K, tau] is empty because the grid always reaches tau
  for (int k = 0; k < K; ++k) values[k] = atrisk_mean(k);
  values[K] = 0.0;
  return StepFunction<double>(tau_, grid_, std::move(values),
                              Continuity::Caglad);
}

StepFunction<Vector> RiskTable::covariate_mean_fn() const {
  const int K = grid_size();
  std::vector<Vector> values(K + 1);
  for (int k = 0; k < K; ++k) values[k] = zmean_[k];
  values[K] = zmean_[K - 1];  // unreachable segment past tau
  return StepFunction<Vector>(tau_, grid_, std::move(values),
                              Continuity::Caglad);
}

StepFunction<double> at_risk_mean(const Dataset& dataset,
                                  const WeightScheme& scheme) {
  return RiskTable(dataset, scheme).at_risk_mean_fn();
}

StepFunction<Vector> zbar(const Dataset& dataset, const WeightScheme& scheme) {
  return RiskTable(dataset, scheme).covariate_mean_fn();
}

}  // namespace zee
