#include "zee/types.hpp"

#include <cmath>
#include <string>

namespace zee {

namespace {

bool is_binary(int v) { return v == 0 || v == 1; }

}  // namespace

Dataset::Dataset(std::vector<SubjectRecord> records, double tau, double sigma)
    : records_(std::move(records)), tau_(tau), sigma_(sigma) {
  if (!(tau_ > 0.0)) fail(ErrorCode::ConfigError, "tau must be positive");
  if (!(sigma_ > 0.0)) fail(ErrorCode::ConfigError, "sigma must be positive");
  if (records_.empty()) fail(ErrorCode::ConfigError, "dataset is empty");

  p_ = -1;
  q_ = static_cast<int>(records_[0].auxiliary.size());
  bool any_at_tau = false;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    const std::string where = "record " + std::to_string(i);
    if (!(r.time >= 0.0) || !std::isfinite(r.time))
      fail(ErrorCode::NegativeTime, where + ": follow-up time must be >= 0");
    if (!is_binary(r.event))
      fail(ErrorCode::NonBinaryIndicator, where + ": event must be 0 or 1");
    if (!is_binary(r.selected))
      fail(ErrorCode::NonBinaryIndicator, where + ": selected must be 0 or 1");
    if (!(r.sampling_prob > 0.0) || r.sampling_prob > 1.0)
      fail(ErrorCode::ProbabilityOutOfRange,
           where + ": sampling probability must lie in (0, 1]");
    if (r.sampling_prob < sigma_)
      fail(ErrorCode::ProbabilityOutOfRange,
           where + ": sampling probability below the assumed bound sigma");
    if (r.selected == 1 && !r.covariates.has_value())
      fail(ErrorCode::MissingValue,
           where + ": selected subject with missing covariates");
    if (r.covariates.has_value()) {
      const int pi = static_cast<int>(r.covariates->size());
      if (p_ < 0)
        p_ = pi;
      else if (pi != p_)
        fail(ErrorCode::MissingValue, where + ": covariate dimension differs");
    }
    if (static_cast<int>(r.auxiliary.size()) != q_)
      fail(ErrorCode::MissingValue, where + ": auxiliary dimension differs");
    if (r.time >= tau_) any_at_tau = true;
  }
  if (p_ < 0)
    fail(ErrorCode::MissingValue, "no record carries covariates");
  if (!any_at_tau)
    fail(ErrorCode::NoSubjectAtRiskAtTau,
         "A.7: no follow-up time reaches tau, at-risk mass at tau is zero");
}

void validate(const Dataset& dataset, const WeightScheme& scheme) {
  switch (scheme.kind) {
    case WeightScheme::Kind::Unit:
      for (int i = 0; i < dataset.size(); ++i) {
        const auto& r = dataset.record(i);
        if (r.selected != 1 || r.sampling_prob != 1.0)
          fail(ErrorCode::SchemeDataMismatch,
               "unit weights require a complete random sample "
               "(selected = 1 and sampling probability = 1 for every record)");
      }
      break;
    case WeightScheme::Kind::Calibrated:
      if (dataset.auxiliary_dim() == 0)
        fail(ErrorCode::SchemeDataMismatch,
             "calibrated weights require auxiliary columns");
      if (scheme.gamma.size() != dataset.auxiliary_dim())
        fail(ErrorCode::SchemeDataMismatch,
             "gamma dimension does not match the auxiliary dimension");
      [[fallthrough]];
    case WeightScheme::Kind::Ipw:
      for (int i = 0; i < dataset.size(); ++i) {
        const auto& r = dataset.record(i);
        if (r.selected == 1 && !r.covariates.has_value())
          fail(ErrorCode::MissingValue,
               "selected subject with missing covariates");
      }
      break;
  }
}

Vector subject_weights(const Dataset& dataset, const WeightScheme& scheme) {
  const int n = dataset.size();
  Vector w(n);
  switch (scheme.kind) {
    case WeightScheme::Kind::Unit:
      w.setOnes();
      break;
    case WeightScheme::Kind::Ipw:
      for (int i = 0; i < n; ++i) {
        const auto& r = dataset.record(i);
        w[i] = r.selected ? 1.0 / r.sampling_prob : 0.0;
      }
      break;
    case WeightScheme::Kind::Calibrated:
      for (int i = 0; i < n; ++i) {
        const auto& r = dataset.record(i);
        w[i] = r.selected
                   ? std::exp(-scheme.gamma.dot(r.auxiliary)) / r.sampling_prob
                   : 0.0;
      }
      break;
  }
  return w;
}

}  // namespace zee
