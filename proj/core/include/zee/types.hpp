#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "zee/errors.hpp"

namespace zee {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// One study subject. `covariates` (the expensive phase-II measurement) may be
// absent only for unselected subjects; `auxiliary` and `phase1` are observed
// for everyone. `sampling_prob` is the known design probability of selection.
struct SubjectRecord {
  double time = 0.0;
  int event = 0;
  std::optional<Vector> covariates;
  Vector phase1;     // may be empty
  Vector auxiliary;  // calibration vector, dimension q (may be empty)
  int selected = 1;
  double sampling_prob = 1.0;
};

// Immutable after construction; safe to share across threads.
class Dataset {
 public:
  // sigma is the assumed lower bound for the sampling probabilities.
  Dataset(std::vector<SubjectRecord> records, double tau, double sigma = 1e-6);

  int size() const { return static_cast<int>(records_.size()); }
  const std::vector<SubjectRecord>& records() const { return records_; }
  const SubjectRecord& record(int i) const { return records_[i]; }
  double tau() const { return tau_; }
  int covariate_dim() const { return p_; }
  int auxiliary_dim() const { return q_; }
  double sigma() const { return sigma_; }

 private:
  std::vector<SubjectRecord> records_;
  double tau_;
  int p_ = 0;
  int q_ = 0;
  double sigma_;
};

// Which empirical measure the estimating equations use.
//   Unit:       w_i = 1                                (complete random sample)
//   Ipw:        w_i = R_i / pi_i                       (two-phase, design weights)
//   Calibrated: w_i = R_i exp(-gamma' Vt_i) / pi_i     (exponentially tilted)
struct WeightScheme {
  enum class Kind { Unit, Ipw, Calibrated };

  Kind kind = Kind::Unit;
  Vector gamma;  // only for Calibrated

  static WeightScheme unit() { return {Kind::Unit, {}}; }
  static WeightScheme ipw() { return {Kind::Ipw, {}}; }
  static WeightScheme calibrated(Vector g) {
    return {Kind::Calibrated, std::move(g)};
  }

  const char* name() const {
    switch (kind) {
      case Kind::Unit: return "rs";
      case Kind::Ipw: return "ipw";
      case Kind::Calibrated: return "cal";
    }
    return "?";
  }
};

// Checks that the dataset satisfies every invariant required by the scheme.
// Pure: never mutates the dataset. Throws on violation.
void validate(const Dataset& dataset, const WeightScheme& scheme);

// Per-subject weights w_i for the scheme. Unselected subjects get exactly 0
// under Ipw/Calibrated so missing covariates never enter weighted sums.
Vector subject_weights(const Dataset& dataset, const WeightScheme& scheme);

}  // namespace zee
