#pragma once

#include <utility>
#include <variant>

#include "zee/fit.hpp"

namespace zee {

enum class VarianceKind { Robust, ModelBased };

// Estimated asymptotic variance of sqrt(N) (estimator - target); divide by N
// for the variance of the estimator itself. 1x1 for scalar targets.
struct VarianceEstimate {
  Matrix value;
  VarianceKind kind = VarianceKind::Robust;
  WeightScheme::Kind scheme = WeightScheme::Kind::Unit;
  int n = 0;

  Matrix estimator_variance() const { return value / n; }
  double scalar() const { return value(0, 0); }
};

struct ThetaTarget {};
struct LambdaTarget {
  double s;
};
struct PredTarget {
  double s;
  Vector z;
};
using Target = std::variant<ThetaTarget, LambdaTarget, PredTarget>;

// Per-fit influence machinery. Construction caches the risk table and the
// grid prefix integrals, so rows for many targets are cheap.
class FitAnalysis {
 public:
  FitAnalysis(const Dataset& dataset, const WeightScheme& scheme,
              const FitResult& fit);

  const RiskTable& table() const { return table_; }
  const FitResult& fit() const { return fit_; }

  // rows are zero for subjects without observed covariates (weight zero);
  // the scheme-weighted row mean vanishes at the fit
  Matrix influence_theta() const;           // N x p
  Vector influence_lambda(double s) const;  // N
  Vector influence_pred(double s, const Vector& z) const;

  Vector influence_rows(const Target& target) const;  // flattened, scalar targets
  Matrix rows_for(const Target& target) const;        // N x d

  VarianceEstimate robust_variance(const Matrix& rows) const;
  VarianceEstimate model_based_variance(const Target& target,
                                        const Matrix& rows) const;

  // D(s) = int_0^s zbar(t) dt
  Vector d_vector(double s) const;

  // Second components of the two-phase variance estimators for a given row
  // set: (vps penalty, calibrated penalty). With same_moments the projection
  // is least squares under the penalty weights themselves, which makes the
  // calibrated penalty a true projection residual (never above the vps
  // penalty); otherwise the reporting plug-in moments are used.
  std::pair<Matrix, Matrix> penalty_pair(const Matrix& rows,
                                         bool same_moments) const;

 private:
  Vector lambda_base_rows(double s) const;
  double model_based_scalar_first_term(double s, const Vector& d) const;

  const Dataset& dataset_;
  WeightScheme scheme_;
  FitResult fit_;
  RiskTable table_;

  // prefix arrays over the grid (values at grid points)
  std::vector<double> cum_jump_;          // sum of atoms
  std::vector<Vector> cum_zjump_;         // sum of atoms * zbar
  std::vector<Vector> cum_zint_;          // int zbar dt
  std::vector<double> cum_ztheta_int_;    // int zbar'theta dt
  std::vector<Vector> cum_zbar_ztheta_;   // int zbar (zbar'theta) dt
  std::vector<double> cum_jump_over_y_;   // sum atoms / ybar
  std::vector<double> cum_ztheta_over_y_; // int (zbar'theta)/ybar dt
  std::vector<double> cum_inv_y_;         // int dt/ybar

  Matrix a_inverse_;
};

// one-shot wrappers matching the per-operation contracts
Matrix influence_theta(const Dataset& dataset, const WeightScheme& scheme,
                       const FitResult& fit);
Vector influence_lambda(const Dataset& dataset, const WeightScheme& scheme,
                        const FitResult& fit, double s);
Vector influence_pred(const Dataset& dataset, const WeightScheme& scheme,
                      const FitResult& fit, double s, const Vector& z);

// Sandwich variance from influence rows under the scheme's sampling design:
//   unit         (1/N) sum rows rows'
//   ipw          (1/N) sum (R/pi^2) rows rows'
//   calibrated   (1/N) sum (R/pi) rows rows'
//                + (1/N) sum (R/pi)((1-pi)/pi) (rows - proj)(rows - proj)'
// with proj the least-squares projection of the rows on the auxiliaries.
VarianceEstimate robust_variance(const Matrix& rows, const Dataset& dataset,
                                 const WeightScheme& scheme);

// First term replaces the squared residual kernel with the fitted compensator
// increments (A^{-1} B A^{-1} for theta); penalties as in robust_variance.
VarianceEstimate model_based_variance(const Dataset& dataset,
                                      const WeightScheme& scheme,
                                      const FitResult& fit,
                                      const Target& target, const Matrix& rows);

struct FrechetDirection {
  Vector dtheta;
  StepFunction<double> dlambda;
};

struct IndexFunction {
  Vector h1;
  StepFunction<double> h2;
};

// Empirical evaluation of the four derivative blocks of the estimating map at
// the weighted empirical measure, applied to a direction and an index:
//   -h1' P[int Y ZZ' dt] dtheta  - h1' P[int Z Y d(dLambda)]
//   -P[int h2 Y Z' dt] dtheta    - P[int h2 Y d(dLambda)]
// Linear in both arguments.
double frechet_apply(const Dataset& dataset, const WeightScheme& scheme,
                     const FrechetDirection& direction, const IndexFunction& h);

// The index that extracts h1' dtheta from the derivative blocks:
// (-A^{-1} h1, t -> (A^{-1} h1)' zbar(t)).
IndexFunction theta_extraction_index(const Dataset& dataset,
                                     const WeightScheme& scheme,
                                     const Vector& h1);

}  // namespace zee
