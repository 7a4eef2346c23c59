#pragma once

#include "zee/risk.hpp"
#include "zee/types.hpp"

namespace zee {

// Closed-form additive hazards fit under a weight scheme.
//   theta    solves A theta = b with
//            A = (1/N) sum_i w_i int_0^{T_i ^ tau} (Z_i - zbar(t))^{x2} dt
//            b = (1/N) sum_i w_i Delta_i (Z_i - zbar(T_i))
//   lambda   Nelson-Aalen type atoms minus the drift int_0^s zbar' theta dt
//   b_matrix the martingale-variance analog of A (see compute_b_matrix)
struct FitResult {
  Vector theta;
  CumulativeHazard lambda = CumulativeHazard::zero(1.0);
  Matrix a_matrix;
  Matrix b_matrix;
  WeightScheme scheme;
  double a_condition = 0.0;  // spectral condition number of a_matrix
};

struct ThetaFit {
  Vector theta;
  Matrix a_matrix;
  Vector rhs;
  double condition = 0.0;
};

// Regression coefficients and the design matrix A. Throws SingularA when A is
// not numerically positive definite (condition number above 1e12).
ThetaFit fit_theta(const Dataset& dataset, const WeightScheme& scheme);
ThetaFit fit_theta(const RiskTable& table);

// Baseline cumulative hazard for a given theta. Atoms sit at weighted event
// times; the drift slope between observed times is -zbar(t)' theta. Not
// monotone in general: the drift can push the curve down.
CumulativeHazard fit_lambda(const Dataset& dataset, const WeightScheme& scheme,
                            const Vector& theta);
CumulativeHazard fit_lambda(const RiskTable& table, const Vector& theta);

// Full fit: theta, lambda, A, B.
FitResult fit_additive_hazards(const Dataset& dataset,
                               const WeightScheme& scheme);
FitResult fit_additive_hazards(const RiskTable& table,
                               const WeightScheme& scheme);

// Lambda(s | z) = Lambda(s) + z' theta * s. DomainError outside [0, tau].
double predict_cumhaz(const FitResult& fit, const Vector& z, double s);

// B = (1/N) sum_i w_i int_0^{T_i ^ tau} (Z_i - zbar)^{x2} {dLambda + Z_i'theta dt}
// where dLambda is the full measure of the fitted curve (atoms plus drift).
Matrix compute_b_matrix(const Dataset& dataset, const WeightScheme& scheme,
                        const FitResult& fit);
Matrix compute_b_matrix(const RiskTable& table, const FitResult& fit);

}  // namespace zee
