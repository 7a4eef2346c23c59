#pragma once

#include "zee/types.hpp"

namespace zee {

// G(w, base) = w log(w/base) - (w - base), the Poisson deviance distance
// between an adjusted weight and its design value base = 1/pi. Nonnegative,
// zero iff w == base; 0 log 0 := 0.
double poisson_deviance(double w, double base);

struct CalibrationSolution {
  Vector gamma;                // Lagrange multipliers
  Vector weights;              // R_i exp(-gamma' Vt_i) / pi_i, zero when R_i = 0
  Vector constraint_residual;  // (1/N)[sum Vt_i - sum R_i w_i Vt_i]
  double deviance = 0.0;       // sum_i R_i G(w_i, 1/pi_i)
  int iterations = 0;
  bool converged = false;
};

struct CalibrationOptions {
  double tol = 1e-10;    // max-norm bound on the mean-scaled residual
  int max_iter = 50;
  double gamma_bound = 1e3;  // divergence beyond this reports UnboundedDual
};

// Solves the calibration equations sum Vt_i = sum (R_i/pi_i) exp(-gamma'Vt_i) Vt_i
// by minimizing the convex dual
//   g(gamma) = (1/N)[ sum_i (R_i/pi_i) exp(-gamma'Vt_i) + gamma' sum_i Vt_i ]
// with Newton steps and Armijo backtracking from gamma = 0. The gradient of g
// equals the constraint residual and the Hessian is
// (1/N) sum (R_i/pi_i) exp(-gamma'Vt_i) Vt_i Vt_i'.
CalibrationSolution solve_gamma(const Dataset& dataset,
                                const CalibrationOptions& opts = {});

inline CalibrationSolution solve_gamma(const Dataset& dataset, double tol,
                                       int max_iter) {
  CalibrationOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  return solve_gamma(dataset, o);
}

// w_i = R_i exp(-gamma' Vt_i) / pi_i for an arbitrary multiplier vector.
Vector calibrated_weights(const Vector& gamma, const Dataset& dataset);

}  // namespace zee
