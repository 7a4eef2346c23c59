#pragma once

#include <vector>

#include "zee/fit.hpp"

namespace zee {

// Finite index grid for the estimating equations: the p coordinate vectors
// plus the indicators 1(t <= s_k) at the ordered distinct observed event
// times s_1 < ... < s_m <= tau. A candidate Lambda is parameterized by its
// jumps at those times; the absolutely continuous drift -int zbar' theta dt
// is reconstructed from theta, matching the representation of the closed
// form, so the closed-form fit is an exact root of the grid system.
struct IndexGrid {
  int p = 0;
  std::vector<double> event_times;
  int size() const { return p + static_cast<int>(event_times.size()); }
};

IndexGrid make_index_grid(const Dataset& dataset, const WeightScheme& scheme);

// All p + m grid equations at (theta, jumps): the weighted empirical average
// of psi over each index.
Vector ee_residuals(const Dataset& dataset, const WeightScheme& scheme,
                    const Vector& theta, const Vector& lambda_jumps);

// A single grid equation; index < p selects the coordinate equations,
// index >= p the indicator equation at event time index - p.
double ee_residual(const Dataset& dataset, const WeightScheme& scheme,
                   const Vector& theta, const Vector& lambda_jumps, int index);

struct OracleOptions {
  int cap = 200;       // refuse systems larger than p + m = cap
  double tol = 1e-10;  // max-norm of the residual vector
  int max_iter = 60;
};

struct OracleSolution {
  Vector theta;
  Vector jumps;
  std::vector<double> event_times;
  int iterations = 0;
  double max_residual = 0.0;
  bool converged = false;
};

// Newton root of the square grid system with a numerically differenced
// Jacobian (central differences, step 1e-6 (1 + |x|)). Desk-scale oracle for
// certifying the closed forms; not a production solver.
OracleSolution solve_ee(const Dataset& dataset, const WeightScheme& scheme,
                        const Vector& init_theta, const Vector& init_jumps,
                        const OracleOptions& opts = {});

// convenience: initial point at zero
OracleSolution solve_ee(const Dataset& dataset, const WeightScheme& scheme,
                        const OracleOptions& opts = {});

}  // namespace zee
