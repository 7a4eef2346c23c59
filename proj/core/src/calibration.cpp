#include "zee/calibration.hpp"

#include <cmath>

#include "zee/log.hpp"

namespace zee {

namespace {

// exponent guard: keeps an unbounded dual from producing inf/NaN before the
// divergence check fires
double safe_exp(double x) { return std::exp(std::min(x, 700.0)); }

struct DualState {
  double value = 0.0;
  Vector gradient;  // equals the constraint residual
  Matrix hessian;
};

DualState evaluate_dual(const Dataset& ds, const Vector& gamma,
                        bool with_hessian) {
  const int n = ds.size();
  const int q = ds.auxiliary_dim();
  DualState st;
  st.gradient = Vector::Zero(q);
  if (with_hessian) st.hessian = Matrix::Zero(q, q);

  Vector vt_total = Vector::Zero(q);
  double value = 0.0;
  Vector weighted_total = Vector::Zero(q);
  for (int i = 0; i < n; ++i) {
    const auto& r = ds.record(i);
    vt_total += r.auxiliary;
    if (!r.selected) continue;
    const double e = safe_exp(-gamma.dot(r.auxiliary)) / r.sampling_prob;
    value += e;
    weighted_total += e * r.auxiliary;
    if (with_hessian)
      st.hessian += e * r.auxiliary * r.auxiliary.transpose();
  }
  st.value = (value + gamma.dot(vt_total)) / n;
  st.gradient = (vt_total - weighted_total) / n;
  if (with_hessian) st.hessian /= n;
  return st;
}

}  // namespace

double poisson_deviance(double w, double base) {
  if (w < 0.0) fail(ErrorCode::DomainError, "weight must be nonnegative");
  if (!(base > 0.0)) fail(ErrorCode::DomainError, "base weight must be positive");
  const double wlog = w == 0.0 ? 0.0 : w * std::log(w / base);
  return wlog - (w - base);
}

Vector calibrated_weights(const Vector& gamma, const Dataset& dataset) {
  return subject_weights(dataset, WeightScheme::calibrated(gamma));
}

CalibrationSolution solve_gamma(const Dataset& dataset,
                                const CalibrationOptions& opts) {
  validate(dataset, WeightScheme::ipw());
  const int q = dataset.auxiliary_dim();
  if (q == 0)
    fail(ErrorCode::SchemeDataMismatch,
         "calibration requires auxiliary columns");

  Vector gamma = Vector::Zero(q);
  DualState st = evaluate_dual(dataset, gamma, true);

  // A.6 finite-sample analog: the selected-subject second-moment matrix must
  // be nonsingular, otherwise the dual has flat directions.
  {
    Eigen::SelfAdjointEigenSolver<Matrix> es(st.hessian);
    const double lmax = es.eigenvalues().maxCoeff();
    const double lmin = es.eigenvalues().minCoeff();
    if (!(lmax > 0.0) || lmin <= lmax * 1e-14)
      fail(ErrorCode::SingularSystem,
           "A.6: auxiliary second-moment matrix singular");
  }

  CalibrationSolution sol;
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    if (st.gradient.cwiseAbs().maxCoeff() <= opts.tol) {
      sol.converged = true;
      break;
    }
    Eigen::LDLT<Matrix> ldlt(st.hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      fail(ErrorCode::SingularSystem,
           "A.6: auxiliary second-moment matrix singular");
    const Vector step = ldlt.solve(-st.gradient);

    // Armijo backtracking on the dual
    const double slope = st.gradient.dot(step);
    const double current_residual = st.gradient.cwiseAbs().maxCoeff();
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Vector candidate = gamma + t * step;
      const DualState cand = evaluate_dual(dataset, candidate, false);
      bool accept = cand.value <= st.value + 1e-4 * t * slope;
      // near the optimum the dual is flat in the last digits and Armijo can
      // no longer certify a decrease; a full Newton step that shrinks the
      // residual is accepted instead
      if (!accept && ls == 0)
        accept = cand.gradient.cwiseAbs().maxCoeff() < current_residual;
      if (accept) {
        gamma = candidate;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
    st = evaluate_dual(dataset, gamma, true);

    if (gamma.cwiseAbs().maxCoeff() > opts.gamma_bound)
      fail(ErrorCode::UnboundedDual,
           "calibration constraints unattainable; residual max-norm " +
               std::to_string(st.gradient.cwiseAbs().maxCoeff()));
    log::debug("calibration iter " + std::to_string(iter + 1) +
               " residual " + std::to_string(st.gradient.cwiseAbs().maxCoeff()));
  }

  if (!sol.converged && st.gradient.cwiseAbs().maxCoeff() <= opts.tol)
    sol.converged = true;
  if (!sol.converged)
    fail(ErrorCode::NoConvergence,
         "calibration did not reach tolerance in " +
             std::to_string(opts.max_iter) + " iterations; residual " +
             std::to_string(st.gradient.cwiseAbs().maxCoeff()));

  sol.gamma = gamma;
  sol.iterations = iter;
  sol.weights = calibrated_weights(gamma, dataset);
  sol.constraint_residual = st.gradient;
  sol.deviance = 0.0;
  for (int i = 0; i < dataset.size(); ++i) {
    const auto& r = dataset.record(i);
    if (r.selected)
      sol.deviance += poisson_deviance(sol.weights[i], 1.0 / r.sampling_prob);
  }
  return sol;
}

}  // namespace zee
