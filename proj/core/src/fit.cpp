#include "zee/fit.hpp"

#include <cmath>
#include <limits>

namespace zee {

namespace {

constexpr double kMaxCondition = 1e12;

// Solve A x = b for symmetric positive definite A with a condition guard.
Vector spd_solve(const Matrix& a, const Vector& b, double* condition) {
  if (a.rows() == 0) {
    if (condition) *condition = 1.0;
    return Vector(0);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  const double cond = (lmin > 0.0) ? lmax / lmin
                                   : std::numeric_limits<double>::infinity();
  if (condition) *condition = cond;
  if (!(lmin > 0.0) || cond > kMaxCondition)
    fail(ErrorCode::SingularA,
         "A.8: design matrix A singular (condition number above 1e12)");
  return es.eigenvectors() *
         (es.eigenvalues().cwiseInverse().asDiagonal() *
          (es.eigenvectors().transpose() * b));
}

}  // namespace

ThetaFit fit_theta(const RiskTable& t) {
  const int K = t.grid_size();
  const int p = t.p();
  const double n = t.n();

  Matrix a = Matrix::Zero(p, p);
  Vector b = Vector::Zero(p);
  for (int k = 0; k < K; ++k) {
    const double len = t.interval_length(k);
    if (len > 0.0)
      a += (t.s2(k) - t.s1(k) * t.s1(k).transpose() / t.s0(k)) * len;
    if (t.event_mass(k) > 0.0)
      b += t.event_mass_z(k) - t.event_mass(k) * t.zmean(k);
  }
  a /= n;
  b /= n;

  ThetaFit out;
  out.a_matrix = std::move(a);
  out.rhs = b;
  out.theta = spd_solve(out.a_matrix, b, &out.condition);
  return out;
}

ThetaFit fit_theta(const Dataset& dataset, const WeightScheme& scheme) {
  return fit_theta(RiskTable(dataset, scheme));
}

CumulativeHazard fit_lambda(const RiskTable& t, const Vector& theta) {
  const int K = t.grid_size();
  std::vector<double> atoms(K), slopes(K);
  for (int k = 0; k < K; ++k) {
    atoms[k] = t.event_mass(k) > 0.0 ? t.na_jump(k) : 0.0;
    slopes[k] = -t.zmean(k).dot(theta);
  }
  return CumulativeHazard(t.tau(), t.grid(), std::move(atoms),
                          std::move(slopes));
}

CumulativeHazard fit_lambda(const Dataset& dataset, const WeightScheme& scheme,
                            const Vector& theta) {
  return fit_lambda(RiskTable(dataset, scheme), theta);
}

FitResult fit_additive_hazards(const RiskTable& table,
                               const WeightScheme& scheme) {
  ThetaFit tf = fit_theta(table);
  FitResult fit;
  fit.theta = std::move(tf.theta);
  fit.a_matrix = std::move(tf.a_matrix);
  fit.a_condition = tf.condition;
  fit.lambda = fit_lambda(table, fit.theta);
  fit.scheme = scheme;
  fit.b_matrix = compute_b_matrix(table, fit);
  return fit;
}

FitResult fit_additive_hazards(const Dataset& dataset,
                               const WeightScheme& scheme) {
  return fit_additive_hazards(RiskTable(dataset, scheme), scheme);
}

double predict_cumhaz(const FitResult& fit, const Vector& z, double s) {
  if (z.size() != fit.theta.size())
    fail(ErrorCode::DomainError, "covariate vector has wrong dimension");
  return fit.lambda(s) + z.dot(fit.theta) * s;
}

Matrix compute_b_matrix(const RiskTable& t, const FitResult& fit) {
  const int K = t.grid_size();
  const int p = t.p();
  const int n = t.n();
  const Vector& theta = fit.theta;

  // a-weighted suffix aggregates, a_i = Z_i' theta
  std::vector<double> m0(K, 0.0);
  std::vector<Vector> m1(K, Vector::Zero(p));
  std::vector<Matrix> m2(K, Matrix::Zero(p, p));
  for (int i = 0; i < n; ++i) {
    if (t.weight(i) == 0.0) continue;
    const int k = t.grid_index(i);
    const double wa = t.weight(i) * t.covariate(i).dot(theta);
    m0[k] += wa;
    m1[k] += wa * t.covariate(i);
    m2[k] += wa * t.covariate(i) * t.covariate(i).transpose();
  }
  for (int k = K - 2; k >= 0; --k) {
    m0[k] += m0[k + 1];
    m1[k] += m1[k + 1];
    m2[k] += m2[k + 1];
  }

  Matrix b = Matrix::Zero(p, p);
  for (int k = 0; k < K; ++k) {
    const Vector& zb = t.zmean(k);
    // atoms of dLambda at event times: jump * centered second moment
    if (t.event_mass(k) > 0.0) {
      const Matrix centered =
          t.s2(k) - t.s1(k) * t.s1(k).transpose() / t.s0(k);
      b += t.na_jump(k) * centered;
    }
    // dt part: compensator density (Z_i - zbar)' theta against the centered
    // outer products; the drift of dLambda and the Z_i' theta dt term combine
    const double len = t.interval_length(k);
    if (len > 0.0) {
      const double beta = zb.dot(theta);
      Matrix third = m2[k] - m1[k] * zb.transpose() - zb * m1[k].transpose() +
                     m0[k] * zb * zb.transpose();
      Matrix second = t.s2(k) - t.s1(k) * zb.transpose() -
                      zb * t.s1(k).transpose() + t.s0(k) * zb * zb.transpose();
      b += (third - beta * second) * len;
    }
  }
  return b / static_cast<double>(n);
}

Matrix compute_b_matrix(const Dataset& dataset, const WeightScheme& scheme,
                        const FitResult& fit) {
  return compute_b_matrix(RiskTable(dataset, scheme), fit);
}

}  // namespace zee
