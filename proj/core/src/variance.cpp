#include "zee/variance.hpp"

#include <algorithm>
#include <cmath>

namespace zee {

namespace {

Matrix spd_inverse(const Matrix& a) {
  if (a.rows() == 0) return a;
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

Matrix auxiliary_matrix(const Dataset& ds) {
  const int n = ds.size();
  const int q = ds.auxiliary_dim();
  Matrix vt(n, q);
  for (int i = 0; i < n; ++i) vt.row(i) = ds.record(i).auxiliary.transpose();
  return vt;
}

Vector ipw_factor(const Dataset& ds) {  // R/pi
  const int n = ds.size();
  Vector c(n);
  for (int i = 0; i < n; ++i) {
    const auto& r = ds.record(i);
    c[i] = r.selected ? 1.0 / r.sampling_prob : 0.0;
  }
  return c;
}

Vector penalty_factor(const Dataset& ds) {  // (R/pi)(1-pi)/pi
  const int n = ds.size();
  Vector m(n);
  for (int i = 0; i < n; ++i) {
    const auto& r = ds.record(i);
    m[i] = r.selected
               ? (1.0 - r.sampling_prob) / (r.sampling_prob * r.sampling_prob)
               : 0.0;
  }
  return m;
}

Matrix weighted_gram(const Matrix& rows, const Vector& w) {
  return rows.transpose() * w.asDiagonal() * rows / rows.rows();
}

// projection-residual penalty: weights `pw` in the quadratic form, moments
// (`cw`, `mm`) in the projection. When the moments equal the penalty weights
// the moment matrix may be rank deficient on directions with no penalty
// support; the min-norm least-squares solution is the correct projection
// there, so those callers pass allow_rank_deficient.
Matrix projection_penalty(const Matrix& rows, const Matrix& vt,
                          const Vector& pw, const Vector& cw, const Matrix& mm,
                          bool allow_rank_deficient = false) {
  const int n = static_cast<int>(rows.rows());
  const Matrix c = rows.transpose() * cw.asDiagonal() * vt / n;  // d x q
  Matrix proj;                                                   // n x d
  if (allow_rank_deficient) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(mm);
    proj = vt * cod.solve(c.transpose());
  } else {
    Eigen::FullPivLU<Matrix> lu(mm);
    if (!lu.isInvertible())
      fail(ErrorCode::SingularAuxiliary,
           "A.6: auxiliary second-moment matrix singular");
    proj = vt * lu.solve(c.transpose());
  }
  const Matrix resid = rows - proj;
  return resid.transpose() * pw.asDiagonal() * resid / n;
}

}  // namespace

FitAnalysis::FitAnalysis(const Dataset& dataset, const WeightScheme& scheme,
                         const FitResult& fit)
    : dataset_(dataset), scheme_(scheme), fit_(fit), table_(dataset, scheme) {
  const int K = table_.grid_size();
  const Vector& theta = fit_.theta;
  const int p = table_.p();

  cum_jump_.resize(K);
  cum_zjump_.resize(K);
  cum_zint_.resize(K);
  cum_ztheta_int_.resize(K);
  cum_zbar_ztheta_.resize(K);
  cum_jump_over_y_.resize(K);
  cum_ztheta_over_y_.resize(K);
  cum_inv_y_.resize(K);

  double jump_acc = 0.0, ztheta_acc = 0.0, joy_acc = 0.0, ztoy_acc = 0.0,
         invy_acc = 0.0;
  Vector zjump_acc = Vector::Zero(p), zint_acc = Vector::Zero(p),
         zbar_ztheta_acc = Vector::Zero(p);
  for (int k = 0; k < K; ++k) {
    const double len = table_.interval_length(k);
    const Vector& zb = table_.zmean(k);
    const double ybar = table_.atrisk_mean(k);
    const double beta = zb.dot(theta);
    if (table_.event_mass(k) > 0.0) {
      const double atom = table_.na_jump(k);
      jump_acc += atom;
      zjump_acc += atom * zb;
      joy_acc += atom / ybar;
    }
    zint_acc += zb * len;
    ztheta_acc += beta * len;
    zbar_ztheta_acc += zb * beta * len;
    ztoy_acc += beta / ybar * len;
    invy_acc += len / ybar;

    cum_jump_[k] = jump_acc;
    cum_zjump_[k] = zjump_acc;
    cum_zint_[k] = zint_acc;
    cum_ztheta_int_[k] = ztheta_acc;
    cum_zbar_ztheta_[k] = zbar_ztheta_acc;
    cum_jump_over_y_[k] = joy_acc;
    cum_ztheta_over_y_[k] = ztoy_acc;
    cum_inv_y_[k] = invy_acc;
  }

  a_inverse_ = spd_inverse(fit_.a_matrix);
}

Matrix FitAnalysis::influence_theta() const {
  const int n = table_.n();
  const int p = table_.p();
  const Vector& theta = fit_.theta;
  Matrix rows = Matrix::Zero(n, p);
  for (int i = 0; i < n; ++i) {
    if (table_.weight(i) == 0.0) continue;
    const int k = table_.grid_index(i);
    const Vector zi = table_.covariate(i);
    const double ai = zi.dot(theta);

    Vector term = Vector::Zero(p);
    if (table_.event(i)) term = zi - table_.zmean(k);

    // int_0^{T_i} (Z_i - zbar) {dLambda + a_i dt}: atoms, then the drift of
    // dLambda, then the a_i dt piece
    Vector intm = zi * cum_jump_[k] - cum_zjump_[k];
    intm += -zi * cum_ztheta_int_[k] + cum_zbar_ztheta_[k];
    intm += ai * (zi * table_.time(i) - cum_zint_[k]);

    rows.row(i) = (a_inverse_ * (term - intm)).transpose();
  }
  return rows;
}

Vector FitAnalysis::lambda_base_rows(double s) const {
  if (s < 0.0 || s > table_.tau())
    fail(ErrorCode::DomainError, "target time outside [0, tau]");
  const int n = table_.n();
  const auto& grid = table_.grid();

  // prefix evaluation with a partial final interval
  auto interval_prefix = [&](const std::vector<double>& cum, auto interval_value,
                             double t) {
    if (t <= 0.0) return 0.0;
    const int k = table_.suffix_index(t);
    const double base = k > 0 ? cum[k - 1] : 0.0;
    const double start = table_.interval_start(k);
    return base + interval_value(k) * (t - start);
  };
  auto atoms_prefix = [&](const std::vector<double>& cum, double t) {
    const auto it = std::upper_bound(grid.begin(), grid.end(), t);
    const int idx = static_cast<int>(it - grid.begin());
    return idx > 0 ? cum[idx - 1] : 0.0;
  };
  auto inv_y = [&](int k) { return 1.0 / table_.atrisk_mean(k); };
  auto ztheta_over_y = [&](int k) {
    return table_.zmean(k).dot(fit_.theta) / table_.atrisk_mean(k);
  };

  Vector rows = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (table_.weight(i) == 0.0) continue;
    const double ti = table_.time(i);
    const double m = std::min(s, ti);
    const double ai = table_.covariate(i).dot(fit_.theta);
    double v = 0.0;
    if (table_.event(i) && ti <= s)
      v += 1.0 / table_.atrisk_mean(table_.grid_index(i));
    v -= atoms_prefix(cum_jump_over_y_, m);
    v += interval_prefix(cum_ztheta_over_y_, ztheta_over_y, m);
    v -= ai * interval_prefix(cum_inv_y_, inv_y, m);
    rows[i] = v;
  }
  return rows;
}

Vector FitAnalysis::d_vector(double s) const {
  if (s < 0.0 || s > table_.tau())
    fail(ErrorCode::DomainError, "target time outside [0, tau]");
  const int p = table_.p();
  if (s <= 0.0) return Vector::Zero(p);
  const int k = table_.suffix_index(s);
  Vector d = k > 0 ? cum_zint_[k - 1] : Vector::Zero(p);
  d += table_.zmean(k) * (s - table_.interval_start(k));
  return d;
}

Vector FitAnalysis::influence_lambda(double s) const {
  Vector rows = lambda_base_rows(s);
  if (table_.p() > 0) {
    const Vector d = d_vector(s);
    const Matrix theta_rows = influence_theta();
    rows -= theta_rows * d;
  }
  return rows;
}

Vector FitAnalysis::influence_pred(double s, const Vector& z) const {
  if (z.size() != table_.p())
    fail(ErrorCode::DomainError, "covariate vector has wrong dimension");
  Vector rows = lambda_base_rows(s);
  if (table_.p() > 0) {
    const Vector d = d_vector(s) - z * s;
    const Matrix theta_rows = influence_theta();
    rows -= theta_rows * d;
  }
  return rows;
}

Matrix FitAnalysis::rows_for(const Target& target) const {
  if (std::holds_alternative<ThetaTarget>(target)) return influence_theta();
  if (const auto* lt = std::get_if<LambdaTarget>(&target))
    return influence_lambda(lt->s);
  const auto& pt = std::get<PredTarget>(target);
  return influence_pred(pt.s, pt.z);
}

Vector FitAnalysis::influence_rows(const Target& target) const {
  const Matrix rows = rows_for(target);
  if (rows.cols() != 1)
    fail(ErrorCode::DomainError, "scalar target expected");
  return rows.col(0);
}

VarianceEstimate FitAnalysis::robust_variance(const Matrix& rows) const {
  return zee::robust_variance(rows, dataset_, scheme_);
}

double FitAnalysis::model_based_scalar_first_term(double s,
                                                  const Vector& d) const {
  const int n = table_.n();
  const int K = table_.grid_size();
  const Vector v = a_inverse_ * d;
  const Vector& theta = fit_.theta;

  // suffix aggregates of c_i = v'Z_i, plain and a_i-weighted
  std::vector<double> sc(K, 0.0), scc(K, 0.0), sa(K, 0.0), sac(K, 0.0),
      sacc(K, 0.0);
  for (int i = 0; i < n; ++i) {
    if (table_.weight(i) == 0.0) continue;
    const int k = table_.grid_index(i);
    const double w = table_.weight(i);
    const double c = table_.covariate(i).dot(v);
    const double a = table_.covariate(i).dot(theta);
    sc[k] += w * c;
    scc[k] += w * c * c;
    sa[k] += w * a;
    sac[k] += w * a * c;
    sacc[k] += w * a * c * c;
  }
  for (int k = K - 2; k >= 0; --k) {
    sc[k] += sc[k + 1];
    scc[k] += scc[k + 1];
    sa[k] += sa[k + 1];
    sac[k] += sac[k + 1];
    sacc[k] += sacc[k + 1];
  }

  double first = 0.0;
  for (int k = 0; k < K; ++k) {
    const double cbar = table_.zmean(k).dot(v);
    const double beta = table_.zmean(k).dot(theta);
    const double ybar = table_.atrisk_mean(k);
    const double tk = table_.grid()[k];

    // sum_i w_i g_i^2 and sum_i w_i (a_i - beta) g_i^2 with g_i = e - c_i,
    // e = u + cbar
    auto quad = [&](double e) {
      return e * e * table_.s0(k) - 2.0 * e * sc[k] + scc[k];
    };
    auto quad_comp = [&](double e) {
      return (e * e * sa[k] - 2.0 * e * sac[k] + sacc[k]) - beta * quad(e);
    };

    if (table_.event_mass(k) > 0.0) {
      const double u = tk <= s ? 1.0 / ybar : 0.0;
      first += table_.na_jump(k) * quad(u + cbar);
    }
    const double lo = table_.interval_start(k);
    const double hi = tk;
    if (hi > lo) {
      if (s >= hi) {
        first += quad_comp(1.0 / ybar + cbar) * (hi - lo);
      } else if (s <= lo) {
        first += quad_comp(cbar) * (hi - lo);
      } else {
        first += quad_comp(1.0 / ybar + cbar) * (s - lo);
        first += quad_comp(cbar) * (hi - s);
      }
    }
  }
  return first / n;
}

VarianceEstimate FitAnalysis::model_based_variance(const Target& target,
                                                   const Matrix& rows) const {
  const int n = table_.n();
  Matrix first;
  if (std::holds_alternative<ThetaTarget>(target)) {
    first = a_inverse_ * fit_.b_matrix * a_inverse_;
  } else if (const auto* lt = std::get_if<LambdaTarget>(&target)) {
    first = Matrix::Constant(
        1, 1, model_based_scalar_first_term(lt->s, d_vector(lt->s)));
  } else {
    const auto& pt = std::get<PredTarget>(target);
    if (pt.z.size() != table_.p())
      fail(ErrorCode::DomainError, "covariate vector has wrong dimension");
    first = Matrix::Constant(
        1, 1,
        model_based_scalar_first_term(pt.s, d_vector(pt.s) - pt.z * pt.s));
  }

  VarianceEstimate out;
  out.kind = VarianceKind::ModelBased;
  out.scheme = scheme_.kind;
  out.n = n;
  switch (scheme_.kind) {
    case WeightScheme::Kind::Unit:
      out.value = first;
      break;
    case WeightScheme::Kind::Ipw:
      out.value = first + weighted_gram(rows, penalty_factor(dataset_));
      break;
    case WeightScheme::Kind::Calibrated: {
      const Matrix vt = auxiliary_matrix(dataset_);
      const Vector m = penalty_factor(dataset_);
      const Matrix mhat = vt.transpose() * vt / n;
      out.value = first + projection_penalty(rows, vt, m, ipw_factor(dataset_),
                                             mhat);
      break;
    }
  }
  return out;
}

std::pair<Matrix, Matrix> FitAnalysis::penalty_pair(const Matrix& rows,
                                                    bool same_moments) const {
  const Vector m = penalty_factor(dataset_);
  const Matrix vps = weighted_gram(rows, m);
  const Matrix vt = auxiliary_matrix(dataset_);
  const int n = table_.n();
  Matrix cal;
  if (same_moments) {
    const Matrix mhat = vt.transpose() * m.asDiagonal() * vt / n;
    cal = projection_penalty(rows, vt, m, m, mhat, true);
  } else {
    const Matrix mhat = vt.transpose() * vt / n;
    cal = projection_penalty(rows, vt, m, ipw_factor(dataset_), mhat);
  }
  return {vps, cal};
}

Matrix influence_theta(const Dataset& dataset, const WeightScheme& scheme,
                       const FitResult& fit) {
  return FitAnalysis(dataset, scheme, fit).influence_theta();
}

Vector influence_lambda(const Dataset& dataset, const WeightScheme& scheme,
                        const FitResult& fit, double s) {
  return FitAnalysis(dataset, scheme, fit).influence_lambda(s);
}

Vector influence_pred(const Dataset& dataset, const WeightScheme& scheme,
                      const FitResult& fit, double s, const Vector& z) {
  return FitAnalysis(dataset, scheme, fit).influence_pred(s, z);
}

VarianceEstimate robust_variance(const Matrix& rows, const Dataset& dataset,
                                 const WeightScheme& scheme) {
  const int n = dataset.size();
  if (rows.rows() != n)
    fail(ErrorCode::DomainError, "one influence row per subject expected");

  VarianceEstimate out;
  out.kind = VarianceKind::Robust;
  out.scheme = scheme.kind;
  out.n = n;
  switch (scheme.kind) {
    case WeightScheme::Kind::Unit:
      out.value = rows.transpose() * rows / n;
      break;
    case WeightScheme::Kind::Ipw: {
      Vector c(n);
      for (int i = 0; i < n; ++i) {
        const auto& r = dataset.record(i);
        c[i] = r.selected ? 1.0 / (r.sampling_prob * r.sampling_prob) : 0.0;
      }
      out.value = weighted_gram(rows, c);
      break;
    }
    case WeightScheme::Kind::Calibrated: {
      const Vector c1 = ipw_factor(dataset);
      const Matrix vt = auxiliary_matrix(dataset);
      const Matrix mhat = vt.transpose() * vt / n;
      out.value = weighted_gram(rows, c1) +
                  projection_penalty(rows, vt, penalty_factor(dataset), c1,
                                     mhat);
      break;
    }
  }
  return out;
}

VarianceEstimate model_based_variance(const Dataset& dataset,
                                      const WeightScheme& scheme,
                                      const FitResult& fit,
                                      const Target& target,
                                      const Matrix& rows) {
  return FitAnalysis(dataset, scheme, fit).model_based_variance(target, rows);
}

double frechet_apply(const Dataset& dataset, const WeightScheme& scheme,
                     const FrechetDirection& direction,
                     const IndexFunction& h) {
  const RiskTable t(dataset, scheme);
  const int K = t.grid_size();
  const int p = t.p();
  const double n = t.n();
  if (direction.dtheta.size() != p || h.h1.size() != p)
    fail(ErrorCode::DomainError, "direction/index dimension mismatch");

  // block 11: -h1' [P int Y ZZ' dt] dtheta
  Matrix a_raw = Matrix::Zero(p, p);
  for (int k = 0; k < K; ++k) a_raw += t.s2(k) * t.interval_length(k);
  double out = -h.h1.dot(a_raw * direction.dtheta) / n;

  // block 21: -[P int h2 Y Z' dt] dtheta, on the merged grid
  {
    std::vector<double> cuts = t.grid();
    for (double c : h.h2.knots())
      if (c > 0.0 && c <= t.tau()) cuts.push_back(c);
    cuts.push_back(t.tau());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    double lo = 0.0;
    Vector acc = Vector::Zero(p);
    for (double hi : cuts) {
      if (hi <= lo) continue;
      const int idx = t.suffix_index(hi);
      if (idx < K) {
        const double h2v = h.h2(0.5 * (lo + hi));
        acc += h2v * (hi - lo) * t.s1(idx);
      }
      lo = hi;
    }
    out -= acc.dot(direction.dtheta) / n;
  }

  // blocks 12 and 22: atoms of the dLambda direction against the closed
  // at-risk aggregates
  for (const auto& [tj, mass] : direction.dlambda.increments()) {
    if (mass == 0.0) continue;
    const int idx = t.suffix_index(tj);
    const double s0 = idx < K ? t.s0(idx) : 0.0;
    const Vector s1 = idx < K ? t.s1(idx) : Vector::Zero(p);
    out -= h.h1.dot(s1) * mass / n;
    out -= h.h2(tj) * s0 * mass / n;
  }
  return out;
}

IndexFunction theta_extraction_index(const Dataset& dataset,
                                     const WeightScheme& scheme,
                                     const Vector& h1) {
  const RiskTable t(dataset, scheme);
  const ThetaFit tf = fit_theta(t);
  const Vector u = spd_inverse(tf.a_matrix) * h1;

  const int K = t.grid_size();
  std::vector<double> values(K + 1);
  for (int k = 0; k < K; ++k) values[k] = u.dot(t.zmean(k));
  values[K] = values[K - 1];
  IndexFunction out{-u, StepFunction<double>(t.tau(), t.grid(),
                                             std::move(values),
                                             Continuity::Caglad)};
  return out;
}

}  // namespace zee
