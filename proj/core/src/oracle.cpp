#include "zee/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace zee {

namespace {

struct OracleContext {
  RiskTable table;
  std::vector<double> event_times;     // s_1 < ... < s_m
  std::vector<double> zbar_theta_len;  // per grid interval: zbar'theta * len (filled per theta)

  explicit OracleContext(const Dataset& ds, const WeightScheme& scheme)
      : table(ds, scheme) {
    for (int i = 0; i < table.n(); ++i)
      if (table.event(i)) event_times.push_back(table.time(i));
    std::sort(event_times.begin(), event_times.end());
    event_times.erase(std::unique(event_times.begin(), event_times.end()),
                      event_times.end());
  }

  // F(theta, jumps): all p + m weighted EE averages
  Vector residuals(const Vector& theta, const Vector& jumps) const {
    const int n = table.n();
    const int p = table.p();
    const int m = static_cast<int>(event_times.size());
    const int K = table.grid_size();

    // int_0^{t_k} zbar'theta dt at each grid point
    std::vector<double> cum_g(K);
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      acc += table.zmean(k).dot(theta) * table.interval_length(k);
      cum_g[k] = acc;
    }
    auto drift_at = [&](double t) {  // t is always a grid point here
      if (t <= 0.0) return 0.0;
      const int k = table.suffix_index(t);
      return cum_g[k];
    };
    auto jump_sum_at = [&](double t) {
      double s = 0.0;
      for (int k = 0; k < m && event_times[k] <= t; ++k) s += jumps[k];
      return s;
    };

    Vector out = Vector::Zero(p + m);
    for (int i = 0; i < n; ++i) {
      const double w = table.weight(i);
      if (w == 0.0) continue;
      const double ti = table.time(i);
      const double ai = table.covariate(i).dot(theta);

      // dM_i mass over [0, T_i]: counting part minus candidate compensator
      const double full = table.event(i) - jump_sum_at(ti) + drift_at(ti) -
                          ai * ti;
      for (int j = 0; j < p; ++j) out[j] += w * table.covariate(i)[j] * full;

      for (int k = 0; k < m; ++k) {
        const double s = event_times[k];
        const double mcap = std::min(ti, s);
        const double part = (table.event(i) && ti <= s ? 1.0 : 0.0) -
                            jump_sum_at(mcap) + drift_at(mcap) - ai * mcap;
        out[p + k] += w * part;
      }
    }
    return out / static_cast<double>(n);
  }
};

}  // namespace

IndexGrid make_index_grid(const Dataset& dataset, const WeightScheme& scheme) {
  OracleContext ctx(dataset, scheme);
  return IndexGrid{ctx.table.p(), ctx.event_times};
}

Vector ee_residuals(const Dataset& dataset, const WeightScheme& scheme,
                    const Vector& theta, const Vector& lambda_jumps) {
  OracleContext ctx(dataset, scheme);
  if (lambda_jumps.size() != static_cast<int>(ctx.event_times.size()))
    fail(ErrorCode::DomainError, "one jump per distinct event time expected");
  if (theta.size() != ctx.table.p())
    fail(ErrorCode::DomainError, "theta dimension mismatch");
  return ctx.residuals(theta, lambda_jumps);
}

double ee_residual(const Dataset& dataset, const WeightScheme& scheme,
                   const Vector& theta, const Vector& lambda_jumps,
                   int index) {
  const Vector r = ee_residuals(dataset, scheme, theta, lambda_jumps);
  if (index < 0 || index >= r.size())
    fail(ErrorCode::DomainError, "index outside the grid");
  return r[index];
}

OracleSolution solve_ee(const Dataset& dataset, const WeightScheme& scheme,
                        const Vector& init_theta, const Vector& init_jumps,
                        const OracleOptions& opts) {
  OracleContext ctx(dataset, scheme);
  const int p = ctx.table.p();
  const int m = static_cast<int>(ctx.event_times.size());
  const int dim = p + m;
  if (dim > opts.cap)
    fail(ErrorCode::ConfigError,
         "grid system of dimension " + std::to_string(dim) +
             " exceeds the oracle cap");
  if (init_theta.size() != p || init_jumps.size() != m)
    fail(ErrorCode::DomainError, "initial point dimension mismatch");

  auto eval = [&](const Vector& x) {
    return ctx.residuals(x.head(p), x.tail(m));
  };

  Vector x(dim);
  x << init_theta, init_jumps;
  Vector f = eval(x);
  double fnorm = dim ? f.cwiseAbs().maxCoeff() : 0.0;

  OracleSolution sol;
  sol.event_times = ctx.event_times;
  int iter = 0;
  for (; iter < opts.max_iter && fnorm > opts.tol; ++iter) {
    // central-difference Jacobian
    Matrix jac(dim, dim);
    for (int j = 0; j < dim; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(x[j]));
      Vector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      jac.col(j) = (eval(xp) - eval(xm)) / (2.0 * h);
    }
    Eigen::FullPivLU<Matrix> lu(jac);
    if (!lu.isInvertible())
      fail(ErrorCode::SingularJacobian, "grid system Jacobian is singular");
    const Vector step = lu.solve(-f);

    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Vector cand = x + t * step;
      const Vector fc = eval(cand);
      const double cnorm = fc.cwiseAbs().maxCoeff();
      if (cnorm < fnorm) {
        x = cand;
        f = fc;
        fnorm = cnorm;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
  }

  if (fnorm > opts.tol)
    fail(ErrorCode::NoConvergence,
         "grid system residual " + std::to_string(fnorm) + " after " +
             std::to_string(iter) + " iterations");

  sol.theta = x.head(p);
  sol.jumps = x.tail(m);
  sol.iterations = iter;
  sol.max_residual = fnorm;
  sol.converged = true;
  return sol;
}

OracleSolution solve_ee(const Dataset& dataset, const WeightScheme& scheme,
                        const OracleOptions& opts) {
  OracleContext ctx(dataset, scheme);
  return solve_ee(dataset, scheme, Vector::Zero(ctx.table.p()),
                  Vector::Zero(static_cast<int>(ctx.event_times.size())),
                  opts);
}

}  // namespace zee
