#ifndef HETSLOPE_TUNING_HPP
#define HETSLOPE_TUNING_HPP

// Penalty levels from simulated score norms. With Z a matrix of iid
// N(0, sigma_u^2) draws,
//   nu0   = 2 (1 + c1) * quantile_{1-delta} ||Z||
//   nu_r  = 2 (1 + c1) * quantile_{1-delta} ||X_r o Z||
// and sigma_u^2 is refined by refitting until it settles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hetslope/linalg.hpp"
#include "hetslope/rng.hpp"
#include "hetslope/svt_solver.hpp"

namespace hetslope::tuning {

struct TuningOptions {
  double c1 = 0.1;
  double delta = 0.05;
  int n_sims = 200;
  std::uint64_t seed = 20240601;
  int max_rounds = 20;
  double rel_change = 0.01;
  bool include_m = true;
  svt::SolverOptions solver = [] {
    svt::SolverOptions o;
    o.scheme = svt::Scheme::accelerated;
    return o;
  }();

  void validate() const {
    require(c1 >= 0.0, ErrorKind::InvalidInput, "c1 must be nonnegative");
    require(delta > 0.0 && delta < 1.0, ErrorKind::InvalidInput, "delta must lie in (0,1)");
    require(n_sims >= 20, ErrorKind::InvalidInput, "n_sims must be at least 20");
    require(max_rounds >= 1, ErrorKind::InvalidInput, "max_rounds must be at least 1");
    require(rel_change > 0.0, ErrorKind::InvalidInput, "rel_change must be positive");
    solver.validate();
  }
};

struct Penalties {
  double nu0 = 0.0;
  std::vector<double> nu;
};

struct TuningResult {
  double nu0 = 0.0;
  std::vector<double> nu;
  double sigma_u_sq = 0.0;
  double c1 = 0.1;
  double delta = 0.05;
  int n_sims = 200;
  int iterations = 0;
  bool converged = false;
  std::vector<double> sigma_path;  // residual variance after each round, starting value first
};

struct TunedFit {
  TuningResult tuning;
  svt::PenalizedFit fit;
};

/// Sample quantile with linear interpolation between order statistics.
inline double empirical_quantile(std::vector<double> values, double p) {
  require(!values.empty(), ErrorKind::InvalidInput, "quantile of an empty sample");
  require(p >= 0.0 && p <= 1.0, ErrorKind::InvalidInput, "quantile level must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// Pooled least squares of y on (1, x_1, ..., x_d); mean squared residual.
inline double homogeneous_residual_variance(const Matrix& y, const std::vector<Matrix>& x) {
  const Index nt = y.size();
  const Index p = static_cast<Index>(x.size()) + 1;
  require(nt > p, ErrorKind::InvalidInput, "need more cells than regressors plus one");
  Matrix design(nt, p);
  design.col(0).setOnes();
  for (std::size_t r = 0; r < x.size(); ++r) {
    linalg::require_same_shape(y, x[r], "covariate");
    design.col(static_cast<Index>(r) + 1) = x[r].reshaped();
  }
  const Vector yy = y.reshaped();
  Vector beta;
  try {
    beta = linalg::least_squares(design, yy);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SingularDesign)
      fail(ErrorKind::DegenerateRegressor, "pooled regressors are collinear");
    throw;
  }
  return (yy - design * beta).squaredNorm() / static_cast<double>(nt);
}

/// Quantiles of ||Z|| and ||X_r o Z|| for unit-variance Z. Draw j uses its own
/// seed, so the result is the same for any thread count.
inline Penalties unit_score_quantiles(const std::vector<Matrix>& x, Index rows, Index cols, double delta,
                                      int n_sims, std::uint64_t seed) {
  const std::size_t d = x.size();
  std::vector<std::vector<double>> draws(d + 1, std::vector<double>(static_cast<std::size_t>(n_sims)));
  parallel_for(static_cast<std::size_t>(n_sims), [&](std::size_t j) {
    Rng rng(derive_seed(seed, j));
    const Matrix z = standard_normal(rows, cols, rng);
    draws[0][j] = linalg::operator_norm(z);
    for (std::size_t r = 0; r < d; ++r) draws[r + 1][j] = linalg::operator_norm(x[r].cwiseProduct(z));
  });
  Penalties out;
  out.nu0 = empirical_quantile(draws[0], 1.0 - delta);
  for (std::size_t r = 0; r < d; ++r) out.nu.push_back(empirical_quantile(draws[r + 1], 1.0 - delta));
  return out;
}

inline Penalties simulate_tuning(const std::vector<Matrix>& x, Index rows, Index cols, double sigma_u_sq,
                                 double c1, double delta, int n_sims, std::uint64_t seed) {
  require(sigma_u_sq >= 0.0 && std::isfinite(sigma_u_sq), ErrorKind::InvalidInput,
          "residual variance must be finite and nonnegative");
  require(n_sims >= 20, ErrorKind::InvalidInput, "n_sims must be at least 20");
  require(delta > 0.0 && delta < 1.0, ErrorKind::InvalidInput, "delta must lie in (0,1)");
  for (const auto& xr : x) require(xr.rows() == rows && xr.cols() == cols, ErrorKind::InvalidInput,
                                   "covariate dimensions differ from the outcome");
  Penalties q = unit_score_quantiles(x, rows, cols, delta, n_sims, seed);
  // Gaussian quantiles scale exactly with sigma_u.
  const double scale = 2.0 * (1.0 + c1) * std::sqrt(sigma_u_sq);
  q.nu0 *= scale;
  for (double& v : q.nu) v *= scale;
  return q;
}

/// Overload taking the outcome dimensions from the first covariate.
inline Penalties simulate_tuning(const std::vector<Matrix>& x, double sigma_u_sq, double c1, double delta,
                                 int n_sims, std::uint64_t seed) {
  require(!x.empty(), ErrorKind::InvalidInput, "dimensions needed when there are no covariates");
  return simulate_tuning(x, x.front().rows(), x.front().cols(), sigma_u_sq, c1, delta, n_sims, seed);
}

inline Penalties simulate_tuning(const std::vector<Matrix>& x, Index rows, Index cols, double sigma_u_sq,
                                 const TuningOptions& opts) {
  return simulate_tuning(x, rows, cols, sigma_u_sq, opts.c1, opts.delta, opts.n_sims, opts.seed);
}

inline svt::PenalizedFit fit_with(const Matrix& y, const std::vector<Matrix>& x, const Penalties& pen,
                                  const TuningOptions& opts, const svt::StartValues* init) {
  return opts.include_m ? svt::fit_joint(y, x, pen.nu0, pen.nu, opts.solver, init)
                        : svt::fit_without_m(y, x, pen.nu, opts.solver, init);
}

inline double fitted_residual_variance(const Matrix& y, const std::vector<Matrix>& x,
                                       const svt::PenalizedFit& fit) {
  Matrix resid = y - fit.M_hat;
  for (std::size_t r = 0; r < x.size(); ++r) resid.array() -= x[r].array() * fit.theta_hat[r].array();
  return resid.squaredNorm() / static_cast<double>(y.size());
}

/// Alternates penalty simulation and refitting until the residual variance
/// changes by less than rel_change. The returned variance is the one that
/// produced the returned penalties; the fit uses those penalties.
inline TunedFit iterative_tuning(const Matrix& y, const std::vector<Matrix>& x, const TuningOptions& opts = {}) {
  opts.validate();
  require(opts.include_m || !x.empty(), ErrorKind::InvalidInput, "nothing to fit");
  TunedFit out;
  TuningResult& res = out.tuning;
  res.c1 = opts.c1;
  res.delta = opts.delta;
  res.n_sims = opts.n_sims;

  // Unit quantiles are computed once; every round only rescales them.
  const Penalties unit = unit_score_quantiles(x, y.rows(), y.cols(), opts.delta, opts.n_sims, opts.seed);
  auto penalties_at = [&](double s2) {
    Penalties p = unit;
    const double scale = 2.0 * (1.0 + opts.c1) * std::sqrt(s2);
    p.nu0 *= scale;
    for (double& v : p.nu) v *= scale;
    return p;
  };

  double sigma_sq = homogeneous_residual_variance(y, x);
  res.sigma_path.push_back(sigma_sq);
  const double floor = 1e-14 * (1.0 + y.squaredNorm() / static_cast<double>(y.size()));
  svt::StartValues warm;
  bool have_warm = false;
  for (int round = 1; round <= opts.max_rounds; ++round) {
    const Penalties pen = penalties_at(sigma_sq);
    out.fit = fit_with(y, x, pen, opts, have_warm ? &warm : nullptr);
    res.nu0 = opts.include_m ? pen.nu0 : std::numeric_limits<double>::infinity();
    res.nu = pen.nu;
    res.sigma_u_sq = sigma_sq;
    res.iterations = round;
    warm.M = out.fit.M_hat;
    warm.theta = out.fit.theta_hat;
    have_warm = true;
    const double next = fitted_residual_variance(y, x, out.fit);
    res.sigma_path.push_back(next);
    if (sigma_sq <= floor || std::abs(next - sigma_sq) < opts.rel_change * sigma_sq) {
      res.converged = true;
      break;
    }
    sigma_sq = next;
  }
  return out;
}

}  // namespace hetslope::tuning

#endif  // HETSLOPE_TUNING_HPP
