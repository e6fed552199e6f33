#ifndef HETSLOPE_SVT_SOLVER_HPP
#define HETSLOPE_SVT_SOLVER_HPP

// Nuclear-norm penalized low-rank regression
//
//   min  ||Y - sum_r X_r o Theta_r - M||_F^2 + nu0 ||M||_* + sum_r nu_r ||Theta_r||_*
//
// solved by singular value thresholding. Two schemes are provided:
//   cyclic       block proximal-gradient steps on each Theta_r followed by the
//                exact M update; every step is checked for descent.
//   accelerated  monotone accelerated proximal gradient on the objective with
//                M profiled out (M is always the exact minimizer given Theta).
// Both minimize the same convex objective.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hetslope/linalg.hpp"

namespace hetslope::svt {

enum class Scheme { cyclic, accelerated };

inline std::string to_string(Scheme s) { return s == Scheme::cyclic ? "cyclic" : "accelerated"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "cyclic") return Scheme::cyclic;
  if (s == "accelerated") return Scheme::accelerated;
  fail(ErrorKind::InvalidInput, "unknown solver scheme '" + s + "'");
}

struct SolverOptions {
  double eps_step = 0.01;
  double tol_rel = 1e-9;
  // Stopping also requires every block to move by at most tol_step relative
  // to its size, so a flat objective cannot end the run far from the optimum.
  double tol_step = 1e-7;
  int max_iter = 10000;
  bool assert_monotone = true;
  Scheme scheme = Scheme::cyclic;

  void validate() const {
    require(eps_step > 0.0 && eps_step < 1.0, ErrorKind::InvalidInput, "eps_step must lie in (0,1)");
    require(tol_rel > 0.0, ErrorKind::InvalidInput, "tol_rel must be positive");
    require(tol_step > 0.0, ErrorKind::InvalidInput, "tol_step must be positive");
    require(max_iter >= 1, ErrorKind::InvalidInput, "max_iter must be at least 1");
  }
};

struct PenalizedFit {
  Matrix M_hat;
  std::vector<Matrix> theta_hat;
  double nu0 = 0.0;  // +inf when M is excluded from the model
  std::vector<double> nu;
  std::vector<double> objective_trace;
  bool converged = false;
  int iterations = 0;
  Index m_rank = 0;
  std::vector<Index> theta_ranks;

  bool includes_m() const { return std::isfinite(nu0); }
};

/// Starting values; empty members mean zeros.
struct StartValues {
  Matrix M;
  std::vector<Matrix> theta;
};

inline constexpr double kDescentSlack = 1e-10;

namespace detail {

inline void check_problem(const Matrix& y, const std::vector<Matrix>& x, const std::vector<double>& nu) {
  require(y.size() > 0, ErrorKind::InvalidInput, "outcome matrix is empty");
  linalg::require_finite(y, "outcome");
  require(x.size() == nu.size(), ErrorKind::InvalidInput,
          "got " + std::to_string(x.size()) + " regressors but " + std::to_string(nu.size()) +
              " penalties");
  for (std::size_t r = 0; r < x.size(); ++r) {
    linalg::require_same_shape(y, x[r], "regressor " + std::to_string(r + 1));
    linalg::require_finite(x[r], "regressor " + std::to_string(r + 1));
    require(nu[r] >= 0.0 && std::isfinite(nu[r]), ErrorKind::InvalidInput,
            "penalty " + std::to_string(r + 1) + " must be finite and nonnegative");
    require(x[r].cwiseAbs().maxCoeff() > 0.0, ErrorKind::DegenerateRegressor,
            "regressor " + std::to_string(r + 1) + " is identically zero");
  }
}

inline Matrix fitted_part(const Matrix& y, const std::vector<Matrix>& x, const std::vector<Matrix>& theta) {
  Matrix out = Matrix::Zero(y.rows(), y.cols());
  for (std::size_t r = 0; r < x.size(); ++r) out.array() += x[r].array() * theta[r].array();
  return out;
}

// Term nu * ||A||_* with the convention inf * 0 = 0 (excluded M).
inline double penalty_term(double nu, double nuclear) { return nuclear == 0.0 ? 0.0 : nu * nuclear; }

inline bool descended(double before, double after) {
  return after <= before + kDescentSlack * (1.0 + std::abs(before));
}

inline void start_values(const Matrix& y, std::size_t d, const StartValues* init, bool include_m,
                         Matrix& m, std::vector<Matrix>& theta) {
  m = Matrix::Zero(y.rows(), y.cols());
  theta.assign(d, Matrix::Zero(y.rows(), y.cols()));
  if (init == nullptr) return;
  if (include_m && init->M.size() > 0) {
    linalg::require_same_shape(y, init->M, "initial M");
    m = init->M;
  }
  if (!init->theta.empty()) {
    require(init->theta.size() == d, ErrorKind::InvalidInput, "initial value count does not match d");
    for (std::size_t r = 0; r < d; ++r) {
      linalg::require_same_shape(y, init->theta[r], "initial Theta");
      theta[r] = init->theta[r];
    }
  }
}

inline PenalizedFit run_cyclic(const Matrix& y, const std::vector<Matrix>& x, double nu0,
                               const std::vector<double>& nu, bool include_m,
                               const SolverOptions& opts, const StartValues* init) {
  const std::size_t d = x.size();
  PenalizedFit fit;
  fit.nu0 = include_m ? nu0 : std::numeric_limits<double>::infinity();
  fit.nu = nu;
  std::vector<Matrix>& theta = fit.theta_hat;
  Matrix& m = fit.M_hat;
  start_values(y, d, init, include_m, m, theta);

  std::vector<double> tau(d), theta_nuc(d);
  fit.theta_ranks.assign(d, 0);
  for (std::size_t r = 0; r < d; ++r) {
    tau[r] = (1.0 - opts.eps_step) / x[r].array().square().maxCoeff();
    theta_nuc[r] = linalg::nuclear_norm(theta[r]);
  }
  double m_nuc = include_m ? linalg::nuclear_norm(m) : 0.0;

  auto penalties = [&] {
    double p = include_m ? penalty_term(nu0, m_nuc) : 0.0;
    for (std::size_t r = 0; r < d; ++r) p += penalty_term(nu[r], theta_nuc[r]);
    return p;
  };

  Matrix resid = y - fitted_part(y, x, theta) - m;
  double f = resid.squaredNorm() + penalties();
  fit.objective_trace.push_back(f);

  for (int k = 1; k <= opts.max_iter; ++k) {
    double f_step = f;
    double moved = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      // Theta_r - tau X_r o (X_r o Theta_r + others + M - Y) = Theta_r + tau X_r o resid
      const Matrix grad_point = theta[r] + tau[r] * x[r].cwiseProduct(resid);
      ThresholdResult st = linalg::soft_threshold(grad_point, tau[r] * nu[r] / 2.0, fit.theta_ranks[r]);
      resid.array() += x[r].array() * (theta[r] - st.value).array();
      moved = std::max(moved, (st.value - theta[r]).norm() / (1.0 + st.value.norm()));
      theta[r] = std::move(st.value);
      theta_nuc[r] = st.nuclear_norm;
      fit.theta_ranks[r] = st.rank;
      const double f_new = resid.squaredNorm() + penalties();
      if (opts.assert_monotone && !descended(f_step, f_new))
        fail(ErrorKind::DescentViolation, "objective rose in block " + std::to_string(r + 1) +
                                              " at iteration " + std::to_string(k));
      f_step = f_new;
    }
    if (include_m) {
      const Matrix target = resid + m;
      ThresholdResult st = linalg::soft_threshold(target, nu0 / 2.0, k > 1 ? fit.m_rank : -1);
      m = std::move(st.value);
      m_nuc = st.nuclear_norm;
      fit.m_rank = st.rank;
      resid = target - m;
    }
    // Refresh the residual to avoid drift from the incremental updates.
    resid = y - fitted_part(y, x, theta) - m;
    const double f_new = resid.squaredNorm() + penalties();
    if (opts.assert_monotone && !descended(f_step, f_new))
      fail(ErrorKind::DescentViolation, "objective rose in the M step at iteration " + std::to_string(k));
    fit.objective_trace.push_back(f_new);
    fit.iterations = k;
    const bool done =
        std::abs(f - f_new) <= opts.tol_rel * (1.0 + std::abs(f)) && moved <= opts.tol_step;
    f = f_new;
    if (done) {
      fit.converged = true;
      break;
    }
  }
  if (!include_m) m.setZero();
  return fit;
}

// Loss with M profiled out, min_M ||Z - M||^2 + nu0 ||M||_*, at Z = Y - sum X o Theta,
// plus what the next gradient step needs.
struct Profiled {
  double loss = 0.0;
  Matrix m;
  Matrix resid;  // Z - M*
  double m_nuc = 0.0;
  Index m_rank = 0;
};

inline Profiled profile(const Matrix& y, const std::vector<Matrix>& x, const std::vector<Matrix>& theta,
                        double nu0, bool include_m, Index m_rank_hint = -1) {
  Profiled out;
  Matrix z = y - fitted_part(y, x, theta);
  if (include_m) {
    ThresholdResult st = linalg::soft_threshold(z, nu0 / 2.0, m_rank_hint);
    out.resid = z - st.value;
    out.m = std::move(st.value);
    out.m_nuc = st.nuclear_norm;
    out.m_rank = st.rank;
  } else {
    out.m = Matrix::Zero(y.rows(), y.cols());
    out.resid = std::move(z);
  }
  out.loss = out.resid.squaredNorm() + (include_m ? penalty_term(nu0, out.m_nuc) : 0.0);
  return out;
}

inline double theta_penalty(const std::vector<double>& nu, const std::vector<double>& nuc) {
  double p = 0.0;
  for (std::size_t r = 0; r < nu.size(); ++r) p += penalty_term(nu[r], nuc[r]);
  return p;
}

// Monotone accelerated proximal gradient with restart. The step starts at
// the global bound (1 - eps) / max_it sum_r x_itr^2, grows between iterations
// and is halved (never below the bound) until the quadratic upper model holds.
inline PenalizedFit run_accelerated(const Matrix& y, const std::vector<Matrix>& x, double nu0,
                                    const std::vector<double>& nu, bool include_m,
                                    const SolverOptions& opts, const StartValues* init) {
  const std::size_t d = x.size();
  PenalizedFit fit;
  fit.nu0 = include_m ? nu0 : std::numeric_limits<double>::infinity();
  fit.nu = nu;
  Matrix m0;
  std::vector<Matrix> cur;
  start_values(y, d, init, include_m, m0, cur);

  Matrix sumsq = Matrix::Zero(y.rows(), y.cols());
  for (const auto& xr : x) sumsq.array() += xr.array().square();
  const double tau_safe = (1.0 - opts.eps_step) / sumsq.maxCoeff();
  const double tau_cap = 1e4 * tau_safe;
  double tau = tau_safe;

  std::vector<double> cur_nuc(d);
  for (std::size_t r = 0; r < d; ++r) cur_nuc[r] = linalg::nuclear_norm(cur[r]);
  Profiled at_cur = profile(y, x, cur, nu0, include_m);
  double f_cur = at_cur.loss + theta_penalty(nu, cur_nuc);
  fit.objective_trace.push_back(f_cur);

  std::vector<Matrix> prev = cur;
  std::vector<Matrix> look = cur;  // extrapolated point
  bool look_is_cur = true;
  double t = 1.0;

  std::vector<Matrix> cand(d), grad(d);
  std::vector<double> cand_nuc(d);
  std::vector<Index> cand_rank(d, -1);
  for (int k = 1; k <= opts.max_iter; ++k) {
    fit.iterations = k;
    Profiled at_look_store;
    if (!look_is_cur) at_look_store = profile(y, x, look, nu0, include_m, at_cur.m_rank);
    const Profiled& at_look = look_is_cur ? at_cur : at_look_store;
    for (std::size_t r = 0; r < d; ++r) grad[r] = x[r].cwiseProduct(at_look.resid);

    Profiled at_cand;
    bool shrunk = false;
    for (;;) {
      double lin = 0.0, dist = 0.0;
      for (std::size_t r = 0; r < d; ++r) {
        ThresholdResult st = linalg::soft_threshold(look[r] + tau * grad[r], tau * nu[r] / 2.0, cand_rank[r]);
        cand[r] = std::move(st.value);
        cand_nuc[r] = st.nuclear_norm;
        cand_rank[r] = st.rank;
        const Matrix diff = cand[r] - look[r];
        lin += (grad[r].array() * diff.array()).sum();
        dist += diff.squaredNorm();
      }
      at_cand = profile(y, x, cand, nu0, include_m, at_cur.m_rank);
      const double model = at_look.loss - 2.0 * lin + dist / tau;
      if (tau <= tau_safe || at_cand.loss <= model + 1e-12 * (1.0 + std::abs(model))) break;
      tau = std::max(0.5 * tau, tau_safe);
      shrunk = true;
    }
    if (!shrunk) tau = std::min(1.25 * tau, tau_cap);

    const double f_cand = at_cand.loss + theta_penalty(nu, cand_nuc);
    if (f_cand <= f_cur) {
      const double f_old = f_cur;
      prev.swap(cur);
      cur = cand;
      cur_nuc = cand_nuc;
      at_cur = std::move(at_cand);
      f_cur = f_cand;
      fit.objective_trace.push_back(f_cur);
      const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
      const double w = (t - 1.0) / t_next;
      for (std::size_t r = 0; r < d; ++r) look[r] = cur[r] + w * (cur[r] - prev[r]);
      look_is_cur = (w == 0.0);
      t = t_next;
      double moved = 0.0;
      for (std::size_t r = 0; r < d; ++r)
        moved = std::max(moved, (cur[r] - prev[r]).norm() / (1.0 + cur[r].norm()));
      if (std::abs(f_old - f_cur) <= opts.tol_rel * (1.0 + std::abs(f_old)) && moved <= opts.tol_step) {
        fit.converged = true;
        break;
      }
    } else if (look_is_cur) {
      // A proximal step from the current point that satisfies the upper model
      // cannot increase the objective; failing to improve means we are done.
      fit.converged = true;
      break;
    } else {
      t = 1.0;
      look = cur;
      look_is_cur = true;
    }
  }
  fit.theta_hat = std::move(cur);
  fit.theta_ranks.resize(d);
  for (std::size_t r = 0; r < d; ++r)
    fit.theta_ranks[r] = linalg::numerical_rank(linalg::singular_values(fit.theta_hat[r]));
  fit.M_hat = std::move(at_cur.m);
  fit.m_rank = at_cur.m_rank;
  return fit;
}

}  // namespace detail

/// ||Y - sum X_r o Theta_r - M||_F^2 + nu0 ||M||_* + sum nu_r ||Theta_r||_*
inline double objective(const Matrix& y, const std::vector<Matrix>& x, const std::vector<Matrix>& theta,
                        const Matrix& m, double nu0, const std::vector<double>& nu) {
  require(x.size() == theta.size() && x.size() == nu.size(), ErrorKind::InvalidInput,
          "regressor, coefficient and penalty lists differ in length");
  linalg::require_same_shape(y, m, "M");
  for (std::size_t r = 0; r < x.size(); ++r) {
    linalg::require_same_shape(y, x[r], "regressor");
    linalg::require_same_shape(y, theta[r], "coefficient");
  }
  const Matrix resid = y - detail::fitted_part(y, x, theta) - m;
  double value = resid.squaredNorm() + detail::penalty_term(nu0, linalg::nuclear_norm(m));
  for (std::size_t r = 0; r < x.size(); ++r)
    value += detail::penalty_term(nu[r], linalg::nuclear_norm(theta[r]));
  return value;
}

inline double objective(const Matrix& y, const std::vector<Matrix>& x, const PenalizedFit& fit) {
  return objective(y, x, fit.theta_hat, fit.M_hat, fit.nu0, fit.nu);
}

/// Minimizer of ||Y - M||_F^2 + nu ||M||_*, i.e. soft thresholding at nu/2.
inline Matrix fit_pure_factor(const Matrix& y, double nu) {
  require(nu >= 0.0, ErrorKind::InvalidInput, "penalty must be nonnegative");
  return linalg::soft_threshold_sv(y, nu / 2.0);
}

/// Joint fit of M and Theta_1..Theta_d. d = 0 uses the closed form.
inline PenalizedFit fit_joint(const Matrix& y, const std::vector<Matrix>& x, double nu0,
                              const std::vector<double>& nu, const SolverOptions& opts = {},
                              const StartValues* init = nullptr) {
  opts.validate();
  detail::check_problem(y, x, nu);
  require(nu0 >= 0.0 && std::isfinite(nu0), ErrorKind::InvalidInput, "nu0 must be finite and nonnegative");
  if (x.empty()) {
    PenalizedFit fit;
    ThresholdResult st = linalg::soft_threshold(y, nu0 / 2.0);
    fit.nu0 = nu0;
    fit.objective_trace.push_back(y.squaredNorm());
    fit.objective_trace.push_back((y - st.value).squaredNorm() + detail::penalty_term(nu0, st.nuclear_norm));
    fit.M_hat = std::move(st.value);
    fit.m_rank = st.rank;
    fit.converged = true;
    fit.iterations = 1;
    return fit;
  }
  return opts.scheme == Scheme::cyclic ? detail::run_cyclic(y, x, nu0, nu, true, opts, init)
                                       : detail::run_accelerated(y, x, nu0, nu, true, opts, init);
}

/// Fit with M fixed at zero: min ||Y - sum X_r o Theta_r||^2 + sum nu_r ||Theta_r||_*.
inline PenalizedFit fit_without_m(const Matrix& y, const std::vector<Matrix>& x, const std::vector<double>& nu,
                                  const SolverOptions& opts = {}, const StartValues* init = nullptr) {
  opts.validate();
  require(!x.empty(), ErrorKind::InvalidInput, "at least one regressor is required");
  detail::check_problem(y, x, nu);
  const double none = std::numeric_limits<double>::infinity();
  return opts.scheme == Scheme::cyclic ? detail::run_cyclic(y, x, none, nu, false, opts, init)
                                       : detail::run_accelerated(y, x, none, nu, false, opts, init);
}

/// Iterates Theta <- S_{tau nu/2}(Theta - tau X o (X o Theta - Y)).
inline Matrix fit_single_regressor(const Matrix& y, const Matrix& x, double nu, const SolverOptions& opts = {}) {
  return fit_without_m(y, {x}, {nu}, opts).theta_hat.front();
}

struct KktReport {
  std::vector<double> theta;  // ||Theta_r - prox step||_F / (1 + ||Theta_r||_F)
  double m = 0.0;             // same for the M block (0 when M is excluded)

  double worst() const {
    double w = m;
    for (double v : theta) w = std::max(w, v);
    return w;
  }
};

/// Fixed-point residuals of the proximal maps at a fit, with per-block
/// step sizes tau_r = (1 - eps_step) / max x_r^2.
inline KktReport kkt_residuals(const Matrix& y, const std::vector<Matrix>& x, const PenalizedFit& fit,
                               double eps_step = 0.01) {
  KktReport rep;
  const Matrix resid = y - detail::fitted_part(y, x, fit.theta_hat) - fit.M_hat;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double tau = (1.0 - eps_step) / x[r].array().square().maxCoeff();
    const Matrix& th = fit.theta_hat[r];
    const Matrix step = linalg::soft_threshold_sv(th + tau * x[r].cwiseProduct(resid), tau * fit.nu[r] / 2.0);
    rep.theta.push_back((th - step).norm() / (1.0 + th.norm()));
  }
  if (fit.includes_m()) {
    const Matrix step = linalg::soft_threshold_sv(resid + fit.M_hat, fit.nu0 / 2.0);
    rep.m = (fit.M_hat - step).norm() / (1.0 + fit.M_hat.norm());
  }
  return rep;
}

}  // namespace hetslope::svt

#endif  // HETSLOPE_SVT_SOLVER_HPP
