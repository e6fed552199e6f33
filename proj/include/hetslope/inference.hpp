#ifndef HETSLOPE_INFERENCE_HPP
#define HETSLOPE_INFERENCE_HPP

// Debiased, cross-fitted estimates of theta_it,r = lambda_i,r' f_t,r with
// standard errors.
//
// For a target period t the remaining periods are split into halves I and
// I^c. Loadings are extracted from a penalized fit on one half; factors and
// loadings are then re-estimated by least squares on the other half plus t
// (first with the raw covariates, then with the covariate residuals e_hat),
// and the two directions are averaged.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hetslope/linalg.hpp"
#include "hetslope/orthogonalizer.hpp"
#include "hetslope/panel.hpp"
#include "hetslope/rank_select.hpp"
#include "hetslope/rng.hpp"
#include "hetslope/svt_solver.hpp"
#include "hetslope/tuning.hpp"

namespace hetslope::inference {

struct SplitPlan {
  Index target_t = 0;
  std::vector<Index> I;
  std::vector<Index> I_c;
  std::uint64_t seed = 0;
};

/// Random partition of {0..T-1} \ {t} with |I| = floor((T-1)/2); sets sorted.
inline SplitPlan make_split(Index T, Index t, std::uint64_t seed) {
  require(T >= 3, ErrorKind::InsufficientData, "need at least 3 periods to split");
  require(t >= 0 && t < T, ErrorKind::InvalidInput, "target period out of range");
  std::vector<Index> rest;
  for (Index s = 0; s < T; ++s)
    if (s != t) rest.push_back(s);
  Rng rng(seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  const auto half = static_cast<std::size_t>((T - 1) / 2);
  SplitPlan plan;
  plan.target_t = t;
  plan.seed = seed;
  plan.I.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(half));
  plan.I_c.assign(rest.begin() + static_cast<std::ptrdiff_t>(half), rest.end());
  std::sort(plan.I.begin(), plan.I.end());
  std::sort(plan.I_c.begin(), plan.I_c.end());
  return plan;
}

/// Random halves of all T periods (no excluded target).
inline SplitPlan make_panel_split(Index T, std::uint64_t seed) {
  require(T >= 2, ErrorKind::InsufficientData, "need at least 2 periods to split");
  std::vector<Index> all(static_cast<std::size_t>(T));
  std::iota(all.begin(), all.end(), Index{0});
  Rng rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  SplitPlan plan;
  plan.target_t = -1;
  plan.seed = seed;
  const auto half = static_cast<std::size_t>(T / 2);
  plan.I.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(half));
  plan.I_c.assign(all.begin() + static_cast<std::ptrdiff_t>(half), all.end());
  std::sort(plan.I.begin(), plan.I.end());
  std::sort(plan.I_c.begin(), plan.I_c.end());
  return plan;
}

/// sqrt(N) times the top-K eigenvectors of theta theta'. Columns beyond the
/// numerical rank of theta are zero and reported through `deficient`.
inline Matrix extract_loadings(const Matrix& theta, Index k, bool* deficient = nullptr) {
  require(k >= 1, ErrorKind::InvalidInput, "loading extraction needs K >= 1");
  const Index n = theta.rows();
  Matrix out = linalg::scaled_top_eigenvectors(theta * theta.transpose(), k, std::sqrt(static_cast<double>(n)));
  const Index rank = linalg::numerical_rank(linalg::singular_values(theta));
  if (deficient != nullptr) *deficient = rank < k;
  for (Index j = rank; j < k; ++j) out.col(j).setZero();
  return out;
}

/// Least-squares factors (per period) and loadings (per unit) for
///   target_is = a_i' g_s + sum_r w_is,r lambda_i,r' f_s,r
/// given seed loadings (A, Lambda_r). Columns index the evaluation periods.
struct TwoStep {
  std::vector<Matrix> f;       // per r: |E| x K_r
  Matrix g;                    // |E| x K0
  std::vector<Matrix> lambda;  // per r: N x K_r
  Matrix alpha;                // N x K0
};

inline TwoStep two_step_ls(const Matrix& target, const std::vector<Matrix>& w, const std::vector<Matrix>& lambda_seed,
                           const Matrix& a_seed, const std::vector<Index>& periods) {
  const Index n = target.rows(), ne = target.cols();
  const Index k0 = a_seed.cols();
  const std::size_t d = w.size();
  Index p = k0;
  std::vector<Index> offset(d);
  for (std::size_t r = 0; r < d; ++r) {
    offset[r] = p;
    p += lambda_seed[r].cols();
  }
  TwoStep out;
  out.g.resize(ne, k0);
  out.alpha.resize(n, k0);
  for (std::size_t r = 0; r < d; ++r) {
    out.f.emplace_back(ne, lambda_seed[r].cols());
    out.lambda.emplace_back(n, lambda_seed[r].cols());
  }
  if (p == 0) return out;

  Matrix design(n, p);
  for (Index s = 0; s < ne; ++s) {
    if (k0 > 0) design.leftCols(k0) = a_seed;
    for (std::size_t r = 0; r < d; ++r)
      design.middleCols(offset[r], lambda_seed[r].cols()) = lambda_seed[r].array().colwise() * w[r].col(s).array();
    const Vector coef = linalg::least_squares(design, target.col(s),
                                              "period " + std::to_string(periods[static_cast<std::size_t>(s)] + 1));
    if (k0 > 0) out.g.row(s) = coef.head(k0).transpose();
    for (std::size_t r = 0; r < d; ++r) out.f[r].row(s) = coef.segment(offset[r], lambda_seed[r].cols()).transpose();
  }
  Matrix udesign(ne, p);
  for (Index i = 0; i < n; ++i) {
    if (k0 > 0) udesign.leftCols(k0) = out.g;
    for (std::size_t r = 0; r < d; ++r)
      udesign.middleCols(offset[r], out.f[r].cols()) = out.f[r].array().colwise() * w[r].row(i).transpose().array();
    const Vector coef = linalg::least_squares(udesign, target.row(i).transpose(), "unit " + std::to_string(i + 1));
    if (k0 > 0) out.alpha.row(i) = coef.head(k0).transpose();
    for (std::size_t r = 0; r < d; ++r)
      out.lambda[r].row(i) = coef.segment(offset[r], out.f[r].cols()).transpose();
  }
  return out;
}

inline Matrix take_columns(const Matrix& a, const std::vector<Index>& cols) { return linalg::select_columns(a, cols); }

/// Everything estimated in one direction: seed loadings from the estimation
/// periods, least-squares stages on the evaluation periods.
struct SplitFit {
  std::vector<Index> estimation;  // periods used for the penalized fit
  std::vector<Index> evaluation;  // periods where factors are estimated
  std::vector<Matrix> lambda_tilde;
  Matrix a_tilde;
  std::vector<Matrix> f_tilde;
  Matrix g_tilde;
  std::vector<Matrix> lambda_dot;
  Matrix alpha_dot;
  std::vector<Matrix> f_hat;
  Matrix g_hat;
  std::vector<Matrix> lambda_hat;
  Matrix alpha_hat;
  Matrix u_hat;  // N x |evaluation|
  bool orthogonalized = false;

  Index position(Index t) const {
    const auto it = std::lower_bound(evaluation.begin(), evaluation.end(), t);
    require(it != evaluation.end() && *it == t, ErrorKind::MissingEstimate,
            "period " + std::to_string(t + 1) + " is not an evaluation period of this split");
    return static_cast<Index>(it - evaluation.begin());
  }

  double effect(Index i, Index t, std::size_t r) const {
    const Index s = position(t);
    return lambda_hat[r].row(i).dot(f_hat[r].row(s));
  }

  double preliminary_effect(Index i, Index t, std::size_t r) const {
    const Index s = position(t);
    return lambda_dot[r].row(i).dot(f_tilde[r].row(s));
  }
};

inline TwoStep preliminary_stage(const Matrix& y, const std::vector<Matrix>& x, const std::vector<Matrix>& lambda_tilde,
                                 const Matrix& a_tilde, const std::vector<Index>& evaluation) {
  std::vector<Matrix> w;
  for (const auto& xr : x) w.push_back(take_columns(xr, evaluation));
  return two_step_ls(take_columns(y, evaluation), w, lambda_tilde, a_tilde, evaluation);
}

/// y_hat_is = y_is - sum_r mu_hat_is,r lambda_dot_i,r' f_tilde_s,r, then the
/// two least-squares steps with e_hat in place of x.
inline TwoStep orthogonalized_stage(const Matrix& y, const std::vector<Matrix>& mu_hat, const std::vector<Matrix>& e_hat,
                                    const TwoStep& preliminary, const std::vector<Matrix>& lambda_tilde,
                                    const Matrix& a_tilde, const std::vector<Index>& evaluation) {
  Matrix y_hat = take_columns(y, evaluation);
  std::vector<Matrix> w;
  for (std::size_t r = 0; r < e_hat.size(); ++r) {
    const Matrix theta_dot = preliminary.lambda[r] * preliminary.f[r].transpose();
    y_hat.array() -= take_columns(mu_hat[r], evaluation).array() * theta_dot.array();
    w.push_back(take_columns(e_hat[r], evaluation));
  }
  return two_step_ls(y_hat, w, lambda_tilde, a_tilde, evaluation);
}

/// Cross-fitted estimate: mean of the two split products.
inline double cross_fit_effect(const SplitFit& fit_I, const SplitFit& fit_Ic, Index i, Index t, std::size_t r) {
  return 0.5 * (fit_I.effect(i, t, r) + fit_Ic.effect(i, t, r));
}

struct GroupSpec {
  std::string id;
  std::vector<Index> members;

  void validate(Index n) const {
    require(!members.empty(), ErrorKind::InvalidInput, "group '" + id + "' has no members");
    for (Index i : members)
      require(i >= 0 && i < n, ErrorKind::InvalidInput, "group '" + id + "' member out of range");
  }
};

inline GroupSpec all_units(Index n, const std::string& id = "all") {
  GroupSpec g{id, std::vector<Index>(static_cast<std::size_t>(n))};
  std::iota(g.members.begin(), g.members.end(), Index{0});
  return g;
}

struct SplitVariance {
  double v_lambda = 0.0;  // lambda_G' V1^-1 V2 V1^-1 lambda_G
  double v_f = 0.0;       // f_t' V_f f_t
};

inline Matrix checked_inverse(const Matrix& a, const std::string& what) {
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& sv = svd.singularValues();
  require(sv.size() > 0 && sv(0) > 0.0 && sv(sv.size() - 1) > 1e-12 * sv(0), ErrorKind::SingularVariance,
          what + " is singular");
  return a.inverse();
}

/// Variance pieces of one split for the group average at period t.
/// `e` is the N x T matrix playing the role of e_hat (covariate residuals,
/// or the observation mask in completion).
inline SplitVariance split_variance(const SplitFit& fit, const Matrix& e, const GroupSpec& group, Index t,
                                    std::size_t r) {
  const Index n = e.rows(), total_t = e.cols();
  const Index pos = fit.position(t);
  const Matrix& lam = fit.lambda_hat[r];
  const Matrix& f = fit.f_hat[r];
  const Index k = lam.cols();
  const Index ne = f.rows();
  SplitVariance out;
  if (k == 0) return out;

  Matrix v1 = Matrix::Zero(k, k), v2 = Matrix::Zero(k, k);
  for (Index j = 0; j < n; ++j) {
    const double e2 = e(j, t) * e(j, t);
    const Matrix outer = lam.row(j).transpose() * lam.row(j);
    v1 += outer * e2;
    v2 += outer * (e2 * fit.u_hat(j, pos) * fit.u_hat(j, pos));
  }
  v1 /= static_cast<double>(n);
  v2 /= static_cast<double>(n);
  const Matrix v1_inv = checked_inverse(v1, "loading variance matrix");
  Vector lam_g = Vector::Zero(k);
  for (Index i : group.members) lam_g += lam.row(i).transpose();
  lam_g /= static_cast<double>(group.members.size());
  out.v_lambda = lam_g.dot(v1_inv * v2 * v1_inv * lam_g);

  const Matrix ff_inv = checked_inverse(f.transpose() * f / static_cast<double>(ne), "factor second-moment matrix");
  Matrix vf = Matrix::Zero(k, k);
  for (Index i : group.members) {
    const double sigma_e = e.row(i).squaredNorm() / static_cast<double>(total_t);
    require(sigma_e > 0.0, ErrorKind::SingularVariance, "unit " + std::to_string(i + 1) + " has zero residual variance");
    const Matrix omega = ff_inv / sigma_e;
    Matrix inner = Matrix::Zero(k, k);
    for (Index s = 0; s < ne; ++s) {
      const Index period = fit.evaluation[static_cast<std::size_t>(s)];
      const double w = e(i, period) * e(i, period) * fit.u_hat(i, s) * fit.u_hat(i, s);
      inner += f.row(s).transpose() * f.row(s) * w;
    }
    vf += omega * inner * omega;
  }
  vf /= static_cast<double>(group.members.size()) * static_cast<double>(ne);
  out.v_f = f.row(pos).dot(vf * f.row(pos).transpose());
  return out;
}

struct VarianceComponents {
  double v_lambda = 0.0;
  double v_f = 0.0;

  double se() const { return std::sqrt(std::max(0.0, v_lambda + v_f)); }
};

/// Cross-fitted variance for the group average at t: split pieces averaged,
/// scaled by 1/N and 1/(T |G|).
inline VarianceComponents variance_components(const SplitFit& fit_I, const SplitFit& fit_Ic, const Matrix& e,
                                              const GroupSpec& group, Index t, std::size_t r) {
  const double n = static_cast<double>(e.rows()), total_t = static_cast<double>(e.cols());
  const double g = static_cast<double>(group.members.size());
  const SplitVariance a = split_variance(fit_I, e, group, t, r);
  const SplitVariance b = split_variance(fit_Ic, e, group, t, r);
  return {(a.v_lambda + b.v_lambda) / (2.0 * n), (a.v_f + b.v_f) / (2.0 * total_t * g)};
}

/// Single-split variance (panel mode).
inline VarianceComponents single_split_variance(const SplitFit& fit, const Matrix& e, const GroupSpec& group, Index t,
                                                std::size_t r) {
  const double n = static_cast<double>(e.rows()), total_t = static_cast<double>(e.cols());
  const SplitVariance a = split_variance(fit, e, group, t, r);
  return {a.v_lambda / n, a.v_f / (total_t * static_cast<double>(group.members.size()))};
}

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Standard normal quantile (Acklam's rational approximation refined by one
/// Halley step).
inline double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorKind::InvalidInput, "probability must lie in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01, -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, rr = q * q;
    x = (((((a[0] * rr + a[1]) * rr + a[2]) * rr + a[3]) * rr + a[4]) * rr + a[5]) * q /
        (((((b[0] * rr + b[1]) * rr + b[2]) * rr + b[3]) * rr + b[4]) * rr + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

inline ConfidenceInterval confidence_interval(double estimate, double se, double level = 0.95) {
  require(se >= 0.0, ErrorKind::InvalidInput, "standard error must be nonnegative");
  require(level > 0.0 && level < 1.0, ErrorKind::InvalidInput, "level must lie in (0,1)");
  const double z = normal_quantile(0.5 * (1.0 + level));
  return {estimate - z * se, estimate + z * se};
}

enum class Mode { exact, panel };
// completion: no partialling out; the regressor itself (the mask) plays e_hat.
enum class Adjustment { partial_out, none, completion };

// Residual entering the variance: the orthogonalized regression's own
// (y_hat - e_hat lambda_hat' f_hat - alpha_hat' g_hat) or the observed-scale
// y - x lambda_hat' f_hat - alpha_hat' g_hat.
enum class Residual { final_regression, observed };

inline std::string to_string(Mode m) { return m == Mode::exact ? "exact" : "panel"; }

struct InferenceConfig {
  bool include_m = true;
  Adjustment adjustment = Adjustment::partial_out;
  // Rank overrides; negative entries (or an empty list) mean "estimate".
  Index m_rank = -1;
  std::vector<Index> ranks;
  // Covariate factor counts; empty means eigenvalue-ratio choice up to k_max.
  std::vector<Index> covariate_factors;
  Index k_max = 8;
  bool demean = true;
  std::uint64_t split_seed = 1;
  Mode mode = Mode::exact;
  Residual residual = Residual::final_regression;
  double level = 0.95;
  // Regressors to report; empty means all.
  std::vector<std::size_t> effects;
  tuning::TuningOptions tuning;
  // Residual variance used for the penalties. When absent the iterative
  // procedure is run.
  std::optional<double> sigma_u_sq;
  // Supplied penalties skip tuning entirely (sigma_u_sq then only drives
  // subsample penalties and must also be given).
  std::optional<tuning::TuningResult> penalties;
};

/// One target period: the plan and both split directions.
struct TargetSplits {
  SplitPlan plan;
  SplitFit fit_I;   // loadings from I, factors on I^c and t
  SplitFit fit_Ic;  // loadings from I^c, factors on I and t
};

struct GroupResult {
  std::string group;
  Index t = 0;
  std::size_t r = 0;
  double estimate = 0.0;
  double se = 0.0;
  double v_lambda = 0.0;
  double v_f = 0.0;
  ConfidenceInterval ci;
};

struct Target {
  Index t = 0;
  std::vector<GroupSpec> groups;  // evaluated at t; cells always get SEs
};

struct EffectEstimate {
  Index n = 0;
  Index periods = 0;
  Mode mode = Mode::exact;
  double level = 0.95;
  std::vector<Matrix> theta_hat;          // per regressor, N x T
  std::vector<Matrix> se;                 // NaN where not computed
  std::vector<Matrix> theta_preliminary;  // estimates without partialling out
  Index m_rank = 0;
  std::vector<Index> ranks;
  std::vector<Index> covariate_factors;
  std::vector<std::size_t> effects;
  std::vector<TargetSplits> splits;
  std::vector<GroupResult> group_results;
  std::vector<Matrix> e_hat;  // what plays e in the variance formulas
  tuning::TuningResult tuning;
  svt::PenalizedFit full_fit;

  const TargetSplits* splits_for(Index t) const {
    for (const auto& ts : splits)
      if (ts.plan.target_t == t) return &ts;
    return nullptr;
  }
};

namespace detail {

inline std::vector<Matrix> columns_of(const std::vector<Matrix>& x, const std::vector<Index>& cols) {
  std::vector<Matrix> out;
  for (const auto& xr : x) out.push_back(take_columns(xr, cols));
  return out;
}

// Penalized fit on the estimation periods, seed loadings, both stages and
// residuals on the evaluation periods.
struct SplitContext {
  const Matrix& y;
  const std::vector<Matrix>& x;
  const std::vector<Matrix>& mu_hat;  // empty when not partialling out
  const std::vector<Matrix>& e_hat;
  const svt::PenalizedFit& full_fit;
  double sigma_u_sq;
  const tuning::TuningOptions& tuning;
  bool include_m;
  Index m_rank;
  const std::vector<Index>& ranks;
  bool orthogonalize;
  Residual residual;
};

inline SplitFit fit_direction(const SplitContext& ctx, const std::vector<Index>& estimation,
                              const std::vector<Index>& evaluation, std::uint64_t seed) {
  SplitFit sf;
  sf.estimation = estimation;
  sf.evaluation = evaluation;
  sf.orthogonalized = ctx.orthogonalize;
  const std::size_t d = ctx.x.size();
  const Matrix y_s = take_columns(ctx.y, estimation);
  const std::vector<Matrix> x_s = columns_of(ctx.x, estimation);

  tuning::TuningOptions topt = ctx.tuning;
  topt.seed = seed;
  tuning::Penalties pen = tuning::simulate_tuning(x_s, y_s.rows(), y_s.cols(), ctx.sigma_u_sq, topt);
  svt::StartValues warm;
  warm.M = ctx.include_m ? take_columns(ctx.full_fit.M_hat, estimation) : Matrix();
  for (std::size_t r = 0; r < d; ++r) warm.theta.push_back(take_columns(ctx.full_fit.theta_hat[r], estimation));
  const svt::PenalizedFit sub = ctx.include_m ? svt::fit_joint(y_s, x_s, pen.nu0, pen.nu, ctx.tuning.solver, &warm)
                                              : svt::fit_without_m(y_s, x_s, pen.nu, ctx.tuning.solver, &warm);

  for (std::size_t r = 0; r < d; ++r) {
    if (ctx.ranks[r] > 0) {
      sf.lambda_tilde.push_back(extract_loadings(sub.theta_hat[r], ctx.ranks[r]));
    } else {
      sf.lambda_tilde.emplace_back(ctx.y.rows(), 0);
    }
  }
  sf.a_tilde = (ctx.include_m && ctx.m_rank > 0) ? extract_loadings(sub.M_hat, ctx.m_rank) : Matrix(ctx.y.rows(), 0);

  const TwoStep pre = preliminary_stage(ctx.y, ctx.x, sf.lambda_tilde, sf.a_tilde, evaluation);
  sf.f_tilde = pre.f;
  sf.g_tilde = pre.g;
  sf.lambda_dot = pre.lambda;
  sf.alpha_dot = pre.alpha;
  TwoStep fin;
  if (ctx.orthogonalize) {
    fin = orthogonalized_stage(ctx.y, ctx.mu_hat, ctx.e_hat, pre, sf.lambda_tilde, sf.a_tilde, evaluation);
  } else {
    fin = pre;
  }
  sf.f_hat = fin.f;
  sf.g_hat = fin.g;
  sf.lambda_hat = fin.lambda;
  sf.alpha_hat = fin.alpha;

  Matrix u = take_columns(ctx.y, evaluation);
  const bool final_regression = ctx.orthogonalize && ctx.residual == Residual::final_regression;
  for (std::size_t r = 0; r < d; ++r) {
    if (final_regression) {
      u.array() -= take_columns(ctx.mu_hat[r], evaluation).array() *
                   (sf.lambda_dot[r] * sf.f_tilde[r].transpose()).array();
      u.array() -= take_columns(ctx.e_hat[r], evaluation).array() * (sf.lambda_hat[r] * sf.f_hat[r].transpose()).array();
    } else {
      u.array() -= take_columns(ctx.x[r], evaluation).array() * (sf.lambda_hat[r] * sf.f_hat[r].transpose()).array();
    }
  }
  if (sf.alpha_hat.cols() > 0) u -= sf.alpha_hat * sf.g_hat.transpose();
  sf.u_hat = std::move(u);
  return sf;
}

inline std::vector<Index> with_target(std::vector<Index> periods, Index t) {
  periods.push_back(t);
  std::sort(periods.begin(), periods.end());
  return periods;
}

}  // namespace detail

/// Group average of cell estimates at t with its cross-fitted standard error.
inline GroupResult group_average_effect(const EffectEstimate& est, const GroupSpec& group, Index t, std::size_t r) {
  group.validate(est.n);
  require(r < est.theta_hat.size(), ErrorKind::InvalidInput, "regressor index out of range");
  require(t >= 0 && t < est.periods, ErrorKind::InvalidInput, "period out of range");
  GroupResult res;
  res.group = group.id;
  res.t = t;
  res.r = r;
  VarianceComponents vc;
  if (est.mode == Mode::exact) {
    const TargetSplits* ts = est.splits_for(t);
    require(ts != nullptr, ErrorKind::MissingEstimate, "period " + std::to_string(t + 1) + " was not a target");
    double sum = 0.0;
    for (Index i : group.members) sum += cross_fit_effect(ts->fit_I, ts->fit_Ic, i, t, r);
    res.estimate = sum / static_cast<double>(group.members.size());
    vc = variance_components(ts->fit_I, ts->fit_Ic, est.e_hat[r], group, t, r);
  } else {
    require(!est.splits.empty(), ErrorKind::MissingEstimate, "no split fits stored");
    const TargetSplits& ts = est.splits.front();
    const bool in_ic = std::binary_search(ts.fit_I.evaluation.begin(), ts.fit_I.evaluation.end(), t);
    const SplitFit& sf = in_ic ? ts.fit_I : ts.fit_Ic;
    double sum = 0.0;
    for (Index i : group.members) sum += sf.effect(i, t, r);
    res.estimate = sum / static_cast<double>(group.members.size());
    vc = single_split_variance(sf, est.e_hat[r], group, t, r);
  }
  res.v_lambda = vc.v_lambda;
  res.v_f = vc.v_f;
  res.se = vc.se();
  res.ci = confidence_interval(res.estimate, res.se, est.level);
  return res;
}

/// Full pipeline: tuning, penalized fit, ranks, covariate decomposition,
/// then split fits per target period (or one fixed partition in panel mode).
inline EffectEstimate estimate_effects(const PanelData& panel, const std::vector<Target>& targets,
                                       const InferenceConfig& cfg = {}) {
  panel.validate();
  const Index n = panel.n(), total_t = panel.t();
  const std::size_t d = panel.x.size();
  require(d >= 1, ErrorKind::InvalidInput, "at least one covariate is required");
  require(total_t >= 8, ErrorKind::InsufficientData, "need at least 8 periods");
  require(cfg.level > 0.0 && cfg.level < 1.0, ErrorKind::InvalidInput, "level must lie in (0,1)");
  if (cfg.mode == Mode::exact) require(!targets.empty(), ErrorKind::InvalidInput, "no target periods given");
  for (const auto& tg : targets) {
    require(tg.t >= 0 && tg.t < total_t, ErrorKind::InvalidInput, "target period out of range");
    for (const auto& g : tg.groups) g.validate(n);
  }

  EffectEstimate est;
  est.n = n;
  est.periods = total_t;
  est.mode = cfg.mode;
  est.level = cfg.level;
  if (cfg.effects.empty()) {
    for (std::size_t r = 0; r < d; ++r) est.effects.push_back(r);
  } else {
    est.effects = cfg.effects;
    for (std::size_t r : est.effects) require(r < d, ErrorKind::InvalidInput, "effect index out of range");
  }

  // Tuning and full-sample fit.
  tuning::TuningOptions topt = cfg.tuning;
  topt.include_m = cfg.include_m;
  if (cfg.penalties) {
    require(cfg.penalties->nu.size() == d, ErrorKind::InvalidInput, "penalty count does not match covariates");
    est.tuning = *cfg.penalties;
    tuning::Penalties pen{est.tuning.nu0, est.tuning.nu};
    est.full_fit = tuning::fit_with(panel.y, panel.x, pen, topt, nullptr);
  } else if (cfg.sigma_u_sq) {
    const tuning::Penalties pen = tuning::simulate_tuning(panel.x, n, total_t, *cfg.sigma_u_sq, topt);
    est.tuning.nu0 = cfg.include_m ? pen.nu0 : std::numeric_limits<double>::infinity();
    est.tuning.nu = pen.nu;
    est.tuning.sigma_u_sq = *cfg.sigma_u_sq;
    est.tuning.c1 = topt.c1;
    est.tuning.delta = topt.delta;
    est.tuning.n_sims = topt.n_sims;
    est.tuning.iterations = 0;
    est.tuning.converged = true;
    est.full_fit = tuning::fit_with(panel.y, panel.x, pen, topt, nullptr);
  } else {
    tuning::TunedFit tf = tuning::iterative_tuning(panel.y, panel.x, topt);
    est.tuning = tf.tuning;
    est.full_fit = std::move(tf.fit);
  }
  const double sigma_sq = est.tuning.sigma_u_sq;
  require(sigma_sq > 0.0, ErrorKind::InvalidInput, "residual variance for subsample penalties must be positive");

  // Ranks.
  est.m_rank = 0;
  if (cfg.include_m) {
    est.m_rank = cfg.m_rank >= 0 ? cfg.m_rank : rank::estimate_rank(est.full_fit.M_hat, est.tuning.nu0);
  }
  est.ranks.resize(d);
  for (std::size_t r = 0; r < d; ++r) {
    const bool forced = r < cfg.ranks.size() && cfg.ranks[r] >= 0;
    est.ranks[r] = forced ? cfg.ranks[r] : rank::estimate_rank(est.full_fit.theta_hat[r], est.tuning.nu[r]);
  }
  for (std::size_t r : est.effects)
    require(est.ranks[r] > 0, ErrorKind::ZeroRankEffect,
            "estimated rank of slope matrix " + std::to_string(r + 1) + " is zero; its effect is identically 0");

  // Covariate factor structure.
  const bool partial_out = cfg.adjustment == Adjustment::partial_out;
  const bool with_se = cfg.adjustment != Adjustment::none;
  std::vector<Matrix> mu_hat;
  if (cfg.adjustment == Adjustment::completion) {
    est.covariate_factors.assign(d, 0);
    est.e_hat = panel.x;
  } else {
    est.covariate_factors.resize(d);
    for (std::size_t r = 0; r < d; ++r) {
      if (r < cfg.covariate_factors.size()) {
        est.covariate_factors[r] = cfg.covariate_factors[r];
      } else {
        est.covariate_factors[r] = rank::eigenvalue_ratio_factors(panel.x[r], cfg.k_max);
      }
    }
    for (auto& c : ortho::decompose_covariates(panel.x, est.covariate_factors, cfg.demean)) {
      mu_hat.push_back(std::move(c.mu_hat));
      est.e_hat.push_back(std::move(c.e_hat));
    }
  }

  const detail::SplitContext ctx{panel.y,     panel.x,          mu_hat,      est.e_hat, est.full_fit, sigma_sq,
                                 topt,        cfg.include_m,    est.m_rank,  est.ranks, partial_out, cfg.residual};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t r = 0; r < d; ++r) {
    est.theta_hat.push_back(Matrix::Constant(n, total_t, nan));
    est.theta_preliminary.push_back(Matrix::Constant(n, total_t, nan));
    est.se.push_back(Matrix::Constant(n, total_t, nan));
  }
  auto fill_single = [&](const SplitFit& sf, Index skip) {
    for (std::size_t r = 0; r < d; ++r) {
      if (est.ranks[r] == 0) {
        for (Index s : sf.evaluation)
          if (s != skip && std::isnan(est.theta_hat[r](0, s))) {
            est.theta_hat[r].col(s).setZero();
            est.theta_preliminary[r].col(s).setZero();
          }
        continue;
      }
      for (std::size_t k = 0; k < sf.evaluation.size(); ++k) {
        const Index s = sf.evaluation[k];
        if (s == skip || !std::isnan(est.theta_hat[r](0, s))) continue;
        est.theta_hat[r].col(s) = (sf.lambda_hat[r] * sf.f_hat[r].row(static_cast<Index>(k)).transpose());
        est.theta_preliminary[r].col(s) = (sf.lambda_dot[r] * sf.f_tilde[r].row(static_cast<Index>(k)).transpose());
      }
    }
  };

  if (cfg.mode == Mode::exact) {
    // Targets first so that their cross-fitted values are never overwritten.
    std::vector<Index> target_periods;
    for (const auto& tg : targets)
      if (std::find(target_periods.begin(), target_periods.end(), tg.t) == target_periods.end())
        target_periods.push_back(tg.t);
    est.splits.resize(target_periods.size());
    parallel_for(target_periods.size(), [&](std::size_t k) {
      const Index t = target_periods[k];
      TargetSplits& ts = est.splits[k];
      ts.plan = make_split(total_t, t, derive_seed(cfg.split_seed, static_cast<std::uint64_t>(t)));
      const std::uint64_t tseed = derive_seed(topt.seed, static_cast<std::uint64_t>(t), 1);
      ts.fit_I = detail::fit_direction(ctx, ts.plan.I, detail::with_target(ts.plan.I_c, t), derive_seed(tseed, 0));
      ts.fit_Ic = detail::fit_direction(ctx, ts.plan.I_c, detail::with_target(ts.plan.I, t), derive_seed(tseed, 1));
    });
    for (const auto& ts : est.splits) {
      const Index t = ts.plan.target_t;
      for (std::size_t r = 0; r < d; ++r) {
        if (est.ranks[r] == 0) {
          est.theta_hat[r].col(t).setZero();
          est.theta_preliminary[r].col(t).setZero();
          continue;
        }
        for (Index i = 0; i < n; ++i) {
          est.theta_hat[r](i, t) = cross_fit_effect(ts.fit_I, ts.fit_Ic, i, t, r);
          est.theta_preliminary[r](i, t) =
              0.5 * (ts.fit_I.preliminary_effect(i, t, r) + ts.fit_Ic.preliminary_effect(i, t, r));
        }
      }
    }
    for (const auto& ts : est.splits) {
      fill_single(ts.fit_I, ts.plan.target_t);
      fill_single(ts.fit_Ic, ts.plan.target_t);
    }
    if (with_se) {
      for (const auto& ts : est.splits) {
        const Index t = ts.plan.target_t;
        for (std::size_t r : est.effects)
          for (Index i = 0; i < n; ++i)
            est.se[r](i, t) = variance_components(ts.fit_I, ts.fit_Ic, est.e_hat[r], GroupSpec{"", {i}}, t, r).se();
      }
    }
  } else {
    TargetSplits ts;
    ts.plan = make_panel_split(total_t, cfg.split_seed);
    const std::uint64_t tseed = derive_seed(topt.seed, 0x70616e656cULL, 1);
    ts.fit_I = detail::fit_direction(ctx, ts.plan.I, ts.plan.I_c, derive_seed(tseed, 0));
    ts.fit_Ic = detail::fit_direction(ctx, ts.plan.I_c, ts.plan.I, derive_seed(tseed, 1));
    fill_single(ts.fit_I, -1);
    fill_single(ts.fit_Ic, -1);
    est.splits.push_back(std::move(ts));
    if (with_se) {
      const TargetSplits& only = est.splits.front();
      for (const SplitFit* sf : {&only.fit_I, &only.fit_Ic})
        for (Index t : sf->evaluation)
          for (std::size_t r : est.effects)
            for (Index i = 0; i < n; ++i)
              est.se[r](i, t) = single_split_variance(*sf, est.e_hat[r], GroupSpec{"", {i}}, t, r).se();
    }
  }

  if (with_se) {
    for (const auto& tg : targets)
      for (const auto& g : tg.groups)
        for (std::size_t r : est.effects) est.group_results.push_back(group_average_effect(est, g, tg.t, r));
  }
  return est;
}

}  // namespace hetslope::inference

#endif  // HETSLOPE_INFERENCE_HPP
