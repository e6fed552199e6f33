#ifndef HETSLOPE_COMPLETION_HPP
#define HETSLOPE_COMPLETION_HPP

// Noisy low-rank matrix completion with cell-level inference. The observed
// outcome is y_it = x_it y*_it with x the 0/1 mask, so completion is the
// single-regressor model with X = mask and no interactive fixed effects.

#include <cmath>
#include <optional>
#include <vector>

#include "hetslope/inference.hpp"
#include "hetslope/panel.hpp"
#include "hetslope/rng.hpp"
#include "hetslope/tuning.hpp"

namespace hetslope::completion {

inline constexpr double kMinObservedFraction = 0.1;

/// Every row and column must be observed at least a tenth of the time.
inline void check_mask(const Matrix& mask) {
  for (Index i = 0; i < mask.size(); ++i) {
    const double v = mask.data()[i];
    require(v == 0.0 || v == 1.0, ErrorKind::InvalidInput, "mask entries must be 0 or 1");
  }
  for (Index i = 0; i < mask.rows(); ++i)
    require(mask.row(i).mean() >= kMinObservedFraction, ErrorKind::InsufficientObservation,
            "unit " + std::to_string(i + 1) + " is observed in fewer than 10% of periods");
  for (Index t = 0; t < mask.cols(); ++t)
    require(mask.col(t).mean() >= kMinObservedFraction, ErrorKind::InsufficientObservation,
            "period " + std::to_string(t + 1) + " is observed for fewer than 10% of units");
}

struct CompletionOptions {
  std::optional<double> sigma_u_sq;  // when absent it is backed out of nu
  Index rank = -1;                   // negative means estimate
  std::uint64_t split_seed = 1;
  inference::Mode mode = inference::Mode::exact;
  double level = 0.95;
  tuning::TuningOptions tuning = [] {
    tuning::TuningOptions o;
    o.include_m = false;
    return o;
  }();
};

/// Residual variance implied by a penalty level through the simulated
/// unit-variance quantile of ||mask o Z||.
inline double implied_variance(const Matrix& mask, double nu, const tuning::TuningOptions& opts) {
  const tuning::Penalties unit =
      tuning::unit_score_quantiles({mask}, mask.rows(), mask.cols(), opts.delta, opts.n_sims, opts.seed);
  const double s = nu / (2.0 * (1.0 + opts.c1) * unit.nu.front());
  return s * s;
}

inline PanelData completion_panel(const Matrix& y_obs, const Matrix& mask) {
  linalg::require_same_shape(y_obs, mask, "mask");
  PanelData p;
  p.y = y_obs.cwiseProduct(mask);
  p.x = {mask};
  p.mask = mask;
  p.fill_default_labels();
  return p;
}

/// Penalized fit with X = mask, rank choice, split fits per target period and
/// SEs with the mask in place of the covariate residuals.
inline inference::EffectEstimate complete_fit(const Matrix& y_obs, const Matrix& mask, double nu,
                                              const std::vector<inference::Target>& targets,
                                              const CompletionOptions& opts = {}) {
  require(nu > 0.0 && std::isfinite(nu), ErrorKind::InvalidInput, "penalty must be positive");
  check_mask(mask);
  linalg::require_finite(y_obs.cwiseProduct(mask), "observed outcome");
  const PanelData panel = completion_panel(y_obs, mask);

  inference::InferenceConfig cfg;
  cfg.include_m = false;
  cfg.adjustment = inference::Adjustment::completion;
  cfg.ranks = {opts.rank};
  cfg.split_seed = opts.split_seed;
  cfg.mode = opts.mode;
  cfg.level = opts.level;
  cfg.tuning = opts.tuning;
  cfg.tuning.include_m = false;
  tuning::TuningResult pen;
  pen.nu0 = std::numeric_limits<double>::infinity();
  pen.nu = {nu};
  pen.sigma_u_sq = opts.sigma_u_sq ? *opts.sigma_u_sq : implied_variance(mask, nu, cfg.tuning);
  pen.c1 = cfg.tuning.c1;
  pen.delta = cfg.tuning.delta;
  pen.n_sims = cfg.tuning.n_sims;
  pen.converged = true;
  cfg.penalties = pen;
  return inference::estimate_effects(panel, targets, cfg);
}

/// Penalty for a known (or iteratively estimated) noise variance.
inline tuning::TuningResult tune_completion(const Matrix& y_obs, const Matrix& mask,
                                            std::optional<double> sigma_u_sq, tuning::TuningOptions opts = {}) {
  check_mask(mask);
  opts.include_m = false;
  const Matrix y = y_obs.cwiseProduct(mask);
  if (sigma_u_sq) {
    const tuning::Penalties p = tuning::simulate_tuning({mask}, y.rows(), y.cols(), *sigma_u_sq, opts);
    tuning::TuningResult res;
    res.nu0 = std::numeric_limits<double>::infinity();
    res.nu = p.nu;
    res.sigma_u_sq = *sigma_u_sq;
    res.c1 = opts.c1;
    res.delta = opts.delta;
    res.n_sims = opts.n_sims;
    res.converged = true;
    return res;
  }
  return tuning::iterative_tuning(y, {mask}, opts).tuning;
}

/// Rank-one completion design: y* = lambda_i f_t + sigma u_it, cells observed
/// independently with probability 1 - missing.
struct CompletionDraw {
  Matrix y_obs;  // zero at missing cells
  Matrix mask;
  Matrix theta;
};

struct CompletionDesign {
  Index n = 100;
  Index t = 100;
  double missing = 0.3;
  double sigma = 0.5;
  double loading_mean = 1.0;
  double factor_mean = 1.0;
};

inline CompletionDraw gen_completion(const CompletionDesign& design, std::uint64_t seed) {
  require(design.n >= 10 && design.t >= 10, ErrorKind::InvalidInput, "completion design needs N, T >= 10");
  require(design.missing >= 0.0 && design.missing < 0.9, ErrorKind::InvalidInput, "missing rate must lie in [0, 0.9)");
  Rng rng(seed);
  const Vector lam = standard_normal(design.n, rng).array() + design.loading_mean;
  const Vector f = standard_normal(design.t, rng).array() + design.factor_mean;
  CompletionDraw out;
  out.theta = lam * f.transpose();
  std::bernoulli_distribution observed(1.0 - design.missing);
  out.mask.resize(design.n, design.t);
  for (Index t = 0; t < design.t; ++t)
    for (Index i = 0; i < design.n; ++i) out.mask(i, t) = observed(rng) ? 1.0 : 0.0;
  out.y_obs = (out.theta + design.sigma * standard_normal(design.n, design.t, rng)).cwiseProduct(out.mask);
  return out;
}

}  // namespace hetslope::completion

#endif  // HETSLOPE_COMPLETION_HPP
