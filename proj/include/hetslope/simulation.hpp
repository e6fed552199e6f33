#ifndef HETSLOPE_SIMULATION_HPP
#define HETSLOPE_SIMULATION_HPP

// Data-generating processes for the static and dynamic heterogeneous-slope
// designs and a replication harness comparing three estimators at one cell:
//   partial_out     cross-fitted, orthogonalized estimate with feasible SE
//   no_partial_out  cross-fitted preliminary estimate on the raw covariates
//   regularized     the penalized fit's own entry
// The last two are standardized by their Monte Carlo SD.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hetslope/completion.hpp"
#include "hetslope/inference.hpp"
#include "hetslope/panel.hpp"
#include "hetslope/rng.hpp"

namespace hetslope::sim {

enum class Design { static_design, dynamic_design, completion_design };
enum class Estimator { partial_out, no_partial_out, regularized };
enum class RankPolicy { oracle, estimate };

inline std::string to_string(Design d) {
  switch (d) {
    case Design::static_design: return "static";
    case Design::dynamic_design: return "dynamic";
    case Design::completion_design: return "completion";
  }
  return "?";
}

inline Design parse_design(const std::string& s) {
  if (s == "static") return Design::static_design;
  if (s == "dynamic") return Design::dynamic_design;
  if (s == "completion") return Design::completion_design;
  fail(ErrorKind::InvalidInput, "unknown design '" + s + "'");
}

inline std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::partial_out: return "partial_out";
    case Estimator::no_partial_out: return "no_partial_out";
    case Estimator::regularized: return "regularized";
  }
  return "?";
}

inline Estimator parse_estimator(const std::string& s) {
  if (s == "partial_out") return Estimator::partial_out;
  if (s == "no_partial_out") return Estimator::no_partial_out;
  if (s == "regularized") return Estimator::regularized;
  fail(ErrorKind::InvalidInput, "unknown estimator '" + s + "'");
}

/// A generated panel with the true slope matrices.
struct SimDraw {
  PanelData panel;
  std::vector<Matrix> theta;  // true slopes, one per covariate
  Matrix interactive;         // alpha_i' g_t
  Vector initial;             // dynamic design: y_i0
};

// ---------------------------------------------------------------- static

struct StaticDesign {
  Index n = 100;
  Index t = 100;
  double mu_x = 2.0;
  double factor_mean = 2.0;  // all factors and loadings ~ N(mean, 1)
  double noise_sd = 1.0;     // u
  double idio_sd = 1.0;      // e in the covariates
};

/// Loadings (alpha, lambda_1, lambda_2, l_1, l_2); held fixed across
/// replications of a study.
struct StaticLoadings {
  Vector alpha, lambda1, lambda2, l1, l2;
};

inline StaticLoadings static_loadings(const StaticDesign& d, std::uint64_t seed) {
  Rng rng(seed);
  auto draw = [&] { return Vector(standard_normal(d.n, rng).array() + d.factor_mean); };
  StaticLoadings l;
  l.alpha = draw();
  l.lambda1 = draw();
  l.lambda2 = draw();
  l.l1 = draw();
  l.l2 = draw();
  return l;
}

inline SimDraw gen_static(const StaticDesign& d, const StaticLoadings& load, std::uint64_t seed) {
  require(d.n >= 20 && d.t >= 20, ErrorKind::InvalidInput, "static design needs N, T >= 20");
  require(load.alpha.size() == d.n, ErrorKind::InvalidInput, "loadings do not match N");
  Rng rng(seed);
  auto draw = [&] { return Vector(standard_normal(d.t, rng).array() + d.factor_mean); };
  const Vector g = draw(), f1 = draw(), f2 = draw(), w1 = draw(), w2 = draw();
  SimDraw out;
  Matrix x1 = load.l1 * w1.transpose() + d.idio_sd * standard_normal(d.n, d.t, rng);
  Matrix x2 = load.l2 * w2.transpose() + d.idio_sd * standard_normal(d.n, d.t, rng);
  x1.array() += d.mu_x;
  x2.array() += d.mu_x;
  out.theta = {load.lambda1 * f1.transpose(), load.lambda2 * f2.transpose()};
  out.interactive = load.alpha * g.transpose();
  const Matrix u = standard_normal(d.n, d.t, rng);
  out.panel.y = out.interactive + x1.cwiseProduct(out.theta[0]) + x2.cwiseProduct(out.theta[1]) + d.noise_sd * u;
  out.panel.x = {std::move(x1), std::move(x2)};
  out.panel.fill_default_labels();
  return out;
}

/// Convenience form: loadings from a seed derived from `seed`, factors from `seed`.
inline SimDraw gen_static(Index n, Index t, std::uint64_t seed) {
  StaticDesign d;
  d.n = n;
  d.t = t;
  return gen_static(d, static_loadings(d, derive_seed(seed, 0x4c4f4144ULL)), seed);
}

// --------------------------------------------------------------- dynamic

/// y_it = alpha_i g_t + x_it lambda_i,1' f_t,1 + y_i,t-1 lambda_i,2' f_t,2 + u_it,
/// x_it = l_i w_t + e_it. Factors and loadings are normal with the means and
/// SDs below (the lag channel uses its own, smaller SD so paths stay stable).
struct DynamicDesign {
  Index n = 100;
  Index t = 100;
  Index k_slope = 2;
  Index k_interactive = 1;
  Index k_covariate = 1;
  double sigma = 0.1287;
  double initial_mean = 0.497;
  double initial_sd = 0.3;
  double factor_mean = 0.5;
  double factor_sd = 1.0;
  double lag_sd = 0.2;
  double lag_scale = 1.0;  // 0 switches the lag channel off
  double explosive_bound = 1e6;
};

struct DynamicLoadings {
  Matrix alpha, lambda1, lambda2, l;
};

inline DynamicLoadings dynamic_loadings(const DynamicDesign& d, std::uint64_t seed) {
  Rng rng(seed);
  auto draw = [&](Index k, double sd) { return Matrix((sd * standard_normal(d.n, k, rng)).array() + d.factor_mean); };
  DynamicLoadings l;
  l.alpha = draw(d.k_interactive, d.factor_sd);
  l.lambda1 = draw(d.k_slope, d.factor_sd);
  l.lambda2 = d.lag_scale * draw(d.k_slope, d.lag_sd);
  l.l = draw(d.k_covariate, d.factor_sd);
  return l;
}

inline SimDraw gen_dynamic(const DynamicDesign& d, const DynamicLoadings& load, std::uint64_t seed) {
  require(d.n >= 20 && d.t >= 20, ErrorKind::InvalidInput, "dynamic design needs N, T >= 20");
  Rng rng(seed);
  auto draw = [&](Index k, double sd) { return Matrix((sd * standard_normal(d.t, k, rng)).array() + d.factor_mean); };
  const Matrix g = draw(d.k_interactive, d.factor_sd);
  const Matrix f1 = draw(d.k_slope, d.factor_sd);
  const Matrix f2 = draw(d.k_slope, d.lag_sd);
  const Matrix w = draw(d.k_covariate, d.factor_sd);
  SimDraw out;
  Matrix x = load.l * w.transpose() + standard_normal(d.n, d.t, rng);
  out.theta = {load.lambda1 * f1.transpose(), load.lambda2 * f2.transpose()};
  out.interactive = load.alpha * g.transpose();
  out.initial = (d.initial_sd * standard_normal(d.n, rng)).array() + d.initial_mean;
  const Matrix u = d.sigma * standard_normal(d.n, d.t, rng);
  Matrix y(d.n, d.t), lag(d.n, d.t);
  Vector prev = out.initial;
  for (Index s = 0; s < d.t; ++s) {
    lag.col(s) = prev;
    y.col(s) = out.interactive.col(s) + x.col(s).cwiseProduct(out.theta[0].col(s)) +
               prev.cwiseProduct(out.theta[1].col(s)) + u.col(s);
    require(y.col(s).cwiseAbs().maxCoeff() <= d.explosive_bound, ErrorKind::ExplosivePath,
            "simulated path exceeded " + std::to_string(d.explosive_bound) + " at period " + std::to_string(s + 1));
    prev = y.col(s);
  }
  out.panel.y = std::move(y);
  out.panel.x = {std::move(x), std::move(lag)};
  out.panel.fill_default_labels();
  return out;
}

inline SimDraw gen_dynamic(Index n, Index t, std::uint64_t seed) {
  DynamicDesign d;
  d.n = n;
  d.t = t;
  return gen_dynamic(d, dynamic_loadings(d, derive_seed(seed, 0x4c4f4144ULL)), seed);
}

// --------------------------------------------------------------- harness

struct SimConfig {
  Design design = Design::static_design;
  Index n = 100;
  Index t = 100;
  int reps = 500;
  std::uint64_t seed = 1;
  std::vector<Estimator> estimators = {Estimator::partial_out, Estimator::no_partial_out, Estimator::regularized};
  Index target_unit = 0;
  Index target_period = 0;
  double level = 0.95;
  RankPolicy rank_policy = RankPolicy::oracle;
  // Use the design's noise variance for the penalties instead of iterating.
  bool known_variance = true;
  inference::Residual residual = inference::Residual::final_regression;
  tuning::TuningOptions tuning = [] {
    tuning::TuningOptions o;
    o.solver.tol_step = 1e-5;
    return o;
  }();
  StaticDesign static_design;
  DynamicDesign dynamic_design;
  completion::CompletionDesign completion_design;
  int threads = 0;  // 0: thread_count()

  void validate() const {
    require(reps >= 1, ErrorKind::InvalidInput, "reps must be at least 1");
    require(n >= 20 && t >= 20, ErrorKind::InvalidInput, "simulation needs N, T >= 20");
    require(target_unit >= 0 && target_unit < n && target_period >= 0 && target_period < t,
            ErrorKind::InvalidInput, "target cell out of range");
    require(!estimators.empty(), ErrorKind::InvalidInput, "no estimators requested");
    tuning.validate();
  }
};

/// Per-replication record; effects indexed by covariate.
struct RepRecord {
  bool ok = false;
  std::string error;
  std::vector<double> truth;
  std::vector<double> partial_out;
  std::vector<double> se;
  std::vector<double> no_partial_out;
  std::vector<double> regularized;
  std::vector<double> split_I;  // single-split partial-out estimates
  std::vector<double> split_Ic;
  std::vector<Index> ranks;
  Index m_rank = 0;
  double rmse = 0.0;  // completion: RMSE over all cells
};

inline constexpr int kHistogramBins = 50;
inline constexpr double kHistogramRange = 4.0;

struct EstimatorSummary {
  Estimator estimator = Estimator::partial_out;
  std::size_t effect = 0;
  double coverage = 0.0;
  double mc_se = 0.0;  // of the coverage
  double mean_std = 0.0;
  double sd_std = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  std::vector<double> standardized_draws;
  std::array<int, kHistogramBins> histogram{};
  int outside = 0;
};

struct SimSummary {
  SimConfig config;
  int completed = 0;
  int failures = 0;
  std::vector<std::string> failure_messages;
  std::vector<EstimatorSummary> summaries;
  std::vector<RepRecord> records;
  double rank_accuracy = 0.0;  // fraction of completed reps with every rank right
  double mean_rmse = 0.0;      // completion only

  const EstimatorSummary& get(Estimator e, std::size_t effect = 0) const {
    for (const auto& s : summaries)
      if (s.estimator == e && s.effect == effect) return s;
    fail(ErrorKind::MissingEstimate, "estimator " + to_string(e) + " was not run for effect " + std::to_string(effect));
  }
};

inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double sample_mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  return m / static_cast<double>(v.size());
}

namespace detail {

inline void fill_histogram(EstimatorSummary& s) {
  s.histogram.fill(0);
  s.outside = 0;
  const double width = 2.0 * kHistogramRange / kHistogramBins;
  for (double z : s.standardized_draws) {
    if (!(z >= -kHistogramRange && z < kHistogramRange)) {
      ++s.outside;
      continue;
    }
    const int b = std::min(kHistogramBins - 1, static_cast<int>((z + kHistogramRange) / width));
    ++s.histogram[static_cast<std::size_t>(b)];
  }
}

inline RepRecord run_one(const SimConfig& cfg, int rep, const StaticLoadings* sl, const DynamicLoadings* dl) {
  RepRecord rec;
  const std::uint64_t rep_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));
  const Index i0 = cfg.target_unit, t0 = cfg.target_period;
  try {
    if (cfg.design == Design::completion_design) {
      completion::CompletionDesign cd = cfg.completion_design;
      cd.n = cfg.n;
      cd.t = cfg.t;
      const completion::CompletionDraw draw = completion::gen_completion(cd, rep_seed);
      completion::CompletionOptions copt;
      copt.tuning = cfg.tuning;
      copt.tuning.include_m = false;
      copt.tuning.seed = derive_seed(rep_seed, 1);
      copt.split_seed = derive_seed(rep_seed, 2);
      copt.level = cfg.level;
      if (cfg.rank_policy == RankPolicy::oracle) copt.rank = 1;
      const double s2 = cd.sigma * cd.sigma;
      const tuning::TuningResult tr =
          completion::tune_completion(draw.y_obs, draw.mask, cfg.known_variance ? std::optional<double>(s2) : std::nullopt,
                                      copt.tuning);
      copt.sigma_u_sq = tr.sigma_u_sq;
      const inference::EffectEstimate est =
          completion::complete_fit(draw.y_obs, draw.mask, tr.nu.front(), {inference::Target{t0, {}}}, copt);
      rec.truth = {draw.theta(i0, t0)};
      rec.partial_out = {est.theta_hat[0](i0, t0)};
      rec.se = {est.se[0](i0, t0)};
      rec.no_partial_out = rec.partial_out;
      rec.regularized = {est.full_fit.theta_hat[0](i0, t0)};
      const auto& ts = est.splits.front();
      rec.split_I = {ts.fit_I.effect(i0, t0, 0)};
      rec.split_Ic = {ts.fit_Ic.effect(i0, t0, 0)};
      rec.ranks = est.ranks;
      rec.rmse = std::sqrt((est.theta_hat[0] - draw.theta).squaredNorm() / static_cast<double>(draw.theta.size()));
      rec.ok = true;
      return rec;
    }

    SimDraw draw;
    inference::InferenceConfig icfg;
    icfg.tuning = cfg.tuning;
    icfg.tuning.seed = derive_seed(rep_seed, 1);
    icfg.split_seed = derive_seed(rep_seed, 2);
    icfg.level = cfg.level;
    icfg.residual = cfg.residual;
    std::vector<Index> true_ranks;
    Index true_m_rank = 0;
    double noise_var = 0.0;
    if (cfg.design == Design::static_design) {
      StaticDesign d = cfg.static_design;
      d.n = cfg.n;
      d.t = cfg.t;
      draw = gen_static(d, *sl, rep_seed);
      icfg.covariate_factors = {1, 1};
      true_ranks = {1, 1};
      true_m_rank = 1;
      noise_var = d.noise_sd * d.noise_sd;
    } else {
      DynamicDesign d = cfg.dynamic_design;
      d.n = cfg.n;
      d.t = cfg.t;
      draw = gen_dynamic(d, *dl, rep_seed);
      icfg.covariate_factors = {d.k_covariate, 1};
      true_ranks = {d.k_slope, d.lag_scale == 0.0 ? 0 : d.k_slope};
      true_m_rank = d.k_interactive;
      noise_var = d.sigma * d.sigma;
    }
    if (cfg.known_variance) icfg.sigma_u_sq = noise_var;
    if (cfg.rank_policy == RankPolicy::oracle) {
      icfg.ranks = true_ranks;
      icfg.m_rank = true_m_rank;
    }
    const std::size_t d = draw.theta.size();
    for (std::size_t r = 0; r < d; ++r)
      if (true_ranks[r] > 0) icfg.effects.push_back(r);
    const inference::EffectEstimate est = inference::estimate_effects(draw.panel, {inference::Target{t0, {}}}, icfg);
    const auto& ts = est.splits.front();
    for (std::size_t r = 0; r < d; ++r) {
      rec.truth.push_back(draw.theta[r](i0, t0));
      rec.partial_out.push_back(est.theta_hat[r](i0, t0));
      rec.se.push_back(est.se[r](i0, t0));
      rec.no_partial_out.push_back(est.theta_preliminary[r](i0, t0));
      rec.regularized.push_back(est.full_fit.theta_hat[r](i0, t0));
      const bool live = est.ranks[r] > 0;
      rec.split_I.push_back(live ? ts.fit_I.effect(i0, t0, r) : 0.0);
      rec.split_Ic.push_back(live ? ts.fit_Ic.effect(i0, t0, r) : 0.0);
    }
    rec.ranks = est.ranks;
    rec.m_rank = est.m_rank;
    rec.ok = true;
  } catch (const Error& e) {
    rec.ok = false;
    rec.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return rec;
}

}  // namespace detail

/// Aggregates replication records. Partial-out draws are standardized by
/// their own SE; the others by the Monte Carlo SD of their errors.
inline SimSummary summarize(const SimConfig& cfg, std::vector<RepRecord> records) {
  SimSummary out;
  out.config = cfg;
  std::vector<const RepRecord*> good;
  for (const auto& r : records) {
    if (r.ok) {
      good.push_back(&r);
    } else {
      ++out.failures;
      out.failure_messages.push_back(r.error);
    }
  }
  out.completed = static_cast<int>(good.size());
  if (!good.empty()) {
    const std::size_t d = good.front()->truth.size();
    const double z = inference::normal_quantile(0.5 * (1.0 + cfg.level));
    for (Estimator e : cfg.estimators) {
      for (std::size_t r = 0; r < d; ++r) {
        EstimatorSummary s;
        s.estimator = e;
        s.effect = r;
        std::vector<double> err;
        for (const RepRecord* rec : good) {
          const double est = e == Estimator::partial_out      ? rec->partial_out[r]
                             : e == Estimator::no_partial_out ? rec->no_partial_out[r]
                                                              : rec->regularized[r];
          err.push_back(est - rec->truth[r]);
        }
        const double mc_sd = sample_sd(err);
        int covered = 0;
        for (std::size_t k = 0; k < good.size(); ++k) {
          const double scale = e == Estimator::partial_out ? good[k]->se[r] : mc_sd;
          const double zs = scale > 0.0 ? err[k] / scale : std::numeric_limits<double>::quiet_NaN();
          s.standardized_draws.push_back(zs);
          if (std::abs(zs) <= z) ++covered;
        }
        const double reps = static_cast<double>(good.size());
        s.coverage = covered / reps;
        s.mc_se = std::sqrt(s.coverage * (1.0 - s.coverage) / reps);
        s.mean_std = sample_mean(s.standardized_draws);
        s.sd_std = sample_sd(s.standardized_draws);
        s.bias = sample_mean(err);
        double sq = 0.0;
        for (double v : err) sq += v * v;
        s.rmse = std::sqrt(sq / reps);
        detail::fill_histogram(s);
        out.summaries.push_back(std::move(s));
      }
    }
    int right = 0;
    double rmse = 0.0;
    for (const RepRecord* rec : good) rmse += rec->rmse;
    out.mean_rmse = rmse / static_cast<double>(good.size());
    for (const RepRecord* rec : good) {
      bool all = true;
      if (cfg.design == Design::static_design) {
        all = rec->m_rank == 1 && rec->ranks == std::vector<Index>{1, 1};
      } else if (cfg.design == Design::dynamic_design) {
        const DynamicDesign& dd = cfg.dynamic_design;
        all = rec->m_rank == dd.k_interactive && rec->ranks[0] == dd.k_slope &&
              rec->ranks[1] == (dd.lag_scale == 0.0 ? 0 : dd.k_slope);
      } else {
        all = rec->ranks == std::vector<Index>{1};
      }
      right += all ? 1 : 0;
    }
    out.rank_accuracy = right / static_cast<double>(good.size());
  }
  out.records = std::move(records);
  return out;
}

inline SimSummary run_replications(const SimConfig& cfg) {
  cfg.validate();
  std::optional<StaticLoadings> sl;
  std::optional<DynamicLoadings> dl;
  const std::uint64_t load_seed = derive_seed(cfg.seed, 0x4c4f4144ULL);
  if (cfg.design == Design::static_design) {
    StaticDesign d = cfg.static_design;
    d.n = cfg.n;
    d.t = cfg.t;
    sl = static_loadings(d, load_seed);
  } else if (cfg.design == Design::dynamic_design) {
    DynamicDesign d = cfg.dynamic_design;
    d.n = cfg.n;
    d.t = cfg.t;
    dl = dynamic_loadings(d, load_seed);
  }
  std::vector<RepRecord> records(static_cast<std::size_t>(cfg.reps));
  const int threads = cfg.threads > 0 ? cfg.threads : thread_count();
  parallel_for(
      records.size(),
      [&](std::size_t k) {
        records[k] = detail::run_one(cfg, static_cast<int>(k), sl ? &*sl : nullptr, dl ? &*dl : nullptr);
      },
      threads);
  return summarize(cfg, std::move(records));
}

/// Rank-selection study: full-sample fit only, ranks from the threshold rule.
struct RankStudy {
  int reps = 0;
  int all_correct = 0;
  int failures = 0;
  std::vector<std::array<Index, 3>> ranks;  // (M, theta_1, theta_2)
};

inline RankStudy rank_study(Index n, Index t, int reps, std::uint64_t seed, tuning::TuningOptions opts = {},
                            std::optional<double> sigma_u_sq = 1.0) {
  StaticDesign d;
  d.n = n;
  d.t = t;
  const StaticLoadings load = static_loadings(d, derive_seed(seed, 0x4c4f4144ULL));
  RankStudy out;
  out.reps = reps;
  out.ranks.assign(static_cast<std::size_t>(reps), {-1, -1, -1});
  std::vector<char> ok(static_cast<std::size_t>(reps), 0);
  parallel_for(static_cast<std::size_t>(reps), [&](std::size_t k) {
    try {
      const std::uint64_t rep_seed = derive_seed(seed, k);
      const SimDraw draw = gen_static(d, load, rep_seed);
      tuning::TuningOptions o = opts;
      o.seed = derive_seed(rep_seed, 1);
      svt::PenalizedFit fit;
      tuning::Penalties pen;
      if (sigma_u_sq) {
        pen = tuning::simulate_tuning(draw.panel.x, n, t, *sigma_u_sq, o);
        fit = tuning::fit_with(draw.panel.y, draw.panel.x, pen, o, nullptr);
      } else {
        tuning::TunedFit tf = tuning::iterative_tuning(draw.panel.y, draw.panel.x, o);
        pen = {tf.tuning.nu0, tf.tuning.nu};
        fit = std::move(tf.fit);
      }
      out.ranks[k] = {rank::estimate_rank(fit.M_hat, pen.nu0), rank::estimate_rank(fit.theta_hat[0], pen.nu[0]),
                      rank::estimate_rank(fit.theta_hat[1], pen.nu[1])};
      ok[k] = 1;
    } catch (const Error&) {
      ok[k] = 0;
    }
  });
  for (std::size_t k = 0; k < ok.size(); ++k) {
    if (!ok[k]) {
      ++out.failures;
      continue;
    }
    if (out.ranks[k] == std::array<Index, 3>{1, 1, 1}) ++out.all_correct;
  }
  return out;
}

}  // namespace hetslope::sim

#endif  // HETSLOPE_SIMULATION_HPP
