#include <cmath>

#include <gtest/gtest.h>

#include "hetslope/simulation.hpp"

using namespace hetslope;
using namespace hetslope::sim;

namespace {

SimConfig tiny_config() {
  SimConfig c;
  c.n = c.t = 24;
  c.reps = 3;
  c.seed = 9;
  c.tuning.n_sims = 20;
  c.threads = 1;
  return c;
}

RepRecord record(double truth, double po, double se, double npo, double reg) {
  RepRecord r;
  r.ok = true;
  r.truth = {truth};
  r.partial_out = {po};
  r.se = {se};
  r.no_partial_out = {npo};
  r.regularized = {reg};
  r.ranks = {1, 1};
  r.m_rank = 1;
  return r;
}

}  // namespace

TEST(Names, RoundTrip) {
  for (Design d : {Design::static_design, Design::dynamic_design, Design::completion_design})
    EXPECT_EQ(parse_design(to_string(d)), d);
  for (Estimator e : {Estimator::partial_out, Estimator::no_partial_out, Estimator::regularized})
    EXPECT_EQ(parse_estimator(to_string(e)), e);
  EXPECT_THROW(parse_design("spatial"), Error);
}

TEST(GenStatic, NoiselessReproducesSignal) {
  StaticDesign d;
  d.n = d.t = 30;
  d.noise_sd = 0.0;
  const auto draw = gen_static(d, static_loadings(d, 1), 2);
  const Matrix signal = draw.interactive + draw.panel.x[0].cwiseProduct(draw.theta[0]) +
                        draw.panel.x[1].cwiseProduct(draw.theta[1]);
  EXPECT_EQ((draw.panel.y - signal).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(linalg::numerical_rank(linalg::singular_values(draw.theta[0])), 1);
}

TEST(GenStatic, CovariateMeanIsSix) {
  std::vector<double> means;
  for (std::uint64_t s = 0; s < 60; ++s) means.push_back(gen_static(40, 40, 100 + s).panel.x[0].mean());
  const double se = sample_sd(means) / std::sqrt(60.0);
  EXPECT_LT(std::abs(sample_mean(means) - 6.0), 3.0 * se);
}

TEST(GenStatic, SameSeedSamePanelAndFixedLoadings) {
  const auto a = gen_static(25, 30, 4), b = gen_static(25, 30, 4);
  EXPECT_TRUE((a.panel.y.array() == b.panel.y.array()).all());
  StaticDesign d;
  d.n = d.t = 25;
  const StaticLoadings load = static_loadings(d, 5);
  const auto c = gen_static(d, load, 6), e = gen_static(d, load, 7);
  // Loadings fixed: slope rows are proportional across draws.
  const Vector ratio = c.theta[0].col(0).cwiseQuotient(load.lambda1);
  EXPECT_LT((ratio.array() - ratio(0)).abs().maxCoeff(), 1e-10);
  EXPECT_FALSE((c.panel.y.array() == e.panel.y.array()).all());
  EXPECT_THROW(gen_static(10, 30, 1), Error);
}

TEST(GenDynamic, LagColumnAndInitialConditions) {
  std::vector<double> y0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto draw = gen_dynamic(50, 30, 200 + s);
    EXPECT_TRUE((draw.panel.x[1].col(0).array() == draw.initial.array()).all());
    EXPECT_TRUE((draw.panel.x[1].col(5).array() == draw.panel.y.col(4).array()).all());
    for (Index i = 0; i < 50; ++i) y0.push_back(draw.initial(i));
  }
  const double se = 0.3 / std::sqrt(static_cast<double>(y0.size()));
  EXPECT_LT(std::abs(sample_mean(y0) - 0.497), 3.0 * se);
  EXPECT_NEAR(sample_sd(y0), 0.3, 0.03);
}

TEST(GenDynamic, NoLagReducesToStaticOneCovariate) {
  DynamicDesign d;
  d.n = d.t = 30;
  d.lag_scale = 0.0;
  const auto draw = gen_dynamic(d, dynamic_loadings(d, 1), 2);
  EXPECT_EQ(draw.theta[1].norm(), 0.0);
  const Matrix resid = draw.panel.y - draw.interactive - draw.panel.x[0].cwiseProduct(draw.theta[0]);
  EXPECT_NEAR(std::sqrt(resid.squaredNorm() / 900.0), d.sigma, 0.02);
}

TEST(GenDynamic, ExplosivePathsAreRareAndReported) {
  int explosive = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    try {
      gen_dynamic(100, 100, 300 + s);
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ExplosivePath);
      ++explosive;
    }
  }
  EXPECT_LT(explosive, 1);
  DynamicDesign d;
  d.n = d.t = 30;
  d.explosive_bound = 1e-3;
  try {
    gen_dynamic(d, dynamic_loadings(d, 1), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ExplosivePath);
  }
}

TEST(Summarize, CoverageAndStandardization) {
  SimConfig cfg;
  std::vector<RepRecord> recs;
  recs.push_back(record(1.0, 1.1, 0.1, 1.5, 0.5));   // z = 1
  recs.push_back(record(1.0, 1.3, 0.1, 0.5, 0.7));   // z = 3
  recs.push_back(record(2.0, 1.9, 0.05, 2.0, 1.0));  // z = -2
  recs.push_back(record(0.0, 0.0, 1.0, 0.0, 0.2));   // z = 0
  RepRecord bad;
  bad.error = "SingularDesign: x";
  recs.push_back(bad);
  const SimSummary s = summarize(cfg, recs);
  EXPECT_EQ(s.completed, 4);
  EXPECT_EQ(s.failures, 1);
  ASSERT_EQ(s.failure_messages.size(), 1u);
  const auto& po = s.get(Estimator::partial_out);
  EXPECT_DOUBLE_EQ(po.coverage, 0.5);
  EXPECT_NEAR(po.mean_std, 0.5, 1e-12);
  EXPECT_NEAR(po.mc_se, 0.25, 1e-12);
  EXPECT_NEAR(po.bias, 0.075, 1e-12);
  int binned = 0;
  for (int c : po.histogram) binned += c;
  EXPECT_EQ(binned + po.outside, 4);
  // Monte Carlo SD standardization gives unit SD by construction.
  EXPECT_NEAR(s.get(Estimator::regularized).sd_std, 1.0, 1e-12);
  EXPECT_NEAR(s.get(Estimator::no_partial_out).sd_std, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(s.rank_accuracy, 1.0);
  EXPECT_THROW(s.get(Estimator::partial_out, 3), Error);
}

TEST(RunReplications, DeterministicAcrossRuns) {
  const SimSummary a = run_replications(tiny_config());
  const SimSummary b = run_replications(tiny_config());
  ASSERT_EQ(a.records.size(), 3u);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_EQ(a.records[k].ok, b.records[k].ok);
    EXPECT_EQ(a.records[k].partial_out, b.records[k].partial_out);
    EXPECT_EQ(a.records[k].se, b.records[k].se);
  }
  EXPECT_EQ(a.completed + a.failures, 3);
}

TEST(RunReplications, ThreadCountDoesNotChangeResults) {
  SimConfig c = tiny_config();
  c.reps = 2;
  const SimSummary a = run_replications(c);
  c.threads = 2;
  const SimSummary b = run_replications(c);
  for (std::size_t k = 0; k < a.records.size(); ++k) EXPECT_EQ(a.records[k].partial_out, b.records[k].partial_out);
}

TEST(RunReplications, CompletionDesign) {
  SimConfig c = tiny_config();
  c.design = Design::completion_design;
  const SimSummary s = run_replications(c);
  EXPECT_EQ(s.completed, 3);
  EXPECT_GT(s.mean_rmse, 0.0);
}

TEST(SimConfig, Validation) {
  SimConfig c = tiny_config();
  c.reps = 0;
  EXPECT_THROW(c.validate(), Error);
  c = tiny_config();
  c.target_unit = 24;
  EXPECT_THROW(c.validate(), Error);
}
