#include <cmath>

#include <gtest/gtest.h>

#include "hetslope/completion.hpp"

using namespace hetslope;

namespace {

completion::CompletionOptions fast_options() {
  completion::CompletionOptions o;
  o.tuning.n_sims = 40;
  o.rank = 1;
  return o;
}

}  // namespace

TEST(CheckMask, SparseRowsAndColumns) {
  Matrix mask = Matrix::Ones(20, 20);
  EXPECT_NO_THROW(completion::check_mask(mask));
  mask.row(3).setZero();
  mask(3, 0) = 1.0;
  try {
    completion::check_mask(mask);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientObservation);
  }
  mask = Matrix::Ones(20, 20);
  mask.col(5).setZero();
  EXPECT_THROW(completion::check_mask(mask), Error);
  mask = Matrix::Ones(20, 20);
  mask(0, 0) = 0.5;
  EXPECT_THROW(completion::check_mask(mask), Error);
}

TEST(GenCompletion, MaskAndZeroFill) {
  completion::CompletionDesign d;
  d.n = 60;
  d.t = 50;
  const auto draw = completion::gen_completion(d, 3);
  EXPECT_NEAR(draw.mask.mean(), 0.7, 0.03);
  EXPECT_EQ((draw.y_obs.array() * (1.0 - draw.mask.array())).abs().maxCoeff(), 0.0);
  EXPECT_EQ(linalg::numerical_rank(linalg::singular_values(draw.theta)), 1);
  const auto again = completion::gen_completion(d, 3);
  EXPECT_TRUE((again.y_obs.array() == draw.y_obs.array()).all());
}

TEST(ImpliedVariance, InvertsTheTuningMap) {
  const auto draw = completion::gen_completion({40, 40}, 4);
  tuning::TuningOptions o;
  o.n_sims = 40;
  const auto res = completion::tune_completion(draw.y_obs, draw.mask, 0.25, o);
  EXPECT_TRUE(std::isinf(res.nu0));
  EXPECT_NEAR(completion::implied_variance(draw.mask, res.nu[0], o), 0.25, 1e-12);
}

TEST(CompleteFit, FullMaskNoiselessIsExact) {
  Rng rng(5);
  const Vector a = standard_normal(30, rng).array() + 1.0, b = standard_normal(20, rng).array() + 1.0;
  const Matrix y = a * b.transpose();
  auto opts = fast_options();
  opts.sigma_u_sq = 1e-6;
  opts.tuning.solver.tol_rel = 1e-14;
  const auto est = completion::complete_fit(y, Matrix::Ones(30, 20), 1e-3, {inference::Target{4, {}}}, opts);
  EXPECT_LT((est.theta_hat[0].col(4) - y.col(4)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((est.theta_hat[0] - y).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(CompleteFit, MissingCellsGetEstimatesAndStandardErrors) {
  const auto draw = completion::gen_completion({40, 40}, 6);
  auto opts = fast_options();
  opts.sigma_u_sq = 0.25;
  tuning::TuningOptions to;
  to.n_sims = 40;
  const double nu = completion::tune_completion(draw.y_obs, draw.mask, 0.25, to).nu[0];
  const auto est = completion::complete_fit(draw.y_obs, draw.mask, nu,
                                            {inference::Target{2, {inference::all_units(40)}}}, opts);
  EXPECT_EQ(est.ranks[0], 1);
  EXPECT_FALSE(est.theta_hat[0].array().isNaN().any());
  EXPECT_FALSE(est.se[0].col(2).array().isNaN().any());
  EXPECT_GT(est.se[0].col(2).minCoeff(), 0.0);
  const double rmse = std::sqrt((est.theta_hat[0] - draw.theta).squaredNorm() / 1600.0);
  EXPECT_LT(rmse, 0.5);
  ASSERT_EQ(est.group_results.size(), 1u);
  EXPECT_NEAR(est.group_results[0].estimate, est.theta_hat[0].col(2).mean(), 1e-12);
}

TEST(CompleteFit, RelabelEquivariance) {
  Rng rng(7);
  const Vector a = standard_normal(30, rng).array() + 1.0, b = standard_normal(25, rng).array() + 1.0;
  const Matrix y = a * b.transpose() + 0.3 * standard_normal(30, 25, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(30);
  perm.setIdentity();
  std::reverse(perm.indices().data(), perm.indices().data() + 30);
  auto opts = fast_options();
  opts.sigma_u_sq = 0.09;
  const Matrix ones = Matrix::Ones(30, 25);
  const std::vector<inference::Target> targets{{3, {}}};
  const auto base = completion::complete_fit(y, ones, 5.0, targets, opts);
  const auto moved = completion::complete_fit(perm * y, ones, 5.0, targets, opts);
  EXPECT_LT((perm * base.theta_hat[0] - moved.theta_hat[0]).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((perm * base.se[0].col(3) - moved.se[0].col(3)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(CompleteFit, Errors) {
  const auto draw = completion::gen_completion({30, 30}, 8);
  EXPECT_THROW(completion::complete_fit(draw.y_obs, draw.mask, 0.0, {inference::Target{0, {}}}, fast_options()),
               Error);
  auto opts = fast_options();
  opts.rank = 0;
  opts.sigma_u_sq = 0.25;
  try {
    completion::complete_fit(draw.y_obs, draw.mask, 10.0, {inference::Target{0, {}}}, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroRankEffect);
  }
}
