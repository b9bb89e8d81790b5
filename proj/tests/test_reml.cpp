#include "support.hpp"

#include "stwarp/errors.hpp"
#include "stwarp/fit.hpp"
#include "stwarp/parameters.hpp"
#include "stwarp/reml.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace stwarp {
namespace {

using testing::dense_reml;
using testing::relative_error;

VecchiaPlan full_plan(const Dataset& d, std::uint64_t seed = 1) {
  PlanOptions o;
  o.m = d.size();
  o.seed = seed;
  return make_plan(d.points, o);
}

TEST(Reml, SinglePointStandardNormal) {
  const Dataset d = make_dataset({{0.0, 0.0, 0.0}}, Eigen::VectorXd::Zero(1));
  NonstationaryCovariance c;
  c.kernel = SeparableExpKernel{0.6, 1.0, 1.0};
  c.tau2 = 0.4;
  EXPECT_NEAR(reml_loglik(c, d, full_plan(d)), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(reml_loglik(c, d, full_plan(d)), -0.918939, 1e-6);
}

TEST(Reml, MatchesDenseOracleInFullNeighborLimit) {
  std::mt19937_64 rng(11);
  for (int draw = 0; draw < 5; ++draw) {
    const auto d = testing::random_dataset(rng, 40, 2);
    const auto c = testing::random_model(rng, draw % 2 == 1, true);
    PlanOptions o;
    o.m = 39;
    const auto plan = make_plan(d.points, o);
    EXPECT_LT(relative_error(reml_loglik(c, d, plan), dense_reml(c, d)), 1e-9) << "draw " << draw;
  }
}

TEST(Reml, ZeroCovariatesIsGaussianLoglik) {
  std::mt19937_64 rng(5);
  const auto d = testing::random_dataset(rng, 30, 0);
  const auto c = testing::random_model(rng, false, false);
  EXPECT_LT(relative_error(reml_loglik(c, d, full_plan(d)), dense_reml(c, d)), 1e-10);
}

TEST(Reml, OrderingInvariantInExactCase) {
  std::mt19937_64 rng(8);
  const auto d = testing::random_dataset(rng, 25, 1);
  const auto c = testing::random_model(rng, true, true);
  PlanOptions a, b;
  a.m = b.m = 24;
  b.ordering = Ordering::Random;
  b.seed = 99;
  EXPECT_LT(relative_error(reml_loglik(c, d, make_plan(d.points, a)), reml_loglik(c, d, make_plan(d.points, b))),
            1e-11);
}

TEST(Reml, DuplicatedConstantColumnIsRankDeficient) {
  std::mt19937_64 rng(3);
  auto d = testing::random_dataset(rng, 20, 1);
  Eigen::MatrixXd x(20, 2);
  x.col(0) = d.x.col(0);
  x.col(1) = d.x.col(0);
  d.x = x;
  const auto c = testing::random_model(rng, false, false);
  EXPECT_THROW(reml_loglik(c, d, full_plan(d)), RankDeficiencyError);
}

TEST(Reml, TrendShiftLeavesObjectiveUnchanged) {
  std::mt19937_64 rng(21);
  auto d = testing::random_dataset(rng, 50, 2);
  const auto c = testing::random_model(rng, false, true);
  PlanOptions o;
  o.m = 10;
  const auto plan = make_plan(d.points, o);
  const double before = reml_loglik(c, d, plan);
  d.z += 3.7 * d.x.col(1) - 2.0 * d.x.col(0);
  EXPECT_LT(relative_error(before, reml_loglik(c, d, plan)), 1e-10);
}

TEST(Gls, InterceptWithUnitPrecisionIsMean) {
  std::mt19937_64 rng(2);
  auto d = testing::random_dataset(rng, 30, 1);
  NonstationaryCovariance c;
  c.kernel = SeparableExpKernel{0.0, 1.0, 1.0};
  c.tau2 = 1.0;
  PlanOptions o;
  o.m = 5;
  const auto beta = gls_beta(c, d, make_plan(d.points, o));
  EXPECT_NEAR(beta[0], d.z.mean(), 1e-12);
}

TEST(Gls, MatchesDenseOracle) {
  std::mt19937_64 rng(4);
  const auto d = testing::random_dataset(rng, 30, 2);
  const auto c = testing::random_model(rng, true, true);
  PlanOptions o;
  o.m = 29;
  const auto beta = gls_beta(c, d, make_plan(d.points, o));
  const auto ref = testing::dense_gls(c, d);
  for (Eigen::Index i = 0; i < beta.size(); ++i) EXPECT_LT(relative_error(beta[i], ref[i]), 1e-9);
}

TEST(Gls, RecoversExactTrendWithoutNoise) {
  std::mt19937_64 rng(6);
  auto d = testing::random_dataset(rng, 40, 2);
  const Eigen::Vector2d beta0(1.5, -0.75);
  d.z = d.x * beta0;
  NonstationaryCovariance c;
  c.kernel = SeparableExpKernel{1.0, 3.0, 3.0};
  c.tau2 = 1e-12;
  PlanOptions o;
  o.m = 15;
  const auto beta = gls_beta(c, d, make_plan(d.points, o));
  EXPECT_NEAR(beta[0], beta0[0], 1e-6);
  EXPECT_NEAR(beta[1], beta0[1], 1e-6);
}

TEST(Gradient, QuadraticToyIsExact) {
  const Eigen::Vector3d center(1.0, -2.0, 0.5);
  const ObjectiveFn f = [&](const Eigen::VectorXd& x, double& v, Eigen::VectorXd* g) {
    v = (x - center).squaredNorm();
    if (g) *g = 2.0 * (x - center);
    return true;
  };
  EXPECT_LE(gradient_discrepancy(f, Eigen::Vector3d(0.3, 0.7, -1.1), 1e-4), 1e-10);
}

TEST(Gradient, RemlMatchesCentralDifferences) {
  std::mt19937_64 rng(31);
  for (int draw = 0; draw < 6; ++draw) {
    const auto d = testing::random_dataset(rng, 40, draw % 3);
    const auto c = testing::random_model(rng, draw % 2 == 0, true);
    PlanOptions o;
    o.m = 10;
    const auto plan = make_plan(d.points, o);
    EXPECT_LE(gradient_check(c, d, plan, 1e-5), 1e-4) << "draw " << draw;
  }
}

TEST(Gradient, DiscrepancyShrinksWithStep) {
  std::mt19937_64 rng(32);
  const auto d = testing::random_dataset(rng, 40, 1);
  const auto c = testing::random_model(rng, true, true);
  PlanOptions o;
  o.m = 10;
  const auto plan = make_plan(d.points, o);
  const double coarse = gradient_check(c, d, plan, 1e-3);
  const double fine = gradient_check(c, d, plan, 1e-5);
  EXPECT_LT(fine, coarse);
}

}  // namespace
}  // namespace stwarp
