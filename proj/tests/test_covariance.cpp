#include "stwarp/covariance.hpp"
#include "stwarp/errors.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace stwarp;
using namespace stwarp::testing;

TEST(Kernel, ZeroDisplacementGivesVariance) {
  std::mt19937_64 rng(1);
  for (bool asym : {false, true}) {
    const auto k = random_kernel(rng, asym);
    EXPECT_DOUBLE_EQ(kernel_eval(k, Vec2::Zero(), 0.0), kernel_variance(k));
  }
}

TEST(Kernel, AdvectedDisplacementGivesVariance) {
  AsymmetricExpKernel k{1.7, 3.0, Vec2(0.4, -0.25)};
  for (double w : {-2.0, 0.3, 5.0}) EXPECT_DOUBLE_EQ(kernel_eval(k, k.velocity * w, w), 1.7);
}

TEST(Kernel, SeparableScalarValue) {
  SeparableExpKernel k{1.0, 1.0, 1.0};
  EXPECT_NEAR(kernel_eval(k, Vec2(0.6, 0.8), -1.0), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(std::exp(-2.0), 0.135335, 1e-6);
}

TEST(Kernel, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  const double h = 1e-6;
  for (bool asym : {false, true}) {
    auto k = random_kernel(rng, asym);
    const Vec2 d(0.21, -0.13);
    const double w = 0.17;
    const auto g = kernel_eval_grad(k, d, w);
    EXPECT_DOUBLE_EQ(g.value, kernel_eval(k, d, w));
    auto p = kernel_parameters(k);
    for (std::size_t j = 0; j < p.size(); ++j) {
      auto hi = k;
      auto lo = k;
      auto ph = p;
      auto pl = p;
      ph[j] += h;
      pl[j] -= h;
      set_kernel_parameters(hi, ph);
      set_kernel_parameters(lo, pl);
      EXPECT_NEAR(g.dparams[j], (kernel_eval(hi, d, w) - kernel_eval(lo, d, w)) / (2 * h), 1e-7);
    }
    for (int a = 0; a < 2; ++a) {
      Vec2 e = Vec2::Zero();
      e[a] = h;
      EXPECT_NEAR(g.dh[a], (kernel_eval(k, d + e, w) - kernel_eval(k, d - e, w)) / (2 * h), 1e-7);
    }
    EXPECT_NEAR(g.dw, (kernel_eval(k, d, w + h) - kernel_eval(k, d, w - h)) / (2 * h), 1e-7);
  }
}

TEST(Kernel, ParameterNamesAndValidation) {
  EXPECT_EQ(kernel_parameter_names(SeparableExpKernel{}), (std::vector<std::string>{"sigma2", "a_s", "a_t"}));
  EXPECT_EQ(kernel_parameter_count(AsymmetricExpKernel{}), 4u);
  EXPECT_THROW(validate_kernel(SeparableExpKernel{1.0, -1.0, 1.0}), ConfigError);
  EXPECT_THROW(validate_kernel(AsymmetricExpKernel{1.0, 0.0, Vec2::Zero()}), ConfigError);
  NonstationaryCovariance c;
  c.tau2 = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(CovEval, IdentityWarpIsStationaryKernel) {
  std::mt19937_64 rng(3);
  NonstationaryCovariance c;
  c.kernel = random_kernel(rng, true);
  const SpaceTimePoint p{0.1, 0.2, -0.3};
  const SpaceTimePoint q{-0.4, 0.05, 0.2};
  EXPECT_DOUBLE_EQ(cov_eval(c, p, q), kernel_eval(c.kernel, Vec2(0.5, 0.15), -0.5));
}

TEST(CovEval, SymmetricUnderArgumentSwap) {
  std::mt19937_64 rng(4);
  for (bool asym : {false, true}) {
    const auto c = random_model(rng, asym, true);
    const auto pts = random_points(rng, 20);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      EXPECT_DOUBLE_EQ(cov_eval(c, pts[i], pts[i + 1]), cov_eval(c, pts[i + 1], pts[i]));
  }
}

TEST(CovEval, AsymmetryInTimeReflection) {
  NonstationaryCovariance c;
  const double a = 1.3;
  c.kernel = AsymmetricExpKernel{2.0, a, Vec2(1.0, 0.0)};
  // cov(Y(s; t), Y(u; v)) with s = (1, 0), u = (0, 0): h = s - u, w = t - v.
  EXPECT_DOUBLE_EQ(cov_eval(c, {1, 0, 1}, {0, 0, 0}), 2.0);
  EXPECT_NEAR(cov_eval(c, {1, 0, 0}, {0, 0, 1}), 2.0 * std::exp(-2.0 * a), 1e-15);
}

TEST(CovEval, SeparabilityPreservedUnderWarping) {
  std::mt19937_64 rng(5);
  auto c = random_model(rng, false, true);
  const auto& k = std::get<SeparableExpKernel>(c.kernel);
  const auto pts = random_points(rng, 30);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto& p = pts[i];
    const auto& q = pts[i + 1];
    const Vec2 hs = warp_space(c.warp, Vec2(p.s1, p.s2)) - warp_space(c.warp, Vec2(q.s1, q.s2));
    const double ht = warp_time(c.warp, p.t) - warp_time(c.warp, q.t);
    const double spatial = k.sigma2 * std::exp(-k.a_s * hs.norm());
    const double temporal = std::exp(-k.a_t * std::abs(ht));
    EXPECT_NEAR(cov_eval(c, p, q), spatial * temporal, 1e-14);
  }
}

TEST(CovEval, DecaysAlongRaysWithIdentityWarp) {
  std::mt19937_64 rng(6);
  for (bool asym : {false, true}) {
    NonstationaryCovariance c;
    c.kernel = random_kernel(rng, asym);
    const Vec2 dir = Vec2(uniform(rng, -1, 1), uniform(rng, -1, 1)).normalized();
    double prev = cov_eval(c, {0, 0, 0}, {0, 0, 0});
    for (int s = 1; s < 20; ++s) {
      const Vec2 x = dir * (0.05 * s);
      const double v = cov_eval(c, {x.x(), x.y(), 0.0}, {0, 0, 0});
      EXPECT_LT(v, prev);
      prev = v;
    }
  }
}

TEST(CovMatrix, SinglePointWithNugget) {
  NonstationaryCovariance c;
  c.kernel = SeparableExpKernel{1.4, 2.0, 3.0};
  c.tau2 = 0.3;
  const std::vector<SpaceTimePoint> pts{{0.1, 0.1, 0.1}};
  const auto m = cov_matrix(c, pts, true);
  ASSERT_EQ(m.rows(), 1);
  EXPECT_DOUBLE_EQ(m(0, 0), 1.7);
  EXPECT_DOUBLE_EQ(cov_matrix(c, pts, false)(0, 0), 1.4);
}

TEST(CovMatrix, CholeskySucceedsOnRandomDraws) {
  std::mt19937_64 rng(7);
  for (int draw = 0; draw < 50; ++draw) {
    const auto c = random_model(rng, draw % 2 == 1, true);
    const auto pts = random_points(rng, 100);
    Eigen::MatrixXd m = cov_matrix(c, pts, false);
    m.diagonal().array() += 1e-10;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    ASSERT_EQ(llt.info(), Eigen::Success) << "draw " << draw;
    EXPECT_TRUE(m.isApprox(m.transpose(), 0.0));
  }
}

TEST(CovMatrix, SeparableGridIsProductOfFactors) {
  NonstationaryCovariance c;
  c.kernel = SeparableExpKernel{1.2, 3.0, 2.0};
  std::vector<SpaceTimePoint> pts;
  for (int t = 0; t < 3; ++t)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) pts.push_back({i / 3.0 - 0.5, j / 3.0 - 0.5, t / 2.0 - 0.5});
  const auto m = cov_matrix(c, pts, false);
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = 0; b < pts.size(); ++b) {
      const double cs = 1.2 * std::exp(-3.0 * std::hypot(pts[a].s1 - pts[b].s1, pts[a].s2 - pts[b].s2));
      const double ct = std::exp(-2.0 * std::abs(pts[a].t - pts[b].t));
      EXPECT_NEAR(m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), cs * ct, 1e-14);
    }
}

TEST(CovMatrix, CrossCovarianceExcludesNugget) {
  std::mt19937_64 rng(8);
  const auto c = random_model(rng, false, true);
  const auto pts = random_points(rng, 5);
  const auto cross = cross_cov_matrix(c, pts, pts);
  const auto full = cov_matrix(c, pts, false);
  EXPECT_LT((cross - full).cwiseAbs().maxCoeff(), 1e-15);
}
