#include "stwarp/errors.hpp"
#include "stwarp/fit.hpp"
#include "stwarp/parameters.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace stwarp;
using namespace stwarp::testing;

namespace {

std::vector<SpaceTimePoint> grid(int nx, int nt) {
  std::vector<SpaceTimePoint> pts;
  for (int k = 0; k < nt; ++k)
    for (int j = 0; j < nx; ++j)
      for (int i = 0; i < nx; ++i)
        pts.push_back({-0.5 + i / (nx - 1.0), -0.5 + j / (nx - 1.0), -0.5 + k / (nt - 1.0)});
  return pts;
}

// Independent sampler: dense Cholesky of the model covariance plus white noise.
Eigen::VectorXd sample(const NonstationaryCovariance& c, const std::vector<SpaceTimePoint>& pts,
                       std::uint64_t seed) {
  const Eigen::MatrixXd sigma = cov_matrix(c, pts, false);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::VectorXd xi(sigma.rows());
  Eigen::VectorXd eta(sigma.rows());
  for (auto& v : xi) v = nd(rng);
  for (auto& v : eta) v = nd(rng);
  return llt.matrixL() * xi + std::sqrt(c.tau2) * eta;
}

FitConfig unit_domain_config(std::size_t m) {
  FitConfig cfg;
  cfg.plan.m = m;
  cfg.plan.time_scale = 1.0;
  cfg.domain = DomainBounds{};
  return cfg;
}

ModelSpec stationary_spec() {
  ModelSpec spec;
  spec.model.kernel = SeparableExpKernel{};
  return spec;
}

}  // namespace

TEST(Fit, PureNoiseRecoversNugget) {
  std::mt19937_64 rng(1);
  const auto pts = random_points(rng, 2000);
  Eigen::VectorXd z(2000);
  for (auto& v : z) v = std::normal_distribution<double>()(rng);
  const auto data = make_dataset(pts, z);
  ModelSpec spec;
  spec.model.kernel = SeparableExpKernel{1e-4, 6.0, 6.0};
  spec.model.tau2 = 1.0;
  spec.init_from_data = false;
  spec.frozen = {"sigma2"};
  const auto r = fit(data, spec, unit_domain_config(30));
  const double tau2 = r.theta[*ParameterLayout(r.model).index_of("tau2")];
  EXPECT_NEAR(tau2, 1.0, 0.15);
  EXPECT_NEAR(r.theta[0], 1e-4, 1e-18);
}

TEST(Fit, RecoversStationaryDecays) {
  NonstationaryCovariance truth;
  truth.kernel = SeparableExpKernel{1.0, 8.0, 4.0};
  truth.tau2 = 0.1;
  const auto pts = grid(21, 10);
  const auto data = make_dataset(pts, sample(truth, pts, 2));
  const auto r = fit(data, stationary_spec(), unit_domain_config(30));
  EXPECT_TRUE(r.converged) << r.termination;
  const auto& k = std::get<SeparableExpKernel>(r.model.kernel);
  EXPECT_NEAR(k.a_s, 8.0, 0.25 * 8.0);
  EXPECT_NEAR(k.a_t, 4.0, 0.25 * 4.0);
}

TEST(Fit, FrozenIdentityWarpReproducesStationaryFit) {
  std::mt19937_64 rng(3);
  NonstationaryCovariance truth;
  truth.kernel = SeparableExpKernel{1.0, 5.0, 3.0};
  truth.tau2 = 0.2;
  const auto pts = random_points(rng, 300);
  const auto data = make_dataset(pts, sample(truth, pts, 4));
  const auto cfg = unit_domain_config(15);
  const auto stat = fit(data, stationary_spec(), cfg);

  auto spec = stationary_spec();
  spec.model.warp.spatial_units.emplace_back(RbfWarpUnit::regular_grid(3));
  spec.model.warp.spatial_units.emplace_back(RbfWarpUnit::regular_grid(4));
  spec.frozen = {"spatial*"};
  const auto ns = fit(data, spec, cfg);
  ASSERT_EQ(ns.theta.size(), 4 + 9 + 16);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(ns.theta[k], stat.theta[k], 1e-8 * std::abs(stat.theta[k]));
  EXPECT_NEAR(ns.reml_loglik, stat.reml_loglik, 1e-8 * std::abs(stat.reml_loglik));
  for (int k = 4; k < ns.theta.size(); ++k) EXPECT_EQ(ns.theta[k], 0.0);
}

TEST(Fit, WarmStartNeverEndsBelowItsFrozenWarpStage) {
  std::mt19937_64 rng(8);
  auto truth = random_model(rng, true, true);
  const auto pts = random_points(rng, 250);
  const auto data = make_dataset(pts, sample(truth, pts, 9));
  const auto cfg = unit_domain_config(10);
  ModelSpec spec;
  spec.model.kernel = AsymmetricExpKernel{};
  spec.model.warp.spatial_units.emplace_back(RbfWarpUnit::regular_grid(3));
  spec.warp_init = WarpInit::Ramp;

  auto frozen = spec;
  frozen.frozen = {"spatial*"};
  const auto stage0 = fit(data, frozen, cfg);
  const auto warm = fit(data, spec, cfg);
  EXPECT_GE(warm.reml_loglik, stage0.reml_loglik - 1e-9 * std::abs(stage0.reml_loglik));
  EXPECT_GT(warm.iterations, stage0.iterations);

  spec.warm_start = false;
  const auto cold = fit(data, spec, cfg);
  EXPECT_TRUE(std::isfinite(cold.reml_loglik));
}

TEST(Fit, TraceIsMonotoneAndRunsAreReproducible) {
  std::mt19937_64 rng(5);
  auto truth = random_model(rng, false, true);
  const auto pts = random_points(rng, 250);
  const auto data = make_dataset(pts, sample(truth, pts, 6));
  ModelSpec spec;
  spec.model.kernel = SeparableExpKernel{};
  spec.model.warp.spatial_units.emplace_back(RbfWarpUnit::regular_grid(3));
  spec.model.warp.temporal_unit = AxialWarpUnit::with_default_basis(Axis::T, 4);
  spec.warp_init = WarpInit::Ramp;
  const auto cfg = unit_domain_config(10);
  const auto a = fit(data, spec, cfg);
  const auto b = fit(data, spec, cfg);
  ASSERT_FALSE(a.objective_trace.empty());
  for (std::size_t i = 1; i < a.objective_trace.size(); ++i)
    EXPECT_LE(a.objective_trace[i], a.objective_trace[i - 1]);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_NEAR(-a.objective_trace.back(), a.reml_loglik, 1e-9 * std::abs(a.reml_loglik));
}

TEST(Fit, RefitOnWarpedDomainRecordsPlan) {
  std::mt19937_64 rng(7);
  auto truth = random_model(rng, false, true);
  const auto pts = random_points(rng, 200);
  const auto data = make_dataset(pts, sample(truth, pts, 8));
  ModelSpec spec;
  spec.model.warp.spatial_units.emplace_back(RbfWarpUnit::regular_grid(3));
  auto cfg = unit_domain_config(10);
  cfg.refit_on_warped = true;
  const auto r = fit(data, spec, cfg);
  EXPECT_EQ(r.plan.domain, NeighborDomain::Warped);
  EXPECT_DOUBLE_EQ(r.plan.time_scale, 1.0);
}

TEST(Fit, BetaIsGlsAtTheOptimum) {
  std::mt19937_64 rng(9);
  auto data = random_dataset(rng, 150, 2);
  data.z += 3.0 * data.x.col(0) - 2.0 * data.x.col(1);
  const auto r = fit(data, stationary_spec(), unit_domain_config(10));
  ASSERT_EQ(r.beta.size(), 2);
  PlanOptions po = r.plan;
  const auto working = to_working(r.scaler, data);
  const auto plan = make_plan(working.points, po, r.model.warp);
  const auto beta = gls_beta(r.model, working, plan);
  EXPECT_LT((beta - r.beta).norm(), 1e-10);
  EXPECT_NEAR(r.beta[1], -2.0, 0.5);
}

TEST(Fit, NonFiniteStartNamesParameters) {
  std::mt19937_64 rng(10);
  const auto data = random_dataset(rng, 50, 0);
  ModelSpec spec;
  spec.model.kernel = SeparableExpKernel{1.0, std::numeric_limits<double>::infinity(), 1.0};
  spec.model.tau2 = 0.5;
  spec.init_from_data = false;
  try {
    fit(data, spec, unit_domain_config(5));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("a_s"), std::string::npos) << e.what();
  }
}

TEST(Fit, InitialModelFromData) {
  std::mt19937_64 rng(11);
  auto data = random_dataset(rng, 400, 0);
  data.z *= 2.0;
  ModelSpec spec;
  spec.model.kernel = AsymmetricExpKernel{};
  spec.model.warp.spatial_units.emplace_back(AxialWarpUnit::with_default_basis(Axis::S1, 3));
  spec.model.warp.spatial_units.emplace_back(RbfWarpUnit::regular_grid(2));
  spec.model.warp.spatial_units.back() = [] {
    auto u = RbfWarpUnit::regular_grid(2);
    u.weights.assign(4, 0.01);
    return u;
  }();
  const auto c = initial_model(spec, data);
  const double mean = data.z.mean();
  const double var = (data.z.array() - mean).square().sum() / (data.z.size() - 1.0);
  const auto& k = std::get<AsymmetricExpKernel>(c.kernel);
  EXPECT_NEAR(k.sigma2, 0.5 * var, 0.05 * var);
  EXPECT_NEAR(c.tau2, k.sigma2, 1e-15);
  EXPECT_EQ(k.velocity, Vec2::Zero());
  const auto& ax = std::get<AxialWarpUnit>(c.warp.spatial_units[0]);
  EXPECT_EQ(ax.weights, (std::vector<double>{1.0, 1e-6, 1e-6}));
  EXPECT_EQ(std::get<RbfWarpUnit>(c.warp.spatial_units[1]).weights, std::vector<double>(4, 0.0));
  spec.warp_init = WarpInit::Ramp;
  const auto ramp = initial_model(spec, data);
  EXPECT_EQ(std::get<AxialWarpUnit>(ramp.warp.spatial_units[0]).weights, std::vector<double>(3, std::log(2.0)));
}

TEST(Fit, ScalerRoundTrip) {
  std::vector<SpaceTimePoint> pts{{10, 100, 2000}, {30, 110, 2004}, {20, 105, 2002}};
  const auto data = make_dataset(pts, Eigen::VectorXd::Zero(3));
  const auto sc = make_scaler(data, std::nullopt);
  const auto w = to_working(sc, data);
  EXPECT_DOUBLE_EQ(w.points[0].s1, -0.5);
  EXPECT_DOUBLE_EQ(w.points[1].s1, 0.5);
  EXPECT_DOUBLE_EQ(w.points[1].t, 0.5);
  for (const auto& p : pts) {
    const auto q = from_working(sc, to_working(sc, p));
    EXPECT_NEAR(q.s1, p.s1, 1e-12);
    EXPECT_NEAR(q.s2, p.s2, 1e-12);
    EXPECT_NEAR(q.t, p.t, 1e-9);
  }
}
