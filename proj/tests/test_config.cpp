#include "stwarp/config.hpp"
#include "stwarp/errors.hpp"
#include "stwarp/parameters.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace stwarp;
using namespace stwarp::testing;

namespace {

const char* kModel = R"({
  // comment lines are allowed
  "kernel": {"type": "asymmetric", "sigma2": 1.5, "a": 6, "velocity": [0.2, -0.1]},
  "tau2": 0.05,
  "warp": {
    "normalize": true,
    "spatial": [
      {"type": "axial", "axis": "s2", "r": 3, "weights": [1, 0.5, 0.25]},
      {"type": "rbf", "per_side": 3, "radius_factor": 1.5, "relative_weights": [0.5, 0, 0, 0, -0.5, 0, 0, 0, 0.25]}
    ],
    "temporal": {"r": 2, "weights": [1, 2]}
  }
})";

}  // namespace

TEST(Config, ParsesModel) {
  const auto c = parse_model(kModel);
  const auto& k = std::get<AsymmetricExpKernel>(c.kernel);
  EXPECT_EQ(k.velocity, Vec2(0.2, -0.1));
  EXPECT_EQ(c.tau2, 0.05);
  ASSERT_EQ(c.warp.spatial_units.size(), 2u);
  const auto& ax = std::get<AxialWarpUnit>(c.warp.spatial_units[0]);
  EXPECT_EQ(ax.axis, Axis::S2);
  EXPECT_EQ(ax.centers.size(), 2u);
  const auto& rbf = std::get<RbfWarpUnit>(c.warp.spatial_units[1]);
  EXPECT_DOUBLE_EQ(rbf.weights[0], 0.5 * rbf.weight_bound);
  EXPECT_DOUBLE_EQ(rbf.weights[4], -0.5 * rbf.weight_bound);
  EXPECT_EQ(c.warp.temporal_unit->weights, (std::vector<double>{1, 2}));
}

TEST(Config, ModelRoundTripIsExact) {
  std::mt19937_64 rng(1);
  for (bool asym : {false, true}) {
    const auto c = random_model(rng, asym, true);
    const auto d = parse_model(serialize_model(c));
    EXPECT_EQ(kernel_parameters(d.kernel), kernel_parameters(c.kernel));
    EXPECT_EQ(d.tau2, c.tau2);
    EXPECT_EQ(d.warp.parameters(), c.warp.parameters());
    EXPECT_EQ(serialize_model(d), serialize_model(c));
    const auto pts = random_points(rng, 10);
    EXPECT_EQ(cov_matrix(c, pts, true), cov_matrix(d, pts, true));
  }
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    parse_model(R"({"kernel": {"type": "separable", "sigma2": 1, "a_s": 1, "a_t": 1, "alpha": 3}, "tau2": 1})");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "kernel.alpha");
    EXPECT_NE(std::string(e.what()).find("kernel.alpha"), std::string::npos);
  }
}

TEST(Config, TypeErrorIsNamed) {
  try {
    parse_model(R"({"kernel": {"type": "separable", "sigma2": "big", "a_s": 1, "a_t": 1}, "tau2": 1})");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "kernel.sigma2");
  }
}

TEST(Config, SyntaxErrorReportsLine) {
  try {
    parse_model("{\n  \"tau2\": 1,\n  \"kernel\": {,}\n}", "bad.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.cfg:3"), std::string::npos) << e.what();
  }
}

TEST(Config, RunConfigRoundTrip) {
  const std::string text = std::string(R"({"spec": {"model": )") + kModel +
                           R"(, "warp_init": "ramp", "frozen": ["tau2"]},
      "fit": {"optimizer": {"method": "bfgs", "max_iterations": 50},
              "plan": {"m": 12, "neighbor_domain": "D", "order": "random", "seed": 4}}})";
  const auto rc = parse_run_config(text);
  EXPECT_EQ(rc.spec.warp_init, WarpInit::Ramp);
  EXPECT_EQ(rc.spec.frozen, std::vector<std::string>{"tau2"});
  EXPECT_EQ(rc.fit.optimizer.method, "bfgs");
  EXPECT_EQ(rc.fit.optimizer.max_iterations, 50);
  EXPECT_EQ(rc.fit.plan.m, 12u);
  EXPECT_EQ(rc.fit.plan.domain, NeighborDomain::Warped);
  EXPECT_EQ(rc.fit.plan.ordering, Ordering::Random);
  EXPECT_EQ(serialize_run_config(parse_run_config(serialize_run_config(rc))), serialize_run_config(rc));
}

TEST(Config, ShippedConfigsLoad) {
  const std::filesystem::path dir = STWARP_CONFIG_DIR;
  for (const char* name : {"study1.cfg", "study1_small.cfg", "study2.cfg", "study2_small.cfg", "tiny_study.cfg"}) {
    const auto cfg = load_study_config(dir / name);
    EXPECT_NO_THROW(cfg.validate()) << name;
    EXPECT_EQ(parse_study_config(serialize_study_config(cfg)).rows.size(), cfg.rows.size());
  }
  const auto s1 = load_study_config(dir / "study1_small.cfg");
  EXPECT_EQ(s1.grid.nx * s1.grid.ny * s1.grid.nt, 9610u);
  EXPECT_EQ(s1.repetitions, 10u);
  EXPECT_EQ(s1.fit.plan.m, 30u);
  ASSERT_EQ(s1.rows.size(), 3u);
  EXPECT_EQ(s1.rows[0].label, "Stationary, separable");
  EXPECT_EQ(s1.rows[2].label, "Nonstationary, separable (NNs on D_st)");
  const auto s2 = load_study_config(dir / "study2_small.cfg");
  ASSERT_EQ(s2.rows.size(), 4u);
  EXPECT_EQ(s2.rows[3].label, "Nonstationary, asymmetric");
  const auto full = load_study_config(dir / "study1.cfg");
  EXPECT_EQ(full.grid.nx * full.grid.ny * full.grid.nt, 26010u);
  EXPECT_EQ(full.repetitions, 30u);
  EXPECT_EQ(full.fit.plan.m, 50u);
  for (const char* name : {"stationary.cfg", "nonstationary.cfg"}) EXPECT_NO_THROW(load_run_config(dir / name)) << name;
}

TEST(Config, MissingFileIsConfigError) {
  EXPECT_THROW(load_study_config("/nonexistent/study.cfg"), ConfigError);
}

TEST(Config, FitResultRoundTrip) {
  std::mt19937_64 rng(2);
  FitResult f;
  f.model = random_model(rng, true, true);
  f.scaler = CoordinateScaler::from_bounds(0, 3, 1, 2, 10, 20);
  const ParameterLayout layout(f.model);
  f.parameter_names = layout.names();
  f.theta = layout.natural(f.model);
  f.frozen.assign(layout.size(), false);
  f.frozen[1] = true;
  f.beta = Eigen::Vector2d(0.1, 1.0 / 3.0);
  f.covariate_names = {"x1", "x2"};
  f.objective_trace = {10.5, 9.25, 9.0};
  f.reml_loglik = -9.0;
  f.converged = true;
  f.termination = "done";
  f.iterations = 3;
  f.plan.m = 7;
  f.plan.time_scale = 0.25;
  f.plan.domain = NeighborDomain::Warped;
  f.config_snapshot = "{}";
  const auto text = serialize_fit_result(f);
  const auto g = parse_fit_result(text);
  EXPECT_EQ(g.theta, f.theta);
  EXPECT_EQ(g.beta, f.beta);
  EXPECT_EQ(g.frozen, f.frozen);
  EXPECT_EQ(g.objective_trace, f.objective_trace);
  EXPECT_EQ(g.plan.time_scale, 0.25);
  EXPECT_EQ(g.plan.domain, NeighborDomain::Warped);
  EXPECT_EQ(g.scaler.s_scale, f.scaler.s_scale);
  EXPECT_EQ(serialize_fit_result(g), text);
}

TEST(Config, ScoresKeepNanAsNull) {
  RepetitionScores s;
  s.repetition = 4;
  s.rmspe = {0.5, std::numeric_limits<double>::quiet_NaN()};
  s.crps = {0.25, 0.3};
  s.interval = {2.0, 2.5};
  s.converged = {true, false};
  const std::vector<StudyRow> rows{{"a", "m", NeighborDomain::Original}, {"b", "m", NeighborDomain::Warped}};
  const auto text = serialize_scores(s, rows);
  EXPECT_NE(text.find("null"), std::string::npos);
  const auto t = parse_scores(text);
  EXPECT_EQ(t.repetition, 4u);
  EXPECT_EQ(t.rmspe[0], 0.5);
  EXPECT_TRUE(std::isnan(t.rmspe[1]));
  EXPECT_EQ(t.converged, s.converged);
}

TEST(Config, AtomicWriteReplacesContent) {
  const auto p = std::filesystem::temp_directory_path() / "stwarp_write_text.txt";
  write_text(p, "first");
  write_text(p, "second");
  EXPECT_EQ(read_text(p), "second");
}
