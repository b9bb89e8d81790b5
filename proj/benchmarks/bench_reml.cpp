#include "stwarp/fit.hpp"
#include "stwarp/reml.hpp"
#include "stwarp/simulation.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace stwarp;

Dataset noise_dataset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::normal_distribution<double> g;
  std::vector<SpaceTimePoint> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  Eigen::VectorXd z(static_cast<Eigen::Index>(n));
  for (auto& v : z) v = g(rng);
  return make_dataset(std::move(pts), std::move(z));
}

NonstationaryCovariance fitted_architecture() {
  NonstationaryCovariance c;
  c.kernel = SeparableExpKernel{1.0, 8.0, 4.0};
  c.tau2 = 0.1;
  for (int k = 0; k < 2; ++k) {
    auto rbf = RbfWarpUnit::regular_grid(4);
    for (std::size_t j = 0; j < rbf.weights.size(); ++j)
      rbf.weights[j] = 0.3 * rbf.weight_bound * ((j % 3) - 1.0);
    c.warp.spatial_units.emplace_back(rbf);
  }
  c.warp.temporal_unit = AxialWarpUnit::with_default_basis(Axis::T, 10, 0.2);
  return c;
}

void BM_RemlValue(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = noise_dataset(n, 1);
  PlanOptions o;
  o.m = 30;
  const RemlObjective reml(d, make_plan(d.points, o));
  const auto c = fitted_architecture();
  for (auto _ : state) benchmark::DoNotOptimize(reml.loglik(c));
  state.SetComplexityN(state.range(0));
}

void BM_RemlGradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = noise_dataset(n, 1);
  PlanOptions o;
  o.m = 30;
  const RemlObjective reml(d, make_plan(d.points, o));
  const auto c = fitted_architecture();
  Eigen::VectorXd g;
  for (auto _ : state) benchmark::DoNotOptimize(reml.loglik_and_gradient(c, g));
  state.SetComplexityN(state.range(0));
}

void BM_MaxMinOrder(benchmark::State& state) {
  const auto d = noise_dataset(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(maxmin_order(d.points, 1.0, 0));
}

}  // namespace

BENCHMARK(BM_RemlValue)->Arg(5000)->Arg(10000)->Arg(20000)->Unit(benchmark::kMillisecond)->Complexity(benchmark::oN);
BENCHMARK(BM_RemlGradient)->Arg(5000)->Arg(10000)->Arg(20000)->Unit(benchmark::kMillisecond)->Complexity(benchmark::oN);
BENCHMARK(BM_MaxMinOrder)->Arg(5000)->Arg(20000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
