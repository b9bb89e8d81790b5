#include "stwarp/simulation.hpp"

#include "stwarp/config.hpp"
#include "stwarp/errors.hpp"
#include "stwarp/metrics.hpp"
#include "stwarp/prediction.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace stwarp {
namespace {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

// Power iteration on (shift I - S) for the smallest eigenvalue of S.
double smallest_eigenvalue_estimate(const Eigen::MatrixXd& s) {
  const Eigen::Index n = s.rows();
  double shift = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) shift = std::max(shift, s.row(i).cwiseAbs().sum());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  double mu = 0.0;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd w = shift * v - s.selfadjointView<Eigen::Lower>() * v;
    mu = v.dot(w);
    const double nw = w.norm();
    if (!(nw > 0.0)) break;
    v = w / nw;
  }
  return shift - mu;
}

std::string rep_dir_name(std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep_%03zu", r);
  return buf;
}

double mean_of(const std::vector<double>& v, double& se) {
  double sum = 0.0, sq = 0.0;
  std::size_t k = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      sum += x;
      ++k;
    }
  if (k == 0) {
    se = std::numeric_limits<double>::quiet_NaN();
    return se;
  }
  const double m = sum / static_cast<double>(k);
  for (double x : v)
    if (std::isfinite(x)) sq += (x - m) * (x - m);
  se = k > 1 ? std::sqrt(sq / static_cast<double>(k - 1) / static_cast<double>(k)) : 0.0;
  return m;
}

}  // namespace

std::vector<SpaceTimePoint> make_grid(const GridSpec& g) {
  if (g.nx < 1 || g.ny < 1 || g.nt < 1) throw ConfigError("grid sizes must be positive", "grid");
  const auto xs = linspace(g.s1_lo, g.s1_hi, g.nx);
  const auto ys = linspace(g.s2_lo, g.s2_hi, g.ny);
  const auto ts = linspace(g.t_lo, g.t_hi, g.nt);
  std::vector<SpaceTimePoint> pts;
  pts.reserve(g.nx * g.ny * g.nt);
  for (double t : ts)
    for (double y : ys)
      for (double x : xs) pts.push_back({x, y, t});
  return pts;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t repetition, std::uint64_t stream) {
  // splitmix64 over a counter
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (1 + repetition * 16 + stream);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Eigen::VectorXd simulate_gp(const NonstationaryCovariance& c, std::span<const SpaceTimePoint> pts,
                            std::uint64_t seed) {
  c.validate();
  const auto n = static_cast<Eigen::Index>(pts.size());
  if (pts.size() > kMaxDenseSimulation)
    throw ConfigError("dense simulation is limited to " + std::to_string(kMaxDenseSimulation) + " points, got " +
                      std::to_string(pts.size()));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(n), eta(n);
  for (Eigen::Index i = 0; i < n; ++i) xi[i] = normal(rng);
  for (Eigen::Index i = 0; i < n; ++i) eta[i] = normal(rng);

  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  if (kernel_variance(c.kernel) > 0.0 && n > 0) {
    Eigen::MatrixXd s = cov_matrix(c, pts, false);
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(s);
    if (llt.info() != Eigen::Success) {
      const Eigen::MatrixXd fresh = cov_matrix(c, pts, false);
      throw NumericalError("simulation covariance is not positive definite (smallest eigenvalue estimate " +
                           std::to_string(smallest_eigenvalue_estimate(fresh)) + ")");
    }
    y = s.triangularView<Eigen::Lower>() * xi;
  }
  return y + std::sqrt(c.tau2) * eta;
}

std::vector<RowSummary> summarize(const StudyConfig& cfg, std::span<const RepetitionScores> reps) {
  std::vector<RowSummary> out;
  for (std::size_t k = 0; k < cfg.rows.size(); ++k) {
    std::vector<double> r, c, s;
    RowSummary row;
    row.label = cfg.rows[k].label;
    for (const auto& rep : reps) {
      r.push_back(rep.rmspe[k]);
      c.push_back(rep.crps[k]);
      s.push_back(rep.interval[k]);
      if (!rep.converged[k]) ++row.nonconverged;
    }
    row.rmspe_mean = mean_of(r, row.rmspe_se);
    row.crps_mean = mean_of(c, row.crps_se);
    row.interval_mean = mean_of(s, row.interval_se);
    out.push_back(row);
  }
  return out;
}

StudyResult run_study(const StudyConfig& cfg, const StudyOptions& options) {
  cfg.validate();
  auto say = [&](const std::string& s) {
    if (options.progress) options.progress(s);
  };
  const auto grid = make_grid(cfg.grid);
  FitConfig fit_cfg = cfg.fit;
  if (!fit_cfg.domain)
    fit_cfg.domain = DomainBounds{cfg.grid.s1_lo, cfg.grid.s1_hi, cfg.grid.s2_lo,
                                  cfg.grid.s2_hi, cfg.grid.t_lo,  cfg.grid.t_hi};
  const std::size_t pm = cfg.predict_m ? cfg.predict_m : fit_cfg.plan.m;
  const bool checkpoint = !options.checkpoint_dir.empty();

  StudyResult result;
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    const auto dir = options.checkpoint_dir / rep_dir_name(r);
    if (checkpoint && std::filesystem::exists(dir / "scores.json")) {
      result.repetitions.push_back(parse_scores(read_text(dir / "scores.json"), (dir / "scores.json").string()));
      std::vector<FitResult> fits;
      for (const auto& m : cfg.models) {
        const auto p = dir / ("fit_" + m.name + ".json");
        fits.push_back(std::filesystem::exists(p) ? load_fit_result(p) : FitResult{});
      }
      result.fits.push_back(std::move(fits));
      say("repetition " + std::to_string(r + 1) + ": loaded from checkpoint");
      continue;
    }

    say("repetition " + std::to_string(r + 1) + ": simulating " + std::to_string(grid.size()) + " points");
    const Eigen::VectorXd z = simulate_gp(cfg.truth, grid, derive_seed(cfg.seed, r, 0));
    const Dataset all = make_dataset(grid, z);
    const auto [train, valid] = split_train_validation(all, cfg.train_fraction, derive_seed(cfg.seed, r, 1));
    FitConfig fc = fit_cfg;
    fc.plan.seed = derive_seed(cfg.seed, r, 2);

    std::vector<FitResult> fits(cfg.models.size());
    std::vector<bool> failed(cfg.models.size(), false);
    for (std::size_t k = 0; k < cfg.models.size(); ++k) {
      say("repetition " + std::to_string(r + 1) + ": fitting " + cfg.models[k].name);
      try {
        fits[k] = fit(train, cfg.models[k].spec, fc);
        fits[k].config_snapshot = serialize_run_config({cfg.models[k].spec, fc});
      } catch (const NumericalError& e) {
        failed[k] = true;
        say("repetition " + std::to_string(r + 1) + ": fit of " + cfg.models[k].name + " failed: " + e.what());
      }
      if (checkpoint && !failed[k])
        write_text(dir / ("fit_" + cfg.models[k].name + ".json"), serialize_fit_result(fits[k]));
    }

    RepetitionScores scores;
    scores.repetition = r;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& row : cfg.rows) {
      std::size_t k = 0;
      while (cfg.models[k].name != row.model) ++k;
      double rm = nan, cr = nan, is = nan;
      bool ok = !failed[k];
      if (ok) {
        try {
          const auto preds = predict(fits[k], train, valid, pm, row.domain, cfg.predict_noisy);
          Eigen::VectorXd mu(valid.z.size()), sd(valid.z.size());
          for (std::size_t j = 0; j < preds.size(); ++j) {
            mu[static_cast<Eigen::Index>(j)] = preds[j].mean;
            sd[static_cast<Eigen::Index>(j)] = std::sqrt(preds[j].variance);
          }
          const auto s = score_predictions(std::span<const double>(mu.data(), static_cast<std::size_t>(mu.size())),
                                           std::span<const double>(sd.data(), static_cast<std::size_t>(sd.size())),
                                           std::span<const double>(valid.z.data(), valid.size()));
          rm = s.rmspe;
          cr = s.crps;
          is = s.interval_score;
        } catch (const Error& e) {
          ok = false;
          say("repetition " + std::to_string(r + 1) + ": scoring " + row.label + " failed: " + e.what());
        }
      }
      scores.rmspe.push_back(rm);
      scores.crps.push_back(cr);
      scores.interval.push_back(is);
      scores.converged.push_back(ok && fits[k].converged);
    }
    if (checkpoint) write_text(dir / "scores.json", serialize_scores(scores, cfg.rows));
    result.repetitions.push_back(std::move(scores));
    result.fits.push_back(std::move(fits));
  }
  result.rows = summarize(cfg, result.repetitions);
  return result;
}

}  // namespace stwarp
