#pragma once

#include "stwarp/covariance.hpp"
#include "stwarp/fit.hpp"
#include "stwarp/vecchia.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace stwarp {

struct GridSpec {
  std::size_t nx = 2, ny = 2, nt = 2;
  double s1_lo = -0.5, s1_hi = 0.5;
  double s2_lo = -0.5, s2_hi = 0.5;
  double t_lo = -0.5, t_hi = 0.5;
};

/// nx * ny * nt points, endpoints included; s1 varies fastest, t slowest.
std::vector<SpaceTimePoint> make_grid(const GridSpec& grid);

inline constexpr std::size_t kMaxDenseSimulation = 30000;

/// Z = L xi + tau eta with L L' the process covariance; xi then eta are drawn
/// from one mt19937_64 stream. Throws ConfigError above kMaxDenseSimulation
/// points and NumericalError when the covariance is not positive definite.
Eigen::VectorXd simulate_gp(const NonstationaryCovariance& c, std::span<const SpaceTimePoint> pts,
                            std::uint64_t seed);

/// Independent per-repetition seed stream derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t repetition, std::uint64_t stream);

struct StudyModel {
  std::string name;
  ModelSpec spec;
};

/// One table row: a fitted model predicted with neighbors from one domain.
struct StudyRow {
  std::string label;
  std::string model;
  NeighborDomain domain = NeighborDomain::Original;
};

struct StudyConfig {
  std::string name = "study";
  GridSpec grid;
  NonstationaryCovariance truth;
  double train_fraction = 0.8;
  std::size_t repetitions = 1;
  std::uint64_t seed = 0;
  FitConfig fit;
  std::size_t predict_m = 0;  // 0 uses fit.plan.m
  bool predict_noisy = true;
  std::vector<StudyModel> models;
  std::vector<StudyRow> rows;

  void validate() const;
};

struct RepetitionScores {
  std::size_t repetition = 0;
  std::vector<double> rmspe;     // per row
  std::vector<double> crps;      // per row
  std::vector<double> interval;  // per row
  std::vector<bool> converged;   // per row
};

struct RowSummary {
  std::string label;
  double rmspe_mean = 0.0, rmspe_se = 0.0;
  double crps_mean = 0.0, crps_se = 0.0;
  double interval_mean = 0.0, interval_se = 0.0;
  std::size_t nonconverged = 0;
};

struct StudyResult {
  std::vector<RepetitionScores> repetitions;
  std::vector<RowSummary> rows;
  /// fits[r][k] is model k of repetition r.
  std::vector<std::vector<FitResult>> fits;
};

struct StudyOptions {
  /// Per-repetition checkpoints; completed repetitions are loaded, not rerun.
  std::filesystem::path checkpoint_dir;
  std::function<void(const std::string&)> progress;
};

StudyResult run_study(const StudyConfig& cfg, const StudyOptions& options = {});

std::vector<RowSummary> summarize(const StudyConfig& cfg, std::span<const RepetitionScores> reps);

}  // namespace stwarp
