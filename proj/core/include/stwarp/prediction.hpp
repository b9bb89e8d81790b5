#pragma once

#include "stwarp/covariance.hpp"
#include "stwarp/data.hpp"
#include "stwarp/fit.hpp"
#include "stwarp/vecchia.hpp"

#include <span>
#include <vector>

namespace stwarp {

struct Prediction {
  SpaceTimePoint point;
  double mean = 0.0;
  /// Variance of the noiseless process Y, or of Z when predicting noisy.
  double variance = 0.0;
  /// Rows of the conditioning data, nearest first.
  std::vector<std::size_t> neighbors;
};

struct PredictOptions {
  std::size_t m = 30;
  NeighborDomain domain = NeighborDomain::Original;
  double time_scale = 1.0;
  /// Add tau2 to the variance (predict a new observation instead of Y).
  bool noisy = false;
};

/// Vecchia kriging: each target conditions on its m nearest observations.
/// Points are in the model's coordinates; `target_x` has one row per target
/// and the data's covariate count (ignored when q = 0). Throws ConfigError
/// when m exceeds the number of observations.
std::vector<Prediction> predict(const NonstationaryCovariance& c, const Dataset& data,
                                std::span<const SpaceTimePoint> targets, const Eigen::MatrixXd& target_x,
                                const Eigen::VectorXd& beta, const PredictOptions& options);

/// Prediction with a fitted model. Data and targets are in raw coordinates;
/// the fit's scaler and time scale are applied.
std::vector<Prediction> predict(const FitResult& fit, const Dataset& data, const Dataset& targets,
                                std::size_t m, NeighborDomain domain, bool noisy = false);

/// Dense conditional mean and variance given all observations.
std::vector<Prediction> kriging_exact(const NonstationaryCovariance& c, const Dataset& data,
                                      std::span<const SpaceTimePoint> targets, const Eigen::MatrixXd& target_x,
                                      const Eigen::VectorXd& beta, bool noisy = false);

}  // namespace stwarp
