#pragma once

#include <span>

namespace stwarp {

/// Two-sided standard normal quantile used for the central 95% interval.
inline constexpr double kZ95 = 1.959964;

double rmspe(std::span<const double> predicted, std::span<const double> truth);

/// Closed-form CRPS of a Gaussian predictive N(mu, sd^2) at realisation z.
double crps_gaussian(double mu, double sd, double z);

/// Interval score of the central 95% interval mu -/+ kZ95 * sd.
double interval_score_95(double mu, double sd, double z);

struct ScoreSummary {
  double rmspe = 0.0;
  double crps = 0.0;
  double interval_score = 0.0;
  std::size_t count = 0;
};

/// Unweighted means over a validation set (RMSPE is the root of the mean).
ScoreSummary score_predictions(std::span<const double> means, std::span<const double> sds,
                               std::span<const double> truth);

}  // namespace stwarp
