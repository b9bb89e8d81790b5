#include "stwarp/metrics.hpp"

#include "stwarp/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace stwarp {
namespace {

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b)
    throw Error("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  if (a == 0) throw Error("empty score input");
}

void require_positive_sd(double sd) {
  if (!(sd > 0.0)) throw Error("predictive standard deviation must be positive");
}

}  // namespace

double rmspe(std::span<const double> predicted, std::span<const double> truth) {
  require_same_length(predicted.size(), truth.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - truth[i];
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(predicted.size()));
}

double crps_gaussian(double mu, double sd, double z) {
  require_positive_sd(sd);
  using std::numbers::inv_sqrtpi;
  const double u = (z - mu) / sd;
  const double pdf = std::exp(-0.5 * u * u) * inv_sqrtpi / std::numbers::sqrt2;
  const double cdf = 0.5 * std::erfc(-u / std::numbers::sqrt2);
  return sd * (u * (2.0 * cdf - 1.0) + 2.0 * pdf - inv_sqrtpi);
}

double interval_score_95(double mu, double sd, double z) {
  require_positive_sd(sd);
  constexpr double alpha = 0.05;
  const double lower = mu - kZ95 * sd;
  const double upper = mu + kZ95 * sd;
  double score = upper - lower;
  if (z < lower) score += (2.0 / alpha) * (lower - z);
  if (z > upper) score += (2.0 / alpha) * (z - upper);
  return score;
}

ScoreSummary score_predictions(std::span<const double> means, std::span<const double> sds,
                               std::span<const double> truth) {
  require_same_length(means.size(), truth.size());
  require_same_length(sds.size(), truth.size());
  ScoreSummary s;
  s.count = truth.size();
  s.rmspe = rmspe(means, truth);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    s.crps += crps_gaussian(means[i], sds[i], truth[i]);
    s.interval_score += interval_score_95(means[i], sds[i], truth[i]);
  }
  s.crps /= static_cast<double>(s.count);
  s.interval_score /= static_cast<double>(s.count);
  return s;
}

}  // namespace stwarp
