#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace stwarp {

struct SpaceTimePoint {
  double s1 = 0.0;
  double s2 = 0.0;
  double t = 0.0;

  bool operator==(const SpaceTimePoint&) const = default;
};

/// Point-referenced observations with an optional covariate design.
///
/// `z` has one entry per point, except for target sets (prediction
/// locations) where it may be empty. `x` is n x q with q >= 0.
struct Dataset {
  std::vector<SpaceTimePoint> points;
  Eigen::VectorXd z;
  Eigen::MatrixXd x;
  std::vector<std::string> covariate_names;

  std::size_t size() const { return points.size(); }
  std::size_t covariate_count() const { return static_cast<std::size_t>(x.cols()); }
  bool has_response() const { return z.size() > 0 || points.empty(); }

  /// Throws DataError if shapes disagree, any coordinate is non-finite or a
  /// (s1, s2, t) triple repeats.
  void validate() const;
};

Dataset make_dataset(std::vector<SpaceTimePoint> points, Eigen::VectorXd z,
                     Eigen::MatrixXd x = {}, std::vector<std::string> covariate_names = {});

/// Column mapping for delimited files. An empty `covariates` list selects
/// every column named x1, x2, ... in numeric order.
struct CsvSchema {
  std::string s1 = "s1";
  std::string s2 = "s2";
  std::string t = "t";
  std::string z = "z";
  std::vector<std::string> covariates;
  char delimiter = ',';
  bool require_response = true;
};

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema = {});
void save_dataset(const std::filesystem::path& path, const Dataset& data, char delimiter = ',');

/// Uniform random partition into (training, validation). The training part
/// has round(fraction * n) rows, clamped to [1, n - 1]. Both parts keep file
/// order.
std::pair<Dataset, Dataset> split_train_validation(const Dataset& data, double fraction,
                                                   std::uint64_t seed);

Dataset subset(const Dataset& data, std::span<const std::size_t> rows);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace stwarp
