#pragma once

#include "stwarp/covariance.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stwarp {

/// Smooth bijections from the real line onto each parameter's valid set.
enum class Transform {
  Identity,    // velocity components
  Log,         // variances and decays: natural = exp(free)
  Softplus,    // axial weights: natural = log(1 + exp(free))
  ScaledTanh,  // RBF weights: natural = bound * tanh(free)
};

double to_natural(Transform tr, double bound, double free);
double to_free(Transform tr, double bound, double natural);
/// d natural / d free
double natural_derivative(Transform tr, double bound, double free);

struct ParameterInfo {
  std::string name;
  Transform transform = Transform::Identity;
  double bound = 0.0;  // ScaledTanh only
};

/// Flat parameter vector of a NonstationaryCovariance. Order: kernel
/// parameters, "tau2", spatial unit weights ("spatial[u].w[j]"), temporal
/// weights ("temporal.w[j]").
class ParameterLayout {
 public:
  explicit ParameterLayout(const NonstationaryCovariance& model);

  std::size_t size() const { return info_.size(); }
  const std::vector<ParameterInfo>& info() const { return info_; }
  std::vector<std::string> names() const;
  std::size_t kernel_count() const { return kernel_count_; }
  std::size_t tau2_index() const { return kernel_count_; }
  std::size_t warp_offset() const { return kernel_count_ + 1; }

  Eigen::VectorXd natural(const NonstationaryCovariance& model) const;
  /// Copies natural values into `model`, which must share this layout.
  void apply(NonstationaryCovariance& model, const Eigen::VectorXd& natural) const;

  Eigen::VectorXd to_free(const Eigen::VectorXd& natural) const;
  Eigen::VectorXd to_natural(const Eigen::VectorXd& free) const;
  /// Diagonal of d natural / d free.
  Eigen::VectorXd jacobian(const Eigen::VectorXd& free) const;

  std::optional<std::size_t> index_of(const std::string& name) const;

  /// true for every parameter matched by a pattern. A pattern matches a name
  /// exactly, or as a prefix when it ends in '*'. Unmatched patterns throw
  /// ConfigError.
  std::vector<bool> mask(std::span<const std::string> patterns) const;

 private:
  std::vector<ParameterInfo> info_;
  std::size_t kernel_count_ = 0;
};

}  // namespace stwarp
