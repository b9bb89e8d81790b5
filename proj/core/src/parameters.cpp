#include "stwarp/parameters.hpp"

#include "stwarp/errors.hpp"

#include <cmath>

namespace stwarp {

double to_natural(Transform tr, double bound, double x) {
  switch (tr) {
    case Transform::Identity: return x;
    case Transform::Log: return std::exp(x);
    case Transform::Softplus: return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    case Transform::ScaledTanh: return bound * std::tanh(x);
  }
  return x;
}

double to_free(Transform tr, double bound, double v) {
  switch (tr) {
    case Transform::Identity: return v;
    case Transform::Log:
      if (!(v > 0.0)) throw ConfigError("log-transformed parameter must be positive");
      return std::log(v);
    case Transform::Softplus:
      if (!(v > 0.0)) throw ConfigError("axial weights must be positive");
      // log(exp(v) - 1) without overflow or cancellation
      return v > 30.0 ? v + std::log1p(-std::exp(-v)) : std::log(std::expm1(v));
    case Transform::ScaledTanh:
      if (!(std::abs(v) < bound))
        throw ConfigError("RBF weight " + std::to_string(v) + " is outside the safe interval (-" +
                          std::to_string(bound) + ", " + std::to_string(bound) + ")");
      return std::atanh(v / bound);
  }
  return v;
}

double natural_derivative(Transform tr, double bound, double x) {
  switch (tr) {
    case Transform::Identity: return 1.0;
    case Transform::Log: return std::exp(x);
    case Transform::Softplus: return 1.0 / (1.0 + std::exp(-x));
    case Transform::ScaledTanh: {
      const double t = std::tanh(x);
      return bound * (1.0 - t * t);
    }
  }
  return 1.0;
}

ParameterLayout::ParameterLayout(const NonstationaryCovariance& model) {
  const auto knames = kernel_parameter_names(model.kernel);
  kernel_count_ = knames.size();
  for (const auto& n : knames) {
    const bool velocity = n == "v1" || n == "v2";
    info_.push_back({n, velocity ? Transform::Identity : Transform::Log, 0.0});
  }
  info_.push_back({"tau2", Transform::Log, 0.0});
  for (std::size_t u = 0; u < model.warp.spatial_units.size(); ++u) {
    const std::string prefix = "spatial[" + std::to_string(u) + "].w[";
    if (const auto* ax = std::get_if<AxialWarpUnit>(&model.warp.spatial_units[u])) {
      for (std::size_t j = 0; j < ax->weights.size(); ++j)
        info_.push_back({prefix + std::to_string(j) + "]", Transform::Softplus, 0.0});
    } else {
      const auto& rbf = std::get<RbfWarpUnit>(model.warp.spatial_units[u]);
      for (std::size_t j = 0; j < rbf.weights.size(); ++j)
        info_.push_back({prefix + std::to_string(j) + "]", Transform::ScaledTanh, rbf.weight_bound});
    }
  }
  if (model.warp.temporal_unit)
    for (std::size_t j = 0; j < model.warp.temporal_unit->weights.size(); ++j)
      info_.push_back({"temporal.w[" + std::to_string(j) + "]", Transform::Softplus, 0.0});
}

std::vector<std::string> ParameterLayout::names() const {
  std::vector<std::string> out;
  out.reserve(info_.size());
  for (const auto& i : info_) out.push_back(i.name);
  return out;
}

Eigen::VectorXd ParameterLayout::natural(const NonstationaryCovariance& model) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
  const auto k = kernel_parameters(model.kernel);
  const auto w = model.warp.parameters();
  if (k.size() != kernel_count_ || k.size() + 1 + w.size() != size())
    throw Error("model does not match the parameter layout");
  Eigen::Index i = 0;
  for (double x : k) v[i++] = x;
  v[i++] = model.tau2;
  for (double x : w) v[i++] = x;
  return v;
}

void ParameterLayout::apply(NonstationaryCovariance& model, const Eigen::VectorXd& v) const {
  if (static_cast<std::size_t>(v.size()) != size()) throw Error("parameter vector has wrong length");
  set_kernel_parameters(model.kernel, std::span<const double>(v.data(), kernel_count_));
  model.tau2 = v[static_cast<Eigen::Index>(kernel_count_)];
  model.warp.set_parameters(std::span<const double>(v.data() + warp_offset(), size() - warp_offset()));
}

Eigen::VectorXd ParameterLayout::to_free(const Eigen::VectorXd& natural) const {
  Eigen::VectorXd out(natural.size());
  for (Eigen::Index i = 0; i < natural.size(); ++i) {
    const auto& p = info_[static_cast<std::size_t>(i)];
    try {
      out[i] = stwarp::to_free(p.transform, p.bound, natural[i]);
    } catch (const ConfigError& e) {
      throw ConfigError(p.name + ": " + e.what(), p.name);
    }
  }
  return out;
}

Eigen::VectorXd ParameterLayout::to_natural(const Eigen::VectorXd& free) const {
  Eigen::VectorXd out(free.size());
  for (Eigen::Index i = 0; i < free.size(); ++i) {
    const auto& p = info_[static_cast<std::size_t>(i)];
    out[i] = stwarp::to_natural(p.transform, p.bound, free[i]);
  }
  return out;
}

Eigen::VectorXd ParameterLayout::jacobian(const Eigen::VectorXd& free) const {
  Eigen::VectorXd out(free.size());
  for (Eigen::Index i = 0; i < free.size(); ++i) {
    const auto& p = info_[static_cast<std::size_t>(i)];
    out[i] = natural_derivative(p.transform, p.bound, free[i]);
  }
  return out;
}

std::optional<std::size_t> ParameterLayout::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < info_.size(); ++i)
    if (info_[i].name == name) return i;
  return std::nullopt;
}

std::vector<bool> ParameterLayout::mask(std::span<const std::string> patterns) const {
  std::vector<bool> out(size(), false);
  for (const auto& pat : patterns) {
    const bool prefix = !pat.empty() && pat.back() == '*';
    const std::string stem = prefix ? pat.substr(0, pat.size() - 1) : pat;
    bool hit = false;
    for (std::size_t i = 0; i < info_.size(); ++i) {
      const auto& n = info_[i].name;
      if (prefix ? n.compare(0, stem.size(), stem) == 0 : n == stem) {
        out[i] = true;
        hit = true;
      }
    }
    if (!hit) throw ConfigError("frozen pattern '" + pat + "' matches no parameter", "frozen");
  }
  return out;
}

}  // namespace stwarp
