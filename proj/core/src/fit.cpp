#include "stwarp/fit.hpp"

#include "stwarp/errors.hpp"
#include "stwarp/parameters.hpp"
#include "stwarp/reml.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stwarp {
namespace {

struct ActiveMap {
  std::vector<std::size_t> index;  // active position -> layout position

  explicit ActiveMap(const std::vector<bool>& frozen) {
    for (std::size_t i = 0; i < frozen.size(); ++i)
      if (!frozen[i]) index.push_back(i);
  }
  Eigen::VectorXd gather(const Eigen::VectorXd& full) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(index.size()));
    for (std::size_t k = 0; k < index.size(); ++k) out[static_cast<Eigen::Index>(k)] = full[static_cast<Eigen::Index>(index[k])];
    return out;
  }
  void scatter(const Eigen::VectorXd& active, Eigen::VectorXd& full) const {
    for (std::size_t k = 0; k < index.size(); ++k) full[static_cast<Eigen::Index>(index[k])] = active[static_cast<Eigen::Index>(k)];
  }
};

double sample_variance(const Dataset& d) {
  Eigen::VectorXd r = d.z;
  if (d.x.cols() > 0) {
    const Eigen::VectorXd b = d.x.colPivHouseholderQr().solve(d.z);
    r = d.z - d.x * b;
  } else {
    r.array() -= r.mean();
  }
  const double n = static_cast<double>(std::max<Eigen::Index>(r.size() - 1, 1));
  const double v = r.squaredNorm() / n;
  return v > 0.0 ? v : 1.0;
}

std::string describe_parameters(const ParameterLayout& layout, const Eigen::VectorXd& natural) {
  std::ostringstream os;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (i) os << ", ";
    os << layout.info()[i].name << "=" << natural[static_cast<Eigen::Index>(i)];
  }
  return os.str();
}

}  // namespace

CoordinateScaler make_scaler(const Dataset& data, const std::optional<DomainBounds>& domain) {
  if (domain)
    return CoordinateScaler::from_bounds(domain->s1_lo, domain->s1_hi, domain->s2_lo, domain->s2_hi,
                                         domain->t_lo, domain->t_hi);
  if (data.points.empty()) return {};
  DomainBounds b{data.points[0].s1, data.points[0].s1, data.points[0].s2,
                 data.points[0].s2, data.points[0].t,  data.points[0].t};
  for (const auto& p : data.points) {
    b.s1_lo = std::min(b.s1_lo, p.s1);
    b.s1_hi = std::max(b.s1_hi, p.s1);
    b.s2_lo = std::min(b.s2_lo, p.s2);
    b.s2_hi = std::max(b.s2_hi, p.s2);
    b.t_lo = std::min(b.t_lo, p.t);
    b.t_hi = std::max(b.t_hi, p.t);
  }
  return CoordinateScaler::from_bounds(b.s1_lo, b.s1_hi, b.s2_lo, b.s2_hi, b.t_lo, b.t_hi);
}

SpaceTimePoint to_working(const CoordinateScaler& s, const SpaceTimePoint& p) {
  return {s.forward_s1(p.s1), s.forward_s2(p.s2), s.forward_t(p.t)};
}

SpaceTimePoint from_working(const CoordinateScaler& s, const SpaceTimePoint& p) {
  return {s.inverse_s1(p.s1), s.inverse_s2(p.s2), s.inverse_t(p.t)};
}

Dataset to_working(const CoordinateScaler& s, const Dataset& data) {
  Dataset out = data;
  for (auto& p : out.points) p = to_working(s, p);
  return out;
}

NonstationaryCovariance initial_model(const ModelSpec& spec, const Dataset& working) {
  NonstationaryCovariance c = spec.model;
  if (spec.init_from_data && working.z.size() > 0) {
    const double v = sample_variance(working);
    double smin[2] = {0, 0}, smax[2] = {0, 0}, tmin = 0, tmax = 0;
    if (!working.points.empty()) {
      const auto& p0 = working.points[0];
      smin[0] = smax[0] = p0.s1;
      smin[1] = smax[1] = p0.s2;
      tmin = tmax = p0.t;
      for (const auto& p : working.points) {
        smin[0] = std::min(smin[0], p.s1);
        smax[0] = std::max(smax[0], p.s1);
        smin[1] = std::min(smin[1], p.s2);
        smax[1] = std::max(smax[1], p.s2);
        tmin = std::min(tmin, p.t);
        tmax = std::max(tmax, p.t);
      }
    }
    double sdiam = std::hypot(smax[0] - smin[0], smax[1] - smin[1]);
    double tdiam = tmax - tmin;
    if (!(sdiam > 0.0)) sdiam = 1.0;
    if (!(tdiam > 0.0)) tdiam = 1.0;
    // exp(-3) ~ 0.05 correlation at half the diameter
    if (auto* s = std::get_if<SeparableExpKernel>(&c.kernel)) {
      *s = {0.5 * v, 3.0 / (0.5 * sdiam), 3.0 / (0.5 * tdiam)};
    } else {
      auto& a = std::get<AsymmetricExpKernel>(c.kernel);
      a.sigma2 = 0.5 * v;
      a.a = 3.0 / (0.5 * sdiam);
      a.velocity = Vec2::Zero();
    }
    c.tau2 = 0.5 * v;
  }
  if (spec.warp_init != WarpInit::AsGiven) {
    const double w = spec.warp_init == WarpInit::Ramp ? std::log(2.0) : spec.identity_eps;
    auto reset_axial = [&](AxialWarpUnit& u) {
      for (std::size_t j = 0; j < u.weights.size(); ++j)
        u.weights[j] = (j == 0 && spec.warp_init == WarpInit::Identity) ? 1.0 : w;
    };
    for (auto& unit : c.warp.spatial_units) {
      if (auto* ax = std::get_if<AxialWarpUnit>(&unit))
        reset_axial(*ax);
      else
        std::fill(std::get<RbfWarpUnit>(unit).weights.begin(), std::get<RbfWarpUnit>(unit).weights.end(), 0.0);
    }
    if (c.warp.temporal_unit) reset_axial(*c.warp.temporal_unit);
  }
  c.validate();
  return c;
}

ObjectiveFn reml_objective(const RemlObjective& reml, const NonstationaryCovariance& base,
                           const std::vector<bool>& frozen) {
  const ParameterLayout layout(base);
  const ActiveMap active(frozen);
  const Eigen::VectorXd base_free = layout.to_free(layout.natural(base));
  return [&reml, base, layout, active, base_free](const Eigen::VectorXd& x, double& value,
                                                  Eigen::VectorXd* grad) {
    Eigen::VectorXd free = base_free;
    active.scatter(x, free);
    const Eigen::VectorXd natural = layout.to_natural(free);
    if (!natural.allFinite()) return false;
    NonstationaryCovariance c = base;
    layout.apply(c, natural);
    if (grad == nullptr) {
      value = -reml.loglik(c);
      return std::isfinite(value);
    }
    Eigen::VectorXd g;
    value = -reml.loglik_and_gradient(c, g);
    const Eigen::VectorXd gfree = -(g.array() * layout.jacobian(free).array()).matrix();
    *grad = active.gather(gfree);
    return std::isfinite(value) && grad->allFinite();
  };
}

double gradient_check(const NonstationaryCovariance& c, const Dataset& data, const VecchiaPlan& plan,
                      double h) {
  const RemlObjective reml(data, plan);
  const ParameterLayout layout(c);
  const std::vector<bool> none(layout.size(), false);
  const auto f = reml_objective(reml, c, none);
  return gradient_discrepancy(f, layout.to_free(layout.natural(c)), h);
}

namespace {

struct Stage {
  NonstationaryCovariance model;
  OptimizerResult opt;
};

Stage run_stage(const Dataset& working, const VecchiaPlan& plan, const NonstationaryCovariance& start,
                const std::vector<bool>& frozen, const OptimizerOptions& options) {
  const RemlObjective reml(working, plan);
  const ParameterLayout layout(start);
  const ActiveMap active(frozen);
  const auto f = reml_objective(reml, start, frozen);
  const Eigen::VectorXd free0 = layout.to_free(layout.natural(start));
  const Eigen::VectorXd x0 = active.gather(free0);

  double v0 = 0.0;
  bool ok = false;
  std::string why;
  try {
    ok = f(x0, v0, nullptr) && std::isfinite(v0);
  } catch (const NumericalError& e) {
    why = std::string(": ") + e.what();
  }
  if (!ok)
    throw NumericalError("log restricted likelihood is not finite at the starting parameters (" +
                         describe_parameters(layout, layout.natural(start)) + ")" + why);

  Stage s;
  s.opt = minimize(f, x0, options);
  Eigen::VectorXd free = free0;
  active.scatter(s.opt.x, free);
  s.model = start;
  layout.apply(s.model, layout.to_natural(free));
  return s;
}

}  // namespace

FitResult fit(const Dataset& data, const ModelSpec& spec, const FitConfig& config) {
  data.validate();
  if (data.size() < 2) throw DataError("fitting needs at least two observations");
  if (data.z.size() != static_cast<Eigen::Index>(data.size())) throw DataError("fitting needs a response column");
  require_full_rank(data.x);

  FitResult r;
  r.scaler = make_scaler(data, config.domain);
  const Dataset working = to_working(r.scaler, data);
  const NonstationaryCovariance start = initial_model(spec, working);
  const ParameterLayout layout(start);
  r.frozen = layout.mask(spec.frozen);
  r.parameter_names = layout.names();

  PlanOptions po = config.plan;
  auto plan = make_plan(working.points, po, start.warp);
  po.time_scale = plan.time_scale;

  NonstationaryCovariance from = start;
  std::size_t warm_iterations = 0;
  if (spec.warm_start) {
    // Saturated RBF weights have vanishing gradients; moving the warp before
    // the kernel settles can strand them there.
    std::vector<bool> warm = r.frozen;
    bool free_warp = false;
    for (std::size_t i = layout.warp_offset(); i < warm.size(); ++i) {
      free_warp = free_warp || !warm[i];
      warm[i] = true;
    }
    if (free_warp) {
      const Stage s0 = run_stage(working, plan, start, warm, config.optimizer);
      from = s0.model;
      warm_iterations = s0.opt.iterations;
    }
  }
  Stage stage = run_stage(working, plan, from, r.frozen, config.optimizer);
  r.objective_trace = stage.opt.trace;
  r.iterations = warm_iterations + stage.opt.iterations;
  if (config.refit_on_warped) {
    po.domain = NeighborDomain::Warped;
    plan = make_plan(working.points, po, stage.model.warp);
    stage = run_stage(working, plan, stage.model, r.frozen, config.optimizer);
    r.objective_trace = stage.opt.trace;
    r.iterations += stage.opt.iterations;
  }
  r.model = stage.model;
  r.theta = layout.natural(r.model);
  r.converged = stage.opt.converged;
  r.termination = stage.opt.termination;
  r.reml_loglik = -stage.opt.value;
  r.plan = po;
  r.covariate_names = data.covariate_names;
  if (data.x.cols() > 0) r.beta = RemlObjective(working, plan).gls_beta(r.model);
  return r;
}

}  // namespace stwarp
