#include "stwarp/config.hpp"

#include "stwarp/errors.hpp"
#include "stwarp/parameters.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <set>
#include <sstream>

namespace stwarp {

using nlohmann::json;

namespace {

// Key path of the object being read, for error messages.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object", path_);
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items())
      if (!ok.count(k)) throw ConfigError("unknown key '" + key(k) + "'", key(k));
  }

  bool has(const char* k) const { return j_.contains(k) && !j_.at(k).is_null(); }
  const json& raw(const char* k) const {
    if (!has(k)) throw ConfigError("missing key '" + key(k) + "'", key(k));
    return j_.at(k);
  }
  Reader child(const char* k) const { return Reader(raw(k), key(k)); }
  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  template <typename T>
  T get(const char* k) const {
    try {
      return raw(k).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("key '" + key(k) + "' has the wrong type", key(k));
    }
  }
  template <typename T>
  T get(const char* k, T fallback) const {
    return has(k) ? get<T>(k) : fallback;
  }

 private:
  std::string where() const { return path_.empty() ? "document" : "'" + path_ + "'"; }
  const json& j_;
  std::string path_;
};

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    std::string msg = e.what();
    const auto pos = msg.find("parse error");
    if (pos != std::string::npos) msg = msg.substr(pos);
    throw ConfigError(source + ":" + std::to_string(line) + ": " + msg);
  }
}

std::string axis_name(Axis a) {
  switch (a) {
    case Axis::S1: return "s1";
    case Axis::S2: return "s2";
    case Axis::T: return "t";
  }
  return "t";
}

Axis parse_axis(const std::string& s, const std::string& key) {
  if (s == "s1") return Axis::S1;
  if (s == "s2") return Axis::S2;
  if (s == "t") return Axis::T;
  throw ConfigError("unknown axis '" + s + "' at '" + key + "'", key);
}

// ---- model ---------------------------------------------------------------

AxialWarpUnit read_axial(const Reader& r, Axis axis) {
  r.allow({"type", "axis", "r", "eps", "weights", "slopes", "centers"});
  const auto rcount = r.get<std::size_t>("r", r.has("weights") ? r.raw("weights").size() : 10);
  AxialWarpUnit u = AxialWarpUnit::with_default_basis(axis, rcount, r.get<double>("eps", 1e-6));
  if (r.has("weights")) u.weights = r.get<std::vector<double>>("weights");
  if (r.has("slopes")) u.slopes = r.get<std::vector<double>>("slopes");
  if (r.has("centers")) u.centers = r.get<std::vector<double>>("centers");
  try {
    u.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + " (at '" + r.key("weights") + "')", r.key("weights"));
  }
  return u;
}

json write_axial(const AxialWarpUnit& u) {
  return {{"type", "axial"}, {"axis", axis_name(u.axis)}, {"weights", u.weights},
          {"slopes", u.slopes}, {"centers", u.centers}};
}

RbfWarpUnit read_rbf(const Reader& r) {
  r.allow({"type", "per_side", "radius_factor", "radius", "centers", "weights", "relative_weights", "weight_bound"});
  RbfWarpUnit u;
  if (r.has("centers")) {
    for (const auto& c : r.get<std::vector<std::array<double, 2>>>("centers")) u.centers.emplace_back(c[0], c[1]);
    u.radius = r.get<double>("radius");
    u.weights.assign(u.centers.size(), 0.0);
    u.weight_bound = RbfWarpUnit::safe_weight_bound(u.centers, u.radius);
  } else {
    u = RbfWarpUnit::regular_grid(r.get<std::size_t>("per_side", 4), r.get<double>("radius_factor", 1.5));
    if (r.has("radius")) {
      u.radius = r.get<double>("radius");
      u.weight_bound = RbfWarpUnit::safe_weight_bound(u.centers, u.radius);
    }
  }
  if (r.has("weight_bound")) u.weight_bound = r.get<double>("weight_bound");
  if (r.has("weights")) {
    u.weights = r.get<std::vector<double>>("weights");
    if (u.weights.size() != u.centers.size())
      throw ConfigError("'" + r.key("weights") + "' needs one weight per center", r.key("weights"));
  }
  if (r.has("relative_weights")) {
    if (r.has("weights"))
      throw ConfigError("give either weights or relative_weights", r.key("relative_weights"));
    u.weights = r.get<std::vector<double>>("relative_weights");
    if (u.weights.size() != u.centers.size())
      throw ConfigError("'" + r.key("relative_weights") + "' needs one weight per center", r.key("relative_weights"));
    for (auto& w : u.weights) w *= u.weight_bound;
  }
  try {
    u.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + " (at '" + r.key("weights") + "')", r.key("weights"));
  }
  return u;
}

json write_rbf(const RbfWarpUnit& u) {
  json centers = json::array();
  for (const auto& c : u.centers) centers.push_back({c.x(), c.y()});
  return {{"type", "rbf"}, {"centers", centers}, {"radius", u.radius}, {"weights", u.weights},
          {"weight_bound", u.weight_bound}};
}

WarpingMap read_warp(const Reader& r) {
  r.allow({"normalize", "spatial", "temporal"});
  WarpingMap w;
  w.normalize = r.get<bool>("normalize", true);
  if (r.has("spatial")) {
    const auto& arr = r.raw("spatial");
    if (!arr.is_array()) throw ConfigError("'" + r.key("spatial") + "' must be a list", r.key("spatial"));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const Reader u(arr[i], r.key("spatial[" + std::to_string(i) + "]"));
      const auto type = u.get<std::string>("type");
      if (type == "axial") {
        const auto axis = parse_axis(u.get<std::string>("axis"), u.key("axis"));
        if (axis == Axis::T) throw ConfigError("spatial axial unit must act on s1 or s2", u.key("axis"));
        w.spatial_units.emplace_back(read_axial(u, axis));
      } else if (type == "rbf") {
        w.spatial_units.emplace_back(read_rbf(u));
      } else {
        throw ConfigError("unknown unit type '" + type + "'", u.key("type"));
      }
    }
  }
  if (r.has("temporal")) {
    const Reader t = r.child("temporal");
    if (t.has("axis") && t.get<std::string>("axis") != "t")
      throw ConfigError("temporal unit must act on t", t.key("axis"));
    w.temporal_unit = read_axial(t, Axis::T);
  }
  return w;
}

json write_warp(const WarpingMap& w) {
  json spatial = json::array();
  for (const auto& u : w.spatial_units) {
    if (const auto* a = std::get_if<AxialWarpUnit>(&u))
      spatial.push_back(write_axial(*a));
    else
      spatial.push_back(write_rbf(std::get<RbfWarpUnit>(u)));
  }
  json out = {{"normalize", w.normalize}, {"spatial", spatial}};
  out["temporal"] = w.temporal_unit ? write_axial(*w.temporal_unit) : json(nullptr);
  return out;
}

Kernel read_kernel(const Reader& r) {
  const auto type = r.get<std::string>("type");
  if (type == "separable") {
    r.allow({"type", "sigma2", "a_s", "a_t"});
    return SeparableExpKernel{r.get<double>("sigma2", 1.0), r.get<double>("a_s", 1.0), r.get<double>("a_t", 1.0)};
  }
  if (type == "asymmetric") {
    r.allow({"type", "sigma2", "a", "velocity"});
    AsymmetricExpKernel k;
    k.sigma2 = r.get<double>("sigma2", 1.0);
    k.a = r.get<double>("a", 1.0);
    const auto v = r.get<std::array<double, 2>>("velocity", {0.0, 0.0});
    k.velocity = Vec2(v[0], v[1]);
    return k;
  }
  throw ConfigError("unknown kernel type '" + type + "' (expected separable or asymmetric)", r.key("type"));
}

json write_kernel(const Kernel& k) {
  if (const auto* s = std::get_if<SeparableExpKernel>(&k))
    return {{"type", "separable"}, {"sigma2", s->sigma2}, {"a_s", s->a_s}, {"a_t", s->a_t}};
  const auto& a = std::get<AsymmetricExpKernel>(k);
  return {{"type", "asymmetric"}, {"sigma2", a.sigma2}, {"a", a.a}, {"velocity", {a.velocity.x(), a.velocity.y()}}};
}

NonstationaryCovariance read_model(const Reader& r) {
  r.allow({"kernel", "tau2", "warp"});
  NonstationaryCovariance c;
  c.kernel = read_kernel(r.child("kernel"));
  c.tau2 = r.get<double>("tau2", 0.0);
  if (r.has("warp")) c.warp = read_warp(r.child("warp"));
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + " (in '" + r.key("kernel") + "')", e.key().empty() ? r.key("kernel") : e.key());
  }
  return c;
}

json write_model(const NonstationaryCovariance& c) {
  return {{"kernel", write_kernel(c.kernel)}, {"tau2", c.tau2}, {"warp", write_warp(c.warp)}};
}

// ---- fit settings --------------------------------------------------------

WarpInit parse_warp_init(const std::string& s, const std::string& key) {
  if (s == "identity") return WarpInit::Identity;
  if (s == "ramp") return WarpInit::Ramp;
  if (s == "as_given") return WarpInit::AsGiven;
  throw ConfigError("unknown warp_init '" + s + "' (expected identity, ramp or as_given)", key);
}

std::string warp_init_name(WarpInit w) {
  switch (w) {
    case WarpInit::Identity: return "identity";
    case WarpInit::Ramp: return "ramp";
    case WarpInit::AsGiven: return "as_given";
  }
  return "identity";
}

ModelSpec read_spec(const Reader& r) {
  r.allow({"model", "init_from_data", "warp_init", "identity_eps", "warm_start", "frozen"});
  ModelSpec s;
  s.model = read_model(r.child("model"));
  s.init_from_data = r.get<bool>("init_from_data", true);
  if (r.has("warp_init")) s.warp_init = parse_warp_init(r.get<std::string>("warp_init"), r.key("warp_init"));
  s.identity_eps = r.get<double>("identity_eps", 1e-6);
  s.warm_start = r.get<bool>("warm_start", true);
  s.frozen = r.get<std::vector<std::string>>("frozen", {});
  return s;
}

json write_spec(const ModelSpec& s) {
  return {{"model", write_model(s.model)},
          {"init_from_data", s.init_from_data},
          {"warp_init", warp_init_name(s.warp_init)},
          {"identity_eps", s.identity_eps},
          {"warm_start", s.warm_start},
          {"frozen", s.frozen}};
}

OptimizerOptions read_optimizer(const Reader& r) {
  r.allow({"method", "max_iterations", "gradient_tolerance", "function_tolerance", "gradient", "fd_step",
           "lbfgs_rank"});
  OptimizerOptions o;
  o.method = r.get<std::string>("method", o.method);
  if (o.method != "lbfgs" && o.method != "bfgs")
    throw ConfigError("unknown optimizer '" + o.method + "' (expected lbfgs or bfgs)", r.key("method"));
  o.max_iterations = r.get<std::size_t>("max_iterations", o.max_iterations);
  o.gradient_tolerance = r.get<double>("gradient_tolerance", o.gradient_tolerance);
  o.function_tolerance = r.get<double>("function_tolerance", o.function_tolerance);
  const auto g = r.get<std::string>("gradient", "analytic");
  if (g == "analytic")
    o.gradient = GradientMode::Analytic;
  else if (g == "finite_difference")
    o.gradient = GradientMode::FiniteDifference;
  else
    throw ConfigError("unknown gradient mode '" + g + "'", r.key("gradient"));
  o.fd_step = r.get<double>("fd_step", o.fd_step);
  o.lbfgs_rank = r.get<int>("lbfgs_rank", o.lbfgs_rank);
  return o;
}

json write_optimizer(const OptimizerOptions& o) {
  return {{"method", o.method},
          {"max_iterations", o.max_iterations},
          {"gradient_tolerance", o.gradient_tolerance},
          {"function_tolerance", o.function_tolerance},
          {"gradient", o.gradient == GradientMode::Analytic ? "analytic" : "finite_difference"},
          {"fd_step", o.fd_step},
          {"lbfgs_rank", o.lbfgs_rank}};
}

PlanOptions read_plan(const Reader& r) {
  r.allow({"m", "time_scale", "neighbor_domain", "order", "seed"});
  PlanOptions p;
  p.m = r.get<std::size_t>("m", p.m);
  if (p.m == 0) throw ConfigError("'" + r.key("m") + "' must be at least 1", r.key("m"));
  p.time_scale = r.get<double>("time_scale", p.time_scale);
  if (r.has("neighbor_domain")) p.domain = parse_neighbor_domain(r.get<std::string>("neighbor_domain"));
  if (r.has("order")) p.ordering = parse_ordering(r.get<std::string>("order"));
  p.seed = r.get<std::uint64_t>("seed", p.seed);
  return p;
}

json write_plan(const PlanOptions& p) {
  return {{"m", p.m},
          {"time_scale", p.time_scale},
          {"neighbor_domain", to_string(p.domain)},
          {"order", to_string(p.ordering)},
          {"seed", p.seed}};
}

std::array<double, 2> read_range(const Reader& r, const char* k) {
  const auto v = r.get<std::array<double, 2>>(k);
  if (!(v[0] < v[1])) throw ConfigError("range '" + r.key(k) + "' must be increasing", r.key(k));
  return v;
}

FitConfig read_fit(const Reader& r) {
  r.allow({"optimizer", "plan", "domain", "refit_on_warped"});
  FitConfig f;
  if (r.has("optimizer")) f.optimizer = read_optimizer(r.child("optimizer"));
  if (r.has("plan")) f.plan = read_plan(r.child("plan"));
  if (r.has("domain")) {
    const Reader d = r.child("domain");
    d.allow({"s1", "s2", "t"});
    const auto s1 = read_range(d, "s1"), s2 = read_range(d, "s2"), t = read_range(d, "t");
    f.domain = DomainBounds{s1[0], s1[1], s2[0], s2[1], t[0], t[1]};
  }
  f.refit_on_warped = r.get<bool>("refit_on_warped", false);
  return f;
}

json write_fit(const FitConfig& f) {
  json out = {{"optimizer", write_optimizer(f.optimizer)}, {"plan", write_plan(f.plan)},
              {"refit_on_warped", f.refit_on_warped}};
  if (f.domain)
    out["domain"] = {{"s1", {f.domain->s1_lo, f.domain->s1_hi}},
                     {"s2", {f.domain->s2_lo, f.domain->s2_hi}},
                     {"t", {f.domain->t_lo, f.domain->t_hi}}};
  return out;
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("write to '" + path.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

NonstationaryCovariance parse_model(const std::string& text, const std::string& source) {
  return read_model(Reader(parse_json(text, source), ""));
}

std::string serialize_model(const NonstationaryCovariance& model) { return write_model(model).dump(2) + "\n"; }

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  const Reader r(j, "");
  r.allow({"spec", "fit"});
  RunConfig c;
  c.spec = read_spec(r.child("spec"));
  if (r.has("fit")) c.fit = read_fit(r.child("fit"));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_text(path), path.string()); }

std::string serialize_run_config(const RunConfig& c) {
  return json{{"spec", write_spec(c.spec)}, {"fit", write_fit(c.fit)}}.dump(2) + "\n";
}

void StudyConfig::validate() const {
  if (repetitions < 1) throw ConfigError("repetitions must be at least 1", "repetitions");
  if (grid.nx < 2 || grid.ny < 2 || grid.nt < 2) throw ConfigError("grid sizes must be at least 2", "grid");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0, 1)", "train_fraction");
  truth.validate();
  std::set<std::string> names;
  for (const auto& m : models)
    if (!names.insert(m.name).second) throw ConfigError("duplicate model name '" + m.name + "'", "models");
  for (const auto& r : rows)
    if (!names.count(r.model)) throw ConfigError("row '" + r.label + "' refers to unknown model '" + r.model + "'", "rows");
}

StudyConfig parse_study_config(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  const Reader r(j, "");
  r.allow({"name", "grid", "truth", "train_fraction", "repetitions", "seed", "fit", "predict", "models", "rows"});
  StudyConfig c;
  c.name = r.get<std::string>("name", c.name);
  {
    const Reader g = r.child("grid");
    g.allow({"nx", "ny", "nt", "s1", "s2", "t"});
    c.grid.nx = g.get<std::size_t>("nx");
    c.grid.ny = g.get<std::size_t>("ny");
    c.grid.nt = g.get<std::size_t>("nt");
    const auto s1 = g.get<std::array<double, 2>>("s1", {-0.5, 0.5});
    const auto s2 = g.get<std::array<double, 2>>("s2", {-0.5, 0.5});
    const auto t = g.get<std::array<double, 2>>("t", {-0.5, 0.5});
    c.grid.s1_lo = s1[0], c.grid.s1_hi = s1[1];
    c.grid.s2_lo = s2[0], c.grid.s2_hi = s2[1];
    c.grid.t_lo = t[0], c.grid.t_hi = t[1];
  }
  c.truth = read_model(r.child("truth"));
  c.train_fraction = r.get<double>("train_fraction", c.train_fraction);
  c.repetitions = r.get<std::size_t>("repetitions", c.repetitions);
  c.seed = r.get<std::uint64_t>("seed", c.seed);
  if (r.has("fit")) c.fit = read_fit(r.child("fit"));
  if (r.has("predict")) {
    const Reader p = r.child("predict");
    p.allow({"m", "noisy"});
    c.predict_m = p.get<std::size_t>("m", 0);
    c.predict_noisy = p.get<bool>("noisy", true);
  }
  if (r.has("models")) {
    const auto& arr = r.raw("models");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const Reader m(arr[i], "models[" + std::to_string(i) + "]");
      m.allow({"name", "spec"});
      c.models.push_back({m.get<std::string>("name"), read_spec(m.child("spec"))});
    }
  }
  if (r.has("rows")) {
    const auto& arr = r.raw("rows");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const Reader row(arr[i], "rows[" + std::to_string(i) + "]");
      row.allow({"label", "model", "neighbor_domain"});
      StudyRow sr{row.get<std::string>("label"), row.get<std::string>("model"), NeighborDomain::Original};
      if (row.has("neighbor_domain")) sr.domain = parse_neighbor_domain(row.get<std::string>("neighbor_domain"));
      c.rows.push_back(sr);
    }
  }
  c.validate();
  return c;
}

StudyConfig load_study_config(const std::filesystem::path& path) {
  return parse_study_config(read_text(path), path.string());
}

std::string serialize_study_config(const StudyConfig& c) {
  json models = json::array();
  for (const auto& m : c.models) models.push_back({{"name", m.name}, {"spec", write_spec(m.spec)}});
  json rows = json::array();
  for (const auto& r : c.rows)
    rows.push_back({{"label", r.label}, {"model", r.model}, {"neighbor_domain", to_string(r.domain)}});
  const json j = {{"name", c.name},
                  {"grid",
                   {{"nx", c.grid.nx},
                    {"ny", c.grid.ny},
                    {"nt", c.grid.nt},
                    {"s1", {c.grid.s1_lo, c.grid.s1_hi}},
                    {"s2", {c.grid.s2_lo, c.grid.s2_hi}},
                    {"t", {c.grid.t_lo, c.grid.t_hi}}}},
                  {"truth", write_model(c.truth)},
                  {"train_fraction", c.train_fraction},
                  {"repetitions", c.repetitions},
                  {"seed", c.seed},
                  {"fit", write_fit(c.fit)},
                  {"predict", {{"m", c.predict_m}, {"noisy", c.predict_noisy}}},
                  {"models", models},
                  {"rows", rows}};
  return j.dump(2) + "\n";
}

std::string serialize_fit_result(const FitResult& f) {
  json params = json::object();
  json frozen = json::array();
  for (std::size_t i = 0; i < f.parameter_names.size(); ++i) {
    params[f.parameter_names[i]] = f.theta[static_cast<Eigen::Index>(i)];
    if (i < f.frozen.size() && f.frozen[i]) frozen.push_back(f.parameter_names[i]);
  }
  json j = {{"model", write_model(f.model)},
            {"scaler",
             {{"s1_center", f.scaler.s1_center},
              {"s2_center", f.scaler.s2_center},
              {"s_scale", f.scaler.s_scale},
              {"t_center", f.scaler.t_center},
              {"t_scale", f.scaler.t_scale}}},
            {"parameter_names", f.parameter_names},
            {"parameters", params},
            {"frozen", frozen},
            {"beta", std::vector<double>(f.beta.data(), f.beta.data() + f.beta.size())},
            {"covariate_names", f.covariate_names},
            {"objective_trace", f.objective_trace},
            {"reml_loglik", f.reml_loglik},
            {"converged", f.converged},
            {"termination", f.termination},
            {"iterations", f.iterations},
            {"plan", write_plan(f.plan)}};
  j["config"] = f.config_snapshot.empty() ? json(nullptr) : parse_json(f.config_snapshot, "snapshot");
  return j.dump(2) + "\n";
}

FitResult parse_fit_result(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  const Reader r(j, "");
  r.allow({"model", "scaler", "parameter_names", "parameters", "frozen", "beta", "covariate_names",
           "objective_trace", "reml_loglik", "converged", "termination", "iterations", "plan", "config"});
  FitResult f;
  f.model = read_model(r.child("model"));
  {
    const Reader s = r.child("scaler");
    s.allow({"s1_center", "s2_center", "s_scale", "t_center", "t_scale"});
    f.scaler.s1_center = s.get<double>("s1_center");
    f.scaler.s2_center = s.get<double>("s2_center");
    f.scaler.s_scale = s.get<double>("s_scale");
    f.scaler.t_center = s.get<double>("t_center");
    f.scaler.t_scale = s.get<double>("t_scale");
  }
  const ParameterLayout layout(f.model);
  f.parameter_names = layout.names();
  f.theta = layout.natural(f.model);
  const auto frozen = r.get<std::vector<std::string>>("frozen", {});
  f.frozen.assign(layout.size(), false);
  for (const auto& n : frozen)
    if (auto i = layout.index_of(n)) f.frozen[*i] = true;
  const auto beta = r.get<std::vector<double>>("beta", {});
  f.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  f.covariate_names = r.get<std::vector<std::string>>("covariate_names", {});
  if (f.covariate_names.size() != beta.size())
    throw ConfigError("fit result has " + std::to_string(beta.size()) + " coefficients for " +
                          std::to_string(f.covariate_names.size()) + " covariates",
                      "beta");
  f.objective_trace = r.get<std::vector<double>>("objective_trace", {});
  f.reml_loglik = r.get<double>("reml_loglik", 0.0);
  f.converged = r.get<bool>("converged", false);
  f.termination = r.get<std::string>("termination", "");
  f.iterations = r.get<std::size_t>("iterations", 0);
  f.plan = read_plan(r.child("plan"));
  if (r.has("config")) f.config_snapshot = r.raw("config").dump(2) + "\n";
  return f;
}

FitResult load_fit_result(const std::filesystem::path& path) { return parse_fit_result(read_text(path), path.string()); }

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& j) {
  return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::string serialize_scores(const RepetitionScores& s, std::span<const StudyRow> rows) {
  json out = json::array();
  for (std::size_t k = 0; k < s.rmspe.size(); ++k)
    out.push_back({{"label", k < rows.size() ? rows[k].label : ""},
                   {"rmspe", finite_or_null(s.rmspe[k])},
                   {"crps", finite_or_null(s.crps[k])},
                   {"interval_score", finite_or_null(s.interval[k])},
                   {"converged", static_cast<bool>(s.converged[k])}});
  return json{{"repetition", s.repetition}, {"rows", out}}.dump(2) + "\n";
}

RepetitionScores parse_scores(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  const Reader r(j, "");
  r.allow({"repetition", "rows"});
  RepetitionScores s;
  s.repetition = r.get<std::size_t>("repetition");
  const auto& rows = r.raw("rows");
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Reader row(rows[k], "rows[" + std::to_string(k) + "]");
    row.allow({"label", "rmspe", "crps", "interval_score", "converged"});
    s.rmspe.push_back(number_or_nan(rows[k].value("rmspe", json(nullptr))));
    s.crps.push_back(number_or_nan(rows[k].value("crps", json(nullptr))));
    s.interval.push_back(number_or_nan(rows[k].value("interval_score", json(nullptr))));
    s.converged.push_back(row.get<bool>("converged"));
  }
  return s;
}

}  // namespace stwarp
