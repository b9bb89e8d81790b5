#include "stwarp/config.hpp"
#include "stwarp/errors.hpp"
#include "stwarp/fit.hpp"
#include "stwarp/metrics.hpp"
#include "stwarp/prediction.hpp"
#include "stwarp/simulation.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace stwarp;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kNotConverged = 3, kNumerical = 4 };

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::optional<std::size_t> m;
  std::optional<double> time_scale;
  std::optional<std::string> neighbor_domain;
  std::optional<std::string> order;
  bool predict_noisy = false;
  bool quiet = false;
};

struct SchemaFlags {
  std::string s1 = "s1", s2 = "s2", t = "t", z = "z";
  std::vector<std::string> covariates;
  char delimiter = ',';

  CsvSchema schema(bool require_response) const {
    CsvSchema s;
    s.s1 = s1;
    s.s2 = s2;
    s.t = t;
    s.z = z;
    s.covariates = covariates;
    s.delimiter = delimiter;
    s.require_response = require_response;
    return s;
  }
};

void add_schema_flags(CLI::App* cmd, SchemaFlags& f) {
  cmd->add_option("--s1-col", f.s1, "Column holding the first spatial coordinate");
  cmd->add_option("--s2-col", f.s2, "Column holding the second spatial coordinate");
  cmd->add_option("--t-col", f.t, "Column holding time");
  cmd->add_option("--z-col", f.z, "Column holding the response");
  cmd->add_option("--covariates", f.covariates, "Covariate columns (default: x1, x2, ...)")->delimiter(',');
  cmd->add_option("--delimiter", f.delimiter, "Field delimiter");
}

void apply_plan_flags(const Globals& g, PlanOptions& p) {
  if (g.m) p.m = *g.m;
  if (g.time_scale) p.time_scale = *g.time_scale;
  if (g.neighbor_domain) p.domain = parse_neighbor_domain(*g.neighbor_domain);
  if (g.order) p.ordering = parse_ordering(*g.order);
  if (g.seed) p.seed = *g.seed;
}

void log(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << "\n";
}

std::string csv_line(std::initializer_list<std::string> cells) {
  std::string out;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out += ',';
    out += c;
    first = false;
  }
  return out + "\n";
}

std::string fmt(double v) { return format_double(v); }

std::string predictions_csv(const std::vector<Prediction>& preds, const Eigen::VectorXd* truth) {
  std::ostringstream os;
  os << (truth ? "s1,s2,t,z,mean,sd,neighbors\n" : "s1,s2,t,mean,sd,neighbors\n");
  for (std::size_t j = 0; j < preds.size(); ++j) {
    const auto& p = preds[j];
    os << fmt(p.point.s1) << ',' << fmt(p.point.s2) << ',' << fmt(p.point.t) << ',';
    if (truth) os << fmt((*truth)[static_cast<Eigen::Index>(j)]) << ',';
    os << fmt(p.mean) << ',' << fmt(std::sqrt(p.variance)) << ',' << p.neighbors.size() << '\n';
  }
  return os.str();
}

int run_simulate(const Globals& g, const std::string& config, const std::string& output) {
  StudyConfig cfg = load_study_config(config);
  const std::uint64_t seed = g.seed.value_or(derive_seed(cfg.seed, 0, 0));
  const auto pts = make_grid(cfg.grid);
  log(g, "simulating " + std::to_string(pts.size()) + " points");
  const Eigen::VectorXd z = simulate_gp(cfg.truth, pts, seed);
  save_dataset(output, make_dataset(pts, z));
  std::ostringstream snap;
  snap << "{\n\"seed\": " << seed << ",\n\"config\": " << serialize_study_config(cfg) << "}\n";
  write_text(output + ".truth.json", snap.str());
  return kOk;
}

int run_split(const Globals& g, const SchemaFlags& sf, const std::string& data, double fraction,
              const std::string& train, const std::string& valid) {
  const Dataset d = load_dataset(data, sf.schema(true));
  const auto [a, b] = split_train_validation(d, fraction, g.seed.value_or(0));
  save_dataset(train, a, sf.delimiter);
  save_dataset(valid, b, sf.delimiter);
  return kOk;
}

int run_fit(const Globals& g, const SchemaFlags& sf, const std::string& data, const std::string& config,
            const std::string& output) {
  RunConfig rc = load_run_config(config);
  apply_plan_flags(g, rc.fit.plan);
  const Dataset d = load_dataset(data, sf.schema(true));
  log(g, "fitting " + std::to_string(d.size()) + " observations");
  FitResult r = fit(d, rc.spec, rc.fit);
  r.config_snapshot = serialize_run_config(rc);
  write_text(output, serialize_fit_result(r));
  log(g, std::string(r.converged ? "converged" : "did not converge") + " after " + std::to_string(r.iterations) +
             " iterations: " + r.termination);
  return r.converged ? kOk : kNotConverged;
}

struct PredictSetup {
  FitResult fit;
  Dataset data;
  std::size_t m;
  NeighborDomain domain;
};

PredictSetup load_predict_setup(const Globals& g, const SchemaFlags& sf, const std::string& fit_path,
                                const std::string& data) {
  PredictSetup s{load_fit_result(fit_path), load_dataset(data, sf.schema(true)), 0, NeighborDomain::Original};
  if (s.data.covariate_count() != s.fit.covariate_names.size())
    throw DataError("data have " + std::to_string(s.data.covariate_count()) + " covariates but the fit used " +
                    std::to_string(s.fit.covariate_names.size()));
  s.m = g.m.value_or(s.fit.plan.m);
  s.domain = g.neighbor_domain ? parse_neighbor_domain(*g.neighbor_domain) : NeighborDomain::Original;
  if (g.time_scale) s.fit.plan.time_scale = *g.time_scale;
  return s;
}

int run_predict(const Globals& g, const SchemaFlags& sf, const std::string& fit_path, const std::string& data,
                const std::string& targets, const std::string& output) {
  auto s = load_predict_setup(g, sf, fit_path, data);
  const Dataset t = load_dataset(targets, sf.schema(false));
  const auto preds = predict(s.fit, s.data, t, s.m, s.domain, g.predict_noisy);
  write_text(output, predictions_csv(preds, nullptr));
  return kOk;
}

std::string warped_grid_csv(const FitResult& f, const Dataset& d) {
  double lo1 = d.points[0].s1, hi1 = lo1, lo2 = d.points[0].s2, hi2 = lo2;
  for (const auto& p : d.points) {
    lo1 = std::min(lo1, p.s1), hi1 = std::max(hi1, p.s1);
    lo2 = std::min(lo2, p.s2), hi2 = std::max(hi2, p.s2);
  }
  const int n = 51;
  std::ostringstream os;
  os << "i,j,s1,s2,f1,f2\n";
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double s1 = lo1 + (hi1 - lo1) * i / (n - 1), s2 = lo2 + (hi2 - lo2) * j / (n - 1);
      const Vec2 w = warp_space(f.model.warp, Vec2(f.scaler.forward_s1(s1), f.scaler.forward_s2(s2)));
      os << i << ',' << j << ',' << fmt(s1) << ',' << fmt(s2) << ',' << fmt(w.x()) << ',' << fmt(w.y()) << '\n';
    }
  return os.str();
}

std::string temporal_warp_csv(const FitResult& f, const Dataset& d) {
  double lo = d.points[0].t, hi = lo;
  for (const auto& p : d.points) lo = std::min(lo, p.t), hi = std::max(hi, p.t);
  const int n = 101;
  std::ostringstream os;
  os << "t,ft\n";
  for (int k = 0; k < n; ++k) {
    const double t = lo + (hi - lo) * k / (n - 1);
    os << fmt(t) << ',' << fmt(warp_time(f.model.warp, f.scaler.forward_t(t))) << '\n';
  }
  return os.str();
}

int run_validate(const Globals& g, const SchemaFlags& sf, const std::string& fit_path, const std::string& data,
                 const std::string& validation, const std::string& report_dir) {
  auto s = load_predict_setup(g, sf, fit_path, data);
  const Dataset v = load_dataset(validation, sf.schema(true));
  const auto preds = predict(s.fit, s.data, v, s.m, s.domain, g.predict_noisy);
  std::vector<double> mu, sd;
  for (const auto& p : preds) {
    mu.push_back(p.mean);
    sd.push_back(std::sqrt(p.variance));
  }
  const auto sc = score_predictions(mu, sd, std::span<const double>(v.z.data(), v.size()));
  const fs::path dir(report_dir);
  fs::create_directories(dir);
  write_text(dir / "predictions.csv", predictions_csv(preds, &v.z));
  std::ostringstream json;
  json << "{\n  \"rmspe\": " << fmt(sc.rmspe) << ",\n  \"crps\": " << fmt(sc.crps)
       << ",\n  \"interval_score_95\": " << fmt(sc.interval_score) << ",\n  \"count\": " << sc.count
       << ",\n  \"m\": " << s.m << ",\n  \"neighbor_domain\": \"" << to_string(s.domain)
       << "\",\n  \"predict_noisy\": " << (g.predict_noisy ? "true" : "false") << "\n}\n";
  write_text(dir / "scores.json", json.str());
  write_text(dir / "scores.csv", "rmspe,crps,interval_score_95,count\n" + fmt(sc.rmspe) + "," + fmt(sc.crps) + "," +
                                     fmt(sc.interval_score) + "," + std::to_string(sc.count) + "\n");
  write_text(dir / "warped_grid.csv", warped_grid_csv(s.fit, s.data));
  write_text(dir / "temporal_warp.csv", temporal_warp_csv(s.fit, s.data));
  write_text(dir / "fit.json", serialize_fit_result(s.fit));
  std::cout << "RMSPE " << fmt(sc.rmspe) << "  CRPS " << fmt(sc.crps) << "  IS95 " << fmt(sc.interval_score) << "\n";
  return kOk;
}

int run_study_cmd(const Globals& g, const std::string& config, const std::string& out_dir,
                  std::optional<std::size_t> repetitions) {
  StudyConfig cfg = load_study_config(config);
  if (g.seed) cfg.seed = *g.seed;
  if (repetitions) cfg.repetitions = *repetitions;
  apply_plan_flags(g, cfg.fit.plan);
  if (g.m) cfg.predict_m = *g.m;
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  write_text(dir / "config.json", serialize_study_config(cfg));
  StudyOptions opt;
  opt.checkpoint_dir = dir;
  opt.progress = [&](const std::string& s) { log(g, s); };
  const auto res = run_study(cfg, opt);

  std::ostringstream csv, md;
  csv << "model,rmspe,rmspe_se,crps,crps_se,interval_score,interval_score_se,nonconverged,repetitions\n";
  md << "| Model | RMSPE | CRPS |\n|---|---|---|\n";
  for (const auto& r : res.rows) {
    csv << '"' << r.label << "\"," << fmt(r.rmspe_mean) << ',' << fmt(r.rmspe_se) << ',' << fmt(r.crps_mean) << ','
        << fmt(r.crps_se) << ',' << fmt(r.interval_mean) << ',' << fmt(r.interval_se) << ',' << r.nonconverged << ','
        << res.repetitions.size() << '\n';
    char buf[256];
    std::snprintf(buf, sizeof buf, "| %s | %.3f | %.3f |\n", r.label.c_str(), r.rmspe_mean, r.crps_mean);
    md << buf;
  }
  write_text(dir / "table.csv", csv.str());
  write_text(dir / "table.md", md.str());
  std::cout << md.str();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonstationary spatio-temporal Gaussian processes with warpings and Vecchia likelihoods"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads (1 gives bit-reproducible output)");
  app.add_option("--m", g.m, "Neighbor count for fitting and prediction");
  app.add_option("--time-scale", g.time_scale, "Multiplier on time in the neighbor metric");
  app.add_option("--neighbor-domain", g.neighbor_domain, "Neighbor search domain: G or D");
  app.add_option("--order", g.order, "Ordering: maxmin, random or input");
  app.add_flag("--predict-noisy", g.predict_noisy, "Add the nugget to predictive variances");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");

  SchemaFlags sf;
  std::string config, output, data, targets, fit_path, validation, report_dir, train_out, valid_out;
  double fraction = 0.8;
  std::optional<std::size_t> repetitions;

  auto* sim = app.add_subcommand("simulate", "Simulate a grid dataset from a study config's true model");
  sim->add_option("-c,--config", config, "Study config")->required();
  sim->add_option("-o,--output", output, "Output CSV")->required();

  auto* split = app.add_subcommand("split", "Random training/validation split");
  split->add_option("-d,--data", data, "Input CSV")->required();
  split->add_option("--fraction", fraction, "Training fraction");
  split->add_option("--train", train_out, "Training CSV")->required();
  split->add_option("--validation", valid_out, "Validation CSV")->required();
  add_schema_flags(split, sf);

  auto* fitc = app.add_subcommand("fit", "Fit a model by maximizing the Vecchia REML");
  fitc->add_option("-d,--data", data, "Training CSV")->required();
  fitc->add_option("-c,--config", config, "Model and fit config")->required();
  fitc->add_option("-o,--output", output, "FitResult file")->required();
  add_schema_flags(fitc, sf);

  auto* pred = app.add_subcommand("predict", "Krige at target points");
  pred->add_option("-f,--fit", fit_path, "FitResult file")->required();
  pred->add_option("-d,--data", data, "Conditioning data CSV")->required();
  pred->add_option("-t,--targets", targets, "Targets CSV (s1, s2, t[, covariates])")->required();
  pred->add_option("-o,--output", output, "Predictions CSV")->required();
  add_schema_flags(pred, sf);

  auto* val = app.add_subcommand("validate", "Predict held-out data and score the predictions");
  val->add_option("-f,--fit", fit_path, "FitResult file")->required();
  val->add_option("-d,--data", data, "Conditioning data CSV")->required();
  val->add_option("-v,--validation", validation, "Held-out CSV")->required();
  val->add_option("-r,--report-dir", report_dir, "Report directory")->required();
  add_schema_flags(val, sf);

  auto* study = app.add_subcommand("study", "Run a simulation study");
  study->add_option("-c,--config", config, "Study config")->required();
  study->add_option("-o,--output-dir", output, "Output directory (checkpoints and tables)")->required();
  study->add_option("--repetitions", repetitions, "Override the repetition count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (g.threads > 0) omp_set_num_threads(g.threads);

  try {
    if (*sim) return run_simulate(g, config, output);
    if (*split) return run_split(g, sf, data, fraction, train_out, valid_out);
    if (*fitc) return run_fit(g, sf, data, config, output);
    if (*pred) return run_predict(g, sf, fit_path, data, targets, output);
    if (*val) return run_validate(g, sf, fit_path, data, validation, report_dir);
    if (*study) return run_study_cmd(g, config, output, repetitions);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const RankDeficiencyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
