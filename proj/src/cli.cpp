#include "mfg/cli.hpp"

#include "mfg/hamiltonian.hpp"
#include "mfg/lq_oracle.hpp"
#include "mfg/monotonicity.hpp"

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace mfg::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) config_error("'" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!ok.count(key)) config_error("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
}

double num(const json& j, const std::string& key) {
  if (!j.is_number()) config_error("'" + key + "' must be a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& key) {
  if (!j.is_number_integer()) config_error("'" + key + "' must be an integer");
  return j.get<int>();
}

std::string str(const json& j, const std::string& key) {
  if (!j.is_string()) config_error("'" + key + "' must be a string");
  return j.get<std::string>();
}

std::vector<double> num_list(const json& j, const std::string& key) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array() || j.empty()) config_error("'" + key + "' must be a number or a non-empty array");
  std::vector<double> out;
  for (const auto& e : j) out.push_back(num(e, key));
  return out;
}

Vec broadcast(const std::vector<double>& v, int n, const std::string& key) {
  if (v.size() == 1) return Vec::Constant(n, v[0]);
  if (static_cast<int>(v.size()) != n) config_error("'" + key + "' has the wrong length for the model dimension");
  Vec out(n);
  for (int i = 0; i < n; ++i) out(i) = v[i];
  return out;
}

void print_error(const std::string& code, const std::string& message, json extra = json::object()) {
  extra["error"] = code;
  extra["message"] = message;
  std::cerr << extra.dump() << '\n';
}

fs::path prepare_output(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) config_error("cannot create output directory '" + cfg.output_dir + "': " + ec.message());
  return dir;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream os(p);
  if (!os) throw Error(ErrorCode::ConfigError, "cannot write " + p.string());
  os << j.dump(2) << '\n';
}

PathBundle make_bundle(const ExperimentConfig& cfg, const ModelSpec& spec) {
  const Vec mean = broadcast(cfg.initial_mean, spec.n, "initial.mean");
  const Vec std_ = broadcast(cfg.initial_std, spec.n, "initial.std");
  const ParticleCloud init = gaussian_cloud(cfg.particles, mean, std_, cfg.seed);
  return make_path_bundle(init, cfg.grid, cfg.seed);
}

json stages_json(const std::vector<StageRecord>& stages) {
  json a = json::array();
  for (const auto& s : stages) a.push_back({{"gamma", s.gamma}, {"sweeps", s.sweeps}, {"final_change", s.final_change}});
  return a;
}

json report_json(const CheckReport& r, const std::string& name, const fs::path& dir) {
  json j;
  j["condition_name"] = r.condition_name;
  j["samples_used"] = r.samples_used;
  j["verdict"] = to_string(r.verdict);
  j["margins"] = r.margins;
  j["witnesses"] = json::array();
  for (std::size_t w = 0; w < r.witnesses.size(); ++w) {
    const Witness& wit = r.witnesses[w];
    json jw{{"description", wit.description}, {"values", wit.values}, {"cloud_files", json::array()}};
    for (std::size_t c = 0; c < wit.clouds.size(); ++c) {
      const std::string file =
          "check_" + name + "_witness" + std::to_string(w) + "_cloud" + std::to_string(c) + ".csv";
      std::ofstream os(dir / file);
      write_cloud_csv(os, wit.clouds[c]);
      jw["cloud_files"].push_back(file);
    }
    j["witnesses"].push_back(jw);
  }
  return j;
}

enum class SolveKind { Mfg, Mftc, MfgGeneric, MftcGeneric };

const char* kind_name(SolveKind k) {
  switch (k) {
    case SolveKind::Mfg: return "mfg";
    case SolveKind::Mftc: return "mftc";
    case SolveKind::MfgGeneric: return "mfg_generic";
    case SolveKind::MftcGeneric: return "mftc_generic";
  }
  return "unknown";
}

EquilibriumSolution dispatch(SolveKind kind, const ModelSpec& spec, const ExperimentConfig& cfg,
                             const PathBundle& bundle) {
  switch (kind) {
    case SolveKind::Mfg: return solve_mfg(spec, cfg.grid, bundle, cfg.solver);
    case SolveKind::Mftc: return solve_mftc(spec, cfg.grid, bundle, cfg.solver);
    case SolveKind::MfgGeneric: return solve_mfg_generic_drift(spec, cfg.grid, bundle, cfg.solver);
    case SolveKind::MftcGeneric: return solve_mftc_generic_drift(spec, cfg.grid, bundle, cfg.solver);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown solve kind");
}

json summary_json(const ExperimentConfig& cfg, SolveKind kind, const EquilibriumSolution& sol) {
  return {{"model", cfg.model},
          {"mode", kind_name(kind)},
          {"particles", cfg.particles},
          {"steps", cfg.grid.steps},
          {"seed", cfg.seed},
          {"cost", sol.cost},
          {"stderr", sol.cost_stderr},
          {"sweeps", sol.diagnostics.sweeps},
          {"residuals", sol.diagnostics.residuals},
          {"stages", stages_json(sol.diagnostics.stages)},
          {"stationarity_max", sol.diagnostics.stationarity_max},
          {"converged", sol.paths.converged}};
}

int cmd_solve(const ExperimentConfig& cfg, SolveKind kind) {
  const ModelSpec spec = make_model(cfg.model, cfg.params);
  const fs::path dir = prepare_output(cfg);
  const PathBundle bundle = make_bundle(cfg, spec);
  try {
    const EquilibriumSolution sol = dispatch(kind, spec, cfg, bundle);
    {
      std::ofstream os(dir / "paths.csv");
      write_paths_csv(os, sol.paths, cfg.grid);
    }
    write_json(dir / "summary.json", summary_json(cfg, kind, sol));
    return kExitOk;
  } catch (const StageFailureError& e) {
    const json info{{"gamma_star", e.gamma_star()}, {"gamma_failed", e.gamma_failed()}, {"stages", stages_json(e.stages())}};
    json summary = info;
    summary["model"] = cfg.model;
    summary["mode"] = kind_name(kind);
    summary["converged"] = false;
    summary["residuals"] = e.residuals();
    write_json(dir / "summary.json", summary);
    print_error(to_string(e.code()), e.what(), info);
    return kExitNoConvergence;
  } catch (const FbsdeNoConvergence& e) {
    {
      std::ofstream os(dir / "paths.csv");
      write_paths_csv(os, e.best(), cfg.grid);
    }
    write_json(dir / "summary.json", {{"model", cfg.model},
                                      {"mode", kind_name(kind)},
                                      {"converged", false},
                                      {"sweeps", e.best().sweeps},
                                      {"residuals", e.best().residuals}});
    print_error(to_string(e.code()), e.what());
    return kExitNoConvergence;
  }
}

CheckReport run_check(const std::string& name, const ModelSpec& spec, const ExperimentConfig& cfg) {
  CouplingSampler sampler;
  sampler.seed = cfg.seed;
  sampler.scheme = pair_scheme_from_string(cfg.check.scheme);
  sampler.cloud_size = cfg.check.cloud_size;
  const int samples = cfg.check.samples;

  if (name == "displacement_quasi") {
    if (!spec.Dx_g) throw Error(ErrorCode::MissingDerivative, "model has no Dx_g");
    const TerminalGradFn g = spec.Dx_g;
    return check_displacement_quasi([g](const Vec& x, const ParticleCloud& m) { return g(x, m); }, spec.n,
                                    cfg.check.lambda_m, sampler, samples);
  }
  if (name == "separable") return check_condition_separable(spec, sampler, samples);
  if (name == "small_mean_field_effect") return check_small_mean_field_effect(spec, sampler, samples);
  if (name == "split") return check_condition_split(spec, sampler, samples);
  if (name == "beta_monotonicity") {
    BetaCheckOptions opts;
    opts.t0 = cfg.grid.t0;
    opts.T = cfg.grid.T;
    return check_beta_monotonicity(assemble_mfg(spec, cfg.solver.assembly), sampler, samples, opts);
  }
  if (name == "mftc_convexity") return check_mftc_convexity(spec, sampler, samples);
  if (name == "generic_drift") {
    GenericDriftOptions opts;
    opts.state_scale = cfg.check.state_scale;
    return check_generic_drift(spec, sampler, samples, opts);
  }
  if (name == "cone_bound") return cone_bound_check(spec, sample_points(spec, samples, cfg.seed));
  if (name == "p_concavity") return p_concavity_check_1d(spec, sample_points(spec, samples, cfg.seed));
  if (name == "audit") {
    const AuditReport a = finite_difference_audit(spec, samples, cfg.seed, AuditMode::MFG);
    CheckReport r;
    r.condition_name = "audit";
    r.samples_used = a.samples;
    r.verdict = a.passed() ? Verdict::Pass : Verdict::Fail;
    for (const auto& e : a.entries) {
      r.margins[e.name] = e.max_rel_error;
      if (e.flagged) r.witnesses.push_back({"derivative mismatch: " + e.name, {{"max_rel_error", e.max_rel_error}}, {}});
    }
    return r;
  }
  config_error("unknown check '" + name + "'");
}

int cmd_check(const ExperimentConfig& cfg, const std::string& name) {
  const ModelSpec spec = make_model(cfg.model, cfg.params);
  const fs::path dir = prepare_output(cfg);
  const CheckReport r = run_check(name, spec, cfg);
  write_json(dir / ("check_" + name + ".json"), report_json(r, name, dir));
  return r.verdict == Verdict::Fail ? kExitCheckFailed : kExitOk;
}

int cmd_thresholds(const ExperimentConfig& cfg) {
  const json& t = cfg.thresholds;
  check_keys(t, "thresholds", {"T", "K_beta", "Gamma_beta", "L", "budget"});
  std::optional<ConstantsLedger> declared;
  if (!cfg.model.empty()) declared = make_model(cfg.model, cfg.params).constants;
  const double T = t.contains("T") ? num(t["T"], "thresholds.T") : cfg.grid.T - cfg.grid.t0;

  json out;
  if (t.contains("K_beta") && t.contains("Gamma_beta")) {
    const double K = num(t["K_beta"], "thresholds.K_beta"), G = num(t["Gamma_beta"], "thresholds.Gamma_beta");
    out["big_lambda"] = {{"T", T},
                         {"K_beta", K},
                         {"Gamma_beta", G},
                         {"full", threshold_big_lambda(T, K, G)},
                         {"reduced", threshold_big_lambda_reduced(T, K, G)}};
  }
  std::optional<double> L;
  if (t.contains("L")) L = num(t["L"], "thresholds.L");
  else if (declared && declared->L) L = declared->L;
  if (L) {
    json c{{"L", *L}, {"T", T}};
    for (auto v : {CLTVariant::MpFull, CLTVariant::MpReduced, CLTVariant::FbsdeLocal, CLTVariant::FbsdeLocalReduced})
      c[to_string(v)] = threshold_c_LT(*L, T, v);
    out["c_LT"] = c;
  }

  json b = t.value("budget", json::object());
  check_keys(b, "thresholds.budget", {"lambda_v", "lambda_x", "lambda_m", "L_x", "L_v", "l_x", "L", "l_g"});
  auto pick = [&](const char* key, const std::optional<double>& fallback, double dflt) -> std::optional<double> {
    if (b.contains(key)) return num(b[key], std::string("thresholds.budget.") + key);
    if (fallback) return fallback;
    return declared ? std::optional<double>(dflt) : std::nullopt;
  };
  const ConstantsLedger c = declared.value_or(ConstantsLedger{});
  const auto lv = pick("lambda_v", c.lambda_v, 0.0), lx = pick("lambda_x", c.lambda_x, 0.0),
             lm = pick("lambda_m", c.lambda_m, 0.0), Lx = pick("L_x", c.L_x, 0.0), Lv = pick("L_v", c.L_v, 0.0),
             lxs = pick("l_x", c.l_x, 0.0), LL = pick("L", L ? L : c.L, 0.0), lg = pick("l_g", c.l_g, 0.0);
  if (lv && lx && lm && Lx && Lv && lxs && LL && lg) {
    json jb{{"lambda_v", *lv}, {"lambda_x", *lx}, {"lambda_m", *lm}, {"L_x", *Lx},
            {"L_v", *Lv},       {"l_x", *lxs},     {"L", *LL},          {"l_g", *lg}};
    try {
      const BudgetResult r = anti_monotonicity_budget(*lv, *lx, *lm, *Lx, *Lv, *lxs, *LL, *lg);
      jb["A"] = r.A;
      jb["D"] = r.D;
      jb["budget_ok"] = r.budget_ok;
      jb["l_g_limit"] = 1.0 / r.A;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonPositiveDenominator) throw;
      jb["error"] = to_string(e.code());
    }
    out["anti_monotonicity_budget"] = jb;
  }
  if (out.is_null()) config_error("thresholds: nothing to compute; give K_beta and Gamma_beta, L, or a model");
  const fs::path dir = prepare_output(cfg);
  write_json(dir / "thresholds.json", out);
  return kExitOk;
}

lq::LQModel lq_model_of(const ExperimentConfig& cfg) {
  if (cfg.model.rfind("lq_", 0) != 0) config_error("lq-compare needs an lq_* catalog model");
  ParamMap p = catalog_defaults(cfg.model);
  for (const auto& [k, v] : cfg.params) p[k] = v;
  const int dim = static_cast<int>(p.at("dim"));
  lq::LQModel m = lq::LQModel::scalar(p.at("A"), p.at("B"), p.at("sigma"), p.at("Q"), p.at("R"), p.at("kappa"),
                                      p.at("QT"), p.at("kappaT"), cfg.grid.T, 0.0, 0.0, p.at("S"), p.at("ST"), dim);
  m.t0 = cfg.grid.t0;
  const Vec mean = broadcast(cfg.initial_mean, dim, "initial.mean");
  const Vec sd = broadcast(cfg.initial_std, dim, "initial.std");
  m.mean0 = mean;
  m.var0 = sd.array().square().matrix();
  return m;
}

int cmd_lq_compare(const ExperimentConfig& cfg, const std::string& mode) {
  const lq::LQModel lm = lq_model_of(cfg);
  const bool mftc = mode == "mftc";
  if (!mftc && mode != "mfg") config_error("lq-compare mode must be 'mfg' or 'mftc'");
  const lq::LQSolution oracle = mftc ? lq::solve_lq_mftc(lm) : lq::solve_lq_mfg(lm);
  const SolveKind kind = mftc ? SolveKind::Mftc : SolveKind::Mfg;
  const ModelSpec spec = make_model(cfg.model, cfg.params);
  const fs::path dir = prepare_output(cfg);
  const PathBundle bundle = make_bundle(cfg, spec);
  EquilibriumSolution sol;
  try {
    sol = dispatch(kind, spec, cfg, bundle);
  } catch (const FbsdeNoConvergence& e) {
    print_error(to_string(e.code()), e.what());
    return kExitNoConvergence;
  }

  double err2 = 0.0, ref2 = 0.0, mean_err = 0.0, mean_z = 0.0;
  const int N = sol.paths.particles();
  for (int i = 0; i < cfg.grid.nodes(); ++i) {
    const double t = cfg.grid.node(i);
    const Eigen::MatrixXd& X = sol.paths.X[i];
    for (int p = 0; p < N; ++p) {
      const Eigen::VectorXd ref = oracle.feedback(t, X.row(p).transpose());
      err2 += (sol.paths.v[i].row(p).transpose() - ref).squaredNorm();
      ref2 += ref.squaredNorm();
    }
    const Eigen::VectorXd mean = X.colwise().mean().transpose();
    const Eigen::VectorXd sd = ((X.rowwise() - mean.transpose()).array().square().colwise().sum() / (N - 1)).sqrt();
    const Eigen::VectorXd dev = (mean - oracle.mean_at(t)).cwiseAbs();
    mean_err = std::max(mean_err, dev.maxCoeff());
    for (int k = 0; k < dev.size(); ++k)
      if (sd(k) > 0.0) mean_z = std::max(mean_z, dev(k) / (sd(k) / std::sqrt(static_cast<double>(N))));
  }
  {
    std::ofstream os(dir / "paths.csv");
    write_paths_csv(os, sol.paths, cfg.grid);
  }
  {
    std::ofstream os(dir / "lq_oracle.csv");
    lq::write_lq_csv(os, oracle);
  }
  json out = summary_json(cfg, kind, sol);
  out["oracle_cost"] = oracle.cost;
  out["cost_error_in_stderr"] = sol.cost_stderr > 0.0 ? std::abs(sol.cost - oracle.cost) / sol.cost_stderr : 0.0;
  out["control_rel_l2_error"] = ref2 > 0.0 ? std::sqrt(err2 / ref2) : std::sqrt(err2);
  out["mean_max_abs_error"] = mean_err;
  out["mean_max_error_in_stderr"] = mean_z;
  write_json(dir / "lq_compare.json", out);
  return kExitOk;
}

}  // namespace

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) config_error("--set expects KEY=VALUE, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &config;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) config_error("empty component in key '" + key + "'");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) config_error("'" + key + "' descends into a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) config_error("'" + key + "' descends into a non-object");
  (*node)[parts.back()] = value;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) config_error("config must be a JSON object");
  check_keys(j, "", {"model", "params", "grid", "particles", "seed", "initial", "solver", "check", "thresholds",
                     "output_dir", "lq"});
  ExperimentConfig c;
  if (j.contains("model")) {
    c.model = str(j["model"], "model");
    const auto names = catalog_names();
    if (std::find(names.begin(), names.end(), c.model) == names.end()) config_error("unknown model '" + c.model + "'");
  }
  if (j.contains("params")) {
    if (!j["params"].is_object()) config_error("'params' must be an object");
    for (const auto& [k, v] : j["params"].items()) c.params[k] = num(v, "params." + k);
    if (!c.model.empty()) make_model(c.model, c.params);  // rejects unknown parameter names early
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, "grid", {"t0", "T", "steps"});
    if (g.contains("t0")) c.grid.t0 = num(g["t0"], "grid.t0");
    if (g.contains("T")) c.grid.T = num(g["T"], "grid.T");
    if (g.contains("steps")) c.grid.steps = integer(g["steps"], "grid.steps");
  }
  if (c.grid.steps < 2) config_error("grid.steps must be >= 2");
  if (!(c.grid.T > c.grid.t0)) config_error("grid needs t0 < T");
  if (j.contains("particles")) c.particles = integer(j["particles"], "particles");
  if (c.particles < 16) config_error("particles must be >= 16");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
      config_error("'seed' must be a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("initial")) {
    const json& in = j["initial"];
    check_keys(in, "initial", {"mean", "std"});
    if (in.contains("mean")) c.initial_mean = num_list(in["mean"], "initial.mean");
    if (in.contains("std")) c.initial_std = num_list(in["std"], "initial.std");
    for (double s : c.initial_std)
      if (s < 0.0) config_error("initial.std must be nonnegative");
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, "solver", {"method", "damping", "tol", "max_sweeps", "gamma_schedule", "basis_degree",
                             "include_drift_measure_term"});
    if (s.contains("method")) {
      const std::string m = str(s["method"], "solver.method");
      if (m == "picard") c.solver.method = SolverMethod::Picard;
      else if (m == "continuation") c.solver.method = SolverMethod::Continuation;
      else config_error("solver.method must be 'picard' or 'continuation'");
    }
    if (s.contains("damping")) c.solver.picard.damping = num(s["damping"], "solver.damping");
    if (s.contains("tol")) c.solver.picard.tol = num(s["tol"], "solver.tol");
    if (s.contains("max_sweeps")) c.solver.picard.max_sweeps = integer(s["max_sweeps"], "solver.max_sweeps");
    if (s.contains("basis_degree")) c.solver.picard.basis_degree = integer(s["basis_degree"], "solver.basis_degree");
    if (s.contains("gamma_schedule")) c.solver.gamma_schedule = num_list(s["gamma_schedule"], "solver.gamma_schedule");
    if (s.contains("include_drift_measure_term")) {
      if (!s["include_drift_measure_term"].is_boolean()) config_error("'solver.include_drift_measure_term' must be a boolean");
      c.solver.assembly.include_drift_measure_term = s["include_drift_measure_term"].get<bool>();
    }
    if (!(c.solver.picard.damping > 0.0 && c.solver.picard.damping <= 1.0)) config_error("solver.damping must be in (0, 1]");
    if (!(c.solver.picard.tol > 0.0)) config_error("solver.tol must be positive");
    if (c.solver.picard.max_sweeps < 1) config_error("solver.max_sweeps must be >= 1");
    if (c.solver.picard.basis_degree < 1 || c.solver.picard.basis_degree > 3)
      config_error("solver.basis_degree must be 1, 2 or 3");
    try {
      validate_gamma_schedule(c.solver.gamma_schedule);
    } catch (const Error& e) {
      config_error(std::string("solver.gamma_schedule: ") + e.what());
    }
  }
  if (j.contains("check")) {
    const json& k = j["check"];
    check_keys(k, "check", {"samples", "cloud_size", "lambda_m", "scheme", "state_scale"});
    if (k.contains("samples")) c.check.samples = integer(k["samples"], "check.samples");
    if (k.contains("cloud_size")) c.check.cloud_size = integer(k["cloud_size"], "check.cloud_size");
    if (k.contains("lambda_m")) c.check.lambda_m = num(k["lambda_m"], "check.lambda_m");
    if (k.contains("scheme")) c.check.scheme = str(k["scheme"], "check.scheme");
    if (k.contains("state_scale")) c.check.state_scale = num(k["state_scale"], "check.state_scale");
    if (c.check.samples < 1 || c.check.cloud_size < 1) config_error("check.samples and check.cloud_size must be >= 1");
    pair_scheme_from_string(c.check.scheme);
  }
  if (j.contains("thresholds")) c.thresholds = j["thresholds"];
  if (j.contains("output_dir")) c.output_dir = str(j["output_dir"], "output_dir");
  if (j.contains("lq")) {
    check_keys(j["lq"], "lq", {"mode"});
  }
  return c;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}

int run(const std::vector<std::string>& args_in) {
  CLI::App app{"Particle solvers and monotonicity checks for mean field games and mean field type control"};
  app.require_subcommand(1);
  std::string config_path, out_dir, condition;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string lq_mode;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--set", sets, "override a config key, KEY=VALUE (dotted keys)")->take_all();
    sub->add_option("--seed", seed, "experiment seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "OpenMP thread count");
  };
  CLI::App* s_mfg = app.add_subcommand("solve-mfg", "solve a mean field game equilibrium");
  CLI::App* s_mftc = app.add_subcommand("solve-mftc", "solve a mean field type control problem");
  CLI::App* s_mfg_g = app.add_subcommand("solve-mfg-generic", "mean field game with a generic drift");
  CLI::App* s_mftc_g = app.add_subcommand("solve-mftc-generic", "mean field type control with a generic drift");
  CLI::App* s_check = app.add_subcommand("check", "run a sampled condition check");
  CLI::App* s_thr = app.add_subcommand("thresholds", "evaluate closed-form thresholds");
  CLI::App* s_lq = app.add_subcommand("lq-compare", "compare the particle solver with the LQ oracle");
  for (CLI::App* sub : {s_mfg, s_mftc, s_mfg_g, s_mftc_g, s_check, s_thr, s_lq}) add_common(sub);
  s_check->add_option("condition", condition,
                      "displacement_quasi | separable | small_mean_field_effect | split | beta_monotonicity | "
                      "mftc_convexity | generic_drift | cone_bound | p_concavity | audit")
      ->required();
  s_lq->add_option("--mode", lq_mode, "mfg or mftc");

  std::vector<std::string> rev(args_in.rbegin(), args_in.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("ConfigError", e.what());
    return kExitConfig;
  }

  try {
    json config = json::object();
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) config_error("cannot read config '" + config_path + "'");
      config = json::parse(is, nullptr, false);
      if (config.is_discarded()) config_error("config '" + config_path + "' is not valid JSON");
    }
    for (const auto& s : sets) apply_override(config, s);
    if (seed) config["seed"] = *seed;
    if (!out_dir.empty()) config["output_dir"] = out_dir;
    if (!lq_mode.empty()) config["lq"]["mode"] = lq_mode;
    const ExperimentConfig cfg = parse_config(config);
    if (threads < 0) config_error("--threads must be >= 0");
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif
    const bool needs_model = !s_thr->parsed();
    if (needs_model && cfg.model.empty()) config_error("no model given; set 'model' in the config or via --set");

    if (s_mfg->parsed()) return cmd_solve(cfg, SolveKind::Mfg);
    if (s_mftc->parsed()) return cmd_solve(cfg, SolveKind::Mftc);
    if (s_mfg_g->parsed()) return cmd_solve(cfg, SolveKind::MfgGeneric);
    if (s_mftc_g->parsed()) return cmd_solve(cfg, SolveKind::MftcGeneric);
    if (s_check->parsed()) return cmd_check(cfg, condition);
    if (s_thr->parsed()) return cmd_thresholds(cfg);
    if (s_lq->parsed()) {
      const std::string mode = config.contains("lq") ? config["lq"].value("mode", "mfg") : "mfg";
      return cmd_lq_compare(cfg, mode);
    }
    return kExitInternal;
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what());
    switch (e.code()) {
      case ErrorCode::NoConvergence:
      case ErrorCode::StageFailure:
        return kExitNoConvergence;
      case ErrorCode::ConfigError:
      case ErrorCode::InvalidArgument:
      case ErrorCode::MissingDerivative:
      case ErrorCode::DimensionUnsupported:
      case ErrorCode::DimensionMismatch:
        return kExitConfig;
      default:
        return kExitInternal;
    }
  } catch (const json::exception& e) {
    print_error("ConfigError", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return kExitInternal;
  }
}

}  // namespace mfg::cli
