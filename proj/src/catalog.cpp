#include "mfg/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace mfg {

namespace {

struct Entry {
  ParamMap defaults;
  std::function<ModelSpec(const ParamMap&)> build;
};

int dim_param(const ParamMap& p) {
  const double d = p.at("dim");
  if (d < 1 || d > kMaxDim || d != std::floor(d))
    throw Error(ErrorCode::ConfigError, "dim must be an integer in [1, 8]");
  return static_cast<int>(d);
}

Vec zeros(int n) { return Vec::Zero(n); }
Mat zeros(int r, int c) { return Mat::Zero(r, c); }
Mat ident(int n, double s = 1.0) { return Mat::Identity(n, n) * s; }

// Fills in the measure-free pieces shared by most catalog entries:
// constant diffusion and vanishing linear functional derivatives.
void constant_sigma(ModelSpec& s, double sigma) {
  const int n = s.n;
  s.sigma = [n, sigma](double, const Vec&, const ParticleCloud&, const Vec&) { return ident(n, sigma); };
}

void measure_free_dnu(ModelSpec& s) {
  const int n = s.n;
  if (!s.Dy_dfdnu)
    s.Dy_dfdnu = [n](double, const Vec&, const ParticleCloud&, const Vec&, const Vec&) { return zeros(n); };
  if (!s.Dy_dgdnu)
    s.Dy_dgdnu = [n](const Vec&, const ParticleCloud&, const Vec&) { return zeros(n); };
  if (!s.Dy_dbdnu)
    s.Dy_dbdnu = [n](double, const Vec&, const ParticleCloud&, const Vec&, const Vec&) { return zeros(n, n); };
  s.mode_flags.dnu_affine_in_y = true;
}

void control_drift(ModelSpec& s) {
  const int n = s.n;
  s.b = [](double, const Vec&, const ParticleCloud&, const Vec& v) { return v; };
  s.Dx_b = [n](double, const Vec&, const ParticleCloud&, const Vec&) { return zeros(n, n); };
  s.Dv_b = [n](double, const Vec&, const ParticleCloud&, const Vec&) { return ident(n); };
  s.mode_flags.drift_linear = true;
}

// f = 1/2 |x|^2 + 1/2 |v|^2 and g = 1/2 |x|^2 scaled by the given weights.
void quadratic_costs(ModelSpec& s, double qx, double rv, double qt) {
  s.f = [qx, rv](double, const Vec& x, const ParticleCloud&, const Vec& v) {
    return 0.5 * qx * x.squaredNorm() + 0.5 * rv * v.squaredNorm();
  };
  s.Dx_f = [qx](double, const Vec& x, const ParticleCloud&, const Vec&) { return Vec(qx * x); };
  s.Dv_f = [rv](double, const Vec&, const ParticleCloud&, const Vec& v) { return Vec(rv * v); };
  s.g = [qt](const Vec& x, const ParticleCloud&) { return 0.5 * qt * x.squaredNorm(); };
  s.Dx_g = [qt](const Vec& x, const ParticleCloud&) { return Vec(qt * x); };
}

ModelSpec build_lq(const std::string& name, const ParamMap& p) {
  ModelSpec s;
  s.name = name;
  s.n = s.d = dim_param(p);
  const int n = s.n;
  const double A = p.at("A"), B = p.at("B"), sig = p.at("sigma");
  const double Q = p.at("Q"), R = p.at("R"), kap = p.at("kappa"), S = p.at("S");
  const double QT = p.at("QT"), kapT = p.at("kappaT"), ST = p.at("ST");
  if (R <= 0) throw Error(ErrorCode::ConfigError, "R must be positive");
  if (Q < 0 || QT < 0 || S < 0 || ST < 0)
    throw Error(ErrorCode::ConfigError, "Q, QT, S, ST must be nonnegative");

  s.b = [A, B](double, const Vec& x, const ParticleCloud&, const Vec& v) { return Vec(A * x + B * v); };
  s.Dx_b = [n, A](double, const Vec&, const ParticleCloud&, const Vec&) { return ident(n, A); };
  s.Dv_b = [n, B](double, const Vec&, const ParticleCloud&, const Vec&) { return ident(n, B); };
  constant_sigma(s, sig);

  s.f = [Q, R, kap, S](double, const Vec& x, const ParticleCloud& m, const Vec& v) {
    return 0.5 * Q * (x - kap * m.mean()).squaredNorm() + 0.5 * R * v.squaredNorm() +
           0.5 * S * m.mean().squaredNorm();
  };
  s.Dx_f = [Q, kap](double, const Vec& x, const ParticleCloud& m, const Vec&) {
    return Vec(Q * (x - kap * m.mean()));
  };
  s.Dv_f = [R](double, const Vec&, const ParticleCloud&, const Vec& v) { return Vec(R * v); };
  s.g = [QT, kapT, ST](const Vec& x, const ParticleCloud& m) {
    return 0.5 * QT * (x - kapT * m.mean()).squaredNorm() + 0.5 * ST * m.mean().squaredNorm();
  };
  s.Dx_g = [QT, kapT](const Vec& x, const ParticleCloud& m) { return Vec(QT * (x - kapT * m.mean())); };

  // f depends on m only through its mean, so df/dnu(y) = (df/dmean) . y.
  s.Dy_dfdnu = [Q, kap, S](double, const Vec& x, const ParticleCloud& m, const Vec&, const Vec&) {
    return Vec(-Q * kap * (x - kap * m.mean()) + S * m.mean());
  };
  s.Dy_dgdnu = [QT, kapT, ST](const Vec& x, const ParticleCloud& m, const Vec&) {
    return Vec(-QT * kapT * (x - kapT * m.mean()) + ST * m.mean());
  };
  measure_free_dnu(s);

  FSplit fs;
  fs.f1 = [Q, R](double, const Vec& x, const ParticleCloud&, const Vec& v) {
    return 0.5 * Q * x.squaredNorm() + 0.5 * R * v.squaredNorm();
  };
  fs.f0 = [Q, kap, S](double, const Vec& x, const ParticleCloud& m, const Vec&) {
    return -Q * kap * x.dot(m.mean()) + 0.5 * (Q * kap * kap + S) * m.mean().squaredNorm();
  };
  fs.Dx_f1 = [Q](double, const Vec& x, const ParticleCloud&, const Vec&) { return Vec(Q * x); };
  fs.Dv_f1 = [R](double, const Vec&, const ParticleCloud&, const Vec& v) { return Vec(R * v); };
  fs.Dx_f0 = [Q, kap](double, const Vec&, const ParticleCloud& m, const Vec&) { return Vec(-Q * kap * m.mean()); };
  fs.Dv_f0 = [n](double, const Vec&, const ParticleCloud&, const Vec&) { return zeros(n); };
  s.f_split = fs;

  auto& c = s.constants;
  c.lambda_x = 0.5 * Q;
  c.lambda_v = 0.5 * R;
  c.lambda = 0.5 * R;
  c.lambda_m = Q * std::abs(kap);
  c.L_x = 0.0;
  c.L_v = 0.0;
  c.l_x = 0.0;
  c.l_m = 0.0;
  c.l_g = 0.0;
  c.L = std::max({1.0, std::abs(A), std::abs(B), Q, R, QT, std::abs(sig)});
  c.lambda_b = B * B;
  c.L_b_x = c.L_b_v = c.L_b_m = 0.0;
  s.mode_flags.drift_linear = true;
  return s;
}

ModelSpec build_quadratic_control(const ParamMap& p) {
  ModelSpec s;
  s.name = "quadratic_control";
  s.n = s.d = dim_param(p);
  const int n = s.n;
  const double lam = p.at("lambda");
  if (lam <= 0) throw Error(ErrorCode::ConfigError, "lambda must be positive");
  control_drift(s);
  constant_sigma(s, p.at("sigma"));
  s.f = [lam](double, const Vec&, const ParticleCloud&, const Vec& v) { return lam * v.squaredNorm(); };
  s.Dx_f = [n](double, const Vec&, const ParticleCloud&, const Vec&) { return zeros(n); };
  s.Dv_f = [lam](double, const Vec&, const ParticleCloud&, const Vec& v) { return Vec(2.0 * lam * v); };
  s.g = [](const Vec&, const ParticleCloud&) { return 0.0; };
  s.Dx_g = [n](const Vec&, const ParticleCloud&) { return zeros(n); };
  measure_free_dnu(s);
  auto& c = s.constants;
  c.lambda = c.lambda_v = lam;
  c.lambda_x = 0.0;
  c.lambda_m = 0.0;
  c.L_x = c.L_v = c.l_x = c.l_m = c.l_g = 0.0;
  c.L = std::max(1.0, 2.0 * lam);
  c.lambda_b = 1.0;
  c.L_b_x = c.L_b_v = c.L_b_m = 0.0;
  return s;
}

ModelSpec build_split_quasi(const ParamMap& p) {
  ModelSpec s;
  s.name = "split_quasi";
  s.n = s.d = dim_param(p);
  const int n = s.n;
  const double a = p.at("a");
  control_drift(s);
  constant_sigma(s, p.at("sigma"));
  s.f = [a](double, const Vec& x, const ParticleCloud& m, const Vec& v) {
    return 0.5 * x.squaredNorm() + 0.5 * v.squaredNorm() - a * x.dot(m.mean());
  };
  s.Dx_f = [a](double, const Vec& x, const ParticleCloud& m, const Vec&) { return Vec(x - a * m.mean()); };
  s.Dv_f = [](double, const Vec&, const ParticleCloud&, const Vec& v) { return v; };
  s.g = [](const Vec& x, const ParticleCloud&) { return 0.5 * x.squaredNorm(); };
  s.Dx_g = [](const Vec& x, const ParticleCloud&) { return x; };
  s.Dy_dfdnu = [a](double, const Vec& x, const ParticleCloud&, const Vec&, const Vec&) { return Vec(-a * x); };
  measure_free_dnu(s);

  FSplit fs;
  fs.f1 = [](double, const Vec& x, const ParticleCloud&, const Vec& v) {
    return 0.5 * x.squaredNorm() + 0.5 * v.squaredNorm();
  };
  fs.f0 = [a](double, const Vec& x, const ParticleCloud& m, const Vec&) { return -a * x.dot(m.mean()); };
  fs.Dx_f1 = [](double, const Vec& x, const ParticleCloud&, const Vec&) { return x; };
  fs.Dv_f1 = [](double, const Vec&, const ParticleCloud&, const Vec& v) { return v; };
  fs.Dx_f0 = [a](double, const Vec&, const ParticleCloud& m, const Vec&) { return Vec(-a * m.mean()); };
  fs.Dv_f0 = [n](double, const Vec&, const ParticleCloud&, const Vec&) { return zeros(n); };
  s.f_split = fs;

  auto& c = s.constants;
  c.lambda_x = 0.5;
  c.lambda_v = c.lambda = 0.5;
  c.lambda_m = std::abs(a);
  c.L_x = c.L_v = c.l_x = c.l_m = c.l_g = 0.0;
  c.L = std::max(1.0, std::abs(a));
  c.lambda_b = 1.0;
  c.L_b_x = c.L_b_v = c.L_b_m = 0.0;
  return s;
}

// f = ax |x|^2 + av |v|^2 + c v . mean(m)
ModelSpec build_small_mf(const ParamMap& p) {
  ModelSpec s;
  s.name = "small_mf";
  s.n = s.d = dim_param(p);
  const double ax = p.at("ax"), av = p.at("av"), cm = p.at("c");
  control_drift(s);
  constant_sigma(s, p.at("sigma"));
  s.f = [ax, av, cm](double, const Vec& x, const ParticleCloud& m, const Vec& v) {
    return ax * x.squaredNorm() + av * v.squaredNorm() + cm * v.dot(m.mean());
  };
  s.Dx_f = [ax](double, const Vec& x, const ParticleCloud&, const Vec&) { return Vec(2.0 * ax * x); };
  s.Dv_f = [av, cm](double, const Vec&, const ParticleCloud& m, const Vec& v) {
    return Vec(2.0 * av * v + cm * m.mean());
  };
  s.g = [](const Vec& x, const ParticleCloud&) { return 0.5 * x.squaredNorm(); };
  s.Dx_g = [](const Vec& x, const ParticleCloud&) { return x; };
  s.Dy_dfdnu = [cm](double, const Vec&, const ParticleCloud&, const Vec& v, const Vec&) { return Vec(cm * v); };
  measure_free_dnu(s);
  auto& c = s.constants;
  c.lambda_x = ax;
  c.lambda_v = c.lambda = av;
  c.L_x = 0.0;
  c.L_v = std::abs(cm);
  c.l_x = c.l_m = c.l_g = 0.0;
  c.lambda_m = 0.0;
  c.L = std::max({2.0 * ax, 2.0 * av, std::abs(cm), 1.0});
  c.lambda_b = 1.0;
  c.L_b_x = c.L_b_v = c.L_b_m = 0.0;
  return s;
}

ModelSpec build_anti_g(const ParamMap& p) {
  ModelSpec s;
  s.name = "anti_g";
  s.n = s.d = dim_param(p);
  const double cg = p.at("c");
  control_drift(s);
  constant_sigma(s, p.at("sigma"));
  quadratic_costs(s, 1.0, 1.0, 0.0);
  s.g = [cg](const Vec& x, const ParticleCloud&) { return -cg * x.squaredNorm(); };
  s.Dx_g = [cg](const Vec& x, const ParticleCloud&) { return Vec(-2.0 * cg * x); };
  measure_free_dnu(s);
  auto& c = s.constants;
  c.lambda_x = 0.5;
  c.lambda_v = c.lambda = 0.5;
  c.lambda_m = 0.0;
  c.L_x = c.L_v = c.l_x = c.l_m = 0.0;
  c.l_g = 2.0 * std::abs(cg);
  c.L = std::max(1.0, 2.0 * std::abs(cg));
  c.lambda_b = 1.0;
  c.L_b_x = c.L_b_v = c.L_b_m = 0.0;
  return s;
}

// b = v + eps * tanh(v), componentwise.
ModelSpec build_generic_tanh(const ParamMap& p) {
  ModelSpec s;
  s.name = "generic_tanh";
  s.n = s.d = dim_param(p);
  const int n = s.n;
  const double eps = p.at("eps");
  s.b = [eps](double, const Vec&, const ParticleCloud&, const Vec& v) {
    return Vec(v + eps * v.array().tanh().matrix());
  };
  s.Dx_b = [n](double, const Vec&, const ParticleCloud&, const Vec&) { return zeros(n, n); };
  s.Dv_b = [eps](double, const Vec&, const ParticleCloud&, const Vec& v) {
    const Vec th = v.array().tanh().matrix();
    return Mat((1.0 + eps * (1.0 - th.array().square())).matrix().asDiagonal());
  };
  constant_sigma(s, p.at("sigma"));
  quadratic_costs(s, 1.0, 1.0, 1.0);
  measure_free_dnu(s);
  auto& c = s.constants;
  c.lambda_x = 0.5;
  c.lambda_v = c.lambda = 0.5;
  c.lambda_m = 0.0;
  c.L_x = c.L_v = c.l_x = c.l_m = c.l_g = 0.0;
  c.L = 1.0 + std::abs(eps);
  c.lambda_b = std::pow(std::min(1.0, 1.0 + eps), 2);
  c.L_b_x = 0.0;
  c.L_b_v = 2.0 * std::abs(eps);
  c.L_b_m = 0.0;
  return s;
}

// b = tanh(x) + v, componentwise.
ModelSpec build_generic_tanh_x(const ParamMap& p) {
  ModelSpec s;
  s.name = "generic_tanh_x";
  s.n = s.d = dim_param(p);
  const int n = s.n;
  s.b = [](double, const Vec& x, const ParticleCloud&, const Vec& v) { return Vec(x.array().tanh().matrix() + v); };
  s.Dx_b = [](double, const Vec& x, const ParticleCloud&, const Vec&) {
    return Mat((1.0 - x.array().tanh().square()).matrix().asDiagonal());
  };
  s.Dv_b = [n](double, const Vec&, const ParticleCloud&, const Vec&) { return ident(n); };
  constant_sigma(s, p.at("sigma"));
  quadratic_costs(s, 1.0, 1.0, 1.0);
  measure_free_dnu(s);
  auto& c = s.constants;
  c.lambda_x = 0.5;
  c.lambda_v = c.lambda = 0.5;
  c.lambda_m = 0.0;
  c.L_x = c.L_v = c.l_x = c.l_m = c.l_g = 0.0;
  c.L = 1.0;
  c.lambda_b = 1.0;
  c.L_b_x = 2.0;
  c.L_b_v = c.L_b_m = 0.0;
  return s;
}

// b = v + k * mean(m).
ModelSpec build_mean_drift(const ParamMap& p) {
  ModelSpec s;
  s.name = "mean_drift";
  s.n = s.d = dim_param(p);
  const int n = s.n;
  const double k = p.at("k");
  s.b = [k](double, const Vec&, const ParticleCloud& m, const Vec& v) { return Vec(v + k * m.mean()); };
  s.Dx_b = [n](double, const Vec&, const ParticleCloud&, const Vec&) { return zeros(n, n); };
  s.Dv_b = [n](double, const Vec&, const ParticleCloud&, const Vec&) { return ident(n); };
  s.Dy_dbdnu = [n, k](double, const Vec&, const ParticleCloud&, const Vec&, const Vec&) { return ident(n, k); };
  constant_sigma(s, p.at("sigma"));
  quadratic_costs(s, 1.0, 1.0, 1.0);
  measure_free_dnu(s);
  s.mode_flags.drift_linear = true;
  auto& c = s.constants;
  c.lambda_x = 0.5;
  c.lambda_v = c.lambda = 0.5;
  c.lambda_m = 0.0;
  c.L_x = c.L_v = c.l_x = c.l_g = 0.0;
  c.l_m = std::abs(k);
  c.L = std::max(1.0, std::abs(k));
  c.lambda_b = 1.0;
  c.L_b_x = c.L_b_v = c.L_b_m = 0.0;
  return s;
}

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> reg = [] {
    const ParamMap lq = {{"dim", 1}, {"A", 0},  {"B", 1},      {"sigma", 1}, {"Q", 1}, {"R", 1},
                         {"kappa", 0}, {"S", 0}, {"QT", 0}, {"kappaT", 0}, {"ST", 0}};
    ParamMap lq_mean = lq;
    lq_mean["kappa"] = 0.5;
    lq_mean["QT"] = 1.0;
    lq_mean["kappaT"] = 0.5;
    ParamMap lq_mftc = lq;
    lq_mftc["Q"] = 0.0;
    lq_mftc["ST"] = 1.0;

    std::map<std::string, Entry> r;
    r["lq_basic"] = {lq, [](const ParamMap& p) { return build_lq("lq_basic", p); }};
    r["lq_mean"] = {lq_mean, [](const ParamMap& p) { return build_lq("lq_mean", p); }};
    r["lq_mftc_mean"] = {lq_mftc, [](const ParamMap& p) { return build_lq("lq_mftc_mean", p); }};
    r["quadratic_control"] = {{{"dim", 1}, {"lambda", 1}, {"sigma", 1}}, build_quadratic_control};
    r["split_quasi"] = {{{"dim", 1}, {"a", 0.2}, {"sigma", 1}}, build_split_quasi};
    r["small_mf"] = {{{"dim", 1}, {"ax", 1}, {"av", 1}, {"c", 1}, {"sigma", 1}}, build_small_mf};
    r["anti_g"] = {{{"dim", 1}, {"c", 2}, {"sigma", 1}}, build_anti_g};
    r["generic_tanh"] = {{{"dim", 1}, {"eps", 0.1}, {"sigma", 1}}, build_generic_tanh};
    r["generic_tanh_x"] = {{{"dim", 1}, {"sigma", 1}}, build_generic_tanh_x};
    r["mean_drift"] = {{{"dim", 1}, {"k", 0.2}, {"sigma", 1}}, build_mean_drift};
    return r;
  }();
  return reg;
}

}  // namespace

std::vector<std::string> catalog_names() {
  std::vector<std::string> out;
  for (const auto& [name, entry] : registry()) out.push_back(name);
  return out;
}

ParamMap catalog_defaults(const std::string& name) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw Error(ErrorCode::ConfigError, "unknown model '" + name + "'");
  return it->second.defaults;
}

ModelSpec make_model(const std::string& name, const ParamMap& params) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw Error(ErrorCode::ConfigError, "unknown model '" + name + "'");
  ParamMap merged = it->second.defaults;
  for (const auto& [key, value] : params) {
    if (!merged.count(key))
      throw Error(ErrorCode::ConfigError, "model '" + name + "' has no parameter '" + key + "'");
    if (!std::isfinite(value)) throw Error(ErrorCode::ConfigError, "parameter '" + key + "' is not finite");
    merged[key] = value;
  }
  ModelSpec spec = it->second.build(merged);
  spec.constants.validate();
  return spec;
}

}  // namespace mfg
