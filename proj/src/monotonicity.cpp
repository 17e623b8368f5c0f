#include "mfg/monotonicity.hpp"

#include "mfg/parallel.hpp"
#include "mfg/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTiny = 1e-14;

// Sample tags keep the purposes of the draws in one sample index apart.
enum Tag : std::uint64_t {
  kBaseOffset = 1,
  kBasePoints,
  kPartnerOffset,
  kPartnerPoints,
  kShift,
  kRescale,
  kTime,
  kStateX,
  kStateV,
  kStateX2,
  kStateV2,
  kMomentP,
  kMomentP2,
  kMomentQ,
  kMomentQ2,
  kFrozenV,
  kStepSize,
};

Vec normal_vec(const CounterRng& rng, std::uint64_t k, std::uint64_t tag, int dim, double scale) {
  Vec z(dim);
  for (int i = 0; i < dim; ++i) z(i) = scale * rng.normal(CounterRng::kSampler, k, tag, i);
  return z;
}

Eigen::MatrixXd normal_mat(const CounterRng& rng, std::uint64_t k, std::uint64_t tag, int rows, int cols) {
  Eigen::MatrixXd z(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      z(i, j) = rng.normal(CounterRng::kSampler, k, tag, static_cast<std::uint64_t>(i) * cols + j);
  return z;
}

Eigen::MatrixXd gaussian_points(const CounterRng& rng, std::uint64_t k, std::uint64_t offset_tag,
                                std::uint64_t point_tag, int N, int n, double spread, double offset_scale) {
  const Vec o = normal_vec(rng, k, offset_tag, n, offset_scale);
  Eigen::MatrixXd pts = spread * normal_mat(rng, k, point_tag, N, n);
  pts.rowwise() += o.transpose();
  return pts;
}

// E[a . b] under the (uniform or weighted) particle law.
double pairing(const ParticleCloud& c, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (c.weights().asDiagonal() * (a.array() * b.array()).matrix()).sum();
}

Eigen::MatrixXd lifted(const LiftedGradient& grad, const ParticleCloud& c) {
  Eigen::MatrixXd out(c.size(), c.dim());
  for (int i = 0; i < c.size(); ++i) out.row(i) = grad(c.point(i), c).transpose();
  return out;
}

double sample_time(const CounterRng& rng, int k) { return rng.uniform(CounterRng::kSampler, k, kTime); }

Witness cloud_witness(const std::string& what, const ParticleCloud& a, const ParticleCloud& b,
                      std::map<std::string, double> values) {
  Witness w;
  w.description = what;
  w.values = std::move(values);
  w.clouds = {a, b};
  return w;
}

Witness point_witness(const std::string& what, std::map<std::string, double> values) {
  Witness w;
  w.description = what;
  w.values = std::move(values);
  return w;
}

void add_vec(std::map<std::string, double>& m, const std::string& prefix, const Vec& v) {
  for (int i = 0; i < v.size(); ++i) m[prefix + std::to_string(i + 1)] = v(i);
}

// Displacement quasi-monotonicity estimate: lambda_m_hat is the largest
// -E[dD . dxi] / ||dxi||^2 over the sampled couplings.
struct QuasiEstimate {
  double lambda_m = 0.0;
  int worst = -1;
  ParticleCloud a, b;
};

QuasiEstimate estimate_quasi(const std::function<LiftedGradient(int k)>& grad_for, int n,
                             const CouplingSampler& sampler, int samples) {
  QuasiEstimate e;
  e.lambda_m = -kInf;
  for (int k = 0; k < samples; ++k) {
    auto [xi, xi2] = sampler.pair(n, k);
    const Eigen::MatrixXd delta = xi2.points() - xi.points();
    const double den = pairing(xi, delta, delta);
    if (den < kTiny) continue;
    const LiftedGradient grad = grad_for(k);
    const double num = pairing(xi, lifted(grad, xi2) - lifted(grad, xi), delta);
    const double q = -num / den;
    if (q > e.lambda_m) {
      e.lambda_m = q;
      e.worst = k;
      e.a = xi;
      e.b = xi2;
    }
  }
  return e;
}

// Strong convexity moduli of (x, v) -> phi at a fixed measure: gap >= lx |dx|^2 + lv |dv|^2.
struct Moduli {
  double lx = kInf;
  double lv = kInf;
  Witness worst_x, worst_v;
};

Moduli convexity_moduli(const ScalarFn& phi, const VecFn& dx, const VecFn& dv, int n, int d,
                        const CouplingSampler& sampler, int samples) {
  const CounterRng rng(sampler.seed);
  Moduli mo;
  auto gap = [&](double t, const Vec& x, const Vec& v, const ParticleCloud& m, const Vec& x2, const Vec& v2) {
    return phi(t, x2, m, v2) - phi(t, x, m, v) - dx(t, x, m, v).dot(x2 - x) - dv(t, x, m, v).dot(v2 - v);
  };
  struct Mixed { double g, ax, av; };
  std::vector<Mixed> mixed;
  for (int k = 0; k < samples; ++k) {
    const double t = sample_time(rng, k);
    const Vec x = normal_vec(rng, k, kStateX, n, 1.0);
    const Vec v = normal_vec(rng, k, kStateV, d, 1.0);
    const Vec x2 = x + normal_vec(rng, k, kStateX2, n, (k % 2) ? 1.0 : 0.1);
    const Vec v2 = v + normal_vec(rng, k, kStateV2, d, (k % 2) ? 1.0 : 0.1);
    const ParticleCloud m = sampler.single(n, k);
    const double ax = (x2 - x).squaredNorm(), av = (v2 - v).squaredNorm();
    const double gx = gap(t, x, v, m, x2, v) / ax;
    const double gv = gap(t, x, v, m, x, v2) / av;
    if (gx < mo.lx) {
      mo.lx = gx;
      std::map<std::string, double> vals{{"t", t}, {"normalized_gap", gx}, {"sample", k}};
      add_vec(vals, "x", x);
      add_vec(vals, "x_prime", x2);
      add_vec(vals, "v", v);
      mo.worst_x = point_witness("convexity gap in x", vals);
    }
    if (gv < mo.lv) {
      mo.lv = gv;
      std::map<std::string, double> vals{{"t", t}, {"normalized_gap", gv}, {"sample", k}};
      add_vec(vals, "x", x);
      add_vec(vals, "v", v);
      add_vec(vals, "v_prime", v2);
      mo.worst_v = point_witness("convexity gap in v", vals);
    }
    mixed.push_back({gap(t, x, v, m, x2, v2), ax, av});
  }
  // Joint moves can expose cross terms the coordinate moves miss; shrink both
  // moduli by the worst joint ratio.
  double s = 1.0;
  for (const auto& mx : mixed) {
    const double need = mo.lx * mx.ax + mo.lv * mx.av;
    if (need > kTiny) s = std::min(s, mx.g / need);
  }
  if (s < 1.0) {
    mo.lx *= s;
    mo.lv *= s;
  }
  return mo;
}

// Lipschitz estimates of a gradient in the measure argument with x, v frozen:
// sup |grad(m') - grad(m)| / W2(m, m').
double measure_lipschitz(const VecFn& grad, int n, int d, const CouplingSampler& sampler, int samples,
                         Witness* worst) {
  const CounterRng rng(sampler.seed);
  double best = 0.0;
  for (int k = 0; k < samples; ++k) {
    auto [m, m2] = sampler.pair(n, k);
    const double w = wasserstein2(m, m2);
    if (w < 1e-10) continue;
    const double t = sample_time(rng, k);
    const Vec x = normal_vec(rng, k, kStateX, n, 1.0);
    const Vec v = normal_vec(rng, k, kStateV, d, 1.0);
    const double q = (grad(t, x, m2, v) - grad(t, x, m, v)).norm() / w;
    if (q > best) {
      best = q;
      if (worst) *worst = cloud_witness("measure Lipschitz quotient", m, m2, {{"quotient", q}, {"w2", w}, {"t", t}});
    }
  }
  return best;
}

struct Independence {
  double max_violation = 0.0;
  Witness witness;
};

// How far phi changes when only the measure (or only the control) moves.
Independence independence(const ScalarFn& phi, bool in_measure, int n, int d, const CouplingSampler& sampler,
                          int samples) {
  const CounterRng rng(sampler.seed);
  Independence r;
  for (int k = 0; k < samples; ++k) {
    auto [m, m2] = sampler.pair(n, k);
    const double t = sample_time(rng, k);
    const Vec x = normal_vec(rng, k, kStateX, n, 1.0);
    const Vec v = normal_vec(rng, k, kStateV, d, 1.0);
    const Vec v2 = normal_vec(rng, k, kStateV2, d, 1.0);
    const double a = phi(t, x, m, v);
    const double b = in_measure ? phi(t, x, m2, v) : phi(t, x, m, v2);
    const double rel = std::abs(b - a) / (1.0 + std::abs(a));
    if (rel > r.max_violation) {
      r.max_violation = rel;
      r.witness = cloud_witness(in_measure ? "value changes with the measure" : "value changes with the control",
                                m, m2, {{"t", t}, {"value", a}, {"value_prime", b}});
    }
  }
  return r;
}

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

void require_samples(int samples) {
  require(samples >= 1, ErrorCode::InvalidArgument, "need at least one sample");
}

}  // namespace

const char* to_string(PairScheme s) {
  switch (s) {
    case PairScheme::Independent: return "independent";
    case PairScheme::Shift: return "shift";
    case PairScheme::Rescale: return "rescale";
    case PairScheme::Antithetic: return "antithetic";
    case PairScheme::Mixed: return "mixed";
  }
  return "unknown";
}

PairScheme pair_scheme_from_string(const std::string& s) {
  for (auto p : {PairScheme::Independent, PairScheme::Shift, PairScheme::Rescale, PairScheme::Antithetic,
                 PairScheme::Mixed})
    if (s == to_string(p)) return p;
  throw Error(ErrorCode::ConfigError, "unknown pair scheme '" + s + "'");
}

PairScheme CouplingSampler::scheme_for(int k) const {
  if (scheme != PairScheme::Mixed) return scheme;
  static constexpr PairScheme cycle[] = {PairScheme::Shift, PairScheme::Independent, PairScheme::Rescale,
                                         PairScheme::Antithetic};
  return cycle[k % 4];
}

ParticleCloud CouplingSampler::single(int n, int k) const {
  require(cloud_size >= 1, ErrorCode::InvalidArgument, "cloud_size must be >= 1");
  const CounterRng rng(seed);
  return ParticleCloud(gaussian_points(rng, k, kBaseOffset, kBasePoints, cloud_size, n, spread, offset_scale));
}

std::pair<ParticleCloud, ParticleCloud> CouplingSampler::pair(int n, int k) const {
  require(n >= 1 && n <= kMaxDim, ErrorCode::DimensionMismatch, "dimension out of range");
  const CounterRng rng(seed);
  ParticleCloud base = single(n, k);
  Eigen::MatrixXd other;
  switch (scheme_for(k)) {
    case PairScheme::Independent:
      other = gaussian_points(rng, k, kPartnerOffset, kPartnerPoints, cloud_size, n, spread, offset_scale);
      break;
    case PairScheme::Shift: {
      const Vec c = normal_vec(rng, k, kShift, n, std::max(offset_scale, spread));
      other = base.points().rowwise() + c.transpose();
      break;
    }
    case PairScheme::Rescale: {
      double a = 0.25 + 1.75 * rng.uniform(CounterRng::kSampler, k, kRescale);
      if (std::abs(a - 1.0) < 0.1) a += 0.2;
      other = a * base.points();
      break;
    }
    case PairScheme::Antithetic:
    case PairScheme::Mixed:
      other = -base.points();
      break;
  }
  return {std::move(base), ParticleCloud(std::move(other))};
}

CheckReport check_displacement_quasi(const LiftedGradient& grad, int n, double lambda_m,
                                     const CouplingSampler& sampler, int samples) {
  require_samples(samples);
  require(static_cast<bool>(grad), ErrorCode::MissingDerivative, "gradient callable is empty");
  CheckReport r;
  r.condition_name = "displacement_quasi";
  const QuasiEstimate e = estimate_quasi([&](int) { return grad; }, n, sampler, samples);
  r.samples_used = samples;
  if (e.worst < 0) {
    r.verdict = Verdict::Inconclusive;
    return r;
  }
  const double margin = lambda_m - e.lambda_m;
  r.margins["min_normalized_margin"] = margin;
  r.margins["lambda_m_hat"] = std::max(0.0, e.lambda_m);
  r.margins["lambda_m"] = lambda_m;
  r.verdict = margin >= kMarginTol ? Verdict::Pass : Verdict::Fail;
  r.witnesses.push_back(cloud_witness(
      std::string("worst coupling (") + to_string(sampler.scheme_for(e.worst)) + ")", e.a, e.b,
      {{"normalized_margin", margin}, {"lambda_m", lambda_m}, {"sample", e.worst}}));
  return r;
}

CheckReport check_condition_separable(const ModelSpec& spec, const CouplingSampler& sampler, int samples) {
  require_samples(samples);
  require(spec.f_split.has_value(), ErrorCode::MissingDerivative, "separable check needs f_split");
  const FSplit& s = *spec.f_split;
  require(s.f0 && s.f1 && s.Dx_f0 && s.Dx_f1 && s.Dv_f1, ErrorCode::MissingDerivative,
          "separable check needs f0, f1, Dx_f0, Dx_f1, Dv_f1");
  const int n = spec.n, d = spec.d;
  const CounterRng rng(sampler.seed);
  CheckReport r;
  r.condition_name = "separable";
  r.samples_used = samples;

  const Moduli mo = convexity_moduli(s.f1, s.Dx_f1, s.Dv_f1, n, d, sampler, samples);
  const QuasiEstimate q = estimate_quasi(
      [&](int k) -> LiftedGradient {
        const double t = sample_time(rng, k);
        const Vec v = normal_vec(rng, k, kFrozenV, d, 1.0);
        return [&s, t, v](const Vec& x, const ParticleCloud& m) { return s.Dx_f0(t, x, m, v); };
      },
      n, sampler, samples);
  const Independence f1m = independence(s.f1, true, n, d, sampler, samples);
  const Independence f0v = independence(s.f0, false, n, d, sampler, samples);

  const double lm = std::max(0.0, q.lambda_m);
  r.margins["lambda_x_hat"] = mo.lx;
  r.margins["lambda_v_hat"] = mo.lv;
  r.margins["lambda_m_hat"] = lm;
  r.margins["f1_measure_dependence"] = f1m.max_violation;
  r.margins["f0_control_dependence"] = f0v.max_violation;
  const double margin = 2.0 * mo.lx - lm;
  r.margins["inequality_margin"] = margin;

  r.verdict = Verdict::Pass;
  if (f1m.max_violation > 1e-10) {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(f1m.witness);
  }
  if (f0v.max_violation > 1e-10) {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(f0v.witness);
  }
  if (!(mo.lv > 0.0)) {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(mo.worst_v);
  }
  if (margin < kMarginTol) {
    r.verdict = Verdict::Fail;
    if (q.worst >= 0)
      r.witnesses.push_back(cloud_witness("f0 quasi-monotonicity coupling", q.a, q.b,
                                          {{"lambda_m_hat", lm}, {"lambda_x_hat", mo.lx}, {"margin", margin}}));
    r.witnesses.push_back(mo.worst_x);
  }
  return r;
}

CheckReport check_small_mean_field_effect(const ModelSpec& spec, const CouplingSampler& sampler, int samples) {
  require_samples(samples);
  require(spec.f && spec.Dx_f && spec.Dv_f, ErrorCode::MissingDerivative, "needs f, Dx_f, Dv_f");
  const int n = spec.n, d = spec.d;
  CheckReport r;
  r.condition_name = "small_mean_field_effect";
  r.samples_used = samples;

  const Moduli mo = convexity_moduli(spec.f, spec.Dx_f, spec.Dv_f, n, d, sampler, samples);
  Witness wx, wv;
  const double Lx = measure_lipschitz(spec.Dx_f, n, d, sampler, samples, &wx);
  const double Lv = measure_lipschitz(spec.Dv_f, n, d, sampler, samples, &wv);
  r.margins["lambda_x_hat"] = mo.lx;
  r.margins["lambda_v_hat"] = mo.lv;
  r.margins["L_x_hat"] = Lx;
  r.margins["L_v_hat"] = Lv;

  if (!(mo.lv > 0.0)) {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(mo.worst_v);
    return r;
  }
  const double margin = mo.lx - (Lv * Lv / (8.0 * mo.lv) + 0.5 * Lx);
  r.margins["inequality_margin"] = margin;
  if (margin >= kMarginTol) {
    r.verdict = Verdict::Pass;
  } else {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(mo.worst_x);
    if (Lv > 0.0) r.witnesses.push_back(wv);
    if (Lx > 0.0) r.witnesses.push_back(wx);
  }
  return r;
}

CheckReport check_condition_split(const ModelSpec& spec, const CouplingSampler& sampler, int samples) {
  require_samples(samples);
  require(spec.f_split.has_value(), ErrorCode::MissingDerivative, "split check needs f_split");
  const FSplit& s = *spec.f_split;
  require(s.f0 && s.f1 && s.Dx_f0 && s.Dv_f0 && s.Dx_f1 && s.Dv_f1, ErrorCode::MissingDerivative,
          "split check needs f0, f1 and all four gradients");
  const int n = spec.n, d = spec.d;
  const CounterRng rng(sampler.seed);
  CheckReport r;
  r.condition_name = "split";
  r.samples_used = samples;

  const Moduli mo = convexity_moduli(s.f1, s.Dx_f1, s.Dv_f1, n, d, sampler, samples);
  Witness wx, wv;
  const double Lx = measure_lipschitz(s.Dx_f1, n, d, sampler, samples, &wx);
  const double Lv = measure_lipschitz(s.Dv_f1, n, d, sampler, samples, &wv);

  // Frozen random control: independent of xi on even samples, a function of
  // xi on odd ones.
  const QuasiEstimate q = estimate_quasi(
      [&](int k) -> LiftedGradient {
        const double t = sample_time(rng, k);
        if (k % 2 == 0) {
          const Vec v = normal_vec(rng, k, kFrozenV, d, 1.0);
          return [&s, t, v](const Vec& x, const ParticleCloud& m) { return s.Dx_f0(t, x, m, v); };
        }
        // The control follows the particle on the xi side of the coupling.
        return [&s, t, d](const Vec& x, const ParticleCloud& m) {
          Vec v(d);
          for (int j = 0; j < d; ++j) v(j) = std::tanh(x(j % x.size()));
          return s.Dx_f0(t, x, m, v);
        };
      },
      n, sampler, samples);
  const double lm = q.worst >= 0 ? q.lambda_m : 0.0;

  // l_x from the two mixed Lipschitz quotients of f0, and v-convexity of f0.
  double lx = 0.0, f0_gap = kInf;
  Witness wl, wg;
  for (int k = 0; k < samples; ++k) {
    auto [m, m2] = sampler.pair(n, k);
    const double t = sample_time(rng, k);
    const Vec x = normal_vec(rng, k, kStateX, n, 1.0);
    const Vec v = normal_vec(rng, k, kStateV, d, 1.0);
    const Vec x2 = x + normal_vec(rng, k, kStateX2, n, (k % 2) ? 1.0 : 0.1);
    const Vec v2 = v + normal_vec(rng, k, kStateV2, d, (k % 2) ? 1.0 : 0.1);
    const double q1 = (s.Dx_f0(t, x, m, v2) - s.Dx_f0(t, x, m, v)).norm() / (v2 - v).norm();
    const double q2 = (s.Dv_f0(t, x2, m2, v) - s.Dv_f0(t, x, m, v)).norm() / ((x2 - x).norm() + wasserstein2(m, m2));
    if (std::max(q1, q2) > lx) {
      lx = std::max(q1, q2);
      wl = cloud_witness("f0 cross Lipschitz quotient", m, m2, {{"quotient", lx}, {"t", t}});
    }
    const double gap = s.f0(t, x, m, v2) - s.f0(t, x, m, v) - s.Dv_f0(t, x, m, v).dot(v2 - v);
    const double g = gap / (v2 - v).squaredNorm();
    if (g < f0_gap) {
      f0_gap = g;
      std::map<std::string, double> vals{{"t", t}, {"normalized_gap", g}};
      add_vec(vals, "x", x);
      add_vec(vals, "v", v);
      add_vec(vals, "v_prime", v2);
      wg = point_witness("f0 convexity gap in v", vals);
    }
  }

  r.margins["lambda_x_hat"] = mo.lx;
  r.margins["lambda_v_hat"] = mo.lv;
  r.margins["L_x_hat"] = Lx;
  r.margins["L_v_hat"] = Lv;
  r.margins["lambda_m_hat"] = lm;
  r.margins["l_x_hat"] = lx;
  r.margins["f0_v_convexity_min"] = f0_gap;

  r.verdict = Verdict::Pass;
  if (f0_gap < kMarginTol) {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(wg);
  }
  if (!(mo.lv > 0.0)) {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(mo.worst_v);
    return r;
  }
  const double margin = 2.0 * mo.lx - lm - (Lx + (Lv + 3.0 * lx) * (Lv + 3.0 * lx) / (4.0 * mo.lv));
  r.margins["inequality_margin"] = margin;
  if (margin < kMarginTol) {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(mo.worst_x);
    if (q.worst >= 0 && lm > 0.0)
      r.witnesses.push_back(cloud_witness("f0 quasi-monotonicity coupling", q.a, q.b, {{"lambda_m_hat", lm}}));
    if (lx > 0.0) r.witnesses.push_back(wl);
    if (Lv > 0.0) r.witnesses.push_back(wv);
    if (Lx > 0.0) r.witnesses.push_back(wx);
  }
  return r;
}

CheckReport check_beta_monotonicity(const LiftedCoefficients& coeffs, const CouplingSampler& sampler, int samples,
                                    const BetaCheckOptions& opts) {
  require_samples(samples);
  require(static_cast<bool>(coeffs.eval) && static_cast<bool>(coeffs.G), ErrorCode::MissingDerivative,
          "lifted coefficients are incomplete");
  require(opts.T > opts.t0, ErrorCode::InvalidArgument, "need t0 < T");
  const int n = coeffs.n, nq = n * n;
  const CounterRng rng(sampler.seed);

  struct Tuple {
    double lhs = 0, dbeta = 0, dstate = 0, gmono = 0, dx = 0, kb = 0, kf = 0, t = 0;
  };
  std::vector<Tuple> tuples(samples);
  parallel_for(samples, [&](int k) {
    auto [xi, xi2] = sampler.pair(n, k);
    const int N = xi.size();
    const double t = opts.t0 + (opts.T - opts.t0) * sample_time(rng, k);
    const Eigen::MatrixXd& X = xi.points();
    const Eigen::MatrixXd& X2 = xi2.points();
    const Eigen::MatrixXd P = normal_mat(rng, k, kMomentP, N, n);
    const Eigen::MatrixXd Q = normal_mat(rng, k, kMomentQ, N, nq);
    // Moment perturbations of mixed size; every fourth sample moves X only.
    const double r = (k % 4 == 3) ? 0.0 : ((k % 2) ? 1.0 : 0.1);
    const Eigen::MatrixXd P2 = P + r * normal_mat(rng, k, kMomentP2, N, n);
    const Eigen::MatrixXd Q2 = Q + r * normal_mat(rng, k, kMomentQ2, N, nq);

    const CoefficientEval a = coeffs.eval(t, X, P, Q, nullptr, kPartAll);
    const CoefficientEval b = coeffs.eval(t, X2, P2, Q2, nullptr, kPartAll);
    const Eigen::MatrixXd dX = X2 - X, dP = P2 - P, dQ = Q2 - Q;
    const Eigen::MatrixXd dG = coeffs.G(X2) - coeffs.G(X);
    Tuple& tp = tuples[k];
    tp.t = t;
    tp.lhs = pairing(xi, b.F - a.F, dX) + pairing(xi, b.B - a.B, dP) + pairing(xi, b.A - a.A, dQ);
    tp.dbeta = pairing(xi, b.beta - a.beta, b.beta - a.beta);
    tp.dx = pairing(xi, dX, dX);
    tp.dstate = tp.dx + pairing(xi, dP, dP) + pairing(xi, dQ, dQ);
    tp.gmono = pairing(xi, dG, dX);
    const double nb = pairing(xi, b.B - a.B, b.B - a.B) + pairing(xi, b.A - a.A, b.A - a.A);
    const double nf = pairing(xi, b.F - a.F, b.F - a.F) + pairing(xi, dG, dG);
    const double db = tp.dx + tp.dbeta, df = tp.dstate + tp.dbeta;
    tp.kb = db > kTiny ? nb / db : 0.0;
    tp.kf = df > kTiny ? nf / df : 0.0;
  });

  // Smallest feasible Gamma, then the largest Lambda compatible with it;
  // the Pareto-extreme point of the two-scalar feasibility region.
  double gamma = 0.0;
  for (const auto& tp : tuples)
    if (tp.dstate > kTiny) gamma = std::max(gamma, tp.lhs / tp.dstate);
  double lambda = kInf;
  int binding = -1;
  for (int k = 0; k < samples; ++k) {
    const auto& tp = tuples[k];
    if (tp.dbeta <= kTiny) continue;
    const double cand = (gamma * tp.dstate - tp.lhs) / tp.dbeta;
    if (cand < lambda) {
      lambda = cand;
      binding = k;
    }
  }
  double gmin = kInf, K = 0.0;
  int gworst = -1;
  for (int k = 0; k < samples; ++k) {
    const auto& tp = tuples[k];
    K = std::max({K, tp.kb, tp.kf});
    if (tp.dx <= kTiny) continue;
    const double g = tp.gmono / tp.dx;
    if (g < gmin) {
      gmin = g;
      gworst = k;
    }
  }

  CheckReport rep;
  rep.condition_name = "beta_monotonicity";
  rep.samples_used = samples;
  rep.margins["Gamma_hat"] = gamma;
  if (binding >= 0) rep.margins["Lambda_hat"] = lambda;
  if (gworst >= 0) rep.margins["G_monotonicity_min"] = gmin;
  if (opts.estimate_K) rep.margins["K_hat"] = K;

  if (gworst >= 0 && gmin < kMarginTol) {
    rep.verdict = Verdict::Fail;
    auto [xi, xi2] = sampler.pair(n, gworst);
    rep.witnesses.push_back(cloud_witness("G monotonicity violated", xi, xi2,
                                          {{"normalized_margin", gmin}, {"sample", gworst}}));
    return rep;
  }
  if (binding < 0 || !(lambda > 0.0)) {
    rep.verdict = Verdict::Inconclusive;
    return rep;
  }
  {
    const auto& tp = tuples[binding];
    auto [xi, xi2] = sampler.pair(n, binding);
    rep.witnesses.push_back(cloud_witness("binding tuple for Lambda_hat", xi, xi2,
                                          {{"t", tp.t}, {"lhs", tp.lhs}, {"dbeta_sq", tp.dbeta},
                                           {"dstate_sq", tp.dstate}, {"sample", binding}}));
  }
  if (gamma <= 1e-12) {
    rep.verdict = Verdict::Pass;
  } else if (opts.estimate_K && K > 0.0) {
    const double thr = threshold_big_lambda(opts.T - opts.t0, K, gamma);
    rep.margins["Lambda_threshold"] = thr;
    rep.verdict = lambda > thr ? Verdict::Pass : Verdict::Inconclusive;
  } else {
    rep.verdict = Verdict::Inconclusive;
  }
  return rep;
}

CheckReport check_mftc_convexity(const ModelSpec& spec, const CouplingSampler& sampler, int samples) {
  require_samples(samples);
  require(spec.f && spec.g && spec.Dx_f && spec.Dv_f && spec.Dx_g && spec.Dy_dfdnu && spec.Dy_dgdnu,
          ErrorCode::MissingDerivative, "mean field type convexity needs f, g, their gradients and dnu terms");
  const int n = spec.n, d = spec.d;
  const CounterRng rng(sampler.seed);
  CheckReport r;
  r.condition_name = "mftc_convexity";
  r.samples_used = samples;

  // E~[D_y dk/dnu(.)(xi~) . (xi~' - xi~)] as a cloud average.
  auto dnu_term = [](const ParticleCloud& m, const ParticleCloud& m2, auto&& at) {
    double s = 0.0;
    for (int i = 0; i < m.size(); ++i) s += m.weight(i) * at(m.point(i)).dot(m2.point(i) - m.point(i));
    return s;
  };

  double g_min = kInf, lv = kInf, lx = kInf, lm = kInf;
  Witness wg, wv, wx, wm;
  struct Mixed { double g, ax, av, am; };
  std::vector<Mixed> mixed;
  for (int k = 0; k < samples; ++k) {
    auto [m, m2] = sampler.pair(n, k);
    const double t = sample_time(rng, k);
    const Vec x = normal_vec(rng, k, kStateX, n, 1.0);
    const Vec v = normal_vec(rng, k, kStateV, d, 1.0);
    const Vec x2 = x + normal_vec(rng, k, kStateX2, n, (k % 2) ? 1.0 : 0.1);
    const Vec v2 = v + normal_vec(rng, k, kStateV2, d, (k % 2) ? 1.0 : 0.1);
    const double ax = (x2 - x).squaredNorm(), av = (v2 - v).squaredNorm();
    const Eigen::MatrixXd dm = m2.points() - m.points();
    const double am = pairing(m, dm, dm);

    const double gg = spec.g(x2, m2) - spec.g(x, m) - spec.Dx_g(x, m).dot(x2 - x) -
                      dnu_term(m, m2, [&](const Vec& y) { return spec.Dy_dgdnu(x, m, y); });
    if (ax + am > kTiny && gg / (ax + am) < g_min) {
      g_min = gg / (ax + am);
      wg = cloud_witness("lifted convexity gap of g", m, m2, {{"normalized_gap", g_min}, {"sample", k}});
      add_vec(wg.values, "x", x);
      add_vec(wg.values, "x_prime", x2);
    }

    auto fgap = [&](const Vec& xb, const ParticleCloud& mb, const Vec& vb) {
      const double base = spec.f(t, x, m, v);
      double s = spec.f(t, xb, mb, vb) - base - spec.Dx_f(t, x, m, v).dot(xb - x) - spec.Dv_f(t, x, m, v).dot(vb - v);
      if (&mb != &m) s -= dnu_term(m, mb, [&](const Vec& y) { return spec.Dy_dfdnu(t, x, m, v, y); });
      return s;
    };
    const double gv = fgap(x, m, v2) / av;
    const double gx = fgap(x2, m, v) / ax;
    if (gv < lv) {
      lv = gv;
      wv = point_witness("convexity gap of f in v", {{"normalized_gap", gv}, {"t", t}, {"sample", k}});
    }
    if (gx < lx) {
      lx = gx;
      wx = point_witness("convexity gap of f in x", {{"normalized_gap", gx}, {"t", t}, {"sample", k}});
    }
    if (am > kTiny) {
      const double gm = fgap(x, m2, v) / am;
      if (gm < lm) {
        lm = gm;
        wm = cloud_witness("lifted convexity gap of f in the measure", m, m2, {{"normalized_gap", gm}, {"t", t}});
      }
    }
    mixed.push_back({fgap(x2, m2, v2), ax, av, am});
  }
  if (lm == kInf) lm = 0.0;
  double s = 1.0;
  for (const auto& mx : mixed) {
    const double need = std::max(lx, 0.0) * mx.ax + std::max(lv, 0.0) * mx.av + std::max(lm, 0.0) * mx.am;
    if (need > kTiny) s = std::min(s, mx.g / need);
  }
  if (s < 1.0) {
    lx *= lx > 0.0 ? s : 1.0;
    lv *= lv > 0.0 ? s : 1.0;
    lm *= lm > 0.0 ? s : 1.0;
  }

  r.margins["g_gap_min"] = g_min;
  r.margins["lambda_v_hat"] = lv;
  r.margins["lambda_x_hat"] = lx;
  r.margins["lambda_m_hat"] = lm;
  r.verdict = Verdict::Pass;
  if (g_min < kMarginTol) {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(wg);
  }
  if (!(lv > 0.0)) {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(wv);
  }
  if (lx < kMarginTol) {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(wx);
  }
  if (lm < kMarginTol) {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(wm);
  }
  return r;
}

CheckReport check_generic_drift(const ModelSpec& spec, const CouplingSampler& sampler, int samples,
                                const GenericDriftOptions& opts) {
  require_samples(samples);
  require(spec.Dx_b && spec.Dv_b, ErrorCode::MissingDerivative, "generic drift check needs Dx_b and Dv_b");
  const int n = spec.n, d = spec.d;
  const CounterRng rng(sampler.seed);
  const double sc = opts.state_scale;
  CheckReport r;
  r.condition_name = "generic_drift";
  r.samples_used = samples;

  auto jac = [&](double t, const Vec& x, const ParticleCloud& m, const Vec& v) {
    Eigen::MatrixXd J(n, n + d);
    J << spec.Dx_b(t, x, m, v), spec.Dv_b(t, x, m, v);
    return J;
  };
  const ParticleCloud origin = ParticleCloud::dirac(Vec::Zero(n));
  auto state_cloud = [&](int k) {
    if (sc == 0.0) return origin;
    CouplingSampler s = sampler;
    s.spread *= sc;
    s.offset_scale *= sc;
    return s.single(n, k);
  };

  double eig_min = kInf, Lbx = 0.0, Lbv = 0.0, Lbm = 0.0;
  Witness we, wx, wv, wm;
  for (int k = 0; k < samples; ++k) {
    const double t = sample_time(rng, k);
    const Vec x = normal_vec(rng, k, kStateX, n, sc);
    const Vec v = normal_vec(rng, k, kStateV, d, 1.0);
    const double step = (k % 2) ? 1.0 : 0.01;
    const Vec x2 = x + normal_vec(rng, k, kStateX2, n, step);
    const Vec v2 = v + normal_vec(rng, k, kStateV2, d, step);
    const ParticleCloud m = state_cloud(k);

    const Mat Dv = spec.Dv_b(t, x, m, v);
    const double e = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Dv * Dv.transpose(), Eigen::EigenvaluesOnly)
                         .eigenvalues()
                         .minCoeff();
    if (e < eig_min) {
      eig_min = e;
      we = point_witness("smallest eigenvalue of Dv_b Dv_b^T", {{"eigenvalue", e}, {"t", t}});
      add_vec(we.values, "x", x);
      add_vec(we.values, "v", v);
    }

    const Eigen::MatrixXd J = jac(t, x, m, v);
    const double wm0 = cloud_stats(m).w2_to_origin;
    // Pure moves in x and in v at a fixed measure.
    const double wx_ = 1.0 + std::max(x.norm(), x2.norm()) + v.norm() + wm0;
    const double qx = (jac(t, x2, m, v) - J).norm() * wx_ / (x2 - x).norm();
    const double wv_ = 1.0 + x.norm() + std::max(v.norm(), v2.norm()) + wm0;
    const double qv = (jac(t, x, m, v2) - J).norm() * wv_ / (v2 - v).norm();
    if (qx > Lbx) {
      Lbx = qx;
      wx = point_witness("drift quotient in x", {{"quotient", qx}, {"t", t}});
    }
    if (qv > Lbv) {
      Lbv = qv;
      wv = point_witness("drift quotient in v", {{"quotient", qv}, {"t", t}});
      add_vec(wv.values, "v", v);
      add_vec(wv.values, "v_prime", v2);
    }

    // Pure move in the measure.
    CouplingSampler ms = sampler;
    if (sc > 0.0) {
      ms.spread *= sc;
      ms.offset_scale *= sc;
    }
    auto [ma, mb] = ms.pair(n, k);
    const double w = wasserstein2(ma, mb);
    if (w > 1e-10) {
      const double wm_ = 1.0 + x.norm() + v.norm() + std::max(cloud_stats(ma).w2_to_origin, cloud_stats(mb).w2_to_origin);
      const double qm = (jac(t, x, mb, v) - jac(t, x, ma, v)).norm() * wm_ / w;
      if (qm > Lbm) {
        Lbm = qm;
        wm = cloud_witness("drift quotient in the measure", ma, mb, {{"quotient", qm}, {"t", t}});
      }
    }
  }

  const ConstantsLedger& c = spec.constants;
  r.margins["min_eigenvalue"] = eig_min;
  r.margins["L_b_x_hat"] = Lbx;
  r.margins["L_b_v_hat"] = Lbv;
  r.margins["L_b_m_hat"] = Lbm;
  r.verdict = Verdict::Pass;

  if (!c.lambda_b) {
    r.verdict = Verdict::Inconclusive;
  } else if (eig_min < *c.lambda_b + kMarginTol) {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(we);
  }
  auto quotient = [&](const std::optional<double>& declared, double est, const Witness& w, const char* key) {
    if (!declared) return;
    r.margins[key] = *declared - est;
    if (*declared - est < kMarginTol) {
      r.verdict = Verdict::Fail;
      r.witnesses.push_back(w);
    }
  };
  quotient(c.L_b_x, Lbx, wx, "L_b_x_margin");
  quotient(c.L_b_v, Lbv, wv, "L_b_v_margin");
  quotient(c.L_b_m, Lbm, wm, "L_b_m_margin");

  if (!c.L || !c.lambda_b || !c.lambda_v || !c.lambda_x) {
    if (r.verdict == Verdict::Pass) r.verdict = Verdict::Inconclusive;
    return r;
  }
  const GenericDriftMargins gm = generic_drift_margins(c);
  r.margins["theorem_margin"] = gm.theorem_margin;
  r.margins["lambda_v_margin"] = gm.lambda_v_margin;
  r.margins["mftc_x_margin"] = gm.mftc_x_margin;
  r.margins["mftc_v_margin"] = gm.mftc_v_margin;
  if (gm.theorem_margin < kMarginTol || !(gm.lambda_v_margin > 0.0)) {
    r.verdict = Verdict::Fail;
    r.witnesses.push_back(point_witness("declared constants violate the parameter inequalities",
                                        {{"theorem_margin", gm.theorem_margin},
                                         {"lambda_v_margin", gm.lambda_v_margin}}));
  }
  return r;
}

}  // namespace mfg
