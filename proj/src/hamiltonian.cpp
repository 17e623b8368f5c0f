#include "mfg/hamiltonian.hpp"

#include "mfg/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace mfg {

double lagrangian(const ModelSpec& spec, double t, const Vec& x, const ParticleCloud& m, const Vec& v,
                  const Vec& p, const Mat& q) {
  const double val = p.dot(spec.b(t, x, m, v)) + sigma_pairing(q, spec.sigma(t, x, m, v)) + spec.f(t, x, m, v);
  if (!std::isfinite(val)) throw Error(ErrorCode::NonFiniteValue, "non-finite Lagrangian");
  return val;
}

Vec lagrangian_dv(const ModelSpec& spec, double t, const Vec& x, const ParticleCloud& m, const Vec& v,
                  const Vec& p, const Mat& q) {
  Vec r = spec.Dv_b(t, x, m, v).transpose() * p + spec.Dv_f(t, x, m, v);
  if (spec.Dv_sigma_q) r += spec.Dv_sigma_q(t, x, m, v, q);
  return r;
}

namespace {

std::string describe(const Vec& v) {
  std::ostringstream os;
  os.precision(6);
  os << '[';
  for (int i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i);
  os << ']';
  return os.str();
}

double min_sym_eigenvalue(const Mat& a) {
  if (a.rows() == 1) return a(0, 0);
  const Mat sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Shared globalized Newton iteration on D_v L = 0.
Vec newton_stationarity(const ModelSpec& spec, double t, const Vec& x, const ParticleCloud& m,
                        const Vec& p, const Mat& q, const std::optional<Vec>& v_init,
                        const NewtonOptions& opts, bool require_convex) {
  const int d = spec.d;
  Vec v = v_init ? *v_init : Vec::Zero(d);
  if (v.size() != d) throw Error(ErrorCode::DimensionMismatch, "v_init has the wrong dimension");
  if (!v.allFinite()) throw Error(ErrorCode::NonFiniteValue, "v_init is not finite");

  auto residual = [&](const Vec& z) { return lagrangian_dv(spec, t, x, m, z, p, q); };
  Vec r = residual(v);
  double rn = r.norm();
  for (int it = 0; it < opts.max_iter; ++it) {
    if (!std::isfinite(rn)) throw Error(ErrorCode::NonFiniteValue, "non-finite stationarity residual");
    if (rn <= opts.tol) return v;

    Mat jac(d, d);
    Vec zp = v, zm = v;
    for (int k = 0; k < d; ++k) {
      const double h = opts.fd_step * (1.0 + std::abs(v(k)));
      zp(k) = v(k) + h;
      zm(k) = v(k) - h;
      jac.col(k) = (residual(zp) - residual(zm)) / (2.0 * h);
      zp(k) = zm(k) = v(k);
    }
    if (require_convex && min_sym_eigenvalue(jac) < 1e-12)
      throw Error(ErrorCode::SingularHessian, "v-Hessian of L is not positive definite at v = " + describe(v));

    Vec step;
    if (d == 1) {
      if (std::abs(jac(0, 0)) < 1e-300)
        throw Error(ErrorCode::SingularHessian, "stationarity Jacobian is singular at v = " + describe(v));
      step = Vec::Constant(1, -r(0) / jac(0, 0));
    } else {
      Eigen::FullPivLU<Mat> lu(jac);
      if (!lu.isInvertible())
        throw Error(ErrorCode::SingularHessian, "stationarity Jacobian is singular at v = " + describe(v));
      step = lu.solve(-r);
    }

    // Armijo on phi = |r|^2 / 2, whose directional derivative along the
    // Newton step is -|r|^2.
    const double phi = 0.5 * rn * rn;
    double alpha = 1.0;
    Vec v_next = v + step;
    Vec r_next = residual(v_next);
    int halvings = 0;
    while (!(0.5 * r_next.squaredNorm() <= (1.0 - 2e-4 * alpha) * phi) && halvings < 40) {
      alpha *= 0.5;
      ++halvings;
      v_next = v + alpha * step;
      r_next = residual(v_next);
    }
    v = v_next;
    r = r_next;
    rn = r.norm();
  }
  if (rn <= opts.tol) return v;
  std::ostringstream os;
  os << "Newton did not converge in " << opts.max_iter << " iterations; last residual " << rn;
  throw Error(ErrorCode::NoConvergence, os.str());
}

}  // namespace

Vec minimize_hamiltonian(const ModelSpec& spec, double t, const Vec& x, const ParticleCloud& m,
                         const Vec& p, const Mat& q, const std::optional<Vec>& v_init,
                         const NewtonOptions& opts) {
  return newton_stationarity(spec, t, x, m, p, q, v_init, opts, true);
}

Vec solve_stationarity(const ModelSpec& spec, double t, const Vec& x, const ParticleCloud& m,
                       const Vec& p, const Mat& q, const std::optional<Vec>& v_init,
                       const NewtonOptions& opts) {
  return newton_stationarity(spec, t, x, m, p, q, v_init, opts, false);
}

HamiltonianGradients hamiltonian_gradients(const ModelSpec& spec, double t, const Vec& x,
                                           const ParticleCloud& m, const Vec& p, const Mat& q,
                                           const Vec& v_hat, double tol) {
  const double res = lagrangian_dv(spec, t, x, m, v_hat, p, q).norm();
  if (!(res <= 10.0 * tol)) {
    std::ostringstream os;
    os << "stationarity residual " << res << " at the supplied minimizer exceeds " << 10.0 * tol;
    throw Error(ErrorCode::StaleMinimizer, os.str());
  }
  HamiltonianGradients out;
  out.DpH = spec.b(t, x, m, v_hat);
  out.DqH = spec.sigma(t, x, m, v_hat);
  out.DxH = spec.Dx_b(t, x, m, v_hat).transpose() * p + spec.Dx_f(t, x, m, v_hat);
  if (spec.Dx_sigma_q) out.DxH += spec.Dx_sigma_q(t, x, m, v_hat, q);
  out.H = lagrangian(spec, t, x, m, v_hat, p, q);
  return out;
}

double hamiltonian_value(const ModelSpec& spec, double t, const Vec& x, const ParticleCloud& m,
                         const Vec& p, const Mat& q, const NewtonOptions& opts) {
  const Vec v = minimize_hamiltonian(spec, t, x, m, p, q, std::nullopt, opts);
  return lagrangian(spec, t, x, m, v, p, q);
}

std::vector<PointSample> sample_points(const ModelSpec& spec, int count, std::uint64_t seed,
                                       double scale, int cloud_size) {
  const CounterRng rng(seed);
  constexpr auto st = CounterRng::kSampler;
  std::vector<PointSample> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    int c = 0;
    PointSample ps;
    ps.t = rng.uniform(st, s, c++);
    ps.x.resize(spec.n);
    ps.v.resize(spec.d);
    for (int k = 0; k < spec.n; ++k) ps.x(k) = scale * rng.normal(st, s, c++);
    for (int k = 0; k < spec.d; ++k) ps.v(k) = scale * rng.normal(st, s, c++);
    Eigen::MatrixXd pts(cloud_size, spec.n);
    for (int k = 0; k < spec.n; ++k) {
      const double offset = scale * rng.normal(st, s, c++);
      for (int i = 0; i < cloud_size; ++i) pts(i, k) = offset + rng.normal(st, s, c++);
    }
    ps.m = ParticleCloud(std::move(pts));
    out.push_back(std::move(ps));
  }
  return out;
}

namespace {

Witness point_witness(const std::string& what, const PointSample& s) {
  Witness w;
  w.description = what;
  w.values["t"] = s.t;
  for (int k = 0; k < s.x.size(); ++k) w.values["x" + std::to_string(k + 1)] = s.x(k);
  for (int k = 0; k < s.v.size(); ++k) w.values["v" + std::to_string(k + 1)] = s.v(k);
  w.clouds.push_back(s.m);
  return w;
}

}  // namespace

CheckReport cone_bound_check(const ModelSpec& spec, const std::vector<PointSample>& samples) {
  if (!spec.constants.L || !spec.constants.lambda_b || *spec.constants.lambda_b <= 0.0)
    throw Error(ErrorCode::ConfigError, "cone bound check needs declared L and lambda_b > 0");
  const double L = *spec.constants.L, lb = *spec.constants.lambda_b;
  CheckReport rep;
  rep.condition_name = "cone_bound";
  rep.samples_used = static_cast<int>(samples.size());
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t worst_i = 0;
  double min_eig = std::numeric_limits<double>::infinity();

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const Mat dvb = spec.Dv_b(s.t, s.x, s.m, s.v);
    const Mat gram = dvb * dvb.transpose();
    const double eig = min_sym_eigenvalue(gram);
    min_eig = std::min(min_eig, eig);
    if (eig < 0.5 * lb) {
      Witness w = point_witness("(D_v b)(D_v b)^T has eigenvalue below lambda_b / 2", s);
      w.values["min_eigenvalue"] = eig;
      w.values["lambda_b"] = lb;
      std::ostringstream os;
      os << "minimal eigenvalue " << eig << " of (D_v b)(D_v b)^T is below lambda_b/2 = " << 0.5 * lb;
      throw SingularDvbError(os.str(), std::move(w));
    }
    const Vec p = -gram.ldlt().solve(dvb * spec.Dv_f(s.t, s.x, s.m, s.v));
    const double bound =
        (L * L / lb) * (1.0 + s.x.norm() + std::sqrt(s.m.second_moment()) + s.v.norm());
    const double ratio = p.norm() / bound;
    if (ratio > worst) {
      worst = ratio;
      worst_i = i;
    }
  }
  rep.margins["max_ratio"] = samples.empty() ? 0.0 : worst;
  rep.margins["min_eigenvalue"] = min_eig;
  if (samples.empty()) return rep;
  rep.verdict = worst <= 1.0 ? Verdict::Pass : Verdict::Fail;
  Witness w = point_witness(rep.passed() ? "largest ratio |p| / bound" : "cone bound violated", samples[worst_i]);
  w.values["ratio"] = worst;
  rep.witnesses.push_back(std::move(w));
  return rep;
}

CheckReport p_concavity_check_1d(const ModelSpec& spec, const std::vector<PointSample>& samples) {
  if (spec.n != 1 || spec.d != 1)
    throw Error(ErrorCode::DimensionUnsupported, "p-concavity formula is one-dimensional only");
  CheckReport rep;
  rep.condition_name = "p_concavity_1d";
  rep.samples_used = static_cast<int>(samples.size());
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t worst_i = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    auto dvb = [&](double v) { return spec.Dv_b(s.t, s.x, s.m, Vec::Constant(1, v))(0, 0); };
    auto dvf = [&](double v) { return spec.Dv_f(s.t, s.x, s.m, Vec::Constant(1, v))(0); };
    const double v = s.v(0);
    const double h = 1e-5 * (1.0 + std::abs(v));
    const double b1 = dvb(v), f1 = dvf(v);
    const double b2 = (dvb(v + h) - dvb(v - h)) / (2.0 * h);
    const double f2 = (dvf(v + h) - dvf(v - h)) / (2.0 * h);
    // Any v is the minimizer for p = -D_v f / D_v b, so sampling v samples (x, p).
    const double den = b1 * b2 * f1 / (b1 * b1) - f2;
    const double d2 = den == 0.0 ? std::numeric_limits<double>::infinity() : b1 * b1 / den;
    if (d2 > worst) {
      worst = d2;
      worst_i = i;
    }
  }
  rep.margins["max_D2pH"] = samples.empty() ? 0.0 : worst;
  if (samples.empty()) return rep;
  rep.verdict = worst < 0.0 ? Verdict::Pass : Verdict::Fail;
  Witness w = point_witness(rep.passed() ? "largest D_p^2 H" : "D_p^2 H is not negative", samples[worst_i]);
  w.values["D2pH"] = worst;
  rep.witnesses.push_back(std::move(w));
  return rep;
}

}  // namespace mfg
