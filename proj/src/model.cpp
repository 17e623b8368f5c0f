#include "mfg/model.hpp"

#include "mfg/rng.hpp"

#include <algorithm>
#include <cmath>

namespace mfg {

void ConstantsLedger::validate() const {
  const std::pair<const char*, const std::optional<double>*> all[] = {
      {"L", &L},         {"lambda", &lambda},     {"lambda_x", &lambda_x}, {"lambda_v", &lambda_v},
      {"L_x", &L_x},     {"L_v", &L_v},           {"l_x", &l_x},           {"l_m", &l_m},
      {"l_g", &l_g},     {"L_b_x", &L_b_x},       {"L_b_v", &L_b_v},       {"L_b_m", &L_b_m},
      {"lambda_b", &lambda_b}};
  for (const auto& [name, value] : all) {
    if (!value->has_value()) continue;
    if (!std::isfinite(**value) || **value < 0.0)
      throw Error(ErrorCode::ConfigError, std::string("constant ") + name + " must be finite and >= 0");
  }
  if (lambda_m && !std::isfinite(*lambda_m))
    throw Error(ErrorCode::ConfigError, "constant lambda_m must be finite");
}

bool AuditReport::passed() const {
  return std::none_of(entries.begin(), entries.end(), [](const AuditEntry& e) { return e.flagged; });
}

const AuditEntry* AuditReport::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

void require_derivatives(const ModelSpec& spec, AuditMode mode) {
  auto need = [&](bool present, const char* what) {
    if (!present)
      throw Error(ErrorCode::MissingDerivative, "model '" + spec.name + "' lacks " + what);
  };
  need(static_cast<bool>(spec.b), "b");
  need(static_cast<bool>(spec.sigma), "sigma");
  need(static_cast<bool>(spec.f), "f");
  need(static_cast<bool>(spec.g), "g");
  need(static_cast<bool>(spec.Dx_f), "Dx_f");
  need(static_cast<bool>(spec.Dv_f), "Dv_f");
  need(static_cast<bool>(spec.Dx_g), "Dx_g");
  need(static_cast<bool>(spec.Dx_b), "Dx_b");
  need(static_cast<bool>(spec.Dv_b), "Dv_b");
  if (spec.n < 1 || spec.n > kMaxDim || spec.d < 1 || spec.d > kMaxDim)
    throw Error(ErrorCode::DimensionMismatch, "model dimensions must lie in [1, 8]");
  if (mode == AuditMode::MFTC) {
    need(static_cast<bool>(spec.Dy_dfdnu), "Dy_dfdnu");
    need(static_cast<bool>(spec.Dy_dgdnu), "Dy_dgdnu");
    need(static_cast<bool>(spec.Dy_dbdnu), "Dy_dbdnu");
  }
}

namespace {

constexpr double kRelFloor = 1e-3;

double step_for(double z) { return 1e-5 * (1.0 + std::abs(z)); }

template <typename F>
Vec fd_gradient(F&& phi, const Vec& z) {
  Vec g(z.size());
  Vec zp = z, zm = z;
  for (int k = 0; k < z.size(); ++k) {
    const double h = step_for(z(k));
    zp(k) = z(k) + h;
    zm(k) = z(k) - h;
    g(k) = (phi(zp) - phi(zm)) / (2.0 * h);
    zp(k) = zm(k) = z(k);
  }
  return g;
}

// Jacobian of a vector map, entry (r, k) = d out_r / d z_k.
template <typename F>
Mat fd_jacobian(F&& phi, const Vec& z, int rows) {
  Mat jac(rows, z.size());
  Vec zp = z, zm = z;
  for (int k = 0; k < z.size(); ++k) {
    const double h = step_for(z(k));
    zp(k) = z(k) + h;
    zm(k) = z(k) - h;
    jac.col(k) = (phi(zp) - phi(zm)) / (2.0 * h);
    zp(k) = zm(k) = z(k);
  }
  return jac;
}

ParticleCloud moved(const ParticleCloud& m, int j, int k, double delta) {
  Eigen::MatrixXd pts = m.points();
  pts(j, k) += delta;
  return ParticleCloud(std::move(pts), m.weights());
}

// d/d(y_j) of a cloud functional, divided by w_j.
template <typename F>
Vec fd_lift_gradient(F&& phi, const ParticleCloud& m, int j) {
  Vec g(m.dim());
  for (int k = 0; k < m.dim(); ++k) {
    const double h = step_for(m.points()(j, k));
    g(k) = (phi(moved(m, j, k, h)) - phi(moved(m, j, k, -h))) / (2.0 * h * m.weight(j));
  }
  return g;
}

template <typename F>
Mat fd_lift_jacobian(F&& phi, const ParticleCloud& m, int j, int rows) {
  Mat jac(rows, m.dim());
  for (int k = 0; k < m.dim(); ++k) {
    const double h = step_for(m.points()(j, k));
    jac.col(k) = (phi(moved(m, j, k, h)) - phi(moved(m, j, k, -h))) / (2.0 * h * m.weight(j));
  }
  return jac;
}

template <typename A, typename B>
double rel_error(const A& analytic, const B& fd) {
  if (!analytic.allFinite() || !fd.allFinite())
    throw Error(ErrorCode::NonFiniteValue, "non-finite value during derivative audit");
  if (analytic.rows() != fd.rows() || analytic.cols() != fd.cols())
    throw Error(ErrorCode::DimensionMismatch, "derivative has the wrong shape");
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), kRelFloor);
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

struct Sample {
  double t;
  Vec x, v, p;
  Mat q;
  ParticleCloud m;
  int j;
};

Sample draw_sample(const ModelSpec& spec, const CounterRng& rng, int s) {
  constexpr auto st = CounterRng::kAudit;
  const int cloud = 6;
  int c = 0;
  Sample out;
  out.t = rng.uniform(st, s, c++);
  out.x.resize(spec.n);
  out.p.resize(spec.n);
  out.v.resize(spec.d);
  out.q.resize(spec.n, spec.n);
  for (int k = 0; k < spec.n; ++k) out.x(k) = rng.normal(st, s, c++);
  for (int k = 0; k < spec.n; ++k) out.p(k) = rng.normal(st, s, c++);
  for (int k = 0; k < spec.d; ++k) out.v(k) = rng.normal(st, s, c++);
  for (int k = 0; k < spec.n * spec.n; ++k) out.q(k) = rng.normal(st, s, c++);
  Eigen::MatrixXd pts(cloud, spec.n);
  for (int k = 0; k < spec.n; ++k) {
    const double offset = rng.normal(st, s, c++);
    for (int i = 0; i < cloud; ++i) pts(i, k) = offset + rng.normal(st, s, c++);
  }
  out.m = ParticleCloud(std::move(pts));
  out.j = static_cast<int>(rng.uniform(st, s, c++) * cloud) % cloud;
  return out;
}

class Tracker {
 public:
  explicit Tracker(double tol) : tol_(tol) {}
  void record(const std::string& name, double err) {
    for (auto& e : entries_) {
      if (e.name == name) {
        e.max_rel_error = std::max(e.max_rel_error, err);
        e.flagged = e.max_rel_error > tol_;
        return;
      }
    }
    entries_.push_back({name, err, err > tol_});
  }
  std::vector<AuditEntry> take() { return std::move(entries_); }

 private:
  double tol_;
  std::vector<AuditEntry> entries_;
};

}  // namespace

AuditReport finite_difference_audit(const ModelSpec& spec, int sample_count, std::uint64_t seed,
                                    AuditMode mode) {
  if (sample_count < 1) throw Error(ErrorCode::InvalidArgument, "sample_count must be >= 1");
  require_derivatives(spec, mode);
  AuditReport report;
  report.samples = sample_count;
  Tracker tr(report.tolerance);
  const CounterRng rng(seed);
  const int n = spec.n;

  for (int s = 0; s < sample_count; ++s) {
    const Sample smp = draw_sample(spec, rng, s);
    const double t = smp.t;
    const Vec& x = smp.x;
    const Vec& v = smp.v;
    const Mat& q = smp.q;
    const ParticleCloud& m = smp.m;

    const double fval = spec.f(t, x, m, v);
    if (!std::isfinite(fval) || !std::isfinite(spec.g(x, m)))
      throw Error(ErrorCode::NonFiniteValue, "non-finite cost during derivative audit");

    tr.record("Dx_f", rel_error(spec.Dx_f(t, x, m, v),
                                fd_gradient([&](const Vec& z) { return spec.f(t, z, m, v); }, x)));
    tr.record("Dv_f", rel_error(spec.Dv_f(t, x, m, v),
                                fd_gradient([&](const Vec& z) { return spec.f(t, x, m, z); }, v)));
    tr.record("Dx_g", rel_error(spec.Dx_g(x, m),
                                fd_gradient([&](const Vec& z) { return spec.g(z, m); }, x)));
    tr.record("Dx_b", rel_error(spec.Dx_b(t, x, m, v),
                                fd_jacobian([&](const Vec& z) { return spec.b(t, z, m, v); }, x, n)));
    tr.record("Dv_b", rel_error(spec.Dv_b(t, x, m, v),
                                fd_jacobian([&](const Vec& z) { return spec.b(t, x, m, z); }, v, n)));

    // Absent sigma contractions are audited against zero.
    const auto pair_x = [&](const Vec& z) { return sigma_pairing(q, spec.sigma(t, z, m, v)); };
    const auto pair_v = [&](const Vec& z) { return sigma_pairing(q, spec.sigma(t, x, m, z)); };
    const Vec zero_n = Vec::Zero(n), zero_d = Vec::Zero(spec.d);
    tr.record("Dx_sigma_q",
              rel_error(spec.Dx_sigma_q ? spec.Dx_sigma_q(t, x, m, v, q) : zero_n, fd_gradient(pair_x, x)));
    tr.record("Dv_sigma_q",
              rel_error(spec.Dv_sigma_q ? spec.Dv_sigma_q(t, x, m, v, q) : zero_d, fd_gradient(pair_v, v)));
    if (!spec.mode_flags.sigma_control_dependent) {
      const Mat s0 = spec.sigma(t, x, m, v);
      const Mat s1 = spec.sigma(t, x, m, (v.array() + 1.0).matrix());
      const double scale = std::max(s0.cwiseAbs().maxCoeff(), 1.0);
      tr.record("sigma_v_independence", (s1 - s0).cwiseAbs().maxCoeff() / scale);
    }

    const int j = smp.j;
    const Vec y = m.point(j);
    if (spec.Dy_dfdnu)
      tr.record("Dy_dfdnu",
                rel_error(spec.Dy_dfdnu(t, x, m, v, y),
                          fd_lift_gradient([&](const ParticleCloud& mm) { return spec.f(t, x, mm, v); }, m, j)));
    if (spec.Dy_dgdnu)
      tr.record("Dy_dgdnu",
                rel_error(spec.Dy_dgdnu(x, m, y),
                          fd_lift_gradient([&](const ParticleCloud& mm) { return spec.g(x, mm); }, m, j)));
    if (spec.Dy_dbdnu)
      tr.record("Dy_dbdnu",
                rel_error(spec.Dy_dbdnu(t, x, m, v, y),
                          fd_lift_jacobian([&](const ParticleCloud& mm) { return spec.b(t, x, mm, v); }, m, j, n)));
    if (spec.Dy_dsigmadnu_q)
      tr.record("Dy_dsigmadnu_q",
                rel_error(spec.Dy_dsigmadnu_q(t, x, m, v, y, q),
                          fd_lift_gradient(
                              [&](const ParticleCloud& mm) { return sigma_pairing(q, spec.sigma(t, x, mm, v)); }, m, j)));

    if (spec.f_split) {
      const FSplit& fs = *spec.f_split;
      const double sum = fs.f0(t, x, m, v) + fs.f1(t, x, m, v);
      // Normalized so that the 1e-12 sum tolerance maps onto the audit tolerance.
      tr.record("f_split_sum", std::abs(sum - fval) / (1e-12 * (1.0 + std::abs(fval))) * report.tolerance);
      tr.record("Dx_f0", rel_error(fs.Dx_f0(t, x, m, v),
                                   fd_gradient([&](const Vec& z) { return fs.f0(t, z, m, v); }, x)));
      tr.record("Dv_f0", rel_error(fs.Dv_f0(t, x, m, v),
                                   fd_gradient([&](const Vec& z) { return fs.f0(t, x, m, z); }, v)));
      tr.record("Dx_f1", rel_error(fs.Dx_f1(t, x, m, v),
                                   fd_gradient([&](const Vec& z) { return fs.f1(t, z, m, v); }, x)));
      tr.record("Dv_f1", rel_error(fs.Dv_f1(t, x, m, v),
                                   fd_gradient([&](const Vec& z) { return fs.f1(t, x, m, z); }, v)));
    }
  }
  report.entries = tr.take();
  return report;
}

}  // namespace mfg
