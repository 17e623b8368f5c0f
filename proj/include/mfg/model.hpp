#pragma once

#include "mfg/measure.hpp"
#include "mfg/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mfg {

// Measure arguments are always particle clouds. q is an n x n matrix whose
// j-th column pairs with the j-th column of sigma.
using ScalarFn = std::function<double(double t, const Vec& x, const ParticleCloud& m, const Vec& v)>;
using VecFn = std::function<Vec(double t, const Vec& x, const ParticleCloud& m, const Vec& v)>;
using MatFn = std::function<Mat(double t, const Vec& x, const ParticleCloud& m, const Vec& v)>;
using TerminalFn = std::function<double(const Vec& x, const ParticleCloud& m)>;
using TerminalGradFn = std::function<Vec(const Vec& x, const ParticleCloud& m)>;

// sum_j (D sigma^j)^T q^j, the derivative of trace(q^T sigma) in x or v.
using SigmaContractionFn =
    std::function<Vec(double t, const Vec& x, const ParticleCloud& m, const Vec& v, const Mat& q)>;

// y-gradients of linear functional derivatives, evaluated at the point y.
using DnuVecFn =
    std::function<Vec(double t, const Vec& x, const ParticleCloud& m, const Vec& v, const Vec& y)>;
using DnuMatFn =
    std::function<Mat(double t, const Vec& x, const ParticleCloud& m, const Vec& v, const Vec& y)>;
using DnuTerminalFn = std::function<Vec(const Vec& x, const ParticleCloud& m, const Vec& y)>;
using DnuSigmaFn = std::function<Vec(double t, const Vec& x, const ParticleCloud& m, const Vec& v,
                                     const Vec& y, const Mat& q)>;

struct ConstantsLedger {
  std::optional<double> L, lambda, lambda_x, lambda_v, lambda_m, L_x, L_v, l_x, l_m, l_g, L_b_x,
      L_b_v, L_b_m, lambda_b;

  // Throws ConfigError on a non-finite or (except lambda_m) negative entry.
  void validate() const;
};

struct FSplit {
  ScalarFn f0, f1;
  VecFn Dx_f0, Dv_f0, Dx_f1, Dv_f1;
};

struct ModeFlags {
  bool drift_linear = false;
  bool sigma_control_dependent = false;
  // The y-gradients of every linear functional derivative are affine in y,
  // which lets the mean field type assembly average in O(N) instead of O(N^2).
  bool dnu_affine_in_y = false;
};

struct ModelSpec {
  std::string name;
  int n = 1;
  int d = 1;

  VecFn b;
  MatFn sigma;
  ScalarFn f;
  TerminalFn g;

  VecFn Dx_f, Dv_f;
  TerminalGradFn Dx_g;
  MatFn Dx_b;  // n x n, entry (r, k) = d b_r / d x_k
  MatFn Dv_b;  // n x d

  // Absent means sigma does not depend on that argument.
  SigmaContractionFn Dx_sigma_q, Dv_sigma_q;

  DnuVecFn Dy_dfdnu;
  DnuTerminalFn Dy_dgdnu;
  DnuMatFn Dy_dbdnu;  // n x n, entry (r, k) = d/dy_k of db_r/dnu
  DnuSigmaFn Dy_dsigmadnu_q;

  std::optional<FSplit> f_split;
  ConstantsLedger constants;
  ModeFlags mode_flags;

  bool has_mftc_derivatives() const { return Dy_dfdnu && Dy_dgdnu; }
};

enum class AuditMode { MFG, MFTC, Generic };

struct AuditEntry {
  std::string name;
  double max_rel_error = 0.0;
  bool flagged = false;
};

struct AuditReport {
  std::vector<AuditEntry> entries;
  int samples = 0;
  double tolerance = 1e-5;

  bool passed() const;
  const AuditEntry* find(const std::string& name) const;
};

// Compares every supplied analytic derivative with central differences of its
// parent at sampled (t, x, m, v, y) tuples. Linear functional derivatives are
// checked through the lifting identity: moving particle j of the cloud by h
// changes the functional by w_j * D_y(dk/dnu)(y_j) * h.
AuditReport finite_difference_audit(const ModelSpec& spec, int sample_count, std::uint64_t seed,
                                    AuditMode mode = AuditMode::MFG);

// Throws MissingDerivative when a callable needed by `mode` is absent.
void require_derivatives(const ModelSpec& spec, AuditMode mode);

// trace(q^T sigma) = sum_j (q^j)^T sigma^j.
inline double sigma_pairing(const Mat& q, const Mat& sigma) { return (q.array() * sigma.array()).sum(); }

// Named catalog. Parameters not listed in `params` keep their defaults;
// unknown parameter names raise ConfigError.
using ParamMap = std::map<std::string, double>;

ModelSpec make_model(const std::string& name, const ParamMap& params = {});
std::vector<std::string> catalog_names();
ParamMap catalog_defaults(const std::string& name);

}  // namespace mfg
