#include "mfg/monotonicity.hpp"

#include <cmath>

namespace mfg {

double threshold_big_lambda(double T, double K, double Gamma) {
  if (!(T > 0.0) || !(K > 0.0) || !(Gamma >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "need T > 0, K_beta > 0, Gamma_beta >= 0");
  const double a = T * (T + 1.0) * K * K;
  const double e = std::exp(2.0 * a);
  return 4.0 * a * e * (1.0 + a * e) * Gamma;
}

double threshold_big_lambda_reduced(double T, double K, double Gamma) {
  if (!(T > 0.0) || !(K > 0.0) || !(Gamma >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "need T > 0, K_beta > 0, Gamma_beta >= 0");
  return 2.0 * T * (T + 1.0) * K * K * Gamma;
}

const char* to_string(CLTVariant v) {
  switch (v) {
    case CLTVariant::MpFull: return "mp_full";
    case CLTVariant::MpReduced: return "mp_reduced";
    case CLTVariant::FbsdeLocal: return "fbsde_local";
    case CLTVariant::FbsdeLocalReduced: return "fbsde_local_reduced";
  }
  return "unknown";
}

CLTVariant clt_variant_from_string(const std::string& s) {
  for (auto v : {CLTVariant::MpFull, CLTVariant::MpReduced, CLTVariant::FbsdeLocal, CLTVariant::FbsdeLocalReduced})
    if (s == to_string(v)) return v;
  throw Error(ErrorCode::ConfigError, "unknown c(L,T) variant '" + s + "'");
}

double threshold_c_LT(double L, double T, CLTVariant variant) {
  if (!(L > 0.0) || !(T >= 0.0)) throw Error(ErrorCode::InvalidArgument, "need L > 0 and T >= 0");
  const double tt = T * (T + 1.0);
  switch (variant) {
    case CLTVariant::MpFull: {
      const double a = 4.0 * L * L * tt;
      return a * std::exp(a);
    }
    case CLTVariant::MpReduced:
      return 2.0 * L * L * tt;
    case CLTVariant::FbsdeLocal: {
      const double e = std::exp(32.0 * tt * L * L);
      const double A = 64.0 * tt * L * L * L * e * (1.0 + 16.0 * tt * L * L * e);
      return A + std::sqrt(A * A + 4.0 * A);
    }
    case CLTVariant::FbsdeLocalReduced: {
      const double A = 2.0 * tt * L * L * L;
      return A + std::sqrt(A * A + 4.0 * A);
    }
  }
  return 0.0;
}

BudgetResult anti_monotonicity_budget(double lambda_v, double lambda_x, double lambda_m, double L_x, double L_v,
                                      double l_x, double L, double l_g) {
  if (!(lambda_v > 0.0)) throw Error(ErrorCode::NonPositiveDenominator, "lambda_v must be positive");
  BudgetResult r;
  r.D = 2.0 * lambda_x - lambda_m - L_x - (L_v + 3.0 * l_x) * (L_v + 3.0 * l_x) / (4.0 * lambda_v);
  if (!(r.D > 0.0)) throw Error(ErrorCode::NonPositiveDenominator, "2 lambda_x - lambda_m - L_x - (L_v + 3 l_x)^2/(4 lambda_v) <= 0");
  r.A = (L * lambda_v + L * std::sqrt(lambda_v * lambda_v + lambda_v * r.D)) / (lambda_v * r.D);
  r.budget_ok = r.A * l_g < 1.0;
  return r;
}

GenericDriftMargins generic_drift_margins(const ConstantsLedger& c) {
  if (!c.L || !c.lambda_b || !c.lambda_v || !c.lambda_x)
    throw Error(ErrorCode::ConfigError, "generic-drift inequalities need L, lambda_b, lambda_v, lambda_x");
  const double L = *c.L, lb = *c.lambda_b, lv = *c.lambda_v, lx = *c.lambda_x;
  if (!(lb > 0.0) || !(lv > 0.0)) throw Error(ErrorCode::NonPositiveDenominator, "lambda_b and lambda_v must be positive");
  const double lm = c.lambda_m.value_or(0.0), Lx = c.L_x.value_or(0.0), Lv = c.L_v.value_or(0.0);
  const double lxs = c.l_x.value_or(0.0), lms = c.l_m.value_or(0.0);
  const double bx = c.L_b_x.value_or(0.0), bv = c.L_b_v.value_or(0.0), bm = c.L_b_m.value_or(0.0);
  const double L2 = L * L, L3 = L2 * L, lb2 = lb * lb;

  const double first = (L2 * (2.0 * lms + 2.0 * bx + bm) * lb + 3.0 * L3 * (bx + bm) * lms) / lb2;
  const double inner = Lv + 3.0 * lxs + (L2 * (lms + bm) * lb + 3.0 * L3 * bv * lms) / lb2;
  GenericDriftMargins m;
  m.theorem_margin = 2.0 * lx - lm - (Lx + first + inner * inner / (4.0 * lv));
  m.lambda_v_margin = lv - 2.0 * L2 * bv / lb;
  m.mftc_x_margin = lx + lm - L2 * (bx + bm) / lb;
  m.mftc_v_margin = lv - L2 * bv / lb;
  return m;
}

}  // namespace mfg
