#pragma once

#include "mfg/fbsde.hpp"
#include "mfg/model.hpp"
#include "mfg/report.hpp"

#include <cstdint>
#include <functional>
#include <utility>

namespace mfg {

enum class PairScheme { Independent, Shift, Rescale, Antithetic, Mixed };

const char* to_string(PairScheme s);
PairScheme pair_scheme_from_string(const std::string& s);

// Coupled clouds (xi, xi') on a common particle index. Base clouds are
// Gaussian with a random mean offset; the partner is an independent draw, a
// deterministic shift xi + c, a rescaling a * xi, or the reflection -xi.
// Mixed cycles through all four.
struct CouplingSampler {
  std::uint64_t seed = 0;
  PairScheme scheme = PairScheme::Mixed;
  int cloud_size = 32;
  double spread = 1.0;
  double offset_scale = 1.0;

  PairScheme scheme_for(int k) const;
  std::pair<ParticleCloud, ParticleCloud> pair(int n, int k) const;
  ParticleCloud single(int n, int k) const;
};

using LiftedGradient = std::function<Vec(const Vec& x, const ParticleCloud& m)>;

// Minimum over sampled couplings of
// (E[(D(xi', L(xi')) - D(xi, L(xi))) . (xi' - xi)] + lambda_m ||xi' - xi||^2) / ||xi' - xi||^2.
// Pass means "not falsified"; a fail carries the violating coupling.
CheckReport check_displacement_quasi(const LiftedGradient& grad, int n, double lambda_m,
                                     const CouplingSampler& sampler, int samples);

// Separable running cost f = f0(x, m) + f1(x, v): convexity moduli of f1,
// quasi-monotonicity of f0, and lambda_m <= 2 lambda_x.
CheckReport check_condition_separable(const ModelSpec& spec, const CouplingSampler& sampler, int samples);

// Strong convexity and small mean field effect of f:
// lambda_x >= L_v^2 / (8 lambda_v) + L_x / 2.
CheckReport check_small_mean_field_effect(const ModelSpec& spec, const CouplingSampler& sampler, int samples);

// Split running cost f = f0 + f1 with the parameter inequality
// 2 lambda_x - lambda_m >= L_x + (L_v + 3 l_x)^2 / (4 lambda_v).
CheckReport check_condition_split(const ModelSpec& spec, const CouplingSampler& sampler, int samples);

struct BetaCheckOptions {
  double t0 = 0.0;
  double T = 1.0;
  bool estimate_K = true;
};

// Fits (Lambda, Gamma) with LHS <= -Lambda ||d beta||^2 + Gamma (||dX||^2 + ||dP||^2 + ||dQ||^2)
// on all sampled tuples: Gamma is the smallest feasible value and Lambda the
// largest compatible with it. Also checks E[(G(X') - G(X)) . (X' - X)] >= 0.
CheckReport check_beta_monotonicity(const LiftedCoefficients& coeffs, const CouplingSampler& sampler, int samples,
                                    const BetaCheckOptions& opts = {});

// Lifted convexity of g and of f with the linear functional derivative terms;
// reports lambda_v, lambda_x and lambda_m moduli.
CheckReport check_mftc_convexity(const ModelSpec& spec, const CouplingSampler& sampler, int samples);

struct GenericDriftOptions {
  // Scale of the sampled states and cloud offsets in the weighted drift
  // quotient; 0 evaluates at x = 0 and m = delta_0.
  double state_scale = 1.0;
};

// (D_v b)(D_v b)^T >= lambda_b, the weighted second-order quotient of b
// against declared L_b constants, and the closed-form parameter inequalities.
CheckReport check_generic_drift(const ModelSpec& spec, const CouplingSampler& sampler, int samples,
                                const GenericDriftOptions& opts = {});

// Closed-form thresholds.
double threshold_big_lambda(double T, double K_beta, double Gamma_beta);
double threshold_big_lambda_reduced(double T, double K_beta, double Gamma_beta);

enum class CLTVariant { MpFull, MpReduced, FbsdeLocal, FbsdeLocalReduced };
const char* to_string(CLTVariant v);
CLTVariant clt_variant_from_string(const std::string& s);
double threshold_c_LT(double L, double T, CLTVariant variant);

struct BudgetResult {
  double A = 0.0;
  double D = 0.0;
  bool budget_ok = false;
};

// D = 2 lambda_x - lambda_m - L_x - (L_v + 3 l_x)^2 / (4 lambda_v),
// A = (L lambda_v + L sqrt(lambda_v^2 + lambda_v D)) / (lambda_v D), ok iff A l_g < 1.
BudgetResult anti_monotonicity_budget(double lambda_v, double lambda_x, double lambda_m, double L_x, double L_v,
                                      double l_x, double L, double l_g);

struct GenericDriftMargins {
  double theorem_margin = 0.0;     // 2 lambda_x - lambda_m minus the generic-drift right side
  double lambda_v_margin = 0.0;    // lambda_v - 2 L^2 L_b^v / lambda_b
  double mftc_x_margin = 0.0;      // lambda_x + lambda_m - L^2 (L_b^x + L_b^m) / lambda_b
  double mftc_v_margin = 0.0;      // lambda_v - L^2 L_b^v / lambda_b
};

// Needs L, lambda_b, lambda_v, lambda_x; the remaining constants default to 0.
GenericDriftMargins generic_drift_margins(const ConstantsLedger& c);

}  // namespace mfg
