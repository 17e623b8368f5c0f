#pragma once

#include "mfg/model.hpp"
#include "mfg/report.hpp"

#include <cstdint>
#include <functional>
#include <optional>

namespace mfg {

class SingularDvbError : public Error {
 public:
  SingularDvbError(const std::string& what, Witness witness)
      : Error(ErrorCode::SingularDvb, what), witness_(std::move(witness)) {}
  const Witness& witness() const { return witness_; }

 private:
  Witness witness_;
};

struct NewtonOptions {
  double tol = 1e-9;
  int max_iter = 100;
  double fd_step = 1e-6;
};

struct HamiltonianPoint {
  double t = 0.0;
  Vec x;
  const ParticleCloud* m = nullptr;
  Vec p;
  Mat q;
  Vec v_hat;
  double H_value = 0.0;
};

// L = p^T b + sum_j (q^j)^T sigma^j + f.
double lagrangian(const ModelSpec& spec, double t, const Vec& x, const ParticleCloud& m, const Vec& v,
                  const Vec& p, const Mat& q);

// D_v L = (D_v b)^T p + sum_j (D_v sigma^j)^T q^j + D_v f.
Vec lagrangian_dv(const ModelSpec& spec, double t, const Vec& x, const ParticleCloud& m, const Vec& v,
                  const Vec& p, const Mat& q);

// Damped Newton with Armijo backtracking on |D_v L|^2. Requires the
// symmetrized v-Hessian to stay positive definite; throws SingularHessian
// otherwise and NoConvergence after max_iter steps.
Vec minimize_hamiltonian(const ModelSpec& spec, double t, const Vec& x, const ParticleCloud& m,
                         const Vec& p, const Mat& q, const std::optional<Vec>& v_init = std::nullopt,
                         const NewtonOptions& opts = {});

// Root of D_v L = 0 without the convexity requirement; only the Jacobian
// must be nonsingular. Used for generic drifts and concavity diagnostics.
Vec solve_stationarity(const ModelSpec& spec, double t, const Vec& x, const ParticleCloud& m,
                       const Vec& p, const Mat& q, const std::optional<Vec>& v_init = std::nullopt,
                       const NewtonOptions& opts = {});

struct HamiltonianGradients {
  Vec DpH;
  Mat DqH;
  Vec DxH;
  double H = 0.0;
};

// Envelope formulas at a stationary v_hat; throws StaleMinimizer when the
// stationarity residual there exceeds 10 * tol.
HamiltonianGradients hamiltonian_gradients(const ModelSpec& spec, double t, const Vec& x,
                                           const ParticleCloud& m, const Vec& p, const Mat& q,
                                           const Vec& v_hat, double tol = 1e-9);

// H evaluated by minimizing from scratch.
double hamiltonian_value(const ModelSpec& spec, double t, const Vec& x, const ParticleCloud& m,
                         const Vec& p, const Mat& q, const NewtonOptions& opts = {});

struct PointSample {
  double t = 0.0;
  Vec x;
  ParticleCloud m;
  Vec v;
};

// Random (t, x, m, v) draws: Gaussian coordinates with the given scale and
// small clouds with a random offset.
std::vector<PointSample> sample_points(const ModelSpec& spec, int count, std::uint64_t seed,
                                       double scale = 1.0, int cloud_size = 8);

// Cone property of the costate for invertible control Jacobians:
// p = -((D_v b)(D_v b)^T)^{-1} (D_v b) D_v f compared to
// (L^2/lambda_b)(1 + |x| + W2(m, delta_0) + |v|).
CheckReport cone_bound_check(const ModelSpec& spec, const std::vector<PointSample>& samples);

// Sign of D_p^2 H in one dimension from
// |D_v b|^2 / ((D_v b)(D_v^2 b)(D_v f)/|D_v b|^2 - D_v^2 f); pass iff negative everywhere.
CheckReport p_concavity_check_1d(const ModelSpec& spec, const std::vector<PointSample>& samples);

}  // namespace mfg
