#pragma once

#include "mfg/measure.hpp"
#include "mfg/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace mfg {

struct TimeGrid {
  double t0 = 0.0;
  double T = 1.0;
  int steps = 100;

  double dt() const { return (T - t0) / steps; }
  double node(int i) const { return t0 + (T - t0) * static_cast<double>(i) / steps; }
  int nodes() const { return steps + 1; }
  void validate() const;
};

// Brownian increments for N particles: noise[i] is the N x n matrix of
// increments over [t_i, t_{i+1}], each entry ~ Normal(0, dt).
struct PathBundle {
  std::vector<Eigen::MatrixXd> noise;
  ParticleCloud initial;
  std::uint64_t seed = 0;

  int particles() const { return initial.size(); }
  int dim() const { return initial.dim(); }
};

PathBundle make_path_bundle(const ParticleCloud& initial, const TimeGrid& grid, std::uint64_t seed);

// N particles with independent Normal(mean_k, std_k^2) coordinates.
ParticleCloud gaussian_cloud(int N, const Vec& mean, const Vec& std, std::uint64_t seed);

// Q rows hold n x n matrices column-major: entry (k, j) at column k + n * j,
// so the j-th matrix column pairs with the j-th Brownian coordinate.
inline Mat unpack_square(const Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>& row, int n) {
  Mat m(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) m(k, j) = row(k + n * j);
  return m;
}

inline void pack_square(const Mat& m, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  const int n = static_cast<int>(m.rows());
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) row(k + n * j) = m(k, j);
}

struct StageRecord {
  double gamma = 1.0;
  int sweeps = 0;
  double final_change = 0.0;
};

struct SolutionPaths {
  std::vector<Eigen::MatrixXd> X;  // per node, N x n
  std::vector<Eigen::MatrixXd> P;  // per node, N x n
  std::vector<Eigen::MatrixXd> Q;  // per node, N x n^2
  std::vector<Eigen::MatrixXd> v;  // per node, N x d
  std::vector<double> residuals;   // sup-norm change in (X, P) per sweep
  std::vector<StageRecord> stages;
  int sweeps = 0;
  bool converged = false;

  int particles() const { return X.empty() ? 0 : static_cast<int>(X.front().rows()); }
};

struct CoefficientEval {
  Eigen::MatrixXd B;     // N x n
  Eigen::MatrixXd A;     // N x n^2
  Eigen::MatrixXd F;     // N x n
  Eigen::MatrixXd beta;  // N x d
};

enum CoefficientPart : unsigned {
  kPartB = 1u,
  kPartA = 2u,
  kPartF = 4u,
  kPartBeta = 8u,
  kPartAll = 15u,
};

// The lifted maps acting on particle arrays. `eval` returns the requested
// parts in one pass so that per-particle work (such as solving for the
// optimal control) is shared; v_guess, when given, warm-starts that work.
struct LiftedCoefficients {
  int n = 1;
  int d = 1;
  std::function<CoefficientEval(double t, const Eigen::MatrixXd& X, const Eigen::MatrixXd& P,
                                const Eigen::MatrixXd& Q, const Eigen::MatrixXd* v_guess, unsigned parts)>
      eval;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd& X)> G;

  Eigen::MatrixXd B(double t, const Eigen::MatrixXd& X, const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q) const {
    return eval(t, X, P, Q, nullptr, kPartB).B;
  }
  Eigen::MatrixXd A(double t, const Eigen::MatrixXd& X, const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q) const {
    return eval(t, X, P, Q, nullptr, kPartA).A;
  }
  Eigen::MatrixXd F(double t, const Eigen::MatrixXd& X, const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q) const {
    return eval(t, X, P, Q, nullptr, kPartF).F;
  }
  Eigen::MatrixXd beta(double t, const Eigen::MatrixXd& X, const Eigen::MatrixXd& P,
                       const Eigen::MatrixXd& Q) const {
    return eval(t, X, P, Q, nullptr, kPartBeta).beta;
  }
};

// The homotopy member: B, F and G multiplied by gamma, A untouched.
LiftedCoefficients scale_coefficients(const LiftedCoefficients& c, double gamma);

struct PicardOptions {
  double damping = 0.5;
  int max_sweeps = 200;
  double tol = 1e-6;
  int basis_degree = 2;
  double blowup = 1e8;
};

class FbsdeNoConvergence : public Error {
 public:
  FbsdeNoConvergence(const std::string& what, SolutionPaths best)
      : Error(ErrorCode::NoConvergence, what), best_(std::move(best)) {}
  const SolutionPaths& best() const { return best_; }

 private:
  SolutionPaths best_;
};

class StageFailureError : public Error {
 public:
  StageFailureError(const std::string& what, double gamma_star, double gamma_failed,
                    std::vector<StageRecord> stages, std::vector<double> residuals)
      : Error(ErrorCode::StageFailure, what),
        gamma_star_(gamma_star),
        gamma_failed_(gamma_failed),
        stages_(std::move(stages)),
        residuals_(std::move(residuals)) {}

  double gamma_star() const { return gamma_star_; }
  double gamma_failed() const { return gamma_failed_; }
  const std::vector<StageRecord>& stages() const { return stages_; }
  const std::vector<double>& residuals() const { return residuals_; }

 private:
  double gamma_star_;
  double gamma_failed_;
  std::vector<StageRecord> stages_;
  std::vector<double> residuals_;
};

// Damped Picard sweeps: Euler-Maruyama forward with frozen (P, Q), then a
// regression-based backward pass P_i = E[P_{i+1} | X_i] - F dt and
// Q_i = E[P_{i+1} dB_i^T | X_i] / dt. `warm` seeds P, Q and the control guess.
SolutionPaths solve_fbsde_picard(const LiftedCoefficients& coeffs, const TimeGrid& grid,
                                 const PathBundle& paths, const PicardOptions& opts = {},
                                 const SolutionPaths* warm = nullptr);

// Runs the gamma-scaled family along the schedule, warm-starting each stage.
// The schedule is either {1} or strictly increasing from a value <= 0.2 to 1.
SolutionPaths solve_fbsde_continuation(const LiftedCoefficients& coeffs, const TimeGrid& grid,
                                       const PathBundle& paths, const std::vector<double>& gamma_schedule,
                                       const PicardOptions& opts = {});

void validate_gamma_schedule(const std::vector<double>& schedule);

// Long format: particle,node,time,X1..Xn,P1..Pn,v1..vd.
void write_paths_csv(std::ostream& os, const SolutionPaths& s, const TimeGrid& grid);

}  // namespace mfg
