#include "mfg/fbsde.hpp"

#include "mfg/parallel.hpp"
#include "mfg/regression.hpp"
#include "mfg/rng.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace mfg {

void TimeGrid::validate() const {
  if (!(std::isfinite(t0) && std::isfinite(T)) || t0 < 0.0 || !(t0 < T))
    throw Error(ErrorCode::InvalidArgument, "time grid needs 0 <= t0 < T");
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "time grid needs at least one step");
}

PathBundle make_path_bundle(const ParticleCloud& initial, const TimeGrid& grid, std::uint64_t seed) {
  grid.validate();
  const CounterRng rng(seed);
  const int N = initial.size(), n = initial.dim();
  const double sdt = std::sqrt(grid.dt());
  PathBundle pb;
  pb.initial = initial;
  pb.seed = seed;
  pb.noise.assign(grid.steps, Eigen::MatrixXd(N, n));
  for (int i = 0; i < grid.steps; ++i)
    for (int p = 0; p < N; ++p)
      for (int k = 0; k < n; ++k) pb.noise[i](p, k) = sdt * rng.normal(CounterRng::kNoise, p, i, k);
  return pb;
}

ParticleCloud gaussian_cloud(int N, const Vec& mean, const Vec& std, std::uint64_t seed) {
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "cloud needs at least one particle");
  if (mean.size() != std.size()) throw Error(ErrorCode::DimensionMismatch, "mean and std differ in size");
  const CounterRng rng(seed);
  Eigen::MatrixXd pts(N, mean.size());
  for (int p = 0; p < N; ++p)
    for (int k = 0; k < mean.size(); ++k)
      pts(p, k) = mean(k) + std(k) * rng.normal(CounterRng::kInitial, p, 0, k);
  return ParticleCloud(std::move(pts));
}

LiftedCoefficients scale_coefficients(const LiftedCoefficients& c, double gamma) {
  LiftedCoefficients out = c;
  out.eval = [c, gamma](double t, const Eigen::MatrixXd& X, const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q,
                        const Eigen::MatrixXd* v_guess, unsigned parts) {
    CoefficientEval e = c.eval(t, X, P, Q, v_guess, parts);
    if (parts & kPartB) e.B *= gamma;
    if (parts & kPartF) e.F *= gamma;
    return e;
  };
  out.G = [c, gamma](const Eigen::MatrixXd& X) { return Eigen::MatrixXd(gamma * c.G(X)); };
  return out;
}

void validate_gamma_schedule(const std::vector<double>& s) {
  if (s.size() == 1 && s[0] == 1.0) return;
  if (s.empty() || s.front() > 0.2 || s.front() < 0.0 || s.back() != 1.0)
    throw Error(ErrorCode::InvalidArgument, "gamma schedule must start in [0, 0.2] and end at 1");
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i] > s[i - 1])) throw Error(ErrorCode::InvalidArgument, "gamma schedule must be strictly increasing");
}

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* what, int node) {
  if (!m.allFinite()) {
    std::ostringstream os;
    os << "non-finite " << what << " at node " << node;
    throw Error(ErrorCode::NonFiniteValue, os.str());
  }
}

void check_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols)
    throw Error(ErrorCode::DimensionMismatch, std::string("coefficient ") + what + " has the wrong shape");
}

}  // namespace

SolutionPaths solve_fbsde_picard(const LiftedCoefficients& coeffs, const TimeGrid& grid, const PathBundle& paths,
                                 const PicardOptions& opts, const SolutionPaths* warm) {
  grid.validate();
  if (!(opts.damping > 0.0 && opts.damping <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "damping must lie in (0, 1]");
  if (opts.max_sweeps < 1 || !(opts.tol > 0.0))
    throw Error(ErrorCode::InvalidArgument, "max_sweeps must be >= 1 and tol > 0");
  const int N = paths.particles(), n = coeffs.n, d = coeffs.d, K = grid.steps, nn = n * n;
  if (paths.dim() != n) throw Error(ErrorCode::DimensionMismatch, "initial cloud dimension differs from n");
  if (static_cast<int>(paths.noise.size()) != K)
    throw Error(ErrorCode::DimensionMismatch, "noise has the wrong number of steps");
  for (const auto& z : paths.noise) check_shape(z, N, n, "noise");
  const double dt = grid.dt();
  const double theta = opts.damping;

  SolutionPaths s;
  if (warm) {
    if (static_cast<int>(warm->X.size()) != K + 1 || warm->particles() != N)
      throw Error(ErrorCode::DimensionMismatch, "warm start does not match the grid");
    s.X = warm->X;
    s.P = warm->P;
    s.Q = warm->Q;
    s.v = warm->v;
  } else {
    s.X.assign(K + 1, paths.initial.points());
    s.P.assign(K + 1, Eigen::MatrixXd::Zero(N, n));
    s.Q.assign(K + 1, Eigen::MatrixXd::Zero(N, nn));
    s.v.assign(K + 1, Eigen::MatrixXd::Zero(N, d));
  }

  std::vector<Eigen::MatrixXd> Xn(K + 1), Pn(K + 1), Qn(K + 1);
  SolutionPaths best = s;
  double best_change = std::numeric_limits<double>::infinity();

  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    // Forward Euler-Maruyama with frozen (P, Q).
    Xn[0] = paths.initial.points();
    for (int i = 0; i < K; ++i) {
      const CoefficientEval e = coeffs.eval(grid.node(i), Xn[i], s.P[i], s.Q[i], &s.v[i], kPartB | kPartA | kPartBeta);
      check_shape(e.B, N, n, "B");
      check_shape(e.A, N, nn, "A");
      check_finite(e.B, "drift", i);
      check_finite(e.A, "diffusion", i);
      s.v[i] = e.beta;
      Xn[i + 1].resize(N, n);
      const Eigen::MatrixXd& dB = paths.noise[i];
      parallel_for(N, [&](int p) {
        const Mat a = unpack_square(e.A.row(p), n);
        Xn[i + 1].row(p) = Xn[i].row(p) + dt * e.B.row(p) + (a * dB.row(p).transpose()).transpose();
      });
      check_finite(Xn[i + 1], "state", i + 1);
    }

    // Backward regression pass.
    Pn[K] = coeffs.G(Xn[K]);
    check_shape(Pn[K], N, n, "G");
    check_finite(Pn[K], "terminal costate", K);
    for (int i = K - 1; i >= 0; --i) {
      const Eigen::MatrixXd& dB = paths.noise[i];
      Eigen::MatrixXd targets(N, n + nn);
      targets.leftCols(n) = Pn[i + 1];
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          targets.col(n + k + n * j) = Pn[i + 1].col(k).cwiseProduct(dB.col(j)) / dt;
      const PolynomialRegressor reg(Xn[i], opts.basis_degree);
      const Eigen::MatrixXd fit = reg.fit_predict(targets);
      const Eigen::MatrixXd yhat = fit.leftCols(n);
      Qn[i] = fit.rightCols(nn);
      const CoefficientEval e = coeffs.eval(grid.node(i), Xn[i], yhat, Qn[i], &s.v[i], kPartF | kPartBeta);
      check_shape(e.F, N, n, "F");
      s.v[i] = e.beta;
      Pn[i] = yhat - dt * e.F;
      check_finite(Pn[i], "costate", i);
      check_finite(Qn[i], "martingale integrand", i);
    }
    Qn[K] = Qn[K - 1];

    double change = 0.0;
    for (int i = 0; i <= K; ++i) {
      change = std::max(change, (Xn[i] - s.X[i]).cwiseAbs().maxCoeff());
      change = std::max(change, theta * (Pn[i] - s.P[i]).cwiseAbs().maxCoeff());
      s.X[i] = Xn[i];
      s.P[i] = (1.0 - theta) * s.P[i] + theta * Pn[i];
      s.Q[i] = (1.0 - theta) * s.Q[i] + theta * Qn[i];
    }
    s.residuals.push_back(change);
    s.sweeps = sweep;
    if (!std::isfinite(change)) throw Error(ErrorCode::NonFiniteValue, "non-finite sweep change");

    if (change < best_change) {
      best_change = change;
      best = s;
    }
    if (change > opts.blowup) {
      best.residuals = s.residuals;
      std::ostringstream os;
      os << "Picard iteration diverged at sweep " << sweep << " (change " << change << ")";
      throw FbsdeNoConvergence(os.str(), std::move(best));
    }
    if (change <= opts.tol) {
      s.converged = true;
      break;
    }
  }

  if (!s.converged) {
    best.residuals = s.residuals;
    std::ostringstream os;
    os << "Picard iteration did not reach tol " << opts.tol << " in " << opts.max_sweeps
       << " sweeps; best change " << best_change;
    throw FbsdeNoConvergence(os.str(), std::move(best));
  }

  for (int i = 0; i <= K; ++i)
    s.v[i] = coeffs.eval(grid.node(i), s.X[i], s.P[i], s.Q[i], &s.v[i], kPartBeta).beta;
  return s;
}

SolutionPaths solve_fbsde_continuation(const LiftedCoefficients& coeffs, const TimeGrid& grid,
                                       const PathBundle& paths, const std::vector<double>& gamma_schedule,
                                       const PicardOptions& opts) {
  validate_gamma_schedule(gamma_schedule);
  std::vector<StageRecord> stages;
  SolutionPaths cur;
  bool have = false;
  double gamma_ok = 0.0;
  for (const double gamma : gamma_schedule) {
    const LiftedCoefficients cg = scale_coefficients(coeffs, gamma);
    std::vector<double> residuals;
    std::string reason;
    try {
      SolutionPaths next = solve_fbsde_picard(cg, grid, paths, opts, have ? &cur : nullptr);
      stages.push_back({gamma, next.sweeps, next.residuals.empty() ? 0.0 : next.residuals.back()});
      cur = std::move(next);
      have = true;
      gamma_ok = gamma;
      continue;
    } catch (const FbsdeNoConvergence& e) {
      residuals = e.best().residuals;
      reason = e.what();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteValue) throw;
      reason = e.what();
    }
    stages.push_back({gamma, static_cast<int>(residuals.size()),
                      residuals.empty() ? std::numeric_limits<double>::infinity() : residuals.back()});
    std::ostringstream os;
    os << "continuation failed at gamma " << gamma << " after reaching " << gamma_ok << ": " << reason;
    throw StageFailureError(os.str(), gamma_ok, gamma, std::move(stages), std::move(residuals));
  }
  cur.stages = std::move(stages);
  return cur;
}

void write_paths_csv(std::ostream& os, const SolutionPaths& s, const TimeGrid& grid) {
  if (s.X.empty()) return;
  const int N = s.particles();
  const int n = static_cast<int>(s.X[0].cols());
  const int d = s.v.empty() ? 0 : static_cast<int>(s.v[0].cols());
  os.precision(17);
  os << "particle,node,time";
  for (int k = 1; k <= n; ++k) os << ",X" << k;
  for (int k = 1; k <= n; ++k) os << ",P" << k;
  for (int k = 1; k <= d; ++k) os << ",v" << k;
  os << '\n';
  for (int p = 0; p < N; ++p) {
    for (std::size_t i = 0; i < s.X.size(); ++i) {
      os << p << ',' << i << ',' << grid.node(static_cast<int>(i));
      for (int k = 0; k < n; ++k) os << ',' << s.X[i](p, k);
      for (int k = 0; k < n; ++k) os << ',' << s.P[i](p, k);
      for (int k = 0; k < d; ++k) os << ',' << s.v[i](p, k);
      os << '\n';
    }
  }
}

}  // namespace mfg
