#include "mfg/meanfield.hpp"

#include "mfg/parallel.hpp"
#include "mfg/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <sstream>

namespace mfg {

namespace {

enum class Kind { Mfg, Mftc, MfgGeneric, MftcGeneric };

bool is_mftc(Kind k) { return k == Kind::Mftc || k == Kind::MftcGeneric; }
bool is_generic(Kind k) { return k == Kind::MfgGeneric || k == Kind::MftcGeneric; }

void check_preconditions(const ModelSpec& spec, Kind kind) {
  require_derivatives(spec, is_mftc(kind) ? AuditMode::MFTC : AuditMode::MFG);
  spec.constants.validate();
  if (is_generic(kind)) {
    if (!spec.constants.lambda_b || *spec.constants.lambda_b <= 0.0)
      throw Error(ErrorCode::ConfigError, "generic-drift mode needs a declared lambda_b > 0");
  } else if (!spec.constants.lambda_v || *spec.constants.lambda_v <= 0.0) {
    throw Error(ErrorCode::ConfigError, "convex mode needs a declared lambda_v > 0");
  }
}

// y-gradient of the Hamiltonian's linear functional derivative contributed by
// particle j, evaluated at y.
Vec dnu_hamiltonian(const ModelSpec& spec, const AssemblyOptions& opts, double t, const Vec& xj,
                    const ParticleCloud& m, const Vec& vj, const Vec& pj, const Mat& qj, const Vec& y) {
  Vec h = spec.Dy_dfdnu(t, xj, m, vj, y);
  if (opts.include_drift_measure_term) h += spec.Dy_dbdnu(t, xj, m, vj, y).transpose() * pj;
  if (spec.Dy_dsigmadnu_q) h += spec.Dy_dsigmadnu_q(t, xj, m, vj, y, qj);
  return h;
}

// Computes (1/N) sum_j h_j(X_i) for every i, either pairwise or through the
// affine representation h_j(y) = a_j + C_j y.
template <typename H>
Eigen::MatrixXd cloud_average(const Eigen::MatrixXd& X, bool affine, H&& h) {
  const int N = static_cast<int>(X.rows()), n = static_cast<int>(X.cols());
  const double inv = 1.0 / static_cast<double>(N);
  Eigen::MatrixXd out(N, n);
  if (affine) {
    Eigen::MatrixXd a(N, n), c(N, n * n);
    parallel_for(N, [&](int j) {
      const Vec a_j = h(j, Vec::Zero(n));
      a.row(j) = a_j.transpose();
      for (int k = 0; k < n; ++k) {
        const Vec col = h(j, Vec::Unit(n, k)) - a_j;
        c.block(j, k * n, 1, n) = col.transpose();
      }
    });
    Eigen::RowVectorXd a_bar = Eigen::RowVectorXd::Zero(n);
    Eigen::RowVectorXd c_sum = Eigen::RowVectorXd::Zero(n * n);
    for (int j = 0; j < N; ++j) {
      a_bar += a.row(j);
      c_sum += c.row(j);
    }
    a_bar *= inv;
    Eigen::MatrixXd c_bar(n, n);
    for (int k = 0; k < n; ++k) c_bar.col(k) = c_sum.segment(k * n, n).transpose() * inv;
    parallel_for(N, [&](int i) { out.row(i) = a_bar + (c_bar * X.row(i).transpose()).transpose(); });
  } else {
    parallel_for(N, [&](int i) {
      const Vec y = X.row(i).transpose();
      Vec acc = Vec::Zero(n);
      for (int j = 0; j < N; ++j) acc += h(j, y);
      out.row(i) = (acc * inv).transpose();
    });
  }
  return out;
}

LiftedCoefficients assemble(const ModelSpec& spec_in, const AssemblyOptions& opts, Kind kind) {
  check_preconditions(spec_in, kind);
  const auto spec = std::make_shared<const ModelSpec>(spec_in);
  const bool mftc = is_mftc(kind), generic = is_generic(kind);
  const bool affine = spec->mode_flags.dnu_affine_in_y && !opts.force_pairwise;

  LiftedCoefficients c;
  c.n = spec->n;
  c.d = spec->d;
  c.eval = [spec, opts, mftc, generic, affine](double t, const Eigen::MatrixXd& X, const Eigen::MatrixXd& P,
                                               const Eigen::MatrixXd& Q, const Eigen::MatrixXd* v_guess,
                                               unsigned parts) {
    const int N = static_cast<int>(X.rows()), n = spec->n, d = spec->d;
    if (X.cols() != n || P.cols() != n || Q.cols() != n * n || P.rows() != N || Q.rows() != N)
      throw Error(ErrorCode::DimensionMismatch, "particle arrays do not match the model dimension");
    const ParticleCloud m(X);
    CoefficientEval e;
    e.beta.resize(N, d);
    if (parts & kPartB) e.B.resize(N, n);
    if (parts & kPartA) e.A.resize(N, n * n);
    if (parts & kPartF) e.F.resize(N, n);

    parallel_for(N, [&](int i) {
      const Vec x = X.row(i).transpose();
      const Vec p = P.row(i).transpose();
      const Mat q = unpack_square(Q.row(i), n);
      std::optional<Vec> guess;
      if (v_guess && v_guess->rows() == N && v_guess->cols() == d) guess = Vec(v_guess->row(i).transpose());
      const Vec v = generic ? solve_stationarity(*spec, t, x, m, p, q, guess, opts.newton)
                            : minimize_hamiltonian(*spec, t, x, m, p, q, guess, opts.newton);
      e.beta.row(i) = v.transpose();
      if (parts & kPartB) e.B.row(i) = spec->b(t, x, m, v).transpose();
      if (parts & kPartA) pack_square(spec->sigma(t, x, m, v), e.A.row(i));
      if (parts & kPartF) {
        Vec dxh = spec->Dx_b(t, x, m, v).transpose() * p + spec->Dx_f(t, x, m, v);
        if (spec->Dx_sigma_q) dxh += spec->Dx_sigma_q(t, x, m, v, q);
        e.F.row(i) = -dxh.transpose();
      }
    });

    if (mftc && (parts & kPartF)) {
      e.F -= cloud_average(X, affine, [&](int j, const Vec& y) {
        return dnu_hamiltonian(*spec, opts, t, X.row(j).transpose(), m, e.beta.row(j).transpose(),
                               P.row(j).transpose(), unpack_square(Q.row(j), n), y);
      });
    }
    return e;
  };

  c.G = [spec, mftc, affine](const Eigen::MatrixXd& X) {
    const int N = static_cast<int>(X.rows()), n = spec->n;
    if (X.cols() != n) throw Error(ErrorCode::DimensionMismatch, "particle array does not match n");
    const ParticleCloud m(X);
    Eigen::MatrixXd G(N, n);
    parallel_for(N, [&](int i) { G.row(i) = spec->Dx_g(X.row(i).transpose(), m).transpose(); });
    if (mftc) {
      G += cloud_average(X, affine, [&](int j, const Vec& y) { return spec->Dy_dgdnu(X.row(j).transpose(), m, y); });
    }
    return G;
  };
  return c;
}

void check_dvb(const ModelSpec& spec, const SolutionPaths& s, const TimeGrid& grid) {
  const double lb = *spec.constants.lambda_b;
  for (std::size_t i = 0; i < s.X.size(); ++i) {
    const ParticleCloud m(s.X[i]);
    const double t = grid.node(static_cast<int>(i));
    for (int p = 0; p < s.particles(); ++p) {
      const Vec x = s.X[i].row(p).transpose();
      const Vec v = s.v[i].row(p).transpose();
      const Mat dvb = spec.Dv_b(t, x, m, v);
      const Mat gram = dvb * dvb.transpose();
      const double eig = Eigen::SelfAdjointEigenSolver<Mat>(gram, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
      if (eig < 0.5 * lb) {
        Witness w;
        w.description = "(D_v b)(D_v b)^T has eigenvalue below lambda_b / 2 along the solution";
        w.values["node"] = static_cast<double>(i);
        w.values["particle"] = p;
        w.values["min_eigenvalue"] = eig;
        std::ostringstream os;
        os << "minimal eigenvalue " << eig << " below lambda_b/2 at node " << i << ", particle " << p;
        throw SingularDvbError(os.str(), std::move(w));
      }
    }
  }
}

EquilibriumSolution run(const ModelSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                        const SolverParams& params, Kind kind) {
  LiftedCoefficients coeffs;
  switch (kind) {
    case Kind::Mfg: coeffs = assemble_mfg(spec, params.assembly); break;
    case Kind::Mftc: coeffs = assemble_mftc(spec, params.assembly); break;
    case Kind::MfgGeneric: coeffs = assemble_mfg_generic(spec, params.assembly); break;
    case Kind::MftcGeneric: coeffs = assemble_mftc_generic(spec, params.assembly); break;
  }
  EquilibriumSolution sol;
  sol.paths = params.method == SolverMethod::Picard
                  ? solve_fbsde_picard(coeffs, grid, paths, params.picard)
                  : solve_fbsde_continuation(coeffs, grid, paths, params.gamma_schedule, params.picard);
  if (is_generic(kind)) check_dvb(spec, sol.paths, grid);
  sol.measure_flow = measure_flow_of(sol.paths);
  sol.control_flow = sol.paths.v;
  sol.diagnostics.sweeps = sol.paths.sweeps;
  sol.diagnostics.residuals = sol.paths.residuals;
  sol.diagnostics.stages = sol.paths.stages;
  sol.diagnostics.stationarity_max = stationarity_residual(spec, sol.paths, grid);
  const CostResult cr = is_mftc(kind)
                            ? evaluate_cost(spec, sol.control_flow, grid, paths, CostMode::Mftc)
                            : evaluate_cost(spec, sol.control_flow, grid, paths, CostMode::MfgFrozenFlow,
                                            &sol.measure_flow);
  sol.cost = cr.value;
  sol.cost_stderr = cr.stderr_;
  return sol;
}

}  // namespace

LiftedCoefficients assemble_mfg(const ModelSpec& spec, const AssemblyOptions& opts) {
  return assemble(spec, opts, Kind::Mfg);
}
LiftedCoefficients assemble_mftc(const ModelSpec& spec, const AssemblyOptions& opts) {
  return assemble(spec, opts, Kind::Mftc);
}
LiftedCoefficients assemble_mfg_generic(const ModelSpec& spec, const AssemblyOptions& opts) {
  return assemble(spec, opts, Kind::MfgGeneric);
}
LiftedCoefficients assemble_mftc_generic(const ModelSpec& spec, const AssemblyOptions& opts) {
  return assemble(spec, opts, Kind::MftcGeneric);
}

EquilibriumSolution solve_mfg(const ModelSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                              const SolverParams& params) {
  return run(spec, grid, paths, params, Kind::Mfg);
}
EquilibriumSolution solve_mftc(const ModelSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                               const SolverParams& params) {
  return run(spec, grid, paths, params, Kind::Mftc);
}
EquilibriumSolution solve_mfg_generic_drift(const ModelSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                                            const SolverParams& params) {
  return run(spec, grid, paths, params, Kind::MfgGeneric);
}
EquilibriumSolution solve_mftc_generic_drift(const ModelSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                                             const SolverParams& params) {
  return run(spec, grid, paths, params, Kind::MftcGeneric);
}

MeasureFlow measure_flow_of(const SolutionPaths& s) {
  MeasureFlow flow;
  flow.clouds.reserve(s.X.size());
  for (const auto& x : s.X) flow.clouds.emplace_back(x);
  return flow;
}

double stationarity_residual(const ModelSpec& spec, const SolutionPaths& s, const TimeGrid& grid) {
  double worst = 0.0;
  const int n = spec.n;
  for (std::size_t i = 0; i < s.X.size(); ++i) {
    const ParticleCloud m(s.X[i]);
    const double t = grid.node(static_cast<int>(i));
    Eigen::VectorXd res(s.particles());
    parallel_for(s.particles(), [&](int p) {
      res(p) = lagrangian_dv(spec, t, s.X[i].row(p).transpose(), m, s.v[i].row(p).transpose(),
                             s.P[i].row(p).transpose(), unpack_square(s.Q[i].row(p), n))
                   .norm();
    });
    worst = std::max(worst, res.maxCoeff());
  }
  return worst;
}

CostResult evaluate_cost(const ModelSpec& spec, const std::vector<Eigen::MatrixXd>& control_flow,
                         const TimeGrid& grid, const PathBundle& paths, CostMode mode, const MeasureFlow* flow) {
  grid.validate();
  const int N = paths.particles(), n = spec.n, d = spec.d, K = grid.steps;
  if (static_cast<int>(control_flow.size()) < K)
    throw Error(ErrorCode::DimensionMismatch, "control flow must cover every time step");
  if (mode == CostMode::MfgFrozenFlow && (!flow || static_cast<int>(flow->clouds.size()) != K + 1))
    throw Error(ErrorCode::InvalidArgument, "frozen-flow cost needs one cloud per grid node");
  if (paths.dim() != n || static_cast<int>(paths.noise.size()) != K)
    throw Error(ErrorCode::DimensionMismatch, "path bundle does not match the model and grid");
  const double dt = grid.dt();

  Eigen::MatrixXd X = paths.initial.points();
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(N);
  for (int i = 0; i < K; ++i) {
    if (control_flow[i].rows() != N || control_flow[i].cols() != d)
      throw Error(ErrorCode::DimensionMismatch, "control array has the wrong shape");
    const ParticleCloud own = mode == CostMode::Mftc ? ParticleCloud(X) : ParticleCloud();
    const ParticleCloud& m = mode == CostMode::Mftc ? own : flow->clouds[i];
    const double t = grid.node(i);
    Eigen::MatrixXd Xn(N, n);
    parallel_for(N, [&](int p) {
      const Vec x = X.row(p).transpose();
      const Vec v = control_flow[i].row(p).transpose();
      cost(p) += spec.f(t, x, m, v) * dt;
      const Mat sig = spec.sigma(t, x, m, v);
      Xn.row(p) = X.row(p) + dt * spec.b(t, x, m, v).transpose() +
                  (sig * paths.noise[i].row(p).transpose()).transpose();
    });
    X = std::move(Xn);
  }
  const ParticleCloud own = mode == CostMode::Mftc ? ParticleCloud(X) : ParticleCloud();
  const ParticleCloud& mT = mode == CostMode::Mftc ? own : flow->clouds[K];
  parallel_for(N, [&](int p) { cost(p) += spec.g(X.row(p).transpose(), mT); });
  if (!cost.allFinite()) throw Error(ErrorCode::NonFiniteValue, "non-finite cost");

  CostResult r;
  r.per_particle = cost;
  r.value = cost.mean();
  const double var = N > 1 ? (cost.array() - r.value).square().sum() / (N - 1) : 0.0;
  r.stderr_ = std::sqrt(var / N);
  return r;
}

CoercivityResult coercivity_probe(const ModelSpec& spec, const EquilibriumSolution& sol, const TimeGrid& grid,
                                  const PathBundle& paths, double lambda, double delta, int count,
                                  std::uint64_t seed, CostMode mode) {
  if (!(delta > 0.0) || count < 1) throw Error(ErrorCode::InvalidArgument, "need delta > 0 and count >= 1");
  const int N = paths.particles(), d = spec.d, K = grid.steps;
  const double dt = grid.dt();
  const MeasureFlow* flow = mode == CostMode::MfgFrozenFlow ? &sol.measure_flow : nullptr;
  const CostResult base = evaluate_cost(spec, sol.control_flow, grid, paths, mode, flow);
  const CounterRng rng(seed);

  CoercivityResult out;
  out.delta = delta;
  out.lambda = lambda;
  for (int k = 0; k < count; ++k) {
    std::vector<Eigen::MatrixXd> bump(K + 1, Eigen::MatrixXd::Zero(N, d));
    double sq = 0.0;
    for (int i = 0; i < K; ++i)
      for (int p = 0; p < N; ++p)
        for (int c = 0; c < d; ++c) {
          const double z = rng.normal(CounterRng::kPerturbation, k, p, static_cast<std::uint64_t>(i) * d + c);
          bump[i](p, c) = z;
          sq += z * z;
        }
    const double scale = delta / std::sqrt(sq * dt / N);
    std::vector<Eigen::MatrixXd> control = sol.control_flow;
    for (int i = 0; i < K; ++i) control[i] += scale * bump[i];
    const CostResult pert = evaluate_cost(spec, control, grid, paths, mode, flow);
    const Eigen::VectorXd diff = pert.per_particle - base.per_particle;
    const double mean = diff.mean();
    const double se = N > 1 ? std::sqrt((diff.array() - mean).square().sum() / (N - 1) / N) : 0.0;
    out.increases.push_back(mean);
    out.stderrs.push_back(se);
    if (mean < lambda * delta * delta - 3.0 * se) ++out.violations;
  }
  return out;
}

}  // namespace mfg
