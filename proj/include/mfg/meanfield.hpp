#pragma once

#include "mfg/fbsde.hpp"
#include "mfg/hamiltonian.hpp"
#include "mfg/model.hpp"

#include <cstdint>
#include <vector>

namespace mfg {

struct AssemblyOptions {
  NewtonOptions newton;
  // Keep the P^T D_y(db/dnu) term in the mean field type driver.
  bool include_drift_measure_term = true;
  // Average the measure terms over all particle pairs even when the model
  // declares them affine in y.
  bool force_pairwise = false;
};

// B = D_pH, A = D_qH, F = -D_xH, G = D_xg, beta = v_hat, particle-wise with
// the cloud of the current X.
LiftedCoefficients assemble_mfg(const ModelSpec& spec, const AssemblyOptions& opts = {});

// As assemble_mfg, plus the cloud averages over j of
// D_y(dH/dnu)(X_j, m, P_j, Q_j)(X_i) in F and D_y(dg/dnu)(X_j, m)(X_i) in G.
LiftedCoefficients assemble_mftc(const ModelSpec& spec, const AssemblyOptions& opts = {});

// Generic drifts: v solves (D_v b)^T P + D_v f = 0 without a convexity requirement.
LiftedCoefficients assemble_mfg_generic(const ModelSpec& spec, const AssemblyOptions& opts = {});
LiftedCoefficients assemble_mftc_generic(const ModelSpec& spec, const AssemblyOptions& opts = {});

enum class SolverMethod { Picard, Continuation };

struct SolverParams {
  SolverMethod method = SolverMethod::Picard;
  PicardOptions picard;
  std::vector<double> gamma_schedule{0.0, 0.25, 0.5, 0.75, 1.0};
  AssemblyOptions assembly;
};

struct Diagnostics {
  int sweeps = 0;
  std::vector<double> residuals;
  std::vector<StageRecord> stages;
  double stationarity_max = 0.0;
};

struct EquilibriumSolution {
  SolutionPaths paths;
  MeasureFlow measure_flow;
  std::vector<Eigen::MatrixXd> control_flow;  // per node, N x d
  double cost = 0.0;
  double cost_stderr = 0.0;
  Diagnostics diagnostics;
};

EquilibriumSolution solve_mfg(const ModelSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                              const SolverParams& params = {});
EquilibriumSolution solve_mftc(const ModelSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                               const SolverParams& params = {});
EquilibriumSolution solve_mfg_generic_drift(const ModelSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                                            const SolverParams& params = {});
EquilibriumSolution solve_mftc_generic_drift(const ModelSpec& spec, const TimeGrid& grid, const PathBundle& paths,
                                             const SolverParams& params = {});

enum class CostMode { MfgFrozenFlow, Mftc };

struct CostResult {
  double value = 0.0;
  double stderr_ = 0.0;
  Eigen::VectorXd per_particle;
};

// Simulates the state under an open-loop control array with the bundle's
// noise and returns the left-point Monte Carlo cost. In MfgFrozenFlow mode
// the measure argument comes from `flow`; in Mftc mode from the simulated cloud.
CostResult evaluate_cost(const ModelSpec& spec, const std::vector<Eigen::MatrixXd>& control_flow,
                         const TimeGrid& grid, const PathBundle& paths, CostMode mode,
                         const MeasureFlow* flow = nullptr);

struct CoercivityResult {
  double delta = 0.0;
  double lambda = 0.0;
  std::vector<double> increases;
  std::vector<double> stderrs;
  int violations = 0;

  bool passed() const { return violations == 0 && !increases.empty(); }
};

// Adds Gaussian bumps rescaled to L2(particles x time) norm delta to the
// equilibrium control and measures the cost increase on common noise with
// the equilibrium flow frozen. A violation is an increase below
// lambda * delta^2 - 3 standard errors.
CoercivityResult coercivity_probe(const ModelSpec& spec, const EquilibriumSolution& sol, const TimeGrid& grid,
                                  const PathBundle& paths, double lambda, double delta, int count,
                                  std::uint64_t seed, CostMode mode = CostMode::MfgFrozenFlow);

// Largest |D_v L| over nodes and particles of a solved system.
double stationarity_residual(const ModelSpec& spec, const SolutionPaths& s, const TimeGrid& grid);

MeasureFlow measure_flow_of(const SolutionPaths& s);

}  // namespace mfg
