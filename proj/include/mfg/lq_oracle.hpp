#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <vector>

namespace mfg::lq {

// Diagonal linear-quadratic model, one independent copy per coordinate:
//   dX = (A X + B v) dt + sigma0 dW
//   f  = 1/2 Q (x - kappa mean)^2 + 1/2 R v^2 + 1/2 S mean^2
//   g  = 1/2 QT (x - kappaT mean)^2 + 1/2 ST mean^2
struct LQModel {
  Eigen::VectorXd A, B, sigma0, Q, R, kappa, S, QT, kappaT, ST;
  double t0 = 0.0;
  double T = 1.0;
  Eigen::VectorXd mean0, var0;

  int dim() const { return static_cast<int>(A.size()); }
  void validate() const;

  // All coordinates share the scalar coefficients.
  static LQModel scalar(double A, double B, double sigma0, double Q, double R, double kappa, double QT,
                        double kappaT, double T, double mean0, double var0, double S = 0.0, double ST = 0.0,
                        int dim = 1);
};

// Trajectories on ode_steps + 1 equally spaced nodes; row i is time times[i].
// The optimal feedback is v(t, x) = gain(t) .* x + offset(t).
struct LQSolution {
  std::vector<double> times;
  Eigen::MatrixXd riccati;      // pi, the deviation (individual) Riccati solution
  Eigen::MatrixXd mean_riccati; // Pi for the mean part (mean field type control only)
  Eigen::MatrixXd mean;         // equilibrium / optimal mean
  Eigen::MatrixXd eta;          // affine costate offset: mean costate = pi * mean + eta
  Eigen::MatrixXd gain;
  Eigen::MatrixXd offset;
  double cost = 0.0;            // expected cost summed over coordinates

  // Linear interpolation between nodes.
  Eigen::VectorXd gain_at(double t) const;
  Eigen::VectorXd offset_at(double t) const;
  Eigen::VectorXd mean_at(double t) const;
  Eigen::VectorXd feedback(double t, const Eigen::VectorXd& x) const;
};

// Riccati pi' = pi B^2/R pi - 2 A pi - Q, pi(T) = QT by RK4; the equilibrium
// mean solves the linear two-point system
//   m' = A m - (B^2/R) p,  p' = -A p - Q (1 - kappa) m,  p(T) = QT (1 - kappaT) m(T)
// exactly through the matrix exponential.
LQSolution solve_lq_mfg(const LQModel& model, int ode_steps = 1000);

// McKean-Vlasov control: deviation Riccati as above and a mean Riccati with
// running weight Q (1 - kappa)^2 + S and terminal weight QT (1 - kappaT)^2 + ST.
LQSolution solve_lq_mftc(const LQModel& model, int ode_steps = 1000);

// Scalar Riccati RK4 helper exposed for convergence checks:
// y' = a y^2 + b y + c backward from y(T) = yT.
std::vector<double> riccati_backward(double a, double b, double c, double yT, double t0, double T, int steps);

void write_lq_csv(std::ostream& os, const LQSolution& s);

}  // namespace mfg::lq
