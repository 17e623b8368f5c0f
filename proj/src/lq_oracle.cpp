#include "mfg/lq_oracle.hpp"

#include "mfg/types.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace mfg::lq {

void LQModel::validate() const {
  const int n = dim();
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "LQ model needs at least one coordinate");
  for (const Eigen::VectorXd* v : {&B, &sigma0, &Q, &R, &kappa, &S, &QT, &kappaT, &ST, &mean0, &var0})
    if (v->size() != n) throw Error(ErrorCode::DimensionMismatch, "LQ coefficient vectors differ in length");
  if ((R.array() <= 0.0).any()) throw Error(ErrorCode::InvalidArgument, "R must be positive definite");
  if ((Q.array() < 0.0).any() || (QT.array() < 0.0).any() || (S.array() < 0.0).any() || (ST.array() < 0.0).any())
    throw Error(ErrorCode::InvalidArgument, "Q, QT, S, ST must be positive semidefinite");
  if ((var0.array() < 0.0).any()) throw Error(ErrorCode::InvalidArgument, "initial variance must be >= 0");
  if (!(t0 < T)) throw Error(ErrorCode::InvalidArgument, "horizon needs t0 < T");
}

LQModel LQModel::scalar(double A, double B, double sigma0, double Q, double R, double kappa, double QT,
                        double kappaT, double T, double mean0, double var0, double S, double ST, int dim) {
  auto c = [dim](double x) { return Eigen::VectorXd::Constant(dim, x); };
  LQModel m;
  m.A = c(A);
  m.B = c(B);
  m.sigma0 = c(sigma0);
  m.Q = c(Q);
  m.R = c(R);
  m.kappa = c(kappa);
  m.S = c(S);
  m.QT = c(QT);
  m.kappaT = c(kappaT);
  m.ST = c(ST);
  m.T = T;
  m.mean0 = c(mean0);
  m.var0 = c(var0);
  return m;
}

std::vector<double> riccati_backward(double a, double b, double c, double yT, double t0, double T, int steps) {
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "Riccati integration needs steps >= 1");
  const double h = (T - t0) / steps;
  auto rhs = [&](double y) { return -(a * y * y + b * y + c); };  // d/ds with s = T - t
  std::vector<double> y(steps + 1);
  y[steps] = yT;
  for (int i = steps; i > 0; --i) {
    const double y0 = y[i];
    const double k1 = rhs(y0);
    const double k2 = rhs(y0 + 0.5 * h * k1);
    const double k3 = rhs(y0 + 0.5 * h * k2);
    const double k4 = rhs(y0 + h * k3);
    y[i - 1] = y0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(y[i - 1]) || std::abs(y[i - 1]) > 1e12)
      throw Error(ErrorCode::RiccatiBlowup, "Riccati solution exceeded 1e12");
  }
  return y;
}

namespace {

// Composite Simpson on equally spaced samples; trapezoid when the interval
// count is odd.
double integrate(const std::vector<double>& f, double h) {
  const int m = static_cast<int>(f.size()) - 1;
  if (m < 1) return 0.0;
  if (m % 2 == 0) {
    double s = f.front() + f.back();
    for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * f[i];
    return s * h / 3.0;
  }
  double s = 0.5 * (f.front() + f.back());
  for (int i = 1; i < m; ++i) s += f[i];
  return s * h;
}

LQSolution allocate(const LQModel& model, int steps) {
  if (steps < 100) throw Error(ErrorCode::InvalidArgument, "ode_steps must be >= 100");
  model.validate();
  const int n = model.dim();
  LQSolution s;
  s.times.resize(steps + 1);
  for (int i = 0; i <= steps; ++i) s.times[i] = model.t0 + (model.T - model.t0) * i / steps;
  for (Eigen::MatrixXd* m : {&s.riccati, &s.mean_riccati, &s.mean, &s.eta, &s.gain, &s.offset})
    m->setZero(steps + 1, n);
  return s;
}

double interp(const LQSolution& s, const Eigen::MatrixXd& m, int k, double t) {
  const int steps = static_cast<int>(s.times.size()) - 1;
  const double t0 = s.times.front(), T = s.times.back();
  const double u = std::clamp((t - t0) / (T - t0) * steps, 0.0, static_cast<double>(steps));
  const int i = std::min(static_cast<int>(u), steps - 1);
  const double w = u - i;
  return (1.0 - w) * m(i, k) + w * m(i + 1, k);
}

}  // namespace

LQSolution solve_lq_mfg(const LQModel& model, int ode_steps) {
  LQSolution s = allocate(model, ode_steps);
  const int n = model.dim();
  const double h = (model.T - model.t0) / ode_steps;
  for (int k = 0; k < n; ++k) {
    const double A = model.A(k), B = model.B(k), R = model.R(k), Q = model.Q(k), kap = model.kappa(k);
    const double sig = model.sigma0(k), S = model.S(k);
    const double QT = model.QT(k), kapT = model.kappaT(k), ST = model.ST(k);
    const auto pi = riccati_backward(B * B / R, -2.0 * A, -Q, QT, model.t0, model.T, ode_steps);

    Eigen::Matrix2d M;
    M << A, -B * B / R, -Q * (1.0 - kap), -A;
    const Eigen::Matrix2d phi = (M * (model.T - model.t0)).exp();
    const double c = QT * (1.0 - kapT);
    const double den = phi(1, 1) - c * phi(0, 1);
    if (std::abs(den) < 1e-14)
      throw Error(ErrorCode::RiccatiBlowup, "mean two-point boundary problem is singular");
    const double m0 = model.mean0(k);
    const Eigen::Vector2d z0(m0, (c * phi(0, 0) - phi(1, 0)) * m0 / den);

    std::vector<double> running(ode_steps + 1);
    for (int i = 0; i <= ode_steps; ++i) {
      const Eigen::Vector2d z = (M * (s.times[i] - model.t0)).exp() * z0;
      s.riccati(i, k) = pi[i];
      s.mean(i, k) = z(0);
      s.eta(i, k) = z(1) - pi[i] * z(0);
      s.gain(i, k) = -B / R * pi[i];
      s.offset(i, k) = -B / R * s.eta(i, k);
      const double eta = s.eta(i, k);
      running[i] = B * B * eta * eta / (2.0 * R) - 0.5 * sig * sig * pi[i] - 0.5 * (Q * kap * kap + S) * z(0) * z(0);
    }
    // Value function 1/2 pi x^2 + eta x + chi; chi' = running, with terminal
    // chi(T) = 1/2 (QT kappaT^2 + ST) mean(T)^2.
    const double mT = s.mean(ode_steps, k);
    const double chi0 = 0.5 * (QT * kapT * kapT + ST) * mT * mT - integrate(running, h);
    const double second = model.var0(k) + m0 * m0;
    s.cost += 0.5 * pi[0] * second + s.eta(0, k) * m0 + chi0;
  }
  return s;
}

LQSolution solve_lq_mftc(const LQModel& model, int ode_steps) {
  LQSolution s = allocate(model, ode_steps);
  const int n = model.dim();
  const double h = (model.T - model.t0) / ode_steps;
  for (int k = 0; k < n; ++k) {
    const double A = model.A(k), B = model.B(k), R = model.R(k), Q = model.Q(k), kap = model.kappa(k);
    const double sig = model.sigma0(k), S = model.S(k);
    const double QT = model.QT(k), kapT = model.kappaT(k), ST = model.ST(k);
    const auto pi = riccati_backward(B * B / R, -2.0 * A, -Q, QT, model.t0, model.T, ode_steps);
    // Mean Riccati on the half-step grid so the mean ODE can use RK4 midpoints.
    const auto Pi = riccati_backward(B * B / R, -2.0 * A, -(Q * (1.0 - kap) * (1.0 - kap) + S),
                                     QT * (1.0 - kapT) * (1.0 - kapT) + ST, model.t0, model.T, 2 * ode_steps);
    auto drift = [&](int half_index, double m) { return (A - B * B / R * Pi[half_index]) * m; };

    double m = model.mean0(k);
    std::vector<double> noise_cost(ode_steps + 1);
    for (int i = 0; i <= ode_steps; ++i) {
      s.riccati(i, k) = pi[i];
      s.mean_riccati(i, k) = Pi[2 * i];
      s.mean(i, k) = m;
      s.eta(i, k) = (Pi[2 * i] - pi[i]) * m;
      s.gain(i, k) = -B / R * pi[i];
      s.offset(i, k) = -B / R * s.eta(i, k);
      noise_cost[i] = 0.5 * sig * sig * pi[i];
      if (i == ode_steps) break;
      const double k1 = drift(2 * i, m);
      const double k2 = drift(2 * i + 1, m + 0.5 * h * k1);
      const double k3 = drift(2 * i + 1, m + 0.5 * h * k2);
      const double k4 = drift(2 * i + 2, m + h * k3);
      m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const double m0 = model.mean0(k);
    s.cost += 0.5 * pi[0] * model.var0(k) + 0.5 * Pi[0] * m0 * m0 + integrate(noise_cost, h);
  }
  return s;
}

Eigen::VectorXd LQSolution::gain_at(double t) const {
  Eigen::VectorXd out(gain.cols());
  for (int k = 0; k < gain.cols(); ++k) out(k) = interp(*this, gain, k, t);
  return out;
}

Eigen::VectorXd LQSolution::offset_at(double t) const {
  Eigen::VectorXd out(offset.cols());
  for (int k = 0; k < offset.cols(); ++k) out(k) = interp(*this, offset, k, t);
  return out;
}

Eigen::VectorXd LQSolution::mean_at(double t) const {
  Eigen::VectorXd out(mean.cols());
  for (int k = 0; k < mean.cols(); ++k) out(k) = interp(*this, mean, k, t);
  return out;
}

Eigen::VectorXd LQSolution::feedback(double t, const Eigen::VectorXd& x) const {
  return gain_at(t).cwiseProduct(x) + offset_at(t);
}

void write_lq_csv(std::ostream& os, const LQSolution& s) {
  const int n = static_cast<int>(s.riccati.cols());
  os.precision(17);
  os << "time";
  for (const char* name : {"pi", "Pi", "mean", "eta", "gain", "offset"})
    for (int k = 1; k <= n; ++k) os << ',' << name << k;
  os << '\n';
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    os << s.times[i];
    for (const Eigen::MatrixXd* m : {&s.riccati, &s.mean_riccati, &s.mean, &s.eta, &s.gain, &s.offset})
      for (int k = 0; k < n; ++k) os << ',' << (*m)(static_cast<Eigen::Index>(i), k);
    os << '\n';
  }
}

}  // namespace mfg::lq
