#include "mfg/hamiltonian.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mfg;

namespace {

struct Scalar {
  double bscale = 1.0;    // b = bscale * v (+ x when with_x)
  bool with_x = false;
  bool sigma_v = false;   // sigma = v, otherwise sigma = 1
  double lam = 0.5;       // f = lam * v^2 (+ 1/2 x^2 when with_x)
  double L = 1.0;
  double lambda_b = 1.0;
};

ModelSpec scalar_model(const Scalar& c) {
  ModelSpec s;
  s.name = "scalar_test";
  auto one = [](double v) { return Vec::Constant(1, v); };
  auto mat = [](double v) { return Mat::Constant(1, 1, v); };
  s.b = [c, one](double, const Vec& x, const ParticleCloud&, const Vec& v) {
    return one(c.bscale * v(0) + (c.with_x ? x(0) : 0.0));
  };
  s.sigma = [c, mat](double, const Vec&, const ParticleCloud&, const Vec& v) { return mat(c.sigma_v ? v(0) : 1.0); };
  s.f = [c](double, const Vec& x, const ParticleCloud&, const Vec& v) {
    return c.lam * v(0) * v(0) + (c.with_x ? 0.5 * x(0) * x(0) : 0.0);
  };
  s.g = [](const Vec&, const ParticleCloud&) { return 0.0; };
  s.Dx_f = [c, one](double, const Vec& x, const ParticleCloud&, const Vec&) { return one(c.with_x ? x(0) : 0.0); };
  s.Dv_f = [c, one](double, const Vec&, const ParticleCloud&, const Vec& v) { return one(2.0 * c.lam * v(0)); };
  s.Dx_g = [one](const Vec&, const ParticleCloud&) { return one(0.0); };
  s.Dx_b = [c, mat](double, const Vec&, const ParticleCloud&, const Vec&) { return mat(c.with_x ? 1.0 : 0.0); };
  s.Dv_b = [c, mat](double, const Vec&, const ParticleCloud&, const Vec&) { return mat(c.bscale); };
  if (c.sigma_v)
    s.Dv_sigma_q = [one](double, const Vec&, const ParticleCloud&, const Vec&, const Mat& q) { return one(q(0, 0)); };
  s.constants.L = c.L;
  s.constants.lambda_b = c.lambda_b;
  s.constants.lambda_v = c.lam;
  return s;
}

const ParticleCloud& cloud() {
  static const ParticleCloud c = ParticleCloud::dirac(Vec::Zero(1));
  return c;
}

Vec s1(double v) { return Vec::Constant(1, v); }
Mat m1(double v) { return Mat::Constant(1, 1, v); }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an mfg::Error";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Lagrangian, DirectSubstitution) {
  Scalar c;
  const ModelSpec a = scalar_model(c);
  // sigma = 1 is paired with q = 0 here.
  EXPECT_DOUBLE_EQ(lagrangian(a, 0, s1(0), cloud(), s1(2), s1(1), m1(0)), 4.0);
  EXPECT_DOUBLE_EQ(lagrangian(a, 0, s1(0), cloud(), s1(0), s1(0), m1(0)), 0.0);
  c.sigma_v = true;
  const ModelSpec b = scalar_model(c);
  EXPECT_DOUBLE_EQ(lagrangian(b, 0, s1(0), cloud(), s1(1), s1(1), m1(1)), 2.5);
}

TEST(Minimize, ClosedForms) {
  Scalar c;
  const ModelSpec half = scalar_model(c);
  EXPECT_NEAR(minimize_hamiltonian(half, 0, s1(0.3), cloud(), s1(0.7), m1(0))(0), -0.7, 1e-10);
  c.lam = 2.0;
  const ModelSpec two = scalar_model(c);
  EXPECT_NEAR(minimize_hamiltonian(two, 0, s1(0.3), cloud(), s1(1.0), m1(0))(0), -0.25, 1e-10);
  c.lam = 1.0;
  c.sigma_v = true;
  const ModelSpec sv = scalar_model(c);
  EXPECT_NEAR(minimize_hamiltonian(sv, 0, s1(0), cloud(), s1(0.3), m1(0.5))(0), -0.4, 1e-10);
}

TEST(Minimize, MultiDimensionalLq) {
  const ModelSpec s = make_model("lq_basic", {{"dim", 3}, {"R", 2.0}});
  Vec p(3);
  p << 1.0, -2.0, 0.5;
  const ParticleCloud m(Eigen::MatrixXd::Zero(2, 3));
  const Vec v = minimize_hamiltonian(s, 0.1, Vec::Zero(3), m, p, Mat::Zero(3, 3));
  EXPECT_LT((v + p / 2.0).norm(), 1e-10);
}

TEST(Minimize, ConcaveCostIsSingular) {
  Scalar c;
  c.lam = -1.0;
  ModelSpec s = scalar_model(c);
  EXPECT_EQ(code_of([&] { minimize_hamiltonian(s, 0, s1(0), cloud(), s1(1), m1(0)); }), ErrorCode::SingularHessian);
  // Without the convexity requirement the stationary point is found.
  EXPECT_NEAR(solve_stationarity(s, 0, s1(0), cloud(), s1(1), m1(0))(0), 0.5, 1e-10);
}

TEST(Minimize, NoConvergenceReportsResidual) {
  Scalar c;
  const ModelSpec s = scalar_model(c);
  NewtonOptions o;
  o.max_iter = 0;
  try {
    minimize_hamiltonian(s, 0, s1(0), cloud(), s1(5), m1(0), std::nullopt, o);
    FAIL() << "expected NoConvergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
    EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos);
  }
}

TEST(Gradients, EnvelopeFormulas) {
  Scalar c;
  const ModelSpec s = scalar_model(c);
  const Vec v = minimize_hamiltonian(s, 0, s1(0.2), cloud(), s1(1.5), m1(0));
  const HamiltonianGradients g = hamiltonian_gradients(s, 0, s1(0.2), cloud(), s1(1.5), m1(0), v);
  EXPECT_NEAR(g.DpH(0), -1.5, 1e-8);
  EXPECT_NEAR(g.H, -0.5 * 1.5 * 1.5, 1e-8);
  EXPECT_NEAR(g.DxH(0), 0.0, 1e-14);

  c.with_x = true;
  const ModelSpec lin = scalar_model(c);
  const double x = 0.7, p = -0.4;
  const Vec vl = minimize_hamiltonian(lin, 0, s1(x), cloud(), s1(p), m1(0));
  const HamiltonianGradients gl = hamiltonian_gradients(lin, 0, s1(x), cloud(), s1(p), m1(0), vl);
  EXPECT_NEAR(gl.DxH(0), p + x, 1e-10);
  const double h = 1e-5;
  const double fd = (hamiltonian_value(lin, 0, s1(x + h), cloud(), s1(p), m1(0)) -
                     hamiltonian_value(lin, 0, s1(x - h), cloud(), s1(p), m1(0))) / (2 * h);
  EXPECT_NEAR(gl.DxH(0), fd, 1e-6);
}

TEST(Gradients, StaleMinimizer) {
  const ModelSpec s = scalar_model(Scalar{});
  EXPECT_EQ(code_of([&] { hamiltonian_gradients(s, 0, s1(0), cloud(), s1(1), m1(0), s1(0)); }),
            ErrorCode::StaleMinimizer);
}

TEST(Gradients, MatchFiniteDifferencesOnRandomPoints) {
  const ModelSpec s = make_model("small_mf", {{"dim", 2}});
  const auto pts = sample_points(s, 100, 9);
  double worst = 0.0;
  int k = 0;
  for (const auto& pt : pts) {
    Vec p(2);
    p << std::sin(k), std::cos(2.0 * k);
    const Mat q = Mat::Identity(2, 2) * 0.3;
    ++k;
    const Vec v = minimize_hamiltonian(s, pt.t, pt.x, pt.m, p, q);
    const HamiltonianGradients g = hamiltonian_gradients(s, pt.t, pt.x, pt.m, p, q, v);
    for (int i = 0; i < 2; ++i) {
      Vec e = Vec::Zero(2);
      e(i) = 1e-5;
      const double fdp = (hamiltonian_value(s, pt.t, pt.x, pt.m, p + e, q) -
                          hamiltonian_value(s, pt.t, pt.x, pt.m, p - e, q)) / 2e-5;
      const double fdx = (hamiltonian_value(s, pt.t, pt.x + e, pt.m, p, q) -
                          hamiltonian_value(s, pt.t, pt.x - e, pt.m, p, q)) / 2e-5;
      worst = std::max({worst, std::abs(fdp - g.DpH(i)) / std::max(1.0, std::abs(fdp)),
                        std::abs(fdx - g.DxH(i)) / std::max(1.0, std::abs(fdx))});
    }
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(Gradients, InfimumProperty) {
  const ModelSpec s = make_model("split_quasi");
  const auto pts = sample_points(s, 100, 4);
  for (const auto& pt : pts) {
    const Vec p = s1(0.8);
    const double H = hamiltonian_value(s, pt.t, pt.x, pt.m, p, m1(0.2));
    EXPECT_LE(H, lagrangian(s, pt.t, pt.x, pt.m, pt.v, p, m1(0.2)) + 1e-12);
  }
}

TEST(ConeBound, LinearDrifts) {
  Scalar c;
  const auto pts = sample_points(scalar_model(c), 200, 1);
  const CheckReport r = cone_bound_check(scalar_model(c), pts);
  EXPECT_TRUE(r.passed());
  EXPECT_LT(r.margins.at("max_ratio"), 1.0);
  EXPECT_NEAR(r.margins.at("min_eigenvalue"), 1.0, 1e-14);

  c.bscale = 2.0;
  c.L = 2.0;
  c.lambda_b = 4.0;
  const CheckReport r2 = cone_bound_check(scalar_model(c), pts);
  EXPECT_TRUE(r2.passed());
  EXPECT_NEAR(r2.margins.at("min_eigenvalue"), 4.0, 1e-12);
}

TEST(ConeBound, SingularDvbCarriesWitness) {
  Scalar c;
  c.bscale = 0.01;
  const ModelSpec s = scalar_model(c);
  try {
    cone_bound_check(s, sample_points(s, 10, 1));
    FAIL() << "expected SingularDvb";
  } catch (const SingularDvbError& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularDvb);
    EXPECT_NEAR(e.witness().values.at("min_eigenvalue"), 1e-4, 1e-12);
  }
}

TEST(PConcavity, Formula) {
  Scalar c;
  const auto pts = sample_points(scalar_model(c), 50, 2);
  CheckReport r = p_concavity_check_1d(scalar_model(c), pts);
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(r.margins.at("max_D2pH"), -1.0, 1e-6);
  c.lam = 3.0;
  r = p_concavity_check_1d(scalar_model(c), pts);
  EXPECT_NEAR(r.margins.at("max_D2pH"), -1.0 / 6.0, 1e-6);
  c.lam = -1.0;
  r = p_concavity_check_1d(scalar_model(c), pts);
  EXPECT_EQ(r.verdict, Verdict::Fail);
  EXPECT_NEAR(r.margins.at("max_D2pH"), 0.5, 1e-6);
  ASSERT_FALSE(r.witnesses.empty());
}

TEST(PConcavity, OneDimensionalOnly) {
  const ModelSpec s = make_model("lq_basic", {{"dim", 2}});
  EXPECT_EQ(code_of([&] { p_concavity_check_1d(s, sample_points(s, 2, 1)); }), ErrorCode::DimensionUnsupported);
}
