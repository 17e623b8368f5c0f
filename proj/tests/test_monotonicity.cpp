#include "mfg/meanfield.hpp"
#include "mfg/monotonicity.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mfg;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an mfg::Error";
  return ErrorCode::InvalidArgument;
}

CouplingSampler sampler(std::uint64_t seed, int cloud_size = 16) {
  CouplingSampler s;
  s.seed = seed;
  s.cloud_size = cloud_size;
  return s;
}

// f = ax x^2 + av v^2 + c v mean(m), scalar; enough for the cost-only checks.
ModelSpec cost_model(double ax, double av, double c) {
  ModelSpec s;
  s.name = "cost_test";
  s.f = [=](double, const Vec& x, const ParticleCloud& m, const Vec& v) {
    return ax * x.squaredNorm() + av * v.squaredNorm() + c * v.dot(m.mean());
  };
  s.Dx_f = [=](double, const Vec& x, const ParticleCloud&, const Vec&) { return Vec(2.0 * ax * x); };
  s.Dv_f = [=](double, const Vec&, const ParticleCloud& m, const Vec& v) { return Vec(2.0 * av * v + c * m.mean()); };
  return s;
}

}  // namespace

TEST(Sampler, ReproducibleAndSchemeCycle) {
  const CouplingSampler s = sampler(5);
  const auto [a1, b1] = s.pair(2, 7);
  const auto [a2, b2] = s.pair(2, 7);
  EXPECT_EQ(a1.points(), a2.points());
  EXPECT_EQ(b1.points(), b2.points());
  const auto [a3, b3] = sampler(6).pair(2, 7);
  EXPECT_NE(a1.points(), a3.points());
  EXPECT_EQ(s.scheme_for(0), PairScheme::Shift);
  EXPECT_EQ(s.scheme_for(1), PairScheme::Independent);
  EXPECT_EQ(s.scheme_for(2), PairScheme::Rescale);
  EXPECT_EQ(s.scheme_for(3), PairScheme::Antithetic);
  EXPECT_EQ(s.scheme_for(4), PairScheme::Shift);
  EXPECT_EQ(pair_scheme_from_string("antithetic"), PairScheme::Antithetic);
  EXPECT_EQ(code_of([] { pair_scheme_from_string("nope"); }), ErrorCode::ConfigError);
}

TEST(Sampler, CouplingShapes) {
  const CouplingSampler s = sampler(9);
  {
    const auto [a, b] = s.pair(2, 0);
    const Eigen::RowVectorXd c = b.points().row(0) - a.points().row(0);
    for (int i = 1; i < a.size(); ++i) EXPECT_LT((b.points().row(i) - a.points().row(i) - c).norm(), 1e-12);
  }
  {
    const auto [a, b] = s.pair(2, 2);
    const double r = b.points()(0, 0) / a.points()(0, 0);
    EXPECT_GE(r, 0.25);
    EXPECT_LE(r, 2.0);
    EXPECT_GE(std::abs(r - 1.0), 0.1);
    EXPECT_LT((b.points() - r * a.points()).cwiseAbs().maxCoeff(), 1e-10);
  }
  {
    const auto [a, b] = s.pair(2, 3);
    EXPECT_EQ(b.points(), Eigen::MatrixXd(-a.points()));
  }
  EXPECT_EQ(s.single(3, 1).dim(), 3);
  EXPECT_EQ(s.single(3, 1).size(), 16);
}

TEST(DisplacementQuasi, Examples) {
  const CouplingSampler s = sampler(61);
  const LiftedGradient sq = [](const Vec& x, const ParticleCloud&) { return Vec(2.0 * x); };
  const LiftedGradient neg = [](const Vec&, const ParticleCloud& m) { return Vec(-m.mean()); };
  const CheckReport a = check_displacement_quasi(sq, 2, 0.0, s, 100);
  EXPECT_TRUE(a.passed());
  EXPECT_NEAR(a.margins.at("min_normalized_margin"), 2.0, 1e-10);
  const CheckReport b = check_displacement_quasi(neg, 2, 0.0, s, 100);
  EXPECT_EQ(b.verdict, Verdict::Fail);
  ASSERT_FALSE(b.witnesses.empty());
  // A deterministic shift attains the worst ratio -1 exactly.
  EXPECT_NEAR(b.margins.at("lambda_m_hat"), 1.0, 1e-10);
  EXPECT_TRUE(check_displacement_quasi(neg, 2, 1.0, s, 100).passed());
  EXPECT_EQ(code_of([&] { check_displacement_quasi(neg, 2, 0.0, s, 0); }), ErrorCode::InvalidArgument);
}

TEST(DisplacementQuasi, MoreSamplesNeverRaiseTheMargin) {
  const CouplingSampler s = sampler(3);
  const LiftedGradient g = [](const Vec& x, const ParticleCloud& m) { return Vec(x.array().sin().matrix() - 0.5 * m.mean()); };
  const double m50 = check_displacement_quasi(g, 1, 0.0, s, 50).margins.at("min_normalized_margin");
  const double m200 = check_displacement_quasi(g, 1, 0.0, s, 200).margins.at("min_normalized_margin");
  EXPECT_LE(m200, m50);
}

TEST(Separable, WeakAndStrongMeanCoupling) {
  const CouplingSampler s = sampler(11);
  const CheckReport ok = check_condition_separable(make_model("split_quasi", {{"a", 0.3}}), s, 200);
  EXPECT_TRUE(ok.passed());
  EXPECT_NEAR(ok.margins.at("lambda_x_hat"), 0.5, 1e-8);
  EXPECT_NEAR(ok.margins.at("lambda_m_hat"), 0.3, 1e-8);
  const CheckReport bad = check_condition_separable(make_model("split_quasi", {{"a", 2.0}}), s, 200);
  EXPECT_EQ(bad.verdict, Verdict::Fail);
  EXPECT_LT(bad.margins.at("inequality_margin"), 0.0);
  EXPECT_FALSE(bad.witnesses.empty());
  EXPECT_EQ(code_of([&] { check_condition_separable(cost_model(0.5, 0.5, 0.0), s, 10); }),
            ErrorCode::MissingDerivative);
}

TEST(SmallMeanFieldEffect, PassAndFail) {
  const CouplingSampler s = sampler(13);
  const CheckReport ok = check_small_mean_field_effect(make_model("small_mf"), s, 200);
  EXPECT_TRUE(ok.passed());
  const CheckReport bad = check_small_mean_field_effect(cost_model(0.1, 0.5, 3.0), s, 200);
  EXPECT_EQ(bad.verdict, Verdict::Fail);
  EXPECT_NEAR(bad.margins.at("lambda_x_hat"), 0.1, 1e-8);
  EXPECT_NEAR(bad.margins.at("L_v_hat"), 3.0, 0.3);
  EXPECT_LE(bad.margins.at("L_v_hat"), 3.0 + 1e-8);
  EXPECT_LT(bad.margins.at("inequality_margin"), -1.0);
}

TEST(Split, PassAndFail) {
  const CouplingSampler s = sampler(17);
  const CheckReport ok = check_condition_split(make_model("split_quasi"), s, 200);
  EXPECT_TRUE(ok.passed());
  EXPECT_GT(ok.margins.at("inequality_margin"), 0.0);
  const CheckReport bad = check_condition_split(make_model("split_quasi", {{"a", 2.0}}), s, 200);
  EXPECT_EQ(bad.verdict, Verdict::Fail);
  EXPECT_FALSE(bad.witnesses.empty());
}

TEST(BetaMonotonicity, QuadraticControlAndConcaveTerminal) {
  const CouplingSampler s = sampler(41, 8);
  const CheckReport ok = check_beta_monotonicity(assemble_mfg(make_model("quadratic_control")), s, 500);
  EXPECT_TRUE(ok.passed());
  EXPECT_LE(ok.margins.at("Gamma_hat"), 1e-10);
  EXPECT_NEAR(ok.margins.at("Lambda_hat"), 2.0, 0.1);
  const CheckReport bad = check_beta_monotonicity(assemble_mfg(make_model("anti_g")), s, 200);
  EXPECT_EQ(bad.verdict, Verdict::Fail);
  EXPECT_LT(bad.margins.at("G_monotonicity_min"), 0.0);
  EXPECT_FALSE(bad.witnesses.empty());
}

TEST(MftcConvexity, ConvexAndConcaveTerminal) {
  const CouplingSampler s = sampler(23);
  const CheckReport ok = check_mftc_convexity(make_model("lq_basic"), s, 200);
  EXPECT_TRUE(ok.passed());
  EXPECT_NEAR(ok.margins.at("lambda_v_hat"), 0.5, 1e-8);
  const CheckReport bad = check_mftc_convexity(make_model("anti_g"), s, 200);
  EXPECT_EQ(bad.verdict, Verdict::Fail);
  EXPECT_LT(bad.margins.at("g_gap_min"), 0.0);
}

TEST(GenericDrift, LinearDrifts) {
  const CouplingSampler s = sampler(29);
  const CheckReport one = check_generic_drift(make_model("lq_basic"), s, 200);
  EXPECT_TRUE(one.passed());
  EXPECT_NEAR(one.margins.at("min_eigenvalue"), 1.0, 1e-12);
  EXPECT_NEAR(one.margins.at("L_b_v_hat"), 0.0, 1e-12);
  const CheckReport two = check_generic_drift(make_model("lq_basic", {{"B", 2.0}}), s, 200);
  EXPECT_NE(two.verdict, Verdict::Fail);
  EXPECT_NEAR(two.margins.at("min_eigenvalue"), 4.0, 1e-12);
}

TEST(GenericDrift, TanhPerturbationAtTheOrigin) {
  const CouplingSampler s = sampler(31);
  GenericDriftOptions o;
  o.state_scale = 0.0;
  const CheckReport r = check_generic_drift(make_model("generic_tanh"), s, 400, o);
  EXPECT_NE(r.verdict, Verdict::Fail);
  EXPECT_GT(r.margins.at("L_b_v_hat"), 0.05);
  EXPECT_LE(r.margins.at("L_b_v_hat"), 0.2);
  EXPECT_GE(r.margins.at("min_eigenvalue"), 0.81 - 1e-12);
}
