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

const CLTVariant kAll[] = {CLTVariant::MpFull, CLTVariant::MpReduced, CLTVariant::FbsdeLocal,
                           CLTVariant::FbsdeLocalReduced};

}  // namespace

TEST(BigLambda, Values) {
  // a = T (T + 1) K^2 = 0.5; 4 a e^{2a} (1 + a e^{2a}) Gamma.
  const double e = std::exp(1.0);
  EXPECT_NEAR(threshold_big_lambda(1.0, 0.5, 0.1), 4.0 * 0.5 * e * (1.0 + 0.5 * e) * 0.1, 1e-12);
  EXPECT_NEAR(threshold_big_lambda(1.0, 0.5, 0.1), 1.28256, 1e-5);
  EXPECT_DOUBLE_EQ(threshold_big_lambda(2.0, 3.0, 0.0), 0.0);
  EXPECT_NEAR(threshold_big_lambda_reduced(1.0, 0.5, 0.1), 0.1, 1e-15);
  EXPECT_EQ(code_of([] { threshold_big_lambda(0.0, 1.0, 1.0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { threshold_big_lambda(1.0, 0.0, 1.0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { threshold_big_lambda_reduced(1.0, 1.0, -1.0); }), ErrorCode::InvalidArgument);
}

TEST(CLT, VanishesAtZeroHorizon) {
  for (CLTVariant v : kAll) EXPECT_DOUBLE_EQ(threshold_c_LT(1.7, 0.0, v), 0.0) << to_string(v);
}

TEST(CLT, Values) {
  EXPECT_NEAR(threshold_c_LT(1.0, 1.0, CLTVariant::MpFull), 8.0 * std::exp(8.0), 1e-9);
  EXPECT_DOUBLE_EQ(threshold_c_LT(1.0, 1.0, CLTVariant::MpReduced), 4.0);
  EXPECT_NEAR(threshold_c_LT(1.0, 1.0, CLTVariant::FbsdeLocalReduced), 4.0 + std::sqrt(32.0), 1e-12);
  const double tt = 0.01 * 1.01, e = std::exp(32.0 * tt);
  const double A = 64.0 * tt * e * (1.0 + 16.0 * tt * e);
  EXPECT_NEAR(threshold_c_LT(1.0, 0.01, CLTVariant::FbsdeLocal), A + std::sqrt(A * A + 4.0 * A), 1e-12);
  EXPECT_EQ(code_of([] { threshold_c_LT(0.0, 1.0, CLTVariant::MpFull); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { threshold_c_LT(1.0, -1.0, CLTVariant::MpFull); }), ErrorCode::InvalidArgument);
}

TEST(CLT, VariantNames) {
  for (CLTVariant v : kAll) EXPECT_EQ(clt_variant_from_string(to_string(v)), v);
  EXPECT_EQ(code_of([] { clt_variant_from_string("mp"); }), ErrorCode::ConfigError);
}

TEST(Budget, ClosedForm) {
  const BudgetResult b = anti_monotonicity_budget(1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 1.0, 0.4);
  EXPECT_DOUBLE_EQ(b.D, 1.0);
  EXPECT_NEAR(b.A, 1.0 + std::sqrt(2.0), 1e-12);
  EXPECT_TRUE(b.budget_ok);
  EXPECT_FALSE(anti_monotonicity_budget(1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 1.0, 0.5).budget_ok);
  // D = 2 - 0.5 - 0.25 - (0.5 + 0.3)^2 / 2 = 0.93.
  const BudgetResult c = anti_monotonicity_budget(0.5, 1.0, 0.5, 0.25, 0.5, 0.1, 2.0, 0.0);
  EXPECT_NEAR(c.D, 0.93, 1e-12);
  EXPECT_NEAR(c.A, (1.0 + 2.0 * std::sqrt(0.25 + 0.465)) / 0.465, 1e-12);
}

TEST(Budget, NonPositiveDenominators) {
  EXPECT_EQ(code_of([] { anti_monotonicity_budget(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0); }),
            ErrorCode::NonPositiveDenominator);
  EXPECT_EQ(code_of([] { anti_monotonicity_budget(1.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0); }),
            ErrorCode::NonPositiveDenominator);
}

TEST(GenericMargins, Values) {
  ConstantsLedger c;
  c.L = 1.0;
  c.lambda_b = 1.0;
  c.lambda_v = 1.0;
  c.lambda_x = 1.0;
  c.L_b_v = 0.1;
  GenericDriftMargins m = generic_drift_margins(c);
  EXPECT_NEAR(m.theorem_margin, 2.0, 1e-12);
  EXPECT_NEAR(m.lambda_v_margin, 0.8, 1e-12);
  EXPECT_NEAR(m.mftc_x_margin, 1.0, 1e-12);
  EXPECT_NEAR(m.mftc_v_margin, 0.9, 1e-12);
  c.l_m = 0.5;
  c.L_b_m = 0.2;
  m = generic_drift_margins(c);
  EXPECT_NEAR(m.theorem_margin, 2.0 - 1.5 - 0.85 * 0.85 / 4.0, 1e-12);
  EXPECT_NEAR(m.mftc_x_margin, 0.8, 1e-12);
}

TEST(GenericMargins, MissingConstants) {
  ConstantsLedger c;
  c.lambda_b = 1.0;
  c.lambda_v = 1.0;
  c.lambda_x = 1.0;
  EXPECT_EQ(code_of([&] { generic_drift_margins(c); }), ErrorCode::ConfigError);
  c.L = 1.0;
  c.lambda_b = 0.0;
  EXPECT_EQ(code_of([&] { generic_drift_margins(c); }), ErrorCode::NonPositiveDenominator);
}
