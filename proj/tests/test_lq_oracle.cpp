#include "mfg/lq_oracle.hpp"
#include "mfg/types.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

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

lq::LQModel basic(double mean0, double var0) {
  return lq::LQModel::scalar(0, 1, 1, 1, 1, 0, 0, 0, 1.0, mean0, var0);
}

}  // namespace

TEST(LqOracle, RiccatiIsTanh) {
  const lq::LQSolution s = lq::solve_lq_mfg(basic(0.0, 1.0));
  double worst = 0.0;
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    const double t = s.times[i];
    worst = std::max(worst, std::abs(s.riccati(i, 0) - std::tanh(1.0 - t)));
    worst = std::max(worst, std::abs(s.gain(i, 0) + std::tanh(1.0 - t)));
  }
  EXPECT_LT(worst, 1e-10);
  EXPECT_NEAR(s.gain_at(0.55)(0), -std::tanh(0.45), 1e-6);
}

TEST(LqOracle, StepHalvingIsStable) {
  const double a = lq::solve_lq_mfg(basic(0.0, 1.0), 1000).riccati(0, 0);
  const double b = lq::solve_lq_mfg(basic(0.0, 1.0), 2000).riccati(0, 0);
  EXPECT_LE(std::abs(a - b), 1e-8);
}

TEST(LqOracle, CostClosedForm) {
  // 1/2 pi(0) E[X_0^2] + 1/2 integral of pi.
  const lq::LQSolution s = lq::solve_lq_mfg(basic(1.0, 1.0));
  EXPECT_NEAR(s.cost, std::tanh(1.0) + 0.5 * std::log(std::cosh(1.0)), 1e-8);
  // Without feedback on the mean the mean decays like the deviations.
  EXPECT_NEAR(s.mean_at(1.0)(0), 1.0 / std::cosh(1.0), 1e-6);
}

TEST(LqOracle, MfgAndMftcAgreeWithoutMeanCoupling) {
  const lq::LQSolution a = lq::solve_lq_mfg(basic(0.7, 2.0));
  const lq::LQSolution b = lq::solve_lq_mftc(basic(0.7, 2.0));
  EXPECT_LT((a.gain - b.gain).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(a.cost, b.cost, 1e-8);
}

TEST(LqOracle, MeanCouplingSeparatesTheProblems) {
  const auto m = lq::LQModel::scalar(0, 1, 1, 1, 1, 0.5, 1, 0.5, 1.0, 1.0, 1.0);
  const lq::LQSolution a = lq::solve_lq_mfg(m);
  const lq::LQSolution b = lq::solve_lq_mftc(m);
  EXPECT_LT((a.gain - b.gain).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GT((a.offset - b.offset).cwiseAbs().maxCoeff(), 1e-3);
  // The social optimum costs no more than the equilibrium.
  EXPECT_LE(b.cost, a.cost + 1e-10);
}

TEST(LqOracle, Errors) {
  EXPECT_EQ(code_of([] { lq::riccati_backward(1.0, 0.0, 0.0, -2.0, 0.0, 1.0, 1000); }), ErrorCode::RiccatiBlowup);
  EXPECT_EQ(code_of([] { lq::solve_lq_mfg(basic(0.0, 1.0), 50); }), ErrorCode::InvalidArgument);
  EXPECT_THROW(lq::solve_lq_mfg(lq::LQModel::scalar(0, 1, 1, 1, 0.0, 0, 0, 0, 1.0, 0.0, 1.0)), Error);
}

TEST(LqOracle, CsvLayout) {
  const lq::LQSolution s = lq::solve_lq_mfg(basic(0.0, 1.0), 100);
  std::ostringstream os;
  lq::write_lq_csv(os, s);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "time,pi1,Pi1,mean1,eta1,gain1,offset1");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 101);
}
