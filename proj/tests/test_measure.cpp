#include "mfg/measure.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
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

Eigen::MatrixXd col(std::initializer_list<double> xs) {
  Eigen::MatrixXd m(static_cast<int>(xs.size()), 1);
  int i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST(ParticleCloud, CachesMoments) {
  const ParticleCloud c(col({1.0, 2.0, 3.0, 6.0}));
  EXPECT_TRUE(c.uniform());
  EXPECT_DOUBLE_EQ(c.mean()(0), 3.0);
  EXPECT_DOUBLE_EQ(c.second_moment(), (1.0 + 4.0 + 9.0 + 36.0) / 4.0);
  const CloudStats s = cloud_stats(c);
  EXPECT_NEAR(s.w2_to_origin, std::sqrt(12.5), 1e-14);
}

TEST(ParticleCloud, WeightedMoments) {
  Eigen::VectorXd w(2);
  w << 0.25, 0.75;
  const ParticleCloud c(col({-1.0, 3.0}), w);
  EXPECT_FALSE(c.uniform());
  EXPECT_DOUBLE_EQ(c.mean()(0), 2.0);
  EXPECT_DOUBLE_EQ(c.second_moment(), 0.25 + 0.75 * 9.0);
}

TEST(ParticleCloud, Dirac) {
  Vec x(2);
  x << 1.0, -2.0;
  const ParticleCloud d = ParticleCloud::dirac(x);
  EXPECT_EQ(d.size(), 1);
  EXPECT_EQ(d.dim(), 2);
  EXPECT_DOUBLE_EQ(d.second_moment(), 5.0);
}

TEST(ParticleCloud, RejectsInvalidInput) {
  EXPECT_EQ(code_of([] { ParticleCloud(Eigen::MatrixXd(0, 1)); }), ErrorCode::InvalidCloud);
  EXPECT_EQ(code_of([] { ParticleCloud(Eigen::MatrixXd::Zero(3, 9)); }), ErrorCode::InvalidCloud);
  EXPECT_EQ(code_of([] { ParticleCloud(col({1.0, std::numeric_limits<double>::quiet_NaN()})); }),
            ErrorCode::InvalidCloud);
  EXPECT_EQ(code_of([] { ParticleCloud(col({1.0, 2.0}), Eigen::Vector2d(1.5, -0.5)); }), ErrorCode::InvalidCloud);
  EXPECT_EQ(code_of([] { ParticleCloud(col({1.0, 2.0}), Eigen::Vector2d(0.5, 0.4)); }), ErrorCode::InvalidCloud);
  EXPECT_EQ(code_of([] { ParticleCloud(col({1.0, 2.0}), Eigen::Vector3d(0.5, 0.25, 0.25)); }),
            ErrorCode::InvalidCloud);
}

TEST(Wasserstein, OneDimensionalShift) {
  const ParticleCloud a(col({0.0, 1.0, 5.0}));
  const ParticleCloud b(col({2.5, 3.5, 7.5}));
  EXPECT_NEAR(wasserstein2(a, b), 2.5, 1e-12);
  EXPECT_NEAR(wasserstein2(a, a), 0.0, 1e-14);
}

TEST(Wasserstein, OneDimensionalWeightedQuantiles) {
  // All of the mass at 0 against half at -1 and half at +1.
  const ParticleCloud a = ParticleCloud::dirac(Vec::Zero(1));
  const ParticleCloud b(col({-1.0, 1.0}));
  EXPECT_NEAR(wasserstein2(a, b), 1.0, 1e-12);
}

TEST(Wasserstein, AssignmentIgnoresOrder) {
  Eigen::MatrixXd p(3, 2);
  p << 0, 0, 1, 2, -3, 1;
  Eigen::MatrixXd q(3, 2);
  q << -3, 1, 0, 0, 1, 2;
  EXPECT_NEAR(wasserstein2(ParticleCloud(p), ParticleCloud(q)), 0.0, 1e-12);
  Eigen::MatrixXd s = p;
  s.col(0).array() += 3.0;
  s.col(1).array() -= 4.0;
  EXPECT_NEAR(wasserstein2(ParticleCloud(p), ParticleCloud(s)), 5.0, 1e-12);
}

TEST(Wasserstein, AssignmentFindsOptimalPairing) {
  // Two points swapped across: the crossing pairing costs more than the parallel one.
  Eigen::MatrixXd p(2, 2);
  p << 0, 0, 1, 0;
  Eigen::MatrixXd q(2, 2);
  q << 1, 1, 0, 1;
  EXPECT_NEAR(wasserstein2(ParticleCloud(p), ParticleCloud(q)), 1.0, 1e-12);
}

TEST(Wasserstein, ExactModeRejectsUnequalClouds) {
  Eigen::MatrixXd p(2, 2);
  p << 0, 0, 1, 0;
  Eigen::MatrixXd q(3, 2);
  q << 1, 1, 0, 1, 2, 2;
  W2Options exact;
  exact.mode = W2Mode::Exact;
  EXPECT_EQ(code_of([&] { wasserstein2_detailed(ParticleCloud(p), ParticleCloud(q), exact); }),
            ErrorCode::UnsupportedWeighting);
  const W2Result r = wasserstein2_detailed(ParticleCloud(p), ParticleCloud(q));
  EXPECT_EQ(r.mode, W2Mode::Sinkhorn);
  EXPECT_GT(r.epsilon, 0.0);
}

TEST(Wasserstein, SinkhornApproachesExactValue) {
  // One point against a symmetric pair: every coupling costs 1.
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(1, 2);
  Eigen::MatrixXd q(2, 2);
  q << 1, 0, -1, 0;
  const W2Result r = wasserstein2_detailed(ParticleCloud(p), ParticleCloud(q));
  EXPECT_NEAR(r.distance, 1.0, 1e-6);
}

TEST(Wasserstein, DimensionMismatch) {
  EXPECT_EQ(code_of([] { wasserstein2(ParticleCloud(col({1.0})), ParticleCloud(Eigen::MatrixXd::Zero(1, 2))); }),
            ErrorCode::DimensionMismatch);
}

TEST(CloudCsv, RoundTrip) {
  Eigen::MatrixXd p(3, 2);
  p << 0.1, -0.2, 1.0 / 3.0, 2.0, -7.5, 1e-9;
  Eigen::VectorXd w(3);
  w << 0.2, 0.3, 0.5;
  const ParticleCloud c(p, w);
  std::stringstream ss;
  write_cloud_csv(ss, c);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "x1,x2,weight");
  const ParticleCloud back = read_cloud_csv(ss);
  EXPECT_EQ(back.points(), c.points());
  EXPECT_EQ(back.weights(), c.weights());
}
