#pragma once

#include "mfg/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mfg {

// Weighted empirical measure on R^n. Mean and second moment are cached at
// construction so that measure-dependent callables evaluate in O(1).
class ParticleCloud {
 public:
  ParticleCloud() = default;
  explicit ParticleCloud(Eigen::MatrixXd points);
  ParticleCloud(Eigen::MatrixXd points, Eigen::VectorXd weights);

  static ParticleCloud dirac(const Vec& x);

  int size() const { return static_cast<int>(points_.rows()); }
  int dim() const { return static_cast<int>(points_.cols()); }
  bool uniform() const { return uniform_; }

  const Eigen::MatrixXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  Vec point(int i) const { return points_.row(i).transpose(); }
  double weight(int i) const { return weights_(i); }

  const Vec& mean() const { return mean_; }
  double second_moment() const { return second_moment_; }

 private:
  void validate_and_cache();

  Eigen::MatrixXd points_;
  Eigen::VectorXd weights_;
  Vec mean_;
  double second_moment_ = 0.0;
  bool uniform_ = true;
};

struct CloudStats {
  Vec mean;
  double second_moment = 0.0;
  double w2_to_origin = 0.0;
};

CloudStats cloud_stats(const ParticleCloud& a);

struct MeasureFlow {
  std::vector<ParticleCloud> clouds;
};

enum class W2Mode { Auto, Exact, Sinkhorn };

struct W2Result {
  double distance = 0.0;
  W2Mode mode = W2Mode::Exact;
  double epsilon = 0.0;  // Sinkhorn regularization; 0 for exact modes
};

struct W2Options {
  W2Mode mode = W2Mode::Auto;
  int max_assignment_size = 2048;
  double epsilon_scale = 0.01;
  int sinkhorn_iters = 2000;
  double sinkhorn_tol = 1e-10;
};

// Quantile coupling in 1-d, Hungarian assignment for equal uniform clouds in
// higher dimension, log-domain Sinkhorn otherwise (only when allowed).
W2Result wasserstein2_detailed(const ParticleCloud& a, const ParticleCloud& b,
                               const W2Options& opts = {});

double wasserstein2(const ParticleCloud& a, const ParticleCloud& b);

void write_cloud_csv(std::ostream& os, const ParticleCloud& c);
ParticleCloud read_cloud_csv(std::istream& is);

}  // namespace mfg
