#pragma once

#include <Eigen/Dense>

#include <vector>

namespace mfg {

// Least-squares projection onto total-degree polynomials of standardized
// features. Constant feature columns are dropped before building the basis.
// The normal equations carry a 1e-8 ridge, followed by two steps of iterated
// refinement so polynomial targets are reproduced to round-off.
class PolynomialRegressor {
 public:
  PolynomialRegressor(const Eigen::MatrixXd& features, int degree, double ridge = 1e-8);

  Eigen::MatrixXd fit_predict(const Eigen::MatrixXd& targets) const;

  int basis_size() const { return static_cast<int>(design_.cols()); }
  bool rank_deficient() const { return rank_deficient_; }

 private:
  Eigen::MatrixXd design_;
  Eigen::MatrixXd gram_;
  Eigen::LDLT<Eigen::MatrixXd> solver_;
  bool rank_deficient_ = false;
};

struct RegressionResult {
  Eigen::MatrixXd predictions;
  bool rank_deficient = false;
  int basis_size = 0;
};

RegressionResult regress_conditional(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& features,
                                     int basis_degree);

// Exponent tuples of all monomials in `vars` variables with total degree <= degree,
// constant first.
std::vector<std::vector<int>> monomial_exponents(int vars, int degree);

}  // namespace mfg
