#include "mfg/regression.hpp"

#include "mfg/types.hpp"

#include <cmath>
#include <functional>

namespace mfg {

std::vector<std::vector<int>> monomial_exponents(int vars, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(vars, 0);
  for (int total = 0; total <= degree; ++total) {
    // All exponent vectors summing to `total`, lexicographically descending.
    std::function<void(int, int)> rec = [&](int pos, int left) {
      if (pos == vars - 1) {
        cur[pos] = left;
        out.push_back(cur);
        return;
      }
      for (int e = left; e >= 0; --e) {
        cur[pos] = e;
        rec(pos + 1, left - e);
      }
    };
    if (vars == 0) {
      if (total == 0) out.push_back({});
      continue;
    }
    rec(0, total);
  }
  return out;
}

PolynomialRegressor::PolynomialRegressor(const Eigen::MatrixXd& features, int degree, double ridge) {
  if (degree < 1 || degree > 3)
    throw Error(ErrorCode::InvalidArgument, "basis degree must be 1, 2 or 3");
  const Eigen::Index N = features.rows();
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "regression needs at least one sample");
  if (!features.allFinite()) throw Error(ErrorCode::NonFiniteValue, "non-finite regression features");

  std::vector<Eigen::VectorXd> cols;
  for (Eigen::Index k = 0; k < features.cols(); ++k) {
    const double mu = features.col(k).mean();
    const double sd = std::sqrt((features.col(k).array() - mu).square().mean());
    if (sd <= 1e-12 * (1.0 + std::abs(mu))) continue;
    cols.push_back((features.col(k).array() - mu) / sd);
  }
  const auto exps = monomial_exponents(static_cast<int>(cols.size()), degree);
  design_.resize(N, static_cast<Eigen::Index>(exps.size()));
  for (std::size_t b = 0; b < exps.size(); ++b) {
    Eigen::ArrayXd col = Eigen::ArrayXd::Ones(N);
    for (std::size_t k = 0; k < cols.size(); ++k)
      for (int e = 0; e < exps[b][k]; ++e) col *= cols[k].array();
    design_.col(static_cast<Eigen::Index>(b)) = col.matrix();
  }

  const double inv_n = 1.0 / static_cast<double>(N);
  gram_ = design_.transpose() * design_ * inv_n;
  Eigen::MatrixXd reg = gram_;
  reg.diagonal().array() += ridge;
  solver_.compute(reg);

  const Eigen::Index K = design_.cols();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  rank_deficient_ = N < K || es.eigenvalues().minCoeff() <= 1e-10 * std::max(top, 1.0);
}

Eigen::MatrixXd PolynomialRegressor::fit_predict(const Eigen::MatrixXd& targets) const {
  if (targets.rows() != design_.rows())
    throw Error(ErrorCode::DimensionMismatch, "targets and features differ in sample count");
  const double inv_n = 1.0 / static_cast<double>(design_.rows());
  const Eigen::MatrixXd rhs = design_.transpose() * targets * inv_n;
  Eigen::MatrixXd coef = solver_.solve(rhs);
  for (int it = 0; it < 2; ++it) coef += solver_.solve(rhs - gram_ * coef);
  return design_ * coef;
}

RegressionResult regress_conditional(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& features,
                                     int basis_degree) {
  const PolynomialRegressor reg(features, basis_degree);
  return {reg.fit_predict(targets), reg.rank_deficient(), reg.basis_size()};
}

}  // namespace mfg
