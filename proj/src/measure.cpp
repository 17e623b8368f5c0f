#include "mfg/measure.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace mfg {

ParticleCloud::ParticleCloud(Eigen::MatrixXd points)
    : points_(std::move(points)) {
  const auto n = points_.rows();
  weights_ = Eigen::VectorXd::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  validate_and_cache();
}

ParticleCloud::ParticleCloud(Eigen::MatrixXd points, Eigen::VectorXd weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  validate_and_cache();
}

ParticleCloud ParticleCloud::dirac(const Vec& x) {
  Eigen::MatrixXd p(1, x.size());
  p.row(0) = x.transpose();
  return ParticleCloud(std::move(p));
}

void ParticleCloud::validate_and_cache() {
  const auto n = points_.rows();
  if (n < 1) throw Error(ErrorCode::InvalidCloud, "cloud has no particles");
  if (points_.cols() < 1 || points_.cols() > kMaxDim)
    throw Error(ErrorCode::InvalidCloud, "cloud dimension must be in [1, 8]");
  if (weights_.size() != n)
    throw Error(ErrorCode::InvalidCloud, "weight count differs from particle count");
  if (!points_.allFinite() || !weights_.allFinite())
    throw Error(ErrorCode::InvalidCloud, "cloud contains non-finite entries");
  if ((weights_.array() < 0.0).any())
    throw Error(ErrorCode::InvalidCloud, "negative weight");
  if (std::abs(weights_.sum() - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidCloud, "weights do not sum to one");

  const double w0 = weights_(0);
  uniform_ = (weights_.array() == w0).all();
  mean_ = (points_.transpose() * weights_);
  second_moment_ = weights_.dot(points_.rowwise().squaredNorm());
}

CloudStats cloud_stats(const ParticleCloud& a) {
  CloudStats s;
  s.mean = a.mean();
  s.second_moment = a.second_moment();
  s.w2_to_origin = std::sqrt(s.second_moment);
  return s;
}

namespace {

double w2_1d(const ParticleCloud& a, const ParticleCloud& b) {
  auto sorted_index = [](const ParticleCloud& c) {
    std::vector<int> idx(c.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) {
      return c.points()(i, 0) < c.points()(j, 0);
    });
    return idx;
  };
  const auto ia = sorted_index(a);
  const auto ib = sorted_index(b);

  // Walk both cumulative distributions, transporting the overlapping mass.
  std::size_t i = 0, j = 0;
  double ra = a.weight(ia[0]), rb = b.weight(ib[0]);
  double cost = 0.0;
  while (i < ia.size() && j < ib.size()) {
    const double m = std::min(ra, rb);
    const double d = a.points()(ia[i], 0) - b.points()(ib[j], 0);
    cost += m * d * d;
    ra -= m;
    rb -= m;
    if (ra <= 1e-15) {
      if (++i < ia.size()) ra = a.weight(ia[i]);
    }
    if (rb <= 1e-15) {
      if (++j < ib.size()) rb = b.weight(ib[j]);
    }
  }
  return std::sqrt(std::max(0.0, cost));
}

// Hungarian algorithm (shortest augmenting path, O(N^3)) on a square cost.
double assignment_cost(const Eigen::MatrixXd& c) {
  const int n = static_cast<int>(c.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += c(p[j] - 1, j - 1);
  return total;
}

double log_sum_exp(const Eigen::ArrayXd& a) {
  const double m = a.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((a - m).exp().sum());
}

W2Result sinkhorn(const ParticleCloud& a, const ParticleCloud& b, const W2Options& o) {
  const int na = a.size(), nb = b.size();
  Eigen::MatrixXd c(na, nb);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j)
      c(i, j) = (a.points().row(i) - b.points().row(j)).squaredNorm();
  const double scale = std::max(c.maxCoeff(), 1e-300);
  const double eps = o.epsilon_scale * scale;

  const Eigen::ArrayXd la = a.weights().array().log();
  const Eigen::ArrayXd lb = b.weights().array().log();
  Eigen::ArrayXd f = Eigen::ArrayXd::Zero(na), g = Eigen::ArrayXd::Zero(nb);
  for (int it = 0; it < o.sinkhorn_iters; ++it) {
    Eigen::ArrayXd f_old = f;
    for (int i = 0; i < na; ++i)
      f(i) = -eps * log_sum_exp(lb + (g - c.row(i).transpose().array()) / eps);
    for (int j = 0; j < nb; ++j)
      g(j) = -eps * log_sum_exp(la + (f - c.col(j).array()) / eps);
    if ((f - f_old).abs().maxCoeff() < o.sinkhorn_tol * scale) break;
  }
  double cost = 0.0;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j)
      cost += std::exp(la(i) + lb(j) + (f(i) + g(j) - c(i, j)) / eps) * c(i, j);
  return {std::sqrt(std::max(0.0, cost)), W2Mode::Sinkhorn, eps};
}

}  // namespace

W2Result wasserstein2_detailed(const ParticleCloud& a, const ParticleCloud& b,
                               const W2Options& opts) {
  if (a.dim() != b.dim())
    throw Error(ErrorCode::DimensionMismatch, "clouds have different dimensions");
  if (opts.mode == W2Mode::Sinkhorn) return sinkhorn(a, b, opts);
  if (a.dim() == 1) return {w2_1d(a, b), W2Mode::Exact, 0.0};

  const bool assignable = a.uniform() && b.uniform() && a.size() == b.size();
  if (assignable && a.size() <= opts.max_assignment_size) {
    const int n = a.size();
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        c(i, j) = (a.points().row(i) - b.points().row(j)).squaredNorm();
    const double cost = assignment_cost(c) / static_cast<double>(n);
    return {std::sqrt(std::max(0.0, cost)), W2Mode::Exact, 0.0};
  }
  if (opts.mode == W2Mode::Exact)
    throw Error(ErrorCode::UnsupportedWeighting,
                "exact W2 in dimension >= 2 needs equal-size uniform clouds");
  return sinkhorn(a, b, opts);
}

double wasserstein2(const ParticleCloud& a, const ParticleCloud& b) {
  W2Options o;
  o.mode = W2Mode::Exact;
  return wasserstein2_detailed(a, b, o).distance;
}

void write_cloud_csv(std::ostream& os, const ParticleCloud& c) {
  os.precision(17);
  for (int k = 0; k < c.dim(); ++k) os << 'x' << (k + 1) << ',';
  os << "weight\n";
  for (int i = 0; i < c.size(); ++i) {
    for (int k = 0; k < c.dim(); ++k) os << c.points()(i, k) << ',';
    os << c.weight(i) << '\n';
  }
}

ParticleCloud read_cloud_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::InvalidCloud, "empty cloud CSV");
  const int cols = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  if (cols < 2) throw Error(ErrorCode::InvalidCloud, "cloud CSV needs x and weight columns");
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != cols)
      throw Error(ErrorCode::InvalidCloud, "ragged cloud CSV row");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd pts(rows.size(), cols - 1);
  Eigen::VectorXd w(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int k = 0; k < cols - 1; ++k) pts(i, k) = rows[i][k];
    w(i) = rows[i][cols - 1];
  }
  return ParticleCloud(std::move(pts), std::move(w));
}

}  // namespace mfg
