#pragma once

// Reference computations that share no code with the library. They work in
// long double with textbook algorithms and are only meant for small inputs.

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Real = long double;
using Mat = std::vector<std::vector<Real>>;
using Vec = std::vector<Real>;

inline Mat from_eigen(const Eigen::MatrixXd& m) {
  Mat out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

/// Gaussian elimination with partial pivoting; throws on a singular system.
inline Vec solve(Mat a, Vec b) {
  const std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-30L) throw std::runtime_error("oracle: singular system");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const Real f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    Real s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

/// Minimizes a'Ca subject to sum(a) = 1 through the Lagrange system
/// [C 1; 1' 0][a; l] = [0; 1]. C must be nonsingular.
inline std::pair<Vec, Real> min_variance(const Eigen::MatrixXd& c) {
  const std::size_t k = static_cast<std::size_t>(c.rows());
  Mat kkt(k + 1, Vec(k + 1, 0.0L));
  Vec rhs(k + 1, 0.0L);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) kkt[i][j] = c(i, j);
    kkt[i][k] = kkt[k][i] = 1.0L;
  }
  rhs[k] = 1.0L;
  Vec sol = solve(kkt, rhs);
  sol.resize(k);
  Real var = 0.0L;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) var += sol[i] * c(i, j) * sol[j];
  return {sol, var};
}

/// det(M - lambda I) by cofactor expansion (small M only).
inline Real char_poly(const Eigen::MatrixXd& m, Real lambda) {
  Mat a = from_eigen(m);
  for (std::size_t i = 0; i < a.size(); ++i) a[i][i] -= lambda;
  auto det = [](auto&& self, const Mat& x) -> Real {
    const std::size_t n = x.size();
    if (n == 1) return x[0][0];
    Real total = 0.0L;
    for (std::size_t c = 0; c < n; ++c) {
      Mat minor;
      for (std::size_t r = 1; r < n; ++r) {
        Vec row;
        for (std::size_t j = 0; j < n; ++j)
          if (j != c) row.push_back(x[r][j]);
        minor.push_back(row);
      }
      total += ((c % 2) ? -1.0L : 1.0L) * x[0][c] * self(self, minor);
    }
    return total;
  };
  return det(det, a);
}

/// Column v of P^t for the neighborhood-averaging matrix, by repeated
/// multiplication from the adjacency lists.
inline Mat averaging_power(const std::vector<std::vector<std::size_t>>& nbrs, std::size_t t) {
  const std::size_t n = nbrs.size();
  Mat m(n, Vec(n, 0.0L));  // m[v] = coefficients of X_v(t)
  for (std::size_t v = 0; v < n; ++v) m[v][v] = 1.0L;
  for (std::size_t s = 0; s < t; ++s) {
    Mat next(n, Vec(n, 0.0L));
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t w : nbrs[v])
        for (std::size_t i = 0; i < n; ++i) next[v][i] += m[w][i];
      for (std::size_t i = 0; i < n; ++i) next[v][i] /= static_cast<Real>(nbrs[v].size());
    }
    m = std::move(next);
  }
  return m;
}

/// Inverse-variance weights for independent signals.
inline Vec inverse_variance_weights(const Vec& variances) {
  Real total = 0.0L;
  for (Real s : variances) total += 1.0L / s;
  Vec w;
  for (Real s : variances) w.push_back(1.0L / s / total);
  return w;
}

/// Random symmetric PSD matrix of order k and the requested rank.
inline Eigen::MatrixXd random_psd(std::mt19937_64& rng, int k, int rank) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd f(k, rank);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < rank; ++j) f(i, j) = normal(rng);
  Eigen::MatrixXd c = f * f.transpose();
  return 0.5 * (c + c.transpose());
}

}  // namespace oracle
