#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mlnet/error.hpp"
#include "mlnet/graph.hpp"

namespace mlnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative eigenvalue cutoff used when none is given.
inline constexpr double kDefaultRtol = 1e-12;

namespace detail {

/// Effective relative cutoff: never below order * machine epsilon.
inline double relative_cutoff(double rtol, Eigen::Index order) {
  return std::max(rtol, static_cast<double>(order) * std::numeric_limits<double>::epsilon());
}

inline void require_symmetric(const Matrix& c) {
  if (c.rows() != c.cols()) throw NotSymmetric();
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw NotSymmetric();
}

}  // namespace detail

/// Symmetric eigendecomposition of a PSD matrix with eigenvalues below
/// cutoff * lambda_max treated as exact zeros.
class PsdDecomposition {
 public:
  PsdDecomposition(const Matrix& c, double rtol) {
    detail::require_symmetric(c);
    const Matrix sym = 0.5 * (c + c.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    values_ = solver.eigenvalues();
    vectors_ = solver.eigenvectors();
    lambda_max_ = values_.size() ? std::max(0.0, values_.maxCoeff()) : 0.0;
    const double cut = detail::relative_cutoff(rtol, c.rows());
    if (values_.size() && values_.minCoeff() < -cut * lambda_max_) throw NotPSD();
    threshold_ = cut * lambda_max_;
  }

  double lambda_max() const noexcept { return lambda_max_; }

  std::size_t rank() const {
    return static_cast<std::size_t>((values_.array() > threshold_).count());
  }

  Matrix pseudo_inverse() const {
    Vector inv = Vector::Zero(values_.size());
    for (Eigen::Index i = 0; i < values_.size(); ++i)
      if (values_[i] > threshold_ && values_[i] > 0.0) inv[i] = 1.0 / values_[i];
    return vectors_ * inv.asDiagonal() * vectors_.transpose();
  }

  const Vector& eigenvalues() const noexcept { return values_; }

 private:
  Vector values_;
  Matrix vectors_;
  double lambda_max_ = 0.0;
  double threshold_ = 0.0;
};

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix.
inline Matrix pinv_psd(const Matrix& c, double rtol = kDefaultRtol) {
  return PsdDecomposition(c, rtol).pseudo_inverse();
}

struct MinVariance {
  Vector weights;   ///< sums to one; entries may be negative
  double variance;  ///< weights' C weights
};

/// Minimum-variance unbiased combination of k estimators with covariance C:
/// weights C^+ 1 / (1' C^+ 1), variance 1 / (1' C^+ 1). When C is singular
/// this is the least-sum-of-squares weight vector among the optimal ones.
inline MinVariance min_variance_weights(const Matrix& c, double rtol = kDefaultRtol) {
  PsdDecomposition dec(c, rtol);
  const Matrix p = dec.pseudo_inverse();
  const Vector row_sums = p.rowwise().sum();
  const double total = row_sums.sum();
  if (!std::isfinite(total) || !(total * dec.lambda_max() > rtol)) throw DegenerateDenominator();
  return {row_sums / total, 1.0 / total};
}

struct AffinePoint {
  Vector weights;  ///< coefficients over the generating vectors
  Vector point;    ///< vectors * weights
};

/// Minimum-norm point of the affine span of the columns of `vectors`, given
/// their Gram matrix under the relevant inner product. Solved through the
/// bordered optimality system [G 1; 1' 0] with a rank-revealing
/// decomposition, so it shares no code path with min_variance_weights.
inline AffinePoint min_norm_affine_point(const Matrix& vectors, const Matrix& gram,
                                         double rtol = kDefaultRtol) {
  const Eigen::Index k = gram.rows();
  if (gram.cols() != k || vectors.cols() != k)
    throw std::invalid_argument("gram must be k x k for k generating vectors");
  detail::require_symmetric(gram);
  // Normalizing G leaves the weights unchanged and keeps the border on scale.
  const double scale = k ? gram.cwiseAbs().maxCoeff() : 0.0;
  if (!(scale > 0.0)) throw DegenerateDenominator();
  Matrix kkt = Matrix::Zero(k + 1, k + 1);
  kkt.topLeftCorner(k, k) = gram / scale;
  kkt.topRightCorner(k, 1).setOnes();
  kkt.bottomLeftCorner(1, k).setOnes();
  Vector rhs = Vector::Zero(k + 1);
  rhs[k] = 1.0;

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
  cod.setThreshold(detail::relative_cutoff(rtol, k + 1));
  const Vector sol = cod.solve(rhs);
  Vector weights = sol.head(k);

  const double variance = weights.dot(gram * weights);
  const double diag_max = k ? gram.diagonal().maxCoeff() : 0.0;
  if (!std::isfinite(variance) || !(variance > rtol * diag_max) || diag_max <= 0.0)
    throw DegenerateDenominator();
  return {weights, vectors * weights};
}

/// Row-stochastic matrix of one step of neighborhood averaging: row v is
/// uniform over N(v).
inline Matrix averaging_matrix(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Matrix p = Matrix::Zero(n, n);
  for (Vertex v = 0; v < g.size(); ++v) {
    const double share = 1.0 / static_cast<double>(g.degree(v));
    for (Vertex w : g.neighbors(v)) p(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(w)) = share;
  }
  return p;
}

/// Second-largest eigenvalue modulus of a row-stochastic matrix, from a full
/// dense eigendecomposition. Zero for a 1x1 matrix.
inline double second_eigenvalue_magnitude(const Matrix& p) {
  if (p.rows() != p.cols()) throw NotStochastic();
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    if (std::abs(p.row(i).sum() - 1.0) > 1e-12) throw NotStochastic();
  if (p.rows() < 2) return 0.0;
  Eigen::EigenSolver<Matrix> solver(p, /*computeEigenvectors=*/false);
  std::vector<double> mags;
  for (Eigen::Index i = 0; i < p.rows(); ++i) mags.push_back(std::abs(solver.eigenvalues()[i]));
  std::sort(mags.begin(), mags.end(), std::greater<>());
  return mags[1];
}

}  // namespace mlnet
