#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>

#include "mlnet/linalg.hpp"

namespace mlnet {

/// Covariance of the initial signals X(0). Identity and diagonal structure
/// are kept implicit so that quadratic forms stay O(n).
class Covariance {
 public:
  enum class Kind { identity, diagonal, dense };

  static Covariance identity(std::size_t n) {
    Covariance c;
    c.kind_ = Kind::identity;
    c.n_ = n;
    return c;
  }

  static Covariance diagonal(Vector diag) {
    for (Eigen::Index i = 0; i < diag.size(); ++i)
      if (!(diag[i] > 0.0)) throw std::invalid_argument("covariance diagonal must be positive");
    Covariance c;
    c.kind_ = Kind::diagonal;
    c.n_ = static_cast<std::size_t>(diag.size());
    c.diag_ = std::move(diag);
    return c;
  }

  static Covariance dense(Matrix m, double rtol = kDefaultRtol) {
    detail::require_symmetric(m);
    PsdDecomposition check(m, rtol);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (!(m(i, i) > 0.0)) throw std::invalid_argument("covariance diagonal must be positive");
    Covariance c;
    c.kind_ = Kind::dense;
    c.n_ = static_cast<std::size_t>(m.rows());
    c.dense_ = 0.5 * (m + m.transpose());
    return c;
  }

  Kind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return n_; }

  Matrix to_dense() const {
    const auto n = static_cast<Eigen::Index>(n_);
    switch (kind_) {
      case Kind::identity: return Matrix::Identity(n, n);
      case Kind::diagonal: return diag_.asDiagonal();
      case Kind::dense: return dense_;
    }
    return {};
  }

  /// S * a
  Matrix apply(const Matrix& a) const {
    switch (kind_) {
      case Kind::identity: return a;
      case Kind::diagonal: return diag_.asDiagonal() * a;
      case Kind::dense: return dense_ * a;
    }
    return {};
  }

  /// a' S b
  double inner(const Vector& a, const Vector& b) const {
    switch (kind_) {
      case Kind::identity: return a.dot(b);
      case Kind::diagonal: return (a.array() * diag_.array() * b.array()).sum();
      case Kind::dense: return a.dot(dense_ * b);
    }
    return 0.0;
  }

  double quadratic(const Vector& a) const { return inner(a, a); }

  /// A' S A, symmetrized.
  Matrix gram(const Matrix& a) const {
    Matrix g = a.transpose() * apply(a);
    return 0.5 * (g + g.transpose());
  }

  /// A' S b
  Vector cross(const Matrix& a, const Vector& b) const { return a.transpose() * apply(b); }

  /// Symmetric square root, used to draw N(0, S) samples.
  Matrix sqrt() const {
    switch (kind_) {
      case Kind::identity: return to_dense();
      case Kind::diagonal: return Matrix(diag_.cwiseSqrt().asDiagonal());
      case Kind::dense: {
        Eigen::SelfAdjointEigenSolver<Matrix> solver(dense_);
        Vector root = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return solver.eigenvectors() * root.asDiagonal() * solver.eigenvectors().transpose();
      }
    }
    return {};
  }

 private:
  Kind kind_ = Kind::identity;
  std::size_t n_ = 0;
  Vector diag_;
  Matrix dense_;
};

/// Mean mu and covariance of the initial signals, plus the cached global
/// minimum-variance estimator Z(inf) over them.
class SignalModel {
 public:
  explicit SignalModel(Covariance sigma0, double mu = 0.0, double rtol = kDefaultRtol)
      : mu_(mu), sigma0_(std::move(sigma0)) {
    const auto n = static_cast<Eigen::Index>(sigma0_.size());
    switch (sigma0_.kind()) {
      case Covariance::Kind::identity:
        global_ = {Vector::Constant(n, 1.0 / static_cast<double>(n)), 1.0 / static_cast<double>(n)};
        break;
      case Covariance::Kind::diagonal: {
        const Vector precision = sigma0_.to_dense().diagonal().cwiseInverse();
        global_ = {precision / precision.sum(), 1.0 / precision.sum()};
        break;
      }
      case Covariance::Kind::dense:
        global_ = min_variance_weights(sigma0_.to_dense(), rtol);
        break;
    }
  }

  static SignalModel standard(std::size_t n, double mu = 0.0) {
    return SignalModel(Covariance::identity(n), mu);
  }

  double mu() const noexcept { return mu_; }
  const Covariance& sigma0() const noexcept { return sigma0_; }
  std::size_t size() const noexcept { return sigma0_.size(); }

  /// Coefficients of Z(inf) over X(0).
  const Vector& global_weights() const noexcept { return global_.weights; }
  double global_variance() const noexcept { return global_.variance; }

 private:
  double mu_;
  Covariance sigma0_;
  MinVariance global_;
};

}  // namespace mlnet
