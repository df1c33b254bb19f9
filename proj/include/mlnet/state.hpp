#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "mlnet/graph.hpp"
#include "mlnet/linalg.hpp"

namespace mlnet {

/// Every agent's estimator at iteration t, as coefficients over the initial
/// signals: column v of M holds X_v(t), M(u, v) being the weight of X_u(0).
///
/// M is stored as a shared reference column plus per-agent deviations with
/// zero row mean. Near consensus the columns differ by amounts far below the
/// resolution of the shared part, and the deviations keep those differences
/// at full relative precision.
class EstimatorState {
 public:
  EstimatorState() = default;

  /// t = 0, M = identity.
  static EstimatorState initial(std::size_t n) {
    const auto k = static_cast<Eigen::Index>(n);
    return EstimatorState(0, Vector::Zero(k), Matrix::Identity(k, k));
  }

  static EstimatorState from_coefficients(std::size_t t, const Matrix& coefficients) {
    return EstimatorState(t, Vector::Zero(coefficients.rows()), coefficients);
  }

  /// Rebases so the deviations have zero row mean.
  EstimatorState(std::size_t t, Vector reference, Matrix deviations)
      : t_(t), reference_(std::move(reference)), deviations_(std::move(deviations)) {
    const Vector mean = deviations_.rowwise().mean();
    reference_ += mean;
    deviations_.colwise() -= mean;
  }

  std::size_t t() const noexcept { return t_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(deviations_.cols()); }

  const Vector& reference() const noexcept { return reference_; }
  const Matrix& deviations() const noexcept { return deviations_; }
  auto deviation(Vertex v) const { return deviations_.col(static_cast<Eigen::Index>(v)); }

  Vector column(Vertex v) const { return reference_ + deviation(v); }

  /// X_v(t) - X_w(t), without cancellation through the reference.
  Vector difference(Vertex v, Vertex w) const { return deviation(v) - deviation(w); }

  /// Mean of the agents' estimators.
  Vector mean_column() const { return reference_ + deviations_.rowwise().mean(); }

  Matrix coefficients() const {
    Matrix m = deviations_;
    m.colwise() += reference_;
    return m;
  }

  /// Column sums of M; each is one for an unbiased state.
  Vector column_sums() const {
    return deviations_.colwise().sum().transpose().array() + reference_.sum();
  }

 private:
  std::size_t t_ = 0;
  Vector reference_;
  Matrix deviations_;
};

/// X_v(s) - Y_w(s') for estimators held in two states, computed as the
/// reference shift plus the deviation gap.
inline Vector cross_difference(const EstimatorState& a, Vertex v, const EstimatorState& b, Vertex w) {
  return (a.reference() - b.reference()) + (a.deviation(v) - b.deviation(w));
}

/// State of the dynamics in which every agent also remembers its own past
/// estimators. history[v][s] = X_v(s) for s = 0..t.
struct MemoryState {
  EstimatorState current;
  std::vector<std::vector<Vector>> history;

  static MemoryState initial(std::size_t n) {
    MemoryState s{EstimatorState::initial(n), std::vector<std::vector<Vector>>(n)};
    for (Vertex v = 0; v < n; ++v)
      s.history[v].push_back(Vector::Unit(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(v)));
    return s;
  }
};

}  // namespace mlnet
