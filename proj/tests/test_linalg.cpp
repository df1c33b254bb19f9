#include <random>

#include <gtest/gtest.h>

#include "mlnet/linalg.hpp"
#include "mlnet/signal_model.hpp"
#include "oracles.hpp"

using namespace mlnet;

namespace {

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST(Linalg, PseudoInverseAxiomsOnRandomPsd) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> order(1, 12);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = order(rng);
    const int rank = std::uniform_int_distribution<int>(1, k)(rng);
    const Matrix a = oracle::random_psd(rng, k, rank);
    const Matrix p = pinv_psd(a);
    const double scale = std::max(1.0, max_abs(a));
    EXPECT_LT(max_abs(a * p * a - a), 1e-9 * scale) << "trial " << trial;
    EXPECT_LT(max_abs(p * a * p - p), 1e-9 * std::max(1.0, max_abs(p)));
    EXPECT_LT(max_abs(a * p - (a * p).transpose()), 1e-9);
    EXPECT_LT(max_abs(p * a - (p * a).transpose()), 1e-9);
    EXPECT_EQ(PsdDecomposition(a, kDefaultRtol).rank(), static_cast<std::size_t>(rank));
  }
}

TEST(Linalg, PseudoInverseOfInvertibleIsInverse) {
  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  EXPECT_LT(max_abs(pinv_psd(a) - a.inverse()), 1e-14);
  EXPECT_LT(max_abs(pinv_psd(Matrix::Zero(3, 3))), 1e-300);
}

TEST(Linalg, RejectsAsymmetricAndIndefinite) {
  Matrix asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(pinv_psd(asym), NotSymmetric);
  EXPECT_THROW(pinv_psd(Matrix::Zero(2, 3)), NotSymmetric);
  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  EXPECT_THROW(pinv_psd(indefinite), NotPSD);
}

TEST(Linalg, MinVarianceMatchesLagrangeOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + trial % 12;
    const Matrix c = oracle::random_psd(rng, k, k) + 0.05 * Matrix::Identity(k, k);
    const MinVariance mv = min_variance_weights(c);
    const auto [weights, variance] = oracle::min_variance(c);
    EXPECT_NEAR(mv.weights.sum(), 1.0, 1e-12);
    EXPECT_NEAR(mv.variance, static_cast<double>(variance), 1e-10 * std::max(1.0, mv.variance));
    for (int i = 0; i < k; ++i) EXPECT_NEAR(mv.weights[i], static_cast<double>(weights[i]), 1e-8);
  }
}

TEST(Linalg, MinVarianceIsOptimalAgainstFeasiblePerturbations) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + trial % 11;
    const int rank = std::uniform_int_distribution<int>(1, k)(rng);
    const Matrix c = oracle::random_psd(rng, k, rank) + 1e-3 * Matrix::Identity(k, k);
    const MinVariance mv = min_variance_weights(c);
    for (int j = 0; j < 10; ++j) {
      Vector d(k);
      for (int i = 0; i < k; ++i) d[i] = normal(rng);
      d.array() -= d.mean();
      const Vector alt = mv.weights + 0.1 * d;
      EXPECT_GE(alt.dot(c * alt), mv.variance - 1e-10 * std::max(1.0, mv.variance));
    }
  }
}

TEST(Linalg, AffinePointAgreesWithMinVarianceIncludingRankDeficient) {
  // Columns are unbiased estimators (coefficients summing to one) over m
  // signals; extra columns are affine combinations of the first ones, so
  // their Gram matrix is singular.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 3 + trial % 8;
    const int base = std::uniform_int_distribution<int>(1, m)(rng);
    const int extra = trial % 3 == 0 ? 0 : std::uniform_int_distribution<int>(1, 4)(rng);
    const int k = std::min(12, base + extra);
    Matrix a(m, k);
    for (int j = 0; j < base; ++j) {
      for (int i = 0; i < m; ++i) a(i, j) = normal(rng);
      a.col(j).array() += (1.0 - a.col(j).sum()) / m;
    }
    for (int j = base; j < k; ++j) {
      Vector mix(base);
      for (int i = 0; i < base; ++i) mix[i] = normal(rng);
      mix.array() += (1.0 - mix.sum()) / base;
      a.col(j) = a.leftCols(base) * mix;
    }
    const Covariance sigma = Covariance::diagonal(Vector::LinSpaced(m, 0.5, 2.0));
    const Matrix gram = sigma.gram(a);
    const MinVariance mv = min_variance_weights(gram);
    const AffinePoint ap = min_norm_affine_point(a, gram);
    EXPECT_NEAR(ap.weights.sum(), 1.0, 1e-10);
    EXPECT_LT((ap.point - a * mv.weights).cwiseAbs().maxCoeff(), 1e-10) << "trial " << trial;
    EXPECT_NEAR(sigma.quadratic(ap.point), mv.variance, 1e-10);
    if (base == k) {
      const auto oracle_result = oracle::min_variance(gram);
      EXPECT_NEAR(mv.variance, static_cast<double>(oracle_result.second), 1e-10);
    }
  }
}

TEST(Linalg, DegenerateDenominator) {
  EXPECT_THROW(min_variance_weights(Matrix::Zero(3, 3)), DegenerateDenominator);
  EXPECT_THROW(min_norm_affine_point(Matrix::Zero(2, 2), Matrix::Zero(2, 2)), DegenerateDenominator);
  // Two estimators differing only by a sign have a zero-variance combination.
  Matrix c(2, 2);
  c << 1, -1, -1, 1;
  EXPECT_THROW(min_variance_weights(c), DegenerateDenominator);
}

TEST(Linalg, AveragingMatrixSpectrum) {
  const Matrix p4 = averaging_matrix(path_graph(4));
  EXPECT_LT((p4.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-15);
  const double expected = 0.25 + std::sqrt(33.0) / 12.0;
  EXPECT_NEAR(second_eigenvalue_magnitude(p4), expected, 1e-12);
  EXPECT_LT(std::fabs(static_cast<double>(oracle::char_poly(p4, expected))), 1e-15);

  // cycle(4): P = (I + A) / 3 with spectrum {1, 1/3, 1/3, -1/3}.
  const Matrix c4 = averaging_matrix(cycle_graph(4));
  for (double root : {1.0, 1.0 / 3.0, -1.0 / 3.0})
    EXPECT_LT(std::fabs(static_cast<double>(oracle::char_poly(c4, root))), 1e-15);
  EXPECT_NEAR(second_eigenvalue_magnitude(c4), 1.0 / 3.0, 1e-12);

  EXPECT_NEAR(second_eigenvalue_magnitude(averaging_matrix(complete_graph(5))), 0.0, 1e-12);
  EXPECT_EQ(second_eigenvalue_magnitude(Matrix::Ones(1, 1)), 0.0);
  EXPECT_THROW(second_eigenvalue_magnitude(Matrix::Identity(2, 2) * 0.5), NotStochastic);
}

TEST(Covariance, KindsAgreeWithDenseForm) {
  std::mt19937_64 rng(1);
  const Matrix dense = oracle::random_psd(rng, 5, 5) + Matrix::Identity(5, 5);
  const Vector diag = Vector::LinSpaced(5, 0.5, 3.0);
  const Matrix a = Matrix::Random(5, 3);
  for (const Covariance& s : {Covariance::identity(5), Covariance::diagonal(diag), Covariance::dense(dense)}) {
    const Matrix d = s.to_dense();
    EXPECT_LT(max_abs(s.gram(a) - a.transpose() * d * a), 1e-12);
    EXPECT_LT(max_abs(s.cross(a, a.col(0)) - a.transpose() * d * a.col(0)), 1e-12);
    EXPECT_NEAR(s.quadratic(a.col(1)), a.col(1).dot(d * a.col(1)), 1e-12);
    const Matrix root = s.sqrt();
    EXPECT_LT(max_abs(root * root.transpose() - d), 1e-10);
  }
  EXPECT_THROW(Covariance::diagonal(Vector::Zero(3)), std::invalid_argument);
  Matrix asym = dense;
  asym(0, 1) += 1.0;
  EXPECT_THROW(Covariance::dense(asym), NotSymmetric);
}

TEST(SignalModel, GlobalEstimatorUsesInverseVariances) {
  const std::vector<long double> vars{0.5L, 1.0L, 2.0L, 4.0L};
  Vector diag(4);
  for (int i = 0; i < 4; ++i) diag[i] = static_cast<double>(vars[static_cast<std::size_t>(i)]);
  const SignalModel model(Covariance::diagonal(diag));
  const auto expected = oracle::inverse_variance_weights(vars);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(model.global_weights()[i], static_cast<double>(expected[i]), 1e-15);
  EXPECT_NEAR(model.global_variance(), 1.0 / 3.75, 1e-15);

  const SignalModel dense(Covariance::dense(Matrix(diag.asDiagonal())));
  EXPECT_LT((dense.global_weights() - model.global_weights()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(SignalModel::standard(4).global_variance(), 0.25, 0.0);
}
