#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlnet/error.hpp"
#include "mlnet/graph.hpp"
#include "mlnet/linalg.hpp"
#include "mlnet/process.hpp"
#include "mlnet/signal_model.hpp"
#include "mlnet/trace.hpp"

namespace mlnet {

/// 2 - sqrt(3): limit variance and asymptotic contraction on the 4-path.
inline const double kInterval4Xi = 2.0 - std::sqrt(3.0);

// ---------------------------------------------------------------------------
// The path on four vertices a-b-c-d.

/// Orthonormal basis used for the 4-path: b1 is twice the uniform average,
/// b2 and b3 are antisymmetric under reversal, b4 is the symmetric remainder.
/// Rows of the returned matrix are b1..b4.
inline Matrix interval4_basis() {
  const double r = 1.0 / std::sqrt(2.0);
  Matrix b(4, 4);
  b << 0.5, 0.5, 0.5, 0.5,
       -r, 0.0, 0.0, r,
       0.0, -r, r, 0.0,
       -0.5, 0.5, 0.5, -0.5;
  return b;
}

/// Recursion coordinates of a 4-path state. With every estimator shifted by
/// Z(inf) and written in the basis above, the endpoint a has coordinates
/// (0, +-x, 0, y) or (0, 0, +-x, y) and the interior vertex b has
/// (0, 0, +-z, w) or (0, +-z, 0, w), alternating with t.
struct IntervalCoordinates {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double z = 0.0;
  /// Largest entry that the pattern above requires to vanish, or that the
  /// reversal symmetry a<->d, b<->c requires to match.
  double form_residual = 0.0;
};

inline IntervalCoordinates project_interval4(const EstimatorState& s) {
  if (s.size() != 4) throw std::invalid_argument("interval projection needs a 4-vertex state");
  const Matrix mb = interval4_basis() * (s.coefficients().array() - 0.25).matrix();
  IntervalCoordinates c;
  c.x = std::hypot(mb(1, 0), mb(2, 0));
  c.y = mb(3, 0);
  c.z = std::hypot(mb(1, 1), mb(2, 1));
  c.w = mb(3, 1);
  double r = mb.row(0).cwiseAbs().maxCoeff();
  r = std::max(r, std::min(std::abs(mb(1, 0)), std::abs(mb(2, 0))));
  r = std::max(r, std::min(std::abs(mb(1, 1)), std::abs(mb(2, 1))));
  // Reversal maps a column's antisymmetric coordinates to their negatives.
  for (Eigen::Index pair = 0; pair < 2; ++pair) {
    const Eigen::Index left = pair;
    const Eigen::Index right = 3 - pair;
    r = std::max(r, std::abs(mb(1, left) + mb(1, right)));
    r = std::max(r, std::abs(mb(2, left) + mb(2, right)));
    r = std::max(r, std::abs(mb(3, left) - mb(3, right)));
  }
  c.form_residual = r;
  return c;
}

/// The closed recursion for the 4-path, t = 2..t_max.
struct IntervalRecursion {
  static constexpr std::size_t first_t = 2;
  std::vector<double> x, y, w, z;  ///< index i holds time first_t + i
  double xi = kInterval4Xi;
  double max_residual = 0.0;  ///< worst identity residual seen while iterating

  std::size_t last_t() const { return first_t + x.size() - 1; }
  IntervalCoordinates at(std::size_t t) const {
    const std::size_t i = t - first_t;
    return {x.at(i), y.at(i), w.at(i), z.at(i), 0.0};
  }
  /// z_{t+1} / z_t
  double z_ratio(std::size_t t) const { return z.at(t + 1 - first_t) / z.at(t - first_t); }
};

inline constexpr double kRecursionTolerance = 1e-8;

/// Iterates x_{t+1} = z_t, y_{t+1} = w_t,
///   w_{t+1} = x_t^2 / (x_t^2 + (y_t - w_t)^2) w_t,
///   z_{t+1} = x_t z_t / (x_t^2 + (y_t - w_t)^2) z_t,
/// from the given t = 2 coordinates, checking along the way
///   y_2 w_2 = z_2^2 + w_2^2 and w_{t-1} w_t = w_t^2 + z_t^2 (t >= 3),
///   w_t = z_t / (2 z_{t-1}) (t >= 3),
///   1/4 + w_t^2 + z_t^2 = 2 w_t,
///   z_t / z_{t+1} = 2 + sqrt(3 - 4 z_t^2).
inline IntervalRecursion interval4_recursion_from(const IntervalCoordinates& seed, std::size_t t_max) {
  if (t_max < 3 || t_max > 200) throw std::invalid_argument("t_max must lie in [3, 200]");
  IntervalRecursion rec;
  rec.x.push_back(seed.x);
  rec.y.push_back(seed.y);
  rec.w.push_back(seed.w);
  rec.z.push_back(seed.z);
  for (std::size_t t = IntervalRecursion::first_t; t < t_max; ++t) {
    const std::size_t i = t - IntervalRecursion::first_t;
    const double x = rec.x[i], y = rec.y[i], w = rec.w[i], z = rec.z[i];
    const double denom = x * x + (y - w) * (y - w);
    rec.x.push_back(z);
    rec.y.push_back(w);
    rec.w.push_back(x * x / denom * w);
    rec.z.push_back(x * z / denom * z);
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < rec.x.size(); ++i) {
    const double w = rec.w[i], z = rec.z[i];
    const double prev_w = i == 0 ? rec.y[0] : rec.w[i - 1];
    worst = std::max(worst, std::abs(prev_w * w - (w * w + z * z)));
    worst = std::max(worst, std::abs(0.25 + w * w + z * z - 2.0 * w));
    if (i > 0) worst = std::max(worst, std::abs(w - 0.5 * z / rec.z[i - 1]));
    if (i + 1 < rec.x.size())
      worst = std::max(worst, std::abs(z / rec.z[i + 1] - (2.0 + std::sqrt(3.0 - 4.0 * z * z))));
  }
  rec.max_residual = worst;
  if (!(worst <= kRecursionTolerance))
    throw RecursionDiverged("4-path recursion identity residual " + std::to_string(worst));
  return rec;
}

/// Seeds the recursion from two exact ML steps on the 4-path with unit,
/// uncorrelated signals.
inline IntervalRecursion interval4_recursion(std::size_t t_max) {
  const Graph g = path_graph(4);
  const SignalModel model = SignalModel::standard(4);
  EstimatorState s = init_state(g);
  s = ml_step(g, s, model);
  s = ml_step(g, s, model);
  const IntervalCoordinates seed = project_interval4(s);
  if (!(seed.form_residual <= kRecursionTolerance))
    throw RecursionDiverged("state at t=2 does not have the expected form");
  return interval4_recursion_from(seed, t_max);
}

struct LimitEstimator {
  Vector weights;
  double variance;
};

/// X(inf) = 1/4 [(1 - xi)(X_a + X_d) + (1 + xi)(X_b + X_c)], Var = xi.
inline LimitEstimator interval4_limit() {
  const double xi = kInterval4Xi;
  Vector w(4);
  w << 1.0 - xi, 1.0 + xi, 1.0 + xi, 1.0 - xi;
  return {w / 4.0, xi};
}

// ---------------------------------------------------------------------------
// Star on n vertices.

struct StarReport {
  std::size_t n = 0;
  double averaging_center_weight = 0.0;  ///< n / (3n - 2)
  double averaging_leaf_weight = 0.0;    ///< 2 / (3n - 2)
  double averaging_variance = 0.0;       ///< (n^2 + 4n - 4) / (3n - 2)^2
  double averaging_asymptote = 1.0 / 9.0;
  double ml_variance = 0.0;              ///< 1 / n
  std::size_t ml_convergence_time = 0;
};

inline StarReport star_closed_forms(std::size_t n) {
  if (n < 2) throw std::invalid_argument("star needs n >= 2");
  const double nn = static_cast<double>(n);
  const double denom = 3.0 * nn - 2.0;
  StarReport r;
  r.n = n;
  r.averaging_center_weight = nn / denom;
  r.averaging_leaf_weight = 2.0 / denom;
  r.averaging_variance = (nn * nn + 4.0 * nn - 4.0) / (denom * denom);
  r.ml_variance = 1.0 / nn;
  // With two vertices both agents see everything at once.
  r.ml_convergence_time = n == 2 ? 1 : 2;
  return r;
}

// ---------------------------------------------------------------------------
// Efficiency and limit-profile probes.

/// Var[X(inf)] / Var[Z(inf)] for the memoryless dynamics.
inline double price_of_anarchy(const Graph& g, const SignalModel& model, const RunOptions& opts = {}) {
  const Trace trace = run(Dynamics::ml, g, model, opts);
  if (!trace.converged)
    throw Undetermined("ML run did not converge within " + std::to_string(opts.stop.max_iters) + " steps");
  return trace.limit_variance / global_mle(g, model).variance;
}

struct ProfileFit {
  std::vector<double> weights;  ///< A_k, k = 0..2n-1
  double amplitude = 0.0;       ///< C_n
  double width = 0.0;           ///< nu
  double residual = 0.0;        ///< sum_k (A_k - C_n exp(-(k - n + 1/2)^2 / nu))^2
};

namespace detail {

struct ProfileEval {
  double amplitude;
  double residual;
};

inline ProfileEval profile_residual(std::span<const double> a, double width) {
  const double center = static_cast<double>(a.size()) / 2.0 - 0.5;
  double ag = 0.0, gg = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = static_cast<double>(k) - center;
    const double g = std::exp(-d * d / width);
    ag += a[k] * g;
    gg += g * g;
  }
  const double amp = gg > 0.0 ? ag / gg : 0.0;
  double res = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = static_cast<double>(k) - center;
    const double e = a[k] - amp * std::exp(-d * d / width);
    res += e * e;
  }
  return {amp, res};
}

}  // namespace detail

/// Least-squares fit of C exp(-(k - n + 1/2)^2 / nu) to 2n weights with the
/// center held fixed. C has a closed form for each nu; nu is located by a
/// log-spaced scan followed by golden-section refinement.
inline ProfileFit gaussian_profile_fit(std::span<const double> weights) {
  if (weights.size() < 2 || weights.size() % 2 != 0)
    throw std::invalid_argument("profile fit needs an even number of weights");
  const double len = static_cast<double>(weights.size());
  const double lo_log = std::log(1e-3);
  const double hi_log = std::log(1e3 * len * len);
  constexpr int kScan = 400;
  int best = 0;
  double best_res = detail::profile_residual(weights, std::exp(lo_log)).residual;
  for (int i = 1; i <= kScan; ++i) {
    const double res = detail::profile_residual(weights, std::exp(lo_log + (hi_log - lo_log) * i / kScan)).residual;
    if (res < best_res) {
      best_res = res;
      best = i;
    }
  }
  if (best == 0 || best == kScan) throw FitFailed("profile width search hit the bracket edge");

  const double step = (hi_log - lo_log) / kScan;
  double a = lo_log + step * (best - 1);
  double b = lo_log + step * (best + 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = detail::profile_residual(weights, std::exp(c)).residual;
  double fd = detail::profile_residual(weights, std::exp(d)).residual;
  while (b - a > 1e-12) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = detail::profile_residual(weights, std::exp(c)).residual;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = detail::profile_residual(weights, std::exp(d)).residual;
    }
  }
  const double width = std::exp(0.5 * (a + b));
  const auto eval = detail::profile_residual(weights, width);
  return {std::vector<double>(weights.begin(), weights.end()), eval.amplitude, width, eval.residual};
}

inline ProfileFit gaussian_profile_fit(const Vector& weights) {
  return gaussian_profile_fit(std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size())));
}

}  // namespace mlnet
