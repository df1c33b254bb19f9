#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "mlnet/error.hpp"
#include "mlnet/graph.hpp"
#include "mlnet/linalg.hpp"
#include "mlnet/signal_model.hpp"
#include "mlnet/state.hpp"
#include "mlnet/trace.hpp"

namespace mlnet {

/// How an agent computes its minimum-variance combination.
enum class FusionMode {
  /// Least squares over the differences between each candidate and the
  /// agent's own estimator. Stays accurate as the candidates coalesce.
  anchored,
  /// The pseudo-inverse formula C^+ 1 / 1'C^+ 1 on the candidates'
  /// covariance matrix. Loses accuracy once C is numerically rank one.
  direct,
};

inline const char* to_string(FusionMode mode) {
  return mode == FusionMode::anchored ? "anchored" : "direct";
}

struct FusionOptions {
  double rtol = kDefaultRtol;
  FusionMode mode = FusionMode::anchored;
  /// Subtract Z(inf) from every estimator before forming covariances.
  bool centered = false;
};

struct StopCriteria {
  double eps_consensus = 1e-12;
  double eps_variance_drop = 1e-12;
  std::size_t max_iters = 10000;
};

struct RunOptions {
  StopCriteria stop;
  FusionOptions fusion;
  bool record_states = false;
};

namespace detail {

/// Minimum-variance fusion of `own` with the candidates own + diffs.col(i).
/// Returns beta such that the fused estimator is own + diffs * beta.
inline Vector fusion_coefficients(const Vector& own, const Matrix& diffs, const SignalModel& model,
                                  const FusionOptions& opts, Vertex v) {
  const Eigen::Index k = diffs.cols();
  if (k == 0) return Vector();
  const Covariance& sigma = model.sigma0();
  const Vector anchor = opts.centered ? Vector(own - model.global_weights()) : own;

  if (opts.mode == FusionMode::anchored) {
    const Matrix gram = sigma.gram(diffs);
    // Difference directions with variance below rtol^2 * Var[own] are
    // treated as rounding noise and dropped.
    const double floor = opts.rtol * opts.rtol * sigma.quadratic(own);
    const double top = gram.diagonal().maxCoeff();
    if (!(top > floor)) return Vector::Zero(k);
    const double cut = std::max(opts.rtol, floor / top);
    const Vector b = sigma.cross(diffs, anchor);
    // rcond bounds the 2-norm reciprocal condition number within a factor k;
    // when no eigenvalue can fall below the cutoff the inverse is the
    // pseudo-inverse and a factorization suffices.
    const Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() == Eigen::Success && ldlt.rcond() > 10.0 * cut * static_cast<double>(k)) return -ldlt.solve(b);
    return -pinv_psd(gram, cut) * b;
  }

  Matrix candidates(diffs.rows(), k + 1);
  candidates.col(0) = anchor;
  candidates.rightCols(k) = diffs.colwise() + anchor;
  Matrix c = sigma.gram(candidates);
  // Z(inf) is uncorrelated with every unbiased estimator minus Z(inf).
  if (opts.centered) c.array() += model.global_variance();
  try {
    return min_variance_weights(c, opts.rtol).weights.tail(k);
  } catch (const DegenerateDenominator&) {
    throw DegenerateDenominator(v);
  }
}

/// Differences of unbiased estimators have coefficient sum zero; removing
/// the rounding residue keeps large fusion coefficients from biasing X_v.
inline void remove_sum(Matrix& diffs) {
  if (diffs.rows() > 0) diffs.rowwise() -= diffs.colwise().mean();
}

inline Matrix neighbor_differences(const Graph& g, const EstimatorState& s, Vertex v) {
  const auto& nbrs = g.neighbors(v);
  Matrix diffs(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(nbrs.size() - 1));
  Eigen::Index col = 0;
  for (Vertex w : nbrs)
    if (w != v) diffs.col(col++) = s.difference(w, v);
  remove_sum(diffs);
  return diffs;
}

}  // namespace detail

inline EstimatorState init_state(const Graph& g) { return EstimatorState::initial(g.size()); }

/// One synchronous step of the memoryless dynamics: every agent replaces its
/// estimator with the minimum-variance unbiased combination of the time-t
/// estimators in N(v).
inline EstimatorState ml_step(const Graph& g, const EstimatorState& s, const SignalModel& model,
                              const FusionOptions& opts = {}) {
  Matrix next = s.deviations();
  for (Vertex v = 0; v < g.size(); ++v) {
    const Matrix diffs = detail::neighbor_differences(g, s, v);
    if (diffs.cols() == 0) continue;
    const Vector beta = detail::fusion_coefficients(s.column(v), diffs, model, opts, v);
    next.col(static_cast<Eigen::Index>(v)) += diffs * beta;
  }
  return EstimatorState(s.t() + 1, s.reference(), std::move(next));
}

/// One step with memory: agent v fuses its neighbors' current estimators and
/// all of its own earlier ones.
inline MemoryState ml_step_with_memory(const Graph& g, const MemoryState& s, const SignalModel& model,
                                       const FusionOptions& opts = {}) {
  const EstimatorState& cur = s.current;
  Matrix next = cur.deviations();
  for (Vertex v = 0; v < g.size(); ++v) {
    const Matrix nbr = detail::neighbor_differences(g, cur, v);
    const auto& past = s.history[v];
    const Vector own = cur.column(v);
    // The last history entry is X_v(t) itself.
    const Eigen::Index remembered = static_cast<Eigen::Index>(past.size()) - 1;
    Matrix diffs(nbr.rows(), nbr.cols() + remembered);
    diffs.leftCols(nbr.cols()) = nbr;
    for (Eigen::Index i = 0; i < remembered; ++i) diffs.col(nbr.cols() + i) = past[static_cast<std::size_t>(i)] - own;
    if (diffs.cols() == 0) continue;
    detail::remove_sum(diffs);
    const Vector beta = detail::fusion_coefficients(own, diffs, model, opts, v);
    next.col(static_cast<Eigen::Index>(v)) += diffs * beta;
  }
  MemoryState out{EstimatorState(cur.t() + 1, cur.reference(), std::move(next)), s.history};
  for (Vertex v = 0; v < g.size(); ++v) out.history[v].push_back(out.current.column(v));
  return out;
}

/// Simple iterative averaging: X_v(t+1) is the plain mean over N(v).
inline EstimatorState averaging_step(const Graph& g, const EstimatorState& s) {
  Matrix next(s.deviations().rows(), s.deviations().cols());
  for (Vertex v = 0; v < g.size(); ++v) {
    Vector acc = Vector::Zero(next.rows());
    for (Vertex w : g.neighbors(v)) acc += s.deviation(w);
    next.col(static_cast<Eigen::Index>(v)) = acc / static_cast<double>(g.degree(v));
  }
  return EstimatorState(s.t() + 1, s.reference(), std::move(next));
}

/// Z(inf): the minimum-variance unbiased estimator over all initial signals.
inline MinVariance global_mle(const Graph& g, const SignalModel& model) {
  if (model.size() != g.size()) throw std::invalid_argument("signal model size does not match graph");
  return {model.global_weights(), model.global_variance()};
}

inline Vector global_mle_weights(const Graph& g, const SignalModel& model) { return global_mle(g, model).weights; }

/// C(t) = M' Sigma0 M.
inline Matrix covariance(const EstimatorState& s, const SignalModel& model) {
  return model.sigma0().gram(s.coefficients());
}

inline Vector variances(const EstimatorState& s, const SignalModel& model) {
  Vector out(static_cast<Eigen::Index>(s.size()));
  for (Vertex v = 0; v < s.size(); ++v) out[static_cast<Eigen::Index>(v)] = model.sigma0().quadratic(s.column(v));
  return out;
}

/// max_v Var[X_v(t) - mean_w X_w(t)]
inline double consensus_gap(const EstimatorState& s, const SignalModel& model) {
  const Vector mean = s.deviations().rowwise().mean();
  double gap = 0.0;
  for (Vertex v = 0; v < s.size(); ++v) gap = std::max(gap, model.sigma0().quadratic(s.deviation(v) - mean));
  return gap;
}

/// Smallest correlation between any two agents' estimators.
inline double min_pairwise_correlation(const EstimatorState& s, const SignalModel& model) {
  const Matrix c = covariance(s, model);
  double lowest = 1.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = i + 1; j < c.cols(); ++j)
      lowest = std::min(lowest, c(i, j) / std::sqrt(c(i, i) * c(j, j)));
  return lowest;
}

/// Per-vertex residuals of the identities that every exact ML step satisfies.
struct DiagnosticsReport {
  Vector orthogonality;  ///< max over w in N(v) of |Cov(X_v(t+1), X_v(t+1) - X_w(t))|
  Vector identity;       ///< max over w in N(v) of |Var[X_v(t+1)] - Cov(X_v(t+1), X_w(t))|
  Vector telescoping;    ///< |Var[X_v(t+1) - X_v(t)] - (V_v(t) - V_v(t+1))|
  Vector step_variance;  ///< Var[X_v(t+1) - X_v(t)]

  double max_orthogonality() const { return orthogonality.size() ? orthogonality.maxCoeff() : 0.0; }
  double max_identity() const { return identity.size() ? identity.maxCoeff() : 0.0; }
  double max_telescoping() const { return telescoping.size() ? telescoping.maxCoeff() : 0.0; }
};

inline DiagnosticsReport diagnostics_check(const EstimatorState& before, const EstimatorState& after,
                                           const Graph& g, const SignalModel& model) {
  const auto n = static_cast<Eigen::Index>(g.size());
  const Covariance& sigma = model.sigma0();
  DiagnosticsReport r{Vector::Zero(n), Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
  for (Vertex v = 0; v < g.size(); ++v) {
    const auto i = static_cast<Eigen::Index>(v);
    const Vector fused = after.column(v);
    const double var_after = sigma.quadratic(fused);
    for (Vertex w : g.neighbors(v)) {
      const Vector gap = cross_difference(after, v, before, w);
      r.orthogonality[i] = std::max(r.orthogonality[i], std::abs(sigma.inner(fused, gap)));
      const double cov = sigma.inner(fused, before.column(w));
      r.identity[i] = std::max(r.identity[i], std::abs(var_after - cov));
    }
    const Vector step = cross_difference(after, v, before, v);
    r.step_variance[i] = sigma.quadratic(step);
    const double var_before = sigma.quadratic(before.column(v));
    r.telescoping[i] = std::abs(r.step_variance[i] - (var_before - var_after));
  }
  return r;
}

/// X(0) ~ N(mu 1, Sigma0) drawn from `seed`; returns M' X(0).
inline std::vector<double> sample_realization(const EstimatorState& s, const SignalModel& model,
                                              std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(s.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector noise(n);
  for (Eigen::Index i = 0; i < n; ++i) noise[i] = normal(rng);
  const Vector x0 = Vector::Constant(n, model.mu()) + model.sigma0().sqrt() * noise;
  // Coefficients of each agent sum to one, so the mu part passes through exactly.
  const Vector centered = x0.array() - model.mu();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Vertex v = 0; v < s.size(); ++v) out[v] = model.mu() + s.column(v).dot(centered);
  return out;
}

namespace detail {

inline TraceRow make_row(const EstimatorState& s, const SignalModel& model) {
  TraceRow row;
  row.t = s.t();
  row.variances = variances(s, model);
  row.consensus_gap = consensus_gap(s, model);
  row.spread = row.variances.maxCoeff() - row.variances.minCoeff();
  return row;
}

inline void fill_step(TraceRow& row, const EstimatorState& before, const EstimatorState& after,
                      const Graph& g, const SignalModel& model, bool ml_identities) {
  if (ml_identities) {
    const DiagnosticsReport r = diagnostics_check(before, after, g, model);
    row.step_variance = r.step_variance.maxCoeff();
    row.orthogonality = r.max_orthogonality();
    row.identity = r.max_identity();
    row.telescoping = r.max_telescoping();
    return;
  }
  double step = 0.0;
  for (Vertex v = 0; v < g.size(); ++v)
    step = std::max(step, model.sigma0().quadratic(cross_difference(after, v, before, v)));
  row.step_variance = step;
}

}  // namespace detail

/// Tolerated per-step variance increase before a run is declared faulty.
inline constexpr double kMonotoneTolerance = 1e-9;

/// Iterates one of the dynamics until the consensus gap is below
/// eps_consensus and no variance moved by more than eps_variance_drop in the
/// following step, or until max_iters steps. Only the epsilon test marks a
/// run converged.
inline Trace run(Dynamics kind, const Graph& g, const SignalModel& model, const RunOptions& opts = {}) {
  if (model.size() != g.size()) throw std::invalid_argument("signal model size does not match graph");
  if (!(opts.stop.eps_consensus > 0.0) || !(opts.stop.eps_variance_drop > 0.0))
    throw std::invalid_argument("stop epsilons must be positive");
  if (opts.stop.max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");

  Trace trace;
  trace.dynamics = kind;
  const bool ml_kind = kind != Dynamics::averaging;

  MemoryState memory = MemoryState::initial(g.size());
  EstimatorState state = memory.current;
  trace.rows.push_back(detail::make_row(state, model));
  if (opts.record_states) trace.states.push_back(state);

  std::size_t steps = 0;
  while (steps < opts.stop.max_iters) {
    EstimatorState next;
    switch (kind) {
      case Dynamics::ml: next = ml_step(g, state, model, opts.fusion); break;
      case Dynamics::averaging: next = averaging_step(g, state); break;
      case Dynamics::ml_memory:
        memory = ml_step_with_memory(g, memory, model, opts.fusion);
        next = memory.current;
        break;
    }
    ++steps;

    TraceRow row = detail::make_row(next, model);
    detail::fill_step(row, state, next, g, model, ml_kind);
    const TraceRow& prev = trace.rows.back();
    double drop = 0.0;
    for (Eigen::Index v = 0; v < row.variances.size(); ++v) {
      const double increase = row.variances[v] - prev.variances[v];
      if (ml_kind && increase > kMonotoneTolerance)
        throw NonMonotoneVariance(static_cast<std::size_t>(v), row.t, increase);
      drop = std::max(drop, std::abs(increase));
    }
    const bool settled = prev.consensus_gap < opts.stop.eps_consensus && drop < opts.stop.eps_variance_drop;
    trace.rows.push_back(std::move(row));
    if (opts.record_states) trace.states.push_back(next);
    state = std::move(next);
    if (settled) {
      trace.converged = true;
      trace.iterations = state.t() - 1;
      break;
    }
  }
  if (!trace.converged) trace.iterations = steps;

  trace.final_state = state;
  trace.limit_weights = state.mean_column();
  trace.limit_variance = model.sigma0().quadratic(trace.limit_weights);
  if (trace.converged) {
    try {
      trace.rate_estimate = estimate_rate(trace);
    } catch (const InsufficientData&) {
    }
  }
  return trace;
}

}  // namespace mlnet
