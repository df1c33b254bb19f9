#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mlnet/error.hpp"
#include "mlnet/state.hpp"

namespace mlnet {

enum class Dynamics { ml, ml_memory, averaging };

inline const char* to_string(Dynamics d) {
  switch (d) {
    case Dynamics::ml: return "ml";
    case Dynamics::ml_memory: return "ml_memory";
    case Dynamics::averaging: return "averaging";
  }
  return "unknown";
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Diagnostics recorded after each iteration. Quantities that need a
/// predecessor, or that only make sense for the ML dynamics, are NaN when
/// not applicable.
struct TraceRow {
  std::size_t t = 0;
  Vector variances;             ///< V_v(t)
  double consensus_gap = 0.0;   ///< max_v Var[X_v(t) - mean_w X_w(t)]
  double spread = 0.0;          ///< max_v V_v(t) - min_v V_v(t)
  double step_variance = kNaN;  ///< max_v Var[X_v(t) - X_v(t-1)]
  double orthogonality = kNaN;  ///< max |Cov(X_v(t), X_v(t) - X_w(t-1))|, w in N(v)
  double identity = kNaN;       ///< max |Var[X_v(t)] - Cov(X_v(t), X_w(t-1))|
  double telescoping = kNaN;    ///< max |Var[X_v(t)-X_v(t-1)] - (V_v(t-1) - V_v(t))|
};

struct Trace {
  Dynamics dynamics = Dynamics::ml;
  std::vector<TraceRow> rows;
  bool converged = false;
  /// First t at which the stopping test held when converged, otherwise the
  /// number of steps taken before the cap.
  std::size_t iterations = 0;
  EstimatorState final_state;
  Vector limit_weights;  ///< columns of the final M averaged over agents
  double limit_variance = kNaN;
  std::optional<double> rate_estimate;
  std::vector<EstimatorState> states;  ///< every M(t), only when requested
};

/// Asymptotic per-step contraction of the estimators' coordinates.
///
/// Fits a least-squares line to log Var[X(t+1) - X(t)] (maximized over
/// agents) across the final third of the trace. The step variance is a
/// squared coordinate gap, so the coordinate factor is exp(slope / 2); the
/// variance gap itself contracts at the square of the returned value.
/// A one-step collapse of the step variance by more than 1e-8 marks
/// finite-time convergence and yields 0.
inline double estimate_rate(const Trace& trace) {
  if (!trace.converged) throw InsufficientData("rate needs a converged trace");
  std::vector<std::pair<double, double>> series;
  for (const auto& row : trace.rows)
    if (row.t > 0 && std::isfinite(row.step_variance)) series.emplace_back(static_cast<double>(row.t), row.step_variance);

  for (std::size_t i = 1; i < series.size(); ++i) {
    const double prev = series[i - 1].second;
    const double cur = series[i].second;
    if (prev > 0.0 && cur < 1e-8 * prev) return 0.0;
  }
  if (trace.iterations < 10 || series.size() < 10)
    throw InsufficientData("rate needs at least 10 iterations, got " + std::to_string(trace.iterations));

  const std::size_t start = series.size() - series.size() / 3;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, count = 0;
  for (std::size_t i = start; i < series.size(); ++i) {
    if (!(series[i].second > 0.0)) continue;
    const double x = series[i].first;
    const double y = std::log(series[i].second);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    count += 1;
  }
  if (count < 3) throw InsufficientData("too few positive step variances in the fit window");
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  return std::exp(slope / 2.0);
}

}  // namespace mlnet
