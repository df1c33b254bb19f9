#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>

#include <json.hpp>

#include "mlnet/error.hpp"
#include "mlnet/trace.hpp"

namespace mlnet {

/// Shortest text that reads back to the same double (17 significant digits).
inline std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

/// One row per iteration: t, V_0..V_{n-1}, then the scalar diagnostics.
inline void write_trace_csv(std::ostream& out, const Trace& trace) {
  const std::size_t n = trace.rows.empty() ? 0 : static_cast<std::size_t>(trace.rows.front().variances.size());
  out << "t";
  for (std::size_t v = 0; v < n; ++v) out << ",V_" << v;
  out << ",consensus_gap,spread,step_variance,orthogonality,identity,telescoping\n";
  for (const auto& row : trace.rows) {
    out << row.t;
    for (Eigen::Index v = 0; v < row.variances.size(); ++v) out << ',' << format_real(row.variances[v]);
    out << ',' << format_real(row.consensus_gap) << ',' << format_real(row.spread) << ','
        << format_real(row.step_variance) << ',' << format_real(row.orthogonality) << ','
        << format_real(row.identity) << ',' << format_real(row.telescoping) << '\n';
  }
}

inline nlohmann::json to_json(const Vector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline nlohmann::json optional_json(const std::optional<double>& value) {
  return value ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

inline nlohmann::json trace_summary(const Trace& trace) {
  nlohmann::json j;
  j["dynamics"] = to_string(trace.dynamics);
  j["converged"] = trace.converged;
  j["status"] = trace.converged ? "converged" : "undetermined";
  j["iterations"] = trace.iterations;
  j["limit_weights"] = to_json(trace.limit_weights);
  j["limit_variance"] = trace.limit_variance;
  j["rate_estimate"] = optional_json(trace.rate_estimate);
  // Variance gaps contract at the square of the coordinate rate.
  j["variance_rate_estimate"] =
      trace.rate_estimate ? nlohmann::json(*trace.rate_estimate * *trace.rate_estimate) : nlohmann::json(nullptr);
  return j;
}

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

/// Writes through a temporary sibling and renames it into place, so a
/// failed run never leaves a partial file behind.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::function<void(std::ostream&)>& writer) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    writer(out);
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("write failed: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, [&](std::ostream& out) { out << text; });
}

}  // namespace mlnet
