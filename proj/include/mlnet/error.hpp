#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DisconnectedGraph : public Error {
 public:
  DisconnectedGraph() : Error("graph is not connected") {}
};

class VertexOutOfRange : public Error {
 public:
  VertexOutOfRange(std::size_t vertex, std::size_t n)
      : Error("vertex " + std::to_string(vertex) + " out of range for n=" + std::to_string(n)) {}
};

class GenerationFailed : public Error {
 public:
  using Error::Error;
};

class NotSymmetric : public Error {
 public:
  NotSymmetric() : Error("matrix is not symmetric") {}
};

class NotPSD : public Error {
 public:
  NotPSD() : Error("matrix is not positive semi-definite") {}
};

class NotStochastic : public Error {
 public:
  NotStochastic() : Error("matrix rows do not sum to one") {}
};

/// Raised when the fusion denominator sum(C^+) vanishes. Carries the vertex
/// whose neighborhood fusion failed, or npos when raised outside a step.
class DegenerateDenominator : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit DegenerateDenominator(std::size_t vertex = npos)
      : Error(vertex == npos ? std::string("degenerate fusion denominator")
                             : "degenerate fusion denominator at vertex " + std::to_string(vertex)),
        vertex_(vertex) {}

  std::size_t vertex() const noexcept { return vertex_; }

 private:
  std::size_t vertex_;
};

class NonMonotoneVariance : public Error {
 public:
  NonMonotoneVariance(std::size_t vertex, std::size_t t, double increase)
      : Error("variance of vertex " + std::to_string(vertex) + " increased by " +
              std::to_string(increase) + " at t=" + std::to_string(t)) {}
};

class RecursionDiverged : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// The run hit max_iters before the convergence test fired.
class Undetermined : public Error {
 public:
  using Error::Error;
};

class FitFailed : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mlnet
