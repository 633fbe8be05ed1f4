#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hjbpod {

/// Invalid user-supplied configuration (bad PDE parameters, malformed config
/// file, inconsistent experiment settings).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke a documented precondition (dimension mismatch, empty
/// input, mismatched inner products).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Integrator, Bellman or Riccati iteration produced a non-finite value or
/// failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficiencyError : public NumericalError {
 public:
  RankDeficiencyError(const std::string& what, std::size_t usable_rank)
      : NumericalError(what), usable_rank_(usable_rank) {}
  std::size_t usable_rank() const { return usable_rank_; }

 private:
  std::size_t usable_rank_;
};

class GridTooLargeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hjbpod
