#pragma once

#include <cstdint>
#include <random>

#include "hjbpod/dynamics.hpp"
#include "hjbpod/hjb.hpp"
#include "hjbpod/rom.hpp"

namespace hjbpod {

enum class PolicyMode {
  /// Bellman argmin over the discrete control set at the projected state.
  kArgminOnline,
  /// Piecewise-affine interpolation of the stored node controls.
  kStoredInterpolation,
};

/// Suboptimal feedback y -> u built from a converged reduced value function.
class FeedbackPolicy {
 public:
  /// Throws ContractViolation when the grid has not converged.
  FeedbackPolicy(ValueGrid grid, ReducedSystem reduced, ControlSet controls,
                 PolicyMode mode = PolicyMode::kArgminOnline);

  double operator()(const Vector& y) const;
  /// Control at an already projected point; points outside the grid box are
  /// clamped to it first.
  double evaluate_reduced(const Vector& z) const;

  const ValueGrid& grid() const { return grid_; }
  const ReducedSystem& reduced() const { return reduced_; }
  const ControlSet& controls() const { return controls_; }
  PolicyMode mode() const { return mode_; }

 private:
  ValueGrid grid_;
  ReducedSystem reduced_;
  ControlSet controls_;
  PolicyMode mode_;
  std::vector<double> node_controls_;
};

double policy_eval(const FeedbackPolicy& policy, const Vector& y);

enum class NoiseTarget {
  /// Perturbs only the state handed to the feedback law.
  kMeasurement,
  /// Replaces the dynamic state by its perturbation every step.
  kState,
};

/// Multiplicative perturbation y_i <- (1 + eta_i) y_i, eta_i ~ U[-a, a].
struct NoiseModel {
  double amplitude = 0.0;
  std::uint64_t seed = 0;
  bool enabled = false;
  NoiseTarget target = NoiseTarget::kMeasurement;
};

Vector apply_noise(const Vector& y, double amplitude, std::mt19937_64& rng);

struct ClosedLoopOptions {
  IntegratorMode mode = IntegratorMode::kSemiImplicit;
  /// Replace the state by Psi Psi^T M y after every step.
  bool strict_reprojection = false;
};

/// Zero-order-hold closed loop: u_j = policy(y_j) (possibly perturbed),
/// then one Euler step with u_j held on [t_j, t_{j+1}].
Trajectory closed_loop(const ControlledSystem& system, const FeedbackPolicy& policy,
                       const Vector& y0, const TimeGrid& grid,
                       const NoiseModel& noise = {},
                       const ClosedLoopOptions& options = {});

}  // namespace hjbpod
