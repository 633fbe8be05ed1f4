#include "hjbpod/feedback.hpp"

#include <algorithm>

#include "hjbpod/errors.hpp"

namespace hjbpod {

FeedbackPolicy::FeedbackPolicy(ValueGrid grid, ReducedSystem reduced,
                               ControlSet controls, PolicyMode mode)
    : grid_(std::move(grid)),
      reduced_(std::move(reduced)),
      controls_(std::move(controls)),
      mode_(mode) {
  if (!grid_.converged) {
    throw ContractViolation("FeedbackPolicy: value grid has not converged");
  }
  if (grid_.dim() != reduced_.dim()) {
    throw ContractViolation("FeedbackPolicy: grid and reduced model dimensions differ");
  }
  node_controls_.resize(grid_.size());
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    const std::uint32_t k = grid_.policy()[i];
    if (k >= controls_.size()) {
      throw ContractViolation("FeedbackPolicy: stored policy index outside the control set");
    }
    node_controls_[i] = controls_[k];
  }
}

double FeedbackPolicy::evaluate_reduced(const Vector& z) const {
  // Outside the box every Bellman target clamps to the same face, so the
  // query is moved to the nearest box point first.
  Vector q = z;
  const Hypercube& box = grid_.box();
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    q[j] = std::clamp(q[j], box.lower[ju], box.upper[ju]);
  }
  if (mode_ == PolicyMode::kStoredInterpolation) {
    return grid_.interpolate_data(node_controls_, q);
  }
  return argmin_control(grid_, reduced_, controls_, q).control;
}

double FeedbackPolicy::operator()(const Vector& y) const {
  return evaluate_reduced(project(reduced_.basis(), y));
}

double policy_eval(const FeedbackPolicy& policy, const Vector& y) { return policy(y); }

Vector apply_noise(const Vector& y, double amplitude, std::mt19937_64& rng) {
  if (amplitude == 0.0) return y;
  std::uniform_real_distribution<double> eta(-amplitude, amplitude);
  Vector out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = (1.0 + eta(rng)) * y[i];
  return out;
}

Trajectory closed_loop(const ControlledSystem& system, const FeedbackPolicy& policy,
                       const Vector& y0, const TimeGrid& grid, const NoiseModel& noise,
                       const ClosedLoopOptions& options) {
  if (noise.enabled && !(noise.amplitude >= 0.0 && noise.amplitude < 1.0)) {
    throw ContractViolation("closed_loop: noise amplitude must lie in [0, 1)");
  }
  if (options.mode == IntegratorMode::kImplicit && !system.is_linear()) {
    throw ContractViolation("closed_loop: implicit mode requires mu = 0");
  }
  const bool perturb = noise.enabled && noise.amplitude > 0.0;
  std::mt19937_64 rng(noise.seed);
  const PodBasis& basis = policy.reduced().basis();

  Trajectory traj;
  traj.grid = grid;
  traj.states.resize(system.dim(), static_cast<Eigen::Index>(grid.size()));
  traj.states.col(0) = y0;
  traj.controls.reserve(grid.size() - 1);

  EulerStepper stepper(system.linear());
  Vector y = y0;
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    Vector measured = perturb ? apply_noise(y, noise.amplitude, rng) : y;
    if (perturb && noise.target == NoiseTarget::kState) y = measured;
    const double u = std::clamp(policy(measured), system.u_min(), system.u_max());
    const double dt = grid.step(j);
    Vector r = y + dt * u * system.input();
    if (!system.is_linear()) r += dt * system.nonlinear_term(y);
    y = stepper.solve(dt, r);
    if (!y.allFinite()) throw NumericalError("closed_loop: state diverged");
    if (options.strict_reprojection) y = project_full(basis, y);
    traj.controls.push_back(u);
    traj.states.col(static_cast<Eigen::Index>(j + 1)) = y;
  }
  return traj;
}

}  // namespace hjbpod
