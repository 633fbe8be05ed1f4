#include "hjbpod/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "hjbpod/errors.hpp"

namespace hjbpod {

namespace {

void require_same_grid(const Trajectory& a, const Trajectory& b, const char* who) {
  if (a.grid.nodes() != b.grid.nodes() || a.states.cols() != b.states.cols()) {
    throw ContractViolation(std::string(who) + ": trajectories live on different time grids");
  }
}

double trapezoid_sq(const Matrix& diff, const TimeGrid& grid, double dx) {
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    total += 0.5 * grid.step(j) * (diff.col(k).squaredNorm() + diff.col(k + 1).squaredNorm());
  }
  return dx * total;
}

}  // namespace

double evaluate_cost(const Trajectory& trajectory, const ControlledSystem& system) {
  const TimeGrid& grid = trajectory.grid;
  if (trajectory.controls.size() + 1 != grid.size()) {
    throw ContractViolation("evaluate_cost: incomplete trajectory");
  }
  const double lambda = system.lambda();
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double u = trajectory.controls[j];
    const double left = std::exp(-lambda * grid[j]) * running_cost(system, trajectory.state(j), u);
    const double right =
        std::exp(-lambda * grid[j + 1]) * running_cost(system, trajectory.state(j + 1), u);
    total += 0.5 * grid.step(j) * (left + right);
  }
  return total;
}

double trajectory_gap(const Trajectory& full, const Trajectory& reduced,
                      const PodBasis& basis, double dx) {
  require_same_grid(full, reduced, "trajectory_gap");
  if (reduced.states.rows() != basis.rank() || full.states.rows() != basis.full_dim()) {
    throw ContractViolation("trajectory_gap: basis does not match the trajectories");
  }
  const Matrix diff = full.states - basis.psi * reduced.states;
  return trapezoid_sq(diff, full.grid, dx);
}

double l2_distance_squared(const Trajectory& a, const Trajectory& b, double dx) {
  require_same_grid(a, b, "l2_distance_squared");
  if (a.states.rows() != b.states.rows()) {
    throw ContractViolation("l2_distance_squared: state dimensions differ");
  }
  return trapezoid_sq(a.states - b.states, a.grid, dx);
}

double l2_norm(const Vector& y, double dx) { return std::sqrt(dx) * y.norm(); }

double sup_projection_error(const PodBasis& basis, const ControlledSystem& system,
                            const Vector& y0, const TimeGrid& grid,
                            std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw ContractViolation("sup_projection_error: need >= 1 sample");
  const IntegratorMode scheme =
      system.is_linear() ? IntegratorMode::kImplicit : IntegratorMode::kSemiImplicit;
  double worst = 0.0;
  std::size_t succeeded = 0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    // One stream per sample so results do not depend on evaluation order.
    std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * (s + 1));
    std::uniform_real_distribution<double> dist(system.u_min(), system.u_max());
    std::vector<double> controls(grid.size() - 1);
    for (double& u : controls) u = dist(rng);
    Trajectory traj;
    try {
      traj = integrate(system, y0, controls, grid, scheme);
    } catch (const NumericalError&) {
      continue;
    }
    ++succeeded;
    const Matrix coords = basis.psi.transpose() * basis.mass * traj.states;
    const Matrix err = traj.states - basis.psi * coords;
    worst = std::max(worst, err.colwise().norm().maxCoeff());
  }
  if (succeeded == 0) {
    throw NumericalError("sup_projection_error: every sampled trajectory failed");
  }
  return worst;
}

double time_discretization_constant(double l_f, double l_g, double m_f, double lambda) {
  if (!(lambda > l_f)) return std::numeric_limits<double>::quiet_NaN();
  const double lead = std::max({l_g / lambda, 2.0 * m_f * m_f / lambda, l_f / lambda, m_f});
  const double factor = 2.0 + l_g / (lambda - l_f);
  return lead * factor * factor;
}

StateBox state_box(const Matrix& states) {
  if (states.cols() == 0) throw ContractViolation("state_box: no states");
  return StateBox{states.rowwise().minCoeff(), states.rowwise().maxCoeff()};
}

EstimateConstants estimate_constants(const ControlledSystem& system, const StateBox& box,
                                     ConstantsMethod method, std::size_t n_samples,
                                     std::uint64_t seed) {
  const auto n = system.dim();
  if (box.lower.size() != n || box.upper.size() != n) {
    throw ContractViolation("estimate_constants: box dimension mismatch");
  }
  EstimateConstants c;
  c.lambda = system.lambda();
  c.method = method;
  const double dx = system.dx();
  const Vector& w_bar = system.w_bar();
  const double u_sq = std::max(system.u_min() * system.u_min(), system.u_max() * system.u_max());

  if (method == ConstantsMethod::kAnalytic) {
    if (!system.is_linear()) {
      throw ContractViolation("estimate_constants: analytic constants need mu = 0");
    }
    const Matrix& l = system.linear();
    c.l_f = Eigen::JacobiSVD<Matrix>(l).singularValues()(0);
    for (Eigen::Index i = 0; i < n; ++i) {
      double hi = 0.0;
      double lo = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double p = l(i, j) * box.lower[j];
        const double q = l(i, j) * box.upper[j];
        hi += std::max(p, q);
        lo += std::min(p, q);
      }
      const double b = system.input()[i];
      hi += std::max(b * system.u_min(), b * system.u_max());
      lo += std::min(b * system.u_min(), b * system.u_max());
      c.m_f = std::max({c.m_f, std::abs(hi), std::abs(lo)});
    }
    double far_sq = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double p = box.lower[j] - w_bar[j];
      const double q = box.upper[j] - w_bar[j];
      far_sq += std::max(p * p, q * q);
    }
    c.l_g = 2.0 * dx * std::sqrt(far_sq);
    c.m_g = dx * far_sq + system.alpha() * u_sq;
    c.c_f = 0.0;
    c.c_g = 2.0 * dx;
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> control(system.u_min(), system.u_max());
    const Vector width = box.upper - box.lower;
    auto sample = [&] {
      Vector y(n);
      for (Eigen::Index i = 0; i < n; ++i) y[i] = box.lower[i] + unit(rng) * width[i];
      return y;
    };
    for (std::size_t s = 0; s < n_samples; ++s) {
      const Vector y = sample();
      const Vector z = sample();
      const double u = control(rng);
      const Vector fy = rhs(system, y, u);
      const Vector fz = rhs(system, z, u);
      const double gy = running_cost(system, y, u);
      const double gz = running_cost(system, z, u);
      const double dist = (y - z).norm();
      c.m_f = std::max({c.m_f, fy.cwiseAbs().maxCoeff(), fz.cwiseAbs().maxCoeff()});
      c.m_g = std::max({c.m_g, std::abs(gy), std::abs(gz)});
      if (dist > 0.0) {
        c.l_f = std::max(c.l_f, (fy - fz).norm() / dist);
        c.l_g = std::max(c.l_g, std::abs(gy - gz) / dist);
      }
      const Vector d = 0.5 * unit(rng) * (z - y);
      const double d_sq = d.squaredNorm();
      if (d_sq > 0.0) {
        const Vector f2 = rhs(system, y + d, u) - 2.0 * fy + rhs(system, y - d, u);
        const double g2 =
            running_cost(system, y + d, u) - 2.0 * gy + running_cost(system, y - d, u);
        c.c_f = std::max(c.c_f, f2.norm() / d_sq);
        c.c_g = std::max(c.c_g, std::abs(g2) / d_sq);
      }
    }
  }
  c.c_theorem = time_discretization_constant(c.l_f, c.l_g, c.m_f, c.lambda);
  return c;
}

AprioriBound apriori_bound(const EstimateConstants& constants, const PodBasis& basis,
                           double h, double mesh_size, double proj_sup) {
  AprioriBound bound;
  const double lambda = constants.lambda;
  bound.within_hypothesis = lambda > std::max(constants.l_f, constants.l_g);
  if (!(lambda > constants.l_f) || !(h > 0.0)) return bound;
  bound.defined = true;
  const double c0 = time_discretization_constant(constants.l_f, constants.l_g,
                                                 constants.m_f, lambda);
  const double c1 = constants.l_g / (lambda * (lambda - constants.l_f));
  const double psi_norm = Eigen::JacobiSVD<Matrix>(basis.psi).singularValues()(0);
  bound.time_term = c0 * h;
  bound.mesh_term = c1 * psi_norm * mesh_size / h;
  bound.projection_term = c1 * proj_sup / h;
  bound.value = bound.time_term + bound.mesh_term + bound.projection_term;
  return bound;
}

}  // namespace hjbpod
