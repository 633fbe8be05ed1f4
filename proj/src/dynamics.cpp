#include "hjbpod/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "hjbpod/errors.hpp"

namespace hjbpod {

TimeGrid::TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty() || nodes_.front() != 0.0) {
    throw ContractViolation("TimeGrid: first node must be 0");
  }
  for (std::size_t j = 1; j < nodes_.size(); ++j) {
    if (!(nodes_[j] > nodes_[j - 1])) {
      throw ContractViolation("TimeGrid: nodes must be strictly increasing");
    }
  }
  uniform_ = true;
  dt_ = nodes_.size() > 1 ? nodes_[1] - nodes_[0] : 0.0;
  for (std::size_t j = 1; j < nodes_.size(); ++j) {
    if (std::abs(step(j - 1) - dt_) > 1e-12 * std::max(1.0, dt_)) {
      uniform_ = false;
      dt_ = 0.0;
      break;
    }
  }
}

TimeGrid TimeGrid::uniform(double t_end, double dt) {
  if (!(dt > 0.0) || !(t_end > 0.0)) {
    throw ContractViolation("TimeGrid::uniform: t_end and dt must be positive");
  }
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  if (steps == 0 || std::abs(steps * dt - t_end) > 1e-9 * t_end) {
    throw ContractViolation("TimeGrid::uniform: t_end is not a multiple of dt");
  }
  std::vector<double> nodes(steps + 1);
  for (std::size_t j = 0; j <= steps; ++j) nodes[j] = static_cast<double>(j) * dt;
  nodes.back() = t_end;
  TimeGrid grid;
  grid.nodes_ = std::move(nodes);
  grid.uniform_ = true;
  grid.dt_ = dt;
  return grid;
}

Vector PdeConfig::nodes() const {
  Vector x(n_x);
  const double h = dx();
  for (int i = 0; i < n_x; ++i) x[i] = a + (i + 1) * h;
  return x;
}

void PdeConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("PdeConfig: " + msg); };
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
  if (n_x < 2) fail("n_x must be at least 2");
  if (!(b > a) || !(dx() > 0.0)) fail("domain must satisfy a < b");
  if (!(lambda > 0.0)) fail("lambda must be positive");
  if (!(t_e > 0.0)) fail("t_e must be positive");
  if (!(u_min <= u_max)) fail("u_min must not exceed u_max");
  if (!(alpha >= 0.0)) fail("alpha must be nonnegative");
  if (shape_b.size() != n_x || w0.size() != n_x || w_bar.size() != n_x) {
    fail("profiles must be sampled on the n_x interior nodes");
  }
}

Vector sample_profile(const std::string& spec, const Vector& x) {
  std::istringstream in(spec);
  std::string kind;
  in >> kind;
  Vector out = Vector::Zero(x.size());
  auto need = [&](double& v) {
    if (!(in >> v)) throw ConfigError("profile '" + spec + "': missing parameter");
  };
  if (kind == "zero") {
  } else if (kind == "constant") {
    double c;
    need(c);
    out.setConstant(c);
  } else if (kind == "sine") {
    double amp, freq;
    need(amp);
    need(freq);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      out[i] = amp * std::sin(freq * std::numbers::pi * x[i]);
    }
  } else if (kind == "parabola") {
    double c;
    need(c);
    out = c * (x.array() - x.array().square()).matrix();
  } else if (kind == "indicator") {
    double lo, hi;
    need(lo);
    need(hi);
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = (x[i] > lo && x[i] < hi) ? 1.0 : 0.0;
  } else {
    throw ConfigError("unknown profile kind '" + kind + "'");
  }
  return out;
}

ControlledSystem::ControlledSystem(Matrix linear, double mu, Vector input,
                                   Matrix mass, Vector w_bar, double alpha,
                                   double dx, double lambda, double u_min,
                                   double u_max)
    : linear_(std::move(linear)),
      mu_(mu),
      input_(std::move(input)),
      mass_(std::move(mass)),
      w_bar_(std::move(w_bar)),
      alpha_(alpha),
      dx_(dx),
      lambda_(lambda),
      u_min_(u_min),
      u_max_(u_max) {
  const auto n = linear_.rows();
  if (linear_.cols() != n || input_.size() != n || mass_.rows() != n ||
      mass_.cols() != n || w_bar_.size() != n) {
    throw ContractViolation("ControlledSystem: inconsistent dimensions");
  }
}

Vector ControlledSystem::nonlinear_term(const Vector& y) const {
  if (mu_ == 0.0) return Vector::Zero(y.size());
  return -mu_ * (y.array() - y.array().cube()).matrix();
}

ControlledSystem assemble_system(const PdeConfig& config) {
  config.validate();
  const int n = config.n_x;
  const double dx = config.dx();

  Matrix lap = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    lap(i, i) = -2.0;
    if (i > 0) lap(i, i - 1) = 1.0;
    if (i + 1 < n) lap(i, i + 1) = 1.0;
  }
  lap /= dx * dx;

  Matrix deriv = Matrix::Zero(n, n);
  if (config.advection == Advection::kCentered) {
    for (int i = 0; i < n; ++i) {
      if (i > 0) deriv(i, i - 1) = -0.5 / dx;
      if (i + 1 < n) deriv(i, i + 1) = 0.5 / dx;
    }
  } else if (config.gamma >= 0.0) {
    // Backward difference for transport to the right.
    for (int i = 0; i < n; ++i) {
      deriv(i, i) = 1.0 / dx;
      if (i > 0) deriv(i, i - 1) = -1.0 / dx;
    }
  } else {
    for (int i = 0; i < n; ++i) {
      deriv(i, i) = -1.0 / dx;
      if (i + 1 < n) deriv(i, i + 1) = 1.0 / dx;
    }
  }

  Matrix linear = config.epsilon * lap - config.gamma * deriv;
  Matrix mass = Matrix::Identity(n, n);
  if (config.inner_product == InnerProduct::kL2) mass *= dx;

  return ControlledSystem(std::move(linear), config.mu, config.shape_b,
                          std::move(mass), config.w_bar, config.alpha, dx,
                          config.lambda, config.u_min, config.u_max);
}

Vector rhs(const ControlledSystem& system, const Vector& y, double u) {
  if (y.size() != system.dim()) {
    throw ContractViolation("rhs: state dimension mismatch");
  }
  Vector f = system.linear() * y + system.input() * u;
  if (!system.is_linear()) f += system.nonlinear_term(y);
  return f;
}

double running_cost(const ControlledSystem& system, const Vector& y, double u) {
  if (y.size() != system.dim()) {
    throw ContractViolation("running_cost: state dimension mismatch");
  }
  return system.dx() * (y - system.w_bar()).squaredNorm() + system.alpha() * u * u;
}

EulerStepper::EulerStepper(Matrix linear) : linear_(std::move(linear)) {}

Vector EulerStepper::solve(double dt, const Vector& r) {
  if (dt != cached_dt_) {
    const auto n = linear_.rows();
    lu_.compute(Matrix::Identity(n, n) - dt * linear_);
    if (!(lu_.rcond() > 1e-14)) {
      cached_dt_ = -1.0;
      throw NumericalError("implicit Euler: (I - dt L) is singular");
    }
    cached_dt_ = dt;
  }
  return lu_.solve(r);
}

Trajectory integrate(const ControlledSystem& system, const Vector& y0,
                     const ControlLaw& law, const TimeGrid& grid,
                     IntegratorMode mode) {
  if (y0.size() != system.dim()) {
    throw ContractViolation("integrate: initial state dimension mismatch");
  }
  if (mode == IntegratorMode::kImplicit && !system.is_linear()) {
    throw ContractViolation(
        "integrate: implicit mode requires mu = 0, use semi-implicit");
  }
  Trajectory traj;
  traj.grid = grid;
  traj.states.resize(system.dim(), static_cast<Eigen::Index>(grid.size()));
  traj.states.col(0) = y0;
  traj.controls.reserve(grid.size() - 1);

  EulerStepper stepper(system.linear());
  Vector y = y0;
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double u = law(j, y);
    const double dt = grid.step(j);
    Vector r = y + dt * u * system.input();
    if (!system.is_linear()) r += dt * system.nonlinear_term(y);
    y = stepper.solve(dt, r);
    if (!y.allFinite()) {
      std::ostringstream msg;
      msg << "integrate: divergence at step " << j << " (t = " << grid[j + 1]
          << ", u = " << u << ")";
      throw NumericalError(msg.str());
    }
    traj.controls.push_back(u);
    traj.states.col(static_cast<Eigen::Index>(j + 1)) = y;
  }
  return traj;
}

Trajectory integrate(const ControlledSystem& system, const Vector& y0,
                     const std::vector<double>& controls, const TimeGrid& grid,
                     IntegratorMode mode) {
  if (controls.size() + 1 != grid.size()) {
    throw ContractViolation("integrate: need one control per time step");
  }
  return integrate(
      system, y0, [&](std::size_t j, const Vector&) { return controls[j]; },
      grid, mode);
}

}  // namespace hjbpod
