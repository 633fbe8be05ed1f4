#include "hjbpod/rom.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "hjbpod/errors.hpp"

namespace hjbpod {

Vector quadrature_weights(const TimeGrid& grid, WeightMode mode) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  if (mode == WeightMode::kUniform || n == 1) return Vector::Ones(n);
  Vector w(n);
  const auto& t = grid.nodes();
  w[0] = 0.5 * (t[1] - t[0]);
  w[n - 1] = 0.5 * (t[n - 1] - t[n - 2]);
  for (Eigen::Index j = 1; j + 1 < n; ++j) w[j] = 0.5 * (t[j + 1] - t[j - 1]);
  return w;
}

SnapshotSet generate_snapshots(const ControlledSystem& system, const Vector& y0,
                               const std::vector<double>& snap_controls,
                               const TimeGrid& grid, WeightMode mode,
                               bool derivative_snapshots) {
  if (snap_controls.empty()) {
    throw ContractViolation("generate_snapshots: no snapshot controls");
  }
  const auto n_t = static_cast<Eigen::Index>(grid.size());
  const Eigen::Index per_run = derivative_snapshots ? 2 * n_t - 1 : n_t;
  const Vector w_t = quadrature_weights(grid, mode);
  const IntegratorMode scheme =
      system.is_linear() ? IntegratorMode::kImplicit : IntegratorMode::kSemiImplicit;

  SnapshotSet set;
  const auto runs = static_cast<Eigen::Index>(snap_controls.size());
  set.columns.resize(system.dim(), per_run * runs);
  set.weights.resize(per_run * runs);
  set.sources.reserve(static_cast<std::size_t>(per_run * runs));

  for (Eigen::Index r = 0; r < runs; ++r) {
    const double u = snap_controls[static_cast<std::size_t>(r)];
    Trajectory traj;
    try {
      traj = integrate(system, y0, std::vector<double>(grid.size() - 1, u), grid, scheme);
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << "generate_snapshots: control " << u << ": " << e.what();
      throw NumericalError(msg.str());
    }
    const Eigen::Index base = r * per_run;
    set.columns.middleCols(base, n_t) = traj.states;
    set.weights.segment(base, n_t) = w_t;
    for (Eigen::Index j = 0; j < n_t; ++j) {
      set.sources.push_back({u, static_cast<std::size_t>(j)});
    }
    if (derivative_snapshots) {
      for (Eigen::Index j = 0; j + 1 < n_t; ++j) {
        const double dt = grid.step(static_cast<std::size_t>(j));
        set.columns.col(base + n_t + j) = (traj.states.col(j + 1) - traj.states.col(j)) / dt;
        set.weights[base + n_t + j] = w_t[j];
        set.sources.push_back({u, static_cast<std::size_t>(j)});
      }
    }
  }
  return set;
}

std::size_t PodBasis::numerical_rank() const {
  if (eigenvalues.size() == 0 || !(eigenvalues[0] > 0.0)) return 0;
  const double cutoff = kRankCutoff * eigenvalues[0];
  std::size_t r = 0;
  while (r < static_cast<std::size_t>(eigenvalues.size()) &&
         eigenvalues[static_cast<Eigen::Index>(r)] > cutoff) {
    ++r;
  }
  return r;
}

double PodBasis::tail_energy() const {
  return eigenvalues.tail(eigenvalues.size() - rank()).sum();
}

PodBasis PodBasis::truncated(int ell) const {
  if (ell < 1 || ell > rank()) {
    throw ContractViolation("PodBasis::truncated: rank out of range");
  }
  return PodBasis{psi.leftCols(ell), eigenvalues, mass};
}

PodBasis compute_pod_basis(const SnapshotSet& snapshots, int ell, const Matrix& mass) {
  const auto n = snapshots.columns.rows();
  const auto m = snapshots.columns.cols();
  if (m == 0 || snapshots.weights.size() != m) {
    throw ContractViolation("compute_pod_basis: empty or inconsistent snapshot set");
  }
  if (mass.rows() != n || mass.cols() != n) {
    throw ContractViolation("compute_pod_basis: mass matrix dimension mismatch");
  }
  if ((snapshots.weights.array() < 0.0).any() || !(snapshots.weights.array() > 0.0).any()) {
    throw ContractViolation("compute_pod_basis: weights must be nonnegative, not all zero");
  }
  if (ell < 1) throw ContractViolation("compute_pod_basis: rank must be >= 1");

  Eigen::LLT<Matrix> chol(mass);
  if (chol.info() != Eigen::Success) {
    throw ContractViolation("compute_pod_basis: mass matrix is not SPD");
  }
  const Matrix upper = chol.matrixU();  // M = U^T U
  const Matrix weighted =
      upper * snapshots.columns * snapshots.weights.cwiseSqrt().asDiagonal();

  Eigen::BDCSVD<Matrix> svd(weighted, Eigen::ComputeThinU);
  const Vector sigma = svd.singularValues();

  PodBasis basis;
  basis.mass = mass;
  basis.eigenvalues = sigma.array().square().matrix();
  const std::size_t usable = basis.numerical_rank();
  if (static_cast<std::size_t>(ell) > usable) {
    std::ostringstream msg;
    msg << "compute_pod_basis: rank " << ell << " exceeds numerical rank " << usable;
    throw RankDeficiencyError(msg.str(), usable);
  }

  // psi = U^{-1} u_i, so that psi^T M psi = u_i^T u_i.
  basis.psi = chol.matrixU().solve(svd.matrixU().leftCols(ell));
  for (int i = 0; i < ell; ++i) {
    auto col = basis.psi.col(i);
    const double scale = col.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (std::abs(col[k]) > 1e-8 * scale) {
        if (col[k] < 0.0) col = -col;
        break;
      }
    }
  }
  return basis;
}

Vector project(const PodBasis& basis, const Vector& y) {
  if (y.size() != basis.full_dim()) {
    throw ContractViolation("project: state dimension mismatch");
  }
  return basis.psi.transpose() * (basis.mass * y);
}

Vector lift(const PodBasis& basis, const Vector& z) {
  if (z.size() != basis.rank()) {
    throw ContractViolation("lift: reduced dimension mismatch");
  }
  return basis.psi * z;
}

Vector project_full(const PodBasis& basis, const Vector& y) {
  return lift(basis, project(basis, y));
}

double reconstruction_residual(const PodBasis& basis, const SnapshotSet& snapshots) {
  const Matrix coords = basis.psi.transpose() * basis.mass * snapshots.columns;
  const Matrix err = snapshots.columns - basis.psi * coords;
  double total = 0.0;
  for (Eigen::Index j = 0; j < err.cols(); ++j) {
    total += snapshots.weights[j] * err.col(j).dot(basis.mass * err.col(j));
  }
  return total;
}

ReducedSystem::ReducedSystem(ControlledSystem system, PodBasis basis)
    : system_(std::move(system)), basis_(std::move(basis)) {
  if (basis_.full_dim() != system_.dim()) {
    throw ContractViolation("reduce_system: basis and system dimensions differ");
  }
  const Matrix& ms = system_.mass();
  if (basis_.mass.rows() != ms.rows() ||
      (basis_.mass - ms).norm() > 1e-12 * ms.norm()) {
    throw ContractViolation("reduce_system: basis built for a different inner product");
  }
  psi_t_mass_ = basis_.psi.transpose() * ms;
  linear_ = psi_t_mass_ * system_.linear() * basis_.psi;
  input_ = psi_t_mass_ * system_.input();
}

Vector ReducedSystem::nonlinear_term(const Vector& z) const {
  if (system_.is_linear()) return Vector::Zero(z.size());
  return psi_t_mass_ * system_.nonlinear_term(basis_.psi * z);
}

Vector ReducedSystem::rhs(const Vector& z, double u) const {
  if (z.size() != dim()) throw ContractViolation("reduced rhs: dimension mismatch");
  Vector f = linear_ * z + input_ * u;
  if (!system_.is_linear()) f += nonlinear_term(z);
  return f;
}

double ReducedSystem::cost(const Vector& z, double u) const {
  return running_cost(system_, basis_.psi * z, u);
}

ReducedSystem reduce_system(const ControlledSystem& system, const PodBasis& basis) {
  return ReducedSystem(system, basis);
}

Trajectory reduced_trajectory(const ReducedSystem& reduced, const Vector& y0,
                              const std::vector<double>& controls,
                              const TimeGrid& grid, IntegratorMode mode) {
  if (controls.size() + 1 != grid.size()) {
    throw ContractViolation("reduced_trajectory: need one control per time step");
  }
  const bool linear = reduced.full().is_linear();
  if (mode == IntegratorMode::kImplicit && !linear) {
    throw ContractViolation("reduced_trajectory: implicit mode requires mu = 0");
  }
  Trajectory traj;
  traj.grid = grid;
  traj.states.resize(reduced.dim(), static_cast<Eigen::Index>(grid.size()));
  Vector z = project(reduced.basis(), y0);
  traj.states.col(0) = z;
  traj.controls = controls;

  EulerStepper stepper(reduced.linear());
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double dt = grid.step(j);
    Vector r = z + dt * controls[j] * reduced.input();
    if (!linear) r += dt * reduced.nonlinear_term(z);
    z = stepper.solve(dt, r);
    if (!z.allFinite()) {
      std::ostringstream msg;
      msg << "reduced_trajectory: divergence at step " << j;
      throw NumericalError(msg.str());
    }
    traj.states.col(static_cast<Eigen::Index>(j + 1)) = z;
  }
  return traj;
}

}  // namespace hjbpod
