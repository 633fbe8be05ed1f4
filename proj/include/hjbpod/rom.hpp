#pragma once

#include <cstddef>
#include <vector>

#include "hjbpod/dynamics.hpp"
#include "hjbpod/types.hpp"

namespace hjbpod {

/// What the Bellman operator needs from a low-dimensional controlled model:
/// dynamics z' = rhs(z, u), running cost and discount rate.
class ReducedModel {
 public:
  virtual ~ReducedModel() = default;
  virtual int dim() const = 0;
  virtual double discount() const = 0;
  virtual Vector rhs(const Vector& z, double u) const = 0;
  virtual double cost(const Vector& z, double u) const = 0;
};

enum class WeightMode { kUniform, kTrapezoidal };

struct SnapshotSource {
  double control;
  std::size_t time_index;
};

/// Columns are sampled states, one nonnegative weight per column.
struct SnapshotSet {
  Matrix columns;
  Vector weights;
  std::vector<SnapshotSource> sources;

  std::size_t size() const { return static_cast<std::size_t>(columns.cols()); }
};

/// Constant-control trajectories for every value in `snap_controls`,
/// concatenated column-wise. Values outside [u_min, u_max] are allowed.
/// With `derivative_snapshots`, forward differences (y_{j+1} - y_j)/dt_j of
/// each trajectory are appended as extra columns (weighted like the state
/// columns they start from).
SnapshotSet generate_snapshots(const ControlledSystem& system,
                               const Vector& y0,
                               const std::vector<double>& snap_controls,
                               const TimeGrid& grid,
                               WeightMode mode = WeightMode::kUniform,
                               bool derivative_snapshots = false);

/// Uniform: all ones. Trapezoidal: composite rule, endpoint half-steps and
/// (t_{j+1} - t_{j-1})/2 in the interior.
Vector quadrature_weights(const TimeGrid& grid, WeightMode mode);

/// M-orthonormal POD basis of rank `rank` and the full spectrum of the
/// weighted snapshot correlation operator.
struct PodBasis {
  Matrix psi;
  Vector eigenvalues;
  Matrix mass;

  int rank() const { return static_cast<int>(psi.cols()); }
  int full_dim() const { return static_cast<int>(psi.rows()); }
  /// Eigenvalues above the numerical-rank cutoff.
  std::size_t numerical_rank() const;
  /// sum_{i > rank} lambda_i
  double tail_energy() const;
  /// Leading `ell` columns as a basis of lower rank.
  PodBasis truncated(int ell) const;
};

/// Eigenvalues below this fraction of the largest are treated as zero.
inline constexpr double kRankCutoff = 1e-12;

/// Thin SVD of the weighted snapshot matrix C^T Y D^{1/2}, with M = C C^T
/// and D = diag(weights); equivalent to the eigenproblem of the weighted
/// snapshot Gramian but keeps Psi^T M Psi = I to machine precision.
/// Throws RankDeficiencyError when `ell` exceeds the numerical rank. Each
/// column's first nonzero component is made positive.
PodBasis compute_pod_basis(const SnapshotSet& snapshots, int ell,
                           const Matrix& mass);

/// Psi^T M y
Vector project(const PodBasis& basis, const Vector& y);
/// Psi z
Vector lift(const PodBasis& basis, const Vector& z);
/// Psi Psi^T M y
Vector project_full(const PodBasis& basis, const Vector& y);

/// sum_j w_j || y_j - P y_j ||_M^2 over the snapshot columns.
double reconstruction_residual(const PodBasis& basis, const SnapshotSet& snapshots);

/// Galerkin reduction z' = Psi^T M f(Psi z, u), cost g(Psi z, u).
class ReducedSystem final : public ReducedModel {
 public:
  ReducedSystem(ControlledSystem system, PodBasis basis);

  int dim() const override { return basis_.rank(); }
  double discount() const override { return system_.lambda(); }
  Vector rhs(const Vector& z, double u) const override;
  double cost(const Vector& z, double u) const override;

  /// Psi^T M L Psi
  const Matrix& linear() const { return linear_; }
  /// Psi^T M B
  const Vector& input() const { return input_; }
  /// Psi^T M (-mu F(Psi z)); zero for linear systems.
  Vector nonlinear_term(const Vector& z) const;

  const PodBasis& basis() const { return basis_; }
  const ControlledSystem& full() const { return system_; }

 private:
  ControlledSystem system_;
  PodBasis basis_;
  Matrix psi_t_mass_;
  Matrix linear_;
  Vector input_;
};

ReducedSystem reduce_system(const ControlledSystem& system, const PodBasis& basis);

/// Integrates the reduced ODE from Psi^T M y0 with the scheme used for the
/// full model (implicit linear part, explicit nonlinearity).
Trajectory reduced_trajectory(const ReducedSystem& reduced, const Vector& y0,
                              const std::vector<double>& controls,
                              const TimeGrid& grid,
                              IntegratorMode mode = IntegratorMode::kSemiImplicit);

}  // namespace hjbpod
