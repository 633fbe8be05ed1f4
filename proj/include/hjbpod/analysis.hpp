#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hjbpod/dynamics.hpp"
#include "hjbpod/rom.hpp"
#include "hjbpod/types.hpp"

namespace hjbpod {

/// Trapezoidal quadrature of e^{-lambda t} g(y(t), u(t)) over the trajectory's
/// time grid; on each interval the control is the one applied on it.
double evaluate_cost(const Trajectory& trajectory, const ControlledSystem& system);

/// int_0^{t_e} dx ||y(t) - Psi z(t)||_2^2 dt (trapezoidal in time).
double trajectory_gap(const Trajectory& full, const Trajectory& reduced,
                      const PodBasis& basis, double dx);

/// int_0^{t_e} dx ||a(t) - b(t)||_2^2 dt for two full-order trajectories.
double l2_distance_squared(const Trajectory& a, const Trajectory& b, double dx);

/// sqrt(dx) * ||y||_2, the discrete L2(omega) norm.
double l2_norm(const Vector& y, double dx);

/// Largest ||y - P y||_2 over states of `n_samples` trajectories driven by
/// i.i.d. uniform piecewise-constant controls in [u_min, u_max].
double sup_projection_error(const PodBasis& basis, const ControlledSystem& system,
                            const Vector& y0, const TimeGrid& grid,
                            std::size_t n_samples, std::uint64_t seed);

enum class ConstantsMethod { kSampled, kAnalytic };

/// Lipschitz, sup and semiconcavity constants of f and g over a box in state
/// space plus the bound on the time-discretization constant
///   C <= max{L_g/lambda, 2 M_f^2/lambda, L_f/lambda, M_f} (2 + L_g/(lambda - L_f))^2.
struct EstimateConstants {
  double l_f = 0.0;
  double l_g = 0.0;
  double m_f = 0.0;
  double m_g = 0.0;
  double c_f = 0.0;
  double c_g = 0.0;
  double lambda = 1.0;
  /// NaN when lambda <= l_f.
  double c_theorem = std::numeric_limits<double>::quiet_NaN();
  ConstantsMethod method = ConstantsMethod::kSampled;

  bool lambda_dominates() const { return lambda > l_f; }
};

double time_discretization_constant(double l_f, double l_g, double m_f, double lambda);

/// State box [lower, upper] (componentwise) used as the sampling region.
struct StateBox {
  Vector lower;
  Vector upper;
};

/// Componentwise min/max over the snapshot columns.
StateBox state_box(const Matrix& states);

/// Sampled mode: maximal difference quotients over random pairs (lower
/// bounds of the true constants). Analytic mode needs a linear system.
EstimateConstants estimate_constants(const ControlledSystem& system, const StateBox& box,
                                     ConstantsMethod method, std::size_t n_samples = 2000,
                                     std::uint64_t seed = 0);

struct AprioriBound {
  double value = std::numeric_limits<double>::quiet_NaN();
  double time_term = 0.0;
  double mesh_term = 0.0;
  double projection_term = 0.0;
  bool defined = false;
  /// lambda > max(L_f, L_g)
  bool within_hypothesis = false;
};

/// c0 h + c1 ||Psi||_2 K / h + c2 proj_sup / h with c0 = C bound above and
/// c1 = c2 = L_g / (lambda (lambda - L_f)).
AprioriBound apriori_bound(const EstimateConstants& constants, const PodBasis& basis,
                           double h, double mesh_size, double proj_sup);

/// One (ell, K) cell of an experiment.
struct ErrorRow {
  int ell = 0;
  double mesh_size = 0.0;
  double h = 0.0;
  std::size_t nodes = 0;
  std::size_t iterations = 0;
  /// Discounted cost of the full model driven by the feedback.
  double cost = 0.0;
  /// Discounted cost of the reduced model under the same controls.
  double reduced_cost = 0.0;
  double gap_l2 = 0.0;
  /// NaN when no LQR reference exists.
  double lqr_gap = std::numeric_limits<double>::quiet_NaN();
  double proj_sup = 0.0;
  double apriori = std::numeric_limits<double>::quiet_NaN();
  bool apriori_in_hypothesis = false;
  double final_l2 = 0.0;
  std::string status = "ok";
};

struct ErrorReport {
  std::vector<ErrorRow> rows;
};

}  // namespace hjbpod
