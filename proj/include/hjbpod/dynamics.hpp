#pragma once

#include <functional>
#include <string>
#include <utility>

#include "hjbpod/types.hpp"

namespace hjbpod {

enum class Advection { kCentered, kUpwind };

/// Weight matrix of the state inner product <y, z>_M = y^T M z.
enum class InnerProduct {
  kIdentity,  // M = I
  kL2,        // M = dx * I, so ||y||_M approximates the L2(omega) norm
};

enum class IntegratorMode { kImplicit, kSemiImplicit };

/// Parameters of the 1D advection-diffusion-reaction equation
///
///   w_t - eps w_xx + gamma w_x + mu (w - w^3) = b u   on (a, b),
///   w = 0 on the boundary,
///
/// together with the discounted quadratic tracking cost. Spatial profiles are
/// sampled on the n_x interior nodes a + i*dx, i = 1..n_x.
struct PdeConfig {
  double epsilon = 0.1;
  double gamma = 0.0;
  double mu = 0.0;
  double a = 0.0;
  double b = 1.0;
  int n_x = 99;
  Vector shape_b;
  Vector w0;
  Vector w_bar;
  double alpha = 0.01;
  double lambda = 1.0;
  double t_e = 3.0;
  double u_min = -1.0;
  double u_max = 1.0;
  Advection advection = Advection::kCentered;
  InnerProduct inner_product = InnerProduct::kIdentity;

  double dx() const { return (b - a) / (n_x + 1); }
  /// Interior node coordinates.
  Vector nodes() const;
  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

/// Evaluates a named spatial profile on `x`. Recognised specs:
///   "zero", "constant c", "sine amp freq" (amp*sin(freq*pi*x)),
///   "parabola c" (c*(x - x^2)), "indicator lo hi" (1 on the open interval).
Vector sample_profile(const std::string& spec, const Vector& x);

/// Semi-discrete controlled system y' = f(y, u) with
///
///   f(y, u) = L y - mu F(y) + B u,   F_i(y) = y_i - y_i^3,
///
/// where L = eps A - gamma H. Immutable after assembly.
class ControlledSystem {
 public:
  ControlledSystem() = default;
  ControlledSystem(Matrix linear, double mu, Vector input, Matrix mass,
                   Vector w_bar, double alpha, double dx, double lambda,
                   double u_min, double u_max);

  int dim() const { return static_cast<int>(linear_.rows()); }
  const Matrix& linear() const { return linear_; }
  double mu() const { return mu_; }
  const Vector& input() const { return input_; }
  const Matrix& mass() const { return mass_; }
  const Vector& w_bar() const { return w_bar_; }
  double alpha() const { return alpha_; }
  double dx() const { return dx_; }
  double lambda() const { return lambda_; }
  double u_min() const { return u_min_; }
  double u_max() const { return u_max_; }
  bool is_linear() const { return mu_ == 0.0; }

  /// -mu F(y), the explicit part of the semi-implicit scheme.
  Vector nonlinear_term(const Vector& y) const;

 private:
  Matrix linear_;
  double mu_ = 0.0;
  Vector input_;
  Matrix mass_;
  Vector w_bar_;
  double alpha_ = 0.0;
  double dx_ = 1.0;
  double lambda_ = 1.0;
  double u_min_ = 0.0;
  double u_max_ = 0.0;
};

/// Finite-difference assembly: A is the 3-point Dirichlet Laplacian, H the
/// first-derivative matrix (centered or first-order upwind in the direction
/// of gamma).
ControlledSystem assemble_system(const PdeConfig& config);

Vector rhs(const ControlledSystem& system, const Vector& y, double u);

/// dx * sum_i (y_i - w_bar_i)^2 + alpha u^2
double running_cost(const ControlledSystem& system, const Vector& y, double u);

/// Chooses the control on step j given the current state.
using ControlLaw = std::function<double(std::size_t step, const Vector& y)>;

/// Euler time stepping. Implicit mode solves (I - dt L) y+ = y + dt B u and is
/// restricted to mu = 0; semi-implicit mode additionally evaluates -mu F at
/// the previous iterate.
Trajectory integrate(const ControlledSystem& system, const Vector& y0,
                     const ControlLaw& law, const TimeGrid& grid,
                     IntegratorMode mode = IntegratorMode::kSemiImplicit);

/// Piecewise-constant control signal, one value per step.
Trajectory integrate(const ControlledSystem& system, const Vector& y0,
                     const std::vector<double>& controls, const TimeGrid& grid,
                     IntegratorMode mode = IntegratorMode::kSemiImplicit);

/// Reusable factorisations of (I - dt L) keyed by step size.
class EulerStepper {
 public:
  explicit EulerStepper(Matrix linear);

  /// Solves (I - dt L) x = r. Throws NumericalError when the matrix is
  /// numerically singular.
  Vector solve(double dt, const Vector& r);

 private:
  Matrix linear_;
  double cached_dt_ = -1.0;
  Eigen::PartialPivLU<Matrix> lu_;
};

}  // namespace hjbpod
