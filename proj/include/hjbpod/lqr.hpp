#pragma once

#include <vector>

#include "hjbpod/dynamics.hpp"
#include "hjbpod/types.hpp"

namespace hjbpod {

/// Data of A^T P + P A - P B R^{-1} B^T P + Q = 0.
struct CareProblem {
  Matrix a;
  Matrix b;
  Matrix q;
  Matrix r;
};

struct RiccatiSolution {
  Matrix p;
  /// R^{-1} B^T P
  Matrix gain;
  /// Frobenius norm of the CARE residual.
  double residual = 0.0;
  std::size_t iterations = 0;
  std::vector<double> residual_trace;
};

/// Solves A^T X + X A + Q = 0 for stable A (Bartels-Stewart on the complex
/// Schur form). Q must be symmetric; the result is symmetrized.
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

/// Turns the discounted cost int e^{-lambda t} (dx |y|^2 + alpha u^2) dt into
/// an undiscounted LQR problem via the drift shift A - (lambda/2) I.
/// Requires mu = 0 and w_bar = 0.
CareProblem discount_shift(const ControlledSystem& system);

/// Newton-Kleinman iteration from P_0 = 0 (valid for stable A). Stops when
/// the CARE residual drops below tol * ||Q||_F.
RiccatiSolution solve_care(const CareProblem& problem, double tol = 1e-12,
                           std::size_t max_iter = 50);

double care_residual(const CareProblem& problem, const Matrix& p);

/// Closed loop under u = -gain y, optionally clipped to [u_min, u_max],
/// integrated with implicit Euler.
Trajectory lqr_closed_loop(const ControlledSystem& system, const RiccatiSolution& solution,
                           const Vector& y0, const TimeGrid& grid, bool clip = false);

}  // namespace hjbpod
