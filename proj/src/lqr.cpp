#include "hjbpod/lqr.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "hjbpod/errors.hpp"

namespace hjbpod {

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  const auto n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n) {
    throw ContractViolation("solve_lyapunov: dimension mismatch");
  }
  using CMatrix = Eigen::MatrixXcd;
  Eigen::ComplexSchur<Matrix> schur(a);
  if (schur.info() != Eigen::Success) {
    throw NumericalError("solve_lyapunov: Schur decomposition failed");
  }
  const CMatrix& t = schur.matrixT();
  const CMatrix& u = schur.matrixU();

  // A = U T U^*, X = U Y U^*:  T^* Y + Y T = -U^* Q U.
  const CMatrix c = -(u.adjoint() * q.cast<std::complex<double>>() * u);
  const CMatrix t_adj = t.adjoint();
  CMatrix y = CMatrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::VectorXcd rhs = c.col(k);
    if (k > 0) rhs.noalias() -= y.leftCols(k) * t.col(k).head(k);
    CMatrix lower = t_adj;
    lower.diagonal().array() += t(k, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(lower(i, i)) < 1e-14 * std::max(1.0, t.norm())) {
        throw NumericalError("solve_lyapunov: A and -A^T share an eigenvalue");
      }
    }
    y.col(k) = lower.triangularView<Eigen::Lower>().solve(rhs);
  }
  Matrix x = (u * y * u.adjoint()).real();
  return 0.5 * (x + x.transpose());
}

double care_residual(const CareProblem& problem, const Matrix& p) {
  const Matrix r_inv_bt = problem.r.llt().solve(problem.b.transpose());
  const Matrix res = problem.a.transpose() * p + p * problem.a -
                     p * problem.b * r_inv_bt * p + problem.q;
  return res.norm();
}

CareProblem discount_shift(const ControlledSystem& system) {
  if (!system.is_linear()) {
    throw ContractViolation("discount_shift: Riccati baseline needs linear dynamics (mu = 0)");
  }
  if (!system.w_bar().isZero(0.0)) {
    throw ContractViolation("discount_shift: Riccati baseline needs w_bar = 0");
  }
  if (!(system.alpha() > 0.0)) {
    throw ContractViolation("discount_shift: control weight alpha must be positive");
  }
  const auto n = system.dim();
  CareProblem problem;
  problem.a = system.linear() - 0.5 * system.lambda() * Matrix::Identity(n, n);
  problem.b = system.input();
  problem.q = system.dx() * Matrix::Identity(n, n);
  problem.r = Matrix::Constant(1, 1, system.alpha());
  return problem;
}

RiccatiSolution solve_care(const CareProblem& problem, double tol, std::size_t max_iter) {
  const auto n = problem.a.rows();
  const auto m = problem.b.cols();
  if (problem.a.cols() != n || problem.b.rows() != n || problem.q.rows() != n ||
      problem.q.cols() != n || problem.r.rows() != m || problem.r.cols() != m) {
    throw ContractViolation("solve_care: dimension mismatch");
  }
  Eigen::LLT<Matrix> r_chol(problem.r);
  if (r_chol.info() != Eigen::Success) {
    throw ContractViolation("solve_care: R must be symmetric positive definite");
  }
  const Eigen::VectorXcd eig = problem.a.eigenvalues();
  if ((eig.real().array() >= 0.0).any()) {
    throw NumericalError("solve_care: Newton-Kleinman from P = 0 needs a stable drift");
  }

  const double q_norm = std::max(problem.q.norm(), 1e-300);
  RiccatiSolution sol;
  sol.p = Matrix::Zero(n, n);
  sol.residual = care_residual(problem, sol.p);
  sol.residual_trace.push_back(sol.residual);

  Matrix best_p = sol.p;
  double best = sol.residual;
  while (sol.residual > tol * q_norm && sol.iterations < max_iter) {
    const Matrix gain = r_chol.solve(problem.b.transpose() * sol.p);
    const Matrix closed = problem.a - problem.b * gain;
    const Matrix rhs = problem.q + gain.transpose() * problem.r * gain;
    Matrix next;
    try {
      next = solve_lyapunov(closed, rhs);
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << "solve_care: iteration " << sol.iterations << " failed (" << e.what()
          << "), residual trace:";
      for (double r : sol.residual_trace) msg << ' ' << r;
      throw NumericalError(msg.str());
    }
    const double step = (next - sol.p).norm();
    sol.p = std::move(next);
    ++sol.iterations;
    sol.residual = care_residual(problem, sol.p);
    sol.residual_trace.push_back(sol.residual);
    if (!std::isfinite(sol.residual)) break;
    if (sol.residual < best) {
      best = sol.residual;
      best_p = sol.p;
    }
    // Rounding floor reached.
    if (step <= 1e-14 * std::max(1.0, sol.p.norm())) break;
  }

  if (!(best <= 1e-6 * q_norm)) {
    std::ostringstream msg;
    msg << "solve_care: Newton-Kleinman did not converge, residual trace:";
    for (double r : sol.residual_trace) msg << ' ' << r;
    throw NumericalError(msg.str());
  }
  sol.p = 0.5 * (best_p + best_p.transpose());
  sol.residual = care_residual(problem, sol.p);
  sol.gain = r_chol.solve(problem.b.transpose() * sol.p);
  return sol;
}

Trajectory lqr_closed_loop(const ControlledSystem& system, const RiccatiSolution& solution,
                           const Vector& y0, const TimeGrid& grid, bool clip) {
  if (!system.is_linear()) {
    throw ContractViolation("lqr_closed_loop: linear system required");
  }
  if (solution.gain.rows() != 1 || solution.gain.cols() != system.dim()) {
    throw ContractViolation("lqr_closed_loop: gain has the wrong shape");
  }
  const Vector k = solution.gain.row(0).transpose();
  return integrate(
      system, y0,
      [&](std::size_t, const Vector& y) {
        const double u = -k.dot(y);
        return clip ? std::clamp(u, system.u_min(), system.u_max()) : u;
      },
      grid, IntegratorMode::kImplicit);
}

}  // namespace hjbpod
