#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "hjbpod/config.hpp"
#include "hjbpod/errors.hpp"
#include "hjbpod/lqr.hpp"

namespace hjbpod {
namespace {

Matrix stable_matrix(int n, unsigned seed) {
  std::srand(seed);
  Matrix a = Matrix::Random(n, n);
  const double shift = a.eigenvalues().real().maxCoeff() + 1.0;
  return a - shift * Matrix::Identity(n, n);
}

// Stabilizing solution from the stable invariant subspace of the
// Hamiltonian matrix [A, -B R^-1 B^T; -Q, -A^T].
Matrix hamiltonian_care(const CareProblem& p) {
  const auto n = p.a.rows();
  Matrix h(2 * n, 2 * n);
  h << p.a, -p.b * p.r.inverse() * p.b.transpose(), -p.q, -p.a.transpose();
  Eigen::ComplexEigenSolver<Matrix> es(h);
  Eigen::MatrixXcd basis(2 * n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    if (es.eigenvalues()[i].real() < 0.0) basis.col(k++) = es.eigenvectors().col(i);
  }
  EXPECT_EQ(k, n);
  const Eigen::MatrixXcd x = basis.bottomRows(n) * basis.topRows(n).inverse();
  return x.real();
}

TEST(Lyapunov, ScalarAndKroneckerOracle) {
  EXPECT_NEAR(solve_lyapunov(Matrix::Constant(1, 1, -2.0), Matrix::Constant(1, 1, 3.0))(0, 0),
              0.75, 1e-15);
  const int n = 5;
  const Matrix a = stable_matrix(n, 2);
  Matrix q = Matrix::Random(n, n);
  q = q * q.transpose();
  const Matrix x = solve_lyapunov(a, q);
  const Matrix eye = Matrix::Identity(n, n);
  Matrix kron(n * n, n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      kron.block(i * n, j * n, n, n) = eye(i, j) * a.transpose() + a(j, i) * eye;
    }
  }
  const Vector vec_q = Eigen::Map<const Vector>(q.data(), n * n);
  const Vector vec_x = kron.partialPivLu().solve(-vec_q);
  const Matrix ref = Eigen::Map<const Matrix>(vec_x.data(), n, n);
  EXPECT_LE((x - ref).cwiseAbs().maxCoeff(), 1e-10 * ref.norm());
  EXPECT_TRUE(x.isApprox(x.transpose(), 0.0));
  EXPECT_LE((a.transpose() * x + x * a + q).norm(), 1e-10 * q.norm());
}

TEST(Lyapunov, RejectsSharedSpectrum) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = 1.0;
  EXPECT_THROW(solve_lyapunov(a, Matrix::Identity(2, 2)), NumericalError);
  EXPECT_THROW(solve_lyapunov(Matrix::Identity(2, 3), Matrix::Identity(2, 2)), ContractViolation);
}

TEST(Care, ScalarRoot) {
  // -2p - p^2 + 1 = 0 has the stabilizing root sqrt(2) - 1.
  const CareProblem p{Matrix::Constant(1, 1, -1.0), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                      Matrix::Ones(1, 1)};
  const RiccatiSolution s = solve_care(p);
  EXPECT_NEAR(s.p(0, 0), std::sqrt(2.0) - 1.0, 1e-14);
  EXPECT_NEAR(s.gain(0, 0), std::sqrt(2.0) - 1.0, 1e-14);
  EXPECT_LE(s.residual, 1e-14);
}

TEST(Care, DegenerateCases) {
  const Matrix a = stable_matrix(4, 7);
  const Matrix q = Matrix::Identity(4, 4);
  const CareProblem no_input{a, Matrix::Zero(4, 1), q, Matrix::Ones(1, 1)};
  EXPECT_LE((solve_care(no_input).p - solve_lyapunov(a, q)).cwiseAbs().maxCoeff(), 1e-12);

  const CareProblem no_cost{a, Matrix::Ones(4, 1), Matrix::Zero(4, 4), Matrix::Ones(1, 1)};
  EXPECT_TRUE(solve_care(no_cost).p.isZero(0.0));

  const CareProblem bad_r{a, Matrix::Ones(4, 1), q, Matrix::Constant(1, 1, -1.0)};
  EXPECT_THROW(solve_care(bad_r), ContractViolation);
  const CareProblem unstable{Matrix::Identity(2, 2), Matrix::Ones(2, 1), Matrix::Identity(2, 2),
                             Matrix::Ones(1, 1)};
  EXPECT_THROW(solve_care(unstable), NumericalError);
}

TEST(Care, MatchesHamiltonianSubspace) {
  const Matrix a = stable_matrix(6, 11);
  const Matrix b = Matrix::Random(6, 1);
  const CareProblem p{a, b, 0.3 * Matrix::Identity(6, 6), Matrix::Constant(1, 1, 0.05)};
  const RiccatiSolution s = solve_care(p);
  const Matrix ref = hamiltonian_care(p);
  EXPECT_LE((s.p - ref).cwiseAbs().maxCoeff(), 1e-9 * ref.norm());
  EXPECT_LE(s.residual, 1e-10 * p.q.norm());
  EXPECT_DOUBLE_EQ(care_residual(p, s.p), s.residual);
  const Eigen::VectorXcd closed = (a - b * s.gain).eigenvalues();
  EXPECT_TRUE((closed.real().array() < 0.0).all());
}

TEST(DiscountShift, ScalarShift) {
  const ControlledSystem sys(Matrix::Constant(1, 1, -1.0), 0.0, Vector::Ones(1),
                             Matrix::Identity(1, 1), Vector::Zero(1), 0.2, 0.5, 1.0, -1.0, 1.0);
  const CareProblem p = discount_shift(sys);
  EXPECT_DOUBLE_EQ(p.a(0, 0), -1.5);
  EXPECT_DOUBLE_EQ(p.q(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p.r(0, 0), 0.2);

  const ControlledSystem nonlinear(Matrix::Constant(1, 1, -1.0), 1.0, Vector::Ones(1),
                                   Matrix::Identity(1, 1), Vector::Zero(1), 0.2, 0.5, 1.0, -1.0,
                                   1.0);
  EXPECT_THROW(discount_shift(nonlinear), ContractViolation);
  const ControlledSystem tracking(Matrix::Constant(1, 1, -1.0), 0.0, Vector::Ones(1),
                                  Matrix::Identity(1, 1), Vector::Ones(1), 0.2, 0.5, 1.0, -1.0,
                                  1.0);
  EXPECT_THROW(discount_shift(tracking), ContractViolation);
}

TEST(DiscountShift, Test1DriftIsStable) {
  const ControlledSystem sys = assemble_system(preset_config("test1").pde_config());
  const CareProblem p = discount_shift(sys);
  EXPECT_LT(p.a.eigenvalues().real().maxCoeff(), 0.0);
  const RiccatiSolution s = solve_care(p);
  EXPECT_LE(s.residual, 1e-9 * p.q.norm());
  EXPECT_TRUE(s.p.isApprox(s.p.transpose(), 1e-12));
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(s.p).eigenvalues().minCoeff(), 0.0);
}

TEST(LqrClosedLoop, ScalarGeometricDecay) {
  // a = 0 - 1/2, q = r = 1: p^2 + p - 1 = 0.
  const ControlledSystem sys(Matrix::Zero(1, 1), 0.0, Vector::Ones(1), Matrix::Identity(1, 1),
                             Vector::Zero(1), 1.0, 1.0, 1.0, -0.1, 0.1);
  const RiccatiSolution s = solve_care(discount_shift(sys));
  const double k = (std::sqrt(5.0) - 1.0) / 2.0;
  EXPECT_NEAR(s.gain(0, 0), k, 1e-12);
  const TimeGrid grid = TimeGrid::uniform(1.0, 0.1);
  const Trajectory t = lqr_closed_loop(sys, s, Vector::Ones(1), grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    EXPECT_NEAR(t.states(0, static_cast<Eigen::Index>(j)), std::pow(1.0 - 0.1 * k, j), 1e-12);
  }
  const Trajectory clipped = lqr_closed_loop(sys, s, Vector::Ones(1), grid, true);
  EXPECT_EQ(clipped.controls.front(), -0.1);
  EXPECT_NEAR(clipped.state(1)[0], 0.99, 1e-15);
}

}  // namespace
}  // namespace hjbpod
