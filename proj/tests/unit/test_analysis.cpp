#include <cmath>

#include <gtest/gtest.h>

#include "hjbpod/analysis.hpp"
#include "hjbpod/config.hpp"
#include "hjbpod/errors.hpp"

namespace hjbpod {
namespace {

ControlledSystem scalar(double l, double alpha, double dx = 1.0) {
  return ControlledSystem(Matrix::Constant(1, 1, l), 0.0, Vector::Ones(1), Matrix::Identity(1, 1),
                          Vector::Zero(1), alpha, dx, 1.0, -1.0, 1.0);
}

Trajectory constant_trajectory(const TimeGrid& grid, double y, double u) {
  Trajectory t;
  t.grid = grid;
  t.states = Matrix::Constant(1, static_cast<Eigen::Index>(grid.size()), y);
  t.controls.assign(grid.size() - 1, u);
  return t;
}

TEST(EvaluateCost, DiscountedUnitIntegral) {
  const TimeGrid grid = TimeGrid::uniform(3.0, 0.001);
  EXPECT_NEAR(evaluate_cost(constant_trajectory(grid, 1.0, 0.0), scalar(0.0, 0.0)), 0.950213,
              1e-6);
  EXPECT_NEAR(evaluate_cost(constant_trajectory(grid, 0.0, 1.0), scalar(0.0, 1.0)), 0.950213,
              1e-6);
}

TEST(EvaluateCost, CoarseTrapezoidOracle) {
  const TimeGrid grid({0.0, 0.5, 1.5});
  Trajectory t;
  t.grid = grid;
  t.states = Matrix(1, 3);
  t.states << 1.0, 2.0, 0.0;
  t.controls = {1.0, -2.0};
  const ControlledSystem s = scalar(0.0, 0.5, 0.1);
  const double g00 = 0.1 * 1.0 + 0.5;
  const double g10 = 0.1 * 4.0 + 0.5;
  const double g11 = 0.1 * 4.0 + 0.5 * 4.0;
  const double g21 = 0.5 * 4.0;
  const double expected = 0.25 * (g00 + std::exp(-0.5) * g10) +
                          0.5 * (std::exp(-0.5) * g11 + std::exp(-1.5) * g21);
  EXPECT_NEAR(evaluate_cost(t, s), expected, 1e-15);
  t.controls.pop_back();
  EXPECT_THROW(evaluate_cost(t, s), ContractViolation);
}

TEST(TrajectoryGap, ZeroForLiftedStatesAndConstantOffset) {
  PodBasis b;
  b.psi = Matrix::Zero(3, 1);
  b.psi(1, 0) = 1.0;
  b.mass = Matrix::Identity(3, 3);
  b.eigenvalues = Vector::Ones(1);
  const TimeGrid grid = TimeGrid::uniform(2.0, 0.5);
  Trajectory red;
  red.grid = grid;
  red.states = Vector::LinSpaced(5, 0.0, 1.0).transpose();
  red.controls.assign(4, 0.0);
  Trajectory full = red;
  full.states = b.psi * red.states;
  EXPECT_EQ(trajectory_gap(full, red, b, 0.1), 0.0);
  full.states.row(0).array() += 0.3;
  EXPECT_NEAR(trajectory_gap(full, red, b, 0.1), 0.1 * 0.09 * 2.0, 1e-15);
  EXPECT_NEAR(l2_distance_squared(full, full, 0.1), 0.0, 0.0);
  Trajectory shorter = full;
  shorter.grid = TimeGrid::uniform(1.0, 0.5);
  shorter.states = full.states.leftCols(3);
  EXPECT_THROW(l2_distance_squared(full, shorter, 0.1), ContractViolation);
}

TEST(L2Norm, ScalesWithDx) {
  EXPECT_DOUBLE_EQ(l2_norm(Vector::Constant(4, 1.0), 0.25), 1.0);
}

TEST(SupProjectionError, NestedBasesAndFullRank) {
  const ExperimentConfig c = preset_config("test2");
  const PdeConfig pde = c.pde_config();
  const ControlledSystem sys = assemble_system(pde);
  SnapshotSet set = generate_snapshots(sys, pde.w0, c.snapshots.controls,
                                       TimeGrid::uniform(pde.t_e, c.snapshots.dt));
  const PodBasis full = compute_pod_basis(set, 6, sys.mass());
  const TimeGrid grid = TimeGrid::uniform(pde.t_e, 0.05);
  double prev = std::numeric_limits<double>::infinity();
  for (int ell = 1; ell <= 6; ++ell) {
    const double e = sup_projection_error(full.truncated(ell), sys, pde.w0, grid, 5, 3);
    EXPECT_LE(e, prev) << ell;
    EXPECT_GT(e, 0.0);
    prev = e;
  }
  PodBasis identity;
  identity.psi = Matrix::Identity(sys.dim(), sys.dim()) / std::sqrt(sys.dx());
  identity.mass = sys.mass();
  identity.eigenvalues = Vector::Ones(sys.dim());
  EXPECT_LE(sup_projection_error(identity, sys, pde.w0, grid, 3, 3), 1e-12);
  EXPECT_EQ(sup_projection_error(full.truncated(2), sys, pde.w0, grid, 5, 3),
            sup_projection_error(full.truncated(2), sys, pde.w0, grid, 5, 3));
}

TEST(Constants, TimeDiscretizationBound) {
  EXPECT_DOUBLE_EQ(time_discretization_constant(0.0, 1.0, 0.5, 1.0), 9.0);
  EXPECT_DOUBLE_EQ(time_discretization_constant(0.0, 1.0, 1.0, 1.0), 18.0);
  EXPECT_TRUE(std::isnan(time_discretization_constant(1.0, 1.0, 1.0, 1.0)));
}

TEST(Constants, AnalyticScalar) {
  const StateBox box{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  const EstimateConstants a = estimate_constants(scalar(-2.0, 0.1), box, ConstantsMethod::kAnalytic);
  EXPECT_DOUBLE_EQ(a.l_f, 2.0);
  EXPECT_DOUBLE_EQ(a.m_f, 3.0);
  EXPECT_DOUBLE_EQ(a.l_g, 2.0);
  EXPECT_DOUBLE_EQ(a.m_g, 1.1);
  EXPECT_EQ(a.c_f, 0.0);
  EXPECT_EQ(a.c_g, 2.0);
  EXPECT_FALSE(a.lambda_dominates());
  EXPECT_TRUE(std::isnan(a.c_theorem));

  const EstimateConstants s =
      estimate_constants(scalar(-2.0, 0.1), box, ConstantsMethod::kSampled, 4000, 1);
  EXPECT_NEAR(s.l_f, 2.0, 1e-12);
  EXPECT_LE(s.m_f, a.m_f);
  EXPECT_GT(s.m_f, 0.9 * a.m_f);
  EXPECT_LE(s.l_g, a.l_g + 1e-12);
  EXPECT_GT(s.l_g, 0.9 * a.l_g);
  EXPECT_NEAR(s.c_g, 2.0, 1e-6);
  EXPECT_NEAR(s.c_f, 0.0, 1e-6);

  const ControlledSystem nonlinear(Matrix::Zero(1, 1), 1.0, Vector::Ones(1),
                                   Matrix::Identity(1, 1), Vector::Zero(1), 0.1, 1.0, 1.0, -1.0,
                                   1.0);
  EXPECT_THROW(estimate_constants(nonlinear, box, ConstantsMethod::kAnalytic), ContractViolation);
}

TEST(Constants, SampledReactionCurvature) {
  // f(y) = -(y - y^3): f'' = 6y, so the second-difference quotient stays below 6.
  const ControlledSystem s(Matrix::Zero(1, 1), 1.0, Vector::Ones(1), Matrix::Identity(1, 1),
                           Vector::Zero(1), 0.1, 1.0, 1.0, -1.0, 1.0);
  const StateBox box{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  const EstimateConstants c = estimate_constants(s, box, ConstantsMethod::kSampled, 4000, 2);
  EXPECT_LE(c.c_f, 6.0 + 1e-9);
  EXPECT_GT(c.c_f, 3.0);
  EXPECT_LE(c.l_f, 2.0 + 1e-9);
  EXPECT_GT(c.l_f, 1.5);
}

TEST(StateBox, RowwiseExtremes) {
  Matrix m(2, 3);
  m << 1, -1, 0, 2, 5, 3;
  const StateBox b = state_box(m);
  EXPECT_EQ(b.lower, Vector(Eigen::Vector2d(-1, 2)));
  EXPECT_EQ(b.upper, Vector(Eigen::Vector2d(1, 5)));
}

TEST(AprioriBound, TermsLimitsAndConvexity) {
  EstimateConstants c;
  c.l_f = 0.0;
  c.l_g = 2.0;
  c.m_f = 1.0;
  c.lambda = 1.0;
  PodBasis b;
  b.psi = 2.0 * Matrix::Identity(3, 2);
  const AprioriBound a = apriori_bound(c, b, 0.1, 0.01, 0.02);
  ASSERT_TRUE(a.defined);
  EXPECT_FALSE(a.within_hypothesis);
  const double c0 = time_discretization_constant(0.0, 2.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(a.time_term, c0 * 0.1);
  EXPECT_DOUBLE_EQ(a.mesh_term, 2.0 * 2.0 * 0.01 / 0.1);
  EXPECT_DOUBLE_EQ(a.projection_term, 2.0 * 0.02 / 0.1);
  EXPECT_DOUBLE_EQ(a.value, a.time_term + a.mesh_term + a.projection_term);

  // Blows up as h -> 0 with K, proj fixed; linear growth for large h.
  EXPECT_GT(apriori_bound(c, b, 1e-6, 0.01, 0.02).value, 1e3);
  EXPECT_GT(apriori_bound(c, b, 10.0, 0.01, 0.02).value, c0 * 10.0);
  for (double h = 0.01; h < 1.0; h += 0.01) {
    const double mid = apriori_bound(c, b, h, 0.01, 0.02).value;
    const double lo = apriori_bound(c, b, h - 0.005, 0.01, 0.02).value;
    const double hi = apriori_bound(c, b, h + 0.005, 0.01, 0.02).value;
    EXPECT_LE(mid, 0.5 * (lo + hi) + 1e-12);
  }

  c.l_g = 0.5;
  EXPECT_TRUE(apriori_bound(c, b, 0.1, 0.01, 0.02).within_hypothesis);
  c.l_f = 1.5;
  const AprioriBound undefined = apriori_bound(c, b, 0.1, 0.01, 0.02);
  EXPECT_FALSE(undefined.defined);
  EXPECT_TRUE(std::isnan(undefined.value));
  EXPECT_FALSE(apriori_bound(c, b, 0.0, 0.01, 0.02).defined);
}

}  // namespace
}  // namespace hjbpod
