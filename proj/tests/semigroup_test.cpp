#include "fracnull/semigroup.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace fracnull {
namespace {

GridFunction ramp(int n) {
  GridFunction x(n);
  for (int i = 0; i < n; ++i) x(i) = 1.0 + 0.5 * std::sin(1.3 * i);
  return x;
}

GridFunction coefficient(const SpatialGrid& grid) {
  GridFunction a(grid.size());
  for (int i = 0; i < grid.size(); ++i) a(i) = 1.0 + grid.node(i) * grid.node(i);
  return a;
}

GTEST_TEST(SemigroupTest, IdentityAtZeroAndDecay) {
  const SpatialGrid grid = SpatialGrid::trapezoid(9);
  const Generator gen = Generator::diagonal_field(GridFunction::Ones(9));
  const GridFunction x = ramp(9);
  EXPECT_EQ(semigroup_apply(gen, 0.0, x), x);
  EXPECT_TRUE(semigroup_apply(gen, 1.0, x).isApprox(std::exp(-1.0) * x, 1e-15));
  EXPECT_THROW(semigroup_apply(gen, -0.1, x), std::invalid_argument);
}

GTEST_TEST(SemigroupTest, SemigroupProperty) {
  const SpatialGrid grid = SpatialGrid::trapezoid(12);
  const Generator gen = Generator::diagonal_field(coefficient(grid));
  const GridFunction x = ramp(12);
  for (double t : {0.1, 0.4}) {
    for (double s : {0.05, 0.7}) {
      const GridFunction lhs = semigroup_apply(gen, t + s, x);
      const GridFunction rhs = semigroup_apply(gen, t, semigroup_apply(gen, s, x));
      EXPECT_LE(lp_norm(lhs - rhs, grid), 1e-12);
    }
  }
}

GTEST_TEST(FractionalFamilyTest, ScalarExamples) {
  const Generator gen = Generator::scalar(-1.0);
  const GridFunction one = GridFunction::Ones(1);
  EXPECT_EQ(s_alpha_apply(gen, 0.5, 0.0, one)(0), 1.0);
  EXPECT_NEAR(s_alpha_apply(gen, 0.5, 1.0, one)(0), 0.427584, 1e-6);
  EXPECT_NEAR(s_alpha_apply(gen, 0.5, 4.0, one)(0), oracle::ml_half(2.0), 1e-12);
  // T_α(t) = E_{α,α}(λt^α).
  EXPECT_NEAR(t_alpha_apply(gen, 0.6, 1.5, one)(0),
              oracle::ml_series(0.6, 0.6, -std::pow(1.5, 0.6)), 1e-12);
}

GTEST_TEST(FractionalFamilyTest, ZeroGenerator) {
  const Generator gen = Generator::zero(5);
  const GridFunction x = ramp(5);
  for (double a : {0.55, 0.8}) {
    EXPECT_TRUE(s_alpha_apply(gen, a, 2.0, x).isApprox(x, 1e-15));
    EXPECT_TRUE(t_alpha_apply(gen, a, 2.0, x).isApprox(x / std::tgamma(a), 1e-14));
  }
}

GTEST_TEST(FractionalFamilyTest, ClassicalLimit) {
  const SpatialGrid grid = SpatialGrid::trapezoid(7);
  const Generator gen = Generator::diagonal_field(coefficient(grid));
  const GridFunction x = ramp(7);
  const GridFunction e = semigroup_apply(gen, 0.8, x);
  EXPECT_LE(lp_norm(s_alpha_apply(gen, 1.0, 0.8, x) - e, grid), 1e-12);
  EXPECT_LE(lp_norm(t_alpha_apply(gen, 1.0, 0.8, x) - e, grid), 1e-12);
}

GTEST_TEST(FractionalFamilyTest, BoundedByGrowthConstant) {
  const SpatialGrid grid = SpatialGrid::trapezoid(10, 3.0);
  const Generator gen = Generator::diagonal_field(coefficient(grid));
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    GridFunction x(10);
    for (int i = 0; i < 10; ++i) x(i) = nd(rng);
    for (double t : {0.0, 0.3, 1.0, 2.5}) {
      EXPECT_LE(lp_norm(s_alpha_apply(gen, 0.7, t, x), grid), gen.bound() * lp_norm(x, grid) + 1e-14);
      EXPECT_LE(lp_norm(t_alpha_apply(gen, 0.7, t, x), grid),
                gen.bound() / std::tgamma(0.7) * lp_norm(x, grid) + 1e-14);
    }
  }
}

GTEST_TEST(IntegralRepresentationTest, DensityIntegralsMatchClosedForms) {
  const SpatialGrid point = SpatialGrid::point();
  const auto s = verify_integral_representation(Generator::scalar(-1.0), 0.5, 1.0, GridFunction::Ones(1), point);
  EXPECT_LE(s.s_residual, 1e-6);
  EXPECT_LE(s.t_residual, 1e-6);

  const auto z = verify_integral_representation(Generator::scalar(-1.0), 0.5, 0.0, GridFunction::Ones(1), point);
  EXPECT_LE(z.s_residual, 1e-10);

  const SpatialGrid grid = SpatialGrid::trapezoid(8);
  const auto d = verify_integral_representation(Generator::diagonal_field(coefficient(grid)), 0.7, 0.9,
                                                ramp(8), grid);
  EXPECT_LE(d.s_residual, 1e-5);
  EXPECT_LE(d.t_residual, 1e-5);
}

GTEST_TEST(OperatorBoundsTest, DissipativeAndZeroGenerators) {
  const SpatialGrid grid = SpatialGrid::trapezoid(6);
  const std::vector<double> ts = {0.0, 0.25, 0.5, 1.0};
  const double a = 0.65;
  const OperatorBounds dis = operator_bounds(Generator::diagonal_field(coefficient(grid)), a, ts, grid);
  EXPECT_LE(dis.sup_s, 1.0 + 1e-14);
  EXPECT_LE(dis.sup_t, 1.0 / std::tgamma(a) + 1e-14);
  const OperatorBounds zero = operator_bounds(Generator::zero(6), a, ts, grid);
  EXPECT_NEAR(zero.sup_s, 1.0, 1e-15);
  const OperatorBounds grow = operator_bounds(Generator::scalar(0.4, 1, 1.0), a, {1.0}, SpatialGrid::point());
  EXPECT_NEAR(grow.sup_s, oracle::ml_series(a, 1.0, 0.4), 1e-12);
  EXPECT_THROW(operator_bounds(Generator::zero(6), a, {}, grid), std::invalid_argument);
}

GTEST_TEST(FractionalFamilyTest, StrongContinuityAtZero) {
  const SpatialGrid grid = SpatialGrid::trapezoid(16);
  const Generator gen = Generator::diagonal_field(coefficient(grid));
  GridFunction x(16);
  for (int i = 0; i < 16; ++i) x(i) = std::sin(grid.node(i));
  // ‖S_α(h)x - x‖ decays like h^α, so each decade gains a factor near 10^0.6.
  double prev = std::numeric_limits<double>::infinity();
  for (double h : {1e-2, 1e-3, 1e-4}) {
    const double d = lp_norm(s_alpha_apply(gen, 0.6, h, x) - x, grid);
    EXPECT_LT(d, prev / 3.0) << h;
    prev = d;
  }
}

GTEST_TEST(GeneratorTest, DenseDiagonalMatchesDiagonalField) {
  const SpatialGrid grid = SpatialGrid::trapezoid(5);
  const GridFunction a = coefficient(grid);
  const Generator diag = Generator::diagonal_field(a);
  const Generator dense = Generator::dense(Eigen::MatrixXd((-a).asDiagonal()), grid);
  EXPECT_TRUE(dense.is_dense());
  const GridFunction x = ramp(5);
  EXPECT_LE(lp_norm(s_alpha_apply(dense, 0.7, 0.6, x) - s_alpha_apply(diag, 0.7, 0.6, x), grid), 1e-12);
  EXPECT_LE(lp_norm(t_alpha_apply(dense, 0.7, 0.6, x) - t_alpha_apply(diag, 0.7, 0.6, x), grid), 1e-12);
  EXPECT_NEAR(dense.bound(), 1.0, 1e-12);
}

GTEST_TEST(GeneratorTest, DenseNonSymmetricMatchesMatrixExponential) {
  // Upper triangular with distinct real eigenvalues; e^{tA} by Taylor series.
  const SpatialGrid grid = SpatialGrid::trapezoid(3);
  Eigen::MatrixXd a(3, 3);
  a << -1.0, 0.5, 0.0, 0.0, -2.0, 0.3, 0.0, 0.0, -0.5;
  const Generator gen = Generator::dense(a, grid);
  const double t = 0.7;
  Eigen::MatrixXd e = Eigen::MatrixXd::Identity(3, 3), term = e;
  for (int k = 1; k < 40; ++k) {
    term = term * a * t / k;
    e += term;
  }
  const GridFunction x = ramp(3);
  EXPECT_LE((semigroup_apply(gen, t, x) - e * x).cwiseAbs().maxCoeff(), 1e-13);
}

GTEST_TEST(GeneratorTest, RejectsUnsupportedMatrices) {
  const SpatialGrid grid = SpatialGrid::trapezoid(2);
  Eigen::MatrixXd rot(2, 2);
  rot << 0.0, 1.0, -1.0, 0.0;
  EXPECT_THROW(Generator::dense(rot, grid), std::invalid_argument);
  Eigen::MatrixXd jordan(2, 2);
  jordan << -1.0, 1.0, 0.0, -1.0;
  EXPECT_THROW(Generator::dense(jordan, grid), std::invalid_argument);
  EXPECT_THROW(Generator::dense(Eigen::MatrixXd::Zero(3, 3), grid), std::invalid_argument);
}

GTEST_TEST(ControlMapTest, AdjointAndNorm) {
  const SpatialGrid grid = SpatialGrid::trapezoid(11);
  const ControlMap b = ControlMap::window(grid, 0.5, 2.0);
  const GridFunction x = ramp(11), u = GridFunction::LinSpaced(11, -1.0, 2.0);
  EXPECT_NEAR(pairing(b.apply(u), x, grid), pairing(u, b.adjoint(x), grid), 1e-14);
  EXPECT_EQ(b.norm(), 1.0);
  for (int i = 0; i < 11; ++i) {
    const bool inside = grid.node(i) >= 0.5 && grid.node(i) <= 2.0;
    EXPECT_EQ(b.apply(u)(i), inside ? u(i) : 0.0);
  }
  EXPECT_TRUE(ControlMap::zero(11).is_zero());
  EXPECT_EQ(ControlMap::identity(11).apply(u), u);
}

}  // namespace
}  // namespace fracnull
