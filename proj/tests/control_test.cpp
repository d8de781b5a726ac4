#include "fracnull/control.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace fracnull {
namespace {

GridFunction field(const SpatialGrid& grid) {
  GridFunction a(grid.size());
  for (int i = 0; i < grid.size(); ++i) a(i) = 1.0 + std::sin(grid.node(i));
  return a;
}

GridSeries random_series(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  GridSeries u(rows, cols);
  for (Eigen::Index k = 0; k < u.size(); ++k) u.data()[k] = nd(rng);
  return u;
}

GridFunction random_vector(int n, std::mt19937_64& rng) { return random_series(n, 1, rng).col(0); }

GTEST_TEST(ControlOperatorTest, ScalarZeroGeneratorClosedForm) {
  const double a = 0.7, nu = 1.6;
  const TimeMesh mesh = TimeMesh::uniform(nu, 24);
  const MildSolver solver(Generator::zero(1), a, mesh);
  const ControlOperatorW W(solver, ControlMap::identity(1), SpatialGrid::point(), 2.0);
  EXPECT_NEAR(W.apply(GridSeries::Ones(1, 24))(0), std::pow(nu, a) / std::tgamma(a + 1.0), 1e-13);
  EXPECT_EQ(W.apply(GridSeries::Zero(1, 24))(0), 0.0);
}

GTEST_TEST(ControlOperatorTest, LinearAndMatchesDirectLoop) {
  const SpatialGrid grid = SpatialGrid::trapezoid(12);
  const TimeMesh mesh = TimeMesh::graded(1.0, 20, 0.75);
  const MildSolver solver(Generator::diagonal_field(field(grid)), 0.75, mesh);
  const ControlOperatorW W(solver, ControlMap::window(grid, 0.4, 2.2), grid, 2.0);
  std::mt19937_64 rng(1);
  const GridSeries u = random_series(12, 20, rng), v = random_series(12, 20, rng);
  EXPECT_LE((W.apply(2.0 * u - 3.0 * v) - (2.0 * W.apply(u) - 3.0 * W.apply(v))).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((W.apply(u) - W.apply_direct(u)).cwiseAbs().maxCoeff(), 1e-13);
  // W u equals the terminal state of the forced system started at rest.
  EXPECT_LE((W.apply(u) - solver.terminal(GridFunction::Zero(12), ControlMap::window(grid, 0.4, 2.2).apply_series(u)))
                .cwiseAbs()
                .maxCoeff(),
            1e-13);
}

GTEST_TEST(ControlOperatorTest, RequiresAlphaAboveReciprocalExponent) {
  const MildSolver solver(Generator::zero(1), 0.5, TimeMesh::uniform(1.0, 4));
  EXPECT_THROW(ControlOperatorW(solver, ControlMap::identity(1), SpatialGrid::point(), 2.0),
               std::invalid_argument);
}

GTEST_TEST(SourceOperatorTest, Examples) {
  const double a = 0.65;
  const TimeMesh mesh = TimeMesh::uniform(2.0, 10);
  const GridFunction x0 = GridFunction::LinSpaced(3, 1.0, 3.0);
  EXPECT_EQ(apply_Z(Generator::zero(3), a, GridFunction::Zero(3), GridSeries::Zero(3, 10), mesh),
            GridFunction::Zero(3));
  EXPECT_TRUE(apply_Z(Generator::zero(3), a, x0, GridSeries::Zero(3, 10), mesh).isApprox(x0, 1e-15));
  const GridFunction z = apply_Z(Generator::zero(3), a, x0, GridSeries::Constant(3, 10, 0.4), mesh);
  const double shift = 0.4 * std::pow(2.0, a) / std::tgamma(a + 1.0);
  EXPECT_LE((z - (x0.array() + shift).matrix()).cwiseAbs().maxCoeff(), 1e-13);
}

GTEST_TEST(AdjointTest, WDualityOnRandomPairs) {
  for (double p : {2.0, 1.5, 3.0}) {
    const SpatialGrid grid = SpatialGrid::trapezoid(10, p);
    const TimeMesh mesh = TimeMesh::graded(1.0, 16, 0.8);
    const MildSolver solver(Generator::diagonal_field(field(grid)), 0.8, mesh);
    const ControlOperatorW W(solver, ControlMap::window(grid, 0.5, 2.5), grid, p);
    std::mt19937_64 rng(9);
    for (int k = 0; k < 20; ++k) {
      const GridFunction xs = random_vector(10, rng);
      const GridSeries u = random_series(10, 16, rng);
      const double lhs = pairing(xs, W.apply(u), grid);
      const double rhs = control_pairing(W.adjoint(xs), u, mesh, grid);
      EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(lhs)));
    }
    EXPECT_EQ(adjoint_W_apply(W, GridFunction::Zero(10)).norm, 0.0);
  }
}

GTEST_TEST(AdjointTest, WScalarZeroGeneratorIsCellAveragedKernel) {
  const double a = 0.6;
  const TimeMesh mesh = TimeMesh::uniform(1.0, 8);
  const MildSolver solver(Generator::zero(1), a, mesh);
  const ControlOperatorW W(solver, ControlMap::identity(1), SpatialGrid::point(), 2.0);
  const GridSeries d = W.adjoint(GridFunction::Constant(1, 1.5));
  for (int j = 0; j < 8; ++j) {
    const double avg = (std::pow(1.0 - mesh.t(j), a) - std::pow(1.0 - mesh.t(j + 1), a)) / (a * mesh.dt(j));
    EXPECT_NEAR(d(0, j), avg * 1.5 / std::tgamma(a), 1e-13);
  }
}

GTEST_TEST(AdjointTest, ZDualityAndDiagonalSymmetry) {
  const SpatialGrid grid = SpatialGrid::trapezoid(9);
  const TimeMesh mesh = TimeMesh::uniform(1.0, 14);
  const Generator gen = Generator::diagonal_field(field(grid));
  const double a = 0.7;
  std::mt19937_64 rng(4);
  for (int k = 0; k < 10; ++k) {
    const GridFunction xs = random_vector(9, rng), x0 = random_vector(9, rng);
    const GridSeries f = random_series(9, 14, rng);
    const AdjointZ z = adjoint_Z_apply(gen, a, xs, mesh, grid);
    const double lhs = pairing(z.s_part, x0, grid) + control_pairing(z.kernel_part, f, mesh, grid);
    const double rhs = pairing(xs, apply_Z(gen, a, x0, f, mesh), grid);
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(rhs)));
    EXPECT_LE((z.s_part - s_alpha_apply(gen, a, 1.0, xs)).cwiseAbs().maxCoeff(), 1e-14);
  }
  const AdjointZ zero = adjoint_Z_apply(gen, a, GridFunction::Zero(9), mesh, grid);
  EXPECT_EQ(zero.s_norm, 0.0);
  EXPECT_EQ(zero.kernel_l2, 0.0);
}

GTEST_TEST(GammaTest, PositiveForIdentityZeroForNoControl) {
  const SpatialGrid grid = SpatialGrid::trapezoid(8);
  const TimeMesh mesh = TimeMesh::uniform(1.0, 16);
  const Generator gen = Generator::diagonal_field(field(grid));
  const MildSolver solver(gen, 0.75, mesh);
  const ZAdjointOperator zs(solver, grid, 2.0);
  const GammaEstimate on = estimate_gamma(ControlOperatorW(solver, ControlMap::identity(8), grid, 2.0), zs, 20);
  EXPECT_GT(on.gamma, 0.0);
  EXPECT_EQ(on.used, 28);
  EXPECT_NEAR(lp_norm(on.argmin, grid), 1.0, 1e-12);
  const GammaEstimate off = estimate_gamma(ControlOperatorW(solver, ControlMap::zero(8), grid, 2.0), zs, 20);
  EXPECT_EQ(off.gamma, 0.0);

  const MildSolver scalar(Generator::scalar(-1.0), 0.6, mesh);
  const ZAdjointOperator zs1(scalar, SpatialGrid::point(), 2.0);
  EXPECT_GT(estimate_gamma(ControlOperatorW(scalar, ControlMap::identity(1), SpatialGrid::point(), 2.0), zs1, 5).gamma,
            0.0);
}

/// Discrete minimum-L² control for the scalar zero-generator problem:
/// minimize Σ Δt_j u_j² subject to Σ ω_j u_j / Γ(α) = d gives
/// u_j = dΓ(α)(ω_j/Δt_j) / Σ_k ω_k²/Δt_k.
std::vector<double> discrete_min_norm(const TimeMesh& mesh, double a, double d) {
  const int n = mesh.cells();
  std::vector<double> w(n);
  double s = 0.0;
  for (int j = 0; j < n; ++j) {
    w[j] = (std::pow(mesh.nu() - mesh.t(j), a) - std::pow(mesh.nu() - mesh.t(j + 1), a)) / a;
    s += w[j] * w[j] / mesh.dt(j);
  }
  std::vector<double> u(n);
  for (int j = 0; j < n; ++j) u[j] = d * std::tgamma(a) * w[j] / mesh.dt(j) / s;
  return u;
}

GTEST_TEST(MinNormTest, ScalarClosedFormL2) {
  const double a = 0.6;
  for (const TimeMesh& mesh : {TimeMesh::uniform(1.0, 64), TimeMesh::graded(1.5, 40, 0.7)}) {
    ControlProblem cp(Generator::zero(1), a, ControlMap::identity(1), mesh, SpatialGrid::point(), 2.0);
    const ControlResult r = null_control(cp, GridFunction::Ones(1), GridSeries::Zero(1, mesh.cells()));
    EXPECT_LE(r.terminal_norm, 1e-8);
    const auto oracle_u = discrete_min_norm(mesh, a, -1.0);
    for (int j = 0; j < mesh.cells(); ++j) EXPECT_NEAR(r.u.values(0, j), oracle_u[j], 1e-12 * std::abs(oracle_u[j]));
  }
}

GTEST_TEST(MinNormTest, ShapeMatchesContinuousKernelUpToConstant) {
  // The continuous minimizer is proportional to (ν - s)^{α-1}; its cell
  // averages and the discrete minimizer differ by one mesh-dependent factor.
  const double a = 0.6;
  const TimeMesh mesh = TimeMesh::uniform(1.0, 256);
  ControlProblem cp(Generator::zero(1), a, ControlMap::identity(1), mesh, SpatialGrid::point(), 2.0);
  const ControlResult r = null_control(cp, GridFunction::Ones(1), GridSeries::Zero(1, 256));
  std::vector<double> ratio;
  for (int j = 0; j < 255; ++j) {
    const double l0 = 1.0 - mesh.t(j), l1 = 1.0 - mesh.t(j + 1);
    const double avg = -(2.0 * a - 1.0) * std::tgamma(a) * (std::pow(l0, a) - std::pow(l1, a)) / (a * mesh.dt(j));
    ratio.push_back(r.u.values(0, j) / avg);
  }
  for (double x : ratio) EXPECT_NEAR(x, ratio.front(), 1e-10);
  // The factor is ∫k²/Σ ω_j²/Δt_j with k(s) = (1 - s)^{α-1}.
  double s = 0.0;
  for (int j = 0; j < 256; ++j) {
    const double w = (std::pow(1.0 - mesh.t(j), a) - std::pow(1.0 - mesh.t(j + 1), a)) / a;
    s += w * w / mesh.dt(j);
  }
  EXPECT_NEAR(ratio.front(), 1.0 / ((2.0 * a - 1.0) * s), 1e-10);
}

GTEST_TEST(MinNormTest, ZeroTargetAndExactTransfer) {
  const TimeMesh mesh = TimeMesh::uniform(1.0, 32);
  ControlProblem cp(Generator::zero(1), 0.6, ControlMap::identity(1), mesh, SpatialGrid::point(), 2.0);
  const MinNormResult z = cp.inverse().solve(GridFunction::Zero(1));
  EXPECT_EQ(z.u.cwiseAbs().maxCoeff(), 0.0);
  // Transfer 1 → 2 needs target d = 1.
  const ControlResult r = exact_control(cp, GridFunction::Ones(1), GridFunction::Constant(1, 2.0), GridSeries::Zero(1, 32));
  EXPECT_LE(r.terminal_norm, 1e-10);
  const auto u = discrete_min_norm(mesh, 0.6, 1.0);
  for (int j = 0; j < 32; ++j) EXPECT_NEAR(r.u.values(0, j), u[j], 1e-12 * std::abs(u[j]));
  // x1 = Z(x0, f) needs no control.
  const GridSeries f = GridSeries::Constant(1, 32, 0.3);
  const ControlResult none = exact_control(cp, GridFunction::Ones(1), cp.Z(GridFunction::Ones(1), f), f);
  EXPECT_LE(none.u.values.cwiseAbs().maxCoeff(), 1e-14);
}

GTEST_TEST(MinNormTest, InfeasibleWithoutControl) {
  const SpatialGrid grid = SpatialGrid::trapezoid(6);
  ControlProblem cp(Generator::diagonal_field(field(grid)), 0.75, ControlMap::zero(6), TimeMesh::uniform(1.0, 8), grid,
                    2.0);
  EXPECT_EQ(cp.inverse().rank(), 0);
  EXPECT_THROW(null_control(cp, GridFunction::Ones(6), GridSeries::Zero(6, 8)), InfeasibleError);
  try {
    cp.inverse().solve(GridFunction::Ones(6));
  } catch (const InfeasibleError& e) {
    EXPECT_NEAR(e.residual(), lp_norm(GridFunction::Ones(6), grid), 1e-12);
  }
}

GTEST_TEST(MinNormTest, IrlsMatchesDualNewtonOracle) {
  const SpatialGrid grid = SpatialGrid::trapezoid(4);
  GridFunction a(4);
  a << 1.0, 1.5, 2.0, 3.0;
  const double alpha = 0.9;
  for (double p : {1.25, 1.5, 1.75}) {
    for (int nt : {4, 8}) {
      const TimeMesh mesh = TimeMesh::uniform(1.0, nt);
      ControlProblem cp(Generator::diagonal_field(a), alpha, ControlMap::identity(4), mesh, grid, p);
      const GridFunction x0 = GridFunction::LinSpaced(4, 1.0, -0.5);
      const GridFunction target = -cp.Z(x0, GridSeries::Zero(4, nt));
      const MinNormResult r = cp.inverse().solve(target);
      Eigen::VectorXd c(4 * nt);
      for (int j = 0; j < nt; ++j) c.segment(4 * j, 4) = mesh.dt(j) * cp.grid().weights();
      const double best = oracle::min_pnorm(cp.W().matrix(), target, c, p);
      EXPECT_NEAR(r.norm, best, 1e-5) << "p=" << p << " nt=" << nt;
      EXPECT_GE(r.norm, best - 1e-10);
      EXPECT_LE(r.residual, 1e-9);
    }
  }
}

GTEST_TEST(MinNormTest, LargeExponentStillOptimal) {
  const SpatialGrid grid = SpatialGrid::trapezoid(5, 3.0);
  const TimeMesh mesh = TimeMesh::uniform(1.0, 12);
  ControlProblem cp(Generator::diagonal_field(field(grid)), 0.5, ControlMap::identity(5), mesh, grid, 3.0);
  const MinNormResult r = cp.inverse().solve(GridFunction::LinSpaced(5, -1.0, 1.0));
  EXPECT_LE(r.optimality, 1e-8);
  EXPECT_LE(r.residual, 1e-9);
  // Any other feasible control is at least as large: perturb along ker W.
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd& A = cp.W().matrix();
  const Eigen::MatrixXd ker = Eigen::FullPivLU<Eigen::MatrixXd>(A).kernel();
  Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(r.u.data(), r.u.size());
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd dir = ker * random_vector(static_cast<int>(ker.cols()), rng);
    const Eigen::VectorXd v = u + 1e-3 * dir / dir.norm();
    GridSeries vs = Eigen::Map<const GridSeries>(v.data(), 5, 12);
    EXPECT_GE(lp_time_norm(vs, mesh, cp.grid(), 3.0), r.norm - 1e-12);
  }
}

GTEST_TEST(NullControlTest, EveryCanonicalInitialState) {
  for (int n : {4, 9, 16}) {
    const SpatialGrid grid = SpatialGrid::trapezoid(n);
    const TimeMesh mesh = TimeMesh::uniform(1.0, 32);
    ControlProblem cp(Generator::diagonal_field(field(grid)), 0.75, ControlMap::identity(n), mesh, grid, 2.0);
    for (int i = 0; i < n; ++i) {
      const GridFunction x0 = GridFunction::Unit(n, i);
      const ControlResult r = null_control(cp, x0, GridSeries::Zero(n, 32));
      EXPECT_LE(r.terminal_norm, 1e-6 * lp_norm(x0, grid)) << n << " " << i;
    }
  }
}

GTEST_TEST(NullControlTest, DiagonalThirtyTwoNodes) {
  const SpatialGrid grid = SpatialGrid::trapezoid(32);
  const TimeMesh mesh = TimeMesh::uniform(1.0, 64);
  ControlProblem cp(Generator::diagonal_field(field(grid)), 0.75, ControlMap::identity(32), mesh, grid, 2.0);
  GridFunction x0(32);
  for (int i = 0; i < 32; ++i) x0(i) = std::sin(grid.node(i));
  const ControlResult r = null_control(cp, x0, GridSeries::Zero(32, 64));
  EXPECT_LE(r.terminal_norm, 1e-6 * lp_norm(x0, grid));
  const ControlResult zero = null_control(cp, GridFunction::Zero(32), GridSeries::Zero(32, 64));
  EXPECT_EQ(zero.u.values.cwiseAbs().maxCoeff(), 0.0);
}

GTEST_TEST(AprioriTest, Constants) {
  const AprioriConstants c = apriori(0.75, 0.375, 2.0, 1.0, 1.0, 0.0, 5.0, 2.0);
  EXPECT_NEAR(c.kappa2, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(c.kappa1, std::pow(1.0 / 0.6, 0.625), 1e-15);
  EXPECT_NEAR(c.D3, 1.0, 1e-15);
  EXPECT_NEAR(c.D1, 2.0, 1e-15);
  EXPECT_NEAR(c.D2, c.kappa1 / std::tgamma(0.75), 1e-15);

  const double nu = 2.0, M = 1.3, nb = 1.0, wi = 4.0, x = 0.5, a = 0.8, a1 = 0.3, p = 3.0;
  const AprioriConstants d = apriori(a, a1, p, nu, M, nb, wi, x);
  const double pc = 1.5;
  const double k2 = std::pow(std::pow(nu, pc * (a - 1.0) + 1.0) / (pc * (a - 1.0) + 1.0), 1.0 / pc);
  EXPECT_NEAR(d.kappa2, k2, 1e-14);
  const double loop = 1.0 + M / std::tgamma(a) * nb * k2 * wi;
  EXPECT_NEAR(d.D3, M * loop, 1e-13);
  EXPECT_NEAR(d.D1, M * x * loop, 1e-13);

  EXPECT_THROW(apriori(0.75, 0.8, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(apriori(0.45, 0.2, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0), std::invalid_argument);
}

}  // namespace
}  // namespace fracnull
