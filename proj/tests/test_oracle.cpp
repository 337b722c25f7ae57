#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"
#include "llcs/llcs.hpp"

using namespace llcs;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("direct expectation values of the product form", "[oracle]") {
  for (double z : {1.0, 1.6875, 3.0}) {
    const auto d = direct_expectation({2, z});
    CHECK_THAT(d.norm, WithinAbs(1.0, 1e-9));
    // T = N zeta^2 / 2, V_ee = 5 zeta / 8
    CHECK_THAT(d.kinetic, WithinRel(z * z, 1e-6));
    CHECK_THAT(d.repulsion, WithinRel(5.0 * z / 8.0, 1e-6));
  }
  CHECK(direct_expectation({1, 1.0}).repulsion == 0.0);
  CHECK_THAT(direct_expectation({3, 2.0}).repulsion, WithinRel(3.0 * 5.0 * 2.0 / 8.0, 1e-6));
  CHECK_THROWS_AS(direct_expectation({0, 1.0}), ValidationError);
}

TEST_CASE("extracted product conditional", "[oracle]") {
  const ProductWavefunction psi{2, 1.6875};
  const auto grid = QuadratureGrid::radial_angular({128, 6, 6, 1.0 / psi.zeta});
  for (const Vec3 r : {Vec3{0, 0, 0.1}, Vec3{0.5, -0.5, 0.2}, Vec3{1.5, 0, 0}, Vec3{0, 2.0, 1.0}, Vec3{0.01, 0, 0}}) {
    const auto f = extract_f(psi, r);
    const double total = grid.integrate([&](const Vec3& s) { return f({s}); });
    CHECK_THAT(total, WithinAbs(1.0, 1e-6));
    // a product state carries no information about r
    CHECK_THAT(f({{0.3, 0.2, 0.1}}), WithinRel(extract_f(psi, {0, 0, 0.4})({{0.3, 0.2, 0.1}}), 1e-12));
  }
  CHECK_THROWS_AS(extract_f(psi, {40, 0, 0}), ValidationError);
}

TEST_CASE("product decomposition adjudicates the prefactor", "[oracle]") {
  const double z = 1.6875;
  const auto rep = verify_decomposition(ProductWavefunction{2, z});
  CHECK(std::abs(rep.residual_half) <= 1e-3);
  CHECK_THAT(rep.residual_full, WithinAbs(-5.0 * z / 8.0, 1e-3));
  CHECK_THAT(rep.fisher, WithinAbs(0.0, 1e-6));
  CHECK_THAT(rep.weizsacker, WithinRel(z * z, 1e-6));
  CHECK(rep.passed(CoulombPrefactor::half));
  CHECK_FALSE(rep.passed(CoulombPrefactor::full));
  CHECK_THROWS_AS(verify_decomposition(ProductWavefunction{3, z}), ValidationError);
}

TEST_CASE("grid ground states", "[oracle]") {
  const GridSystem1D sys(12, 8.0);
  for (auto sector : {Exchange::symmetric, Exchange::antisymmetric}) {
    const auto gs = exact_ground_state(sys, sector);
    const double h = sys.spacing();
    CHECK_THAT(gs.psi.squaredNorm() * h * h, WithinAbs(1.0, 1e-12));
    const auto e = grid_expectation(sys, gs.psi);
    CHECK_THAT(e.kinetic + e.repulsion + e.external, WithinAbs(gs.energy, 1e-10));
    const double sign = sector == Exchange::symmetric ? 1.0 : -1.0;
    CHECK((gs.psi - sign * gs.psi.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    double mass = 0.0;
    for (double v : grid_density(sys, gs.psi)) mass += v * h;
    CHECK_THAT(mass, WithinAbs(2.0, 1e-12));
  }
  CHECK(exact_ground_state(sys, Exchange::symmetric).energy < exact_ground_state(sys, Exchange::antisymmetric).energy);
  CHECK_THROWS_AS(GridSystem1D(2, 8.0), ValidationError);
}

TEST_CASE("grid conditional satisfies condition (i) exactly", "[oracle]") {
  const GridSystem1D sys(16, 10.0);
  for (auto sector : {Exchange::symmetric, Exchange::antisymmetric}) {
    const auto gs = exact_ground_state(sys, sector);
    const auto p = extract_f(sys, gs.psi);
    for (int i = 0; i < sys.points(); ++i) CHECK_THAT(p.row(i).sum(), WithinAbs(1.0, 1e-12));
    if (sector == Exchange::antisymmetric) CHECK(p.diagonal().cwiseAbs().maxCoeff() == 0.0);
    const auto rho = grid_density(sys, gs.psi);
    const auto joint = joint_from_conditional(sys, rho, p);
    CHECK((joint - joint.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((conditional_from_joint(sys, rho, joint) - p).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("grid decomposition", "[oracle]") {
  const GridSystem1D sys(32, 10.0);
  const auto gs = exact_ground_state(sys, Exchange::symmetric);
  const auto rep = verify_decomposition(sys, gs.psi);
  REQUIRE(rep.exact_residual);
  CHECK(std::abs(*rep.exact_residual) < 1e-10);
  CHECK(std::abs(rep.residual_half) <= 1e-2);
  CHECK(rep.residual_full < -0.1);
}

TEST_CASE("ansatz tables on the grid", "[oracle]") {
  const GridSystem1D sys(16, 10.0);
  const auto rho = sys.uniform_density();
  const auto tab = sys.tabulated_density(rho);
  CHECK_THAT(integrate_density(tab, QuadratureGrid::for_density(tab)), WithinAbs(2.0, 1e-12));
  const auto a = ConditionalAnsatz::pairwise(tab, sys.continuum_space(), {1.0, 0.0});
  const auto p = table_from_ansatz(sys, a);
  for (int i = 0; i < sys.points(); ++i) {
    CHECK_THAT(p.row(i).sum(), WithinAbs(1.0, 1e-12));
    CHECK(p(i, i) == 0.0);
  }
  CHECK(grid_weizsacker(sys, rho) > 0.0);  // walls
}

TEST_CASE("brute-force inner minimum", "[oracle]") {
  const GridSystem1D sys(10, 8.0);
  const auto rho = sys.uniform_density();
  BruteForceOptions opt;
  opt.restarts = 3;
  const auto a = ConditionalAnsatz::pairwise(sys.tabulated_density(rho), sys.continuum_space(), {1.0, 0.0});
  const auto start = table_from_ansatz(sys, a);
  const double param = grid_gamma(sys, rho, start).total();
  const auto rep = bruteforce_inner_min(sys, rho, param, opt, {start});
  CHECK(rep.gamma_grid <= param + 1e-12);
  CHECK(rep.hierarchy_holds);
  CHECK(rep.max_diagonal == 0.0);
  CHECK(rep.runs == 4);
  for (int i = 0; i < sys.points(); ++i) CHECK_THAT(rep.table.row(i).sum(), WithinAbs(1.0, 1e-10));
  CHECK_THAT(rep.parts.total(), WithinAbs(rep.gamma_grid, 1e-12));
  std::vector<double> bad = rho;
  bad[3] = 0.0;
  CHECK_THROWS_AS(bruteforce_inner_min(sys, bad, param, opt), ValidationError);
}

TEST_CASE("Sinkhorn scaling meets the marginals", "[oracle]") {
  const GridSystem1D sys(10, 8.0);
  const auto gs = exact_ground_state(sys, Exchange::antisymmetric);
  const auto rho = grid_density(sys, gs.psi);
  std::vector<double> marginal(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) marginal[i] = 0.5 * rho[i] * sys.spacing();
  const auto P = symmetric_sinkhorn(Eigen::MatrixXd::Ones(10, 10), marginal);
  for (int i = 0; i < 10; ++i) CHECK_THAT(P.row(i).sum(), WithinAbs(marginal[i], 1e-10));
  CHECK((P - P.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(P.diagonal().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("density-consistent descent moves off a non-stationary table", "[oracle]") {
  const GridSystem1D sys(10, 8.0);
  const auto gs = exact_ground_state(sys, Exchange::antisymmetric);
  const auto rho = grid_density(sys, gs.psi);
  const auto exact = joint_from_conditional(sys, rho, extract_f(sys, gs.psi));
  const auto at_exact = descend_consistent(sys, rho, exact);
  CHECK(at_exact.stationary);
  std::vector<double> marginal(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) marginal[i] = 0.5 * rho[i] * sys.spacing();
  const auto flat = symmetric_sinkhorn(Eigen::MatrixXd::Ones(10, 10), marginal);
  const auto from_flat = descend_consistent(sys, rho, flat);
  CHECK_FALSE(from_flat.stationary);
}
