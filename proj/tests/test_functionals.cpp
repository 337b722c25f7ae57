#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"
#include "llcs/llcs.hpp"

using namespace llcs;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double zeta_he = 27.0 / 16.0;
const SpaceSpec he_space(Dimensionality::three_d, 2, 10.0);
const DensityModel he_rho = DensityModel::exponential(2, zeta_he);

EstimationSettings budget(std::size_t points, std::uint64_t seed = 1) {
  EstimationSettings s;
  s.points = points;
  s.sampler.seed = seed;
  return s;
}

bool within_sigma(double value, const Estimate& e, double k = 3.0) {
  return std::abs(e.value - value) <= k * e.std_error;
}

}  // namespace

TEST_CASE("Weizsacker term closed forms", "[functionals]") {
  const auto g = QuadratureGrid::radial_angular();
  CHECK_THAT(weizsacker_term(DensityModel::exponential(1, 1.0), g), WithinAbs(0.5, 1e-9));
  CHECK_THAT(weizsacker_term(he_rho, g), WithinAbs(2.84765625, 1e-8));
  for (double z : {0.4, 2.0, 6.0}) CHECK_THAT(weizsacker_term(DensityModel::exponential(3, z), g), WithinRel(1.5 * z * z, 1e-9));
  const auto flat = DensityModel::tabulated_1d(2, -2.0, 0.5, std::vector<double>(9, 1.0));
  CHECK(weizsacker_term(flat, QuadratureGrid::for_density(flat)) == 0.0);
  CHECK_THROWS_AS(weizsacker_term(he_rho, QuadratureGrid::uniform_1d(-1, 1, 4)), ValidationError);
}

TEST_CASE("Hartree integral gives 5 zeta / 8 per pair", "[functionals]") {
  const auto g = QuadratureGrid::radial_angular();
  for (double z : {0.5, 1.0, zeta_he, 3.0}) {
    const auto rho = DensityModel::exponential(2, z);
    // int int rho rho / |r - r'| = N^2 5 zeta / 8
    CHECK_THAT(hartree_integral(rho, he_space, g), WithinRel(4.0 * 5.0 * z / 8.0, 1e-9));
  }
}

TEST_CASE("frozen family terms", "[functionals]") {
  const auto a = ConditionalAnsatz::frozen(he_rho, he_space);
  const auto corr = estimate_correlation(a, budget(8192));
  CHECK(corr.fisher.value == 0.0);
  CHECK(corr.fisher.std_error == 0.0);
  CHECK(within_sigma(5.0 * zeta_he / 8.0, corr.coulomb));
  CHECK(corr.gamma.value == corr.fisher.value + corr.coulomb.value);

  auto full = budget(8192);
  full.prefactor = CoulombPrefactor::full;
  const auto cf = estimate_correlation(a, full);
  CHECK(cf.coulomb.value == 2.0 * corr.coulomb.value);
  CHECK(within_sigma(5.0 * zeta_he / 4.0, cf.coulomb));
  CHECK(coulomb_term(a, budget(8192), CoulombPrefactor::full).value == cf.coulomb.value);
}

TEST_CASE("frozen helium total energy", "[functionals]") {
  const auto a = ConditionalAnsatz::frozen(he_rho, he_space);
  const double exact = zeta_he * zeta_he + 5.0 * zeta_he / 8.0 - 4.0 * zeta_he;
  const auto mc = total_energy(a, ExternalPotential::coulomb(2.0), budget(8192));
  CHECK(within_sigma(exact, mc.total));
  CHECK(mc.total.value == mc.weizsacker + mc.fisher.value + mc.coulomb.value + mc.external);
  auto q = budget(8192);
  q.path = EstimatorPath::quadrature;
  const auto quad = total_energy(a, ExternalPotential::coulomb(2.0), q);
  CHECK_THAT(quad.total.value, WithinAbs(exact, 1e-8));
  CHECK(quad.total.std_error == 0.0);
  CHECK(quad.points == 0);
  CHECK_THROWS_AS(total_energy(ConditionalAnsatz::pairwise(he_rho, he_space, {1, 1}), ExternalPotential::coulomb(2), q),
                  ValidationError);
}

TEST_CASE("no potential and a flat density leave only the Coulomb term", "[functionals]") {
  const SpaceSpec s(Dimensionality::one_d_softened, 2, 10.0, 1.0);
  const auto flat = DensityModel::tabulated_1d(2, -5.0, 0.5, std::vector<double>(21, 1.0));
  const auto a = ConditionalAnsatz::frozen(flat, s);
  const auto e = total_energy(a, ExternalPotential::zero(), budget(2048));
  CHECK(e.external == 0.0);
  CHECK(e.fisher.value == 0.0);
  CHECK(e.total.value == e.weizsacker + e.coulomb.value);
  CHECK(e.weizsacker == 0.0);
}

TEST_CASE("one electron has no pair terms", "[functionals]") {
  const SpaceSpec s(Dimensionality::three_d, 1, 10.0);
  const auto rho = DensityModel::exponential(1, 1.0);
  for (const auto& a : {ConditionalAnsatz::frozen(rho, s), ConditionalAnsatz::pairwise(rho, s, {1, 1})}) {
    const auto c = estimate_correlation(a, budget(256));
    CHECK(c.coulomb.value == 0.0);
    CHECK(c.fisher.value == 0.0);
    CHECK(coulomb_term(a, budget(256), CoulombPrefactor::full).value == 0.0);
  }
  const auto e = total_energy(ConditionalAnsatz::frozen(rho, s), ExternalPotential::coulomb(1.0), budget(256));
  CHECK_THAT(e.total.value, WithinAbs(-0.5, 1e-9));
}

TEST_CASE("Gaussian toy Fisher term", "[functionals]") {
  // Var_f[s | r] = N - 1 for every r, so the term is N (N - 1) / 8
  for (int n : {2, 3}) {
    const SpaceSpec s(Dimensionality::one_d_softened, n, 10.0, 1.0);
    const auto a = ConditionalAnsatz::gaussian_toy(DensityModel::exponential(n, 1.0, Dimensionality::one_d_softened), s);
    const auto f = fisher_term(a, budget(4096, 3));
    INFO("N=" << n << " fisher " << f.value << " +- " << f.std_error);
    CHECK(within_sigma(n * (n - 1) / 8.0, f));
    CHECK(f.std_error < 0.01);
  }
}

TEST_CASE("pairwise Fisher vanishes as gamma goes to zero", "[functionals]") {
  const auto base = ConditionalAnsatz::pairwise(he_rho, he_space, {1.0, 0.0});
  const auto f0 = fisher_term(base.with_params({0.0, 0.0}, true), budget(1024));
  CHECK(f0.value == 0.0);
  const auto small = fisher_term(base.with_params({1e-4, 0.0}), budget(2048));
  CHECK(std::abs(small.value) <= 3.0 * small.std_error + 1e-9);
  const auto f1 = fisher_term(base, budget(2048));
  CHECK(f1.value >= -3.0 * f1.std_error);
}

TEST_CASE("squared mean estimate", "[functionals]") {
  // two walkers: cross product of the means
  CHECK(squared_mean_estimate({{2, 0, 0}, {4, 0, 0}}, {2, 2}, 0.0) == 2.0);
  // one walker falls back to the i.i.d. correction
  const double v = squared_mean_estimate({{3, 0, 0}}, {3}, 5.0);
  CHECK_THAT(v, WithinRel((3.0 * 1.0 - 5.0 / 3.0) / 2.0, 1e-15));
}

TEST_CASE("estimates do not depend on the worker count", "[functionals]") {
  const auto a = ConditionalAnsatz::pairwise(he_rho, he_space, {0.8, 0.5});
  auto s1 = budget(512, 9);
  s1.workers = 1;
  auto s4 = s1;
  s4.workers = 4;
  const auto x = estimate_correlation(a, s1);
  const auto y = estimate_correlation(a, s4);
  CHECK(x.fisher == y.fisher);
  CHECK(x.coulomb == y.coulomb);
  CHECK(x.gamma == y.gamma);
  CHECK(x.covariance == y.covariance);
  const auto z = estimate_correlation(a, budget(512, 10));
  CHECK(z.gamma.value != x.gamma.value);
}

TEST_CASE("prefactor parsing", "[functionals]") {
  CHECK(parse_prefactor("half") == CoulombPrefactor::half);
  CHECK(parse_prefactor("full") == CoulombPrefactor::full);
  CHECK_THROWS_AS(parse_prefactor("double"), ValidationError);
  CHECK(prefactor_value(CoulombPrefactor::half, 4) == 1.5);
  CHECK(prefactor_value(CoulombPrefactor::full, 4) == 3.0);
}
