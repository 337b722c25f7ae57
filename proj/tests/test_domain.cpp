#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "catch_amalgamated.hpp"
#include "llcs/llcs.hpp"

using namespace llcs;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("space validates its inputs", "[domain]") {
  CHECK_THROWS_AS(SpaceSpec(Dimensionality::three_d, 0, 10.0), ValidationError);
  CHECK_THROWS_AS(SpaceSpec(Dimensionality::three_d, 2, 0.0), ValidationError);
  CHECK_THROWS_AS(SpaceSpec(Dimensionality::one_d_softened, 2, 5.0, 0.0), ValidationError);
  CHECK_THROWS_AS(parse_dimensionality("2d"), ValidationError);
}

TEST_CASE("satellite region has volume Omega/N", "[domain]") {
  for (int n : {1, 2, 5}) {
    const SpaceSpec s3(Dimensionality::three_d, n, 7.0);
    const double rs = s3.satellite_radius();
    CHECK_THAT(4.0 / 3.0 * std::numbers::pi * rs * rs * rs, WithinRel(s3.one_particle_volume(), 1e-12));
    const SpaceSpec s1(Dimensionality::one_d_softened, n, 7.0);
    CHECK_THAT(2.0 * s1.satellite_radius(), WithinRel(s1.one_particle_volume(), 1e-12));
  }
}

TEST_CASE("kernels", "[domain]") {
  const SpaceSpec s3(Dimensionality::three_d, 2, 10.0);
  CHECK(s3.kernel({1, 0, 0}, {0, 0, 0}) == 1.0);
  CHECK(std::isinf(s3.kernel({1, 2, 3}, {1, 2, 3})));
  const SpaceSpec s1(Dimensionality::one_d_softened, 2, 10.0, 0.5);
  CHECK_THAT(s1.kernel({0, 0, 0}, {0, 0, 0}), WithinRel(2.0, 1e-15));
  // gradient vs central differences
  const Vec3 a{0.3, -0.4, 1.1}, b{-0.2, 0.5, 0.1};
  const double h = 1e-6;
  const Vec3 g = s3.kernel_gradient(a, b);
  CHECK_THAT(g.x, WithinRel((s3.kernel(a + Vec3{h, 0, 0}, b) - s3.kernel(a - Vec3{h, 0, 0}, b)) / (2 * h), 1e-7));
  CHECK_THAT(g.z, WithinRel((s3.kernel(a + Vec3{0, 0, h}, b) - s3.kernel(a - Vec3{0, 0, h}, b)) / (2 * h), 1e-7));
}

TEST_CASE("densities integrate to N", "[domain]") {
  const auto g3 = QuadratureGrid::radial_angular();
  for (double z : {0.3, 1.0, 27.0 / 16.0, 4.0, 10.0}) {
    CHECK_THAT(integrate_density(DensityModel::exponential(2, z), g3), WithinAbs(2.0, 1e-8));
  }
  CHECK_THAT(integrate_density(DensityModel::exponential_mixture(3, {0.8, 2.5}, {2.0, 1.0}), g3), WithinAbs(3.0, 1e-8));
  const auto g1 = QuadratureGrid::for_dimensionality(Dimensionality::one_d_softened);
  CHECK_THAT(integrate_density(DensityModel::exponential(2, 1.3, Dimensionality::one_d_softened), g1),
             WithinAbs(2.0, 1e-8));
  const auto tab = DensityModel::tabulated_1d(2, -3.0, 0.5, {0, 1, 3, 2, 2, 4, 1, 0.5, 0, 1, 0, 0, 0});
  CHECK_THAT(integrate_density(tab, QuadratureGrid::for_density(tab)), WithinAbs(2.0, 1e-12));
}

TEST_CASE("mixture weights are normalized", "[domain]") {
  const auto m = DensityModel::exponential_mixture(2, {1.0, 2.0}, {3.0, 1.0});
  CHECK_THAT(m.weights()[0], WithinRel(0.75, 1e-15));
  CHECK_THAT(m.length_scale(), WithinRel(1.0 / 1.25, 1e-15));
}

TEST_CASE("density constructors reject bad input", "[domain]") {
  CHECK_THROWS_AS(DensityModel::exponential(2, -1.0), ValidationError);
  CHECK_THROWS_AS(DensityModel::exponential(0, 1.0), ValidationError);
  CHECK_THROWS_AS(DensityModel::exponential_mixture(2, {1.0}, {1.0, 2.0}), ValidationError);
  CHECK_THROWS_AS(DensityModel::exponential_mixture(2, {1.0, 2.0}, {0.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(DensityModel::tabulated_1d(2, 0.0, 1.0, {1.0, -1.0}), ValidationError);
  CHECK_THROWS_AS(DensityModel::tabulated_1d(2, 0.0, 1.0, {0.0, 0.0}), ValidationError);
}

TEST_CASE("analytic gradients match finite differences", "[domain]") {
  const double h = 1e-6;
  auto fd = [&](const DensityModel& m, Vec3 r, int axis) {
    Vec3 e{};
    (axis == 0 ? e.x : axis == 1 ? e.y : e.z) = h;
    return (m.value(r + e) - m.value(r - e)) / (2 * h);
  };
  const auto m3 = DensityModel::exponential_mixture(2, {0.9, 2.1}, {1.0, 1.0});
  for (const Vec3 r : {Vec3{0.3, 0.2, -0.5}, Vec3{1.5, -0.7, 0.1}, Vec3{0.05, 0.0, 0.02}}) {
    const auto g = m3.gradient(r);
    REQUIRE(g);
    CHECK_THAT(g->x, WithinRel(fd(m3, r, 0), 1e-6));
    CHECK_THAT(g->y, WithinRel(fd(m3, r, 1), 1e-6));
    CHECK_THAT(g->z, WithinRel(fd(m3, r, 2), 1e-6));
  }
  CHECK_FALSE(m3.gradient({0, 0, 0}).has_value());
  const auto m1 = DensityModel::exponential(2, 1.4, Dimensionality::one_d_softened);
  for (double x : {-1.3, 0.4, 2.2}) CHECK_THAT(m1.gradient({x, 0, 0})->x, WithinRel(fd(m1, {x, 0, 0}, 0), 1e-6));
  const auto tab = DensityModel::tabulated_1d(2, -2.0, 1.0, {0, 1, 3, 2, 0});
  CHECK_THAT(tab.gradient({-0.5, 0, 0})->x, WithinRel(fd(tab, {-0.5, 0, 0}, 0), 1e-9));
  CHECK(tab.value({-2.5, 0, 0}) == 0.0);
  CHECK(tab.value({2.5, 0, 0}) == 0.0);
}

TEST_CASE("external energy is exact and linear in Z and zeta", "[domain]") {
  const auto g = QuadratureGrid::radial_angular();
  for (double z : {0.7, 1.6875, 3.0}) {
    for (double charge : {1.0, 2.0, 5.0}) {
      const auto rho = DensityModel::exponential(2, z);
      // int -Z/r rho = -Z N zeta
      CHECK_THAT(external_energy(rho, ExternalPotential::coulomb(charge), g), WithinRel(-charge * 2.0 * z, 1e-9));
    }
  }
  CHECK(external_energy(DensityModel::exponential(2, 1.0), ExternalPotential::zero(), g) == 0.0);
  CHECK_THROWS_AS(external_energy(DensityModel::exponential(2, 1.0), ExternalPotential::softened(2.0), g),
                  ValidationError);
}

TEST_CASE("conditioning points follow rho/N", "[domain]") {
  SECTION("3D exponential radial mean") {
    // <r> = int r rho / N; for rho ~ exp(-2 zeta r) this is 3/(2 zeta)
    const auto g = QuadratureGrid::radial_angular();
    const auto rho = DensityModel::exponential(1, 1.0);
    const double exact = g.integrate_radial([&](double r) { return r * rho.radial_value(r); });
    REQUIRE_THAT(exact, WithinAbs(1.5, 1e-9));
    Engine rng = make_stream(11, StreamTag::conditioning);
    double sum = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) sum += norm(sample_conditioning_point(rho, rng));
    CHECK_THAT(sum / n, WithinAbs(exact, 0.01));
  }
  SECTION("uniform tabulated density passes a KS test") {
    const auto tab = DensityModel::tabulated_1d(2, -5.0, 0.5, std::vector<double>(21, 1.0));
    Engine rng = make_stream(5, StreamTag::conditioning);
    const int n = 100000;
    std::vector<double> xs(n);
    for (auto& x : xs) x = sample_conditioning_point(tab, rng).x;
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    for (int i = 0; i < n; ++i) {
      const double cdf = (xs[i] + 5.0) / 10.0;
      d = std::max({d, std::abs(cdf - static_cast<double>(i) / n), std::abs(cdf - static_cast<double>(i + 1) / n)});
    }
    CHECK(d < 1.628 / std::sqrt(static_cast<double>(n)));
  }
  SECTION("mixture draws weight the components") {
    const auto m = DensityModel::exponential_mixture(2, {1.0, 3.0}, {1.0, 3.0});
    Engine rng = make_stream(9, StreamTag::conditioning);
    double sum = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) sum += norm(sample_conditioning_point(m, rng));
    CHECK_THAT(sum / n, WithinAbs(0.25 * 1.5 + 0.75 * 0.5, 0.005));
  }
  SECTION("1D exponential |x| mean") {
    const auto m = DensityModel::exponential(2, 2.0, Dimensionality::one_d_softened);
    Engine rng = make_stream(3, StreamTag::conditioning);
    double sum = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) sum += std::abs(sample_conditioning_point(m, rng).x);
    CHECK_THAT(sum / n, WithinAbs(0.25, 0.002));
  }
}

TEST_CASE("streams are reproducible and distinct", "[domain]") {
  Engine a = make_stream(42, StreamTag::chain, 3, 1);
  Engine b = make_stream(42, StreamTag::chain, 3, 1);
  Engine c = make_stream(42, StreamTag::chain, 3, 0);
  Engine d = make_stream(42, StreamTag::conditioning, 3, 1);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
  const auto rho = DensityModel::exponential(2, 1.0);
  Engine r1 = make_stream(7, StreamTag::conditioning), r2 = make_stream(7, StreamTag::conditioning);
  for (int i = 0; i < 100; ++i) CHECK(sample_conditioning_point(rho, r1) == sample_conditioning_point(rho, r2));
  CHECK(derive_seed(1, StreamTag::reevaluation) != derive_seed(1, StreamTag::reevaluation, 1));
}
