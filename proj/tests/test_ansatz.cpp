#include <cmath>
#include <limits>
#include <vector>

#include "catch_amalgamated.hpp"
#include "llcs/llcs.hpp"

using namespace llcs;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const SpaceSpec he_space(Dimensionality::three_d, 2, 10.0);
const DensityModel he_rho = DensityModel::exponential(2, 27.0 / 16.0);
constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// Fourth-order central difference of log f~ in the conditioning point.
Vec3 score_fd(const ConditionalAnsatz& a, Configuration cfg, double h) {
  auto at = [&](const Vec3& d) {
    Configuration c = cfg;
    c.conditioning += d;
    return log_f_unnormalized(a, c);
  };
  auto axis = [&](Vec3 e) {
    return (8.0 * (at(e * h) - at(e * -h)) - (at(e * (2 * h)) - at(e * (-2 * h)))) / (12.0 * h);
  };
  Vec3 g{axis({1, 0, 0}), 0, 0};
  if (a.space().dimensionality() == Dimensionality::three_d) {
    g.y = axis({0, 1, 0});
    g.z = axis({0, 0, 1});
  }
  return g;
}

}  // namespace

TEST_CASE("family names round-trip", "[ansatz]") {
  for (auto f : {AnsatzFamily::simple_factorized, AnsatzFamily::pairwise_biparametric,
                 AnsatzFamily::frozen_orbital_product, AnsatzFamily::gaussian_toy})
    CHECK(parse_ansatz_family(to_string(f)) == f);
  CHECK_THROWS_AS(parse_ansatz_family("slater"), ValidationError);
}

TEST_CASE("gamma = 0 needs test mode", "[ansatz]") {
  CHECK_THROWS_AS(ConditionalAnsatz::pairwise(he_rho, he_space, {0.0, 1.0}), ValidationError);
  CHECK_NOTHROW(ConditionalAnsatz::pairwise(he_rho, he_space, {0.0, 1.0}, true));
  CHECK_THROWS_AS(ConditionalAnsatz::pairwise(he_rho, he_space, {-1.0, 1.0}, true), ValidationError);
  CHECK_THROWS_AS(ConditionalAnsatz::gaussian_toy(he_rho, he_space), ValidationError);
  CHECK_THROWS_AS(ConditionalAnsatz::frozen(DensityModel::exponential(3, 1.0), he_space), ValidationError);
}

TEST_CASE("pair energy gradient matches finite differences", "[ansatz]") {
  const Vec3 a{0.3, -0.2, 0.4}, b{-0.5, 0.1, 0.2};
  const double h = 1e-6;
  const Vec3 g = pair_energy_gradient(he_rho, he_space, a, b);
  CHECK_THAT(g.x, WithinRel((pair_energy(he_rho, he_space, a + Vec3{h, 0, 0}, b) -
                             pair_energy(he_rho, he_space, a - Vec3{h, 0, 0}, b)) / (2 * h), 1e-6));
  CHECK(pair_energy(he_rho, he_space, a, b) == pair_energy(he_rho, he_space, b, a));
}

TEST_CASE("log f vanishes where the conditions require", "[ansatz]") {
  const Vec3 r{0.2, 0.1, -0.3};
  const auto pair = ConditionalAnsatz::pairwise(he_rho, he_space, {0.7, 1.2});
  const auto simple = ConditionalAnsatz::simple(he_rho, he_space);
  const auto frozen = ConditionalAnsatz::frozen(he_rho, he_space);
  CHECK(log_f_unnormalized(pair, {r, {r}}) == neg_inf);
  CHECK(log_f_unnormalized(simple, {r, {r}}) == neg_inf);
  CHECK(std::isfinite(log_f_unnormalized(frozen, {r, {r}})));
  // outside omega
  CHECK(log_f_unnormalized(pair, {r, {{9.0, 0, 0}}}) == neg_inf);
  CHECK(std::isfinite(log_f_unnormalized(frozen, {r, {{9.0, 0, 0}}})));

  const SpaceSpec s3(Dimensionality::three_d, 3, 10.0);
  const auto rho3 = DensityModel::exponential(3, 2.0);
  const Vec3 m{0.4, 0.0, 0.2};
  const auto pair3 = ConditionalAnsatz::pairwise(rho3, s3, {1.0, 1.0});
  const auto simple3 = ConditionalAnsatz::simple(rho3, s3);
  CHECK(log_f_unnormalized(pair3, {r, {m, m}}) == neg_inf);
  CHECK(std::isfinite(log_f_unnormalized(simple3, {r, {m, m}})));
  // beta = 0 switches the satellite coupling off
  CHECK(std::isfinite(log_f_unnormalized(pair3.with_params({1.0, 0.0}), {r, {m, m}})));
}

TEST_CASE("log f is symmetric in the satellites", "[ansatz]") {
  const SpaceSpec s(Dimensionality::three_d, 4, 10.0);
  const auto a = ConditionalAnsatz::pairwise(DensityModel::exponential(4, 1.2), s, {0.8, 0.6});
  const Vec3 r{0.1, 0.2, 0.3};
  const Vec3 p{0.5, -0.1, 0.0}, q{-0.3, 0.4, 0.2}, t{0.0, -0.6, 0.7};
  const double base = log_f_unnormalized(a, {r, {p, q, t}});
  CHECK_THAT(log_f_unnormalized(a, {r, {t, p, q}}), WithinRel(base, 1e-14));
  CHECK_THAT(log_f_unnormalized(a, {r, {q, t, p}}), WithinRel(base, 1e-14));
}

TEST_CASE("score matches finite differences at 50 configurations", "[ansatz]") {
  const SpaceSpec s3(Dimensionality::three_d, 3, 10.0);
  const SpaceSpec s1(Dimensionality::one_d_softened, 2, 10.0, 1.0);
  const std::vector<ConditionalAnsatz> families{
      ConditionalAnsatz::pairwise(he_rho, he_space, {0.9, 0.4}),
      ConditionalAnsatz::pairwise(DensityModel::exponential(3, 2.0), s3, {1.3, 0.8}),
      ConditionalAnsatz::simple(he_rho, he_space),
      ConditionalAnsatz::gaussian_toy(DensityModel::exponential(2, 1.0, Dimensionality::one_d_softened), s1),
      ConditionalAnsatz::pairwise(DensityModel::exponential(2, 1.0, Dimensionality::one_d_softened), s1, {0.5, 0.0}),
  };
  for (const auto& a : families) {
    Engine rng = make_stream(17, StreamTag::probe, static_cast<std::uint64_t>(a.family()));
    int checked = 0;
    while (checked < 50) {
      const Vec3 r = sample_conditioning_point(a.density(), rng);
      Configuration cfg = detail::random_satellites(a, r, rng);
      double nearest = std::abs(r.x) + std::abs(r.y) + std::abs(r.z);
      for (const auto& sat : cfg.satellites) nearest = std::min(nearest, norm(sat - r));
      if (nearest < 1e-2) continue;  // keep the stencil off the cusps
      const Vec3 s = score(a, cfg);
      const Vec3 f = score_fd(a, cfg, 1e-3 * nearest);
      const double scale = std::max(norm(s), 1e-8);
      INFO(to_string(a.family()) << " r=(" << r.x << "," << r.y << "," << r.z << ")");
      CHECK(norm(s - f) <= 1e-5 * scale);
      ++checked;
    }
  }
}

TEST_CASE("frozen score is identically zero", "[ansatz]") {
  const auto a = ConditionalAnsatz::frozen(he_rho, he_space);
  CHECK(score(a, {{0.3, 0.1, 0.2}, {{0.5, 0.5, 0.5}}}) == Vec3{});
}

TEST_CASE("simple-family normalization: quadrature and Monte Carlo agree", "[ansatz]") {
  const auto a = ConditionalAnsatz::simple(he_rho, he_space);
  for (const Vec3 r : {Vec3{0, 0, 1}, Vec3{0.2, -0.1, 0.05}, Vec3{0, 0, 6}}) {
    const double quad = normalization_simple(a, r);
    const auto mc = log_partition_mc(a, r, {400000, 3, 0});
    INFO("quadrature " << quad << " mc " << -mc.value << " +- " << mc.std_error);
    CHECK(std::abs(quad + mc.value) <= 3.0 * mc.std_error + 1e-9);
  }
}

TEST_CASE("condition check classifies the families", "[ansatz]") {
  SECTION("pairwise passes all three") {
    const auto rep = check_conditions(ConditionalAnsatz::pairwise(he_rho, he_space, {1.0, 1.0}), 100000, 7);
    CHECK(rep.condition_i);
    CHECK(rep.condition_ii);
    CHECK(rep.condition_iii);
    CHECK(rep.condition_iii_on_extension);
    CHECK(rep.fermionic_compatible);
    CHECK(rep.normalization.size() == 10);
  }
  SECTION("simple is flagged for (iii)") {
    const auto rep = check_conditions(ConditionalAnsatz::simple(he_rho, he_space), 100000, 7);
    CHECK(rep.condition_i);
    CHECK(rep.condition_ii);
    CHECK_FALSE(rep.condition_iii);
    CHECK_FALSE(rep.fermionic_compatible);
  }
  SECTION("frozen is normalized exactly but not fermionic") {
    const auto rep = check_conditions(ConditionalAnsatz::frozen(he_rho, he_space), 1000, 7);
    CHECK(rep.normalization_exact);
    CHECK(rep.condition_i);
    CHECK_FALSE(rep.condition_ii);
  }
  SECTION("gamma = 0 in test mode breaks (ii)") {
    const auto rep = check_conditions(ConditionalAnsatz::pairwise(he_rho, he_space, {0.0, 1.0}, true), 20000, 7);
    CHECK_FALSE(rep.condition_ii);
  }
}
