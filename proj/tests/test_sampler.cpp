#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "catch_amalgamated.hpp"
#include "llcs/llcs.hpp"

using namespace llcs;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const SpaceSpec he_space(Dimensionality::three_d, 2, 10.0);
const DensityModel he_rho = DensityModel::exponential(2, 27.0 / 16.0);
const SpaceSpec toy_space(Dimensionality::one_d_softened, 2, 10.0, 1.0);
const DensityModel toy_rho = DensityModel::exponential(2, 1.0, Dimensionality::one_d_softened);

// Five states on a ring with nearest-neighbour symmetric proposals.
struct RingTarget {
  std::array<double, 5> weights{1.0, 2.0, 3.0, 1.5, 0.5};
  double log_density(int s) const { return std::log(weights[static_cast<std::size_t>(s)]); }
  int propose(int s, Engine& rng) const {
    std::bernoulli_distribution coin(0.5);
    return (s + (coin(rng) ? 1 : 4)) % 5;
  }
};

}  // namespace

TEST_CASE("acceptance probability", "[sampler]") {
  CHECK(acceptance_probability(-1.5, -1.5) == 1.0);
  CHECK(acceptance_probability(-1.5, -0.5) == 1.0);
  CHECK(acceptance_probability(0.0, -std::numeric_limits<double>::infinity()) == 0.0);
  CHECK_THAT(acceptance_probability(0.0, -1.0), WithinRel(std::exp(-1.0), 1e-15));
}

TEST_CASE("Metropolis on a 5-point target is stationary", "[sampler]") {
  const RingTarget target;
  const double total = std::accumulate(target.weights.begin(), target.weights.end(), 0.0);
  Engine rng = make_stream(1, StreamTag::chain);
  int state = 0;
  double lp = target.log_density(state);
  std::array<std::array<double, 5>, 5> counts{};
  std::array<double, 5> visits{};
  for (int i = 0; i < 1000; ++i) metropolis_update(target, state, lp, rng);
  const int steps = 1000000;
  for (int i = 0; i < steps; ++i) {
    const int from = state;
    metropolis_update(target, state, lp, rng);
    counts[from][state] += 1.0;
    visits[from] += 1.0;
  }
  std::array<double, 5> pi{};
  for (int i = 0; i < 5; ++i) pi[i] = target.weights[i] / total;
  for (int j = 0; j < 5; ++j) {
    double flow = 0.0;
    for (int i = 0; i < 5; ++i) flow += pi[i] * counts[i][j] / visits[i];
    CHECK_THAT(flow, WithinAbs(pi[j], 1e-2));
    CHECK_THAT(visits[j] / steps, WithinAbs(pi[j], 1e-2));
  }
}

TEST_CASE("chain state keeps its log f current", "[sampler]") {
  const auto a = ConditionalAnsatz::pairwise(he_rho, he_space, {1.0, 1.0});
  Engine rng = make_stream(2, StreamTag::chain);
  const Vec3 r{0.1, 0.2, 0.3};
  ChainState c{initial_configuration(a, r, rng), 0.0, 0, 0};
  c.log_f = log_f_unnormalized(a, c.cfg);
  for (int i = 0; i < 2000; ++i) {
    metropolis_step(c, a, 0.5, rng);
    REQUIRE(c.log_f == log_f_unnormalized(a, c.cfg));
    REQUIRE(c.accepted <= c.steps);
  }
}

TEST_CASE("toy normal target has unit variance", "[sampler]") {
  const auto a = ConditionalAnsatz::gaussian_toy(toy_rho, toy_space);
  SamplerSettings s;
  s.samples = 100000;
  s.walkers = 1;
  s.burn_in = 2000;
  s.thinning = 5;
  const Vec3 r{0.7, 0, 0};
  std::vector<double> d;
  sample_chain(a, r, s, 0, [&](const Configuration& c, std::size_t) { d.push_back(c.satellites[0].x - r.x); });
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d.size() - 1);
  CHECK(d.size() == 100000);
  CHECK_THAT(var, WithinAbs(1.0, 0.02));
}

TEST_CASE("run_chain estimates", "[sampler]") {
  const auto a = ConditionalAnsatz::pairwise(he_rho, he_space, {1.0, 1.0});
  SamplerSettings s;
  s.samples = 4096;
  SECTION("constant observable") {
    const auto res = run_chain(a, {0.2, 0, 0}, s, [](const Configuration&) { return 1.0; });
    CHECK(res.mean == 1.0);
    CHECK(res.std_error == 0.0);
    CHECK(res.count == 4096);
  }
  SECTION("half-space indicator under a symmetric f") {
    // conditioning point at the origin: f is symmetric under z -> -z
    const auto res = run_chain(a, {0, 0, 0}, s, [](const Configuration& c) { return c.satellites[0].z > 0 ? 1.0 : 0.0; });
    CHECK(std::abs(res.mean - 0.5) <= 3.0 * res.std_error);
  }
  SECTION("non-finite observable aborts with the point") {
    CHECK_THROWS_WITH(run_chain(a, {0.25, 0, 0}, s, [](const Configuration&) { return std::nan(""); }),
                      Catch::Matchers::ContainsSubstring("0.25"));
  }
  SECTION("identical settings give identical results") {
    auto obs = [](const Configuration& c) { return norm(c.satellites[0]); };
    const auto x = run_chain(a, {0.3, 0.1, 0}, s, obs, 5);
    const auto y = run_chain(a, {0.3, 0.1, 0}, s, obs, 5);
    const auto z = run_chain(a, {0.3, 0.1, 0}, s, obs, 6);
    CHECK(x.mean == y.mean);
    CHECK(x.std_error == y.std_error);
    CHECK(x.mean != z.mean);
  }
}

TEST_CASE("doubling kept samples halves the squared error", "[sampler]") {
  // averaged over independent points so the check itself is not noisy
  const auto a = ConditionalAnsatz::gaussian_toy(toy_rho, toy_space);
  SamplerSettings s1;
  s1.samples = 8192;
  s1.walkers = 1;
  SamplerSettings s2 = s1;
  s2.samples = 16384;
  double v1 = 0.0, v2 = 0.0;
  const int reps = 40;
  for (int k = 0; k < reps; ++k) {
    auto obs = [](const Configuration& c) { return c.satellites[0].x; };
    const double e1 = run_chain(a, {0, 0, 0}, s1, obs, k).std_error;
    const double e2 = run_chain(a, {0, 0, 0}, s2, obs, 1000 + k).std_error;
    v1 += e1 * e1;
    v2 += e2 * e2;
  }
  CHECK_THAT(v1 / v2, WithinAbs(2.0, 0.4));
}

TEST_CASE("burn-in tuning lands in the target acceptance band", "[sampler]") {
  SamplerSettings s;
  s.samples = 512;
  s.burn_in = 512;
  for (const auto& a : {ConditionalAnsatz::pairwise(he_rho, he_space, {1.0, 1.0}),
                        ConditionalAnsatz::frozen(he_rho, he_space),
                        ConditionalAnsatz::gaussian_toy(toy_rho, toy_space)}) {
    double rate = 0.0;
    const int reps = 20;
    for (int k = 0; k < reps; ++k) {
      Engine rng = make_stream(4, StreamTag::conditioning, k);
      const Vec3 r = sample_conditioning_point(a.density(), rng);
      rate += sample_chain(a, r, s, k, [](const Configuration&, std::size_t) {}).acceptance_rate;
    }
    INFO(to_string(a.family()));
    CHECK(rate / reps >= 0.2);
    CHECK(rate / reps <= 0.5);
  }
}

TEST_CASE("frozen chains sample rho/N", "[sampler]") {
  const auto a = ConditionalAnsatz::frozen(he_rho, he_space);
  SamplerSettings s;
  s.samples = 200000;
  s.thinning = 4;
  const auto res = run_chain(a, {1, 0, 0}, s, [](const Configuration& c) { return norm(c.satellites[0]); });
  CHECK(std::abs(res.mean - 1.5 / he_rho.exponents()[0]) <= 3.0 * res.std_error);
}

TEST_CASE("summary statistics", "[sampler]") {
  std::vector<double> c(100, 2.0);
  const auto s = summarize(c);
  CHECK(s.mean == 2.0);
  CHECK(s.std_error == 0.0);
  CHECK(s.effective_samples == 100.0);
  Engine rng = make_stream(3, StreamTag::probe);
  std::normal_distribution<double> g;
  std::vector<double> iid(20000);
  for (auto& v : iid) v = g(rng);
  const auto t = summarize(iid);
  CHECK_THAT(t.effective_samples, WithinRel(20000.0, 0.2));
  CHECK_THAT(t.std_error, WithinRel(1.0 / std::sqrt(20000.0), 0.35));
  // a strongly correlated series has far fewer effective samples
  std::vector<double> ar(20000);
  double x = 0.0;
  for (auto& v : ar) v = x = 0.95 * x + g(rng);
  CHECK(effective_sample_size(ar) < 2000.0);
}

TEST_CASE("parallel_for covers every index and rethrows the first failure", "[sampler]") {
  std::vector<int> hit(1000, 0);
  parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
  CHECK(std::all_of(hit.begin(), hit.end(), [](int v) { return v == 1; }));
  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 17 || i == 60) throw NumericalError("at " + std::to_string(i));
    });
    FAIL("no exception");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()) == "at 17");
  }
}
