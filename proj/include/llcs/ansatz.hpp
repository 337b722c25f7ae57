#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "llcs/density.hpp"
#include "llcs/quadrature.hpp"
#include "llcs/rng.hpp"
#include "llcs/space.hpp"
#include "llcs/vec.hpp"

namespace llcs {

enum class AnsatzFamily { simple_factorized, pairwise_biparametric, frozen_orbital_product, gaussian_toy };

inline std::string to_string(AnsatzFamily f) {
  switch (f) {
    case AnsatzFamily::simple_factorized: return "simple";
    case AnsatzFamily::pairwise_biparametric: return "pairwise";
    case AnsatzFamily::frozen_orbital_product: return "frozen";
    case AnsatzFamily::gaussian_toy: return "gaussian-toy";
  }
  return "?";
}

inline AnsatzFamily parse_ansatz_family(std::string_view s) {
  if (s == "simple" || s == "simple-factorized") return AnsatzFamily::simple_factorized;
  if (s == "pairwise" || s == "pairwise-biparametric") return AnsatzFamily::pairwise_biparametric;
  if (s == "frozen" || s == "frozen-orbital") return AnsatzFamily::frozen_orbital_product;
  if (s == "gaussian-toy") return AnsatzFamily::gaussian_toy;
  throw ValidationError("unknown ansatz family '" + std::string(s) + "'");
}

/// Multipliers on the pair energy: gamma couples satellites to the
/// conditioning electron, beta couples satellites to each other.
struct AnsatzParams {
  double gamma = 1.0;
  double beta = 1.0;
  bool operator==(const AnsatzParams&) const = default;
};

/// One conditioning point r and the N-1 satellite positions r2..rN.
struct Configuration {
  Vec3 conditioning;
  std::vector<Vec3> satellites;
};

/// A family for the conditional density f(r2..rN | r).
///
///  - simple:   f = exp((N-1) E(r)) prod_n exp(-E_H(r, r_n)) on omega^(N-1)
///  - pairwise: f = exp(EE(r)) prod_n exp(-gamma E_H(r, r_n))
///                  prod_{i>j} exp(-beta E_H(r_i, r_j)) on omega^(N-1)
///  - frozen:   f = prod_n rho(r_n)/N (independent of r; debug family)
///  - gaussian-toy (1D): f = prod_n exp(-(x_n - x)^2/2)/sqrt(2 pi)
///
/// E_H(a, b) = rho(a) rho(b) kernel(a, b) is the pair energy.
class ConditionalAnsatz {
 public:
  static ConditionalAnsatz simple(DensityModel rho, SpaceSpec space) {
    return {AnsatzFamily::simple_factorized, std::move(rho), space, {1.0, 0.0}};
  }

  static ConditionalAnsatz pairwise(DensityModel rho, SpaceSpec space, AnsatzParams p,
                                    bool test_mode = false) {
    if (!(p.gamma >= 0.0) || !(p.beta >= 0.0)) throw ValidationError("gamma and beta must be >= 0");
    if (p.gamma == 0.0 && !test_mode)
      throw ValidationError("gamma = 0 breaks the coincidence condition; only allowed in test mode");
    return {AnsatzFamily::pairwise_biparametric, std::move(rho), space, p};
  }

  static ConditionalAnsatz frozen(DensityModel rho, SpaceSpec space) {
    return {AnsatzFamily::frozen_orbital_product, std::move(rho), space, {0.0, 0.0}};
  }

  static ConditionalAnsatz gaussian_toy(DensityModel rho, SpaceSpec space) {
    if (space.dimensionality() != Dimensionality::one_d_softened)
      throw ValidationError("the gaussian toy family is one-dimensional");
    return {AnsatzFamily::gaussian_toy, std::move(rho), space, {0.0, 0.0}};
  }

  static ConditionalAnsatz make(AnsatzFamily family, DensityModel rho, SpaceSpec space, AnsatzParams p = {},
                                bool test_mode = false) {
    switch (family) {
      case AnsatzFamily::simple_factorized: return simple(std::move(rho), space);
      case AnsatzFamily::pairwise_biparametric: return pairwise(std::move(rho), space, p, test_mode);
      case AnsatzFamily::frozen_orbital_product: return frozen(std::move(rho), space);
      case AnsatzFamily::gaussian_toy: return gaussian_toy(std::move(rho), space);
    }
    throw ValidationError("unknown ansatz family");
  }

  AnsatzFamily family() const { return family_; }
  const AnsatzParams& params() const { return params_; }
  const DensityModel& density() const { return rho_; }
  const SpaceSpec& space() const { return space_; }
  int electrons() const { return space_.electrons(); }
  std::size_t satellite_count() const { return static_cast<std::size_t>(space_.electrons() - 1); }

  /// Satellites confined to the one-particle region omega.
  bool bounded_support() const {
    return family_ == AnsatzFamily::simple_factorized || family_ == AnsatzFamily::pairwise_biparametric;
  }

  bool depends_on_conditioning() const { return family_ != AnsatzFamily::frozen_orbital_product; }

  ConditionalAnsatz with_params(AnsatzParams p, bool test_mode = false) const {
    return make(family_, rho_, space_, p, test_mode);
  }

  ConditionalAnsatz with_density(DensityModel rho) const {
    ConditionalAnsatz a = *this;
    if (rho.electrons() != space_.electrons() || rho.dimensionality() != space_.dimensionality())
      throw ValidationError("density does not match the ansatz space");
    a.rho_ = std::move(rho);
    return a;
  }

  /// Same family and parameters for a different electron count.
  ConditionalAnsatz with_electrons(int electrons) const {
    ConditionalAnsatz a = *this;
    a.space_ = SpaceSpec(space_.dimensionality(), electrons, space_.domain_radius(), space_.softening());
    a.rho_ = rho_.with_electrons(electrons);
    return a;
  }

 private:
  ConditionalAnsatz(AnsatzFamily f, DensityModel rho, SpaceSpec space, AnsatzParams p)
      : family_(f), rho_(std::move(rho)), space_(space), params_(p) {
    if (rho_.electrons() != space_.electrons())
      throw ValidationError("density electron count does not match the space");
    if (rho_.dimensionality() != space_.dimensionality())
      throw ValidationError("dimensionality mismatch: density vs space");
  }

  AnsatzFamily family_;
  DensityModel rho_;
  SpaceSpec space_;
  AnsatzParams params_;
};

/// E_H(a, b) = rho(a) rho(b) kernel(a, b). Zero when either density vanishes;
/// +inf at a 3D coincidence with positive density.
inline double pair_energy(const DensityModel& rho, const SpaceSpec& space, const Vec3& a, const Vec3& b) {
  const double pa = rho.value(a);
  const double pb = rho.value(b);
  if (pa == 0.0 || pb == 0.0) return 0.0;
  return pa * pb * space.kernel(a, b);
}

/// Gradient of E_H(a, b) with respect to a.
inline Vec3 pair_energy_gradient(const DensityModel& rho, const SpaceSpec& space, const Vec3& a, const Vec3& b) {
  const double pb = rho.value(b);
  if (pb == 0.0) return {};
  const Vec3 ga = rho.gradient(a).value_or(Vec3{});
  return (ga * space.kernel(a, b) + space.kernel_gradient(a, b) * rho.value(a)) * pb;
}

namespace detail {
// -c * e with c >= 0 and e in [0, inf]; c == 0 switches the term off.
inline double scaled_penalty(double c, double e) {
  if (c == 0.0) return 0.0;
  return -c * e;
}
}  // namespace detail

/// log of the unnormalized conditional density; -inf where f vanishes.
inline double log_f_unnormalized(const ConditionalAnsatz& ansatz, const Configuration& cfg) {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  const auto& rho = ansatz.density();
  const auto& space = ansatz.space();
  const Vec3& r = cfg.conditioning;
  if (ansatz.bounded_support())
    for (const auto& s : cfg.satellites)
      if (!space.inside_satellite_region(s)) return neg_inf;

  switch (ansatz.family()) {
    case AnsatzFamily::frozen_orbital_product: {
      double acc = 0.0;
      const double n = ansatz.electrons();
      for (const auto& s : cfg.satellites) {
        const double p = rho.value(s);
        if (p <= 0.0) return neg_inf;
        acc += std::log(p / n);
      }
      return acc;
    }
    case AnsatzFamily::gaussian_toy: {
      double acc = 0.0;
      for (const auto& s : cfg.satellites) acc -= 0.5 * (s.x - r.x) * (s.x - r.x);
      return acc;
    }
    case AnsatzFamily::simple_factorized:
    case AnsatzFamily::pairwise_biparametric: {
      const double gamma = ansatz.params().gamma;
      const double beta = ansatz.family() == AnsatzFamily::pairwise_biparametric ? ansatz.params().beta : 0.0;
      double acc = 0.0;
      if (gamma != 0.0)
        for (const auto& s : cfg.satellites) acc += detail::scaled_penalty(gamma, pair_energy(rho, space, r, s));
      if (beta != 0.0)
        for (std::size_t i = 0; i < cfg.satellites.size(); ++i)
          for (std::size_t j = 0; j < i; ++j)
            acc += detail::scaled_penalty(beta, pair_energy(rho, space, cfg.satellites[i], cfg.satellites[j]));
      return std::isnan(acc) ? neg_inf : acc;
    }
  }
  return neg_inf;
}

/// Gradient of log f~ with respect to the conditioning point r.
inline Vec3 score(const ConditionalAnsatz& ansatz, const Configuration& cfg) {
  switch (ansatz.family()) {
    case AnsatzFamily::frozen_orbital_product: return {};
    case AnsatzFamily::gaussian_toy: {
      double acc = 0.0;
      for (const auto& s : cfg.satellites) acc += s.x - cfg.conditioning.x;
      return {acc, 0.0, 0.0};
    }
    case AnsatzFamily::simple_factorized:
    case AnsatzFamily::pairwise_biparametric: {
      const double gamma = ansatz.params().gamma;
      Vec3 acc{};
      if (gamma == 0.0) return acc;
      for (const auto& s : cfg.satellites)
        acc -= pair_energy_gradient(ansatz.density(), ansatz.space(), cfg.conditioning, s) * gamma;
      return acc;
    }
  }
  return {};
}

/// Uniform draw in the origin-centred satellite region of volume omega.
inline Vec3 uniform_in_region(const SpaceSpec& space, Engine& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double rs = space.satellite_radius();
  if (space.dimensionality() == Dimensionality::one_d_softened) return {rs * (2.0 * u(rng) - 1.0), 0.0, 0.0};
  std::normal_distribution<double> g;
  Vec3 d{g(rng), g(rng), g(rng)};
  d *= 1.0 / norm(d);
  return d * (rs * std::cbrt(u(rng)));
}

/// ln of the one-satellite partition integral  int_omega exp(-energy(r')) dr'
/// by ray quadrature about r.
template <class Energy>
double log_partition(const SpaceSpec& space, const Vec3& r, Energy&& energy, const QuadratureOrders& orders = {}) {
  // Rays from an outside point do not tile the region; integrate about the origin instead.
  const Vec3 center = space.inside_satellite_region(r) ? r : Vec3{};
  const auto grid = QuadratureGrid::rays_in_ball(space.dimensionality(), center, space.satellite_radius(), orders);
  // Split off the deficit so the near-unity bulk does not swamp it.
  double volume = 0.0;
  double deficit = 0.0;
  for (const auto& n : grid.nodes()) {
    volume += n.weight;
    deficit += n.weight * -std::expm1(-energy(n.position));
  }
  return std::log(space.one_particle_volume() * (1.0 - deficit / volume));
}

/// ln int_omega exp(-coupling E_H(r, r')) dr' for the density of the space.
inline double log_partition_single(const DensityModel& rho, const SpaceSpec& space, const Vec3& r, double coupling,
                                   const QuadratureOrders& orders = {}) {
  return log_partition(
      space, r, [&](const Vec3& s) { return coupling == 0.0 ? 0.0 : coupling * pair_energy(rho, space, r, s); },
      orders);
}

/// E(r) = -ln int_omega exp(-E_H(r, r')) dr' for the simple family.
inline double normalization_simple(const ConditionalAnsatz& ansatz, const Vec3& r, const QuadratureOrders& orders = {}) {
  if (ansatz.family() != AnsatzFamily::simple_factorized)
    throw ValidationError("normalization_simple requires the simple factorized family");
  return -log_partition_single(ansatz.density(), ansatz.space(), r, 1.0, orders);
}

struct UniformDraws {
  std::uint64_t samples = 100000;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
};

struct LogEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
};

/// Monte Carlo ln of int_{omega^(N-1)} f~ dr2..drN from uniform draws,
/// accumulated in log-sum-exp form. The standard error is that of the log of
/// the sample mean (delta method).
inline LogEstimate log_partition_mc(const ConditionalAnsatz& ansatz, const Vec3& r, const UniformDraws& mc) {
  if (!ansatz.bounded_support()) throw ValidationError("uniform-draw normalization needs a bounded family");
  if (mc.samples < 2) throw ValidationError("normalization needs at least two samples");
  Engine rng = make_stream(mc.seed, StreamTag::normalization, mc.stream);
  Configuration cfg{r, std::vector<Vec3>(ansatz.satellite_count())};
  double shift = -std::numeric_limits<double>::infinity();
  double s1 = 0.0, s2 = 0.0;
  for (std::uint64_t k = 0; k < mc.samples; ++k) {
    for (auto& s : cfg.satellites) s = uniform_in_region(ansatz.space(), rng);
    const double l = log_f_unnormalized(ansatz, cfg);
    if (l == -std::numeric_limits<double>::infinity()) continue;
    if (l > shift) {
      const double scale = std::exp(shift - l);
      s1 *= scale;
      s2 *= scale * scale;
      shift = l;
    }
    const double w = std::exp(l - shift);
    s1 += w;
    s2 += w * w;
  }
  if (!(s1 > 0.0)) throw NumericalError("normalization estimate degenerate: every sample had f = 0");
  const double n = static_cast<double>(mc.samples);
  const double mean = s1 / n;
  const double var = std::max(0.0, (s2 - s1 * s1 / n) / (n - 1.0));
  const double log_volume = static_cast<double>(ansatz.satellite_count()) * std::log(ansatz.space().one_particle_volume());
  return {std::log(mean) + shift + log_volume, std::sqrt(var / n) / mean, mc.samples};
}

/// EE(r) = -ln int f~ for the pairwise family, with its standard error.
inline LogEstimate log_normalization_pairwise(const ConditionalAnsatz& ansatz, const Vec3& r, const UniformDraws& mc) {
  if (ansatz.family() != AnsatzFamily::pairwise_biparametric)
    throw ValidationError("log_normalization_pairwise requires the pairwise family");
  auto z = log_partition_mc(ansatz, r, mc);
  z.value = -z.value;
  return z;
}

}  // namespace llcs
