#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "llcs/ansatz.hpp"
#include "llcs/density.hpp"
#include "llcs/quadrature.hpp"
#include "llcs/sampler.hpp"

namespace llcs {

/// Coefficient of the pair term: (N-1)/2 follows from the pair-density
/// marginal of rho f; (N-1) is the literal alternative, kept switchable.
enum class CoulombPrefactor { half, full };

inline std::string to_string(CoulombPrefactor p) { return p == CoulombPrefactor::half ? "half" : "full"; }

inline CoulombPrefactor parse_prefactor(std::string_view s) {
  if (s == "half") return CoulombPrefactor::half;
  if (s == "full") return CoulombPrefactor::full;
  throw ValidationError("prefactor must be 'half' or 'full', got '" + std::string(s) + "'");
}

inline double prefactor_value(CoulombPrefactor p, int electrons) {
  const double pairs = electrons - 1;
  return p == CoulombPrefactor::half ? 0.5 * pairs : pairs;
}

enum class EstimatorPath { monte_carlo, quadrature };

inline std::string to_string(EstimatorPath p) { return p == EstimatorPath::monte_carlo ? "mc" : "quadrature"; }

inline EstimatorPath parse_path(std::string_view s) {
  if (s == "mc" || s == "monte-carlo") return EstimatorPath::monte_carlo;
  if (s == "quadrature") return EstimatorPath::quadrature;
  throw ValidationError("estimator path must be 'mc' or 'quadrature', got '" + std::string(s) + "'");
}

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  bool operator==(const Estimate&) const = default;
};

struct EstimationSettings {
  SamplerSettings sampler;
  std::size_t points = 32768;  ///< conditioning points drawn from rho/N
  unsigned workers = 0;        ///< 0: hardware concurrency; never changes results
  CoulombPrefactor prefactor = CoulombPrefactor::half;
  EstimatorPath path = EstimatorPath::monte_carlo;

  bool operator==(const EstimationSettings&) const = default;
};

/// Fisher and Coulomb estimates sharing one set of chains.
struct CorrelationEstimate {
  Estimate fisher;
  Estimate coulomb;           ///< with the prefactor of the settings
  Estimate coulomb_unscaled;  ///< int rho(r) E_f[kernel(r, r')] dr
  Estimate gamma;             ///< fisher + coulomb
  double covariance = 0.0;    ///< Cov(fisher, coulomb) of the estimates
  std::size_t points = 0;
  double mean_acceptance = 0.0;
  double satellite_mean_radius = 0.0;  ///< E|r_n| under rho f / N
};

struct EnergyBreakdown {
  double weizsacker = 0.0;
  Estimate fisher;
  Estimate coulomb;
  double external = 0.0;
  Estimate total;
  double covariance = 0.0;
  CoulombPrefactor prefactor = CoulombPrefactor::half;
  EstimatorPath path = EstimatorPath::monte_carlo;
  std::uint64_t seed = 0;
  std::size_t points = 0;

  Estimate gamma() const {
    return {fisher.value + coulomb.value,
            std::sqrt(std::max(0.0, fisher.std_error * fisher.std_error + coulomb.std_error * coulomb.std_error +
                                        2.0 * covariance))};
  }
};

/// (1/8) int |grad rho|^2 / rho by deterministic quadrature.
inline double weizsacker_term(const DensityModel& rho, const QuadratureGrid& grid) {
  require_same_dimensionality(rho.dimensionality(), grid.dimensionality(), "density vs grid");
  if (rho.is_exponential() && rho.dimensionality() == Dimensionality::three_d) {
    return grid.integrate_radial([&](double r) {
      const double p = rho.radial_value(r);
      if (!(p > 0.0)) return 0.0;
      const double d = rho.radial_derivative(r);
      return 0.125 * d * d / p;
    });
  }
  return grid.integrate([&](const Vec3& r) {
    const double p = rho.value(r);
    if (!(p > 0.0)) return 0.0;
    const auto g = rho.gradient(r);
    return g ? 0.125 * norm2(*g) / p : 0.0;
  });
}

/// H[rho] = int int rho(r) rho(r') kernel(r, r') by quadrature. Spherical 3D
/// densities use the radial Hartree potential; 1D densities a double sum.
inline double hartree_integral(const DensityModel& rho, const SpaceSpec& space, const QuadratureGrid& grid) {
  require_same_dimensionality(rho.dimensionality(), grid.dimensionality(), "density vs grid");
  if (rho.dimensionality() == Dimensionality::three_d) {
    if (!rho.is_exponential()) throw ValidationError("3D Hartree quadrature needs a spherical density");
    const auto [x, w] = gauss_legendre(64);
    auto potential = [&](double r) {
      double inner = 0.0, outer = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) {
        const double s = 0.5 * r * (x[k] + 1.0);
        inner += 0.5 * r * w[k] * rho.radial_value(s) * s * s;
        const double u = 0.5 * (x[k] + 1.0);
        const double t = r + u / (1.0 - u);
        const double dt = 0.5 * w[k] / ((1.0 - u) * (1.0 - u));
        outer += dt * rho.radial_value(t) * t;
      }
      return 4.0 * std::numbers::pi * (inner / r + outer);
    };
    return grid.integrate_radial([&](double r) { return rho.radial_value(r) * potential(r); });
  }
  const auto& nodes = grid.nodes();
  std::vector<double> mass(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) mass[i] = nodes[i].weight * rho.value(nodes[i].position);
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (mass[i] == 0.0) continue;
    double row = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) row += mass[j] * space.kernel(nodes[i].position, nodes[j].position);
    acc += mass[i] * row;
  }
  return acc;
}

/// Estimate of |E[s]|^2 from per-walker sums of a vector observable.
///
/// With two or more independent walkers the average of cross products of
/// walker means is unbiased whatever the autocorrelation within a walker. A
/// single walker falls back to (K |mean|^2 - mean|s|^2)/(K-1), the i.i.d.
/// correction; `sum_sq` is the sum of |s|^2 over that walker.
inline double squared_mean_estimate(const std::vector<Vec3>& sums, const std::vector<std::size_t>& counts,
                                    double sum_sq) {
  std::vector<Vec3> means;
  for (std::size_t w = 0; w < sums.size(); ++w)
    if (counts[w] > 0) means.push_back(sums[w] * (1.0 / static_cast<double>(counts[w])));
  if (means.size() >= 2) {
    Vec3 total{};
    double diag = 0.0;
    for (const auto& m : means) {
      total += m;
      diag += norm2(m);
    }
    const double w = static_cast<double>(means.size());
    return (norm2(total) - diag) / (w * (w - 1.0));
  }
  if (means.empty()) return 0.0;
  std::size_t k = 0;
  for (auto c : counts) k += c;
  if (k < 2) return norm2(means.front());
  const double kk = static_cast<double>(k);
  return (kk * norm2(means.front()) - sum_sq / kk) / (kk - 1.0);
}

/// Two-level Monte Carlo for the Fisher and Coulomb terms.
///
/// Conditioning points r_i ~ rho/N; at each a chain samples f(. | r_i). The
/// Fisher integrand int |grad_r f|^2/f equals the conditional variance of the
/// score s = grad_r log f~ (the normalization only shifts s by its mean), so
///   fisher  = (N/8) E_r[ tr Var_f[s | r] ]
///   coulomb = prefactor * N * E_r[ E_f[kernel(r, r_n) | r] ]
/// with the kernel averaged over satellites. Error bars come from the spread
/// of per-point estimates, which carries both outer and inner variance.
inline CorrelationEstimate estimate_correlation(const ConditionalAnsatz& ansatz, const EstimationSettings& settings) {
  settings.sampler.validate();
  if (settings.points < 2) throw ValidationError("need at least two conditioning points");
  const int n_el = ansatz.electrons();
  CorrelationEstimate out;
  out.points = settings.points;
  if (settings.path == EstimatorPath::quadrature) {
    if (ansatz.family() != AnsatzFamily::frozen_orbital_product)
      throw ValidationError("the quadrature path is only available for the frozen family");
    const auto grid = QuadratureGrid::for_density(ansatz.density());
    const double h = n_el > 1 ? hartree_integral(ansatz.density(), ansatz.space(), grid) / n_el : 0.0;
    out.coulomb_unscaled = {h, 0.0};
    out.coulomb = {prefactor_value(settings.prefactor, n_el) * h, 0.0};
    out.gamma = out.coulomb;
    return out;
  }

  const std::size_t m = settings.points;
  std::vector<double> fisher_i(m, 0.0), coulomb_i(m, 0.0), accept_i(m, 0.0), radius_i(m, 0.0);
  const bool needs_score = ansatz.depends_on_conditioning() && ansatz.family() != AnsatzFamily::frozen_orbital_product;
  const bool has_pairs = ansatz.satellite_count() > 0;
  parallel_for(m, settings.workers, [&](std::size_t i) {
    Engine outer = make_stream(settings.sampler.seed, StreamTag::conditioning, i);
    const Vec3 r = sample_conditioning_point(ansatz.density(), outer);
    std::vector<Vec3> walker_sum(settings.sampler.walkers);
    std::vector<std::size_t> walker_count(settings.sampler.walkers, 0);
    double s2_sum = 0.0, c_sum = 0.0, rad_sum = 0.0;
    std::size_t k = 0;
    const auto diag = sample_chain(ansatz, r, settings.sampler, i, [&](const Configuration& cfg, std::size_t w) {
      if (needs_score) {
        const Vec3 s = score(ansatz, cfg);
        walker_sum[w] += s;
        ++walker_count[w];
        s2_sum += norm2(s);
      }
      if (has_pairs) {
        double c = 0.0, rad = 0.0;
        for (const auto& sat : cfg.satellites) {
          c += ansatz.space().kernel(r, sat);
          rad += ansatz.space().dimensionality() == Dimensionality::three_d ? norm(sat) : std::abs(sat.x);
        }
        c_sum += c / static_cast<double>(cfg.satellites.size());
        rad_sum += rad / static_cast<double>(cfg.satellites.size());
      }
      ++k;
    });
    const double kk = static_cast<double>(k);
    if (needs_score && k > 1) fisher_i[i] = s2_sum / kk - squared_mean_estimate(walker_sum, walker_count, s2_sum);
    coulomb_i[i] = has_pairs ? c_sum / kk : 0.0;
    radius_i[i] = has_pairs ? rad_sum / kk : 0.0;
    accept_i[i] = diag.acceptance_rate;
    if (!std::isfinite(fisher_i[i]) || !std::isfinite(coulomb_i[i]))
      throw NumericalError("non-finite estimate at conditioning point " + std::to_string(i));
  });

  // ordered reduction
  const double md = static_cast<double>(m);
  const double fscale = n_el / 8.0;
  const double cscale = static_cast<double>(n_el);
  double fm = 0.0, cm = 0.0, am = 0.0, rm = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    fm += fisher_i[i];
    cm += coulomb_i[i];
    am += accept_i[i];
    rm += radius_i[i];
  }
  fm /= md;
  cm /= md;
  double vf = 0.0, vc = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    vf += (fisher_i[i] - fm) * (fisher_i[i] - fm);
    vc += (coulomb_i[i] - cm) * (coulomb_i[i] - cm);
    cov += (fisher_i[i] - fm) * (coulomb_i[i] - cm);
  }
  vf /= (md - 1.0) * md;
  vc /= (md - 1.0) * md;
  cov /= (md - 1.0) * md;
  const double pref = prefactor_value(settings.prefactor, n_el);
  out.fisher = {fscale * fm, fscale * std::sqrt(vf)};
  out.coulomb_unscaled = {cscale * cm, cscale * std::sqrt(vc)};
  out.coulomb = {pref * out.coulomb_unscaled.value, pref * out.coulomb_unscaled.std_error};
  out.covariance = fscale * pref * cscale * cov;
  out.gamma = {out.fisher.value + out.coulomb.value,
               std::sqrt(std::max(0.0, out.fisher.std_error * out.fisher.std_error +
                                           out.coulomb.std_error * out.coulomb.std_error + 2.0 * out.covariance))};
  out.mean_acceptance = am / md;
  out.satellite_mean_radius = rm / md;
  return out;
}

inline Estimate fisher_term(const ConditionalAnsatz& ansatz, const EstimationSettings& settings) {
  return estimate_correlation(ansatz, settings).fisher;
}

/// N = 1 has no pairs and returns zero.
inline Estimate coulomb_term(const ConditionalAnsatz& ansatz, const EstimationSettings& settings,
                             CoulombPrefactor prefactor) {
  if (ansatz.electrons() == 1) return {};
  EstimationSettings s = settings;
  s.prefactor = prefactor;
  return estimate_correlation(ansatz, s).coulomb;
}

inline Estimate gamma_correlation(const ConditionalAnsatz& ansatz, const EstimationSettings& settings) {
  return estimate_correlation(ansatz, settings).gamma;
}

/// Weizsacker + Fisher + Coulomb + external. The total is the plain sum of the
/// four parts, in that order.
inline EnergyBreakdown assemble_energy(double weizsacker, const CorrelationEstimate& corr, double external,
                                       const EstimationSettings& settings) {
  EnergyBreakdown b;
  b.weizsacker = weizsacker;
  b.fisher = corr.fisher;
  b.coulomb = corr.coulomb;
  b.external = external;
  b.covariance = corr.covariance;
  b.total.value = b.weizsacker + b.fisher.value + b.coulomb.value + b.external;
  b.total.std_error = corr.gamma.std_error;
  b.prefactor = settings.prefactor;
  b.path = settings.path;
  b.seed = settings.sampler.seed;
  b.points = settings.path == EstimatorPath::monte_carlo ? settings.points : 0;
  return b;
}

inline EnergyBreakdown total_energy(const ConditionalAnsatz& ansatz, const ExternalPotential& v,
                                    const EstimationSettings& settings) {
  const auto grid = QuadratureGrid::for_density(ansatz.density());
  const double w = weizsacker_term(ansatz.density(), grid);
  const double e = external_energy(ansatz.density(), v, grid);
  return assemble_energy(w, estimate_correlation(ansatz, settings), e, settings);
}

}  // namespace llcs
