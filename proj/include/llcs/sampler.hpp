#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "llcs/ansatz.hpp"
#include "llcs/density.hpp"
#include "llcs/rng.hpp"

namespace llcs {

struct SamplerSettings {
  double step = 0.5;          ///< initial proposal width in units of the density length scale
  std::size_t burn_in = 64;   ///< steps discarded per walker; the step is tuned here
  std::size_t thinning = 2;   ///< keep every k-th configuration
  std::size_t samples = 32;   ///< kept samples per conditioning point
  std::size_t walkers = 2;    ///< independent walkers sharing the kept samples
  std::size_t batches = 32;   ///< batch-means batches
  bool tune = true;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(step > 0.0)) throw ValidationError("sampler step must be > 0");
    if (burn_in < 1 || thinning < 1 || samples < 1 || walkers < 1 || batches < 1)
      throw ValidationError("sampler counts must be >= 1");
  }
  bool operator==(const SamplerSettings&) const = default;
};

struct EstimatorResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
  double effective_samples = 0.0;
};

// ---------------------------------------------------------------------------
// Direct draws

/// r ~ rho/N. Exponential families: pick a component by weight, then the
/// radius from its Gamma(3, 1/(2 zeta)) law (3D) or Exp(2 zeta) law (1D).
/// Tabulated family: inverse CDF of the piecewise-linear density.
inline Vec3 sample_conditioning_point(const DensityModel& rho, Engine& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (rho.family() == DensityFamily::tabulated_1d) {
    const auto& v = rho.table();
    const double h = rho.table_spacing();
    const double target = u(rng) * rho.electrons();
    double acc = 0.0;
    std::size_t seg = 0;
    for (; seg + 2 < v.size(); ++seg) {
      const double m = 0.5 * h * (v[seg] + v[seg + 1]);
      if (acc + m >= target) break;
      acc += m;
    }
    // density a + b t on [0, h]; solve a t + b t^2/2 = rem
    const double a = v[seg];
    const double b = (v[seg + 1] - v[seg]) / h;
    const double rem = std::max(0.0, target - acc);
    double t;
    if (std::abs(b) < 1e-14 * std::max(1.0, a)) {
      t = a > 0.0 ? rem / a : 0.5 * h;
    } else {
      const double disc = std::max(0.0, a * a + 2.0 * b * rem);
      t = 2.0 * rem / (a + std::sqrt(disc));
    }
    return {rho.table_origin() + static_cast<double>(seg) * h + std::clamp(t, 0.0, h), 0.0, 0.0};
  }
  const auto& w = rho.weights();
  std::size_t k = 0;
  if (w.size() > 1) {
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    k = pick(rng);
  }
  const double zeta = rho.exponents()[k];
  if (rho.dimensionality() == Dimensionality::one_d_softened) {
    std::exponential_distribution<double> e(2.0 * zeta);
    const double s = e(rng);
    return {u(rng) < 0.5 ? -s : s, 0.0, 0.0};
  }
  std::gamma_distribution<double> g(3.0, 1.0 / (2.0 * zeta));
  const double radius = g(rng);
  std::normal_distribution<double> n;
  Vec3 d{n(rng), n(rng), n(rng)};
  return d * (radius / norm(d));
}

/// A starting configuration with f~ > 0.
inline Configuration initial_configuration(const ConditionalAnsatz& ansatz, const Vec3& r, Engine& rng) {
  Configuration cfg{r, std::vector<Vec3>(ansatz.satellite_count())};
  for (int attempt = 0; attempt < 10000; ++attempt) {
    for (auto& s : cfg.satellites) {
      switch (ansatz.family()) {
        case AnsatzFamily::frozen_orbital_product: s = sample_conditioning_point(ansatz.density(), rng); break;
        case AnsatzFamily::gaussian_toy: {
          std::normal_distribution<double> n(r.x, 1.0);
          s = {n(rng), 0.0, 0.0};
          break;
        }
        default: s = uniform_in_region(ansatz.space(), rng);
      }
    }
    if (log_f_unnormalized(ansatz, cfg) > -std::numeric_limits<double>::infinity()) return cfg;
  }
  throw NumericalError("could not find a starting configuration with f > 0");
}

// ---------------------------------------------------------------------------
// Metropolis

struct ChainState {
  Configuration cfg;
  double log_f = 0.0;
  std::size_t steps = 0;
  std::size_t accepted = 0;

  double acceptance_rate() const { return steps == 0 ? 0.0 : static_cast<double>(accepted) / steps; }
};

/// min(1, exp(proposed - current)); zero for a -inf proposal.
inline double acceptance_probability(double log_current, double log_proposed) {
  if (log_proposed == -std::numeric_limits<double>::infinity()) return 0.0;
  if (log_proposed >= log_current) return 1.0;
  return std::exp(log_proposed - log_current);
}

/// One Metropolis step for a generic target: `target.log_density(state)` and a
/// symmetric `target.propose(state, rng)`.
template <class Target, class State>
bool metropolis_update(const Target& target, State& state, double& log_density, Engine& rng) {
  State proposal = target.propose(state, rng);
  const double lp = target.log_density(proposal);
  const double a = acceptance_probability(log_density, lp);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (a >= 1.0 || u(rng) < a) {
    state = std::move(proposal);
    log_density = lp;
    return true;
  }
  return false;
}

/// Gaussian displacement of one uniformly chosen satellite.
inline void metropolis_step(ChainState& chain, const ConditionalAnsatz& ansatz, double step, Engine& rng) {
  const std::size_t n = chain.cfg.satellites.size();
  ++chain.steps;
  if (n == 0) {
    ++chain.accepted;
    return;
  }
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::normal_distribution<double> g(0.0, step);
  const std::size_t i = pick(rng);
  const Vec3 old = chain.cfg.satellites[i];
  Vec3 moved = old;
  moved.x += g(rng);
  if (ansatz.space().dimensionality() == Dimensionality::three_d) {
    moved.y += g(rng);
    moved.z += g(rng);
  }
  chain.cfg.satellites[i] = moved;
  const double lp = log_f_unnormalized(ansatz, chain.cfg);
  const double a = acceptance_probability(chain.log_f, lp);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (a >= 1.0 || u(rng) < a) {
    chain.log_f = lp;
    ++chain.accepted;
  } else {
    chain.cfg.satellites[i] = old;
  }
}

// ---------------------------------------------------------------------------
// Statistics

/// Effective sample size from the initial positive sequence estimator of the
/// integrated autocorrelation time. Returns n for a constant series.
inline double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += (x[i] - mean) * (x[i + lag] - mean);
    return acc / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  double tau = -1.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double pair = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / static_cast<double>(n));
  return std::min(static_cast<double>(n), static_cast<double>(n) / tau);
}

/// Mean, batch-means standard error and effective sample size of a series.
inline EstimatorResult summarize(std::span<const double> x, std::size_t batches = 32) {
  EstimatorResult r;
  r.count = x.size();
  if (x.empty()) return r;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  r.mean = mean;
  const std::size_t b = std::min(batches, x.size());
  const std::size_t len = x.size() / b;
  if (b >= 2 && len >= 1) {
    std::vector<double> means(b, 0.0);
    for (std::size_t k = 0; k < b; ++k) {
      for (std::size_t i = 0; i < len; ++i) means[k] += x[k * len + i];
      means[k] /= static_cast<double>(len);
    }
    double bm = 0.0;
    for (double m : means) bm += m;
    bm /= static_cast<double>(b);
    double var = 0.0;
    for (double m : means) var += (m - bm) * (m - bm);
    var /= static_cast<double>(b - 1);
    r.std_error = std::sqrt(var / static_cast<double>(b));
  }
  r.effective_samples = effective_sample_size(x);
  return r;
}

// ---------------------------------------------------------------------------
// Chains

struct ChainDiagnostics {
  double acceptance_rate = 0.0;  ///< over the measurement phase
  double step = 0.0;             ///< frozen proposal width
  std::size_t kept = 0;
};

/// Runs `settings.walkers` chains under f(. | r) and calls visit(cfg, walker)
/// for each kept configuration, walker by walker. Walker w of conditioning point `point`
/// draws from the stream (seed, chain, point, w).
template <class Visitor>
ChainDiagnostics sample_chain(const ConditionalAnsatz& ansatz, const Vec3& r, const SamplerSettings& settings,
                              std::uint64_t point, Visitor&& visit) {
  ChainDiagnostics diag;
  std::size_t measured_steps = 0, measured_accepts = 0;
  const std::size_t per_walker = (settings.samples + settings.walkers - 1) / settings.walkers;
  double step_sum = 0.0;
  for (std::size_t w = 0; w < settings.walkers; ++w) {
    Engine rng = make_stream(settings.seed, StreamTag::chain, point, w);
    ChainState chain{initial_configuration(ansatz, r, rng), 0.0, 0, 0};
    chain.log_f = log_f_unnormalized(ansatz, chain.cfg);
    // scaling with the density keeps chains covariant under rho(r) -> l^-3 rho(r/l)
    double step = settings.step * ansatz.density().length_scale();
    if (ansatz.bounded_support()) step = std::min(step, 2.0 * ansatz.space().satellite_radius());
    constexpr std::size_t window = 32;
    std::size_t window_accepts = 0, window_steps = 0;
    for (std::size_t i = 0; i < settings.burn_in; ++i) {
      const std::size_t before = chain.accepted;
      metropolis_step(chain, ansatz, step, rng);
      window_accepts += chain.accepted - before;
      if (settings.tune && ++window_steps == window) {
        const double rate = static_cast<double>(window_accepts) / window;
        step *= std::exp(2.0 * (rate - 0.35));
        if (ansatz.bounded_support()) step = std::min(step, 2.0 * ansatz.space().satellite_radius());
        window_accepts = window_steps = 0;
      }
    }
    const std::size_t kept = std::min(per_walker, settings.samples - diag.kept);
    const std::size_t s0 = chain.steps, a0 = chain.accepted;
    for (std::size_t k = 0; k < kept; ++k) {
      for (std::size_t t = 0; t < settings.thinning; ++t) metropolis_step(chain, ansatz, step, rng);
      visit(static_cast<const Configuration&>(chain.cfg), w);
    }
    measured_steps += chain.steps - s0;
    measured_accepts += chain.accepted - a0;
    diag.kept += kept;
    step_sum += step;
  }
  diag.acceptance_rate = measured_steps ? static_cast<double>(measured_accepts) / measured_steps : 0.0;
  diag.step = step_sum / static_cast<double>(settings.walkers);
  return diag;
}

/// Estimate of E_f[observable | r] with batch-means error bars.
template <class Observable>
EstimatorResult run_chain(const ConditionalAnsatz& ansatz, const Vec3& r, const SamplerSettings& settings,
                          Observable&& observable, std::uint64_t point = 0) {
  settings.validate();
  std::vector<double> values;
  values.reserve(settings.samples);
  sample_chain(ansatz, r, settings, point, [&](const Configuration& cfg, std::size_t) {
    const double v = observable(cfg);
    if (!std::isfinite(v))
      throw NumericalError("non-finite observable at conditioning point (" + std::to_string(r.x) + ", " +
                           std::to_string(r.y) + ", " + std::to_string(r.z) + ")");
    values.push_back(v);
  });
  return summarize(values, settings.batches);
}

// ---------------------------------------------------------------------------
// Parallel map

inline unsigned resolve_workers(unsigned workers) {
  if (workers > 0) return workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Calls f(i) for i in [0, n) on up to `workers` threads. Results must be
/// written to per-index slots; the first failing index (lowest i) is rethrown.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& f) {
  const unsigned threads = std::min<std::size_t>(resolve_workers(workers), std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace llcs
