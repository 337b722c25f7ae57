#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "llcs/functionals.hpp"

namespace llcs {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
  bool operator==(const Interval&) const = default;
};

struct OptimizeSpec {
  Interval gamma{0.05, 3.0};
  Interval beta{0.0, 3.0};
  Interval zeta{0.5, 4.0};
  Interval weight{0.0, 1.0};     ///< per-component bound for mixture weights
  double simplex_scale = 0.15;   ///< initial simplex edge as a fraction of each bound width
  std::size_t inner_max_iter = 60;
  std::size_t outer_max_iter = 40;
  double inner_tolerance = 1e-3;  ///< Hartree, simplex spread
  double outer_tolerance = 1e-3;  ///< Hartree, simplex spread (mixtures)
  double zeta_tolerance = 1e-3;   ///< golden-section bracket width
  bool common_random_numbers = true;
  std::uint64_t seed = 1;

  void validate() const {
    for (const auto* b : {&gamma, &beta, &zeta, &weight}) {
      if (!std::isfinite(b->lo) || !std::isfinite(b->hi) || !(b->lo <= b->hi))
        throw ValidationError("optimizer bounds must be finite and ordered");
    }
    if (!(zeta.lo > 0.0)) throw ValidationError("zeta lower bound must be > 0");
    if (!(simplex_scale > 0.0)) throw ValidationError("simplex scale must be > 0");
    if (!(inner_tolerance > 0.0) || !(outer_tolerance > 0.0) || !(zeta_tolerance > 0.0))
      throw ValidationError("optimizer tolerances must be > 0");
  }
  bool operator==(const OptimizeSpec&) const = default;
};

struct TraceEntry {
  std::size_t iteration = 0;
  std::vector<double> params;
  double objective = 0.0;
  double std_error = 0.0;
  double best_so_far = 0.0;
};

struct OptimizeTrace {
  std::vector<TraceEntry> entries;
  std::size_t best_index = 0;

  /// Appends an evaluation. Exact ties keep the lexicographically smaller
  /// parameter vector as the best.
  void record(std::size_t iteration, std::vector<double> params, double objective, double std_error) {
    const bool better = entries.empty() || objective < entries[best_index].objective ||
                        (objective == entries[best_index].objective && params < entries[best_index].params);
    entries.push_back({iteration, std::move(params), objective, std_error, 0.0});
    if (better) best_index = entries.size() - 1;
    entries.back().best_so_far = entries[best_index].objective;
  }

  bool empty() const { return entries.empty(); }
  const TraceEntry& best() const { return entries.at(best_index); }
};

// ---------------------------------------------------------------------------
// Nelder-Mead

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  double std_error = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  OptimizeTrace trace;
};

namespace detail {

/// Folds x back into [lo, hi] by mirror reflection.
inline double reflect_into(double x, double lo, double hi) {
  if (lo == hi) return lo;
  const double w = hi - lo;
  double t = std::fmod(x - lo, 2.0 * w);
  if (t < 0.0) t += 2.0 * w;
  return std::clamp(t <= w ? lo + t : hi - (t - w), lo, hi);
}

template <class F>
Estimate evaluate_objective(F& f, const std::vector<double>& x) {
  using R = std::invoke_result_t<F&, const std::vector<double>&>;
  if constexpr (std::is_same_v<std::decay_t<R>, Estimate>) {
    return f(x);
  } else {
    return {static_cast<double>(f(x)), 0.0};
  }
}

}  // namespace detail

/// Bounded Nelder-Mead. `objective` maps a parameter vector to a double or an
/// Estimate. Points outside the box are mirrored back in. Stops when the
/// spread of vertex objectives drops below `tol` or after `max_iter`
/// iterations.
template <class F>
NelderMeadResult nelder_mead(F&& objective, std::vector<double> init, const std::vector<Interval>& bounds,
                             double tol, std::size_t max_iter, double init_scale = 0.15) {
  const std::size_t n = init.size();
  if (bounds.size() != n) throw ValidationError("nelder_mead: bounds and initial point differ in size");
  if (!(tol > 0.0)) throw ValidationError("nelder_mead: tolerance must be > 0");
  for (std::size_t d = 0; d < n; ++d) init[d] = std::clamp(init[d], bounds[d].lo, bounds[d].hi);

  NelderMeadResult res;
  std::size_t iteration = 0;
  auto project = [&](std::vector<double> x) {
    for (std::size_t d = 0; d < n; ++d) x[d] = detail::reflect_into(x[d], bounds[d].lo, bounds[d].hi);
    return x;
  };
  struct Vertex {
    std::vector<double> x;
    Estimate f;
  };
  auto eval = [&](std::vector<double> x) {
    const Estimate e = detail::evaluate_objective(objective, x);
    ++res.evaluations;
    res.trace.record(iteration, x, e.value, e.std_error);
    return Vertex{std::move(x), e};
  };
  auto less = [](const Vertex& a, const Vertex& b) {
    // NaN objectives sort last
    const bool an = std::isnan(a.f.value), bn = std::isnan(b.f.value);
    if (an != bn) return bn;
    if (a.f.value != b.f.value) return a.f.value < b.f.value;
    return a.x < b.x;
  };

  std::vector<Vertex> simplex;
  simplex.push_back(eval(init));
  for (std::size_t d = 0; d < n; ++d) {
    auto x = init;
    const double w = bounds[d].width();
    double step = init_scale * (w > 0.0 ? w : std::max(1.0, std::abs(init[d])));
    if (x[d] + step > bounds[d].hi && w > 0.0) step = -step;
    x[d] += step;
    simplex.push_back(eval(project(std::move(x))));
  }
  for (const auto& v : simplex)
    if (!std::isfinite(v.f.value)) throw NumericalError("nelder_mead: non-finite objective at initialization");

  auto spread = [&] {
    double lo = simplex.front().f.value, hi = lo;
    for (const auto& v : simplex) {
      lo = std::min(lo, v.f.value);
      hi = std::max(hi, v.f.value);
    }
    return hi - lo;
  };

  if (spread() < tol) {
    res.x = simplex.front().x;
    res.value = simplex.front().f.value;
    res.std_error = simplex.front().f.std_error;
    res.converged = true;
    return res;
  }

  std::sort(simplex.begin(), simplex.end(), less);
  while (iteration < max_iter) {
    if (spread() < tol) {
      res.converged = true;
      break;
    }
    ++iteration;
    std::vector<double> centroid(n, 0.0);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[k].x[d] / static_cast<double>(n);
    auto along = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t d = 0; d < n; ++d) x[d] = centroid[d] + t * (simplex[n].x[d] - centroid[d]);
      return project(std::move(x));
    };
    Vertex r = eval(along(-1.0));
    if (less(r, simplex[0])) {
      Vertex e = eval(along(-2.0));
      simplex[n] = less(e, r) ? std::move(e) : std::move(r);
    } else if (less(r, simplex[n - 1])) {
      simplex[n] = std::move(r);
    } else {
      const bool outside = less(r, simplex[n]);
      Vertex c = eval(along(outside ? -0.5 : 0.5));
      if (less(c, outside ? r : simplex[n])) {
        simplex[n] = std::move(c);
      } else {
        for (std::size_t k = 1; k <= n; ++k) {
          std::vector<double> x(n);
          for (std::size_t d = 0; d < n; ++d) x[d] = simplex[0].x[d] + 0.5 * (simplex[k].x[d] - simplex[0].x[d]);
          simplex[k] = eval(project(std::move(x)));
        }
      }
    }
    std::sort(simplex.begin(), simplex.end(), less);
  }
  if (!res.converged && spread() < tol) res.converged = true;
  res.iterations = iteration;
  res.x = simplex.front().x;
  res.value = simplex.front().f.value;
  res.std_error = simplex.front().f.std_error;
  return res;
}

// ---------------------------------------------------------------------------
// Golden section

struct GoldenResult {
  double x = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  OptimizeTrace trace;
};

/// Golden-section search on [lo, hi]. The initial point is evaluated first
/// (iteration 0); with max_iter = 0 that is the only evaluation. Stops when
/// the bracket is narrower than `xtol`. Returns the best point evaluated.
template <class F>
GoldenResult golden_section(F&& objective, double init, Interval bounds, double xtol, std::size_t max_iter,
                            const std::function<void(const OptimizeTrace&)>& on_progress = {}) {
  if (!(xtol > 0.0)) throw ValidationError("golden_section: tolerance must be > 0");
  GoldenResult res;
  std::size_t iteration = 0;
  auto eval = [&](double x) {
    const Estimate e = detail::evaluate_objective(objective, std::vector<double>{x});
    if (!std::isfinite(e.value))
      throw NumericalError("golden_section: non-finite objective at " + std::to_string(x));
    res.trace.record(iteration, {x}, e.value, e.std_error);
    if (on_progress) on_progress(res.trace);
    return e.value;
  };
  eval(std::clamp(init, bounds.lo, bounds.hi));
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = bounds.lo, b = bounds.hi;
  double x1 = 0.0, x2 = 0.0, f1 = 0.0, f2 = 0.0;
  bool started = false;
  while (iteration < max_iter) {
    if (b - a < xtol) {
      res.converged = true;
      break;
    }
    ++iteration;
    if (!started) {
      x1 = b - g * (b - a);
      x2 = a + g * (b - a);
      f1 = eval(x1);
      f2 = eval(x2);
      started = true;
    } else if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = eval(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = eval(x2);
    }
  }
  if (!res.converged && b - a < xtol) res.converged = true;
  res.iterations = iteration;
  const auto& best = res.trace.best();
  res.x = best.params.front();
  res.value = best.objective;
  res.std_error = best.std_error;
  return res;
}

// ---------------------------------------------------------------------------
// Inner minimization over the ansatz parameters

/// Replacement objective for the inner search: Gamma estimate at params with
/// the given seed.
using InnerObjective = std::function<Estimate(const AnsatzParams&, std::uint64_t seed)>;

/// (gamma - g0)^2 + (beta - b0)^2, exact.
inline InnerObjective synthetic_objective(double g0, double b0) {
  return [g0, b0](const AnsatzParams& p, std::uint64_t) {
    return Estimate{(p.gamma - g0) * (p.gamma - g0) + (p.beta - b0) * (p.beta - b0), 0.0};
  };
}

struct InnerResult {
  AnsatzParams params;
  Estimate search_value;  ///< Gamma at the winner under the search's random numbers
  Estimate gamma;         ///< fresh-seed re-evaluation (equal to search_value when skipped)
  std::optional<CorrelationEstimate> correlation;  ///< breakdown behind `gamma`
  bool searched = false;
  bool converged = true;
  std::size_t evaluations = 0;
  std::uint64_t search_seed = 0;
  std::uint64_t reevaluation_seed = 0;
  OptimizeTrace trace;
};

/// Minimizes Gamma over (gamma, beta) for the pairwise family; other families
/// have no free parameters and get a single evaluation. With common random
/// numbers every evaluation uses the master seed, so the objective is a
/// deterministic function of the parameters; the winner is then re-estimated
/// with an independent seed unless `reevaluate` is false.
inline InnerResult inner_minimize(const ConditionalAnsatz& ansatz, const OptimizeSpec& spec,
                                  const EstimationSettings& settings, bool reevaluate = true,
                                  const InnerObjective& override_objective = {}, bool test_mode = false) {
  spec.validate();
  InnerResult out;
  out.search_seed = spec.seed;
  std::size_t failures = 0, calls = 0;
  std::optional<CorrelationEstimate> last;
  auto gamma_at = [&](const AnsatzParams& p, std::uint64_t seed) -> Estimate {
    if (override_objective) return override_objective(p, seed);
    EstimationSettings s = settings;
    s.sampler.seed = seed;
    try {
      last = estimate_correlation(ansatz.with_params(p, test_mode), s);
    } catch (const NumericalError&) {
      ++failures;
      last.reset();
      return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    }
    return last->gamma;
  };
  auto seed_for = [&](std::size_t call) {
    return spec.common_random_numbers ? spec.seed : derive_seed(spec.seed, StreamTag::restart, call);
  };

  if (ansatz.family() != AnsatzFamily::pairwise_biparametric) {
    out.params = ansatz.params();
    out.search_value = gamma_at(out.params, spec.seed);
    if (!std::isfinite(out.search_value.value)) throw NumericalError("inner_minimize: evaluation failed");
    out.gamma = out.search_value;
    out.correlation = last;
    out.evaluations = 1;
    out.reevaluation_seed = spec.seed;
    out.trace.record(0, {out.params.gamma, out.params.beta}, out.gamma.value, out.gamma.std_error);
    return out;
  }

  if (spec.gamma.lo <= 0.0 && !test_mode)
    throw ValidationError("gamma lower bound must be > 0 for the pairwise family outside test mode");
  out.searched = true;
  // breakdown behind every evaluation, to report the one at the returned point
  std::vector<std::pair<std::vector<double>, std::optional<CorrelationEstimate>>> evaluated;
  auto objective = [&](const std::vector<double>& x) {
    const Estimate e = gamma_at({x[0], x[1]}, seed_for(calls++));
    evaluated.emplace_back(x, last);
    return e;
  };
  const auto nm = nelder_mead(objective, {ansatz.params().gamma, ansatz.params().beta}, {spec.gamma, spec.beta},
                              spec.inner_tolerance, spec.inner_max_iter, spec.simplex_scale);
  if (failures == nm.evaluations) throw NumericalError("inner_minimize: all evaluations failed");
  out.params = {nm.x[0], nm.x[1]};
  out.search_value = {nm.value, nm.std_error};
  out.converged = nm.converged;
  out.evaluations = nm.evaluations;
  out.trace = nm.trace;
  if (reevaluate) {
    out.reevaluation_seed = derive_seed(spec.seed, StreamTag::reevaluation);
    out.gamma = gamma_at(out.params, out.reevaluation_seed);
    if (!std::isfinite(out.gamma.value)) throw NumericalError("inner_minimize: re-evaluation failed");
    out.correlation = last;
  } else {
    out.reevaluation_seed = spec.common_random_numbers ? out.search_seed : 0;
    out.gamma = out.search_value;
    for (const auto& [x, corr] : evaluated)
      if (x == nm.x && corr && corr->gamma == out.search_value) out.correlation = corr;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outer minimization over the density parameters

struct OuterResult {
  DensityModel density = DensityModel::exponential(1, 1.0);
  AnsatzParams params;
  EnergyBreakdown search_breakdown;  ///< winner under the search's random numbers
  EnergyBreakdown breakdown;         ///< winner re-estimated with a fresh seed
  bool converged = false;
  std::size_t iterations = 0;
  OptimizeTrace trace;  ///< params: zeta (or weights), gamma, beta
};

namespace detail {

inline DensityModel density_from(const DensityModel& like, const std::vector<double>& x) {
  if (like.family() == DensityFamily::exponential) return DensityModel::exponential(like.electrons(), x[0], like.dimensionality());
  std::vector<double> w = x;
  if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) std::fill(w.begin(), w.end(), 1.0);
  return DensityModel::exponential_mixture(like.electrons(), like.exponents(), w, like.dimensionality());
}

}  // namespace detail

/// Minimizes W[rho] + int v rho + min_f Gamma over the density parameters:
/// zeta by golden section for the single exponential, the mixture weights by
/// Nelder-Mead otherwise. `on_progress` sees the trace after every outer
/// evaluation.
inline OuterResult outer_minimize(const ConditionalAnsatz& ansatz, const ExternalPotential& v, const OptimizeSpec& spec,
                                  const EstimationSettings& settings,
                                  const std::function<void(const OptimizeTrace&)>& on_progress = {},
                                  bool test_mode = false) {
  spec.validate();
  const auto& rho0 = ansatz.density();
  if (rho0.family() == DensityFamily::tabulated_1d)
    throw ValidationError("outer search needs an exponential density family");

  OuterResult out;
  std::size_t iteration = 0;
  auto energy_at = [&](const DensityModel& rho) {
    const auto a = ansatz.with_density(rho);
    const auto inner = inner_minimize(a, spec, settings, false, {}, test_mode);
    EstimationSettings s = settings;
    s.sampler.seed = spec.seed;
    const CorrelationEstimate corr =
        inner.correlation ? *inner.correlation : estimate_correlation(a.with_params(inner.params, test_mode), s);
    const auto grid = QuadratureGrid::for_density(rho);
    return std::pair{assemble_energy(weizsacker_term(rho, grid), corr, external_energy(rho, v, grid), s), inner.params};
  };

  std::vector<double> best_x;
  auto objective = [&](const std::vector<double>& x) -> Estimate {
    const auto rho = detail::density_from(rho0, x);
    const auto [b, p] = energy_at(rho);
    std::vector<double> row = x;
    row.push_back(p.gamma);
    row.push_back(p.beta);
    out.trace.record(iteration, row, b.total.value, b.total.std_error);
    if (out.trace.best_index == out.trace.entries.size() - 1) {
      best_x = x;
      out.search_breakdown = b;
      out.params = p;
    }
    if (on_progress) on_progress(out.trace);
    return b.total;
  };

  if (rho0.family() == DensityFamily::exponential) {
    auto counted = [&](const std::vector<double>& x) {
      const Estimate e = objective(x);
      ++iteration;
      return e;
    };
    const auto g = golden_section(counted, rho0.exponents().front(), spec.zeta, spec.zeta_tolerance,
                                  spec.outer_max_iter);
    out.converged = g.converged;
    out.iterations = g.iterations;
  } else {
    std::vector<Interval> bounds(rho0.weights().size(), spec.weight);
    const auto nm = nelder_mead(
        [&](const std::vector<double>& x) {
          const Estimate e = objective(x);
          ++iteration;
          return e;
        },
        rho0.weights(), bounds, spec.outer_tolerance, spec.outer_max_iter, spec.simplex_scale);
    out.converged = nm.converged;
    out.iterations = nm.iterations;
  }
  out.density = detail::density_from(rho0, best_x);

  // fresh-seed re-estimate of the winner
  const std::uint64_t fresh = derive_seed(spec.seed, StreamTag::reevaluation, 1);
  const auto a = ansatz.with_density(out.density).with_params(out.params, test_mode);
  EstimationSettings s = settings;
  s.sampler.seed = fresh;
  const auto grid = QuadratureGrid::for_density(out.density);
  out.breakdown = assemble_energy(weizsacker_term(out.density, grid), estimate_correlation(a, s),
                                  external_energy(out.density, v, grid), s);
  return out;
}

}  // namespace llcs
