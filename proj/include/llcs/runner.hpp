#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "llcs/conditions.hpp"
#include "llcs/config.hpp"
#include "llcs/functionals.hpp"
#include "llcs/optimizer.hpp"
#include "llcs/oracle.hpp"

namespace llcs {

inline constexpr const char* tool_version = "0.1.0";

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_numerical = 2, exit_tolerance = 3 };

/// Overrides from the command line; applied to the config before a run so the
/// echoed config reproduces it.
struct CommandOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<CoulombPrefactor> prefactor;
  bool test_mode = false;
};

inline RunConfig apply_overrides(RunConfig c, const CommandOverrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.prefactor) c.estimation.prefactor = *o.prefactor;
  if (o.test_mode) c.test_mode = true;
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// JSON views

inline nlohmann::json to_json(const Estimate& e) { return {{"value", e.value}, {"stderr", e.std_error}}; }

inline nlohmann::json to_json(const EnergyBreakdown& b) {
  return {{"weizsacker", b.weizsacker},
          {"fisher", to_json(b.fisher)},
          {"coulomb", to_json(b.coulomb)},
          {"external", b.external},
          {"total", to_json(b.total)},
          {"gamma", to_json(b.gamma())},
          {"fisher_coulomb_covariance", b.covariance},
          {"prefactor", to_string(b.prefactor)},
          {"path", to_string(b.path)},
          {"seed", b.seed},
          {"points", b.points}};
}

inline nlohmann::json to_json(const OptimizeTrace& t, const std::vector<std::string>& names) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : t.entries) {
    nlohmann::json params = nlohmann::json::object();
    for (std::size_t k = 0; k < e.params.size() && k < names.size(); ++k) params[names[k]] = e.params[k];
    rows.push_back({{"iteration", e.iteration},
                    {"params", params},
                    {"objective", e.objective},
                    {"stderr", e.std_error},
                    {"best_so_far", e.best_so_far}});
  }
  return {{"entries", rows}, {"best_index", t.empty() ? nlohmann::json(nullptr) : nlohmann::json(t.best_index)}};
}

inline nlohmann::json to_json(const ConditionReport& r) {
  nlohmann::json probes = nlohmann::json::array();
  for (const auto& p : r.normalization)
    probes.push_back({{"point", {p.point.x, p.point.y, p.point.z}},
                      {"integral", p.integral},
                      {"stderr", p.std_error},
                      {"z", p.z_score}});
  return {{"family", to_string(r.family)},
          {"condition_i", r.condition_i},
          {"condition_i_exact", r.normalization_exact},
          {"condition_ii", r.condition_ii},
          {"condition_iii", r.condition_iii},
          {"condition_iii_on_extension", r.condition_iii_on_extension},
          {"fermionic_compatible", r.fermionic_compatible},
          {"normalization", probes}};
}

inline nlohmann::json to_json(const DecompositionReport& r, CoulombPrefactor chosen) {
  nlohmann::json j = {{"form", r.form},
                      {"kinetic", r.kinetic},
                      {"repulsion", r.repulsion},
                      {"lhs", r.lhs},
                      {"weizsacker", r.weizsacker},
                      {"fisher", r.fisher},
                      {"coulomb_unscaled", r.coulomb_unscaled},
                      {"rhs_half", r.rhs_half},
                      {"rhs_full", r.rhs_full},
                      {"residual_half", r.residual_half},
                      {"residual_full", r.residual_full},
                      {"prefactor", to_string(chosen)},
                      {"residual", r.residual(chosen)},
                      {"tolerance", r.tolerance},
                      {"passed", r.passed(chosen)}};
  if (r.exact_residual) j["exact_residual"] = *r.exact_residual;
  return j;
}

// ---------------------------------------------------------------------------
// CSV

inline const std::vector<std::string>& trace_csv_columns() {
  static const std::vector<std::string> c{"iteration", "zeta", "gamma", "beta", "energy", "stderr"};
  return c;
}

inline const std::vector<std::string>& sweep_csv_columns() {
  static const std::vector<std::string> c{"zeta",   "gamma",          "beta",     "weizsacker",
                                          "fisher", "fisher_stderr",  "coulomb",  "coulomb_stderr",
                                          "external", "total",        "total_stderr", "prefactor",
                                          "seed"};
  return c;
}

namespace detail {

inline std::string csv_number(double v) { return format_double(v); }

inline std::string csv_line(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s + "\n";
}

}  // namespace detail

/// Outer-search trace as CSV. The zeta column carries the effective exponent
/// (1 / length scale) for mixtures.
inline std::string trace_csv(const OptimizeTrace& t, const DensityModel& like) {
  std::string out = detail::csv_line(trace_csv_columns());
  for (const auto& e : t.entries) {
    double zeta = e.params.front();
    if (like.family() == DensityFamily::exponential_mixture) {
      const std::vector<double> w(e.params.begin(), e.params.end() - 2);
      zeta = 1.0 / detail::density_from(like, w).length_scale();
    }
    out += detail::csv_line({std::to_string(e.iteration), detail::csv_number(zeta),
                             detail::csv_number(e.params[e.params.size() - 2]),
                             detail::csv_number(e.params.back()), detail::csv_number(e.objective),
                             detail::csv_number(e.std_error)});
  }
  return out;
}

inline std::string sweep_csv_row(double zeta, const AnsatzParams& p, const EnergyBreakdown& b) {
  using detail::csv_number;
  return detail::csv_line({csv_number(zeta), csv_number(p.gamma), csv_number(p.beta), csv_number(b.weizsacker),
                           csv_number(b.fisher.value), csv_number(b.fisher.std_error), csv_number(b.coulomb.value),
                           csv_number(b.coulomb.std_error), csv_number(b.external), csv_number(b.total.value),
                           csv_number(b.total.std_error), to_string(b.prefactor), std::to_string(b.seed)});
}

/// Appends a row, writing the header first when the file is new or empty.
inline void append_sweep_csv(const std::filesystem::path& path, const std::string& row) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw ValidationError("cannot open sweep CSV '" + path.string() + "'");
  if (fresh) out << detail::csv_line(sweep_csv_columns());
  out << row;
}

// ---------------------------------------------------------------------------
// Records and output directories

inline std::string utc_timestamp(const char* format) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, format);
  return s.str();
}

/// Creates DIR/<UTC timestamp>-seed<seed>, adding a counter if it exists.
inline std::filesystem::path make_run_directory(const std::filesystem::path& base, std::uint64_t seed) {
  const std::string stem = utc_timestamp("%Y%m%dT%H%M%SZ") + "-seed" + std::to_string(seed);
  std::filesystem::create_directories(base);
  for (int k = 0;; ++k) {
    auto dir = base / (k == 0 ? stem : stem + "-" + std::to_string(k));
    if (std::filesystem::create_directory(dir)) return dir;
  }
}

/// Writes via a temporary file and rename so readers never see a torn record.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw NumericalError("cannot write '" + tmp + "'");
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

/// A run record in memory plus the directory it is persisted to (if any).
class RunRecord {
 public:
  RunRecord(const RunConfig& cfg, std::string command, std::optional<std::filesystem::path> dir)
      : dir_(std::move(dir)), started_(std::chrono::steady_clock::now()) {
    json_ = {{"tool", "llcs"},
             {"version", tool_version},
             {"command", std::move(command)},
             {"timestamp", utc_timestamp("%Y-%m-%dT%H:%M:%SZ")},
             {"status", "partial"},
             {"config", config_to_json(cfg)},
             {"seeds", {{"master", cfg.seed}}},
             {"prefactor", to_string(cfg.estimation.prefactor)},
             {"results", nlohmann::json::object()},
             {"timings", nlohmann::json::object()}};
  }

  nlohmann::json& json() { return json_; }
  const nlohmann::json& json() const { return json_; }
  nlohmann::json& results() { return json_["results"]; }
  const std::optional<std::filesystem::path>& directory() const { return dir_; }

  void set_status(const std::string& s) {
    json_["status"] = s;
    json_["timings"]["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  }

  void save() const {
    if (dir_) write_file_atomic(*dir_ / "record.json", json_.dump(2) + "\n");
  }

  void write_side_file(const std::string& name, const std::string& text) const {
    if (dir_) write_file_atomic(*dir_ / name, text);
  }

 private:
  nlohmann::json json_;
  std::optional<std::filesystem::path> dir_;
  std::chrono::steady_clock::time_point started_;
};

struct CommandResult {
  nlohmann::json record;
  int exit_code = exit_ok;
  std::optional<std::filesystem::path> directory;
};

namespace detail {

inline std::optional<std::filesystem::path> run_directory(const RunConfig& cfg, bool persist) {
  if (!persist) return std::nullopt;
  return make_run_directory(cfg.output_dir, cfg.seed);
}

// Saves the record with status "failed" and the error, then rethrows.
template <class F>
CommandResult guarded(RunRecord& rec, F&& body) {
  try {
    int code = body();
    rec.set_status("complete");
    rec.save();
    return {rec.json(), code, rec.directory()};
  } catch (const std::exception& e) {
    rec.json()["error"] = e.what();
    rec.set_status("failed");
    rec.save();
    throw;
  }
}

inline double effective_zeta(const DensityModel& rho) { return rho.is_exponential() ? 1.0 / rho.length_scale() : 0.0; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

/// One energy breakdown at fixed density and ansatz parameters.
inline CommandResult cmd_energy(const RunConfig& cfg, bool persist = true) {
  cfg.validate();
  RunRecord rec(cfg, "energy", detail::run_directory(cfg, persist));
  return detail::guarded(rec, [&] {
    const auto ansatz = cfg.ansatz_model();
    const auto b = total_energy(ansatz, cfg.potential(), cfg.estimation_settings());
    rec.results()["breakdown"] = to_json(b);
    rec.results()["params"] = {{"gamma", ansatz.params().gamma}, {"beta", ansatz.params().beta}};
    rec.json()["seeds"]["estimation"] = b.seed;
    if (!cfg.sweep_csv.empty())
      append_sweep_csv(cfg.sweep_csv, sweep_csv_row(detail::effective_zeta(ansatz.density()), ansatz.params(), b));
    return static_cast<int>(exit_ok);
  });
}

/// Outer minimization over the density with the inner search at each step.
/// The record is rewritten with status "partial" after every outer
/// evaluation, so an interrupted run leaves a readable trace.
inline CommandResult cmd_optimize(const RunConfig& cfg, bool persist = true) {
  cfg.validate();
  RunRecord rec(cfg, "optimize", detail::run_directory(cfg, persist));
  const auto ansatz = cfg.ansatz_model();
  std::vector<std::string> names;
  if (ansatz.density().family() == DensityFamily::exponential) {
    names = {"zeta"};
  } else {
    for (std::size_t k = 0; k < ansatz.density().weights().size(); ++k) names.push_back("w" + std::to_string(k));
  }
  names.push_back("gamma");
  names.push_back("beta");
  return detail::guarded(rec, [&] {
    auto progress = [&](const OptimizeTrace& t) {
      rec.results()["trace"] = to_json(t, names);
      rec.set_status("partial");
      rec.save();
      rec.write_side_file("trace.csv", trace_csv(t, ansatz.density()));
    };
    const auto res = outer_minimize(ansatz, cfg.potential(), cfg.optimize_spec(), cfg.estimation_settings(), progress,
                                    cfg.test_mode);
    rec.results()["trace"] = to_json(res.trace, names);
    rec.results()["breakdown"] = to_json(res.breakdown);
    rec.results()["search_breakdown"] = to_json(res.search_breakdown);
    rec.results()["density"] = {{"family", detail::density_family_name(res.density.family())},
                                {"zeta", res.density.exponents()},
                                {"weights", res.density.weights()}};
    rec.results()["params"] = {{"gamma", res.params.gamma}, {"beta", res.params.beta}};
    rec.results()["converged"] = res.converged;
    rec.results()["iterations"] = res.iterations;
    rec.json()["seeds"]["search"] = cfg.seed;
    rec.json()["seeds"]["reevaluation"] = res.breakdown.seed;
    rec.write_side_file("trace.csv", trace_csv(res.trace, ansatz.density()));
    return static_cast<int>(exit_ok);
  });
}

struct ComparisonEntry {
  AnsatzFamily family;
  AnsatzParams params;
  Estimate gamma;
  ConditionReport conditions;
  std::size_t rank = 0;   ///< 1-based, ascending Gamma
  std::size_t group = 0;  ///< entries sharing a group are within 3 combined sigma
};

/// Ranks families ascending by Gamma; neighbours within 3 combined standard
/// errors share an indistinguishability group.
inline std::vector<ComparisonEntry> rank_families(std::vector<ComparisonEntry> entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const ComparisonEntry& a, const ComparisonEntry& b) { return a.gamma.value < b.gamma.value; });
  std::size_t group = 1;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].rank = i + 1;
    if (i > 0) {
      const auto& a = entries[i - 1].gamma;
      const auto& b = entries[i].gamma;
      if (std::abs(b.value - a.value) > 3.0 * std::hypot(a.std_error, b.std_error)) ++group;
    }
    entries[i].group = group;
  }
  return entries;
}

/// Inner-minimized Gamma per family on a shared density and seed policy,
/// ranked, with the condition check per family.
inline CommandResult cmd_compare_ansatz(const RunConfig& cfg, bool persist = true) {
  cfg.validate();
  if (cfg.compare.size() < 2) throw ConfigError("compare.families", "list at least two ansatz families");
  RunRecord rec(cfg, "compare-ansatz", detail::run_directory(cfg, persist));
  return detail::guarded(rec, [&] {
    std::vector<ComparisonEntry> entries;
    for (const auto family : cfg.compare) {
      const auto ansatz = cfg.ansatz_model(family);
      const auto inner = inner_minimize(ansatz, cfg.optimize_spec(), cfg.estimation_settings(), true, {}, cfg.test_mode);
      ComparisonEntry e{family, inner.params, inner.gamma, check_conditions(ansatz, cfg.verify.condition_trials, cfg.seed)};
      entries.push_back(e);
    }
    const auto ranked = rank_families(entries);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : ranked) {
      const bool tied = std::count_if(ranked.begin(), ranked.end(), [&](const auto& o) { return o.group == e.group; }) > 1;
      rows.push_back({{"family", to_string(e.family)},
                      {"rank", e.rank},
                      {"group", e.group},
                      {"indistinguishable", tied},
                      {"gamma", to_json(e.gamma)},
                      {"params", {{"gamma", e.params.gamma}, {"beta", e.params.beta}}},
                      {"fermionic_compatible", e.conditions.fermionic_compatible},
                      {"conditions", to_json(e.conditions)}});
    }
    rec.results()["ranking"] = rows;
    return static_cast<int>(exit_ok);
  });
}

/// Decomposition check on the configured reference wavefunction plus the
/// condition check of the configured ansatz. Exit 3 when the residual for the
/// configured prefactor exceeds the tolerance.
inline CommandResult cmd_verify(const RunConfig& cfg, bool persist = true) {
  cfg.validate();
  RunRecord rec(cfg, "verify", detail::run_directory(cfg, persist));
  return detail::guarded(rec, [&] {
    const double tol = cfg.verify.resolved_tolerance();
    DecompositionReport rep;
    if (cfg.verify.form == "product") {
      rep = verify_decomposition(ProductWavefunction{2, cfg.verify.zeta}, tol);
    } else {
      const GridSystem1D sys(cfg.verify.grid_points, cfg.verify.grid_length, cfg.system.softening, cfg.system.charge);
      const auto gs = exact_ground_state(sys, Exchange::symmetric);
      rep = verify_decomposition(sys, gs.psi, tol);
    }
    const auto prefactor = cfg.estimation.prefactor;
    rec.results()["decomposition"] = to_json(rep, prefactor);
    rec.results()["conditions"] = to_json(check_conditions(cfg.ansatz_model(), cfg.verify.condition_trials, cfg.seed));
    return static_cast<int>(rep.passed(prefactor) ? exit_ok : exit_tolerance);
  });
}

/// One chain at one conditioning point: acceptance, tuned step, mean,
/// batch-means error and effective sample size of the chosen observable.
inline CommandResult cmd_sample_diagnostics(const RunConfig& cfg, bool persist = true) {
  cfg.validate();
  RunRecord rec(cfg, "sample-diagnostics", detail::run_directory(cfg, persist));
  return detail::guarded(rec, [&] {
    const auto ansatz = cfg.ansatz_model();
    Vec3 r;
    if (cfg.diagnostics.point) {
      r = *cfg.diagnostics.point;
    } else {
      Engine rng = make_stream(cfg.seed, StreamTag::probe);
      r = sample_conditioning_point(ansatz.density(), rng);
    }
    const auto& space = ansatz.space();
    std::vector<double> values;
    const auto settings = cfg.estimation_settings().sampler;
    const auto diag = sample_chain(ansatz, r, settings, 0, [&](const Configuration& c, std::size_t) {
      double v = 0.0;
      for (const auto& s : c.satellites) v += cfg.diagnostics.observable == "kernel" ? space.kernel(r, s) : norm(s);
      values.push_back(c.satellites.empty() ? 0.0 : v / static_cast<double>(c.satellites.size()));
    });
    for (double v : values)
      if (!std::isfinite(v)) throw NumericalError("non-finite observable in sample diagnostics");
    const auto sum = summarize(values, cfg.estimation.sampler.batches);
    rec.results()["diagnostics"] = {{"point", {r.x, r.y, r.z}},
                                    {"observable", cfg.diagnostics.observable},
                                    {"mean", sum.mean},
                                    {"stderr", sum.std_error},
                                    {"samples", sum.count},
                                    {"effective_samples", sum.effective_samples},
                                    {"acceptance", diag.acceptance_rate},
                                    {"step", diag.step}};
    return static_cast<int>(exit_ok);
  });
}

}  // namespace llcs
