#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "llcs/ansatz.hpp"
#include "llcs/density.hpp"
#include "llcs/functionals.hpp"
#include "llcs/optimizer.hpp"
#include "llcs/space.hpp"

namespace llcs {

/// Config problem tied to a field ("section.key") and, when known, a line.
class ConfigError : public ValidationError {
 public:
  ConfigError(std::string field, const std::string& message, std::size_t line = 0)
      : ValidationError(format(field, message, line)), field_(std::move(field)), line_(line) {}
  const std::string& field() const { return field_; }
  std::size_t line() const { return line_; }

 private:
  static std::string format(const std::string& field, const std::string& message, std::size_t line) {
    std::string s = "config";
    if (line > 0) s += " line " + std::to_string(line);
    if (!field.empty()) s += " [" + field + "]";
    return s + ": " + message;
  }
  std::string field_;
  std::size_t line_;
};

/// section -> key -> raw value text
using ConfigSections = std::map<std::string, std::map<std::string, std::string>>;

struct SystemConfig {
  int electrons = 0;
  double charge = 0.0;
  Dimensionality dimensionality = Dimensionality::three_d;
  double radius = 10.0;
  double softening = 1.0;
  bool operator==(const SystemConfig&) const = default;
};

struct DensityConfig {
  DensityFamily family = DensityFamily::exponential;
  std::vector<double> zetas{1.0};
  std::vector<double> weights{1.0};
  double table_origin = -5.0;
  double table_spacing = 1.0;
  std::vector<double> table_values;
  bool operator==(const DensityConfig&) const = default;
};

struct AnsatzConfig {
  AnsatzFamily family = AnsatzFamily::pairwise_biparametric;
  AnsatzParams params{1.0, 1.0};
  bool operator==(const AnsatzConfig&) const = default;
};

struct VerifyConfig {
  std::string form = "product";  ///< product | grid
  double zeta = 1.6875;
  int grid_points = 32;
  double grid_length = 10.0;
  std::optional<double> tolerance;  ///< default 1e-3 (product) or 1e-2 (grid)
  std::uint64_t condition_trials = 100000;
  bool operator==(const VerifyConfig&) const = default;

  double resolved_tolerance() const { return tolerance ? *tolerance : (form == "grid" ? 1e-2 : 1e-3); }
};

struct DiagnosticsConfig {
  std::optional<Vec3> point;
  std::string observable = "kernel";  ///< kernel | radius
  bool operator==(const DiagnosticsConfig& o) const {
    auto same = [](const std::optional<Vec3>& a, const std::optional<Vec3>& b) {
      if (a.has_value() != b.has_value()) return false;
      return !a || (a->x == b->x && a->y == b->y && a->z == b->z);
    };
    return same(point, o.point) && observable == o.observable;
  }
};

struct RunConfig {
  SystemConfig system;
  DensityConfig density;
  AnsatzConfig ansatz;
  EstimationSettings estimation;
  OptimizeSpec optimize;
  std::vector<AnsatzFamily> compare;
  VerifyConfig verify;
  DiagnosticsConfig diagnostics;
  std::uint64_t seed = 1;
  bool test_mode = false;
  std::string output_dir = "runs";
  std::string sweep_csv;  ///< energy: append a row here when set

  bool operator==(const RunConfig&) const = default;

  SpaceSpec space() const {
    return SpaceSpec(system.dimensionality, system.electrons, system.radius, system.softening);
  }

  DensityModel density_model() const {
    switch (density.family) {
      case DensityFamily::exponential:
        return DensityModel::exponential(system.electrons, density.zetas.front(), system.dimensionality);
      case DensityFamily::exponential_mixture:
        return DensityModel::exponential_mixture(system.electrons, density.zetas, density.weights,
                                                 system.dimensionality);
      case DensityFamily::tabulated_1d:
        return DensityModel::tabulated_1d(system.electrons, density.table_origin, density.table_spacing,
                                          density.table_values);
    }
    throw ValidationError("unknown density family");
  }

  ConditionalAnsatz ansatz_model(std::optional<AnsatzFamily> family = std::nullopt) const {
    return ConditionalAnsatz::make(family.value_or(ansatz.family), density_model(), space(), ansatz.params, test_mode);
  }

  ExternalPotential potential() const { return ExternalPotential::for_space(space(), system.charge); }

  EstimationSettings estimation_settings() const {
    EstimationSettings s = estimation;
    s.sampler.seed = seed;
    return s;
  }

  OptimizeSpec optimize_spec() const {
    OptimizeSpec s = optimize;
    s.seed = seed;
    return s;
  }

  /// Cross-field checks beyond what the parser enforces per value.
  void validate() const {
    if (system.electrons < 1) throw ConfigError("system.electrons", "must be >= 1");
    if (!(system.charge > 0.0)) throw ConfigError("system.charge", "must be > 0");
    if (!(system.radius > 0.0)) throw ConfigError("system.radius", "must be > 0");
    if (!(system.softening > 0.0)) throw ConfigError("system.softening", "must be > 0");
    if (density.zetas.empty()) throw ConfigError("density.zeta", "needs at least one exponent");
    for (double z : density.zetas)
      if (!(z > 0.0)) throw ConfigError("density.zeta", "exponents must be > 0");
    if (density.family == DensityFamily::exponential && density.zetas.size() != 1)
      throw ConfigError("density.zeta", "the exponential family takes one exponent");
    if (density.family == DensityFamily::exponential_mixture && density.weights.size() != density.zetas.size())
      throw ConfigError("density.weights", "needs one weight per exponent");
    if (density.family == DensityFamily::tabulated_1d && system.dimensionality != Dimensionality::one_d_softened)
      throw ConfigError("density.family", "tabulated densities are one-dimensional");
    if (ansatz.family == AnsatzFamily::pairwise_biparametric && !test_mode) {
      if (optimize.gamma.lo <= 0.0)
        throw ConfigError("optimize.gamma_min", "gamma lower bound 0 is only allowed with --test-mode");
      if (ansatz.params.gamma <= 0.0)
        throw ConfigError("ansatz.gamma", "gamma = 0 is only allowed with --test-mode");
    }
    try {
      estimation.sampler.validate();
      optimize.validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ConfigError("", e.what());
    }
    if (estimation.points < 2) throw ConfigError("sampler.points", "must be >= 2");
    if (verify.form != "product" && verify.form != "grid") throw ConfigError("verify.form", "must be 'product' or 'grid'");
    if (diagnostics.observable != "kernel" && diagnostics.observable != "radius")
      throw ConfigError("diagnostics.observable", "must be 'kernel' or 'radius'");
    // build once so family/space mismatches surface here
    try {
      (void)ansatz_model();
    } catch (const ValidationError& e) {
      throw ConfigError("ansatz.family", e.what());
    }
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    if constexpr (std::is_same_v<T, double>) s += format_double(v[i]);
    else s += to_string(v[i]);
  }
  return s;
}

// Reads typed values out of the sections and records which keys were used.
class SectionReader {
 public:
  explicit SectionReader(const ConfigSections& s) : s_(s) {}

  const std::string* raw(const std::string& section, const std::string& key) {
    used_.insert(section + "." + key);
    auto it = s_.find(section);
    if (it == s_.end()) return nullptr;
    auto k = it->second.find(key);
    return k == it->second.end() ? nullptr : &k->second;
  }

  template <class T>
  void get(const std::string& section, const std::string& key, T& out) {
    const std::string* v = raw(section, key);
    if (!v) return;
    out = parse<T>(section + "." + key, *v);
  }

  template <class T>
  T require(const std::string& section, const std::string& key) {
    const std::string* v = raw(section, key);
    if (!v) throw ConfigError(section + "." + key, "required field is missing");
    return parse<T>(section + "." + key, *v);
  }

  void reject_unknown() const {
    for (const auto& [section, keys] : s_)
      for (const auto& [key, value] : keys)
        if (!used_.count(section + "." + key)) throw ConfigError(section + "." + key, "unknown field");
  }

  template <class T>
  static T parse(const std::string& field, const std::string& text) {
    const std::string v = trim(text);
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        return v;
      } else if constexpr (std::is_same_v<T, bool>) {
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError(field, "expected true/false, got '" + v + "'");
      } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        std::vector<double> out;
        for (const auto& item : split_list(v)) out.push_back(parse<double>(field, item));
        return out;
      } else if constexpr (std::is_floating_point_v<T> || std::is_integral_v<T>) {
        T x{};
        const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
        if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
          throw ConfigError(field, "cannot parse '" + v + "' as a number");
        return x;
      } else if constexpr (std::is_same_v<T, Dimensionality>) {
        return parse_dimensionality(v);
      } else if constexpr (std::is_same_v<T, AnsatzFamily>) {
        return parse_ansatz_family(v);
      } else if constexpr (std::is_same_v<T, CoulombPrefactor>) {
        return parse_prefactor(v);
      } else if constexpr (std::is_same_v<T, EstimatorPath>) {
        return parse_path(v);
      } else if constexpr (std::is_same_v<T, DensityFamily>) {
        if (v == "exponential") return DensityFamily::exponential;
        if (v == "exponential-mixture" || v == "mixture") return DensityFamily::exponential_mixture;
        if (v == "tabulated") return DensityFamily::tabulated_1d;
        throw ConfigError(field, "density family must be exponential, exponential-mixture or tabulated");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ConfigError(field, e.what());
    }
  }

 private:
  const ConfigSections& s_;
  std::set<std::string> used_;
};

inline std::string density_family_name(DensityFamily f) {
  switch (f) {
    case DensityFamily::exponential: return "exponential";
    case DensityFamily::exponential_mixture: return "exponential-mixture";
    case DensityFamily::tabulated_1d: return "tabulated";
  }
  return "?";
}

}  // namespace detail

/// Builds a RunConfig from raw sections. Every field but system.electrons and
/// system.charge has a default; unknown keys are rejected.
inline RunConfig config_from_sections(const ConfigSections& sections) {
  detail::SectionReader r(sections);
  RunConfig c;
  c.system.electrons = r.require<int>("system", "electrons");
  c.system.charge = r.require<double>("system", "charge");
  r.get("system", "dimensionality", c.system.dimensionality);
  r.get("system", "radius", c.system.radius);
  r.get("system", "softening", c.system.softening);

  r.get("density", "family", c.density.family);
  r.get("density", "zeta", c.density.zetas);
  if (c.density.family == DensityFamily::exponential_mixture && !r.raw("density", "weights"))
    c.density.weights.assign(c.density.zetas.size(), 1.0);
  r.get("density", "weights", c.density.weights);
  r.get("density", "table_origin", c.density.table_origin);
  r.get("density", "table_spacing", c.density.table_spacing);
  r.get("density", "table_values", c.density.table_values);

  r.get("ansatz", "family", c.ansatz.family);
  r.get("ansatz", "gamma", c.ansatz.params.gamma);
  r.get("ansatz", "beta", c.ansatz.params.beta);

  auto& sm = c.estimation.sampler;
  r.get("sampler", "step", sm.step);
  r.get("sampler", "burn_in", sm.burn_in);
  r.get("sampler", "thinning", sm.thinning);
  r.get("sampler", "samples", sm.samples);
  r.get("sampler", "walkers", sm.walkers);
  r.get("sampler", "batches", sm.batches);
  r.get("sampler", "tune", sm.tune);
  r.get("sampler", "points", c.estimation.points);
  r.get("sampler", "workers", c.estimation.workers);
  r.get("sampler", "prefactor", c.estimation.prefactor);
  r.get("sampler", "path", c.estimation.path);

  auto& o = c.optimize;
  r.get("optimize", "gamma_min", o.gamma.lo);
  r.get("optimize", "gamma_max", o.gamma.hi);
  r.get("optimize", "beta_min", o.beta.lo);
  r.get("optimize", "beta_max", o.beta.hi);
  r.get("optimize", "zeta_min", o.zeta.lo);
  r.get("optimize", "zeta_max", o.zeta.hi);
  r.get("optimize", "weight_min", o.weight.lo);
  r.get("optimize", "weight_max", o.weight.hi);
  r.get("optimize", "simplex_scale", o.simplex_scale);
  r.get("optimize", "inner_max_iter", o.inner_max_iter);
  r.get("optimize", "outer_max_iter", o.outer_max_iter);
  r.get("optimize", "inner_tolerance", o.inner_tolerance);
  r.get("optimize", "outer_tolerance", o.outer_tolerance);
  r.get("optimize", "zeta_tolerance", o.zeta_tolerance);
  r.get("optimize", "common_random_numbers", o.common_random_numbers);

  if (const auto* v = r.raw("compare", "families")) {
    for (const auto& name : detail::split_list(*v))
      c.compare.push_back(detail::SectionReader::parse<AnsatzFamily>("compare.families", name));
  }

  r.get("verify", "form", c.verify.form);
  r.get("verify", "zeta", c.verify.zeta);
  r.get("verify", "grid_points", c.verify.grid_points);
  r.get("verify", "grid_length", c.verify.grid_length);
  if (r.raw("verify", "tolerance")) c.verify.tolerance = r.require<double>("verify", "tolerance");
  r.get("verify", "condition_trials", c.verify.condition_trials);

  if (const auto* v = r.raw("diagnostics", "point")) {
    const auto xs = detail::SectionReader::parse<std::vector<double>>("diagnostics.point", *v);
    if (xs.empty() || xs.size() > 3) throw ConfigError("diagnostics.point", "expects 1 to 3 coordinates");
    Vec3 p{};
    p.x = xs[0];
    if (xs.size() > 1) p.y = xs[1];
    if (xs.size() > 2) p.z = xs[2];
    c.diagnostics.point = p;
  }
  r.get("diagnostics", "observable", c.diagnostics.observable);

  r.get("run", "seed", c.seed);
  r.get("run", "test_mode", c.test_mode);
  r.get("run", "output", c.output_dir);
  r.get("run", "sweep_csv", c.sweep_csv);

  r.reject_unknown();
  c.validate();
  return c;
}

/// Every field, including defaults, as raw sections.
inline ConfigSections config_to_sections(const RunConfig& c) {
  using detail::format_double;
  ConfigSections s;
  s["system"] = {{"electrons", std::to_string(c.system.electrons)},
                 {"charge", format_double(c.system.charge)},
                 {"dimensionality", to_string(c.system.dimensionality)},
                 {"radius", format_double(c.system.radius)},
                 {"softening", format_double(c.system.softening)}};
  s["density"] = {{"family", detail::density_family_name(c.density.family)},
                  {"zeta", detail::join(c.density.zetas)},
                  {"weights", detail::join(c.density.weights)},
                  {"table_origin", format_double(c.density.table_origin)},
                  {"table_spacing", format_double(c.density.table_spacing)},
                  {"table_values", detail::join(c.density.table_values)}};
  s["ansatz"] = {{"family", to_string(c.ansatz.family)},
                 {"gamma", format_double(c.ansatz.params.gamma)},
                 {"beta", format_double(c.ansatz.params.beta)}};
  const auto& sm = c.estimation.sampler;
  s["sampler"] = {{"step", format_double(sm.step)},
                  {"burn_in", std::to_string(sm.burn_in)},
                  {"thinning", std::to_string(sm.thinning)},
                  {"samples", std::to_string(sm.samples)},
                  {"walkers", std::to_string(sm.walkers)},
                  {"batches", std::to_string(sm.batches)},
                  {"tune", sm.tune ? "true" : "false"},
                  {"points", std::to_string(c.estimation.points)},
                  {"workers", std::to_string(c.estimation.workers)},
                  {"prefactor", to_string(c.estimation.prefactor)},
                  {"path", to_string(c.estimation.path)}};
  const auto& o = c.optimize;
  s["optimize"] = {{"gamma_min", format_double(o.gamma.lo)},
                   {"gamma_max", format_double(o.gamma.hi)},
                   {"beta_min", format_double(o.beta.lo)},
                   {"beta_max", format_double(o.beta.hi)},
                   {"zeta_min", format_double(o.zeta.lo)},
                   {"zeta_max", format_double(o.zeta.hi)},
                   {"weight_min", format_double(o.weight.lo)},
                   {"weight_max", format_double(o.weight.hi)},
                   {"simplex_scale", format_double(o.simplex_scale)},
                   {"inner_max_iter", std::to_string(o.inner_max_iter)},
                   {"outer_max_iter", std::to_string(o.outer_max_iter)},
                   {"inner_tolerance", format_double(o.inner_tolerance)},
                   {"outer_tolerance", format_double(o.outer_tolerance)},
                   {"zeta_tolerance", format_double(o.zeta_tolerance)},
                   {"common_random_numbers", o.common_random_numbers ? "true" : "false"}};
  if (!c.compare.empty()) s["compare"] = {{"families", detail::join(c.compare)}};
  s["verify"] = {{"form", c.verify.form},
                 {"zeta", format_double(c.verify.zeta)},
                 {"grid_points", std::to_string(c.verify.grid_points)},
                 {"grid_length", format_double(c.verify.grid_length)},
                 {"condition_trials", std::to_string(c.verify.condition_trials)}};
  if (c.verify.tolerance) s["verify"]["tolerance"] = format_double(*c.verify.tolerance);
  s["diagnostics"] = {{"observable", c.diagnostics.observable}};
  if (c.diagnostics.point) {
    const auto& p = *c.diagnostics.point;
    s["diagnostics"]["point"] = detail::join(std::vector<double>{p.x, p.y, p.z});
  }
  s["run"] = {{"seed", std::to_string(c.seed)},
              {"test_mode", c.test_mode ? "true" : "false"},
              {"output", c.output_dir},
              {"sweep_csv", c.sweep_csv}};
  return s;
}

/// Parses sectioned key = value text ('#' and ';' start comments).
inline RunConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("", e.message(), e.line());
  }
  ConfigSections sections;
  for (const auto& [name, section] : tree) {
    if (section.empty() && !section.data().empty())
      throw ConfigError(name, "key outside of a section");
    auto& keys = sections[name];
    for (const auto& [key, value] : section) keys[key] = value.data();
  }
  return config_from_sections(sections);
}

inline std::string render_config(const RunConfig& c) {
  std::string out;
  for (const auto& [section, keys] : config_to_sections(c)) {
    out += "[" + section + "]\n";
    for (const auto& [k, v] : keys) out += k + " = " + v + "\n";
    out += "\n";
  }
  return out;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [section, keys] : config_to_sections(c))
    for (const auto& [k, v] : keys) j[section][k] = v;
  return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object of sections");
  ConfigSections sections;
  for (const auto& [section, keys] : j.items()) {
    if (!keys.is_object()) throw ConfigError(section, "section must be an object");
    for (const auto& [k, v] : keys.items()) {
      if (v.is_string()) sections[section][k] = v.get<std::string>();
      else if (v.is_boolean()) sections[section][k] = v.get<bool>() ? "true" : "false";
      else if (v.is_number()) sections[section][k] = v.dump();
      else throw ConfigError(section + "." + k, "expected a scalar value");
    }
  }
  return config_from_sections(sections);
}

/// Reads a config file, or the config echoed in a run record (.json).
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return config_from_json(j.contains("config") ? j["config"] : j);
  }
  return parse_config(text);
}

}  // namespace llcs
