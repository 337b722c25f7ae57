#pragma once

#include <algorithm>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "llcs/space.hpp"
#include "llcs/vec.hpp"

namespace llcs {

enum class DensityFamily { exponential, exponential_mixture, tabulated_1d };

inline std::string to_string(DensityFamily f) {
  switch (f) {
    case DensityFamily::exponential: return "exponential";
    case DensityFamily::exponential_mixture: return "mixture";
    case DensityFamily::tabulated_1d: return "tabulated";
  }
  return "?";
}

/// One-electron density rho(r), normalized to N.
///
/// Exponential families are sums of hydrogenic 1s densities,
///   3D: rho(r) = N sum_k w_k zeta_k^3/pi exp(-2 zeta_k r),
///   1D: rho(x) = N sum_k w_k zeta_k exp(-2 zeta_k |x|),
/// with sum_k w_k = 1. The tabulated family is piecewise linear between
/// equally spaced nodes and zero outside them; node values are rescaled so the
/// trapezoid integral equals N exactly.
class DensityModel {
 public:
  static DensityModel exponential(int electrons, double zeta,
                                  Dimensionality dim = Dimensionality::three_d) {
    DensityModel m = exponential_mixture(electrons, {zeta}, {1.0}, dim);
    m.family_ = DensityFamily::exponential;
    return m;
  }

  static DensityModel exponential_mixture(int electrons, std::vector<double> zetas,
                                          std::vector<double> weights,
                                          Dimensionality dim = Dimensionality::three_d) {
    if (electrons < 1) throw ValidationError("electron count N must be >= 1");
    if (zetas.empty() || zetas.size() != weights.size())
      throw ValidationError("density exponents and weights must be non-empty and of equal length");
    double total = 0.0;
    for (std::size_t k = 0; k < zetas.size(); ++k) {
      if (!(zetas[k] > 0.0)) throw ValidationError("density exponent zeta must be > 0");
      if (!(weights[k] >= 0.0)) throw ValidationError("density weights must be >= 0");
      total += weights[k];
    }
    if (!(total > 0.0)) throw ValidationError("density weights must not all be zero");
    for (double& w : weights) w /= total;
    DensityModel m;
    m.family_ = DensityFamily::exponential_mixture;
    m.dim_ = dim;
    m.electrons_ = electrons;
    m.zetas_ = std::move(zetas);
    m.weights_ = std::move(weights);
    return m;
  }

  static DensityModel tabulated_1d(int electrons, double x0, double spacing,
                                   std::vector<double> values) {
    if (electrons < 1) throw ValidationError("electron count N must be >= 1");
    if (values.size() < 2) throw ValidationError("tabulated density needs at least two nodes");
    if (!(spacing > 0.0)) throw ValidationError("tabulated density spacing must be > 0");
    double trapezoid = 0.0;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      if (!(values[i] >= 0.0) || !(values[i + 1] >= 0.0))
        throw ValidationError("tabulated density values must be >= 0");
      trapezoid += 0.5 * spacing * (values[i] + values[i + 1]);
    }
    if (!(trapezoid > 0.0)) throw ValidationError("tabulated density integrates to zero");
    for (double& v : values) v *= electrons / trapezoid;
    DensityModel m;
    m.family_ = DensityFamily::tabulated_1d;
    m.dim_ = Dimensionality::one_d_softened;
    m.electrons_ = electrons;
    m.x0_ = x0;
    m.spacing_ = spacing;
    m.values_ = std::move(values);
    return m;
  }

  DensityFamily family() const { return family_; }
  Dimensionality dimensionality() const { return dim_; }
  int electrons() const { return electrons_; }
  const std::vector<double>& exponents() const { return zetas_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& table() const { return values_; }
  double table_origin() const { return x0_; }
  double table_spacing() const { return spacing_; }
  double table_end() const { return x0_ + spacing_ * static_cast<double>(values_.size() - 1); }

  bool is_exponential() const { return family_ != DensityFamily::tabulated_1d; }

  /// 1/zeta for exponentials (weight-averaged zeta for mixtures), 1 otherwise.
  double length_scale() const {
    if (!is_exponential()) return 1.0;
    double z = 0.0;
    for (std::size_t k = 0; k < zetas_.size(); ++k) z += weights_[k] * zetas_[k];
    return 1.0 / z;
  }

  /// Same density shape with a different electron count.
  DensityModel with_electrons(int electrons) const {
    if (family_ == DensityFamily::tabulated_1d) return tabulated_1d(electrons, x0_, spacing_, values_);
    DensityModel m = *this;
    m.electrons_ = electrons;
    return m;
  }

  double value(const Vec3& r) const {
    if (family_ == DensityFamily::tabulated_1d) return table_value(r.x);
    const double s = dim_ == Dimensionality::three_d ? norm(r) : std::abs(r.x);
    return radial_value(s);
  }

  /// Analytic gradient. Empty at the origin for the cusped exponential families.
  std::optional<Vec3> gradient(const Vec3& r) const {
    if (family_ == DensityFamily::tabulated_1d) return Vec3{table_slope(r.x), 0.0, 0.0};
    if (dim_ == Dimensionality::three_d) {
      const double s = norm(r);
      if (s == 0.0) return std::nullopt;
      return r * (radial_derivative(s) / s);
    }
    if (r.x == 0.0) return std::nullopt;
    return Vec3{radial_derivative(std::abs(r.x)) * (r.x > 0.0 ? 1.0 : -1.0), 0.0, 0.0};
  }

  /// rho as a function of |r| (exponential families only).
  double radial_value(double s) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < zetas_.size(); ++k) acc += weights_[k] * shape(zetas_[k]) * std::exp(-2.0 * zetas_[k] * s);
    return electrons_ * acc;
  }

  double radial_derivative(double s) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < zetas_.size(); ++k)
      acc -= 2.0 * zetas_[k] * weights_[k] * shape(zetas_[k]) * std::exp(-2.0 * zetas_[k] * s);
    return electrons_ * acc;
  }

  bool operator==(const DensityModel&) const = default;

 private:
  double shape(double zeta) const {
    return dim_ == Dimensionality::three_d ? zeta * zeta * zeta / std::numbers::pi : zeta;
  }

  double table_value(double x) const {
    const double t = (x - x0_) / spacing_;
    const double last = static_cast<double>(values_.size() - 1);
    if (t < 0.0 || t > last) return 0.0;
    const auto i = std::min(static_cast<std::size_t>(t), values_.size() - 2);
    const double u = t - static_cast<double>(i);
    return (1.0 - u) * values_[i] + u * values_[i + 1];
  }

  double table_slope(double x) const {
    const double t = (x - x0_) / spacing_;
    const double last = static_cast<double>(values_.size() - 1);
    if (t < 0.0 || t > last) return 0.0;
    const auto i = std::min(static_cast<std::size_t>(t), values_.size() - 2);
    return (values_[i + 1] - values_[i]) / spacing_;
  }

  DensityFamily family_ = DensityFamily::exponential;
  Dimensionality dim_ = Dimensionality::three_d;
  int electrons_ = 1;
  std::vector<double> zetas_;
  std::vector<double> weights_;
  double x0_ = 0.0;
  double spacing_ = 1.0;
  std::vector<double> values_;
};

inline double density_value(const DensityModel& model, const Vec3& r) { return model.value(r); }

inline std::optional<Vec3> density_gradient(const DensityModel& model, const Vec3& r) {
  return model.gradient(r);
}

enum class PotentialKind { coulomb_nucleus, softened_1d, none };

inline std::string to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::coulomb_nucleus: return "coulomb";
    case PotentialKind::softened_1d: return "softened";
    case PotentialKind::none: return "none";
  }
  return "?";
}

/// Nuclear attraction v(r) = -Z/r (3D) or -Z/sqrt(x^2 + a^2) (1D).
struct ExternalPotential {
  PotentialKind kind = PotentialKind::none;
  double charge = 0.0;
  double softening = 1.0;

  static ExternalPotential coulomb(double z) { return {PotentialKind::coulomb_nucleus, z, 1.0}; }
  static ExternalPotential softened(double z, double a = 1.0) { return {PotentialKind::softened_1d, z, a}; }
  static ExternalPotential zero() { return {}; }

  /// Natural potential for a space: Coulomb in 3D, softened in 1D.
  static ExternalPotential for_space(const SpaceSpec& space, double z) {
    return space.dimensionality() == Dimensionality::three_d ? coulomb(z) : softened(z, space.softening());
  }

  double operator()(const Vec3& r) const {
    switch (kind) {
      case PotentialKind::coulomb_nucleus: return -charge / norm(r);
      case PotentialKind::softened_1d: return -charge / std::sqrt(r.x * r.x + softening * softening);
      case PotentialKind::none: return 0.0;
    }
    return 0.0;
  }

  bool operator==(const ExternalPotential&) const = default;
};

}  // namespace llcs
