#pragma once

#include <limits>
#include <numbers>
#include <string>
#include <string_view>

#include "llcs/vec.hpp"

namespace llcs {

enum class Dimensionality { three_d, one_d_softened };

inline std::string to_string(Dimensionality d) {
  return d == Dimensionality::three_d ? "3d" : "1d";
}

inline Dimensionality parse_dimensionality(std::string_view s) {
  if (s == "3d" || s == "3D") return Dimensionality::three_d;
  if (s == "1d" || s == "1D" || s == "1d-softened") return Dimensionality::one_d_softened;
  throw ValidationError("unknown dimensionality '" + std::string(s) + "' (expected 3d or 1d)");
}

/// Configuration space of the N-electron system.
///
/// Omega is the ball (3D) or interval (1D) of radius R about the origin. The
/// one-particle volume is omega = vol(Omega)/N; satellite electrons of the
/// bounded conditional families live in the ball/interval of that volume,
/// centred on the origin.
class SpaceSpec {
 public:
  SpaceSpec() = default;

  SpaceSpec(Dimensionality dim, int electrons, double domain_radius, double softening = 1.0)
      : dim_(dim), electrons_(electrons), radius_(domain_radius), softening_(softening) {
    if (electrons < 1) throw ValidationError("electron count N must be >= 1");
    if (!(domain_radius > 0.0)) throw ValidationError("domain radius R must be > 0");
    if (dim == Dimensionality::one_d_softened && !(softening > 0.0))
      throw ValidationError("softening a must be > 0 in 1d mode");
  }

  Dimensionality dimensionality() const { return dim_; }
  int electrons() const { return electrons_; }
  double domain_radius() const { return radius_; }
  double softening() const { return softening_; }

  double domain_volume() const {
    if (dim_ == Dimensionality::three_d) return 4.0 / 3.0 * std::numbers::pi * radius_ * radius_ * radius_;
    return 2.0 * radius_;
  }

  double one_particle_volume() const { return domain_volume() / electrons_; }

  /// Radius of the origin-centred region whose measure is omega.
  double satellite_radius() const {
    if (dim_ == Dimensionality::three_d) return radius_ * std::cbrt(1.0 / electrons_);
    return radius_ / electrons_;
  }

  bool inside_satellite_region(const Vec3& r) const {
    const double rs = satellite_radius();
    if (dim_ == Dimensionality::three_d) return norm2(r) <= rs * rs;
    return std::abs(r.x) <= rs;
  }

  /// Electron-electron kernel: 1/|a-b| in 3D, 1/sqrt(dx^2 + a^2) in 1D.
  /// Returns +inf at coincidence in 3D.
  double kernel(const Vec3& a, const Vec3& b) const {
    if (dim_ == Dimensionality::three_d) {
      const double d = norm(a - b);
      return d > 0.0 ? 1.0 / d : std::numeric_limits<double>::infinity();
    }
    const double dx = a.x - b.x;
    return 1.0 / std::sqrt(dx * dx + softening_ * softening_);
  }

  /// Gradient of kernel(a, b) with respect to a.
  Vec3 kernel_gradient(const Vec3& a, const Vec3& b) const {
    if (dim_ == Dimensionality::three_d) {
      const Vec3 d = a - b;
      const double r2 = norm2(d);
      return d * (-1.0 / (r2 * std::sqrt(r2)));
    }
    const double dx = a.x - b.x;
    const double s2 = dx * dx + softening_ * softening_;
    return {-dx / (s2 * std::sqrt(s2)), 0.0, 0.0};
  }

  bool operator==(const SpaceSpec&) const = default;

 private:
  Dimensionality dim_ = Dimensionality::three_d;
  int electrons_ = 1;
  double radius_ = 10.0;
  double softening_ = 1.0;
};

}  // namespace llcs
