#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "llcs/density.hpp"
#include "llcs/space.hpp"
#include "llcs/vec.hpp"

namespace llcs {

/// Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  if (n < 1) throw ValidationError("Gauss-Legendre order must be >= 1");
  std::vector<double> x(n), w(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

struct QuadratureNode {
  Vec3 position;
  double weight;
};

struct QuadratureOrders {
  int radial = 128;
  int theta = 6;
  int phi = 6;
  double scale = 1.0;
};

/// A set of positive-weight nodes over the configuration space.
///
/// The 3D scheme is a Gauss-Legendre radial rule on r = s t/(1-t) times a
/// product angular rule (Gauss-Legendre in cos(theta), uniform in phi); it
/// never places a node at the origin. The 1D scheme is composite
/// Gauss-Legendre on uniform panels.
class QuadratureGrid {
 public:
  enum class Scheme { radial_angular, uniform_1d, rays };

  static QuadratureGrid radial_angular(const QuadratureOrders& o = {}) {
    QuadratureGrid g;
    g.scheme_ = Scheme::radial_angular;
    g.dim_ = Dimensionality::three_d;
    const auto [tx, tw] = gauss_legendre(o.radial);
    for (int i = 0; i < o.radial; ++i) {
      const double t = 0.5 * (tx[i] + 1.0);
      const double r = o.scale * t / (1.0 - t);
      const double dr = 0.5 * tw[i] * o.scale / ((1.0 - t) * (1.0 - t));
      g.radial_.push_back({r, 4.0 * std::numbers::pi * r * r * dr});
    }
    const auto dirs = directions(o.theta, o.phi, {0.0, 0.0, 1.0});
    for (const auto& [rr, rw] : g.radial_)
      for (const auto& d : dirs) g.nodes_.push_back({d.position * rr, rw * d.weight / (4.0 * std::numbers::pi)});
    return g;
  }

  static QuadratureGrid uniform_1d(double lo, double hi, int panels, int order = 8) {
    if (!(hi > lo) || panels < 1) throw ValidationError("invalid 1d quadrature range");
    QuadratureGrid g;
    g.scheme_ = Scheme::uniform_1d;
    g.dim_ = Dimensionality::one_d_softened;
    const auto [x, w] = gauss_legendre(order);
    const double width = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      const double a = lo + p * width;
      for (int k = 0; k < order; ++k) g.nodes_.push_back({{a + 0.5 * width * (x[k] + 1.0), 0.0, 0.0}, 0.5 * width * w[k]});
    }
    return g;
  }

  /// Default grid for a space: radial-angular in 3D, [-40, 40] in 1D with a
  /// panel edge at the origin.
  static QuadratureGrid for_dimensionality(Dimensionality d) {
    return d == Dimensionality::three_d ? radial_angular() : uniform_1d(-40.0, 40.0, 320, 8);
  }

  /// Grid over the tabulated density's support with panels on the table nodes.
  static QuadratureGrid for_density(const DensityModel& rho) {
    if (rho.family() == DensityFamily::tabulated_1d)
      return uniform_1d(rho.table_origin(), rho.table_end(), static_cast<int>(rho.table().size() - 1), 8);
    return for_dimensionality(rho.dimensionality());
  }

  /// Ray quadrature about `center`, restricted to the origin-centred ball
  /// (3D) or interval (1D) of radius `limit`. Each ray is split at its
  /// closest approach to the origin so the nuclear cusp sits on a panel edge.
  static QuadratureGrid rays_in_ball(Dimensionality dim, const Vec3& center, double limit,
                                     const QuadratureOrders& o = {}) {
    QuadratureGrid g;
    g.scheme_ = Scheme::rays;
    g.dim_ = dim;
    const auto [x, w] = gauss_legendre(o.radial);
    auto segment = [&](const Vec3& dir, double a, double b, double dir_weight, bool radial_jacobian) {
      if (!(b > a)) return;
      for (int k = 0; k < o.radial; ++k) {
        const double t = a + 0.5 * (b - a) * (x[k] + 1.0);
        const double jac = radial_jacobian ? t * t : 1.0;
        g.nodes_.push_back({center + dir * t, dir_weight * 0.5 * (b - a) * w[k] * jac});
      }
    };
    if (dim == Dimensionality::one_d_softened) {
      const double c = center.x;
      // split at the origin for the cusp
      for (double sign : {1.0, -1.0}) {
        const double end = sign > 0 ? limit - c : limit + c;
        const double split = -sign * c;
        if (split > 0.0 && split < end) {
          segment({sign, 0.0, 0.0}, 0.0, split, 1.0, false);
          segment({sign, 0.0, 0.0}, split, end, 1.0, false);
        } else {
          segment({sign, 0.0, 0.0}, 0.0, end, 1.0, false);
        }
      }
      return g;
    }
    const double cn = norm(center);
    const Vec3 axis = cn > 0.0 ? center * (-1.0 / cn) : Vec3{0.0, 0.0, 1.0};
    for (const auto& d : directions(o.theta, o.phi, axis)) {
      const double b = dot(center, d.position);
      const double disc = b * b - (cn * cn - limit * limit);
      if (disc <= 0.0) continue;
      const double end = -b + std::sqrt(disc);
      const double split = -b;
      if (split > 0.0 && split < end) {
        segment(d.position, 0.0, split, d.weight, true);
        segment(d.position, split, end, d.weight, true);
      } else {
        segment(d.position, 0.0, end, d.weight, true);
      }
    }
    return g;
  }

  /// Unbounded ray quadrature about `center` (3D only).
  static QuadratureGrid rays_about(const Vec3& center, const QuadratureOrders& o = {}) {
    QuadratureGrid g;
    g.scheme_ = Scheme::rays;
    g.dim_ = Dimensionality::three_d;
    const auto [x, w] = gauss_legendre(o.radial);
    const double cn = norm(center);
    const Vec3 axis = cn > 0.0 ? center * (-1.0 / cn) : Vec3{0.0, 0.0, 1.0};
    for (const auto& d : directions(o.theta, o.phi, axis)) {
      const double split = -dot(center, d.position);
      double start = 0.0;
      if (split > 0.0) {
        for (int k = 0; k < o.radial; ++k) {
          const double t = 0.5 * split * (x[k] + 1.0);
          g.nodes_.push_back({center + d.position * t, d.weight * 0.5 * split * w[k] * t * t});
        }
        start = split;
      }
      for (int k = 0; k < o.radial; ++k) {
        const double u = 0.5 * (x[k] + 1.0);
        const double t = start + o.scale * u / (1.0 - u);
        const double dt = 0.5 * w[k] * o.scale / ((1.0 - u) * (1.0 - u));
        g.nodes_.push_back({center + d.position * t, d.weight * dt * t * t});
      }
    }
    return g;
  }

  Scheme scheme() const { return scheme_; }
  Dimensionality dimensionality() const { return dim_; }
  const std::vector<QuadratureNode>& nodes() const { return nodes_; }

  /// (r, 4 pi r^2 dr) pairs of the radial-angular scheme.
  const std::vector<std::pair<double, double>>& radial_nodes() const { return radial_; }

  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (const auto& n : nodes_) acc += n.weight * f(n.position);
    return acc;
  }

  /// Integrates a spherically symmetric integrand given as a function of |r|.
  template <class F>
  double integrate_radial(F&& f) const {
    if (scheme_ != Scheme::radial_angular) return integrate([&](const Vec3& r) { return f(norm(r)); });
    double acc = 0.0;
    for (const auto& [r, w] : radial_) acc += w * f(r);
    return acc;
  }

 private:
  /// Product angular rule around `axis`, weights summing to 4 pi.
  static std::vector<QuadratureNode> directions(int n_theta, int n_phi, const Vec3& axis) {
    const auto [ct, wt] = gauss_legendre(n_theta);
    // orthonormal frame (e1, e2, axis)
    const Vec3 helper = std::abs(axis.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    Vec3 e1 = helper - axis * dot(helper, axis);
    e1 *= 1.0 / norm(e1);
    const Vec3 e2{axis.y * e1.z - axis.z * e1.y, axis.z * e1.x - axis.x * e1.z, axis.x * e1.y - axis.y * e1.x};
    std::vector<QuadratureNode> out;
    for (int i = 0; i < n_theta; ++i) {
      const double sn = std::sqrt(1.0 - ct[i] * ct[i]);
      for (int j = 0; j < n_phi; ++j) {
        const double phi = 2.0 * std::numbers::pi * (j + 0.5) / n_phi;
        const Vec3 d = e1 * (sn * std::cos(phi)) + e2 * (sn * std::sin(phi)) + axis * ct[i];
        out.push_back({d, wt[i] * 2.0 * std::numbers::pi / n_phi});
      }
    }
    return out;
  }

  Scheme scheme_ = Scheme::radial_angular;
  Dimensionality dim_ = Dimensionality::three_d;
  std::vector<QuadratureNode> nodes_;
  std::vector<std::pair<double, double>> radial_;
};

inline void require_same_dimensionality(Dimensionality a, Dimensionality b, const char* what) {
  if (a != b) throw ValidationError(std::string("dimensionality mismatch: ") + what);
}

/// Integral of rho over the grid (normalization check).
inline double integrate_density(const DensityModel& rho, const QuadratureGrid& grid) {
  require_same_dimensionality(rho.dimensionality(), grid.dimensionality(), "density vs grid");
  if (rho.is_exponential() && rho.dimensionality() == Dimensionality::three_d)
    return grid.integrate_radial([&](double r) { return rho.radial_value(r); });
  return grid.integrate([&](const Vec3& r) { return rho.value(r); });
}

/// Integral of v(r) rho(r); deterministic quadrature.
inline double external_energy(const DensityModel& rho, const ExternalPotential& v,
                              const QuadratureGrid& grid) {
  require_same_dimensionality(rho.dimensionality(), grid.dimensionality(), "density vs grid");
  if (v.kind == PotentialKind::none) return 0.0;
  const bool wants_3d = v.kind == PotentialKind::coulomb_nucleus;
  if (wants_3d != (rho.dimensionality() == Dimensionality::three_d))
    throw ValidationError("dimensionality mismatch: external potential vs density");
  return grid.integrate([&](const Vec3& r) { return v(r) * rho.value(r); });
}

}  // namespace llcs
