#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "llcs/ansatz.hpp"
#include "llcs/functionals.hpp"
#include "llcs/quadrature.hpp"
#include "llcs/rng.hpp"

namespace llcs {

// ---------------------------------------------------------------------------
// Hydrogenic product wavefunction psi = prod_i phi(r_i), phi = sqrt(z^3/pi) e^(-z r)

struct ProductWavefunction {
  int electrons = 2;
  double zeta = 1.0;

  double orbital(double r) const { return std::sqrt(zeta * zeta * zeta / std::numbers::pi) * std::exp(-zeta * r); }
  double orbital(const Vec3& r) const { return orbital(norm(r)); }

  double value(const std::vector<Vec3>& positions) const {
    double v = 1.0;
    for (const auto& p : positions) v *= orbital(p);
    return v;
  }

  /// rho_psi(r) = N |phi(r)|^2 (identical orbitals).
  double density(const Vec3& r) const {
    const double o = orbital(r);
    return electrons * o * o;
  }

  void validate() const {
    if (electrons < 1) throw ValidationError("product wavefunction needs N >= 1");
    if (!(zeta > 0.0)) throw ValidationError("product wavefunction needs zeta > 0");
  }
};

struct DirectExpectation {
  double kinetic = 0.0;
  double repulsion = 0.0;
  double norm = 0.0;  ///< int |psi|^2
};

namespace detail {

// Radial integrals on a uniform trapezoid mesh out to 60/zeta. Deliberately
// unrelated to the Gauss-Legendre grids the estimators use.
struct RadialMesh {
  std::vector<double> r;
  double h = 0.0;
  explicit RadialMesh(double zeta, std::size_t n = 60000) : r(n + 1), h(60.0 / zeta / static_cast<double>(n)) {
    for (std::size_t i = 0; i <= n; ++i) r[i] = h * static_cast<double>(i);
  }
  template <class F>
  double integrate(F&& f) const {
    double acc = 0.5 * (f(r.front()) + f(r.back()));
    for (std::size_t i = 1; i + 1 < r.size(); ++i) acc += f(r[i]);
    return acc * h;
  }
};

}  // namespace detail

/// T and V_ee of a product wavefunction by radial quadrature. T sums
/// (1/2) int |phi'|^2 over particles; V_ee is N(N-1)/2 times the Coulomb
/// integral of two orbital densities, from the multipole (monopole)
/// potential of a spherical charge.
inline DirectExpectation direct_expectation(const ProductWavefunction& psi) {
  psi.validate();
  const detail::RadialMesh mesh(psi.zeta);
  const double four_pi = 4.0 * std::numbers::pi;
  const double d = 1e-6 / psi.zeta;
  DirectExpectation out;
  const double one_norm = mesh.integrate([&](double r) { return four_pi * r * r * psi.orbital(r) * psi.orbital(r); });
  out.norm = std::pow(one_norm, psi.electrons);
  const double t1 = mesh.integrate([&](double r) {
    const double g = (psi.orbital(r + d) - psi.orbital(std::max(0.0, r - d))) / (r + d - std::max(0.0, r - d));
    return 0.5 * four_pi * r * r * g * g;
  });
  out.kinetic = psi.electrons * t1;
  if (psi.electrons > 1) {
    // enclosed charge q(r) and outer potential o(r) = int_r^inf 4 pi s |phi|^2 ds on the mesh
    const auto& r = mesh.r;
    const std::size_t n = r.size();
    std::vector<double> dens(n), q(n, 0.0), o(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) dens[i] = psi.orbital(r[i]) * psi.orbital(r[i]);
    for (std::size_t i = 1; i < n; ++i)
      q[i] = q[i - 1] + 0.5 * mesh.h * four_pi * (dens[i - 1] * r[i - 1] * r[i - 1] + dens[i] * r[i] * r[i]);
    for (std::size_t i = n - 1; i-- > 0;)
      o[i] = o[i + 1] + 0.5 * mesh.h * four_pi * (dens[i] * r[i] + dens[i + 1] * r[i + 1]);
    double j = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double v = q[i] / r[i] + o[i];
      const double w = (i + 1 == n) ? 0.5 : 1.0;
      j += w * four_pi * r[i] * r[i] * dens[i] * v;
    }
    j *= mesh.h;
    out.repulsion = 0.5 * psi.electrons * (psi.electrons - 1) * j;
  }
  return out;
}

/// f(r2..rN | r) = N |psi(r, r2..rN)|^2 / rho(r) for the product form.
class ProductConditional {
 public:
  ProductConditional(ProductWavefunction psi, const Vec3& r) : psi_(psi), r_(r), rho_r_(psi.density(r)) {
    if (!(rho_r_ >= 1e-12)) throw ValidationError("conditional undefined: rho(r) below 1e-12");
  }

  double operator()(const std::vector<Vec3>& satellites) const {
    std::vector<Vec3> all{r_};
    all.insert(all.end(), satellites.begin(), satellites.end());
    const double v = psi_.value(all);
    return psi_.electrons * v * v / rho_r_;
  }

  const Vec3& point() const { return r_; }

 private:
  ProductWavefunction psi_;
  Vec3 r_;
  double rho_r_;
};

inline ProductConditional extract_f(const ProductWavefunction& psi, const Vec3& r) { return {psi, r}; }

struct DecompositionReport {
  std::string form;
  double kinetic = 0.0;    ///< direct T
  double repulsion = 0.0;  ///< direct V_ee
  double lhs = 0.0;        ///< T + V_ee
  double weizsacker = 0.0;
  double fisher = 0.0;
  double coulomb_unscaled = 0.0;  ///< int rho(r) int f k, before the prefactor
  double rhs_half = 0.0;
  double rhs_full = 0.0;
  double residual_half = 0.0;  ///< lhs - rhs_half
  double residual_full = 0.0;  ///< lhs - rhs_full
  double tolerance = 0.0;
  /// Grid form only: residual of the Hellinger discretization, exact up to rounding.
  std::optional<double> exact_residual;

  double residual(CoulombPrefactor p) const { return p == CoulombPrefactor::half ? residual_half : residual_full; }
  bool passed(CoulombPrefactor p = CoulombPrefactor::half) const { return std::abs(residual(p)) <= tolerance; }
};

/// T + V_ee computed directly against W + Fisher + prefactor * Coulomb with f
/// extracted from psi, for the N = 2 product form. Fisher differentiates the
/// extracted f in r by central differences on a reduced grid; Coulomb
/// integrates f k about each r with rays that absorb the singularity.
inline DecompositionReport verify_decomposition(const ProductWavefunction& psi, double tolerance = 1e-3) {
  psi.validate();
  if (psi.electrons != 2) throw ValidationError("product decomposition check is implemented for N = 2");
  DecompositionReport rep;
  rep.form = "product";
  rep.tolerance = tolerance;
  const auto direct = direct_expectation(psi);
  rep.kinetic = direct.kinetic;
  rep.repulsion = direct.repulsion;
  rep.lhs = direct.kinetic + direct.repulsion;

  const QuadratureGrid outer = QuadratureGrid::radial_angular({96, 1, 1, 1.0 / psi.zeta});
  const double d = 1e-5 / psi.zeta;

  // Weizsacker of rho_psi with a finite-difference radial derivative
  rep.weizsacker = outer.integrate_radial([&](double r) {
    const double p = psi.density({0.0, 0.0, r});
    const double g = (psi.density({0.0, 0.0, r + d}) - psi.density({0.0, 0.0, std::max(0.0, r - d)})) /
                     (r + d - std::max(0.0, r - d));
    return p > 0.0 ? 0.125 * g * g / p : 0.0;
  });

  // Fisher: (1/8) int rho(r) int |grad_r f|^2 / f
  {
    const QuadratureGrid outer_small = QuadratureGrid::radial_angular({24, 2, 2, 1.0 / psi.zeta});
    const QuadratureGrid inner = QuadratureGrid::radial_angular({32, 4, 4, 1.0 / psi.zeta});
    double acc = 0.0;
    for (const auto& node : outer_small.nodes()) {
      const Vec3 r = node.position;
      const double rho_r = psi.density(r);
      if (rho_r < 1e-12) continue;
      const ProductConditional f0 = extract_f(psi, r);
      double in = 0.0;
      for (const auto& s : inner.nodes()) {
        const double fv = f0({s.position});
        if (!(fv > 0.0)) continue;
        double g2 = 0.0;
        for (int axis = 0; axis < 3; ++axis) {
          Vec3 e{};
          (axis == 0 ? e.x : axis == 1 ? e.y : e.z) = d;
          const double gp = extract_f(psi, r + e)({s.position});
          const double gm = extract_f(psi, r - e)({s.position});
          const double g = (gp - gm) / (2.0 * d);
          g2 += g * g;
        }
        in += s.weight * g2 / fv;
      }
      acc += node.weight * rho_r * in;
    }
    rep.fisher = 0.125 * acc;
  }

  // Coulomb: int rho(r) int f(r'|r) / |r - r'|; spherical symmetry puts r on the z axis
  {
    const QuadratureOrders ray_orders{64, 48, 1, 1.0 / psi.zeta};
    rep.coulomb_unscaled = outer.integrate_radial([&](double r) {
      const Vec3 c{0.0, 0.0, r};
      const double rho_r = psi.density(c);
      if (rho_r < 1e-12) return 0.0;
      const ProductConditional f = extract_f(psi, c);
      const auto rays = QuadratureGrid::rays_about(c, ray_orders);
      double in = 0.0;
      for (const auto& s : rays.nodes()) {
        const double dist = norm(s.position - c);
        if (dist > 0.0) in += s.weight * f({s.position}) / dist;
      }
      return rho_r * in;
    });
  }
  rep.rhs_half = rep.weizsacker + rep.fisher + prefactor_value(CoulombPrefactor::half, 2) * rep.coulomb_unscaled;
  rep.rhs_full = rep.weizsacker + rep.fisher + prefactor_value(CoulombPrefactor::full, 2) * rep.coulomb_unscaled;
  rep.residual_half = rep.lhs - rep.rhs_half;
  rep.residual_full = rep.lhs - rep.rhs_full;
  return rep;
}

// ---------------------------------------------------------------------------
// Two particles on a 1D grid

/// M interior nodes x_i = -L/2 + (i+1) h, h = L/(M+1), hard walls at +-L/2,
/// softened nuclear attraction -Z/sqrt(x^2 + a^2) and pair kernel
/// 1/sqrt(dx^2 + a^2).
class GridSystem1D {
 public:
  GridSystem1D(int points, double length, double softening = 1.0, double charge = 2.0)
      : m_(points), length_(length), a_(softening), z_(charge) {
    if (points < 3 || points > 64) throw ValidationError("grid system needs 3 <= M <= 64");
    if (!(length > 0.0) || !(softening > 0.0)) throw ValidationError("grid length and softening must be > 0");
  }

  int points() const { return m_; }
  double length() const { return length_; }
  double spacing() const { return length_ / (m_ + 1); }
  double softening() const { return a_; }
  double charge() const { return z_; }
  double x(int i) const { return -0.5 * length_ + (i + 1) * spacing(); }
  double potential(int i) const { return -z_ / std::sqrt(x(i) * x(i) + a_ * a_); }
  double kernel(int i, int j) const {
    const double dx = x(i) - x(j);
    return 1.0 / std::sqrt(dx * dx + a_ * a_);
  }

  /// Uniform density with sum rho_i h = 2.
  std::vector<double> uniform_density() const { return std::vector<double>(m_, 2.0 / (m_ * spacing())); }

  /// The grid density as a tabulated continuum density (zero at the walls).
  DensityModel tabulated_density(const std::vector<double>& rho) const {
    std::vector<double> v{0.0};
    v.insert(v.end(), rho.begin(), rho.end());
    v.push_back(0.0);
    return DensityModel::tabulated_1d(2, -0.5 * length_, spacing(), v);
  }

  /// Continuum space whose satellite interval is the grid box.
  SpaceSpec continuum_space() const { return SpaceSpec(Dimensionality::one_d_softened, 2, length_, a_); }

 private:
  int m_;
  double length_;
  double a_;
  double z_;
};

enum class Exchange { symmetric, antisymmetric };

/// psi(x_i, x_j) on the grid, normalized as sum psi^2 h^2 = 1.
struct GridWavefunction {
  Eigen::MatrixXd psi;
  double energy = 0.0;  ///< eigenvalue of the grid Hamiltonian
};

struct GridExpectation {
  double kinetic = 0.0;
  double repulsion = 0.0;
  double external = 0.0;
};

/// Three-point kinetic energy with the walls, pair repulsion and external energy.
inline GridExpectation grid_expectation(const GridSystem1D& sys, const Eigen::MatrixXd& psi) {
  const int m = sys.points();
  const double h = sys.spacing();
  GridExpectation e;
  double t = 0.0;
  for (int i = -1; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double a = i >= 0 ? psi(i, j) : 0.0;
      const double b = i + 1 < m ? psi(i + 1, j) : 0.0;
      const double c = i >= 0 ? psi(j, i) : 0.0;
      const double d = i + 1 < m ? psi(j, i + 1) : 0.0;
      t += (b - a) * (b - a) + (d - c) * (d - c);
    }
  }
  e.kinetic = 0.5 * t;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double p = psi(i, j) * psi(i, j) * h * h;
      e.repulsion += p * sys.kernel(i, j);
      e.external += p * (sys.potential(i) + sys.potential(j));
    }
  return e;
}

/// Lowest eigenstate of the two-particle grid Hamiltonian in the given
/// exchange sector, by dense diagonalization of the sector block.
inline GridWavefunction exact_ground_state(const GridSystem1D& sys, Exchange sector) {
  const int m = sys.points();
  const int n = m * m;
  const double h = sys.spacing();
  const double t = 0.5 / (h * h);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  auto idx = [m](int i, int j) { return i * m + j; };
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const int k = idx(i, j);
      H(k, k) = 4.0 * t + sys.potential(i) + sys.potential(j) + sys.kernel(i, j);
      if (i + 1 < m) H(k, idx(i + 1, j)) = H(idx(i + 1, j), k) = -t;
      if (j + 1 < m) H(k, idx(i, j + 1)) = H(idx(i, j + 1), k) = -t;
    }
  std::vector<Eigen::VectorXd> basis;
  const double s = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < m; ++i) {
    if (sector == Exchange::symmetric) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
      v(idx(i, i)) = 1.0;
      basis.push_back(v);
    }
    for (int j = i + 1; j < m; ++j) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
      v(idx(i, j)) = s;
      v(idx(j, i)) = sector == Exchange::symmetric ? s : -s;
      basis.push_back(v);
    }
  }
  Eigen::MatrixXd B(n, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t c = 0; c < basis.size(); ++c) B.col(static_cast<Eigen::Index>(c)) = basis[c];
  const Eigen::MatrixXd Hs = B.transpose() * H * B;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hs);
  if (es.info() != Eigen::Success) throw NumericalError("grid diagonalization failed");
  Eigen::VectorXd v = B * es.eigenvectors().col(0);
  if (v.sum() < 0.0 || (sector == Exchange::antisymmetric && v(idx(0, 1)) < 0.0)) v = -v;
  GridWavefunction out;
  out.energy = es.eigenvalues()(0);
  out.psi.resize(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out.psi(i, j) = v(idx(i, j)) / h;
  return out;
}

/// rho_i = 2 sum_j psi_ij^2 h.
inline std::vector<double> grid_density(const GridSystem1D& sys, const Eigen::MatrixXd& psi) {
  const double h = sys.spacing();
  std::vector<double> rho(sys.points(), 0.0);
  for (int i = 0; i < sys.points(); ++i) rho[i] = 2.0 * psi.row(i).squaredNorm() * h;
  return rho;
}

/// Conditional table p_ij = f(x_j | x_i) h = 2 psi_ij^2 h^2 / (rho_i h); each
/// row sums to one.
inline Eigen::MatrixXd extract_f(const GridSystem1D& sys, const Eigen::MatrixXd& psi) {
  const auto rho = grid_density(sys, psi);
  const double h = sys.spacing();
  Eigen::MatrixXd p(sys.points(), sys.points());
  for (int i = 0; i < sys.points(); ++i) {
    if (!(rho[i] >= 1e-12)) throw ValidationError("conditional undefined: rho(x_" + std::to_string(i) + ") below 1e-12");
    for (int j = 0; j < sys.points(); ++j) p(i, j) = 2.0 * psi(i, j) * psi(i, j) * h / rho[i];
  }
  return p;
}

/// Joint probabilities P_ij = rho_i h p_ij / 2 of a conditional table.
inline Eigen::MatrixXd joint_from_conditional(const GridSystem1D& sys, const std::vector<double>& rho,
                                              const Eigen::MatrixXd& p) {
  Eigen::MatrixXd P = p;
  for (int i = 0; i < sys.points(); ++i) P.row(i) *= 0.5 * rho[i] * sys.spacing();
  return P;
}

inline Eigen::MatrixXd conditional_from_joint(const GridSystem1D& sys, const std::vector<double>& rho,
                                              const Eigen::MatrixXd& P) {
  Eigen::MatrixXd p = P;
  for (int i = 0; i < sys.points(); ++i) p.row(i) /= 0.5 * rho[i] * sys.spacing();
  return p;
}

// Discrete functionals. The gradient pieces use the Hellinger form
//   W      = (1/2) sum_i (sqrt(rho_{i+1}) - sqrt(rho_i))^2 / h        (walls included)
//   Fisher = sum_i sqrt(rho_i rho_{i+1}) / h * (1 - sum_j sqrt(p_{i+1,j} p_ij))
// for which W + Fisher equals the three-point kinetic energy of any
// exchange-symmetric psi. Coulomb = (1/2) sum_i rho_i h sum_j p_ij k_ij.

struct GridGamma {
  double fisher = 0.0;
  double coulomb = 0.0;
  double total() const { return fisher + coulomb; }
};

inline double grid_weizsacker(const GridSystem1D& sys, const std::vector<double>& rho) {
  const int m = sys.points();
  double acc = 0.0;
  for (int i = -1; i < m; ++i) {
    const double a = i >= 0 ? std::sqrt(rho[i]) : 0.0;
    const double b = i + 1 < m ? std::sqrt(rho[i + 1]) : 0.0;
    acc += (b - a) * (b - a);
  }
  return 0.5 * acc / sys.spacing();
}

inline GridGamma grid_gamma(const GridSystem1D& sys, const std::vector<double>& rho, const Eigen::MatrixXd& p) {
  const int m = sys.points();
  const double h = sys.spacing();
  GridGamma g;
  for (int i = 0; i + 1 < m; ++i) {
    double bc = 0.0;
    for (int j = 0; j < m; ++j) bc += std::sqrt(p(i + 1, j) * p(i, j));
    g.fisher += std::sqrt(rho[i] * rho[i + 1]) / h * (1.0 - bc);
  }
  for (int i = 0; i < m; ++i) {
    double row = 0.0;
    for (int j = 0; j < m; ++j) row += p(i, j) * sys.kernel(i, j);
    g.coulomb += 0.5 * rho[i] * h * row;
  }
  return g;
}

/// Decomposition check on a grid wavefunction. The reported residuals use
/// central differences of log rho and log f (one-sided at the first and last
/// node); `exact_residual` uses the Hellinger form above.
inline DecompositionReport verify_decomposition(const GridSystem1D& sys, const Eigen::MatrixXd& psi,
                                                double tolerance = 1e-2) {
  const int m = sys.points();
  const double h = sys.spacing();
  DecompositionReport rep;
  rep.form = "grid";
  rep.tolerance = tolerance;
  const auto e = grid_expectation(sys, psi);
  rep.kinetic = e.kinetic;
  rep.repulsion = e.repulsion;
  rep.lhs = e.kinetic + e.repulsion;
  const auto rho = grid_density(sys, psi);
  const Eigen::MatrixXd p = extract_f(sys, psi);

  auto dlog = [&](auto&& value, int i) {
    if (i == 0) return (std::log(value(1)) - std::log(value(0))) / h;
    if (i == m - 1) return (std::log(value(m - 1)) - std::log(value(m - 2))) / h;
    return (std::log(value(i + 1)) - std::log(value(i - 1))) / (2.0 * h);
  };
  double w = 0.0, fisher = 0.0, coulomb = 0.0;
  for (int i = 0; i < m; ++i) {
    const double g = dlog([&](int k) { return rho[k]; }, i);
    w += rho[i] * h * g * g;
    double in = 0.0, c = 0.0;
    for (int j = 0; j < m; ++j) {
      if (!(p(i, j) > 0.0)) continue;
      const double gf = dlog([&](int k) { return p(k, j); }, i);
      in += p(i, j) * gf * gf;
      c += p(i, j) * sys.kernel(i, j);
    }
    fisher += rho[i] * h * in;
    coulomb += rho[i] * h * c;
  }
  rep.weizsacker = 0.125 * w;
  rep.fisher = 0.125 * fisher;
  rep.coulomb_unscaled = coulomb;
  rep.rhs_half = rep.weizsacker + rep.fisher + prefactor_value(CoulombPrefactor::half, 2) * coulomb;
  rep.rhs_full = rep.weizsacker + rep.fisher + prefactor_value(CoulombPrefactor::full, 2) * coulomb;
  rep.residual_half = rep.lhs - rep.rhs_half;
  rep.residual_full = rep.lhs - rep.rhs_full;
  rep.exact_residual = rep.lhs - (grid_weizsacker(sys, rho) + grid_gamma(sys, rho, p).total());
  return rep;
}

/// Conditional table of a continuum ansatz sampled on the grid nodes, with a
/// zero diagonal and rows renormalized.
inline Eigen::MatrixXd table_from_ansatz(const GridSystem1D& sys, const ConditionalAnsatz& ansatz) {
  const int m = sys.points();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    std::vector<double> logs(m, -std::numeric_limits<double>::infinity());
    double top = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      logs[j] = log_f_unnormalized(ansatz, {{sys.x(i), 0, 0}, {{sys.x(j), 0, 0}}});
      top = std::max(top, logs[j]);
    }
    if (!std::isfinite(top)) throw NumericalError("ansatz vanishes on a whole grid row");
    double sum = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      p(i, j) = std::exp(logs[j] - top);
      sum += p(i, j);
    }
    p.row(i) /= sum;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Brute-force inner minimization

struct BruteForceOptions {
  std::size_t restarts = 6;  ///< random starts in addition to the supplied ones
  std::size_t max_iter = 20000;
  double tolerance = 0.05;  ///< allowed Gamma_grid - Gamma* (discretization slack)
  std::uint64_t seed = 1;
};

struct BruteForceReport {
  double gamma_grid = 0.0;
  GridGamma parts;
  double gamma_parametric = 0.0;
  double tolerance = 0.0;
  bool hierarchy_holds = false;
  bool converged = false;  ///< the best run met the stopping rule
  std::size_t runs = 0;
  double max_diagonal = 0.0;
  Eigen::MatrixXd table;
};

namespace detail {

// Projected gradient on u = sqrt(p): rows on the unit sphere, u >= 0, u_ii = 0.
struct ConditionalDescent {
  const GridSystem1D& sys;
  const std::vector<double>& rho;

  double objective(const Eigen::MatrixXd& u) const {
    return grid_gamma(sys, rho, u.cwiseProduct(u)).total();
  }

  Eigen::MatrixXd gradient(const Eigen::MatrixXd& u) const {
    const int m = sys.points();
    const double h = sys.spacing();
    Eigen::MatrixXd g(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double v = rho[i] * h * sys.kernel(i, j) * u(i, j);
        if (i + 1 < m) v -= std::sqrt(rho[i] * rho[i + 1]) / h * u(i + 1, j);
        if (i > 0) v -= std::sqrt(rho[i - 1] * rho[i]) / h * u(i - 1, j);
        g(i, j) = v;
      }
    return g;
  }

  static void project(Eigen::MatrixXd& u, const Eigen::MatrixXd& fallback) {
    for (int i = 0; i < u.rows(); ++i) {
      for (int j = 0; j < u.cols(); ++j) u(i, j) = std::max(0.0, u(i, j));
      u(i, i) = 0.0;
      const double n = u.row(i).norm();
      if (n > 0.0) u.row(i) /= n;
      else u.row(i) = fallback.row(i);
    }
  }

  std::pair<Eigen::MatrixXd, bool> run(Eigen::MatrixXd u, std::size_t max_iter) const {
    project(u, u);
    double f = objective(u);
    double step = 1e-2;
    std::size_t quiet = 0;
    for (std::size_t it = 0; it < max_iter; ++it) {
      const Eigen::MatrixXd g = gradient(u);
      bool moved = false;
      for (int tries = 0; tries < 40; ++tries) {
        Eigen::MatrixXd trial = u - step * g;
        project(trial, u);
        const double ft = objective(trial);
        if (ft < f) {
          quiet = (f - ft <= 1e-13 * (1.0 + std::abs(f))) ? quiet + 1 : 0;
          u = std::move(trial);
          f = ft;
          step *= 1.5;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved || quiet >= 50) return {u, true};
    }
    return {u, false};
  }
};

}  // namespace detail

/// Minimizes the discrete Gamma over all conditional tables (nonnegative,
/// rows summing to one, zero diagonal) at fixed rho, by projected gradient
/// descent on sqrt(p) from the supplied starts and `restarts` random ones.
/// Compares the grid minimum with a parametric value Gamma*.
inline BruteForceReport bruteforce_inner_min(const GridSystem1D& sys, const std::vector<double>& rho,
                                             double gamma_parametric, const BruteForceOptions& opt = {},
                                             const std::vector<Eigen::MatrixXd>& starts = {}) {
  const int m = sys.points();
  if (static_cast<int>(rho.size()) != m) throw ValidationError("density size does not match the grid");
  for (double v : rho)
    if (!(v > 0.0)) throw ValidationError("brute force needs rho > 0 on every node");
  detail::ConditionalDescent descent{sys, rho};
  std::vector<Eigen::MatrixXd> inits;
  for (const auto& s : starts) inits.push_back(s.cwiseMax(0.0).cwiseSqrt());
  Engine rng = make_stream(opt.seed, StreamTag::restart);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t k = 0; k < opt.restarts; ++k) {
    Eigen::MatrixXd u(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) u(i, j) = u01(rng);
    inits.push_back(u);
  }
  if (inits.empty()) throw ValidationError("brute force needs at least one start");
  BruteForceReport rep;
  rep.gamma_parametric = gamma_parametric;
  rep.tolerance = opt.tolerance;
  rep.gamma_grid = std::numeric_limits<double>::infinity();
  for (const auto& init : inits) {
    auto [u, ok] = descent.run(init, opt.max_iter);
    const double f = descent.objective(u);
    ++rep.runs;
    if (f < rep.gamma_grid) {
      rep.gamma_grid = f;
      rep.table = u.cwiseProduct(u);
      rep.converged = ok;
    }
  }
  rep.parts = grid_gamma(sys, rho, rep.table);
  rep.max_diagonal = rep.table.diagonal().cwiseAbs().maxCoeff();
  rep.hierarchy_holds = rep.gamma_grid <= gamma_parametric + opt.tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Density-consistent descent (stationarity check)

/// Symmetric joint table with zero diagonal and row sums `marginal`, scaled
/// from `kernel` by symmetric Sinkhorn iterations.
inline Eigen::MatrixXd symmetric_sinkhorn(Eigen::MatrixXd kernel, const std::vector<double>& marginal,
                                          std::size_t iterations = 5000) {
  const int m = static_cast<int>(kernel.rows());
  kernel.diagonal().setZero();
  Eigen::VectorXd d = Eigen::VectorXd::Ones(m);
  for (std::size_t it = 0; it < iterations; ++it) {
    const Eigen::VectorXd kd = kernel * d;
    for (int i = 0; i < m; ++i) d(i) = std::sqrt(d(i) * marginal[i] / kd(i));
  }
  return d.asDiagonal() * kernel * d.asDiagonal();
}

struct StationarityReport {
  double start = 0.0;
  double end = 0.0;
  double decrease = 0.0;
  double tolerance = 0.0;
  std::size_t iterations = 0;
  bool stationary = false;
  Eigen::MatrixXd joint;
};

/// Steepest descent of the discrete Gamma over symmetric joint tables with
/// zero diagonal and the marginals of rho (the tables that come from an
/// exchange-symmetric psi with density rho). Steps are taken in u = sqrt(P),
/// where the gradient stays finite, and pulled back onto the marginals by
/// symmetric Sinkhorn scaling. Reports how far the objective falls from
/// `joint`.
inline StationarityReport descend_consistent(const GridSystem1D& sys, const std::vector<double>& rho,
                                             const Eigen::MatrixXd& joint, std::size_t max_iter = 2000,
                                             double tolerance = 1e-3) {
  const int m = sys.points();
  const double h = sys.spacing();
  std::vector<double> marginal(m);
  for (int i = 0; i < m; ++i) marginal[i] = 0.5 * rho[i] * h;
  auto objective = [&](const Eigen::MatrixXd& P) {
    return grid_gamma(sys, rho, conditional_from_joint(sys, rho, P)).total();
  };
  // dGamma/du for u = sqrt(P), symmetric pairs moved together
  auto gradient = [&](const Eigen::MatrixXd& u) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      const double c = std::sqrt(2.0 / (rho[i] * h));  // sqrt(p_ij) = c u_ij
      for (int j = 0; j < m; ++j) {
        if (i == j) continue;
        double v = rho[i] * h * sys.kernel(i, j) * c * c * u(i, j);
        if (i + 1 < m) v -= std::sqrt(rho[i] * rho[i + 1]) / h * c * std::sqrt(2.0 / (rho[i + 1] * h)) * u(i + 1, j);
        if (i > 0) v -= std::sqrt(rho[i - 1] * rho[i]) / h * c * std::sqrt(2.0 / (rho[i - 1] * h)) * u(i - 1, j);
        g(i, j) = 0.5 * v;
      }
    }
    return Eigen::MatrixXd(g + g.transpose());
  };
  auto retract = [&](const Eigen::MatrixXd& u) {
    Eigen::MatrixXd P = u.cwiseMax(0.0).cwiseProduct(u.cwiseMax(0.0));
    P = 0.5 * (P + P.transpose());
    return symmetric_sinkhorn(P, marginal, 500);
  };
  StationarityReport rep;
  rep.tolerance = tolerance;
  Eigen::MatrixXd P = joint;
  rep.start = objective(P);
  double f = rep.start;
  double step = 1e-2;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const Eigen::MatrixXd u = P.cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd d = gradient(u);
    bool moved = false;
    for (int tries = 0; tries < 60; ++tries) {
      const Eigen::MatrixXd trial = retract(u - step * d);
      const double ft = objective(trial);
      if (std::isfinite(ft) && ft < f) {
        P = trial;
        f = ft;
        step *= 1.5;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    rep.iterations = it + 1;
    if (!moved) break;
  }
  rep.end = f;
  rep.decrease = rep.start - rep.end;
  rep.stationary = rep.decrease <= tolerance;
  rep.joint = std::move(P);
  return rep;
}

}  // namespace llcs
