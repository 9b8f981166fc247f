#pragma once

// Radial spherical harmonics on S^n in the height coordinate t = x_{n+1}.
//
// Functions that depend only on t are expanded in the orthonormal
// polynomials for the weight (1 - t^2)^{(n-2)/2}; the j-th one is the
// radial eigenfunction of the Laplace-Beltrami operator with eigenvalue
// j(j + n - 1). The Laplacian uses the nonnegative-spectrum convention
// Delta = -div grad, i.e. -(1 - t^2) d^2/dt^2 + n t d/dt on radial fields.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "schro/error.hpp"

namespace schro {

/// Eigenvalue of the Laplace-Beltrami operator on S^n for degree j.
inline double eigenvalue(int n, int j) {
  if (n < 2) throw Error(Errc::InvalidArgument, "sphere dimension must be >= 2");
  if (j < 0) throw Error(Errc::InvalidArgument, "harmonic degree must be >= 0");
  return static_cast<double>(j) * static_cast<double>(j + n - 1);
}

/// Generalized binomial coefficient C(x, k) for real x and integer k >= 0.
inline double generalized_binomial(double x, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r *= (x - k + i) / i;
  return r;
}

/// The zonal harmonic of degree j0 about the north pole, written as the
/// double binomial sum
///
///   sum_{j=0}^{j0} C(j0+(n-2)/2, j) C(j0+(n-2)/2, j0-j)
///                  ((t-1)/2)^{j0-j} ((t+1)/2)^j,
///
/// i.e. the Jacobi polynomial P^{(a,a)}_{j0} with a = (n-2)/2. The sum
/// alternates in sign inside (-1, 1) and loses roughly j0*log10(2) digits,
/// so it is only a reference for low degrees; SphereGrid builds its basis
/// from the three-term recurrence instead.
inline double jacobi_kernel(int n, int j0, double t) {
  if (n < 2) throw Error(Errc::InvalidArgument, "sphere dimension must be >= 2");
  if (j0 < 0) throw Error(Errc::InvalidArgument, "harmonic degree must be >= 0");
  const double top = j0 + 0.5 * (n - 2);
  const double lo = 0.5 * (t - 1.0);
  const double hi = 0.5 * (t + 1.0);
  double sum = 0.0;
  for (int j = 0; j <= j0; ++j) {
    sum += generalized_binomial(top, j) * generalized_binomial(top, j0 - j) *
           std::pow(lo, j0 - j) * std::pow(hi, j);
  }
  return sum;
}

/// Total mass of the weight (1 - t^2)^{(n-2)/2} on [-1, 1], i.e. B(1/2, n/2).
inline double radial_weight_mass(int n) {
  return std::exp(std::lgamma(0.5) + std::lgamma(0.5 * n) - std::lgamma(0.5 * (n + 1)));
}

namespace detail {

// Off-diagonal entries b_j (j >= 1) of the symmetric Jacobi matrix for the
// orthonormal Gegenbauer polynomials with parameter g = (n-1)/2:
//   t p_j = b_{j+1} p_{j+1} + b_j p_{j-1}.
inline double recurrence_offdiag(int n, int j) {
  const double g = 0.5 * (n - 1);
  return std::sqrt(j * (j + 2.0 * g - 1.0) / (4.0 * (j + g) * (j + g - 1.0)));
}

struct PolyEval {
  std::vector<double> p;
  std::vector<double> dp;
};

// Orthonormal polynomials p_0..p_{count-1} and their t-derivatives at t.
inline PolyEval orthonormal_polys(int n, int count, double t) {
  PolyEval out{std::vector<double>(count), std::vector<double>(count)};
  if (count == 0) return out;
  out.p[0] = 1.0 / std::sqrt(radial_weight_mass(n));
  out.dp[0] = 0.0;
  if (count == 1) return out;
  const double b1 = recurrence_offdiag(n, 1);
  out.p[1] = t * out.p[0] / b1;
  out.dp[1] = out.p[0] / b1;
  for (int j = 1; j + 1 < count; ++j) {
    const double bj = recurrence_offdiag(n, j);
    const double bn = recurrence_offdiag(n, j + 1);
    out.p[j + 1] = (t * out.p[j] - bj * out.p[j - 1]) / bn;
    out.dp[j + 1] = (out.p[j] + t * out.dp[j] - bj * out.dp[j - 1]) / bn;
  }
  return out;
}

}  // namespace detail

/// Gauss quadrature for the radial weight plus the orthonormal radial basis
/// sampled at the nodes. Immutable once built; share it through
/// std::shared_ptr<const SphereGrid>.
struct SphereGrid {
  int n = 2;
  int modes = 0;                 ///< N, number of basis functions
  std::vector<double> nodes;     ///< ascending, symmetric about 0
  std::vector<double> weights;
  Eigen::MatrixXd basis;         ///< basis(j, k) = phi_j(t_k), modes x nodes
  Eigen::MatrixXd basis_dt;      ///< d phi_j / dt at t_k
  Eigen::MatrixXd analysis;      ///< basis * diag(weights)
  Eigen::VectorXd eigenvalues;   ///< j (j + n - 1)

  std::size_t node_count() const { return nodes.size(); }

  /// Index of the node mirrored across the equator.
  std::size_t mirror(std::size_t k) const { return nodes.size() - 1 - k; }

  /// Basis values at an arbitrary height t.
  Eigen::VectorXd basis_at(double t) const {
    const auto ev = detail::orthonormal_polys(n, modes, t);
    return Eigen::Map<const Eigen::VectorXd>(ev.p.data(), modes);
  }

  Eigen::VectorXd basis_dt_at(double t) const {
    const auto ev = detail::orthonormal_polys(n, modes, t);
    return Eigen::Map<const Eigen::VectorXd>(ev.dp.data(), modes);
  }
};

using GridPtr = std::shared_ptr<const SphereGrid>;

/// Node count used by build_grid. Integer exponents get enough nodes to
/// integrate phi_i * u^{q-1} exactly for u in the span of the basis;
/// everything else is treated pointwise on 2N nodes.
inline int default_node_count(int modes, std::optional<double> exponent) {
  if (exponent && *exponent == std::floor(*exponent)) {
    const double q = *exponent;
    const int exact = static_cast<int>(std::ceil((q * (modes - 1) + 1.0) / 2.0));
    const int spec_rule = static_cast<int>(std::ceil((q - 1.0) * modes / 2.0)) + 1;
    return std::max({modes + 2, exact, spec_rule});
  }
  return 2 * modes;
}

/// Builds Gauss nodes/weights for (1 - t^2)^{(n-2)/2} dt and the radial basis.
///
/// Nodes start from the eigenvalues of the Jacobi matrix and are polished by
/// Newton iteration on the three-term recurrence. A node that fails to settle
/// raises QuadratureFailure.
inline GridPtr build_grid(int n, int modes, std::optional<double> exponent = std::nullopt,
                          std::optional<int> node_override = std::nullopt) {
  if (n < 2) throw Error(Errc::InvalidArgument, "sphere dimension must be >= 2");
  if (modes < 4) throw Error(Errc::InvalidArgument, "need at least 4 basis modes");
  const int m = node_override ? *node_override : default_node_count(modes, exponent);
  if (m < modes + 2) throw Error(Errc::InvalidArgument, "node count must be >= N + 2");

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd sub(m - 1);
  for (int j = 1; j < m; ++j) sub(j - 1) = detail::recurrence_offdiag(n, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) {
    throw Error(Errc::QuadratureFailure, "Jacobi matrix eigensolve failed");
  }

  std::vector<double> t(m);
  for (int k = 0; k < m; ++k) {
    double x = eig.eigenvalues()(k);
    bool settled = false;
    for (int it = 0; it < 100; ++it) {
      const auto ev = detail::orthonormal_polys(n, m + 1, x);
      const double step = ev.p[m] / ev.dp[m];
      x -= step;
      if (std::abs(step) <= 1e-14) {
        settled = true;
        break;
      }
    }
    if (!settled || !(std::abs(x) < 1.0)) {
      throw Error(Errc::QuadratureFailure,
                  "Newton polish of node " + std::to_string(k) + " did not converge");
    }
    t[k] = x;
  }
  std::sort(t.begin(), t.end());
  // Enforce exact mirror symmetry so reflection is a node permutation.
  for (int k = 0; k < m / 2; ++k) {
    const double s = 0.5 * (t[m - 1 - k] - t[k]);
    t[k] = -s;
    t[m - 1 - k] = s;
  }
  if (m % 2 == 1) t[m / 2] = 0.0;

  auto grid = std::make_shared<SphereGrid>();
  grid->n = n;
  grid->modes = modes;
  grid->nodes = t;
  grid->weights.resize(m);
  grid->basis.resize(modes, m);
  grid->basis_dt.resize(modes, m);
  for (int k = 0; k < m; ++k) {
    const auto ev = detail::orthonormal_polys(n, m, t[k]);
    double christoffel = 0.0;
    for (int j = 0; j < m; ++j) christoffel += ev.p[j] * ev.p[j];
    grid->weights[k] = 1.0 / christoffel;
    for (int j = 0; j < modes; ++j) {
      grid->basis(j, k) = ev.p[j];
      grid->basis_dt(j, k) = ev.dp[j];
    }
  }
  // Christoffel numbers are symmetric in exact arithmetic; keep them so.
  for (int k = 0; k < m / 2; ++k) {
    const double w = 0.5 * (grid->weights[k] + grid->weights[m - 1 - k]);
    grid->weights[k] = w;
    grid->weights[m - 1 - k] = w;
  }
  grid->analysis = grid->basis *
                   Eigen::Map<const Eigen::VectorXd>(grid->weights.data(), m).asDiagonal();
  grid->eigenvalues.resize(modes);
  for (int j = 0; j < modes; ++j) grid->eigenvalues(j) = eigenvalue(n, j);
  return grid;
}

/// One radial function stored as coefficients in the grid's basis.
struct SpectralField {
  GridPtr grid;
  Eigen::VectorXd coeffs;

  SpectralField() = default;
  SpectralField(GridPtr g, Eigen::VectorXd c) : grid(std::move(g)), coeffs(std::move(c)) {
    if (coeffs.size() != grid->modes) {
      throw Error(Errc::LengthMismatch, "coefficient vector length differs from grid modes");
    }
  }

  static SpectralField zero(const GridPtr& g) {
    return {g, Eigen::VectorXd::Zero(g->modes)};
  }

  /// The constant function with the given value.
  static SpectralField constant(const GridPtr& g, double value) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(g->modes);
    c(0) = value * std::sqrt(radial_weight_mass(g->n));
    return {g, std::move(c)};
  }

  /// Basis function phi_j.
  static SpectralField mode(const GridPtr& g, int j) {
    if (j < 0 || j >= g->modes) throw Error(Errc::InvalidArgument, "mode index out of range");
    Eigen::VectorXd c = Eigen::VectorXd::Zero(g->modes);
    c(j) = 1.0;
    return {g, std::move(c)};
  }

  double evaluate(double t) const { return grid->basis_at(t).dot(coeffs); }
};

inline Eigen::VectorXd synthesize(const SpectralField& f) {
  return f.grid->basis.transpose() * f.coeffs;
}

inline SpectralField analyze(const Eigen::VectorXd& values, const GridPtr& grid) {
  if (values.size() != static_cast<Eigen::Index>(grid->node_count())) {
    throw Error(Errc::LengthMismatch, "nodal vector length differs from node count");
  }
  return {grid, grid->analysis * values};
}

inline SpectralField laplacian_apply(const SpectralField& f) {
  return {f.grid, f.grid->eigenvalues.cwiseProduct(f.coeffs)};
}

/// t -> f(-t): flips the sign of odd-degree coefficients.
inline SpectralField reflect(const SpectralField& f) {
  Eigen::VectorXd c = f.coeffs;
  for (Eigen::Index j = 1; j < c.size(); j += 2) c(j) = -c(j);
  return {f.grid, std::move(c)};
}

/// d f / dt at the nodes.
inline Eigen::VectorXd derivative_at_nodes(const SpectralField& f) {
  return f.grid->basis_dt.transpose() * f.coeffs;
}

/// Discrete L2 inner product over S^n in the radial measure.
inline double inner(const SpectralField& a, const SpectralField& b) {
  return a.coeffs.dot(b.coeffs);
}

}  // namespace schro
