#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "schro/error.hpp"
#include "schro/solver.hpp"
#include "schro/spectral_sphere.hpp"
#include "schro/system_algebra.hpp"

namespace schro {

struct DiagnosticsRecord {
  double sync_measure = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;
  double quotient_residual = 0.0;
  double epsilon = 0.0;    ///< signed projection on the kernel direction
  double remainder = 0.0;  ///< norm of what is left after that projection
  std::optional<double> reflection_defect;
};

namespace detail {

inline Eigen::VectorXd quotient_at_nodes(const StateVector& s) {
  const Nodal nv = nodal(s);
  if (!(nv.u1.minCoeff() > 0.0) || !(nv.u2.minCoeff() > 0.0)) {
    throw Error(Errc::PositivityBreach, "v = u1/u2 needs a positive state");
  }
  return nv.u1.cwiseQuotient(nv.u2);
}

}  // namespace detail

/// Relative oscillation (v_max - v_min) / mean(v_max, v_min) of v = u1/u2.
inline double sync_measure(const StateVector& s) {
  const Eigen::VectorXd v = detail::quotient_at_nodes(s);
  const double lo = v.minCoeff();
  const double hi = v.maxCoeff();
  return (hi - lo) / (0.5 * (hi + lo));
}

/// |mean(v) - Lambda| in the strict synchronized regime; the mean is the
/// area average over the sphere.
inline double sync_ratio_check(const StateVector& s, const SystemParams& p) {
  const RegimeReport reg = classify_regime(p);
  if (reg.verdict != Verdict::SynchronizedOnly_strict) {
    throw Error(Errc::WrongRegime, "synchronization ratio is only forced in the strict regime");
  }
  const SphereGrid& g = *s.grid();
  const Eigen::VectorXd v = detail::quotient_at_nodes(s);
  const Eigen::Map<const Eigen::VectorXd> w(g.weights.data(), static_cast<Eigen::Index>(g.weights.size()));
  const double mean = w.dot(v) / w.sum();
  return std::abs(mean - *reg.sync_ratio);
}

/// Sup over the nodes of the defect in the equation satisfied by v = u1/u2:
///   Delta v = (a11-a21) u1^{q-2} v + (a12-a22) u2^{q-2} v + (lambda2-lambda1) v
///             + 2 <grad v, grad ln u2>,
/// with the gradient pairing (1 - t^2) v' (ln u2)'. Delta v comes from the
/// product rule applied to the spectral Laplacians of u1 and u2:
///   Delta v = Delta u1 / u2 - u1 Delta u2 / u2^2 + 2 (1 - t^2) v' u2' / u2.
/// Re-projecting v itself would multiply its roundoff by lambda_j ~ N^2.
inline double quotient_residual(const StateVector& s, const SystemParams& p) {
  const GridPtr& g = s.grid();
  const detail::Nodal nv = detail::nodal(s);
  const Eigen::VectorXd v = detail::quotient_at_nodes(s);
  const Eigen::VectorXd du1 = derivative_at_nodes(s.u1);
  const Eigen::VectorXd du2 = derivative_at_nodes(s.u2);
  const Eigen::VectorXd lap1 = synthesize(laplacian_apply(s.u1));
  const Eigen::VectorXd lap2 = synthesize(laplacian_apply(s.u2));
  double worst = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double t = g->nodes[static_cast<std::size_t>(k)];
    const double u1 = nv.u1(k);
    const double u2 = nv.u2(k);
    const double dv = (du1(k) * u2 - u1 * du2(k)) / (u2 * u2);
    const double dln = du2(k) / u2;
    const double lap_v = lap1(k) / u2 - u1 * lap2(k) / (u2 * u2) + 2.0 * (1.0 - t * t) * dv * dln;
    const double rhs = (p.a11 - p.a21) * std::pow(u1, p.q - 2.0) * v(k) +
                       (p.a12 - p.a22) * std::pow(u2, p.q - 2.0) * v(k) + (p.lambda2 - p.lambda1) * v(k) +
                       2.0 * (1.0 - t * t) * dv * dln;
    worst = std::max(worst, std::abs(lap_v - rhs));
  }
  return worst;
}

/// ||reflect(u1) - u2|| at the nodes.
inline double reflection_defect(const StateVector& s) {
  return (synthesize(reflect(s.u1)) - synthesize(s.u2)).cwiseAbs().maxCoeff();
}

/// Unit kernel direction (c1 phi, c2 phi) in stacked coefficient space.
inline Eigen::VectorXd kernel_direction(const GridPtr& g, int mode, const Eigen::Vector2d& c) {
  Eigen::VectorXd k = Eigen::VectorXd::Zero(2 * g->modes);
  k(mode) = c(0);
  k(g->modes + mode) = c(1);
  return k / k.norm();
}

struct KernelProjection {
  double epsilon = 0.0;
  double remainder = 0.0;
};

/// Splits state - base into its component along `direction` (unit) and the rest.
inline KernelProjection project_on_kernel(const StateVector& s, const StateVector& base,
                                          const Eigen::VectorXd& direction) {
  const Eigen::VectorXd d = s.stacked() - base.stacked();
  const double eps = d.dot(direction);
  return {eps, (d - eps * direction).norm()};
}

struct KernelFit {
  std::vector<double> epsilon;
  std::vector<double> remainder;

  /// remainder / |epsilon| at the point with the smallest |epsilon|.
  double ratio_at_smallest() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < epsilon.size(); ++i) {
      if (std::abs(epsilon[i]) < std::abs(epsilon[best])) best = i;
    }
    return remainder[best] / std::abs(epsilon[best]);
  }

  /// remainder/|epsilon| over the three smallest-|epsilon| points, ordered by
  /// increasing |epsilon|.
  std::vector<double> smallest_ratios() const {
    std::vector<std::size_t> idx(epsilon.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return std::abs(epsilon[a]) < std::abs(epsilon[b]); });
    std::vector<double> out;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, idx.size()); ++i) {
      out.push_back(remainder[idx[i]] / std::abs(epsilon[idx[i]]));
    }
    return out;
  }
};

}  // namespace schro
