#pragma once

// Algebra of the constant-coefficient system
//
//   Delta u1 + lambda1 u1 = a11 u1^{q-1} + a12 u2^{q-2} u1
//   Delta u2 + lambda2 u2 = a21 u1^{q-2} u2 + a22 u2^{q-1}
//
// with u1, u2 > 0: constant solutions, the linearization at them, the
// diagonalized nonlinearity, and the sign classifier based on the quotient
// v = u1 / u2.

#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "schro/error.hpp"

namespace schro {

struct SystemParams {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double a11 = 0.0;
  double a12 = 0.0;
  double a21 = 0.0;
  double a22 = 0.0;
  double q = 4.0;

  SystemParams(double l1, double l2, double c11, double c12, double c21, double c22, double exponent)
      : lambda1(l1), lambda2(l2), a11(c11), a12(c12), a21(c21), a22(c22), q(exponent) {
    if (!(q > 2.0)) throw Error(Errc::InvalidArgument, "exponent q must exceed 2");
  }

  /// Parameters with u1 <-> u2 relabeled.
  SystemParams swapped() const { return {lambda2, lambda1, a22, a21, a12, a11, q}; }
};

struct ConstantPair {
  double u1 = 0.0;
  double u2 = 0.0;
};

/// Linearization data at a positive constant solution. beta1 is the "+sqrt(D)"
/// root; the rows of P are the matching left eigenvectors of A.
struct ConstantState {
  double u1bar = 0.0;
  double u2bar = 0.0;
  Eigen::Matrix2d A;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double D = 0.0;
  Eigen::Matrix2d P;
  Eigen::Matrix2d Pinv;
};

/// The unique constant solution of the algebraic system
///   a11 u1^{q-2} + a12 u2^{q-2} = lambda1,  a21 u1^{q-2} + a22 u2^{q-2} = lambda2.
inline ConstantPair constant_solution(const SystemParams& p) {
  const double det = p.a11 * p.a22 - p.a21 * p.a12;
  if (det == 0.0) throw Error(Errc::SingularCoupling, "a11 a22 - a21 a12 vanishes");
  const double r1 = (p.lambda1 * p.a22 - p.lambda2 * p.a12) / det;
  const double r2 = (p.lambda2 * p.a11 - p.lambda1 * p.a21) / det;
  if (!(r1 > 0.0) || !(r2 > 0.0)) {
    std::ostringstream os;
    os << "radicands (" << r1 << ", " << r2 << ") must be positive";
    throw Error(Errc::NonpositiveRadicand, os.str());
  }
  const double e = 1.0 / (p.q - 2.0);
  return {std::pow(r1, e), std::pow(r2, e)};
}

namespace detail {

// Left eigenvector r (r A = beta r) of a 2x2 matrix, unit norm, first
// nonzero entry positive.
inline Eigen::RowVector2d left_eigenvector(const Eigen::Matrix2d& A, double beta) {
  Eigen::RowVector2d a(A(1, 0), beta - A(0, 0));
  Eigen::RowVector2d b(beta - A(1, 1), A(0, 1));
  Eigen::RowVector2d r = a.norm() >= b.norm() ? a : b;
  r.normalize();
  if (r(0) < 0.0 || (r(0) == 0.0 && r(1) < 0.0)) r = -r;
  return r;
}

}  // namespace detail

/// Builds A, its eigenvalues and diagonalizer at the constant solution.
/// Throws DegenerateSpectrum unless A has two distinct nonzero real eigenvalues.
inline ConstantState linearization(const SystemParams& p, const ConstantPair& ubar) {
  const double s1 = std::pow(ubar.u1, p.q - 2.0);
  const double s2 = std::pow(ubar.u2, p.q - 2.0);
  ConstantState cs;
  cs.u1bar = ubar.u1;
  cs.u2bar = ubar.u2;
  cs.A << p.a11 * s1, p.a12 * std::pow(ubar.u2, p.q - 3.0) * ubar.u1,
      p.a21 * std::pow(ubar.u1, p.q - 3.0) * ubar.u2, p.a22 * s2;
  cs.D = (p.a11 * s1 - p.a22 * s2) * (p.a11 * s1 - p.a22 * s2) + 4.0 * p.a12 * p.a21 * s1 * s2;
  if (!(cs.D > 0.0)) {
    throw Error(Errc::DegenerateSpectrum, "discriminant D <= 0: eigenvalues not distinct and real");
  }
  const double tr = p.a11 * s1 + p.a22 * s2;
  const double root = std::sqrt(cs.D);
  cs.beta1 = 0.5 * (tr + root);
  cs.beta2 = 0.5 * (tr - root);
  const double scale = std::abs(tr) + root;
  if (std::abs(cs.beta1) <= 1e-14 * scale || std::abs(cs.beta2) <= 1e-14 * scale) {
    throw Error(Errc::DegenerateSpectrum, "A has a zero eigenvalue");
  }

  const bool symmetric =
      p.a11 == p.a22 && p.a12 == p.a21 && p.lambda1 == p.lambda2 && p.a12 != 0.0;
  if (symmetric) {
    // beta1 = ubar^{q-2}(a + |b|): eigenvector (1, 1) when b > 0.
    if (p.a12 > 0.0) {
      cs.P << 1.0, 1.0, 1.0, -1.0;
    } else {
      cs.P << 1.0, -1.0, 1.0, 1.0;
    }
  } else {
    cs.P.row(0) = detail::left_eigenvector(cs.A, cs.beta1);
    cs.P.row(1) = detail::left_eigenvector(cs.A, cs.beta2);
  }
  cs.Pinv = cs.P.inverse();
  return cs;
}

inline ConstantState linearization(const SystemParams& p) {
  return linearization(p, constant_solution(p));
}

namespace detail {

// Right-hand side F~ of Delta u = F~(u) in the |u|^{q-2}u form.
inline Eigen::Vector2d signed_power_rhs(const SystemParams& p, double u1, double u2) {
  const double m1 = std::pow(std::abs(u1), p.q - 2.0);
  const double m2 = std::pow(std::abs(u2), p.q - 2.0);
  return {p.a11 * m1 * u1 + p.a12 * m2 * u1 - p.lambda1 * u1,
          p.a21 * m1 * u2 + p.a22 * m2 * u2 - p.lambda2 * u2};
}

}  // namespace detail

/// The diagonalized nonlinearity: with u = ubar + Pinv v, returns P F~(u).
/// Vanishes at v = 0 and has Jacobian (q-2) diag(beta1, beta2) there.
inline Eigen::Vector2d reduced_nonlinearity(const SystemParams& p, const ConstantState& cs,
                                            double v1, double v2) {
  const Eigen::Vector2d u = Eigen::Vector2d(cs.u1bar, cs.u2bar) + cs.Pinv * Eigen::Vector2d(v1, v2);
  if (!(u(0) > 0.0) || !(u(1) > 0.0)) {
    throw Error(Errc::PositivityBreach, "mapped state leaves the positive quadrant");
  }
  return cs.P * detail::signed_power_rhs(p, u(0), u(1));
}

enum class Verdict {
  NoSolution_Thm4i,
  NoSolution_Thm5i,
  SynchronizedOnly_strict,
  SynchronizedOnly_equal,
  BifurcationCandidate,
  Unclassified,
};

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::NoSolution_Thm4i: return "NoSolution_Thm4i";
    case Verdict::NoSolution_Thm5i: return "NoSolution_Thm5i";
    case Verdict::SynchronizedOnly_strict: return "SynchronizedOnly_strict";
    case Verdict::SynchronizedOnly_equal: return "SynchronizedOnly_equal";
    case Verdict::BifurcationCandidate: return "BifurcationCandidate";
    case Verdict::Unclassified: return "Unclassified";
  }
  return "Unclassified";
}

struct RegimeReport {
  Verdict verdict = Verdict::Unclassified;
  std::optional<double> sync_ratio;  ///< Lambda, present iff SynchronizedOnly_strict
  std::string notes;
};

/// Forced value of v = u1/u2 in the strict synchronized regime.
inline double synchronization_ratio(const SystemParams& p) {
  return std::pow((p.a12 - p.a22) / (p.a21 - p.a11), 1.0 / (p.q - 2.0));
}

/// Sign taxonomy from the maximum principle applied to v = u1/u2.
/// Comparisons are exact: the inputs are hypotheses, not measurements.
inline RegimeReport classify_regime(const SystemParams& p) {
  RegimeReport r;
  const bool equal_lambda = p.lambda1 == p.lambda2;
  const auto no_solution = [&](double x1, double y1, double x2, double y2, double l1, double l2) {
    // x1 <= y1, x2 <= y2, l1 <= l2, one strict
    return x1 <= y1 && x2 <= y2 && l1 <= l2 && (x1 < y1 || x2 < y2 || l1 < l2);
  };
  const bool case_a = no_solution(p.a21, p.a11, p.a22, p.a12, p.lambda1, p.lambda2);
  const bool case_b = no_solution(p.a11, p.a21, p.a12, p.a22, p.lambda2, p.lambda1);
  if (case_a || case_b) {
    r.verdict = equal_lambda ? Verdict::NoSolution_Thm4i : Verdict::NoSolution_Thm5i;
    r.notes = case_a ? "v = u1/u2 would be a strict supersolution: minimum principle excludes solutions"
                     : "v = u1/u2 would be a strict subsolution: maximum principle excludes solutions";
    return r;
  }
  if (equal_lambda && p.a11 < p.a21 && p.a22 < p.a12) {
    r.verdict = Verdict::SynchronizedOnly_strict;
    r.sync_ratio = synchronization_ratio(p);
    r.notes = "every solution satisfies u1 = Lambda u2; existence is not decided";
    return r;
  }
  if (equal_lambda && p.a11 == p.a21 && p.a22 == p.a12) {
    r.verdict = Verdict::SynchronizedOnly_equal;
    r.notes = "v = u1/u2 solves a homogeneous drift equation and is constant; existence is not decided";
    return r;
  }
  const bool positive = p.lambda1 > 0.0 && p.lambda2 > 0.0 && p.a11 > 0.0 && p.a12 > 0.0 &&
                        p.a21 > 0.0 && p.a22 > 0.0;
  if (positive) {
    r.verdict = Verdict::BifurcationCandidate;
    r.notes = "sign pattern admits non-synchronized branches from the constant solution";
  } else {
    r.verdict = Verdict::Unclassified;
    r.notes = "sign pattern not excluded, but parameters are not all positive";
  }
  return r;
}

/// True when the scalar equation Delta u + lambda u = mu u^{q-1} on the round
/// S^n has only constant positive solutions by the Ricci-curvature criterion
/// with Ric = (n-1) g; the criterion reduces to (q-2) lambda <= n.
inline bool bvv_sphere_check(int n, double q, double lambda) {
  if (n < 2) throw Error(Errc::InvalidArgument, "sphere dimension must be >= 2");
  if (!(q > 2.0)) throw Error(Errc::InvalidArgument, "exponent q must exceed 2");
  const double lhs = (q - 2.0) * lambda;
  if (n <= 2) return lhs <= n;
  const double crit_lhs = q * (n - 2);  // compare q with 2n/(n-2) without division
  const double crit_rhs = 2.0 * n;
  if (crit_lhs < crit_rhs) return lhs <= n;
  if (crit_lhs == crit_rhs) return lhs < n;
  return false;
}

}  // namespace schro
