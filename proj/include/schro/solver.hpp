#pragma once

// Galerkin residual and Jacobian of the radial system on S^n, damped Newton
// with a positivity guard, and the spectrum of the linearized operator.
//
// The residual is R_i = Delta u_i - F~_i(u) projected onto the basis, with
// F~ in the |u|^{q-2} u form so iterates that undershoot zero stay
// evaluable. Accepted solutions must be strictly positive at every node.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "schro/error.hpp"
#include "schro/spectral_sphere.hpp"
#include "schro/system_algebra.hpp"

namespace schro {

struct StateVector {
  SpectralField u1;
  SpectralField u2;

  const GridPtr& grid() const { return u1.grid; }
  int modes() const { return u1.grid->modes; }

  /// Coefficients of (u1, u2) stacked into one vector of length 2N.
  Eigen::VectorXd stacked() const {
    Eigen::VectorXd x(2 * modes());
    x << u1.coeffs, u2.coeffs;
    return x;
  }

  static StateVector from_stacked(const GridPtr& g, const Eigen::VectorXd& x) {
    const int N = g->modes;
    if (x.size() != 2 * N) throw Error(Errc::LengthMismatch, "stacked state has wrong length");
    return {SpectralField(g, x.head(N)), SpectralField(g, x.tail(N))};
  }

  static StateVector constant(const GridPtr& g, double c1, double c2) {
    return {SpectralField::constant(g, c1), SpectralField::constant(g, c2)};
  }
};

struct NewtonOptions {
  int max_iter = 50;
  double abs_tol = 1e-11;          ///< sup-norm of the residual at the nodes
  double rel_tol = 1e-9;           ///< per component, relative to sup |u_i|
  double damping_floor = 0x1p-20;  ///< smallest backtracking factor
  bool positivity_guard = true;
  double positivity_ratio = 1e-10; ///< accepted iff min > ratio * max at the nodes
};

namespace detail {

struct Nodal {
  Eigen::VectorXd u1;
  Eigen::VectorXd u2;
};

inline Nodal nodal(const StateVector& s) { return {synthesize(s.u1), synthesize(s.u2)}; }

inline Eigen::VectorXd signed_pow(const Eigen::VectorXd& u, double e) {
  return u.unaryExpr([e](double x) { return std::pow(std::abs(x), e); });
}

inline bool strictly_positive(const Nodal& nv, double ratio) {
  const double lo = std::min(nv.u1.minCoeff(), nv.u2.minCoeff());
  const double hi = std::max(nv.u1.maxCoeff(), nv.u2.maxCoeff());
  return lo > 0.0 && lo > ratio * hi;
}

// Coefficient residual without the positivity precondition.
inline Eigen::VectorXd residual_coeffs(const StateVector& s, const SystemParams& p) {
  const SphereGrid& g = *s.grid();
  const Nodal nv = nodal(s);
  const Eigen::VectorXd m1 = signed_pow(nv.u1, p.q - 2.0);
  const Eigen::VectorXd m2 = signed_pow(nv.u2, p.q - 2.0);
  const Eigen::VectorXd f1 = (p.a11 * m1 + p.a12 * m2).cwiseProduct(nv.u1);
  const Eigen::VectorXd f2 = (p.a21 * m1 + p.a22 * m2).cwiseProduct(nv.u2);
  const int N = g.modes;
  Eigen::VectorXd r(2 * N);
  r.head(N) = (g.eigenvalues.array() + p.lambda1).matrix().cwiseProduct(s.u1.coeffs) - g.analysis * f1;
  r.tail(N) = (g.eigenvalues.array() + p.lambda2).matrix().cwiseProduct(s.u2.coeffs) - g.analysis * f2;
  return r;
}

inline double nodal_sup(const SphereGrid& g, const Eigen::VectorXd& r) {
  const int N = g.modes;
  const double a = (g.basis.transpose() * r.head(N)).cwiseAbs().maxCoeff();
  const double b = (g.basis.transpose() * r.tail(N)).cwiseAbs().maxCoeff();
  return std::max(a, b);
}

// Both the absolute test and, per component, |R_i| <= rel_tol sup|u_i|. The
// relative test keeps a vanishing component (a semi-trivial state) from
// passing on the absolute tolerance alone.
inline bool residual_small(const SphereGrid& g, const Eigen::VectorXd& r, const Nodal& nv, double abs_tol,
                           double rel_tol) {
  const int N = g.modes;
  const double r1 = (g.basis.transpose() * r.head(N)).cwiseAbs().maxCoeff();
  const double r2 = (g.basis.transpose() * r.tail(N)).cwiseAbs().maxCoeff();
  return std::max(r1, r2) <= abs_tol && r1 <= rel_tol * nv.u1.cwiseAbs().maxCoeff() &&
         r2 <= rel_tol * nv.u2.cwiseAbs().maxCoeff();
}

inline Eigen::MatrixXd jacobian_unchecked(const StateVector& s, const SystemParams& p) {
  const SphereGrid& g = *s.grid();
  const Nodal nv = nodal(s);
  const double e = p.q - 2.0;
  const Eigen::VectorXd m1 = signed_pow(nv.u1, e);
  const Eigen::VectorXd m2 = signed_pow(nv.u2, e);
  // d/du (|u|^{q-2}) u = (q-2)|u|^{q-3} sign(u) u
  auto dpow = [e](double x) {
    return x == 0.0 ? 0.0 : e * std::pow(std::abs(x), e - 1.0) * (x > 0.0 ? 1.0 : -1.0);
  };
  const Eigen::VectorXd dm1 = nv.u1.unaryExpr(dpow);
  const Eigen::VectorXd dm2 = nv.u2.unaryExpr(dpow);
  const Eigen::VectorXd d11 = p.a11 * (m1 + dm1.cwiseProduct(nv.u1)) + p.a12 * m2;
  const Eigen::VectorXd d12 = p.a12 * dm2.cwiseProduct(nv.u1);
  const Eigen::VectorXd d21 = p.a21 * dm1.cwiseProduct(nv.u2);
  const Eigen::VectorXd d22 = p.a21 * m1 + p.a22 * (m2 + dm2.cwiseProduct(nv.u2));
  const int N = g.modes;
  const Eigen::MatrixXd Bt = g.basis.transpose();
  Eigen::MatrixXd J(2 * N, 2 * N);
  J.topLeftCorner(N, N) = -g.analysis * d11.asDiagonal() * Bt;
  J.topRightCorner(N, N) = -g.analysis * d12.asDiagonal() * Bt;
  J.bottomLeftCorner(N, N) = -g.analysis * d21.asDiagonal() * Bt;
  J.bottomRightCorner(N, N) = -g.analysis * d22.asDiagonal() * Bt;
  for (int j = 0; j < N; ++j) {
    J(j, j) += g.eigenvalues(j) + p.lambda1;
    J(N + j, N + j) += g.eigenvalues(j) + p.lambda2;
  }
  return J;
}

inline void require_positive(const StateVector& s) {
  const Nodal nv = nodal(s);
  if (!(nv.u1.minCoeff() > 0.0) || !(nv.u2.minCoeff() > 0.0)) {
    throw Error(Errc::PositivityBreach, "state is not positive at every node");
  }
}

}  // namespace detail

/// Projected residual (Delta u_i + lambda_i u_i - nonlinearity_i) as a state.
inline StateVector residual(const StateVector& s, const SystemParams& p) {
  detail::require_positive(s);
  return StateVector::from_stacked(s.grid(), detail::residual_coeffs(s, p));
}

/// Sup norm of the residual at the nodes.
inline double residual_inf(const StateVector& s, const SystemParams& p) {
  return detail::nodal_sup(*s.grid(), detail::residual_coeffs(s, p));
}

/// Dense 2N x 2N Jacobian of the coefficient residual.
inline Eigen::MatrixXd jacobian(const StateVector& s, const SystemParams& p) {
  detail::require_positive(s);
  return detail::jacobian_unchecked(s, p);
}

struct NewtonReport {
  bool converged = false;
  StateVector state;
  int iterations = 0;
  double residual = 0.0;
  std::string reason;
};

/// Damped Newton; never throws on failure, reports instead.
inline NewtonReport try_newton_solve(const StateVector& initial, const SystemParams& p,
                                     const NewtonOptions& opts = {}) {
  const GridPtr& g = initial.grid();
  NewtonReport rep;
  Eigen::VectorXd x = initial.stacked();
  StateVector s = initial;
  Eigen::VectorXd r = detail::residual_coeffs(s, p);
  double norm = detail::nodal_sup(*g, r);
  auto accepted = [&](const StateVector& st) {
    return !opts.positivity_guard || detail::strictly_positive(detail::nodal(st), opts.positivity_ratio);
  };
  for (int it = 0;; ++it) {
    rep.iterations = it;
    if (!std::isfinite(norm)) {
      rep.reason = "residual is not finite";
      break;
    }
    if (detail::residual_small(*g, r, detail::nodal(s), opts.abs_tol, opts.rel_tol)) {
      if (accepted(s)) {
        rep.converged = true;
      } else {
        rep.reason = "converged to a state that is not strictly positive";
      }
      break;
    }
    if (it >= opts.max_iter) {
      rep.reason = "iteration cap reached";
      break;
    }
    const Eigen::MatrixXd J = detail::jacobian_unchecked(s, p);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    const Eigen::VectorXd dx = lu.solve(-r);
    if (!dx.allFinite()) {
      rep.reason = "singular Jacobian";
      break;
    }
    double t = 1.0;
    bool stepped = false;
    bool positivity_blocked = false;
    while (t >= opts.damping_floor) {
      const Eigen::VectorXd xt = x + t * dx;
      const StateVector st = StateVector::from_stacked(g, xt);
      if (!accepted(st)) {
        positivity_blocked = true;
        t *= 0.5;
        continue;
      }
      const Eigen::VectorXd rt = detail::residual_coeffs(st, p);
      const double nt = detail::nodal_sup(*g, rt);
      if (std::isfinite(nt) && nt < norm) {
        x = xt;
        s = st;
        r = rt;
        norm = nt;
        stepped = true;
        break;
      }
      t *= 0.5;
    }
    if (!stepped) {
      rep.reason = positivity_blocked ? "positivity guard blocked every damped step"
                                      : "damping floor reached without residual decrease";
      break;
    }
  }
  rep.state = s;
  rep.residual = norm;
  return rep;
}

/// Damped Newton; throws NoConvergence when try_newton_solve fails.
inline StateVector newton_solve(const StateVector& initial, const SystemParams& p,
                                const NewtonOptions& opts = {}) {
  NewtonReport rep = try_newton_solve(initial, p, opts);
  if (!rep.converged) {
    throw Error(Errc::NoConvergence, rep.reason + " (residual " + std::to_string(rep.residual) + ")");
  }
  return std::move(rep.state);
}

/// The k eigenvalues of the Jacobian with smallest magnitude.
inline std::vector<std::complex<double>> linearized_spectrum(const StateVector& s, const SystemParams& p,
                                                             int k) {
  const Eigen::MatrixXd J = jacobian(s, p);
  if (k < 0 || k > J.rows()) throw Error(Errc::InvalidArgument, "k must be in [0, 2N]");
  Eigen::EigenSolver<Eigen::MatrixXd> es(J, false);
  if (es.info() != Eigen::Success) throw Error(Errc::EigenSolverFailure, "eigensolver did not converge");
  std::vector<std::complex<double>> ev(es.eigenvalues().data(), es.eigenvalues().data() + J.rows());
  std::stable_sort(ev.begin(), ev.end(), [](auto a, auto b) { return std::abs(a) < std::abs(b); });
  ev.resize(k);
  return ev;
}

}  // namespace schro
