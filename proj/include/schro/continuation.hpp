#pragma once

// Bifurcation from the constant branch: detection of resonances
// (q-2) beta_i(alpha) = lambda_j, branch switching along the kernel mode,
// and pseudo-arclength continuation of the emerging branch.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "schro/diagnostics.hpp"
#include "schro/error.hpp"
#include "schro/families.hpp"
#include "schro/solver.hpp"
#include "schro/spectral_sphere.hpp"
#include "schro/system_algebra.hpp"

namespace schro {

struct BranchPoint {
  double alpha = 0.0;
  StateVector state;
  double s = 0.0;          ///< cumulative arclength in the scaled metric
  double epsilon = 0.0;    ///< kernel amplitude, in units of max(ubar) at the pole
  double residual_inf = 0.0;
  DiagnosticsRecord diagnostics;
};

struct BifurcationEvent {
  double alpha_star = 0.0;
  int j0 = 0;              ///< index into the spectrum (the degree on S^n)
  int beta_branch = 2;     ///< family labeling
  double eigenvalue = 0.0; ///< lambda_{j0}
  double crossing_slope = 0.0;   ///< d beta_i / d alpha at alpha*
  double resonance_slope = 0.0;  ///< d/dalpha [(q-2) beta_i - lambda_{j0}]
  int kernel_dimension = 1;
  Eigen::Vector2d direction = Eigen::Vector2d::Zero();  ///< (q_{1i}, q_{2i})
  std::optional<SpectralField> kernel;
};

/// Roots of (q-2) beta_i(alpha) - lambda_j on [lo, hi] for both beta branches
/// and every spectrum entry: sign changes on a 201-point sample refined by
/// bisection to |g| <= 1e-12.
inline std::vector<BifurcationEvent> detect_bifurcations(const ParamFamily& fam,
                                                         const std::vector<SpectrumEntry>& spectrum,
                                                         double lo, double hi) {
  constexpr int kSamples = 201;
  constexpr double kRootTol = 1e-12;
  constexpr double kSlopeStep = 1e-5;
  const double qm = fam(0.0).q - 2.0;
  const std::vector<double> alphas = detail::sample_interval(lo, hi, kSamples);
  std::vector<BetaPair> betas;
  betas.reserve(alphas.size());
  for (double a : alphas) betas.push_back(family_betas(fam, a));

  auto beta_of = [&](int branch, double a) {
    const BetaPair b = family_betas(fam, a);
    return branch == 1 ? b.beta1 : b.beta2;
  };

  std::vector<BifurcationEvent> events;
  for (int branch = 1; branch <= 2; ++branch) {
    for (std::size_t j = 0; j < spectrum.size(); ++j) {
      const double lam = spectrum[j].eigenvalue;
      auto g = [&](double a) { return qm * beta_of(branch, a) - lam; };
      std::vector<double> gs(alphas.size());
      for (std::size_t k = 0; k < alphas.size(); ++k) {
        gs[k] = qm * (branch == 1 ? betas[k].beta1 : betas[k].beta2) - lam;
      }
      std::vector<double> roots;
      for (std::size_t k = 0; k < alphas.size(); ++k) {
        if (gs[k] == 0.0) {
          roots.push_back(alphas[k]);
          continue;
        }
        if (k + 1 < alphas.size() && gs[k + 1] != 0.0 && (gs[k] < 0.0) != (gs[k + 1] < 0.0)) {
          double a = alphas[k], b = alphas[k + 1], ga = gs[k];
          double best = a, gbest = std::abs(ga);
          for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (a + b);
            const double gm = g(mid);
            if (std::abs(gm) < gbest) {
              best = mid;
              gbest = std::abs(gm);
            }
            if (std::abs(gm) <= kRootTol || mid == a || mid == b) break;
            if ((gm < 0.0) == (ga < 0.0)) {
              a = mid;
              ga = gm;
            } else {
              b = mid;
            }
          }
          roots.push_back(best);
        }
      }
      for (double root : roots) {
        BifurcationEvent ev;
        ev.alpha_star = root;
        ev.j0 = static_cast<int>(j);
        ev.beta_branch = branch;
        ev.eigenvalue = lam;
        ev.crossing_slope =
            (beta_of(branch, root + kSlopeStep) - beta_of(branch, root - kSlopeStep)) / (2.0 * kSlopeStep);
        ev.resonance_slope = qm * ev.crossing_slope;
        const ConstantState cs = linearization(fam(root));
        ev.direction = branch_direction(fam, cs, branch);
        ev.kernel_dimension = spectrum[j].multiplicity;
        const double other = qm * beta_of(branch == 1 ? 2 : 1, root);
        for (const auto& e : spectrum) {
          if (std::abs(other - e.eigenvalue) <= 1e-9 * std::max(1.0, std::abs(other))) {
            ev.kernel_dimension += e.multiplicity;
          }
        }
        events.push_back(std::move(ev));
      }
    }
  }
  std::sort(events.begin(), events.end(),
            [](const auto& x, const auto& y) { return x.alpha_star < y.alpha_star; });
  return events;
}

/// Sphere version: the spectrum is the grid's radial spectrum and each event
/// carries its kernel harmonic phi_{j0}.
inline std::vector<BifurcationEvent> detect_bifurcations(const ParamFamily& fam, const GridPtr& grid,
                                                         double lo, double hi) {
  auto events = detect_bifurcations(fam, sphere_radial_spectrum(grid->n, grid->modes - 1), lo, hi);
  for (auto& ev : events) ev.kernel = SpectralField::mode(grid, ev.j0);
  return events;
}

namespace detail {

inline Eigen::Vector2d unit_sup(const Eigen::Vector2d& c) {
  Eigen::Vector2d d = c / c.cwiseAbs().maxCoeff();
  if (d(0) < 0.0 || (d(0) == 0.0 && d(1) < 0.0)) d = -d;
  return d;
}

inline StateVector constant_state(const GridPtr& g, const ConstantPair& ub) {
  return StateVector::constant(g, ub.u1, ub.u2);
}

inline bool symmetric_params(const SystemParams& p) {
  return p.lambda1 == p.lambda2 && p.a11 == p.a22 && p.a12 == p.a21;
}

// Stacked-coefficient norm of the switch perturbation with eps0 = 1.
inline double unit_amplitude_norm(const GridPtr& g, int j0, double umax, const Eigen::Vector2d& c) {
  const double pole = g->basis_at(1.0)(j0);
  return umax * c.norm() / pole;
}

}  // namespace detail

/// ubar(alpha*) + eps0 max(ubar) (c1, c2) phi / phi(1), where (c1, c2) is the
/// P^{-1} column of the crossed branch scaled to unit sup norm with a
/// nonnegative first entry.
inline StateVector branch_switch(const BifurcationEvent& ev, const ParamFamily& fam, const GridPtr& grid,
                                 double eps0 = 1e-2) {
  const SystemParams p = fam(ev.alpha_star);
  const ConstantState cs = linearization(p);
  const Eigen::Vector2d c = detail::unit_sup(branch_direction(fam, cs, ev.beta_branch));
  StateVector s = StateVector::constant(grid, cs.u1bar, cs.u2bar);
  const double pole = grid->basis_at(1.0)(ev.j0);
  const double amp = eps0 * std::max(cs.u1bar, cs.u2bar) / pole;
  s.u1.coeffs(ev.j0) += amp * c(0);
  s.u2.coeffs(ev.j0) += amp * c(1);
  return s;
}

struct ContinuationOptions {
  double ds = 5e-3;
  int n_steps = 40;
  double eps0 = 1e-2;
  bool mirror = false;          ///< start with eps0 < 0
  NewtonOptions newton{};
  int corrector_max_iter = 20;
  double min_ds_ratio = 1.0 / 1024.0;
  double fd_alpha_step = 1e-6;
};

struct ContinuationResult {
  std::vector<BranchPoint> points;
  std::string termination;
};

/// Diagnostics of one state relative to the constant solution at alpha.
inline DiagnosticsRecord diagnose(const StateVector& s, const SystemParams& p, const BifurcationEvent& ev,
                                  double amplitude_unit) {
  DiagnosticsRecord d;
  const Eigen::VectorXd v = detail::quotient_at_nodes(s);
  d.v_min = v.minCoeff();
  d.v_max = v.maxCoeff();
  d.sync_measure = sync_measure(s);
  d.quotient_residual = quotient_residual(s, p);
  const StateVector base = detail::constant_state(s.grid(), constant_solution(p));
  const Eigen::VectorXd dir = kernel_direction(s.grid(), ev.j0, detail::unit_sup(ev.direction));
  const KernelProjection kp = project_on_kernel(s, base, dir);
  d.epsilon = kp.epsilon / amplitude_unit;
  d.remainder = kp.remainder / amplitude_unit;
  if (detail::symmetric_params(p) && ev.j0 % 2 == 1) d.reflection_defect = reflection_defect(s);
  return d;
}

namespace detail {

struct ArcState {
  double alpha = 0.0;
  Eigen::VectorXd c;
};

struct ArcGeometry {
  double sigma2 = 1.0;  // state scaling squared
  double dot(const ArcState& a, const ArcState& b) const { return a.alpha * b.alpha + a.c.dot(b.c) / sigma2; }
  double norm(const ArcState& a) const { return std::sqrt(dot(a, a)); }
};

inline ArcState diff(const ArcState& a, const ArcState& b) { return {a.alpha - b.alpha, a.c - b.c}; }

inline Eigen::VectorXd residual_alpha_derivative(const ParamFamily& fam, const GridPtr& g, const ArcState& x,
                                                 double h) {
  const StateVector s = StateVector::from_stacked(g, x.c);
  return (residual_coeffs(s, fam(x.alpha + h)) - residual_coeffs(s, fam(x.alpha - h))) / (2.0 * h);
}

struct CorrectorOutcome {
  bool ok = false;
  ArcState x;
  double residual = 0.0;
  std::string reason;
};

// Newton on [R(alpha, c); <x - anchor, tau>_w] = 0 with residual backtracking.
inline CorrectorOutcome correct(const ParamFamily& fam, const GridPtr& g, ArcState x, const ArcState& anchor,
                                const ArcState& tau, const ArcGeometry& geo, const ContinuationOptions& opt) {
  const int n = static_cast<int>(x.c.size());
  auto constraint = [&](const ArcState& y) { return geo.dot(diff(y, anchor), tau); };
  auto merit = [&](const ArcState& y, double& rinf) {
    const StateVector s = StateVector::from_stacked(g, y.c);
    const Eigen::VectorXd r = residual_coeffs(s, fam(y.alpha));
    rinf = nodal_sup(*g, r);
    return std::max(rinf, std::abs(constraint(y)));
  };
  auto solved = [&](const ArcState& y) {
    const StateVector s = StateVector::from_stacked(g, y.c);
    return residual_small(*g, residual_coeffs(s, fam(y.alpha)), nodal(s), opt.newton.abs_tol,
                          opt.newton.rel_tol) &&
           std::abs(constraint(y)) <= 1e-12;
  };
  auto positive = [&](const ArcState& y) {
    return strictly_positive(nodal(StateVector::from_stacked(g, y.c)), opt.newton.positivity_ratio);
  };
  if (std::abs(x.alpha) > fam.delta) return {false, x, 0.0, "alpha left the family interval"};
  double rinf = 0.0;
  double m = merit(x, rinf);
  for (int it = 0; it <= opt.corrector_max_iter; ++it) {
    if (!std::isfinite(m)) return {false, x, rinf, "non-finite residual"};
    if (rinf <= opt.newton.abs_tol && solved(x)) {
      if (!positive(x)) return {false, x, rinf, "positivity breach"};
      return {true, x, rinf, ""};
    }
    if (it == opt.corrector_max_iter) break;
    const StateVector s = StateVector::from_stacked(g, x.c);
    const SystemParams p = fam(x.alpha);
    Eigen::MatrixXd M(n + 1, n + 1);
    M.topLeftCorner(n, n) = jacobian_unchecked(s, p);
    M.topRightCorner(n, 1) = residual_alpha_derivative(fam, g, x, opt.fd_alpha_step);
    M.bottomLeftCorner(1, n) = tau.c.transpose() / geo.sigma2;
    M(n, n) = tau.alpha;
    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = -residual_coeffs(s, p);
    rhs(n) = -constraint(x);
    const Eigen::VectorXd dx = Eigen::PartialPivLU<Eigen::MatrixXd>(M).solve(rhs);
    if (!dx.allFinite()) return {false, x, rinf, "singular bordered Jacobian"};
    double t = 1.0;
    bool moved = false;
    while (t >= opt.newton.damping_floor) {
      ArcState y{x.alpha + t * dx(n), x.c + t * dx.head(n)};
      if (std::abs(y.alpha) <= fam.delta && positive(y)) {
        double ry = 0.0;
        const double my = merit(y, ry);
        if (std::isfinite(my) && my < m) {
          x = std::move(y);
          m = my;
          rinf = ry;
          moved = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!moved) return {false, x, rinf, "corrector stalled"};
  }
  return {false, x, rinf, "corrector iteration cap"};
}

// Unit tangent of the solution curve at x, oriented so <tau, orient>_w > 0.
inline ArcState tangent(const ParamFamily& fam, const GridPtr& g, const ArcState& x, const ArcState& orient,
                        const ArcGeometry& geo, const ContinuationOptions& opt) {
  const int n = static_cast<int>(x.c.size());
  const StateVector s = StateVector::from_stacked(g, x.c);
  Eigen::MatrixXd M(n + 1, n + 1);
  M.topLeftCorner(n, n) = jacobian_unchecked(s, fam(x.alpha));
  M.topRightCorner(n, 1) = residual_alpha_derivative(fam, g, x, opt.fd_alpha_step);
  M.bottomLeftCorner(1, n) = orient.c.transpose() / geo.sigma2;
  M(n, n) = orient.alpha;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs(n) = 1.0;
  const Eigen::VectorXd z = Eigen::PartialPivLU<Eigen::MatrixXd>(M).solve(rhs);
  ArcState tau{z(n), z.head(n)};
  const double nrm = geo.norm(tau);
  tau.alpha /= nrm;
  tau.c /= nrm;
  return tau;
}

}  // namespace detail

/// Pseudo-arclength continuation of the branch created at `ev`.
///
/// The first point fixes the kernel amplitude at eps0 (retrying with eps0/2
/// and eps0/4); later points use a secant predictor and a Newton corrector
/// on the residual bordered by the arclength hyperplane. The metric weighs
/// alpha and the coefficient vector scaled by 1/||ubar(alpha*)|| equally.
inline ContinuationResult continue_branch(const BifurcationEvent& ev, const ParamFamily& fam, const GridPtr& grid,
                                          const ContinuationOptions& opt = {}) {
  if (!(opt.ds > 0.0)) throw Error(Errc::InvalidArgument, "ds must be positive");
  if (opt.n_steps < 1) throw Error(Errc::InvalidArgument, "n_steps must be >= 1");
  if (ev.kernel_dimension != 1) {
    throw Error(Errc::KernelNotSimple, "kernel dimension " + std::to_string(ev.kernel_dimension) +
                                           ": branch following needs a simple crossing");
  }
  if (ev.j0 >= grid->modes) throw Error(Errc::InvalidArgument, "kernel mode not resolved by the grid");

  const ConstantState cs0 = linearization(fam(ev.alpha_star));
  const Eigen::Vector2d chat = detail::unit_sup(branch_direction(fam, cs0, ev.beta_branch));
  const double umax = std::max(cs0.u1bar, cs0.u2bar);
  const double amp_unit = detail::unit_amplitude_norm(grid, ev.j0, umax, chat);
  const Eigen::VectorXd kdir = kernel_direction(grid, ev.j0, chat);
  const Eigen::VectorXd cbar = StateVector::constant(grid, cs0.u1bar, cs0.u2bar).stacked();

  detail::ArcGeometry geo;
  geo.sigma2 = cbar.squaredNorm();
  const double sign = opt.mirror ? -1.0 : 1.0;

  auto make_point = [&](const detail::ArcState& x, double s) {
    BranchPoint bp;
    bp.alpha = x.alpha;
    bp.state = StateVector::from_stacked(grid, x.c);
    bp.s = s;
    const SystemParams p = fam(x.alpha);
    bp.residual_inf = residual_inf(bp.state, p);
    bp.diagnostics = diagnose(bp.state, p, ev, amp_unit);
    bp.epsilon = bp.diagnostics.epsilon;
    return bp;
  };

  // First point: amplitude along the kernel fixed, alpha free.
  const detail::ArcState kernel_tau{0.0, sign * kdir};
  std::optional<detail::ArcState> first;
  std::string why;
  for (double scale : {1.0, 0.5, 0.25}) {
    const StateVector guess = branch_switch(ev, fam, grid, sign * opt.eps0 * scale);
    const detail::ArcState x0{ev.alpha_star, guess.stacked()};
    // <x - x0, (0, k)>_w = 0 pins the kernel amplitude at the guess value.
    const auto out = detail::correct(fam, grid, x0, x0, kernel_tau, geo, opt);
    if (out.ok) {
      first = out.x;
      break;
    }
    why = out.reason;
  }
  if (!first) throw Error(Errc::InitialSwitchFailed, "first corrector failed for eps0, eps0/2, eps0/4: " + why);

  ContinuationResult res;
  res.points.push_back(make_point(*first, 0.0));
  detail::ArcState x = *first;
  detail::ArcState tau = detail::tangent(fam, grid, x, kernel_tau, geo, opt);
  double ds = opt.ds;
  double s = 0.0;
  int streak = 0;
  while (static_cast<int>(res.points.size()) <= opt.n_steps) {
    const detail::ArcState pred{x.alpha + ds * tau.alpha, x.c + ds * tau.c};
    const auto out = detail::correct(fam, grid, pred, pred, tau, geo, opt);
    if (!out.ok) {
      ds *= 0.5;
      streak = 0;
      if (ds < opt.ds * opt.min_ds_ratio) {
        res.termination = "step size underflow after: " + out.reason;
        return res;
      }
      continue;
    }
    const detail::ArcState step = detail::diff(out.x, x);
    const double len = geo.norm(step);
    if (!(len > 0.0)) {
      res.termination = "corrector returned the previous point";
      return res;
    }
    s += len;
    tau = {step.alpha / len, step.c / len};
    x = out.x;
    res.points.push_back(make_point(x, s));
    if (++streak >= 4) {
      ds = std::min(2.0 * ds, opt.ds);
      streak = 0;
    }
  }
  res.termination = "completed";
  return res;
}

/// Constant solutions at the given parameter values.
inline std::vector<BranchPoint> trivial_branch(const ParamFamily& fam, const GridPtr& grid,
                                               const std::vector<double>& alphas) {
  std::vector<BranchPoint> out;
  double s = 0.0;
  std::optional<Eigen::VectorXd> prev;
  double prev_alpha = 0.0;
  double sigma2 = 0.0;
  for (double a : alphas) {
    const SystemParams p = fam(a);
    const ConstantPair ub = constant_solution(p);
    BranchPoint bp;
    bp.alpha = a;
    bp.state = StateVector::constant(grid, ub.u1, ub.u2);
    const Eigen::VectorXd c = bp.state.stacked();
    if (!prev) sigma2 = c.squaredNorm();
    if (prev) s += std::sqrt((a - prev_alpha) * (a - prev_alpha) + (c - *prev).squaredNorm() / sigma2);
    bp.s = s;
    bp.residual_inf = residual_inf(bp.state, p);
    const Eigen::VectorXd v = detail::quotient_at_nodes(bp.state);
    bp.diagnostics.v_min = v.minCoeff();
    bp.diagnostics.v_max = v.maxCoeff();
    bp.diagnostics.sync_measure = sync_measure(bp.state);
    bp.diagnostics.quotient_residual = quotient_residual(bp.state, p);
    if (detail::symmetric_params(p)) bp.diagnostics.reflection_defect = reflection_defect(bp.state);
    out.push_back(std::move(bp));
    prev = c;
    prev_alpha = a;
  }
  return out;
}

/// Kernel amplitude and remainder of (u - ubar(alpha)) along the event's
/// kernel direction, for every point.
inline KernelFit kernel_fit(const std::vector<BranchPoint>& points, const BifurcationEvent& ev,
                            const ParamFamily& fam) {
  if (points.size() < 3) throw Error(Errc::InsufficientPoints, "kernel fit needs at least 3 branch points");
  KernelFit fit;
  for (const auto& bp : points) {
    const GridPtr& g = bp.state.grid();
    const StateVector base = detail::constant_state(g, constant_solution(fam(bp.alpha)));
    const Eigen::VectorXd dir = kernel_direction(g, ev.j0, detail::unit_sup(ev.direction));
    const KernelProjection kp = project_on_kernel(bp.state, base, dir);
    fit.epsilon.push_back(kp.epsilon);
    fit.remainder.push_back(kp.remainder);
  }
  return fit;
}

}  // namespace schro
