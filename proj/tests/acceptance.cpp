// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "schro/schro.hpp"

using namespace schro;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

constexpr Theorem5Case kCases[] = {Theorem5Case::EqLambda,           Theorem5Case::Lt_aDominant,
                                   Theorem5Case::Lt_bDominant_sqrt6, Theorem5Case::Lt_mixed_b2,
                                   Theorem5Case::Lt_a11eq_a21,       Theorem5Case::Lt_a12eq_a22};

constexpr double kLambda0 = 2.0;
constexpr double kQ = 4.0;

ParamFamily eqlambda_family() { return theorem5_case(Theorem5Case::EqLambda, kLambda0, kQ, sphere_radial_spectrum(2, 64)); }

BifurcationEvent event_at_zero(const ParamFamily& fam, const GridPtr& g) {
  for (const auto& e : detect_bifurcations(fam, g, -fam.delta, fam.delta)) {
    if (std::abs(e.alpha_star) <= 1e-8) return e;
  }
  throw Error(Errc::InvalidArgument, "no event at alpha = 0");
}

Outcome spectral_fidelity() {
  double worst = 0.0;
  for (int n : {2, 3, 4}) {
    const auto g = build_grid(n, 64, kQ);
    Eigen::VectorXd w(g->node_count());
    for (std::size_t k = 0; k < g->node_count(); ++k) w(k) = g->weights[k] * (1 - g->nodes[k] * g->nodes[k]);
    const Eigen::MatrixXd L = g->basis_dt * w.asDiagonal() * g->basis_dt.transpose();
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(L, Eigen::EigenvaluesOnly).eigenvalues();
    for (int j = 1; j <= 10; ++j) worst = std::max(worst, rel_err(ev(j), eigenvalue(n, j)));
    worst = std::max(worst, std::abs(ev(0)));
  }
  return {worst <= 1e-10, "max rel err " + fmt("%.2e", worst)};
}

Outcome algebra_vs_closed_forms() {
  const double eps = 0.1, lam = 3.0, qm = kQ - 2.0, l0 = kLambda0;
  const double s6 = std::sqrt(6.0), s7 = std::sqrt(7.0);
  double worst = 0.0;
  for (Theorem5Case c : kCases) {
    const auto fam = theorem5_case(c, l0, kQ, sphere_radial_spectrum(2, 64));
    const SystemParams p = fam(0.0);
    const ConstantState cs = linearization(p);
    const double l1 = p.lambda1;
    const double a = p.a11 / l1, b = p.a12 / l1;
    // Closed forms are stated for the coupling matrix at unit constant levels.
    const double D = cs.D * (a + b) * (a + b);
    double beta1 = 0, Dref = 0;
    switch (c) {
      case Theorem5Case::EqLambda:
        beta1 = lam / qm;
        Dref = 4 * l1 * l1 * b * b;
        break;
      case Theorem5Case::Lt_aDominant: {
        const double r = std::sqrt(5 + 4 * eps);
        beta1 = (2 + eps - eps * r) * l0 / ((2 + eps + eps * r) * qm);
        Dref = eps * eps * (5 + 4 * eps) * l1 * l1;
        break;
      }
      case Theorem5Case::Lt_bDominant_sqrt6:
        beta1 = -2 * l0 / (5 * qm);
        Dref = 49 * l1 * l1;
        break;
      case Theorem5Case::Lt_mixed_b2:
        beta1 = (3 - 2 * s6) * l0 / ((3 + 2 * s6) * qm);
        Dref = 96 * l1 * l1;
        break;
      case Theorem5Case::Lt_a11eq_a21: {
        const double r2 = (1 + eps) * (4 + eps * eps + eps * eps * eps);
        beta1 = ((2 + eps) * (1 + eps) - std::sqrt(r2)) * l0 / (((2 + eps) * (1 + eps) + std::sqrt(r2)) * qm);
        Dref = r2 * l1 * l1;
        break;
      }
      case Theorem5Case::Lt_a12eq_a22:
        beta1 = (1 - s7) * l0 / ((1 + s7) * qm);
        Dref = 112 * l1 * l1;
        break;
    }
    const BetaPair num = family_betas(fam, 0.0);
    // beta2 is affine in alpha for these families, so a wide central difference is exact up to roundoff.
    const double h = 0.1;
    const double slope = (family_betas(fam, h).beta2 - family_betas(fam, -h).beta2) / (2 * h);
    worst = std::max({worst, rel_err(num.beta1, beta1), rel_err(num.beta2, l0 / qm), rel_err(D, Dref),
                      rel_err(slope, l0 / qm)});
  }
  return {worst <= 1e-10, "max rel err " + fmt("%.2e", worst)};
}

Outcome detection() {
  const auto g = build_grid(2, 64, kQ);
  std::vector<ParamFamily> fams;
  for (Theorem5Case c : kCases) fams.push_back(theorem5_case(c, kLambda0, kQ, sphere_radial_spectrum(2, 64)));
  fams.push_back(sphere_symmetric_family([](double a) { return 1.5 * (1 + a); }, [](double a) { return 3.75 * (1 + a); },
                                         [](double a) { return 0.75 * (1 + a); }, kQ));
  bool ok = true;
  std::string detail;
  double worst_slope = 0, worst_alpha = 0;
  for (const auto& fam : fams) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto evs = detect_bifurcations(fam, g, -0.2, 0.2);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (fam.label.rfind("theorem5", 0) != 0) {
      const ConditionReport r = check_conditions(fam, sphere_radial_spectrum(2, 64));
      if (!(r.a1.value_or(false) && r.a2.value_or(false) && r.a3.value_or(false))) {
        ok = false;
        detail += " " + fam.label + ":A1-A3 not satisfied";
      }
    }
    if (evs.size() != 1) {
      ok = false;
      detail += " " + fam.label + ":" + std::to_string(evs.size()) + " events";
      continue;
    }
    worst_alpha = std::max(worst_alpha, std::abs(evs[0].alpha_star));
    worst_slope = std::max(worst_slope, std::abs(evs[0].crossing_slope - kLambda0 / (kQ - 2)));
    ok = ok && secs <= 2.0;
  }
  ok = ok && worst_alpha <= 1e-8 && worst_slope <= 1e-6;
  return {ok, std::to_string(fams.size()) + " families, max |alpha*| " + fmt("%.1e", worst_alpha) +
                  ", max slope err " + fmt("%.1e", worst_slope) + detail};
}

struct BranchChecks {
  Outcome branch, reflection;
};

BranchChecks branch_emergence() {
  const auto fam = eqlambda_family();
  const auto g = build_grid(2, 64, kQ);
  const auto t0 = std::chrono::steady_clock::now();
  const BifurcationEvent ev = event_at_zero(fam, g);
  const ContinuationResult res = continue_branch(ev, fam, g, ContinuationOptions{});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  double max_res = 0, min_u = 1e300, min_sync = 1e300, max_refl = 0;
  for (std::size_t i = 0; i < res.points.size(); ++i) {
    const auto& p = res.points[i];
    const auto nv = detail::nodal(p.state);
    max_res = std::max(max_res, p.residual_inf);
    min_u = std::min({min_u, nv.u1.minCoeff(), nv.u2.minCoeff()});
    if (i >= 5) min_sync = std::min(min_sync, p.diagnostics.sync_measure);
    max_refl = std::max(max_refl, p.diagnostics.reflection_defect.value_or(1e300));
  }
  const double fit = kernel_fit(res.points, ev, fam).ratio_at_smallest();

  // Correlation of the two deviations from the constant state at the first point.
  const auto& first = res.points.front();
  const ConstantPair ub = constant_solution(fam(first.alpha));
  const auto nv = detail::nodal(first.state);
  const Eigen::Map<const Eigen::VectorXd> w(g->weights.data(), static_cast<Eigen::Index>(g->weights.size()));
  const Eigen::VectorXd d1 = nv.u1.array() - ub.u1, d2 = nv.u2.array() - ub.u2;
  const double corr = (w.asDiagonal() * d1).dot(d2) /
                      std::sqrt((w.asDiagonal() * d1).dot(d1) * (w.asDiagonal() * d2).dot(d2));

  const bool ok = res.points.size() == 41 && max_res <= 1e-10 && min_u > 0 && min_sync >= 1e-4 && fit <= 0.1 &&
                  corr <= -0.99 && secs <= 30.0;
  BranchChecks out;
  out.branch = {ok, std::to_string(res.points.size()) + " points (" + res.termination + "), max residual " +
                        fmt("%.1e", max_res) + ", min u " + fmt("%.3f", min_u) + ", min sync after step 5 " +
                        fmt("%.2e", min_sync) + ", fit ratio " + fmt("%.2e", fit) + ", correlation " +
                        fmt("%.6f", corr) + ", " + fmt("%.2f", secs) + " s"};
  out.reflection = {max_refl <= 1e-8, "max reflection defect " + fmt("%.1e", max_refl)};
  return out;
}

Outcome synchronized_only() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto g = build_grid(2, 64, kQ);
  const SystemParams p(3, 3, 1, 2, 2, 1, kQ);
  const auto reports = cli::multistart(g, p, 50, 42, NewtonOptions{});
  int conv = 0;
  double max_sync = 0, max_ratio = 0;
  for (const auto& r : reports) {
    if (!r.converged) continue;
    ++conv;
    max_sync = std::max(max_sync, sync_measure(r.state));
    max_ratio = std::max(max_ratio, sync_ratio_check(r.state, p));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {conv > 0 && max_sync <= 1e-8 && max_ratio <= 1e-6 && secs <= 20.0,
          std::to_string(conv) + "/50 converged, max sync " + fmt("%.1e", max_sync) + ", max |mean v - Lambda| " +
              fmt("%.1e", max_ratio) + ", " + fmt("%.2f", secs) + " s"};
}

Outcome nonexistence() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto g = build_grid(2, 64, kQ);
  int converged = 0;
  for (const SystemParams& p : {SystemParams(3, 3, 2, 2, 1, 1, kQ), SystemParams(1, 2, 2, 2, 1, 1, kQ)}) {
    for (const auto& r : cli::multistart(g, p, 100, 42, NewtonOptions{})) {
      if (r.converged) ++converged;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {converged == 0 && secs <= 60.0,
          std::to_string(converged) + "/200 converged, " + fmt("%.2f", secs) + " s"};
}

Outcome cross_validation() {
  const auto fam = eqlambda_family();
  double worst[2] = {0, 0};
  int idx = 0;
  for (int modes : {64, 128}) {
    const auto g = build_grid(2, modes, kQ);
    const ContinuationResult res = continue_branch(event_at_zero(fam, g), fam, g, ContinuationOptions{});
    for (const auto& p : res.points) worst[idx] = std::max(worst[idx], p.diagnostics.quotient_residual);
    ++idx;
  }
  const double factor = worst[0] / worst[1];
  return {worst[0] <= 1e-6 && factor >= 4.0, "max quotient residual N=64 " + fmt("%.2e", worst[0]) + ", N=128 " +
                                                  fmt("%.2e", worst[1]) + ", decrease factor " + fmt("%.2f", factor)};
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "schro_acceptance_determinism";
  fs::remove_all(base);
  std::string csv[2];
  for (int i = 0; i < 2; ++i) {
    cli::RunOptions ro;
    ro.out_dir = (base / std::to_string(i)).string();
    std::ostringstream log;
    cli::cmd_run(cli::Config::load((fs::path(SCHRO_CONFIG_DIR) / "eqlambda.cfg").string()), ro, log);
    std::ifstream f(base / std::to_string(i) / "branch.csv", std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    csv[i] = ss.str();
  }
  fs::remove_all(base);
  const bool ok = !csv[0].empty() && csv[0] == csv[1];
  return {ok, std::to_string(csv[0].size()) + " bytes, " + (ok ? "identical" : "different")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "spectral fidelity", [] {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = spectral_fidelity();
    o.pass = o.pass && std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() <= 1.0;
    return o;
  });
  report(2, "algebra vs closed forms", [] {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = algebra_vs_closed_forms();
    o.pass = o.pass && std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() <= 1.0;
    return o;
  });
  report(3, "bifurcation detection", detection);
  BranchChecks bc;
  report(4, "branch emergence", [&] {
    bc = branch_emergence();
    return bc.branch;
  });
  report(5, "reflection covariance", [&] { return bc.reflection; });
  report(6, "synchronized-only regime", synchronized_only);
  report(7, "non-existence regimes", nonexistence);
  report(8, "discretization cross-validation", cross_validation);
  report(9, "determinism", determinism);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
