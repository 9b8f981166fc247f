#pragma once

// One-parameter curves alpha -> SystemParams and numerical checks of the
// bifurcation hypotheses at alpha = 0.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "schro/error.hpp"
#include "schro/spectral_sphere.hpp"
#include "schro/system_algebra.hpp"

namespace schro {

struct SpectrumEntry {
  double eigenvalue = 0.0;
  int multiplicity = 1;
};

/// Radial spectrum of S^n up to degree jmax (every radial eigenspace is one
/// dimensional).
inline std::vector<SpectrumEntry> sphere_radial_spectrum(int n, int jmax) {
  std::vector<SpectrumEntry> s;
  for (int j = 0; j <= jmax; ++j) s.push_back({eigenvalue(n, j), 1});
  return s;
}

struct BetaPair {
  double beta1 = 0.0;
  double beta2 = 0.0;
};

/// Coupling of the form a11 = lambda1 a, a12 = lambda1 b, a21 = lambda2 b,
/// a22 = lambda2 a, for which ubar = (a + b)^{-1/(q-2)} in both components.
struct ProductCoupling {
  double a = 0.0;
  double b = 0.0;
};

struct ParamFamily {
  std::function<SystemParams(double)> eval;
  double delta = 0.2;
  std::string label;
  std::optional<std::function<BetaPair(double)>> analytic_beta;
  /// Which root of A the family calls beta2. ConstantState orders the roots
  /// as (+sqrt(D), -sqrt(D)); families built from closed forms may swap them.
  bool beta2_is_plus_root = false;
  std::optional<ProductCoupling> product_form;

  SystemParams operator()(double alpha) const { return eval(alpha); }
};

/// Eigenvalues of A(alpha) labeled the way the family labels them.
inline BetaPair family_betas(const ParamFamily& fam, double alpha) {
  const ConstantState cs = linearization(fam(alpha));
  return fam.beta2_is_plus_root ? BetaPair{cs.beta2, cs.beta1} : BetaPair{cs.beta1, cs.beta2};
}

/// Column of P^{-1} belonging to the family's beta branch (1 or 2): the
/// direction (q_{1i}, q_{2i}) in (u1, u2) space excited by that branch.
inline Eigen::Vector2d branch_direction(const ParamFamily& fam, const ConstantState& cs, int branch) {
  const bool plus = (branch == 1) != fam.beta2_is_plus_root;
  return cs.Pinv.col(plus ? 0 : 1);
}

/// The diagonalized nonlinearity of the family at alpha.
inline Eigen::Vector2d reduced_nonlinearity(const ParamFamily& fam, double alpha, double v1, double v2) {
  const SystemParams p = fam(alpha);
  return reduced_nonlinearity(p, linearization(p), v1, v2);
}

namespace detail {

inline std::vector<double> sample_interval(double lo, double hi, int count) {
  std::vector<double> xs(count);
  for (int k = 0; k < count; ++k) {
    xs[k] = k == count - 1 ? hi : lo + (hi - lo) * (static_cast<double>(k) / (count - 1));
  }
  return xs;
}

// Decide which root the analytic formula calls beta2 at alpha = 0.
inline bool match_beta2_root(const ParamFamily& fam) {
  if (!fam.analytic_beta) return false;
  const ConstantState cs = linearization(fam(0.0));
  const double target = (*fam.analytic_beta)(0.0).beta2;
  return std::abs(cs.beta1 - target) < std::abs(cs.beta2 - target);
}

inline void validate_family(const ParamFamily& fam) {
  for (double alpha : sample_interval(-fam.delta, fam.delta, 101)) {
    try {
      linearization(fam(alpha));
    } catch (const Error& e) {
      throw Error(Errc::DomainViolation, fam.label + " invalid at alpha=" + std::to_string(alpha) +
                                             ": " + e.what());
    }
  }
}

}  // namespace detail

/// lambda1 = lambda2 = lambda(alpha), a11 = a22 = a(alpha), a12 = a21 = b(alpha).
inline ParamFamily sphere_symmetric_family(std::function<double(double)> lambda,
                                           std::function<double(double)> a,
                                           std::function<double(double)> b, double q,
                                           double delta = 0.2) {
  if (!(q > 2.0)) throw Error(Errc::InvalidArgument, "exponent q must exceed 2");
  if (!(delta > 0.0)) throw Error(Errc::InvalidArgument, "delta must be positive");
  for (double alpha : detail::sample_interval(-delta, delta, 101)) {
    const double l = lambda(alpha);
    const double av = a(alpha);
    const double bv = b(alpha);
    if (!(l * (av + bv) > 0.0)) {
      throw Error(Errc::DomainViolation,
                  "lambda (a + b) must be positive, fails at alpha=" + std::to_string(alpha));
    }
    if (av == bv) {
      throw Error(Errc::DomainViolation, "a = b makes beta2 vanish at alpha=" + std::to_string(alpha));
    }
  }
  ParamFamily fam;
  fam.delta = delta;
  fam.label = "symmetric";
  fam.eval = [=](double alpha) {
    const double l = lambda(alpha);
    const double av = a(alpha);
    const double bv = b(alpha);
    return SystemParams(l, l, av, bv, bv, av, q);
  };
  fam.analytic_beta = [=](double alpha) {
    const double l = lambda(alpha);
    const double av = a(alpha);
    const double bv = b(alpha);
    return BetaPair{l, l * (av - bv) / (av + bv)};
  };
  fam.beta2_is_plus_root = detail::match_beta2_root(fam);
  detail::validate_family(fam);
  return fam;
}

enum class Theorem5Case {
  EqLambda,
  Lt_aDominant,
  Lt_bDominant_sqrt6,
  Lt_mixed_b2,
  Lt_a11eq_a21,
  Lt_a12eq_a22,
};

inline std::string_view to_string(Theorem5Case c) {
  switch (c) {
    case Theorem5Case::EqLambda: return "EqLambda";
    case Theorem5Case::Lt_aDominant: return "Lt_aDominant";
    case Theorem5Case::Lt_bDominant_sqrt6: return "Lt_bDominant_sqrt6";
    case Theorem5Case::Lt_mixed_b2: return "Lt_mixed_b2";
    case Theorem5Case::Lt_a11eq_a21: return "Lt_a11eq_a21";
    case Theorem5Case::Lt_a12eq_a22: return "Lt_a12eq_a22";
  }
  return "?";
}

inline std::optional<Theorem5Case> parse_theorem5_case(std::string_view s) {
  for (auto c : {Theorem5Case::EqLambda, Theorem5Case::Lt_aDominant, Theorem5Case::Lt_bDominant_sqrt6,
                 Theorem5Case::Lt_mixed_b2, Theorem5Case::Lt_a11eq_a21, Theorem5Case::Lt_a12eq_a22}) {
    if (s == to_string(c)) return c;
  }
  return std::nullopt;
}

struct Theorem5Aux {
  double lambda = 3.0;    ///< EqLambda: lambda in (lambda0, inf) outside the spectrum
  double epsilon = 0.1;   ///< Lt_aDominant, Lt_a11eq_a21: epsilon in (0, 0.5]
  double delta = 0.2;
};

namespace detail {

inline double distance_to_spectrum(double x, const std::vector<SpectrumEntry>& spectrum) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& e : spectrum) d = std::min(d, std::abs(x - e.eigenvalue));
  return d;
}

}  // namespace detail

/// The explicit families a11 = lambda1 a, a12 = lambda1 b, a21 = lambda2 b,
/// a22 = lambda2 a with lambda_i linear in (alpha + 1), built so that
/// beta2(0) = beta2'(0) = lambda0/(q-2). `spectrum` is the spectrum of the
/// Laplacian used to vet lambda0 and the non-resonance of beta1.
inline ParamFamily theorem5_case(Theorem5Case which, double lambda0, double q,
                                 const std::vector<SpectrumEntry>& spectrum, Theorem5Aux aux = {}) {
  if (!(q > 2.0)) throw Error(Errc::InvalidArgument, "exponent q must exceed 2");
  const auto hit = std::find_if(spectrum.begin(), spectrum.end(), [&](const SpectrumEntry& e) {
    return std::abs(e.eigenvalue - lambda0) <= 1e-9 * std::max(1.0, lambda0);
  });
  if (lambda0 == 0.0 || hit == spectrum.end() || hit->multiplicity % 2 == 0) {
    throw Error(Errc::InvalidArgument, "lambda0 must be a nonzero eigenvalue of odd multiplicity");
  }
  const double qm = q - 2.0;
  const double eps = aux.epsilon;
  const bool uses_eps = which == Theorem5Case::Lt_aDominant || which == Theorem5Case::Lt_a11eq_a21;
  if (uses_eps && !(eps > 0.0 && eps <= 0.5)) {
    throw Error(Errc::InvalidArgument, "epsilon must lie in (0, 0.5]");
  }

  double a = 0.0, b = 0.0, l1_unit = 0.0, ratio = 1.0, beta1_unit = 0.0;
  switch (which) {
    case Theorem5Case::EqLambda: {
      const double lam = aux.lambda;
      if (!(lam > lambda0)) throw Error(Errc::InvalidArgument, "EqLambda needs lambda > lambda0");
      if (detail::distance_to_spectrum(lam, spectrum) <= 1e-9) {
        throw Error(Errc::InvalidArgument, "EqLambda needs lambda outside the spectrum");
      }
      a = (lambda0 + lam) / qm;
      b = (lam - lambda0) / qm;
      l1_unit = lam / qm;
      ratio = 1.0;
      beta1_unit = lam / qm;
      break;
    }
    case Theorem5Case::Lt_aDominant: {
      const double r = std::sqrt(5.0 + 4.0 * eps);
      a = 1.0;
      b = eps;
      l1_unit = 2.0 * (1.0 + eps) * lambda0 / ((2.0 + eps + eps * r) * qm);
      ratio = 1.0 + eps;
      beta1_unit = (2.0 + eps - eps * r) * lambda0 / ((2.0 + eps + eps * r) * qm);
      break;
    }
    case Theorem5Case::Lt_bDominant_sqrt6: {
      const double s6 = std::sqrt(6.0);
      a = 1.0;
      b = s6;
      l1_unit = (1.0 + s6) * lambda0 / (5.0 * qm);
      ratio = 2.0;
      beta1_unit = -2.0 * lambda0 / (5.0 * qm);
      break;
    }
    case Theorem5Case::Lt_mixed_b2: {
      const double s6 = std::sqrt(6.0);
      a = 1.0;
      b = 2.0;
      l1_unit = 3.0 * lambda0 / ((3.0 + 2.0 * s6) * qm);
      ratio = 5.0;
      beta1_unit = (3.0 - 2.0 * s6) * lambda0 / ((3.0 + 2.0 * s6) * qm);
      break;
    }
    case Theorem5Case::Lt_a11eq_a21: {
      const double r = std::sqrt((1.0 + eps) * (4.0 + eps * eps + eps * eps * eps));
      const double c = (2.0 + eps) * (1.0 + eps);
      a = 1.0 + eps;
      b = 1.0;
      l1_unit = 2.0 * (2.0 + eps) * lambda0 / ((c + r) * qm);
      ratio = 1.0 + eps;
      beta1_unit = (c - r) * lambda0 / ((c + r) * qm);
      break;
    }
    case Theorem5Case::Lt_a12eq_a22: {
      const double s7 = std::sqrt(7.0);
      a = 1.0;
      b = 3.0;
      l1_unit = 2.0 * lambda0 / ((1.0 + s7) * qm);
      ratio = 3.0;
      beta1_unit = (1.0 - s7) * lambda0 / ((1.0 + s7) * qm);
      break;
    }
  }

  ParamFamily fam;
  fam.delta = aux.delta;
  fam.label = std::string("theorem5:") + std::string(to_string(which));
  fam.product_form = ProductCoupling{a, b};
  fam.eval = [=](double alpha) {
    const double l1 = l1_unit * (alpha + 1.0);
    const double l2 = ratio * l1;
    return SystemParams(l1, l2, l1 * a, l1 * b, l2 * b, l2 * a, q);
  };
  fam.analytic_beta = [=](double alpha) {
    return BetaPair{beta1_unit * (alpha + 1.0), lambda0 / qm * (alpha + 1.0)};
  };
  fam.beta2_is_plus_root = detail::match_beta2_root(fam);

  // Construction-time guards on the inequalities each case relies on.
  if (a == b) throw Error(Errc::DomainViolation, "a = b");
  if (detail::distance_to_spectrum(qm * beta1_unit, spectrum) < 1e-6) {
    throw Error(Errc::DomainViolation, "(q-2) beta1(0) is resonant with the spectrum");
  }
  detail::validate_family(fam);
  return fam;
}

/// Hypothesis checks at alpha = 0. Booleans for the symmetric-family
/// conditions are present only when the family is symmetric at alpha = 0.
struct ConditionReport {
  bool b1_unique_constant = false;
  bool b2_distinct_nonzero = false;
  bool b3_odd_kernel = false;
  bool b4_transversal = false;
  std::optional<bool> a1;
  std::optional<bool> a2;        ///< (q-2) beta1(0) avoids the whole spectrum
  std::optional<bool> a2_even;   ///< lambda(0) avoids {2j(2j+n-1)/(q-2)}: even modes only
  std::optional<bool> a3;
  double beta1_at_0 = 0.0;
  double beta2_at_0 = 0.0;
  double beta1_prime_at_0 = 0.0;
  double beta2_prime_at_0 = 0.0;
  double fd_step = 1e-5;
  double beta1_resonance_distance = 0.0;  ///< distance of (q-2) beta1(0) to the spectrum
  int kernel_dimension = 0;
  std::optional<int> j0;                  ///< spectrum index matched by (q-2) beta2(0)
  std::optional<int> resonant_branch;     ///< 1 or 2 when exactly one branch is resonant
  std::string notes;

  bool all_b() const { return b1_unique_constant && b2_distinct_nonzero && b3_odd_kernel && b4_transversal; }
};

inline ConditionReport check_conditions(const ParamFamily& fam, const std::vector<SpectrumEntry>& spectrum) {
  constexpr double kMatchTol = 1e-9;
  constexpr double kResonanceTol = 1e-6;
  constexpr double kSlopeTol = 1e-8;
  ConditionReport rep;
  const double h = rep.fd_step;

  rep.b1_unique_constant = true;
  rep.b2_distinct_nonzero = true;
  for (double alpha : detail::sample_interval(-fam.delta, fam.delta, 101)) {
    const SystemParams p = fam(alpha);
    try {
      const ConstantPair ub = constant_solution(p);
      try {
        linearization(p, ub);
      } catch (const Error&) {
        rep.b2_distinct_nonzero = false;
      }
    } catch (const Error&) {
      rep.b1_unique_constant = false;
      rep.b2_distinct_nonzero = false;
    }
  }
  if (!rep.b1_unique_constant || !rep.b2_distinct_nonzero) {
    rep.notes = "constant solution or spectrum of A degenerates on the sampled interval";
    return rep;
  }

  const SystemParams p0 = fam(0.0);
  const double qm = p0.q - 2.0;
  const BetaPair b0 = family_betas(fam, 0.0);
  const BetaPair bp = family_betas(fam, h);
  const BetaPair bm = family_betas(fam, -h);
  rep.beta1_at_0 = b0.beta1;
  rep.beta2_at_0 = b0.beta2;
  rep.beta1_prime_at_0 = (bp.beta1 - bm.beta1) / (2.0 * h);
  rep.beta2_prime_at_0 = (bp.beta2 - bm.beta2) / (2.0 * h);

  auto match = [&](double x) -> std::optional<int> {
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
      if (std::abs(spectrum[i].eigenvalue - x) <= kMatchTol * std::max(1.0, std::abs(x))) {
        return static_cast<int>(i);
      }
    }
    return std::nullopt;
  };
  const auto m1 = match(qm * b0.beta1);
  const auto m2 = match(qm * b0.beta2);
  rep.beta1_resonance_distance = detail::distance_to_spectrum(qm * b0.beta1, spectrum);
  rep.kernel_dimension = (m1 ? spectrum[*m1].multiplicity : 0) + (m2 ? spectrum[*m2].multiplicity : 0);
  rep.b3_odd_kernel = rep.kernel_dimension % 2 == 1;
  if (m2) rep.j0 = *m2;
  if (m1 && !m2) rep.j0 = *m1;
  if (m1 && !m2) rep.resonant_branch = 1;
  if (m2 && !m1) rep.resonant_branch = 2;

  bool b4 = true;
  const bool lambda_equal = p0.lambda1 == p0.lambda2;
  auto transversal = [&](double beta, double slope) {
    return std::abs(slope) > kSlopeTol &&
           (!lambda_equal || std::abs(beta - p0.lambda1) > kMatchTol * std::max(1.0, std::abs(beta)));
  };
  if (m1) b4 = b4 && transversal(b0.beta1, rep.beta1_prime_at_0);
  if (m2) b4 = b4 && transversal(b0.beta2, rep.beta2_prime_at_0);
  rep.b4_transversal = b4;

  const bool symmetric = lambda_equal && p0.a11 == p0.a22 && p0.a12 == p0.a21;
  if (symmetric) {
    const double lam = p0.lambda1;
    const double av = p0.a11;
    const double bv = p0.a12;
    rep.a1 = lam * (av + bv) > 0.0;
    // The symmetric beta1 equals lambda, so (q-2) beta1(0) = (q-2) lambda(0).
    rep.a2 = rep.beta1_resonance_distance >= kResonanceTol;
    bool even_ok = true;
    for (std::size_t i = 2; i < spectrum.size(); i += 2) {
      if (spectrum[i].eigenvalue != 0.0 &&
          std::abs(qm * lam - spectrum[i].eigenvalue) < kResonanceTol) {
        even_ok = false;
      }
    }
    rep.a2_even = even_ok;
    const double sym_beta = lam * (av - bv) / (av + bv);
    const auto ms = match(qm * sym_beta);
    rep.a3 = ms && spectrum[*ms].eigenvalue != 0.0 && std::abs(rep.beta2_prime_at_0) > kSlopeTol;
    if (rep.a2 && rep.a2_even && *rep.a2 != *rep.a2_even) {
      rep.notes = "(q-2) lambda(0) resonates with an odd mode only; full-spectrum check is stricter";
    }
  }
  return rep;
}

}  // namespace schro
