#pragma once

// Batch front end shared by the schro_branch executable and the acceptance
// runner. Configs are flat "key = value" files; see configs/ for samples.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "schro/schro.hpp"

namespace schro::cli {

using json = nlohmann::ordered_json;

/// Flat dotted-key configuration.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& origin = "<config>") {
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw Error(Errc::InvalidArgument, origin + ":" + std::to_string(lineno) + ": expected key = value");
      }
      const std::string key = trim(t.substr(0, eq));
      if (key.empty()) throw Error(Errc::InvalidArgument, origin + ":" + std::to_string(lineno) + ": empty key");
      c.set(key, trim(t.substr(eq + 1)));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(Errc::InvalidArgument, "cannot open config " + path);
    return parse(f, path);
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = value;
  }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string str(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double num(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : to_double(key, it->second);
  }

  long long integer(const std::string& key, long long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(it->second, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != it->second.size()) {
      throw Error(Errc::InvalidArgument, "config key " + key + ": not an integer: " + it->second);
    }
    return v;
  }

  bool flag(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw Error(Errc::InvalidArgument, "config key " + key + ": expected true or false");
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split(str(key, ""), ',')) out.push_back(to_double(key, item));
    return out;
  }

  json echo() const {
    json j = json::object();
    for (const auto& k : order_) j[k] = values_.at(k);
    return j;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
  }

 private:
  static double to_double(const std::string& key, const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) {
      throw Error(Errc::InvalidArgument, "config key " + key + ": not a number: " + s);
    }
    return v;
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Rows (j, lambda_j, parity) of the radial spectrum of S^n.
inline void cmd_spectrum(int n, int jmax, std::ostream& out) {
  if (n < 2) throw Error(Errc::InvalidArgument, "sphere dimension n must be >= 2");
  if (jmax < 0) throw Error(Errc::InvalidArgument, "jmax must be >= 0");
  out << "j,lambda_j,parity\n";
  for (int j = 0; j <= jmax; ++j) out << j << ',' << fmt17(eigenvalue(n, j)) << ',' << (j % 2 ? '-' : '+') << '\n';
}

inline SystemParams params_from_list(const std::vector<double>& v) {
  if (v.size() != 7) throw Error(Errc::InvalidArgument, "expected 7 values: lambda1,lambda2,a11,a12,a21,a22,q");
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
}

inline json params_json(const SystemParams& p) {
  return {{"lambda1", p.lambda1}, {"lambda2", p.lambda2}, {"a11", p.a11}, {"a12", p.a12},
          {"a21", p.a21},         {"a22", p.a22},         {"q", p.q}};
}

inline json cmd_classify(const SystemParams& p) {
  const RegimeReport r = classify_regime(p);
  json j;
  j["params"] = params_json(p);
  j["verdict"] = std::string(to_string(r.verdict));
  j["sync_ratio"] = r.sync_ratio ? json(*r.sync_ratio) : json(nullptr);
  j["notes"] = r.notes;
  return j;
}

struct FamilySetup {
  ParamFamily family;
  std::vector<SpectrumEntry> spectrum;
};

inline FamilySetup build_family(const Config& c, int n, int modes) {
  FamilySetup fs;
  fs.spectrum = sphere_radial_spectrum(n, modes - 1);
  const std::string kind = c.str("family.kind", "theorem5");
  const double q = c.num("family.q", 4.0);
  const double delta = c.num("family.delta", 0.2);
  if (kind == "theorem5") {
    const std::string name = c.str("family.case", "EqLambda");
    const auto which = parse_theorem5_case(name);
    if (!which) throw Error(Errc::InvalidArgument, "unknown family.case " + name);
    Theorem5Aux aux;
    aux.lambda = c.num("family.lambda", aux.lambda);
    aux.epsilon = c.num("family.epsilon", aux.epsilon);
    aux.delta = delta;
    fs.family = theorem5_case(*which, c.num("family.lambda0", eigenvalue(n, 1)), q, fs.spectrum, aux);
  } else if (kind == "symmetric") {
    auto affine = [&](const std::string& key) {
      const double v0 = c.num("family." + key, 0.0);
      const double v1 = c.num("family." + key + "_slope", 0.0);
      return std::function<double(double)>([v0, v1](double a) { return v0 + v1 * a; });
    };
    if (!c.has("family.lambda") || !c.has("family.a") || !c.has("family.b")) {
      throw Error(Errc::InvalidArgument, "symmetric family needs family.lambda, family.a, family.b");
    }
    fs.family = sphere_symmetric_family(affine("lambda"), affine("a"), affine("b"), q, delta);
  } else if (kind == "explicit") {
    const SystemParams p0 = params_from_list(c.numbers("family.params"));
    std::vector<double> slope(7, 0.0);
    if (c.has("family.params_slope")) {
      slope = c.numbers("family.params_slope");
      if (slope.size() != 7) throw Error(Errc::InvalidArgument, "family.params_slope needs 7 values");
    }
    fs.family.delta = delta;
    fs.family.label = "explicit";
    fs.family.eval = [p0, slope](double a) {
      return SystemParams(p0.lambda1 + slope[0] * a, p0.lambda2 + slope[1] * a, p0.a11 + slope[2] * a,
                          p0.a12 + slope[3] * a, p0.a21 + slope[4] * a, p0.a22 + slope[5] * a,
                          p0.q + slope[6] * a);
    };
  } else {
    throw Error(Errc::InvalidArgument, "family.kind must be theorem5, symmetric or explicit");
  }
  return fs;
}

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> formats;               ///< csv, json or both
  std::optional<std::vector<std::string>> pipeline;  ///< overrides the config
};

struct RunResult {
  int exit_code = 0;
  json report;
};

namespace detail {

inline json conditions_json(const ConditionReport& r) {
  json j;
  j["b1_unique_constant"] = r.b1_unique_constant;
  j["b2_distinct_nonzero"] = r.b2_distinct_nonzero;
  j["b3_odd_kernel"] = r.b3_odd_kernel;
  j["b4_transversal"] = r.b4_transversal;
  auto opt = [](const std::optional<bool>& b) { return b ? json(*b) : json(nullptr); };
  j["a1"] = opt(r.a1);
  j["a2"] = opt(r.a2);
  j["a2_even"] = opt(r.a2_even);
  j["a3"] = opt(r.a3);
  j["beta1_at_0"] = r.beta1_at_0;
  j["beta2_at_0"] = r.beta2_at_0;
  j["beta1_prime_at_0"] = r.beta1_prime_at_0;
  j["beta2_prime_at_0"] = r.beta2_prime_at_0;
  j["beta1_resonance_distance"] = r.beta1_resonance_distance;
  j["kernel_dimension"] = r.kernel_dimension;
  j["j0"] = r.j0 ? json(*r.j0) : json(nullptr);
  j["notes"] = r.notes;
  return j;
}

inline json event_json(const BifurcationEvent& e) {
  return {{"alpha_star", e.alpha_star},
          {"j0", e.j0},
          {"eigenvalue", e.eigenvalue},
          {"beta_branch", e.beta_branch},
          {"crossing_slope", e.crossing_slope},
          {"resonance_slope", e.resonance_slope},
          {"kernel_dimension", e.kernel_dimension},
          {"direction", {e.direction(0), e.direction(1)}}};
}

inline const char* kCsvHeader =
    "step,alpha,s,epsilon,sync_measure,v_min,v_max,residual_inf,quotient_residual,min_u1,max_u1,min_u2,max_u2,"
    "reflection_defect";

inline void write_branch_csv(const std::filesystem::path& path, const std::vector<BranchPoint>& pts) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::InvalidArgument, "cannot write " + path.string());
  f << kCsvHeader << '\n';
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const auto nv = schro::detail::nodal(p.state);
    const auto& d = p.diagnostics;
    f << i << ',' << fmt17(p.alpha) << ',' << fmt17(p.s) << ',' << fmt17(p.epsilon) << ','
      << fmt17(d.sync_measure) << ',' << fmt17(d.v_min) << ',' << fmt17(d.v_max) << ',' << fmt17(p.residual_inf)
      << ',' << fmt17(d.quotient_residual) << ',' << fmt17(nv.u1.minCoeff()) << ',' << fmt17(nv.u1.maxCoeff())
      << ',' << fmt17(nv.u2.minCoeff()) << ',' << fmt17(nv.u2.maxCoeff()) << ','
      << (d.reflection_defect ? fmt17(*d.reflection_defect) : std::string()) << '\n';
  }
}

inline unsigned thread_width(std::size_t jobs) {
  unsigned width = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SCHRO_BRANCH_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw Error(Errc::InvalidArgument, "SCHRO_BRANCH_THREADS must be a positive integer");
    }
    width = std::min<unsigned>(width, static_cast<unsigned>(v));
  }
  return static_cast<unsigned>(std::min<std::size_t>(width, std::max<std::size_t>(1, jobs)));
}

}  // namespace detail

/// Random positive initial state: a constant in [0.3, 2] per component plus
/// degrees 1..3 with amplitudes up to 0.15 of that constant (sup-normalized
/// harmonics), so the guess stays positive.
inline StateVector random_guess(const GridPtr& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> level(0.3, 2.0);
  std::uniform_real_distribution<double> wiggle(-0.15, 0.15);
  const Eigen::VectorXd pole = g->basis_at(1.0);
  StateVector s = StateVector::constant(g, 1.0, 1.0);
  for (SpectralField* f : {&s.u1, &s.u2}) {
    const double c0 = level(rng);
    *f = SpectralField::constant(g, c0);
    for (int j = 1; j <= std::min(3, g->modes - 1); ++j) f->coeffs(j) += wiggle(rng) * c0 / pole(j);
  }
  return s;
}

/// Newton from `count` seeded guesses; guesses are drawn up front so the
/// result does not depend on the thread count.
inline std::vector<NewtonReport> multistart(const GridPtr& g, const SystemParams& p, int count, std::uint64_t seed,
                                            const NewtonOptions& opts) {
  std::mt19937_64 rng(seed);
  std::vector<StateVector> guesses;
  for (int i = 0; i < count; ++i) guesses.push_back(random_guess(g, rng));
  std::vector<NewtonReport> out(guesses.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < guesses.size(); i = next++) out[i] = try_newton_solve(guesses[i], p, opts);
  };
  const unsigned width = detail::thread_width(guesses.size());
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < width; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

/// Executes the configured stages in order and writes branch.csv and
/// report.json. Exit code 0 iff every stage ran and all checks passed.
inline RunResult cmd_run(const Config& cfg, const RunOptions& ro = {}, std::ostream& log = std::cerr) {
  RunResult res;
  json& rep = res.report;
  rep["config"] = cfg.echo();

  const std::string out_dir = ro.out_dir.value_or(cfg.str("output.dir", "out"));
  const std::string formats = ro.formats.value_or(cfg.str("output.formats", "both"));
  if (formats != "csv" && formats != "json" && formats != "both") {
    throw Error(Errc::InvalidArgument, "format must be csv, json or both");
  }
  const bool want_csv = formats != "json";
  const bool want_json = formats != "csv";
  std::vector<std::string> stages =
      ro.pipeline.value_or(Config::split(cfg.str("pipeline", "conditions,detect,continue,verify"), ','));
  for (const auto& s : stages) {
    if (s != "conditions" && s != "detect" && s != "continue" && s != "verify") {
      throw Error(Errc::InvalidArgument, "unknown pipeline stage " + s);
    }
  }
  if (!stages.empty()) rep["pipeline"] = stages;
  std::filesystem::create_directories(out_dir);

  std::optional<FamilySetup> fs;
  GridPtr grid;
  std::optional<ConditionReport> conditions;
  std::vector<BifurcationEvent> events;
  std::optional<ContinuationResult> branch;
  std::optional<BifurcationEvent> followed;
  json checks = json::array();
  bool all_pass = true;
  auto check = [&](const std::string& name, bool pass, double value, double threshold) {
    checks.push_back({{"name", name}, {"passed", pass}, {"value", value}, {"threshold", threshold}});
    all_pass = all_pass && pass;
  };

  NewtonOptions newton;
  newton.max_iter = static_cast<int>(cfg.integer("newton.max_iter", newton.max_iter));
  newton.abs_tol = cfg.num("newton.abs_tol", newton.abs_tol);
  newton.rel_tol = cfg.num("newton.rel_tol", newton.rel_tol);

  auto flush = [&] {
    if (want_json) {
      std::ofstream f(std::filesystem::path(out_dir) / "report.json", std::ios::binary);
      f << rep.dump(2) << '\n';
    }
    if (want_csv && branch) detail::write_branch_csv(std::filesystem::path(out_dir) / "branch.csv", branch->points);
  };

  std::string stage = "setup";
  try {
    if (!stages.empty()) {
      const int n = static_cast<int>(cfg.integer("manifold.n", 2));
      const int modes = static_cast<int>(cfg.integer("manifold.N", 64));
      fs = build_family(cfg, n, modes);
      grid = build_grid(n, modes, fs->family(0.0).q);
      rep["family"] = {{"label", fs->family.label}, {"params_at_0", params_json(fs->family(0.0))}};
    }
    for (const auto& st : stages) {
      stage = st;
      if (st == "conditions") {
        conditions = check_conditions(fs->family, fs->spectrum);
        rep["conditions"] = detail::conditions_json(*conditions);
      } else if (st == "detect") {
        const double lo = cfg.num("detect.lo", -fs->family.delta);
        const double hi = cfg.num("detect.hi", fs->family.delta);
        events = detect_bifurcations(fs->family, grid, lo, hi);
        rep["events"] = json::array();
        for (const auto& e : events) rep["events"].push_back(detail::event_json(e));
      } else if (st == "continue") {
        if (!conditions) conditions = check_conditions(fs->family, fs->spectrum);
        if (!conditions->all_b()) throw Error(Errc::WrongRegime, "family fails the bifurcation hypotheses");
        if (events.empty()) events = detect_bifurcations(fs->family, grid, -fs->family.delta, fs->family.delta);
        if (events.empty()) throw Error(Errc::WrongRegime, "no bifurcation event detected");
        std::size_t pick = 0;
        if (cfg.has("continuation.event")) {
          pick = static_cast<std::size_t>(cfg.integer("continuation.event", 0));
          if (pick >= events.size()) throw Error(Errc::InvalidArgument, "continuation.event out of range");
        } else {
          for (std::size_t i = 1; i < events.size(); ++i) {
            if (std::abs(events[i].alpha_star) < std::abs(events[pick].alpha_star)) pick = i;
          }
        }
        ContinuationOptions co;
        co.ds = cfg.num("continuation.ds", co.ds);
        co.n_steps = static_cast<int>(cfg.integer("continuation.n_steps", co.n_steps));
        co.eps0 = cfg.num("continuation.eps0", co.eps0);
        co.mirror = cfg.flag("continuation.mirror", false);
        co.newton = newton;
        followed = events[pick];
        branch = continue_branch(*followed, fs->family, grid, co);
        rep["branch"] = {{"event", detail::event_json(*followed)},
                         {"points", branch->points.size()},
                         {"termination", branch->termination}};
      } else if (st == "verify") {
        const double sync_tol = cfg.num("verify.sync_tol", 1e-8);
        if (branch) {
          double worst_res = 0.0, min_u = std::numeric_limits<double>::infinity();
          double min_sync = std::numeric_limits<double>::infinity(), worst_refl = 0.0;
          const std::size_t skip = static_cast<std::size_t>(cfg.integer("verify.sync_after_step", 5));
          for (std::size_t i = 0; i < branch->points.size(); ++i) {
            const auto& p = branch->points[i];
            const auto nv = schro::detail::nodal(p.state);
            worst_res = std::max(worst_res, p.residual_inf);
            min_u = std::min({min_u, nv.u1.minCoeff(), nv.u2.minCoeff()});
            if (i > skip) min_sync = std::min(min_sync, p.diagnostics.sync_measure);
            if (p.diagnostics.reflection_defect) worst_refl = std::max(worst_refl, *p.diagnostics.reflection_defect);
          }
          check("branch_residual_inf", worst_res <= 1e-10, worst_res, 1e-10);
          check("branch_positive", min_u > 0.0, min_u, 0.0);
          const double thr = cfg.num("verify.sync_threshold", 1e-4);
          if (branch->points.size() > skip + 1) check("branch_sync_measure", min_sync >= thr, min_sync, thr);
          if (branch->points.size() >= 3) {
            const KernelFit kf = kernel_fit(branch->points, *followed, fs->family);
            const double ratio = kf.ratio_at_smallest();
            check("kernel_fit_ratio", ratio <= 0.1, ratio, 0.1);
          }
          check("reflection_defect", worst_refl <= 1e-8, worst_refl, 1e-8);
        }
        const double alpha = cfg.num("verify.alpha", 0.0);
        const SystemParams p = fs->family(alpha);
        const RegimeReport regime = classify_regime(p);
        const int count = static_cast<int>(cfg.integer("verify.multistart", 50));
        const std::uint64_t seed = ro.seed.value_or(static_cast<std::uint64_t>(cfg.integer("verify.seed", 42)));
        const auto runs = multistart(grid, p, count, seed, newton);
        int converged = 0;
        double worst_sync = 0.0, worst_ratio = 0.0;
        for (const auto& r : runs) {
          if (!r.converged) continue;
          ++converged;
          worst_sync = std::max(worst_sync, sync_measure(r.state));
          if (regime.verdict == Verdict::SynchronizedOnly_strict) {
            worst_ratio = std::max(worst_ratio, sync_ratio_check(r.state, p));
          }
        }
        rep["multistart"] = {{"alpha", alpha},
                             {"regime", std::string(to_string(regime.verdict))},
                             {"seed", seed},
                             {"guesses", count},
                             {"converged", converged},
                             {"max_sync_measure", worst_sync}};
        switch (regime.verdict) {
          case Verdict::NoSolution_Thm4i:
          case Verdict::NoSolution_Thm5i:
            check("no_positive_solution", converged == 0, converged, 0);
            break;
          case Verdict::SynchronizedOnly_strict:
            check("multistart_sync_measure", worst_sync <= sync_tol, worst_sync, sync_tol);
            check("multistart_sync_ratio", worst_ratio <= 1e-6, worst_ratio, 1e-6);
            break;
          case Verdict::SynchronizedOnly_equal:
            check("multistart_sync_measure", worst_sync <= sync_tol, worst_sync, sync_tol);
            break;
          default:
            break;
        }
      }
    }
  } catch (const Error& e) {
    rep["error"] = {{"stage", stage}, {"code", std::string(to_string(e.code()))}, {"reason", e.what()}};
    log << "stage " << stage << " failed: " << e.what() << '\n';
    rep["verification"] = {{"checks", checks}, {"passed", false}};
    flush();
    res.exit_code = 2;
    return res;
  }
  if (!stages.empty()) rep["verification"] = {{"checks", checks}, {"passed", all_pass}};
  flush();
  res.exit_code = all_pass ? 0 : 1;
  return res;
}

}  // namespace schro::cli
