// Acceptance driver: one PASS/FAIL line per criterion, tolerances fixed here.
// Exit status is nonzero when a criterion fails that is not listed in
// kKnownFailures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "demix/diagnostics.hpp"
#include "demix/pde_reference.hpp"
#include "demix/pipeline.hpp"
#include "demix/transport.hpp"
#include "oracles/lp_oracle.hpp"
#include "oracles/quantile_oracle.hpp"

using namespace demix;
namespace fs = std::filesystem;

namespace {

const double kPi = std::acos(-1.0);

// Criterion 1.
constexpr int kOraclePairs = 200;
constexpr std::size_t kOracleMaxCells = 16;
constexpr double kQuantileTol = 1e-12;
constexpr double kOracleSeconds = 10.0;
// Criterion 2.
constexpr int kMollifyStates = 100;
constexpr double kMollifySeconds = 10.0;
// Criteria 3, 4, 7, 8.
constexpr std::size_t kSuiteCells = 64;
constexpr int kSuiteSteps = 50;
constexpr double kSuiteInnerTol = 1e-8;
constexpr double kSuiteSeconds = 300.0;
// Criterion 5.
constexpr std::size_t kElCells = 128;
constexpr double kElTau = 0.025;
constexpr int kElSteps = 50;
constexpr double kElConstant = 1.0;
constexpr double kElSlopeMin = 0.75;
constexpr double kElSlopeMax = 1.25;
// Criterion 6.
constexpr double kWeakHorizon = 0.01;
constexpr int kWeakModes = 4;
// Criterion 8.
constexpr double kMeanTol = 1e-10;
// Criterion 9.
constexpr std::size_t kSpinodalCells = 128;
constexpr double kSpinodalNoise = 0.01;
constexpr std::uint64_t kSpinodalSeed = 1;
constexpr double kSpinodalDt = 1e-6;
constexpr double kSpinodalHorizon = 2e-4;
constexpr double kSpinodalSeconds = 120.0;
// Criterion 10.
constexpr double kCrossHorizon = 0.01;
constexpr int kCrossSubsteps = 20;
// Criterion 11.
constexpr int kGradientProfiles = 10;
constexpr double kGradientStep = 1e-6;
constexpr double kGradientTol = 1e-4;

// Criterion 9 fails for the reason recorded in the README.
const std::set<int> kKnownFailures = {9};

struct Line {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Line> g_lines;

void emit(int id, const std::string& name, bool pass, const std::string& detail) {
  g_lines.push_back({id, name, pass, detail});
  std::printf("%s %d %s: %s%s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(),
              !pass && kKnownFailures.count(id) ? " [known failure]" : "");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> vals(const Profile& p) { return {p.values().begin(), p.values().end()}; }

MixtureState step_state(std::size_t n) {
  Grid1D g(1.0, n);
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = k < n / 2 ? 0.2 : 0.8;
  return MixtureState::from_c1(Profile(g, v));
}

MixtureState cosine_state(std::size_t n, double a1, double a2) {
  Grid1D g(1.0, n);
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double x = g.center(k);
    v[k] = 0.5 + a1 * std::cos(kPi * x) + a2 * std::cos(2 * kPi * x);
  }
  return MixtureState::from_c1(Profile(g, v));
}

Trajectory jko_run(const MixtureState& s, double tau, double chi, int steps, double tol) {
  JkoConfig c;
  c.tau = tau;
  c.inner_tol = tol;
  ModelParams p;
  p.chi = chi;
  return run_trajectory(s, c, p, steps);
}

double l2_distance(const Profile& a, const Profile& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(a.grid().h() * s);
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

void criterion_transport_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::size_t> cells(1, kOracleMaxCells);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int lp_bad = 0, q_bad = 0;
  double worst_q = 0.0, worst_lp_ratio = 0.0;
  for (int t = 0; t < kOraclePairs; ++t) {
    const std::size_t n = cells(rng);
    const double L = 0.5 + 1.5 * u(rng);
    std::vector<double> a(n), b(n);
    for (std::size_t k = 0; k < n; ++k) {
      // Some empty cells to exercise degenerate couplings.
      a[k] = u(rng) < 0.15 ? 0.0 : u(rng);
      b[k] = u(rng) < 0.15 ? 0.0 : u(rng);
    }
    a[0] += 1e-3;
    b[n - 1] += 1e-3;
    double sa = 0.0, sb = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      sa += a[k];
      sb += b[k];
    }
    for (auto& x : b) x *= sa / sb;
    Grid1D g(L, n);
    Profile pa(g, a), pb(g, b);
    const double w = wasserstein_1d(pa, pb).w2sq;

    const double q = static_cast<double>(oracle::quantile_w2sq(a, b, L));
    worst_q = std::max(worst_q, std::abs(w - q));
    if (std::abs(w - q) > kQuantileTol) ++q_bad;

    // The LP moves point masses at cell centres; the kernel spreads mass
    // uniformly over cells. Their gap is bounded by e (2 sqrt(w) + e) with
    // e the W2 distance between a density and its centre-point lumping.
    const double h = g.h();
    std::vector<double> ma(n), mb(n);
    for (std::size_t k = 0; k < n; ++k) {
      ma[k] = h * a[k];
      mb[k] = h * b[k];
    }
    const auto x = g.centers();
    const double lp = static_cast<double>(oracle::kantorovich_lp(x, ma, x, mb));
    const double e = h * std::sqrt(pa.mass() / 12.0);
    const double bound = 2.0 * e * (2.0 * std::sqrt(w) + 2.0 * e) + 1e-12;
    worst_lp_ratio = std::max(worst_lp_ratio, std::abs(w - lp) / bound);
    if (std::abs(w - lp) > bound) ++lp_bad;
  }
  const double secs = seconds_since(t0);
  emit(1, "transport_oracle", lp_bad == 0 && q_bad == 0 && secs < kOracleSeconds,
       fmt("%d pairs, LP violations %d (worst gap/bound %.3g), quantile violations %d "
           "(worst %.3g <= %.0e), %.2f s < %.0f s",
           kOraclePairs, lp_bad, worst_lp_ratio, q_bad, worst_q, kQuantileTol, secs,
           kOracleSeconds));
}

void criterion_mollify() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> cells(2, 64);
  int violations = 0, checks = 0;
  double worst = 0.0;
  for (int t = 0; t < kMollifyStates; ++t) {
    const std::size_t n = cells(rng);
    const double L = 0.5 + 1.5 * u(rng);
    std::vector<double> v(n);
    const int shape = t % 3;
    for (std::size_t k = 0; k < n; ++k) {
      if (shape == 0) v[k] = u(rng);
      else if (shape == 1) v[k] = u(rng) < 0.5 ? 0.0 : 1.0;
      else v[k] = std::clamp(0.5 + 0.6 * std::sin(7.0 * k / n + u(rng)), 0.0, 1.0);
    }
    // Both phases need positive mass.
    if (shape == 1) {
      v.front() = 0.0;
      v.back() = 1.0;
    }
    MixtureState s = MixtureState::from_c1(Profile(Grid1D(L, n), v));
    MetricParams mp{0.25 + 2.0 * u(rng), 0.25 + 2.0 * u(rng)};
    for (double delta : {1e-4, 1e-3, 1e-2, 1e-1}) {
      ++checks;
      const double d2 = metric_d_sq(regularize_delta(s, delta), s, mp);
      const double rhs = delta * L * L * L * (s.rho1 / mp.m1 + s.rho2 / mp.m2);
      const bool lib = check_mollify_bound(s, delta, mp).holds;
      worst = std::max(worst, d2 / rhs);
      if (d2 > rhs || !lib) ++violations;
    }
  }
  const double secs = seconds_since(t0);
  emit(2, "mollify_bound", violations == 0 && secs < kMollifySeconds,
       fmt("%d checks, %d violations, worst lhs/rhs %.3g, %.2f s < %.0f s", checks, violations,
           worst, secs, kMollifySeconds));
}

struct SuiteRun {
  double tau;
  double chi;
  Trajectory tr;
};

std::vector<SuiteRun> suite_runs() {
  std::vector<SuiteRun> out;
  for (double chi : {0.0, 4.0})
    for (double tau : {0.05, 0.025})
      out.push_back({tau, chi, jko_run(step_state(kSuiteCells), tau, chi, kSuiteSteps,
                                       kSuiteInnerTol)});
  return out;
}

void criterion_energy(const std::vector<SuiteRun>& suite, double secs) {
  int unconverged = 0, step_fail = 0, tele_fail = 0, steps = 0;
  double worst_slack = -INFINITY;
  for (const auto& r : suite) {
    for (const auto& s : r.tr.steps)
      if (!s.flags.converged) ++unconverged;
    for (const auto& rep : check_step_energy(r.tr)) {
      ++steps;
      if (!rep.holds) ++step_fail;
      worst_slack = std::max(worst_slack, rep.lhs - rep.rhs);
    }
    const auto tele = check_energy_telescoping(r.tr);
    if (!tele.holds) ++tele_fail;
    worst_slack = std::max(worst_slack, tele.lhs - tele.rhs);
  }
  emit(3, "energy_inequalities",
       unconverged == 0 && step_fail == 0 && tele_fail == 0 && secs < kSuiteSeconds,
       fmt("%zu runs, %d step checks failed of %d, %d telescoped failed, unconverged steps %d, "
           "max lhs-rhs %.3g, suite %.1f s < %.0f s",
           suite.size(), step_fail, steps, tele_fail, unconverged, worst_slack, secs,
           kSuiteSeconds));
}

void criterion_entropy(const std::vector<SuiteRun>& suite) {
  int fail = 0, steps = 0;
  double a = 0.0;
  for (const auto& r : suite) {
    if (r.chi != 4.0) continue;
    for (const auto& rep : check_entropy_steps(r.tr)) {
      ++steps;
      if (!rep.holds) ++fail;
      a = rep.context.count("a") ? rep.context.at("a") : a;
    }
    if (!check_entropy_dissipation(r.tr).holds) ++fail;
  }
  emit(4, "entropy_dissipation", fail == 0 && steps > 0 && std::abs(a - kPi / 2) < 1e-15,
       fmt("%d step checks on the demixing runs, %d failed, a = %.17g", steps, fail, a));
}

void criterion_euler_lagrange() {
  const double h = 1.0 / static_cast<double>(kElCells);
  std::vector<double> tols = {1e-4, 1e-6, 1e-8}, worst;
  bool bounded = true;
  std::string detail;
  for (double tol : tols) {
    auto tr = jko_run(step_state(kElCells), kElTau, 4.0, kElSteps, tol);
    double w = 0.0;
    for (const auto& s : tr.steps) {
      const auto rep = check_euler_lagrange(s, tr.params, tol, kElConstant);
      w = std::max(w, rep.lhs);
    }
    if (w > kElConstant * (tol + h)) bounded = false;
    worst.push_back(w);
    detail += fmt("tol %.0e: %.3g; ", tol, w);
  }
  const double slope = std::log(worst[0] / worst[2]) / std::log(tols[0] / tols[2]);
  const bool linear = slope >= kElSlopeMin && slope <= kElSlopeMax;
  emit(5, "euler_lagrange", bounded && linear,
       detail + fmt("bound C(tol + h) with C = %.1f, slope %.3f in [%.2f, %.2f]", kElConstant,
                    slope, kElSlopeMin, kElSlopeMax));
}

void criterion_weak_form() {
  std::vector<std::vector<double>> res;
  for (int steps : {8, 16, 32}) {
    auto tr = jko_run(cosine_state(128, 0.2, 0.1), kWeakHorizon / steps, 4.0, steps, 1e-8);
    std::vector<double> row;
    for (int j = 1; j <= kWeakModes; ++j) row.push_back(check_weak_form_residual(tr, j).lhs);
    res.push_back(row);
  }
  bool ok = true;
  std::string detail;
  for (int j = 0; j < kWeakModes; ++j) {
    std::vector<double> col = {res[0][j], res[1][j], res[2][j]};
    ok = ok && strictly_decreasing(col);
    detail += fmt("j=%d: %.3g > %.3g > %.3g; ", j + 1, col[0], col[1], col[2]);
  }
  emit(6, "weak_form", ok, detail + "tau = T/8, T/16, T/32");
}

void criterion_holder(const std::vector<SuiteRun>& suite) {
  int fail = 0;
  double worst = 0.0;
  for (const auto& r : suite) {
    const auto rep = check_holder_modulus(r.tr);
    if (!rep.holds) ++fail;
    if (rep.rhs > 0) worst = std::max(worst, rep.lhs / rep.rhs);
  }
  emit(7, "holder_modulus", fail == 0,
       fmt("%zu runs, %d failed, worst lhs/rhs %.3g", suite.size(), fail, worst));
}

void criterion_invariants(const std::vector<SuiteRun>& suite) {
  double worst_mean = 0.0;
  bool sum_exact = true, bounds = true, reports = true;
  for (const auto& r : suite) {
    reports = reports && check_invariants(r.tr).holds;
    for (std::size_t n = 0; n <= r.tr.steps.size(); ++n) {
      const auto& s = r.tr.state(n);
      worst_mean = std::max(worst_mean, std::abs(s.c1.mean() - r.tr.initial.rho1));
      for (std::size_t k = 0; k < s.c1.size(); ++k) {
        sum_exact = sum_exact && s.c2[k] == 1.0 - s.c1[k];
        bounds = bounds && s.c1[k] >= 0.0 && s.c1[k] <= 1.0;
      }
    }
  }
  emit(8, "invariants", sum_exact && bounds && reports && worst_mean <= kMeanTol,
       fmt("c2 == 1 - c1 exactly: %s, bounds: %s, max |mean - rho1| %.3g <= %.0e",
           sum_exact ? "yes" : "no", bounds ? "yes" : "no", worst_mean, kMeanTol));
}

void criterion_spinodal() {
  const auto t0 = std::chrono::steady_clock::now();
  Grid1D g(1.0, kSpinodalCells);
  std::mt19937_64 rng(kSpinodalSeed);
  std::vector<double> v(kSpinodalCells);
  for (auto& x : v) x = 0.5 + kSpinodalNoise * unit_symmetric(rng());
  ModelParams p;
  p.chi = 4.0;
  FdConfig cfg;
  cfg.dt = kSpinodalDt;
  const auto s = compare_energy_decay(Profile(g, v), p, cfg, kSpinodalHorizon);
  const double e0 = s.e_local.front();
  const double tol = 1e-8 * e0;
  const bool below = s.e_nonlocal.back() <= s.e_local.back();
  const bool mono = s.max_increase_local <= tol && s.max_increase_nonlocal <= tol;
  const double secs = seconds_since(t0);
  emit(9, "local_vs_nonlocal",
       below && mono && s.clamp_budget_ok && secs < kSpinodalSeconds,
       fmt("E_nonlocal(T) = %.16g, E_local(T) = %.16g, monotone %s, clamp budget %s, "
           "first crossing t = %.3g, %.1f s",
           s.e_nonlocal.back(), s.e_local.back(), mono ? "yes" : "no",
           s.clamp_budget_ok ? "ok" : "exceeded", s.first_crossing, secs));
}

void criterion_cross_validation() {
  const MixtureState init = cosine_state(128, 0.2, 0.0);
  ModelParams p;
  p.chi = 4.0;
  std::vector<double> dist;
  std::string detail;
  for (int steps : {4, 8, 16}) {
    const double tau = kCrossHorizon / steps;
    auto tr = jko_run(init, tau, 4.0, steps, 1e-8);
    FdConfig cfg;
    cfg.dt = tau / kCrossSubsteps;
    const auto fd = run_nonlocal(init.c1, p, cfg, steps * kCrossSubsteps, kCrossSubsteps);
    double worst = 0.0;
    for (int n = 1; n <= steps; ++n)
      worst = std::max(worst, l2_distance(tr.state(n).c1, fd[n]));
    dist.push_back(worst);
    detail += fmt("tau %.4g: %.3g; ", tau, worst);
  }
  emit(10, "jko_pde_cross_validation", strictly_decreasing(dist),
       detail + fmt("dt = tau/%d, max L2 gap over matched times", kCrossSubsteps));
}

void criterion_gradient() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < kGradientProfiles; ++t) {
    const std::size_t n = 16 + 8 * t;
    Grid1D g(1.0, n);
    std::vector<double> v(n);
    const double phase = u(rng);
    for (std::size_t k = 0; k < n; ++k)
      v[k] = 0.5 + 0.3 * std::sin(2 * kPi * (g.center(k) + phase)) + 0.1 * (u(rng) - 0.5);
    ModelParams p;
    p.chi = 4.0 * u(rng);
    const Profile c(g, v);
    const Profile grad = variational_derivative(c, p);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      auto plus = v, minus = v;
      plus[k] += kGradientStep;
      minus[k] -= kGradientStep;
      const double fd = (energy_E1(Profile(g, plus), p) - energy_E1(Profile(g, minus), p)) /
                        (2 * kGradientStep * g.h());
      num += (fd - grad[k]) * (fd - grad[k]);
      den += grad[k] * grad[k];
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  emit(11, "gradient_check", worst <= kGradientTol,
       fmt("%d profiles, worst relative l2 error %.3g <= %.0e", kGradientProfiles, worst,
           kGradientTol));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_determinism() {
  const fs::path root =
      fs::temp_directory_path() / ("demix_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<nlohmann::json> configs;
  for (double chi : {0.0, 4.0})
    for (double tau : {0.05, 0.025})
      configs.push_back({{"domain", {{"N", kSuiteCells}}},
                         {"physics", {{"chi", chi}}},
                         {"jko", {{"tau", tau}, {"n_steps", kSuiteSteps}, {"save_every", 10}}},
                         {"initial", {{"kind", "step"}}}});
  configs.push_back({{"mode", "pde_compare"},
                     {"domain", {{"N", 64}}},
                     {"physics", {{"chi", 4.0}}},
                     {"pde", {{"dt", 1e-6}, {"n_steps", 50}}},
                     {"initial",
                      {{"kind", "constant_noise"}, {"amplitude", 0.01}, {"seed", 5}}}});
  int files = 0, mismatches = 0, errors = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::vector<fs::path> dirs;
    for (int rep = 0; rep < 2; ++rep) {
      auto j = configs[i];
      dirs.push_back(root / fmt("c%zu_r%d", i, rep));
      j["outputs"] = {{"dir", dirs.back().string()}};
      if (execute(parse_config(j)).code != kExitOk) ++errors;
    }
    for (const auto& e : fs::recursive_directory_iterator(dirs[0])) {
      if (e.path().extension() != ".csv") continue;
      ++files;
      const fs::path other = dirs[1] / fs::relative(e.path(), dirs[0]);
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++mismatches;
    }
  }
  fs::remove_all(root);
  emit(12, "determinism", errors == 0 && mismatches == 0 && files > 0,
       fmt("%zu configs run twice, %d CSV files compared, %d differ, %d run errors",
           configs.size(), files, mismatches, errors));
}

}  // namespace

int main() {
  criterion_transport_oracle();
  criterion_mollify();
  const auto t0 = std::chrono::steady_clock::now();
  const auto suite = suite_runs();
  const double suite_secs = seconds_since(t0);
  criterion_energy(suite, suite_secs);
  criterion_entropy(suite);
  criterion_euler_lagrange();
  criterion_weak_form();
  criterion_holder(suite);
  criterion_invariants(suite);
  criterion_spinodal();
  criterion_cross_validation();
  criterion_gradient();
  criterion_determinism();

  int unexpected = 0;
  for (const auto& l : g_lines)
    if (!l.pass && !kKnownFailures.count(l.id)) ++unexpected;
  std::printf("%d/%zu criteria passed, %d unexpected failures\n",
              static_cast<int>(std::count_if(g_lines.begin(), g_lines.end(),
                                             [](const Line& l) { return l.pass; })),
              g_lines.size(), unexpected);
  return unexpected == 0 ? 0 : 1;
}
