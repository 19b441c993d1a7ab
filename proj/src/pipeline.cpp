#include "demix/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "demix/diagnostics.hpp"
#include "demix/errors.hpp"
#include "demix/io.hpp"
#include "demix/pde_reference.hpp"

namespace demix {

using nlohmann::json;

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty()) return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

json json_number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

struct Artifacts {
  std::string dir;
  std::string hash;
  std::vector<std::string> files;

  std::string path(const std::string& name) {
    files.push_back(name);
    return join_path(dir, name);
  }
};

void write_resolved(Artifacts& a, const RunConfig& cfg) {
  json j = to_json(cfg);
  if (!cfg.warnings.empty()) j["warnings"] = cfg.warnings;
  write_json(a.path("config.resolved.json"), a.hash, j);
}

void write_error(const std::string& dir, const std::string& hash, const ExitReport& rep,
                 const std::string& type) {
  if (dir.empty()) return;
  try {
    ensure_directory(dir);
    json j = {{"status", rep.status}, {"exit_code", rep.code}, {"type", type},
              {"message", rep.message}};
    write_json(join_path(dir, "error.json"), hash, j);
  } catch (const std::exception&) {
    // Best effort only; the exit code still carries the failure.
  }
}

std::vector<std::string> collect_violations(const std::vector<EstimateReport>& reps) {
  std::vector<std::string> v;
  for (const auto& r : reps)
    if (r.proved && !r.holds) v.push_back(r.name);
  return v;
}

void write_reports(Artifacts& a, const std::string& name, const std::vector<EstimateReport>& reps) {
  json arr = json::array();
  for (const auto& r : reps) arr.push_back(report_to_json(r));
  write_json(a.path(name), a.hash, {{"reports", arr}});
}

void write_trajectory_csv(Artifacts& a, const Trajectory& tr) {
  const double tau = tr.cfg.tau;
  std::vector<std::vector<std::string>> rows;
  rows.reserve(tr.steps.size());
  double prev_entropy = tr.initial_entropy;
  for (std::size_t i = 0; i < tr.steps.size(); ++i) {
    const JkoStepRecord& rec = tr.steps[i];
    const std::size_t n = i + 1;
    double eula = std::nan("");
    if (rec.flags.q_available)
      eula = norm(euler_lagrange_residual(rec, tr.params), NormKind::L2);
    rows.push_back({std::to_string(n), format_double(static_cast<double>(n) * tau),
                    format_double(rec.energy), format_double(rec.entropy),
                    format_double(rec.w_step_sq), format_double(rec.w_step_sq / (2.0 * tau)),
                    format_double(prev_entropy - rec.entropy), format_double(eula),
                    format_double(rec.state.c1.mass()), format_double(rec.state.c1.min()),
                    format_double(rec.state.c1.max()), std::to_string(rec.clamp_count),
                    std::to_string(rec.inner_iters), std::to_string(flag_bits(rec.flags))});
    prev_entropy = rec.entropy;
  }
  write_csv(a.path("trajectory.csv"), a.hash,
            {"n", "t", "E", "H", "w_step_sq", "kinetic", "entropy_drop", "eula_residual",
             "mass_c1", "min_c1", "max_c1", "clamp_count", "inner_iters", "flags"},
            rows);
}

// Long format: one row per (n, cell). Holds every state so that a run can be
// diagnosed again from disk.
void write_states_csv(Artifacts& a, const Trajectory& tr) {
  std::vector<std::vector<std::string>> rows;
  const std::size_t cells = tr.initial.c1.size();
  rows.reserve((tr.steps.size() + 1) * cells);
  for (std::size_t n = 0; n <= tr.steps.size(); ++n) {
    const MixtureState& s = tr.state(n);
    for (std::size_t k = 0; k < cells; ++k)
      rows.push_back({std::to_string(n), std::to_string(k), format_double(s.c1[k])});
  }
  write_csv(a.path("states.csv"), a.hash, {"n", "k", "c1"}, rows);
}

void write_snapshots(Artifacts& a, const Trajectory& tr, int every) {
  ensure_directory(join_path(a.dir, "snapshots"));
  for (std::size_t n = 0; n <= tr.steps.size(); ++n) {
    if (n % static_cast<std::size_t>(every) != 0 && n != tr.steps.size()) continue;
    write_profile_csv(a.path("snapshots/" + std::to_string(n) + ".csv"), a.hash, tr.state(n));
  }
}

void finish_with_reports(ExitReport& rep, Artifacts& a, const std::vector<EstimateReport>& reps,
                         bool write, const std::string& name) {
  if (write) write_reports(a, name, reps);
  rep.violations = collect_violations(reps);
  if (!rep.violations.empty()) {
    rep.code = kExitProvedViolation;
    rep.status = "proved_violation";
    rep.message = "proved inequality violated:";
    for (const auto& v : rep.violations) rep.message += " " + v;
  }
}

ExitReport run_jko(const RunConfig& cfg, Artifacts& a) {
  ExitReport rep;
  const ModelParams params = cfg.model_params();
  const MixtureState initial = build_initial_state(cfg);
  const Trajectory tr = run_trajectory(initial, cfg.jko.step, params, cfg.jko.n_steps);
  write_trajectory_csv(a, tr);
  write_states_csv(a, tr);
  if (cfg.outputs.emit_snapshots) write_snapshots(a, tr, cfg.jko.save_every);
  const bool want_reports = cfg.outputs.emit_reports || cfg.mode == RunMode::Diagnose;
  if (want_reports || cfg.mode == RunMode::Diagnose) {
    const auto reps = run_all_diagnostics(tr, cfg.diagnostics);
    finish_with_reports(rep, a, reps, want_reports, "reports.json");
  }
  return rep;
}

ExitReport run_pde_compare(const RunConfig& cfg, Artifacts& a) {
  ExitReport rep;
  const ModelParams params = cfg.model_params();
  const MixtureState initial = build_initial_state(cfg);
  const double horizon = cfg.pde.dt * cfg.pde.n_steps;
  const DecaySeries s = compare_energy_decay(initial.c1, params, cfg.pde, horizon);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < s.t.size(); ++i)
    rows.push_back({format_double(s.t[i]), format_double(s.e_local[i]),
                    format_double(s.e_nonlocal[i]), format_double(s.mass_local[i]),
                    format_double(s.mass_nonlocal[i]), format_double(s.clamp_local[i]),
                    format_double(s.clamp_nonlocal[i])});
  write_csv(a.path("energy_decay.csv"), a.hash,
            {"t", "E_local", "E_nonlocal", "mass_local", "mass_nonlocal", "clamp_local",
             "clamp_nonlocal"},
            rows);
  if (cfg.outputs.emit_snapshots) {
    ensure_directory(join_path(a.dir, "snapshots"));
    write_profile_csv(a.path("snapshots/final_local.csv"), a.hash,
                      MixtureState::from_c1(s.final_local));
    write_profile_csv(a.path("snapshots/final_nonlocal.csv"), a.hash,
                      MixtureState::from_c1(s.final_nonlocal));
  }
  if (cfg.outputs.emit_reports) {
    const double e0 = s.e_local.front();
    const double tol = 1e-8 * std::abs(e0);
    std::vector<EstimateReport> reps;
    auto ordering = make_report("nonlocal_below_local", s.e_nonlocal.back(), s.e_local.back(),
                                false);
    ordering.context = {{"terminal_ratio", s.terminal_ratio},
                        {"first_crossing", s.first_crossing},
                        {"horizon", horizon},
                        {"dt", cfg.pde.dt}};
    reps.push_back(ordering);
    reps.push_back(make_report("monotone_decay_local", s.max_increase_local, tol, false));
    reps.push_back(make_report("monotone_decay_nonlocal", s.max_increase_nonlocal, tol, false));
    auto clamp = make_report("clamp_budget", std::max(s.clamp_local.back(), s.clamp_nonlocal.back()),
                             1e-6 * initial.c1.mass(), false);
    clamp.holds = s.clamp_budget_ok;
    reps.push_back(clamp);
    finish_with_reports(rep, a, reps, true, "reports.json");
  }
  return rep;
}

ExitReport run_single(const RunConfig& cfg);

ExitReport run_sweep(const RunConfig& cfg, Artifacts& a) {
  const json base = to_json(cfg);
  const std::size_t members = cfg.sweep.size();
  std::vector<ExitReport> results(members);
  std::vector<RunConfig> configs;
  configs.reserve(members);
  for (std::size_t i = 0; i < members; ++i) {
    json merged = base;
    merged.erase("sweep");
    merged["mode"] = "jko";
    merged.merge_patch(cfg.sweep[i]);
    merged["outputs"]["dir"] = join_path(cfg.outputs.dir, "member_" + std::to_string(i));
    RunConfig member = parse_config(merged, cfg.base_dir);
    if (member.mode == RunMode::Sweep) throw ConfigError("sweep[] may not select mode sweep");
    configs.push_back(std::move(member));
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < members; i = next.fetch_add(1))
      results[i] = run_single(configs[i]);
  };
  const unsigned nw = std::min<unsigned>(sweep_workers(), static_cast<unsigned>(members));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < nw; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Summary, in member order.
  ExitReport rep;
  json list = json::array();
  std::vector<std::vector<double>> finals(members);
  for (std::size_t i = 0; i < members; ++i) {
    const RunConfig& m = configs[i];
    json entry = {{"member", i},
                  {"dir", m.outputs.dir},
                  {"exit_code", results[i].code},
                  {"status", results[i].status},
                  {"tau", m.jko.step.tau},
                  {"N", m.domain.cells},
                  {"n_steps", m.jko.n_steps},
                  {"horizon", m.jko.step.tau * m.jko.n_steps},
                  {"overrides", cfg.sweep[i]}};
    if (results[i].code == kExitOk || results[i].code == kExitProvedViolation) {
      const CsvTable traj = read_csv(join_path(m.outputs.dir, "trajectory.csv"));
      if (!traj.rows.empty()) {
        const std::size_t last = traj.rows.size() - 1;
        entry["final_energy"] = json_number(traj.number(last, "E"));
        entry["final_entropy"] = json_number(traj.number(last, "H"));
      }
      const CsvTable st = read_csv(join_path(m.outputs.dir, "states.csv"));
      const std::size_t cells = m.domain.cells;
      for (std::size_t r = st.rows.size() - cells; r < st.rows.size(); ++r)
        finals[i].push_back(st.number(r, "c1"));
    }
    if (!results[i].violations.empty()) entry["violations"] = results[i].violations;
    list.push_back(entry);
    if (results[i].code != kExitOk && rep.code == kExitOk) {
      rep.code = results[i].code;
      rep.status = results[i].status;
      rep.message = "member " + std::to_string(i) + ": " + results[i].message;
    }
  }
  // L2 gaps between consecutive members' final states on a common grid.
  json gaps = json::array();
  for (std::size_t i = 0; i + 1 < members; ++i) {
    if (finals[i].empty() || finals[i].size() != finals[i + 1].size() ||
        configs[i].domain.length != configs[i + 1].domain.length) {
      gaps.push_back(nullptr);
      continue;
    }
    const double h = configs[i].domain.length / static_cast<double>(finals[i].size());
    double s = 0.0;
    for (std::size_t k = 0; k < finals[i].size(); ++k) {
      const double d = finals[i][k] - finals[i + 1][k];
      s += d * d;
    }
    gaps.push_back(std::sqrt(h * s));
  }
  write_json(a.path("refinement_summary.json"), a.hash,
             {{"members", list}, {"final_state_l2_gaps", gaps}, {"workers", nw}});
  return rep;
}

ExitReport dispatch(const RunConfig& cfg, Artifacts& a) {
  switch (cfg.mode) {
    case RunMode::Jko:
    case RunMode::Diagnose:
      return run_jko(cfg, a);
    case RunMode::PdeCompare:
      return run_pde_compare(cfg, a);
    case RunMode::Sweep:
      return run_sweep(cfg, a);
  }
  return {};
}

template <class F>
ExitReport guarded(const std::string& dir, const std::string& hash, F&& body) {
  ExitReport rep;
  std::string type;
  try {
    return body();
  } catch (const ConfigError& e) {
    rep.code = kExitConfigError;
    rep.status = "config_error";
    rep.message = e.what();
    type = "ConfigError";
  } catch (const std::invalid_argument& e) {
    rep.code = kExitConfigError;
    rep.status = "config_error";
    rep.message = e.what();
    type = "invalid_argument";
  } catch (const NumericalError& e) {
    rep.code = kExitNumericalFailure;
    rep.status = "numerical_failure";
    rep.message = e.what();
    type = "NumericalError";
  } catch (const std::exception& e) {
    rep.code = kExitNumericalFailure;
    rep.status = "numerical_failure";
    rep.message = e.what();
    type = "exception";
  }
  rep.output_dir = dir;
  write_error(dir, hash, rep, type);
  return rep;
}

ExitReport run_single(const RunConfig& cfg) {
  const std::string hash = config_hash(cfg);
  return guarded(cfg.outputs.dir, hash, [&]() {
    Artifacts a{cfg.outputs.dir, hash, {}};
    ensure_directory(a.dir);
    std::error_code ec;
    std::filesystem::remove(join_path(a.dir, "error.json"), ec);
    write_resolved(a, cfg);
    ExitReport rep = dispatch(cfg, a);
    rep.output_dir = a.dir;
    rep.files = a.files;
    rep.warnings = cfg.warnings;
    return rep;
  });
}

}  // namespace

unsigned flag_bits(const StepFlags& f) {
  unsigned b = 0;
  if (f.converged) b |= kFlagConverged;
  if (f.stagnated) b |= kFlagStagnated;
  if (f.degenerate_normalization) b |= kFlagDegenerateNormalization;
  if (f.q_available) b |= kFlagQAvailable;
  if (f.local_only) b |= kFlagLocalOnly;
  return b;
}

json report_to_json(const EstimateReport& r) {
  json ctx = json::object();
  for (const auto& [k, v] : r.context) ctx[k] = json_number(v);
  json j = {{"name", r.name},       {"lhs", json_number(r.lhs)},
            {"rhs", json_number(r.rhs)}, {"holds", r.holds},
            {"margin", json_number(r.margin)}, {"proved", r.proved},
            {"context", ctx}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

unsigned sweep_workers() {
  if (const char* env = std::getenv("DEMIX_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExitReport execute(const RunConfig& cfg) { return run_single(cfg); }

ExitReport run_config_file(const std::string& path) {
  RunConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const ConfigError& e) {
    ExitReport rep;
    rep.code = kExitConfigError;
    rep.status = "config_error";
    rep.message = e.what();
    // Try to place error.json where the outputs would have gone.
    std::string dir;
    try {
      std::ifstream in(path);
      const json j = json::parse(in);
      dir = j.at("outputs").at("dir").get<std::string>();
    } catch (const std::exception&) {
    }
    rep.output_dir = dir;
    write_error(dir, "", rep, "ConfigError");
    return rep;
  }
  return execute(cfg);
}

ExitReport diagnose_directory(const std::string& dir) {
  return guarded(dir, "", [&]() {
    std::ifstream in(join_path(dir, "config.resolved.json"));
    if (!in) throw ConfigError("no config.resolved.json in " + dir);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("malformed config.resolved.json: ") + e.what());
    }
    j.erase("config_hash");
    j.erase("warnings");
    RunConfig cfg = parse_config(j, dir);
    if (cfg.mode != RunMode::Jko && cfg.mode != RunMode::Diagnose)
      throw ConfigError("diagnose needs a jko output directory, found mode " +
                        mode_name(cfg.mode));
    const ModelParams params = cfg.model_params();
    const Grid1D grid = cfg.grid();
    const CsvTable st = read_csv(join_path(dir, "states.csv"));
    const std::size_t cells = grid.size();
    if (st.rows.empty() || st.rows.size() % cells != 0)
      throw ConfigError("states.csv does not match domain.N");
    const std::size_t n_states = st.rows.size() / cells;
    std::vector<MixtureState> states;
    states.reserve(n_states);
    for (std::size_t n = 0; n < n_states; ++n) {
      std::vector<double> c(cells);
      for (std::size_t k = 0; k < cells; ++k) c[k] = st.number(n * cells + k, "c1");
      states.push_back(MixtureState::from_c1(Profile(grid, std::move(c))));
    }
    Trajectory tr{states.front(), energy_E1(states.front().c1, params),
                  entropy_H(states.front(), params), cfg.jko.step, params, {}};
    for (std::size_t n = 1; n < n_states; ++n)
      tr.steps.push_back(reconstruct_step(states[n - 1], states[n], cfg.jko.step, params));

    Artifacts a{dir, st.config_hash, {}};
    ExitReport rep;
    finish_with_reports(rep, a, run_all_diagnostics(tr, cfg.diagnostics), true,
                        "diagnose_reports.json");
    rep.output_dir = dir;
    rep.files = a.files;
    return rep;
  });
}

}  // namespace demix
