#include "demix/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "demix/errors.hpp"
#include "demix/io.hpp"

namespace demix {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and remembers which were consumed, so that
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string prefix, std::vector<std::string>& problems)
      : j_(j), prefix_(std::move(prefix)), problems_(problems) {
    if (!j_.is_object()) problems_.push_back(prefix_ + " (expected object)");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      problems_.push_back(prefix_ + key + " (wrong type)");
    }
  }

  void mark(const char* key) { seen_.insert(key); }

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  const json& child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    if (!has(key)) return empty;
    return j_.at(key);
  }

  void finish() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) problems_.push_back(prefix_ + it.key() + " (unknown key)");
  }

 private:
  const json& j_;
  std::string prefix_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& what, std::vector<std::string>& problems) {
  if (!ok) problems.push_back(what);
}

InitialKind parse_initial_kind(const std::string& s, std::vector<std::string>& problems) {
  if (s == "constant_noise" || s == "constant") return InitialKind::ConstantNoise;
  if (s == "step") return InitialKind::Step;
  if (s == "csv") return InitialKind::Csv;
  if (s == "cosine") return InitialKind::Cosine;
  problems.push_back("initial.kind (unknown value '" + s + "')");
  return InitialKind::ConstantNoise;
}

std::string initial_kind_name(InitialKind k) {
  switch (k) {
    case InitialKind::ConstantNoise: return "constant_noise";
    case InitialKind::Step: return "step";
    case InitialKind::Csv: return "csv";
    case InitialKind::Cosine: return "cosine";
  }
  return "constant_noise";
}

RunMode parse_mode(const std::string& s, std::vector<std::string>& problems) {
  if (s == "jko") return RunMode::Jko;
  if (s == "pde_compare") return RunMode::PdeCompare;
  if (s == "diagnose") return RunMode::Diagnose;
  if (s == "sweep") return RunMode::Sweep;
  problems.push_back("mode (unknown value '" + s + "')");
  return RunMode::Jko;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += "; ";
    out += v[i];
  }
  return out;
}

}  // namespace

std::string mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::Jko: return "jko";
    case RunMode::PdeCompare: return "pde_compare";
    case RunMode::Diagnose: return "diagnose";
    case RunMode::Sweep: return "sweep";
  }
  return "jko";
}

ModelParams RunConfig::model_params() const {
  ModelParams p;
  p.chi = physics.chi;
  p.m1 = physics.m1;
  p.m2 = physics.m2;
  p.d = physics.d;
  p.model = ConstitutiveModel::parse(physics.model);
  return p;
}

RunConfig parse_config(const json& j, const std::string& base_dir) {
  RunConfig cfg;
  cfg.base_dir = base_dir;
  std::vector<std::string> problems;
  Section root(j, "", problems);

  {
    Section s(root.child("domain"), "domain.", problems);
    s.get("L", cfg.domain.length);
    s.get("N", cfg.domain.cells);
    s.finish();
  }
  {
    Section s(root.child("physics"), "physics.", problems);
    s.get("chi", cfg.physics.chi);
    s.get("m1", cfg.physics.m1);
    s.get("m2", cfg.physics.m2);
    s.get("model", cfg.physics.model);
    s.get("d", cfg.physics.d);
    s.finish();
  }
  {
    Section s(root.child("jko"), "jko.", problems);
    s.get("tau", cfg.jko.step.tau);
    if (s.has("delta0")) {
      double d0 = 0.0;
      s.get("delta0", d0);
      cfg.jko.step.delta0 = d0;
    }
    s.mark("delta0");
    s.get("inner_tol", cfg.jko.step.inner_tol);
    s.get("inner_max_iter", cfg.jko.step.inner_max_iter);
    s.get("step_shrink", cfg.jko.step.step_shrink);
    s.get("n_steps", cfg.jko.n_steps);
    s.get("save_every", cfg.jko.save_every);
    s.finish();
  }
  {
    Section s(root.child("pde"), "pde.", problems);
    s.get("dt", cfg.pde.dt);
    s.get("n_steps", cfg.pde.n_steps);
    s.get("theta_implicit", cfg.pde.theta_implicit);
    s.get("elliptic_tol", cfg.pde.elliptic_tol);
    s.get("elliptic_max_iter", cfg.pde.elliptic_max_iter);
    s.finish();
  }
  {
    Section s(root.child("initial"), "initial.", problems);
    std::string kind = "constant_noise";
    s.get("kind", kind);
    cfg.initial.kind = parse_initial_kind(kind, problems);
    s.get("value", cfg.initial.value);
    s.get("amplitude", cfg.initial.amplitude);
    if (s.has("seed")) {
      std::uint64_t seed = 0;
      s.get("seed", seed);
      cfg.initial.seed = seed;
    }
    s.mark("seed");
    s.get("left_value", cfg.initial.left_value);
    s.get("right_value", cfg.initial.right_value);
    s.get("interface_at", cfg.initial.interface_at);
    s.get("mode", cfg.initial.mode);
    s.get("path", cfg.initial.path);
    s.finish();
  }
  {
    Section s(root.child("outputs"), "outputs.", problems);
    s.get("dir", cfg.outputs.dir);
    s.get("emit_snapshots", cfg.outputs.emit_snapshots);
    s.get("emit_reports", cfg.outputs.emit_reports);
    s.finish();
  }
  {
    Section s(root.child("diagnostics"), "diagnostics.", problems);
    s.get("weak_modes", cfg.diagnostics.weak_modes);
    s.get("el_kappa", cfg.diagnostics.el_kappa);
    s.finish();
  }
  {
    std::string mode = "jko";
    root.get("mode", mode);
    cfg.mode = parse_mode(mode, problems);
  }
  if (root.has("sweep")) {
    const json& sw = root.child("sweep");
    if (!sw.is_array()) {
      problems.push_back("sweep (expected array of override objects)");
    } else {
      for (const auto& o : sw) {
        if (!o.is_object()) problems.push_back("sweep[] (expected object)");
        else cfg.sweep.push_back(o);
      }
    }
  }
  root.mark("sweep");
  root.finish();

  // Value checks.
  check(cfg.domain.length > 0 && std::isfinite(cfg.domain.length), "domain.L (must be > 0)", problems);
  check(cfg.domain.cells >= 2, "domain.N (must be >= 2)", problems);
  check(cfg.physics.chi >= 0, "physics.chi (must be >= 0)", problems);
  check(cfg.physics.m1 > 0, "physics.m1 (must be > 0)", problems);
  check(cfg.physics.m2 > 0, "physics.m2 (must be > 0)", problems);
  check(cfg.physics.d >= 1, "physics.d (must be >= 1)", problems);
  try {
    (void)ConstitutiveModel::parse(cfg.physics.model);
  } catch (const std::exception& e) {
    problems.push_back("physics.model (" + std::string(e.what()) + ")");
  }
  check(cfg.jko.step.tau > 0, "jko.tau (must be > 0)", problems);
  check(!cfg.jko.step.delta0 || *cfg.jko.step.delta0 >= 0, "jko.delta0 (must be >= 0)", problems);
  check(cfg.jko.step.inner_tol > 0, "jko.inner_tol (must be > 0)", problems);
  check(cfg.jko.step.inner_max_iter >= 1, "jko.inner_max_iter (must be >= 1)", problems);
  check(cfg.jko.step.step_shrink > 0 && cfg.jko.step.step_shrink < 1,
        "jko.step_shrink (must lie in (0,1))", problems);
  check(cfg.jko.n_steps >= 0, "jko.n_steps (must be >= 0)", problems);
  check(cfg.jko.save_every >= 1, "jko.save_every (must be >= 1)", problems);
  check(cfg.pde.dt > 0, "pde.dt (must be > 0)", problems);
  check(cfg.pde.n_steps >= 0, "pde.n_steps (must be >= 0)", problems);
  check(cfg.pde.theta_implicit >= 0, "pde.theta_implicit (must be >= 0)", problems);
  check(cfg.pde.elliptic_tol > 0, "pde.elliptic_tol (must be > 0)", problems);
  check(cfg.diagnostics.weak_modes >= 1, "diagnostics.weak_modes (must be >= 1)", problems);
  check(cfg.diagnostics.el_kappa > 0, "diagnostics.el_kappa (must be > 0)", problems);
  switch (cfg.initial.kind) {
    case InitialKind::ConstantNoise:
    case InitialKind::Cosine:
      check(cfg.initial.value > 0 && cfg.initial.value < 1, "initial.value (must lie in (0,1))",
            problems);
      check(cfg.initial.amplitude >= 0, "initial.amplitude (must be >= 0)", problems);
      if (cfg.initial.kind == InitialKind::ConstantNoise)
        check(cfg.initial.amplitude == 0 || cfg.initial.seed.has_value(),
              "initial.seed (required when amplitude > 0)", problems);
      break;
    case InitialKind::Step:
      check(cfg.initial.left_value >= 0 && cfg.initial.left_value <= 1,
            "initial.left_value (must lie in [0,1])", problems);
      check(cfg.initial.right_value >= 0 && cfg.initial.right_value <= 1,
            "initial.right_value (must lie in [0,1])", problems);
      check(cfg.initial.interface_at >= 0 && cfg.initial.interface_at <= cfg.domain.length,
            "initial.interface_at (must lie in [0,L])", problems);
      break;
    case InitialKind::Csv:
      check(!cfg.initial.path.empty(), "initial.path (required for csv)", problems);
      break;
  }
  if (cfg.mode == RunMode::Sweep)
    check(!cfg.sweep.empty(), "sweep (mode sweep needs at least one override)", problems);

  if (!problems.empty()) throw ConfigError("invalid config: " + join(problems));

  if (cfg.jko.step.delta0 && *cfg.jko.step.delta0 > cfg.jko.step.tau * cfg.jko.step.tau) {
    const double clamped = cfg.jko.step.tau * cfg.jko.step.tau;
    std::ostringstream msg;
    msg.precision(17);
    msg << "jko.delta0 = " << *cfg.jko.step.delta0 << " exceeds tau^2; clamped to " << clamped;
    cfg.warnings.push_back(msg.str());
    cfg.jko.step.delta0 = clamped;
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
  std::string base;
  const auto slash = path.find_last_of('/');
  if (slash != std::string::npos) base = path.substr(0, slash);
  return parse_config(j, base);
}

json to_json(const RunConfig& cfg) {
  json j;
  j["domain"] = {{"L", cfg.domain.length}, {"N", cfg.domain.cells}};
  j["physics"] = {{"chi", cfg.physics.chi},
                  {"m1", cfg.physics.m1},
                  {"m2", cfg.physics.m2},
                  {"model", cfg.physics.model},
                  {"d", cfg.physics.d}};
  j["jko"] = {{"tau", cfg.jko.step.tau},
              {"delta0", cfg.jko.step.effective_delta()},
              {"inner_tol", cfg.jko.step.inner_tol},
              {"inner_max_iter", cfg.jko.step.inner_max_iter},
              {"step_shrink", cfg.jko.step.step_shrink},
              {"n_steps", cfg.jko.n_steps},
              {"save_every", cfg.jko.save_every}};
  j["pde"] = {{"dt", cfg.pde.dt},
              {"n_steps", cfg.pde.n_steps},
              {"theta_implicit", cfg.pde.theta_implicit},
              {"elliptic_tol", cfg.pde.elliptic_tol},
              {"elliptic_max_iter", cfg.pde.elliptic_max_iter}};
  json init = {{"kind", initial_kind_name(cfg.initial.kind)}};
  switch (cfg.initial.kind) {
    case InitialKind::ConstantNoise:
      init["value"] = cfg.initial.value;
      init["amplitude"] = cfg.initial.amplitude;
      if (cfg.initial.seed) init["seed"] = *cfg.initial.seed;
      break;
    case InitialKind::Cosine:
      init["value"] = cfg.initial.value;
      init["amplitude"] = cfg.initial.amplitude;
      init["mode"] = cfg.initial.mode;
      break;
    case InitialKind::Step:
      init["left_value"] = cfg.initial.left_value;
      init["right_value"] = cfg.initial.right_value;
      init["interface_at"] = cfg.initial.interface_at;
      break;
    case InitialKind::Csv:
      init["path"] = cfg.initial.path;
      break;
  }
  j["initial"] = init;
  j["outputs"] = {{"dir", cfg.outputs.dir},
                  {"emit_snapshots", cfg.outputs.emit_snapshots},
                  {"emit_reports", cfg.outputs.emit_reports}};
  j["diagnostics"] = {{"weak_modes", cfg.diagnostics.weak_modes},
                      {"el_kappa", cfg.diagnostics.el_kappa}};
  j["mode"] = mode_name(cfg.mode);
  if (!cfg.sweep.empty()) j["sweep"] = cfg.sweep;
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("outputs");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double unit_symmetric(std::uint64_t bits) {
  const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;  // [0,1)
  return 2.0 * u - 1.0;
}

MixtureState build_initial_state(const RunConfig& cfg) {
  const Grid1D grid = cfg.grid();
  const std::size_t n = grid.size();
  std::vector<double> c(n);
  switch (cfg.initial.kind) {
    case InitialKind::ConstantNoise: {
      std::mt19937_64 rng(cfg.initial.seed.value_or(0));
      for (std::size_t k = 0; k < n; ++k) {
        const double noise = cfg.initial.amplitude > 0 ? unit_symmetric(rng()) : 0.0;
        c[k] = cfg.initial.value + cfg.initial.amplitude * noise;
      }
      break;
    }
    case InitialKind::Cosine: {
      const double pi = std::acos(-1.0);
      for (std::size_t k = 0; k < n; ++k)
        c[k] = cfg.initial.value + cfg.initial.amplitude *
                                       std::cos(pi * cfg.initial.mode * grid.center(k) /
                                                grid.length());
      break;
    }
    case InitialKind::Step: {
      // Cell averages of the exact step, so the mass matches the continuum value.
      for (std::size_t k = 0; k < n; ++k) {
        const double a = grid.face(k), b = grid.face(k + 1);
        const double x = cfg.initial.interface_at;
        const double left_len = std::clamp(x - a, 0.0, b - a);
        c[k] = (cfg.initial.left_value * left_len +
                cfg.initial.right_value * (b - a - left_len)) / (b - a);
      }
      break;
    }
    case InitialKind::Csv: {
      std::string path = cfg.initial.path;
      if (!path.empty() && path[0] != '/' && !cfg.base_dir.empty())
        path = cfg.base_dir + "/" + path;
      std::vector<double> v;
      try {
        v = read_profile_csv(path);
      } catch (const std::exception& e) {
        throw ConfigError("initial.path: " + std::string(e.what()));
      }
      if (v.size() != n)
        throw ConfigError("initial.path: profile has " + std::to_string(v.size()) +
                          " values, domain.N is " + std::to_string(n));
      c = std::move(v);
      break;
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    if (!(c[k] >= 0.0 && c[k] <= 1.0))
      throw ConfigError("initial profile leaves [0,1] at cell " + std::to_string(k));
  return MixtureState::from_c1(Profile(grid, std::move(c)));
}

}  // namespace demix
