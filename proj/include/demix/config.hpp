#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "demix/diagnostics.hpp"
#include "demix/energy.hpp"
#include "demix/jko.hpp"
#include "demix/pde_reference.hpp"

namespace demix {

struct DomainConfig {
  double length = 1.0;
  std::size_t cells = 64;
};

struct PhysicsConfig {
  double chi = 0.0;
  double m1 = 1.0;
  double m2 = 1.0;
  std::string model = "arcsin";
  int d = 1;
};

struct JkoRunConfig {
  JkoConfig step;
  int n_steps = 10;
  int save_every = 1;
};

enum class InitialKind { ConstantNoise, Step, Csv, Cosine };

struct InitialConfig {
  InitialKind kind = InitialKind::ConstantNoise;
  /// constant_noise and cosine: base value.
  double value = 0.5;
  double amplitude = 0.0;
  std::optional<std::uint64_t> seed;
  /// step
  double left_value = 0.2;
  double right_value = 0.8;
  double interface_at = 0.5;
  /// cosine
  int mode = 1;
  /// csv
  std::string path;
};

struct OutputConfig {
  std::string dir = "demix_out";
  bool emit_snapshots = true;
  bool emit_reports = true;
};

enum class RunMode { Jko, PdeCompare, Diagnose, Sweep };

struct RunConfig {
  DomainConfig domain;
  PhysicsConfig physics;
  JkoRunConfig jko;
  FdConfig pde;
  InitialConfig initial;
  OutputConfig outputs;
  DiagnosticsOptions diagnostics;
  RunMode mode = RunMode::Jko;
  /// Partial configs merged over this one, one sweep member each.
  std::vector<nlohmann::json> sweep;
  /// Messages produced while resolving (e.g. delta0 clamped to tau^2).
  std::vector<std::string> warnings;
  /// Directory against which relative csv paths are resolved.
  std::string base_dir;

  ModelParams model_params() const;
  Grid1D grid() const { return Grid1D(domain.length, domain.cells); }
};

/// Parses and validates. Throws ConfigError listing every offending key.
RunConfig parse_config(const nlohmann::json& j, const std::string& base_dir = "");
RunConfig load_config(const std::string& path);

/// Fully populated JSON form, including defaults.
nlohmann::json to_json(const RunConfig& cfg);

/// FNV-1a over the canonical dump of to_json with the outputs section removed.
std::string config_hash(const RunConfig& cfg);

/// Deterministic uniform sample in [-1, 1) from a 64-bit engine output.
double unit_symmetric(std::uint64_t bits);

MixtureState build_initial_state(const RunConfig& cfg);

std::string mode_name(RunMode mode);

}  // namespace demix
