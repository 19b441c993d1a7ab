#pragma once

#include <vector>

#include "demix/energy.hpp"

namespace demix {

struct FdConfig {
  double dt = 1e-4;
  int n_steps = 100;
  /// Scales the constant coefficient of the implicit biharmonic stabilizer.
  double theta_implicit = 1.0;
  /// Relative residual for the elliptic solve of the non-local model.
  double elliptic_tol = 1e-12;
  int elliptic_max_iter = 10000;

  void validate() const;
};

struct FdStepInfo {
  /// h * sum |clamped - unclamped| for this step.
  double clamp_mass = 0.0;
  std::uint64_t clamp_events = 0;
  /// Elliptic iterations (non-local only).
  int elliptic_iters = 0;
  double elliptic_residual = 0.0;
};

/// v = f'(c) lap f(c) + chi (c - 1/2), evaluated with clamped f'.
Profile chemical_potential(const Profile& c1, const ModelParams& params,
                           ClampCounter* counter = nullptr);

/// One step of the fourth-order equation with degenerate mobility c(1-c),
/// harmonic mean on faces, implicit constant-coefficient stabilization
/// (largest face mobility times the larger adjacent f'^2, times theta_implicit).
Profile step_local(const Profile& c1, const ModelParams& params, const FdConfig& cfg,
                   FdStepInfo* info = nullptr);

/// One step of the non-local model: Neumann solve of -lap mu = div((1-c) grad v)
/// with zero-mean gauge, then transport with mobility c.
Profile step_nonlocal(const Profile& c1, const ModelParams& params, const FdConfig& cfg,
                      FdStepInfo* info = nullptr);

/// Right-hand side of the elliptic problem; exposed for the gauge check.
std::vector<double> nonlocal_elliptic_rhs(const Profile& c1, const Profile& v);

struct DecaySeries {
  std::vector<double> t;
  std::vector<double> e_local;
  std::vector<double> e_nonlocal;
  std::vector<double> mass_local;
  std::vector<double> mass_nonlocal;
  /// Cumulative clamp mass.
  std::vector<double> clamp_local;
  std::vector<double> clamp_nonlocal;
  Profile final_local;
  Profile final_nonlocal;

  double terminal_ratio = 1.0;
  /// First time at which the sign of E_nonlocal - E_local changes; negative
  /// when the curves never cross.
  double first_crossing = -1.0;
  /// Largest per-step energy increase of either solver.
  double max_increase_local = 0.0;
  double max_increase_nonlocal = 0.0;
  bool clamp_budget_ok = true;
};

/// Runs both solvers from the same data for round(horizon / dt) steps.
DecaySeries compare_energy_decay(const Profile& initial, const ModelParams& params,
                                 const FdConfig& cfg, double horizon);

/// Trajectory of the non-local solver sampled every `every` steps (index 0
/// is the initial state).
std::vector<Profile> run_nonlocal(const Profile& initial, const ModelParams& params,
                                  const FdConfig& cfg, int n_steps, int every);

}  // namespace demix
