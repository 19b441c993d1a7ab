#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "demix/energy.hpp"
#include "demix/transport.hpp"

namespace demix {

struct JkoConfig {
  double tau = 0.05;
  /// Base regularization; unset means tau^2.
  std::optional<double> delta0;
  double inner_tol = 1e-8;
  int inner_max_iter = 200;
  double step_shrink = 0.5;

  /// min(delta0, tau^2).
  double effective_delta() const;
  void validate() const;
};

struct StepFlags {
  bool converged = false;
  bool stagnated = false;
  bool degenerate_normalization = false;
  bool q_available = false;
  /// Stationary point improving on the previous state; global optimality is
  /// not certified.
  bool local_only = true;
};

struct JkoStepRecord {
  MixtureState state;
  /// Normalized potentials (cell averages).
  Profile psi1;
  Profile psi2;
  Profile mu1;
  Profile mu2;
  Profile q1;
  Profile q2;
  Profile mubar;
  /// d(c^n, [c^{n-1}]_delta)^2.
  double w_step_sq = 0.0;
  /// Component distances W(c_i^n, [c_i^{n-1}]_delta)^2.
  double w1_sq = 0.0;
  double w2_sq = 0.0;
  /// d([c^{n-1}]_delta, c^{n-1})^2.
  double w_reg_sq = 0.0;
  double energy = 0.0;
  double entropy = 0.0;
  /// Value of the step objective at the returned state and at the previous one.
  double objective = 0.0;
  double objective_prev = 0.0;
  int inner_iters = 0;
  double optimality_residual = 0.0;
  double delta = 0.0;
  /// Residual of the normalization integrals after the solve.
  double normalization_residual1 = 0.0;
  double normalization_residual2 = 0.0;
  /// The same second condition written with psi instead of mu weights.
  double normalization_residual_psi_form = 0.0;
  /// Additive constant in the optimality condition before normalization.
  double multiplier = 0.0;
  std::uint64_t clamp_count = 0;
  StepFlags flags;
};

/// Step objective (1/2tau) d(c, b)^2 + E1(c1) with c2 = 1 - c1.
double jko_objective(const Profile& c1, const MixtureState& target, double tau,
                     const ModelParams& params);

/// Additive constants (a1, a2) for the two potentials. Throws
/// NumericalError("degenerate normalization") when the coupling weight
/// integral of omega(c1) omega(c2) is at most 1e-12.
std::pair<double, double> normalization_constants(const Profile& psi1, const Profile& psi2,
                                                  const MixtureState& state, double tau,
                                                  const ModelParams& params);

/// Returns psi_i + a_i.
std::pair<Profile, Profile> normalize_potentials(const Profile& psi1, const Profile& psi2,
                                                 const MixtureState& state, double tau,
                                                 const ModelParams& params);

/// The two normalization integrals for given potentials.
std::pair<double, double> normalization_integrals(const Profile& psi1, const Profile& psi2,
                                                  const MixtureState& state, double tau,
                                                  const ModelParams& params);

/// Euclidean projection onto {0 <= c <= 1, mean(c) = rho}.
std::vector<double> project_box_mean(const std::vector<double>& z, double rho);

JkoStepRecord jko_step(const MixtureState& prev, const JkoConfig& cfg,
                       const ModelParams& params);

/// Rebuilds the record of a step from its endpoints: potentials,
/// normalization and stationarity are recomputed at `cur`. Solver statistics
/// (inner_iters, clamp_count) are left at zero.
JkoStepRecord reconstruct_step(const MixtureState& prev, const MixtureState& cur,
                               const JkoConfig& cfg, const ModelParams& params);

struct Trajectory {
  MixtureState initial;
  double initial_energy = 0.0;
  double initial_entropy = 0.0;
  JkoConfig cfg;
  ModelParams params;
  std::vector<JkoStepRecord> steps;

  const MixtureState& state(std::size_t n) const {
    return n == 0 ? initial : steps[n - 1].state;
  }
};

Trajectory run_trajectory(const MixtureState& initial, const JkoConfig& cfg,
                          const ModelParams& params, int n_steps);

}  // namespace demix
