#pragma once

#include <vector>

#include "demix/jko.hpp"
#include "demix/report.hpp"

namespace demix {

/// E(c^N) + sum d(c^n, [c^{n-1}]_delta)^2 / (2 tau) <= E(c^0) + K N tau / 2.
EstimateReport check_energy_telescoping(const Trajectory& tr);

/// One report per step comparing against the previous state as competitor.
std::vector<EstimateReport> check_step_energy(const Trajectory& tr);

/// Weighted H^1 bound on the potentials. context["max_step_discrepancy"]
/// holds the largest |int c_i |grad psi_i|^2 - W_i^2| over steps and components.
EstimateReport check_kinetic_bound(const Trajectory& tr);

/// Per-step gap |int c_1 |grad psi_1|^2 - W(c_1^n, b_1)^2| for every step.
std::vector<double> kinetic_discrepancy(const Trajectory& tr);

/// Per-step entropy production inequality (index n = 1..N).
std::vector<EstimateReport> check_entropy_steps(const Trajectory& tr);

/// Aggregate of the per-step reports plus the summed H^2 bound with the
/// empirical constant stored in context["C"].
EstimateReport check_entropy_dissipation(const Trajectory& tr);

/// L^2 norm of omega(c2) q1 - omega(c1) q2 - F[c1] against kappa (inner_tol + h).
EstimateReport check_euler_lagrange(const JkoStepRecord& rec, const ModelParams& params,
                                    double inner_tol, double kappa = 1.0);

/// Residual field of the relation above.
Profile euler_lagrange_residual(const JkoStepRecord& rec, const ModelParams& params);

/// tau sum (||q1||_p^2 + ||q2||_p^2) with p = d/(d-1), or p = 2 when d = 1.
/// The smallest C with sum <= C (1 + N tau) is stored in context["C"].
EstimateReport check_q_integrability(const Trajectory& tr);

/// L^1 mismatch between the direct face gradient of mubar and the
/// product-rule decomposition through F[c1] and the potentials.
EstimateReport check_mubar_gradient_decomposition(const JkoStepRecord& rec,
                                                  const ModelParams& params);

/// Smooth bump in time supported in (0, horizon), equal to 1 at the midpoint.
double time_bump(double t, double horizon);

/// Residual of the discrete weak formulation for the test function
/// theta(t) cos(j pi x / L); j = 0 tests mass conservation.
EstimateReport check_weak_form_residual(const Trajectory& tr, int mode);

std::vector<EstimateReport> check_weak_form_modes(const Trajectory& tr, int modes);

/// Worst pair of the L^2 Hoelder bound over at most max_pairs index pairs.
EstimateReport check_holder_modulus(const Trajectory& tr, std::size_t max_pairs = 10000);

/// Constraint and mean invariants over the whole trajectory.
EstimateReport check_invariants(const Trajectory& tr);

struct DiagnosticsOptions {
  int weak_modes = 4;
  double el_kappa = 1.0;
};

std::vector<EstimateReport> run_all_diagnostics(const Trajectory& tr,
                                                const DiagnosticsOptions& opts = {});

}  // namespace demix
