#pragma once

#include <vector>

#include "demix/energy.hpp"
#include "demix/grid.hpp"
#include "demix/report.hpp"

namespace demix {

/// Vertex of the monotone coupling graph: mass level s, source position x,
/// target position y.
struct CouplingVertex {
  double s;
  double x;
  double y;
};

struct TransportResult {
  /// Squared Wasserstein-2 distance (no factor 1/2).
  double w2sq = 0.0;
  /// T(x_k) at source cell centres.
  std::vector<double> map;
  /// T at the N+1 source faces.
  std::vector<double> map_faces;
  /// Potential with psi' = x - T(x), psi(0) = 0, sampled at source centres.
  Profile psi;
  /// Cell averages of the same potential; this is the gradient of W^2/2
  /// with respect to the source cell values (per unit length).
  Profile psi_mean;
  /// Potential at the N+1 source faces.
  std::vector<double> psi_faces;
  /// Conjugate potential phi = |x - y|^2/2 - psi at target centres.
  Profile phi;
  /// Cell averages of phi over target cells.
  Profile phi_mean;
  /// Entropic backends set this.
  bool approximate = false;
  int iterations = 0;
  /// Piecewise-linear monotone coupling (exact kernel only).
  std::vector<CouplingVertex> path;
};

/// Exact quadratic transport between piecewise-constant densities on the
/// same grid. Throws NumericalError("unbalanced") on mass mismatch beyond
/// 1e-10 relative and NumericalError("invalid density") on negative values.
TransportResult wasserstein_1d(const Profile& src, const Profile& dst);

/// Exact integral of |x - T(x)|^2 src(x) dx evaluated along the coupling.
double monge_cost(const Profile& src, const TransportResult& r);

/// Dual objective int psi src + int phi dst, equal to w2sq/2 at optimality.
double dual_objective(const Profile& src, const Profile& dst, const TransportResult& r);

struct MetricParams {
  double m1 = 1.0;
  double m2 = 1.0;
};

/// W(a1, b1)^2/m1 + W(a2, b2)^2/m2.
double metric_d_sq(const MixtureState& a, const MixtureState& b, const MetricParams& params);

/// Convex combination delta*rho + (1 - delta)*c per component.
MixtureState regularize_delta(const MixtureState& state, double delta);

/// Constant of the mollification bound: L^2 * L * (rho1/m1 + rho2/m2).
double mollify_constant(double length, double rho1, double rho2, const MetricParams& params);

EstimateReport check_mollify_bound(const MixtureState& state, double delta,
                                   const MetricParams& params);

/// ||c' - c||^2 (both components) <= 2 sqrt(m1) (||grad c1|| + ||grad c1'||) d(c', c).
EstimateReport check_w2_to_l2(const MixtureState& a, const MixtureState& b,
                              const MetricParams& params);

}  // namespace demix
