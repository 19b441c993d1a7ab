#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "demix/grid.hpp"
#include "demix/transport.hpp"

namespace demix {

struct SinkhornOptions {
  double epsilon = 1e-2;
  int max_iter = 20000;
  /// L1 violation of the source marginal, relative to total mass.
  double tol = 1e-9;
  /// Start from a large epsilon and halve towards the target.
  bool epsilon_scaling = true;
};

/// Cell averages on a uniform nx-by-ny grid of [0, lx] x [0, ly], stored
/// row-major with x fastest.
struct Field2D {
  double lx = 1.0;
  double ly = 1.0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> values;

  double cell_area() const { return (lx / nx) * (ly / ny); }
};

struct EntropicResult {
  /// Debiased estimate OT(a,b) - OT(a,a)/2 - OT(b,b)/2 of the squared distance.
  double w2sq = 0.0;
  /// Biased entropic cost OT(a,b).
  double ot_cost = 0.0;
  /// Dual potentials for the cost |x - y|^2 on the source and target atoms.
  std::vector<double> f;
  std::vector<double> g;
  /// Barycentric projection of the entropic plan.
  std::vector<std::array<double, 2>> map;
  int iterations = 0;
  double residual = 0.0;
};

/// Log-domain Sinkhorn between weighted point clouds (dimension 1 or 2).
/// Throws NumericalError carrying the residual when max_iter is exhausted.
EntropicResult sinkhorn_points(const std::vector<std::array<double, 2>>& x,
                               const std::vector<double>& a,
                               const std::vector<std::array<double, 2>>& y,
                               const std::vector<double>& b, const SinkhornOptions& opts);

/// Atoms at cell centres; psi = f/2 and phi = g/2 so that the potentials use
/// the cost |x - y|^2 / 2 like the exact kernel. approximate is set.
TransportResult sinkhorn(const Profile& src, const Profile& dst, const SinkhornOptions& opts);

EntropicResult sinkhorn(const Field2D& src, const Field2D& dst, const SinkhornOptions& opts);

}  // namespace demix
