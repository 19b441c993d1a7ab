#pragma once

#include <limits>

#include "demix/constitutive.hpp"
#include "demix/grid.hpp"

namespace demix {

/// Pair of volume fractions with c1 + c2 = 1 and prescribed means.
struct MixtureState {
  Profile c1;
  Profile c2;
  double rho1 = 0.0;
  double rho2 = 0.0;

  /// Builds (c1, 1 - c1) with rho taken as the mean of c1.
  static MixtureState from_c1(const Profile& c1);
  /// Builds (c1, 1 - c1) with prescribed means.
  static MixtureState from_c1(const Profile& c1, double rho1);

  /// Checks bounds (1e-12), pointwise sum (1e-12) and means (1e-10).
  bool valid() const;
};

struct ModelParams {
  double chi = 0.0;
  double m1 = 1.0;
  double m2 = 1.0;
  int d = 1;
  ConstitutiveModel model = ConstitutiveModel::arcsin();

  /// Throws std::invalid_argument on m_i <= 0, chi < 0 or d < 1.
  void validate() const;
};

inline constexpr double kInfeasibleEnergy = std::numeric_limits<double>::infinity();

/// Profile of cellwise f(c1).
Profile f_profile(const Profile& c1, const ConstitutiveModel& model);

/// 1/2 |grad f(c1)|^2 on faces plus chi/2 c1 (1 - c1) on cells.
double energy_E1(const Profile& c1, const ModelParams& params);

/// energy_E1(c1) on states satisfying the constraint, +inf otherwise.
double energy_E(const MixtureState& state, const ModelParams& params);

/// Sum over components of (1/m_i) * integral of c (log c - 1) + 1.
double entropy_H(const MixtureState& state, const ModelParams& params);

/// Pointwise entropy density c (log c - 1) + 1, equal to 1 at c = 0.
double entropy_density(double c);

/// Laplacian of f(c1) plus chi omega(c1) omega(1 - c1) (c1 - 1/2).
Profile frak_F(const Profile& c1, const ModelParams& params);

/// -f'(c1) lap f(c1) + chi (1/2 - c1), the per-length gradient of E1.
Profile variational_derivative(const Profile& c1, const ModelParams& params,
                               ClampCounter* counter = nullptr);

}  // namespace demix
