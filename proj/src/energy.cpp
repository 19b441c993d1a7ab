#include "demix/energy.hpp"

#include <cmath>
#include <stdexcept>

namespace demix {

MixtureState MixtureState::from_c1(const Profile& c1) { return from_c1(c1, c1.mean()); }

MixtureState MixtureState::from_c1(const Profile& c1, double rho1) {
  std::vector<double> c2(c1.size());
  for (std::size_t k = 0; k < c1.size(); ++k) c2[k] = 1.0 - c1[k];
  return MixtureState{c1, Profile(c1.grid(), std::move(c2)), rho1, 1.0 - rho1};
}

bool MixtureState::valid() const {
  if (!(c1.grid() == c2.grid())) return false;
  for (std::size_t k = 0; k < c1.size(); ++k) {
    if (c1[k] < -1e-12 || c1[k] > 1.0 + 1e-12) return false;
    if (c2[k] < -1e-12 || c2[k] > 1.0 + 1e-12) return false;
    if (std::abs(c1[k] + c2[k] - 1.0) > 1e-12) return false;
  }
  return std::abs(c1.mean() - rho1) <= 1e-10 && std::abs(c2.mean() - rho2) <= 1e-10;
}

void ModelParams::validate() const {
  if (!(m1 > 0.0) || !(m2 > 0.0)) throw std::invalid_argument("mobilities must be positive");
  if (!(chi >= 0.0)) throw std::invalid_argument("chi must be nonnegative");
  if (d < 1) throw std::invalid_argument("dimension d must be >= 1");
}

Profile f_profile(const Profile& c1, const ConstitutiveModel& model) {
  std::vector<double> v(c1.size());
  for (std::size_t k = 0; k < c1.size(); ++k) v[k] = model.f(c1[k]);
  return Profile(c1.grid(), std::move(v));
}

double energy_E1(const Profile& c1, const ModelParams& params) {
  const auto g = gradient(f_profile(c1, params.model));
  const double h = c1.grid().h();
  const double grad_part = 0.5 * face_inner(g, g, h);
  double mix = 0.0;
  for (std::size_t k = 0; k < c1.size(); ++k) mix += c1[k] * (1.0 - c1[k]);
  return grad_part + 0.5 * params.chi * h * mix;
}

double energy_E(const MixtureState& state, const ModelParams& params) {
  if (!state.valid()) return kInfeasibleEnergy;
  return energy_E1(state.c1, params);
}

double entropy_density(double c) {
  if (c <= 0.0) return 1.0;
  return c * (std::log(c) - 1.0) + 1.0;
}

double entropy_H(const MixtureState& state, const ModelParams& params) {
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t k = 0; k < state.c1.size(); ++k) {
    s1 += entropy_density(state.c1[k]);
    s2 += entropy_density(state.c2[k]);
  }
  const double h = state.c1.grid().h();
  return h * s1 / params.m1 + h * s2 / params.m2;
}

Profile frak_F(const Profile& c1, const ModelParams& params) {
  if (!params.model.supports_q()) {
    throw std::logic_error("frak_F needs a model with an omega factorisation");
  }
  const Profile lap = laplacian(f_profile(c1, params.model));
  std::vector<double> v(c1.size());
  for (std::size_t k = 0; k < c1.size(); ++k) {
    const double c = c1[k];
    v[k] = lap[k] + params.chi * params.model.omega(c) * params.model.omega(1.0 - c) * (c - 0.5);
  }
  return Profile(c1.grid(), std::move(v));
}

Profile variational_derivative(const Profile& c1, const ModelParams& params,
                               ClampCounter* counter) {
  const Profile lap = laplacian(f_profile(c1, params.model));
  std::vector<double> v(c1.size());
  for (std::size_t k = 0; k < c1.size(); ++k) {
    v[k] = -params.model.fprime(c1[k], counter) * lap[k] + params.chi * (0.5 - c1[k]);
  }
  return Profile(c1.grid(), std::move(v));
}

}  // namespace demix
