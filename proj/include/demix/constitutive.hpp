#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace demix {

/// Counts evaluations of f' (or f'') that had to clamp their argument away
/// from the singular endpoints 0 and 1.
struct ClampCounter {
  std::uint64_t events = 0;
};

enum class ModelKind { ArcsinDeGennes, PowerGamma, LinearCH };

/// The gradient nonlinearity f of the demixing energy together with the
/// factorisation 1/f'(r) = omega(r) omega(1-r) and alpha(r) = r / omega(r).
///
/// Three families are supported:
///   arcsin     f(r) = arcsin(2r - 1),          omega(r) = sqrt(r)
///   power:g    f(r) = r^g - (1-r)^g, g in [1/2, 1)
///   linear     f(r) = r - 1/2 (Cahn-Hilliard; no admissible omega)
class ConstitutiveModel {
 public:
  /// Arguments of f' are clamped to [kSingularClamp, 1 - kSingularClamp].
  static constexpr double kSingularClamp = 1e-8;
  /// Arguments of f within this distance outside [0, 1] are clamped silently.
  static constexpr double kDomainSlack = 1e-12;

  static ConstitutiveModel arcsin();
  /// Throws std::invalid_argument if gamma is outside [1/2, 1) or if the
  /// constructor-time structural checks fail.
  static ConstitutiveModel power(double gamma);
  static ConstitutiveModel linear();
  /// "arcsin" | "power:<gamma>" | "linear".
  static ConstitutiveModel parse(std::string_view spec);

  ModelKind kind() const { return kind_; }
  double gamma() const { return gamma_; }
  std::string name() const;

  double f(double r) const;
  double fprime(double r, ClampCounter* counter = nullptr) const;
  double fsecond(double r, ClampCounter* counter = nullptr) const;

  /// Only defined when supports_q(); throws std::logic_error otherwise.
  double omega(double r) const;
  double alpha(double r) const;
  /// False for the linear model, where omega(0) = 0 cannot hold.
  bool supports_q() const { return kind_ != ModelKind::LinearCH; }

  /// Smallest a with |f| <= a and f' >= 1/a on [0, 1].
  double a_constant() const { return a_; }

 private:
  ConstitutiveModel(ModelKind kind, double gamma);
  void validate_structure() const;

  ModelKind kind_;
  double gamma_ = 0.0;
  double a_ = 0.0;
};

}  // namespace demix
