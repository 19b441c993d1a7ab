#include "demix/constitutive.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace demix {

namespace {

double clamp_domain(double r) {
  if (r < -ConstitutiveModel::kDomainSlack || r > 1.0 + ConstitutiveModel::kDomainSlack ||
      std::isnan(r)) {
    throw std::domain_error("volume fraction outside [0, 1]: " + std::to_string(r));
  }
  return std::clamp(r, 0.0, 1.0);
}

double clamp_singular(double r, ClampCounter* counter) {
  const double lo = ConstitutiveModel::kSingularClamp;
  const double hi = 1.0 - ConstitutiveModel::kSingularClamp;
  if (r < lo || r > hi) {
    if (counter) ++counter->events;
    return std::clamp(r, lo, hi);
  }
  return r;
}

}  // namespace

ConstitutiveModel::ConstitutiveModel(ModelKind kind, double gamma) : kind_(kind), gamma_(gamma) {
  switch (kind_) {
    case ModelKind::ArcsinDeGennes:
      // max |f| = pi/2, min f' = f'(1/2) = 2.
      a_ = std::max(std::numbers::pi / 2.0, 0.5);
      break;
    case ModelKind::PowerGamma:
      // max |f| = f(1) = 1, min f' = f'(1/2) = gamma 2^(2 - gamma).
      a_ = std::max(1.0, 1.0 / (gamma_ * std::pow(2.0, 2.0 - gamma_)));
      break;
    case ModelKind::LinearCH:
      a_ = std::max(0.5, 1.0);
      break;
  }
}

ConstitutiveModel ConstitutiveModel::arcsin() { return {ModelKind::ArcsinDeGennes, 0.0}; }

ConstitutiveModel ConstitutiveModel::power(double gamma) {
  if (!(gamma >= 0.5 && gamma < 1.0)) {
    throw std::invalid_argument("power model needs gamma in [1/2, 1)");
  }
  ConstitutiveModel m(ModelKind::PowerGamma, gamma);
  m.validate_structure();
  return m;
}

ConstitutiveModel ConstitutiveModel::linear() { return {ModelKind::LinearCH, 0.0}; }

ConstitutiveModel ConstitutiveModel::parse(std::string_view spec) {
  if (spec == "arcsin") return arcsin();
  if (spec == "linear") return linear();
  constexpr std::string_view prefix = "power:";
  if (spec.substr(0, prefix.size()) == prefix) {
    const std::string rest(spec.substr(prefix.size()));
    std::size_t used = 0;
    double gamma = 0.0;
    try {
      gamma = std::stod(rest, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != rest.size()) {
      throw std::invalid_argument("cannot parse gamma in model string '" + std::string(spec) + "'");
    }
    return power(gamma);
  }
  throw std::invalid_argument("unknown model '" + std::string(spec) +
                              "' (expected arcsin | power:<gamma> | linear)");
}

std::string ConstitutiveModel::name() const {
  switch (kind_) {
    case ModelKind::ArcsinDeGennes:
      return "arcsin";
    case ModelKind::PowerGamma: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "power:%.17g", gamma_);
      return buf;
    }
    case ModelKind::LinearCH:
      return "linear";
  }
  return "unknown";
}

double ConstitutiveModel::f(double r) const {
  r = clamp_domain(r);
  switch (kind_) {
    case ModelKind::ArcsinDeGennes:
      return std::asin(2.0 * r - 1.0);
    case ModelKind::PowerGamma:
      return std::pow(r, gamma_) - std::pow(1.0 - r, gamma_);
    case ModelKind::LinearCH:
      return r - 0.5;
  }
  return 0.0;
}

double ConstitutiveModel::fprime(double r, ClampCounter* counter) const {
  r = clamp_domain(r);
  switch (kind_) {
    case ModelKind::ArcsinDeGennes:
      r = clamp_singular(r, counter);
      return 1.0 / std::sqrt(r * (1.0 - r));
    case ModelKind::PowerGamma:
      r = clamp_singular(r, counter);
      return gamma_ * (std::pow(r, gamma_ - 1.0) + std::pow(1.0 - r, gamma_ - 1.0));
    case ModelKind::LinearCH:
      return 1.0;
  }
  return 0.0;
}

double ConstitutiveModel::fsecond(double r, ClampCounter* counter) const {
  r = clamp_domain(r);
  switch (kind_) {
    case ModelKind::ArcsinDeGennes: {
      r = clamp_singular(r, counter);
      const double g = r * (1.0 - r);
      return -0.5 * (1.0 - 2.0 * r) / (g * std::sqrt(g));
    }
    case ModelKind::PowerGamma:
      r = clamp_singular(r, counter);
      return gamma_ * (gamma_ - 1.0) * (std::pow(r, gamma_ - 2.0) - std::pow(1.0 - r, gamma_ - 2.0));
    case ModelKind::LinearCH:
      return 0.0;
  }
  return 0.0;
}

double ConstitutiveModel::omega(double r) const {
  r = clamp_domain(r);
  switch (kind_) {
    case ModelKind::ArcsinDeGennes:
      return std::sqrt(r);
    case ModelKind::PowerGamma: {
      // omega(r) = r^(1-g) / sqrt(g (r^(1-g) + (1-r)^(1-g))), so that
      // omega(r) omega(1-r) = 1/f'(r) holds identically.
      const double e = 1.0 - gamma_;
      const double a = std::pow(r, e);
      const double b = std::pow(1.0 - r, e);
      return a / std::sqrt(gamma_ * (a + b));
    }
    case ModelKind::LinearCH:
      break;
  }
  throw std::logic_error("omega is not defined for the linear model");
}

double ConstitutiveModel::alpha(double r) const {
  r = clamp_domain(r);
  if (r == 0.0) {
    if (!supports_q()) throw std::logic_error("alpha is not defined for the linear model");
    return 0.0;
  }
  return r / omega(r);
}

void ConstitutiveModel::validate_structure() const {
  constexpr int kSamples = 2000;
  // Factorisation 1/f' = omega(r) omega(1-r).
  for (int i = 1; i < kSamples; ++i) {
    const double r = static_cast<double>(i) / kSamples;
    const double lhs = 1.0 / fprime(r);
    const double rhs = omega(r) * omega(1.0 - r);
    if (std::abs(lhs - rhs) > 1e-8 * std::abs(lhs)) {
      throw std::invalid_argument("omega factorisation fails for model " + name());
    }
  }
  // Concavity of 1/f'^2 via centred second differences.
  const double step = 1.0 / kSamples;
  for (int i = 2; i < kSamples - 1; ++i) {
    const double r = i * step;
    auto w = [&](double x) {
      const double fp = fprime(x);
      return 1.0 / (fp * fp);
    };
    const double d2 = w(r - step) - 2.0 * w(r) + w(r + step);
    if (d2 > 1e-10) {
      throw std::invalid_argument("1/f'^2 is not concave for model " + name());
    }
  }
}

}  // namespace demix
