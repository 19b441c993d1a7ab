#include "demix/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace demix {

Grid1D::Grid1D(double length, std::size_t cells) : length_(length), cells_(cells) {
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw std::invalid_argument("grid length must be positive");
  }
  if (cells == 0) {
    throw std::invalid_argument("grid needs at least one cell");
  }
  h_ = length / static_cast<double>(cells);
}

double Grid1D::face(std::size_t i) const {
  if (i >= cells_) return length_;
  return static_cast<double>(i) * h_;
}

std::vector<double> Grid1D::centers() const {
  std::vector<double> x(cells_);
  for (std::size_t k = 0; k < cells_; ++k) x[k] = center(k);
  return x;
}

Profile::Profile(Grid1D grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw std::invalid_argument("profile size " + std::to_string(values_.size()) +
                                " does not match grid size " + std::to_string(grid_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("profile values must be finite");
  }
}

Profile Profile::constant(const Grid1D& grid, double value) {
  return Profile(grid, std::vector<double>(grid.size(), value));
}

double Profile::mass() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return grid_.h() * s;
}

double Profile::min() const { return *std::min_element(values_.begin(), values_.end()); }
double Profile::max() const { return *std::max_element(values_.begin(), values_.end()); }

std::vector<double> gradient(const Profile& p) {
  const std::size_t n = p.size();
  const double h = p.grid().h();
  std::vector<double> g(n + 1, 0.0);
  for (std::size_t i = 1; i < n; ++i) g[i] = (p[i] - p[i - 1]) / h;
  return g;
}

Profile laplacian(const Profile& p) {
  const std::size_t n = p.size();
  const double h2 = p.grid().h() * p.grid().h();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double left = k > 0 ? p[k - 1] : p[k];
    const double right = k + 1 < n ? p[k + 1] : p[k];
    // Written as a difference of face fluxes so that the cell sum telescopes.
    out[k] = ((right - p[k]) - (p[k] - left)) / h2;
  }
  return Profile(p.grid(), std::move(out));
}

double inner(const Profile& p, const Profile& q) {
  if (!(p.grid() == q.grid())) throw std::invalid_argument("inner: grid mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += p[k] * q[k];
  return p.grid().h() * s;
}

double face_inner(std::span<const double> a, std::span<const double> b, double h) {
  if (a.size() != b.size()) throw std::invalid_argument("face_inner: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return h * s;
}

double integral(const Profile& p) { return p.mass(); }

double norm(const Profile& p, NormKind kind, double exponent) {
  const double h = p.grid().h();
  switch (kind) {
    case NormKind::L1: {
      double s = 0.0;
      for (double v : p.values()) s += std::abs(v);
      return h * s;
    }
    case NormKind::L2: {
      double s = 0.0;
      for (double v : p.values()) s += v * v;
      return std::sqrt(h * s);
    }
    case NormKind::Lp: {
      if (!(exponent >= 1.0)) throw std::invalid_argument("Lp norm needs exponent >= 1");
      double s = 0.0;
      for (double v : p.values()) s += std::pow(std::abs(v), exponent);
      return std::pow(h * s, 1.0 / exponent);
    }
    case NormKind::Linf: {
      double m = 0.0;
      for (double v : p.values()) m = std::max(m, std::abs(v));
      return m;
    }
    case NormKind::H1Seminorm: {
      const auto g = gradient(p);
      return std::sqrt(face_inner(g, g, h));
    }
  }
  throw std::invalid_argument("unknown norm kind");
}

}  // namespace demix
