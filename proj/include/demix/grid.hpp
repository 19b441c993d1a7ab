#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace demix {

/// Uniform cell-centred grid on [0, L].
class Grid1D {
 public:
  /// Single cell on [0, 1]; placeholder for default-constructed holders.
  Grid1D() : Grid1D(1.0, 1) {}
  Grid1D(double length, std::size_t cells);

  double length() const { return length_; }
  std::size_t size() const { return cells_; }
  double h() const { return h_; }

  /// Centre of cell k, (k + 1/2) h.
  double center(std::size_t k) const { return (static_cast<double>(k) + 0.5) * h_; }
  /// Position of face i, i = 0..N.
  double face(std::size_t i) const;
  std::vector<double> centers() const;

  Grid1D refined() const { return Grid1D(length_, 2 * cells_); }

  bool operator==(const Grid1D& other) const {
    return length_ == other.length_ && cells_ == other.cells_;
  }

 private:
  double length_;
  std::size_t cells_;
  double h_;
};

/// Cell averages of a scalar field on a Grid1D.
class Profile {
 public:
  Profile() : values_(1, 0.0) {}
  Profile(Grid1D grid, std::vector<double> values);
  static Profile constant(const Grid1D& grid, double value);

  const Grid1D& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  std::span<const double> values() const { return values_; }

  /// h * sum(values), summed left to right.
  double mass() const;
  double mean() const { return mass() / grid_.length(); }
  double min() const;
  double max() const;

 private:
  Grid1D grid_;
  std::vector<double> values_;
};

enum class NormKind { L1, L2, Lp, Linf, H1Seminorm };

/// Face gradient with Neumann boundary faces: N+1 values, g_0 = g_N = 0.
std::vector<double> gradient(const Profile& p);

/// Three-point Laplacian with reflecting ghost cells.
Profile laplacian(const Profile& p);

/// Cell quadrature of p*q.
double inner(const Profile& p, const Profile& q);

/// Face quadrature h * sum over faces of a_i b_i.
double face_inner(std::span<const double> a, std::span<const double> b, double h);

double integral(const Profile& p);

/// exponent is only read for NormKind::Lp and must be >= 1.
double norm(const Profile& p, NormKind kind, double exponent = 2.0);

}  // namespace demix
