#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <sstream>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "wavemoment/domain.hpp"
#include "wavemoment/error.hpp"
#include "wavemoment/lattice.hpp"

namespace wavemoment {

using Complex = std::complex<double>;

template <class T> struct is_complex : std::false_type {};
template <class T> struct is_complex<std::complex<T>> : std::true_type {};

inline bool finite_value(double v) { return std::isfinite(v); }
inline bool finite_value(const Complex &v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

/// Samples of a real or complex quantity on a lattice, plus a support mask.
template <class T> class Field {
public:
  using Scalar = T;
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  Field() = default;
  explicit Field(Lattice lattice)
      : lattice_(std::move(lattice)), values_(Vector::Zero(static_cast<Eigen::Index>(lattice_.size()))),
        mask_(lattice_.size(), 0) {}
  Field(Lattice lattice, Vector values) : lattice_(std::move(lattice)), values_(std::move(values)) {
    check_size();
    mask_ = nonzero_mask();
  }
  Field(Lattice lattice, Vector values, std::vector<std::uint8_t> mask)
      : lattice_(std::move(lattice)), values_(std::move(values)), mask_(std::move(mask)) {
    check_size();
    if (mask_.size() != lattice_.size()) fail(ErrorKind::Dimension, "mask size does not match lattice");
  }

  template <class Fn> static Field from_function(const Lattice &lattice, Fn &&fn) {
    Vector v(static_cast<Eigen::Index>(lattice.size()));
    for (std::size_t i = 0; i < lattice.size(); ++i) v[static_cast<Eigen::Index>(i)] = fn(lattice.point(i));
    return Field(lattice, std::move(v));
  }

  const Lattice &lattice() const { return lattice_; }
  const Vector &values() const { return values_; }
  Vector &values() { return values_; }
  const std::vector<std::uint8_t> &mask() const { return mask_; }
  std::vector<std::uint8_t> &mask() { return mask_; }

  T operator[](std::size_t idx) const { return values_[static_cast<Eigen::Index>(idx)]; }
  T at(int i, int j, int k) const { return values_[static_cast<Eigen::Index>(lattice_.index(i, j, k))]; }

  bool all_finite() const {
    for (Eigen::Index i = 0; i < values_.size(); ++i)
      if (!finite_value(values_[i])) return false;
    return true;
  }

  double peak() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }

  std::vector<std::uint8_t> nonzero_mask() const {
    std::vector<std::uint8_t> m(static_cast<std::size_t>(values_.size()));
    for (Eigen::Index i = 0; i < values_.size(); ++i) m[static_cast<std::size_t>(i)] = std::abs(values_[i]) > 0.0;
    return m;
  }

  /// Recomputes the mask as |v| > rel * peak.
  void refresh_mask(double rel = 0.0) {
    const double cut = rel * peak();
    for (Eigen::Index i = 0; i < values_.size(); ++i)
      mask_[static_cast<std::size_t>(i)] = std::abs(values_[i]) > cut;
  }

  std::size_t support_count() const { return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), 1)); }

private:
  void check_size() const {
    if (static_cast<std::size_t>(values_.size()) != lattice_.size())
      fail(ErrorKind::Dimension, "field value count does not match lattice size");
  }

  Lattice lattice_;
  Vector values_;
  std::vector<std::uint8_t> mask_;
};

using RealField = Field<double>;
using ComplexField = Field<Complex>;

inline ComplexField to_complex(const RealField &f) {
  return ComplexField(f.lattice(), f.values().template cast<Complex>(), f.mask());
}

inline RealField real_part(const ComplexField &f) { return RealField(f.lattice(), f.values().real(), f.mask()); }
inline RealField imag_part(const ComplexField &f) { return RealField(f.lattice(), f.values().imag(), f.mask()); }

/// Pointwise product, mask = nonzero of the result.
template <class A, class B> auto multiply(const Field<A> &a, const Field<B> &b) {
  using R = decltype(A{} * B{});
  if (!(a.lattice() == b.lattice())) fail(ErrorKind::Dimension, "fields live on different lattices");
  typename Field<R>::Vector v = a.values().template cast<R>().cwiseProduct(b.values().template cast<R>());
  return Field<R>(a.lattice(), std::move(v));
}

/// Zeroes every value outside Ω.
template <class T> Field<T> restrict_to(const Field<T> &f, const Domain &domain) {
  Field<T> out = f;
  for (std::size_t i = 0; i < f.lattice().size(); ++i)
    if (!domain.contains(f.lattice().point(i))) out.values()[static_cast<Eigen::Index>(i)] = T{};
  out.mask() = out.nonzero_mask();
  return out;
}

/// Tricubic (4-point Lagrange per axis) interpolation of raw lattice data;
/// the stencil is clamped to the lattice, so no bounds check.
template <class T> T sample_tricubic(const Lattice &grid, const T *u, const Vec3 &x) {
  const double h = grid.spacing();
  std::array<int, 3> i0{};
  std::array<std::array<double, 4>, 3> w{};
  for (int a = 0; a < 3; ++a) {
    const double s = (x[a] - grid.origin()[a]) / h;
    i0[a] = std::clamp(static_cast<int>(std::floor(s)) - 1, 0, grid.dims()[a] - 4);
    const double t = s - i0[a];
    for (int m = 0; m < 4; ++m) {
      double l = 1.0;
      for (int q = 0; q < 4; ++q)
        if (q != m) l *= (t - q) / static_cast<double>(m - q);
      w[a][m] = l;
    }
  }
  T acc{};
  for (int dz = 0; dz < 4; ++dz)
    for (int dy = 0; dy < 4; ++dy) {
      const double wyz = w[1][dy] * w[2][dz];
      const std::size_t row = grid.index(i0[0], i0[1] + dy, i0[2] + dz);
      for (int dx = 0; dx < 4; ++dx) acc += wyz * w[0][dx] * u[row + static_cast<std::size_t>(dx)];
    }
  return acc;
}

/// Tricubic interpolation of a field; throws if x is outside the lattice box.
template <class T> T interpolate_cubic(const Field<T> &f, const Vec3 &x) {
  const Lattice &lat = f.lattice();
  for (int a = 0; a < 3; ++a) {
    const double s = (x[a] - lat.origin()[a]) / lat.spacing();
    if (s < -1e-9 || s > lat.dims()[a] - 1 + 1e-9) fail(ErrorKind::InvalidArgument, "interpolation point outside lattice");
  }
  return sample_tricubic(lat, f.values().data(), x);
}

/// Trilinear interpolation; throws if x is outside the lattice box.
template <class T> T interpolate(const Field<T> &f, const Vec3 &x) {
  const Lattice &lat = f.lattice();
  std::array<int, 3> i0{};
  std::array<double, 3> t{};
  for (int a = 0; a < 3; ++a) {
    const double s = (x[a] - lat.origin()[a]) / lat.spacing();
    if (s < -1e-9 || s > lat.dims()[a] - 1 + 1e-9) fail(ErrorKind::InvalidArgument, "interpolation point outside lattice");
    int i = static_cast<int>(std::floor(s));
    i = std::clamp(i, 0, std::max(0, lat.dims()[a] - 2));
    i0[a] = i;
    t[a] = std::clamp(s - i, 0.0, 1.0);
  }
  T acc{};
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? t[0] : 1.0 - t[0]) * (dy ? t[1] : 1.0 - t[1]) * (dz ? t[2] : 1.0 - t[2]);
        if (w == 0.0) continue;
        acc += w * f.at(std::min(i0[0] + dx, lat.nx() - 1), std::min(i0[1] + dy, lat.ny() - 1),
                        std::min(i0[2] + dz, lat.nz() - 1));
      }
  return acc;
}

/// Midpoint quadrature over the whole lattice.
template <class T> T volume_integral(const Field<T> &g) { return g.values().sum() * g.lattice().cell_volume(); }

/// Midpoint quadrature over Ω with cut-cell weights at the boundary.
template <class T> T volume_integral(const Field<T> &g, const Domain &domain) {
  const auto frac = domain.cell_fractions(g.lattice());
  T acc{};
  for (std::size_t i = 0; i < frac->size(); ++i)
    if ((*frac)[i] != 0.0) acc += (*frac)[i] * g[i];
  return acc * g.lattice().cell_volume();
}

/// True if every value above rel_tol * peak sits in Ω at least `margin` inside.
/// Smooth presets never vanish exactly, hence the relative band.
template <class T>
bool compactly_supported_in(const Field<T> &f, const Domain &domain, double margin, double rel_tol = 1e-6) {
  const double cut = rel_tol * f.peak();
  for (std::size_t i = 0; i < f.lattice().size(); ++i) {
    if (std::abs(f[i]) <= cut) continue;
    if (domain.signed_distance(f.lattice().point(i)) > -margin) return false;
  }
  return true;
}

template <class T> void require_support_in(const Field<T> &f, const Domain &domain, const char *what) {
  if (!compactly_supported_in(f, domain, 2.0 * f.lattice().spacing())) {
    std::ostringstream os;
    os << what << " must be compactly supported in the domain (at least 2h from the boundary)";
    fail(ErrorKind::Support, os.str());
  }
}

/// Sound speed c(x) >= c0 > 0, identically 1 away from Ω.
class SpeedModel {
public:
  SpeedModel() = default;
  explicit SpeedModel(RealField c, double c0 = 0.0) : c_(std::move(c)) {
    if (!c_.all_finite()) fail(ErrorKind::InvalidArgument, "speed field has non-finite values");
    const double lo = c_.values().minCoeff();
    c0_ = c0 > 0.0 ? c0 : lo;
    if (!(c0_ > 0.0) || lo < c0_ * (1.0 - 1e-14)) {
      std::ostringstream os;
      os << "speed must satisfy c >= c0 > 0 (min c = " << lo << ", c0 = " << c0_ << ")";
      fail(ErrorKind::InvalidArgument, os.str());
    }
  }

  static SpeedModel constant(const Lattice &lattice, double value = 1.0) {
    return SpeedModel(RealField(lattice, RealField::Vector::Constant(static_cast<Eigen::Index>(lattice.size()), value)));
  }

  /// Builds c from samples of c^{-2}.
  static SpeedModel from_inverse_square(const RealField &s) {
    RealField::Vector c(s.values().size());
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (!(s.values()[i] > 0.0)) fail(ErrorKind::InvalidArgument, "c^-2 must be positive");
      c[i] = 1.0 / std::sqrt(s.values()[i]);
    }
    return SpeedModel(RealField(s.lattice(), std::move(c)));
  }

  const RealField &field() const { return c_; }
  const Lattice &lattice() const { return c_.lattice(); }
  double c0() const { return c0_; }
  double max_speed() const { return c_.values().maxCoeff(); }

  RealField inverse_square() const {
    return RealField(c_.lattice(), c_.values().array().square().inverse().matrix());
  }

  /// c^{-2} - 1, the scattering contrast.
  RealField contrast() const {
    RealField::Vector v = c_.values().array().square().inverse().matrix();
    v.array() -= 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (std::abs(v[i]) < 1e-15) v[i] = 0.0;
    return RealField(c_.lattice(), std::move(v));
  }

  bool is_constant_one() const { return (c_.values().array() == 1.0).all(); }

  /// c - 1 must vanish (to 1e-12) outside Ω shrunk by 2h.
  void require_background(const Domain &domain) const {
    const double margin = 2.0 * lattice().spacing();
    for (std::size_t i = 0; i < lattice().size(); ++i)
      if (std::abs(c_[i] - 1.0) > 1e-12 && domain.signed_distance(lattice().point(i)) > -margin)
        fail(ErrorKind::Support, "speed must equal 1 outside a compact subset of the domain");
  }

private:
  RealField c_;
  double c0_ = 1.0;
};

} // namespace wavemoment
