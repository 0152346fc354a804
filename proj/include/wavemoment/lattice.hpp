#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>

#include "wavemoment/error.hpp"

namespace wavemoment {

using Vec3 = std::array<double, 3>;
using Dims = std::array<int, 3>;

inline Vec3 operator+(const Vec3 &a, const Vec3 &b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3 &a, const Vec3 &b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3 &a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3 &a, const Vec3 &b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3 &a) { return std::sqrt(dot(a, a)); }

/// Axis-aligned bounds used to request a lattice.
struct Box {
  Vec3 lo{-2.0, -2.0, -2.0};
  Vec3 hi{2.0, 2.0, 2.0};
};

inline constexpr std::size_t kDefaultPointCap = 96u * 96u * 96u;

/// Uniform isotropic grid. Points are x = origin + h * (i, j, k), stored
/// x-fastest.
class Lattice {
public:
  Lattice() = default;
  Lattice(Vec3 origin, double spacing, Dims dims) : origin_(origin), h_(spacing), dims_(dims) {
    if (!(spacing > 0.0) || !std::isfinite(spacing))
      fail(ErrorKind::InvalidArgument, "lattice spacing must be positive and finite");
    for (int n : dims)
      if (n < 1) fail(ErrorKind::InvalidArgument, "lattice dims must be positive");
  }

  const Vec3 &origin() const { return origin_; }
  double spacing() const { return h_; }
  const Dims &dims() const { return dims_; }
  int nx() const { return dims_[0]; }
  int ny() const { return dims_[1]; }
  int nz() const { return dims_[2]; }
  std::size_t size() const {
    return static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) *
           static_cast<std::size_t>(dims_[2]);
  }
  double cell_volume() const { return h_ * h_ * h_; }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
  }
  std::array<int, 3> coords(std::size_t idx) const {
    const auto nx = static_cast<std::size_t>(dims_[0]);
    const auto ny = static_cast<std::size_t>(dims_[1]);
    return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny), static_cast<int>(idx / (nx * ny))};
  }
  Vec3 point(int i, int j, int k) const {
    return {origin_[0] + h_ * i, origin_[1] + h_ * j, origin_[2] + h_ * k};
  }
  Vec3 point(std::size_t idx) const {
    const auto c = coords(idx);
    return point(c[0], c[1], c[2]);
  }
  Vec3 upper() const { return point(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1); }

  /// Distance from x to the nearest face of the bounding box (negative if outside).
  double distance_to_edge(const Vec3 &x) const {
    const Vec3 hi = upper();
    double d = 1e300;
    for (int a = 0; a < 3; ++a) d = std::min({d, x[a] - origin_[a], hi[a] - x[a]});
    return d;
  }

  /// Same lattice extended by `cells` points on every side.
  Lattice padded(int cells) const {
    return Lattice(origin_ - (h_ * cells) * Vec3{1.0, 1.0, 1.0}, h_,
                   {dims_[0] + 2 * cells, dims_[1] + 2 * cells, dims_[2] + 2 * cells});
  }

  friend bool operator==(const Lattice &a, const Lattice &b) {
    return a.origin_ == b.origin_ && a.h_ == b.h_ && a.dims_ == b.dims_;
  }

private:
  Vec3 origin_{0.0, 0.0, 0.0};
  double h_ = 1.0;
  Dims dims_{1, 1, 1};
};

/// Builds the lattice spanning `box` with n points per axis; the spacing must
/// come out identical on every axis.
inline Lattice build_lattice(const Box &box, Dims n, std::size_t point_cap = kDefaultPointCap) {
  for (int a = 0; a < 3; ++a) {
    if (n[a] < 8) {
      std::ostringstream os;
      os << "lattice dims must be >= 8 on every axis (axis " << a << " has " << n[a] << ")";
      fail(ErrorKind::InvalidArgument, os.str());
    }
    if (!(box.hi[a] > box.lo[a])) fail(ErrorKind::InvalidArgument, "degenerate lattice box");
  }
  const std::size_t total = static_cast<std::size_t>(n[0]) * n[1] * n[2];
  if (total > point_cap) {
    std::ostringstream os;
    os << "lattice has " << total << " points, above the configured cap " << point_cap;
    fail(ErrorKind::InvalidArgument, os.str());
  }
  Vec3 h{};
  for (int a = 0; a < 3; ++a) h[a] = (box.hi[a] - box.lo[a]) / (n[a] - 1);
  for (int a = 1; a < 3; ++a) {
    if (std::abs(h[a] - h[0]) > 1e-12 * h[0]) {
      std::ostringstream os;
      os << "anisotropic spacing requested: h = (" << h[0] << ", " << h[1] << ", " << h[2]
         << "); choose n so that extent/(n-1) is equal on all axes";
      fail(ErrorKind::InvalidArgument, os.str());
    }
  }
  return Lattice(box.lo, h[0], n);
}

/// Cubic lattice over [lo, hi]^3 with n points per axis.
inline Lattice build_cubic_lattice(double lo, double hi, int n, std::size_t point_cap = kDefaultPointCap) {
  return build_lattice(Box{{lo, lo, lo}, {hi, hi, hi}}, {n, n, n}, point_cap);
}

} // namespace wavemoment
