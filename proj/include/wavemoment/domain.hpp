#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <tuple>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "wavemoment/error.hpp"
#include "wavemoment/lattice.hpp"

namespace wavemoment {

struct BallShape {
  Vec3 center{0.0, 0.0, 0.0};
  double radius = 1.5;
};

struct BoxShape {
  Vec3 lo{-1.0, -1.0, -1.0};
  Vec3 hi{1.0, 1.0, 1.0};
};

/// Points on the boundary with outward unit normals and surface quadrature
/// weights (they double as sensor locations for boundary traces).
struct BoundarySamples {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
};

namespace detail {

// ∫_0^t sqrt(rho^2 - u^2) du
inline double half_chord_primitive(double t, double rho) {
  t = std::clamp(t, -rho, rho);
  return 0.5 * (t * std::sqrt(std::max(0.0, rho * rho - t * t)) + rho * rho * std::asin(t / rho));
}

// Area of {t^2 + s^2 <= rho^2, t <= a, s <= b}.
inline double disk_quadrant_area(double a, double b, double rho) {
  if (rho <= 0.0) return 0.0;
  const double amax = std::min(a, rho);
  if (amax <= -rho || b <= -rho) return 0.0;
  auto full = [&](double l, double u) {
    u = std::min(u, amax);
    return u > l ? 2.0 * (half_chord_primitive(u, rho) - half_chord_primitive(l, rho)) : 0.0;
  };
  auto clipped = [&](double l, double u) {
    u = std::min(u, amax);
    return u > l ? b * (u - l) + half_chord_primitive(u, rho) - half_chord_primitive(l, rho) : 0.0;
  };
  if (b >= rho) return full(-rho, rho);
  const double tau = std::sqrt(rho * rho - b * b);
  if (b >= 0.0) return full(-rho, -tau) + clipped(-tau, tau) + full(tau, rho);
  return clipped(-tau, tau);
}

// Area of the disk of radius rho (centered at 0) inside [y0,y1] x [z0,z1].
inline double disk_rectangle_area(double y0, double y1, double z0, double z1, double rho) {
  return disk_quadrant_area(y1, z1, rho) - disk_quadrant_area(y0, z1, rho) - disk_quadrant_area(y1, z0, rho) +
         disk_quadrant_area(y0, z0, rho);
}

// Volume of the ball of radius R centered at 0 inside [lo, hi].
inline double ball_box_volume(const Vec3 &lo, const Vec3 &hi, double R) {
  const double a = std::max(lo[0], -R);
  const double b = std::min(hi[0], R);
  if (b <= a) return 0.0;
  auto area = [&](double x) {
    return disk_rectangle_area(lo[1], hi[1], lo[2], hi[2], std::sqrt(std::max(0.0, R * R - x * x)));
  };
  std::vector<double> breaks{a, b};
  for (double y : {lo[1], hi[1]})
    for (double z : {lo[2], hi[2], 0.0}) {
      for (double d2 : {y * y + z * z, y * y, z * z}) {
        if (d2 < R * R) {
          const double x = std::sqrt(R * R - d2);
          for (double s : {-x, x})
            if (s > a && s < b) breaks.push_back(s);
        }
      }
    }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  // Between breakpoints the integrand is smooth apart from square-root
  // behaviour at the ends; x = (p + q)/2 - (q - p)/2 cos θ makes it smooth in θ.
  using Rule = boost::math::quadrature::gauss<double, 30>;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double p = breaks[i], q = breaks[i + 1];
    if (q - p <= 0.0) continue;
    const double mid = 0.5 * (p + q), half = 0.5 * (q - p);
    total += Rule::integrate(
        [&](double theta) { return area(mid - half * std::cos(theta)) * half * std::sin(theta); }, 0.0,
        std::numbers::pi);
  }
  return total;
}

} // namespace detail

/// The bounded region Ω: a ball or an axis-aligned box.
class Domain {
public:
  static Domain ball(Vec3 center, double radius, int boundary_samples = 256) {
    if (!(radius > 0.0)) fail(ErrorKind::InvalidArgument, "ball radius must be positive");
    if (boundary_samples < 1) fail(ErrorKind::InvalidArgument, "need at least one boundary sample");
    Domain d;
    d.shape_ = BallShape{center, radius};
    // Fibonacci sphere: equal-area cells, so equal weights sum exactly to 4πR².
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double w = 4.0 * std::numbers::pi * radius * radius / boundary_samples;
    for (int i = 0; i < boundary_samples; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / boundary_samples;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * i;
      const Vec3 n{r * std::cos(phi), r * std::sin(phi), z};
      d.boundary_.points.push_back(center + radius * n);
      d.boundary_.normals.push_back(n);
      d.boundary_.weights.push_back(w);
    }
    return d;
  }

  static Domain box(Vec3 lo, Vec3 hi, double sample_spacing) {
    for (int a = 0; a < 3; ++a)
      if (!(hi[a] > lo[a])) fail(ErrorKind::InvalidArgument, "degenerate box domain");
    if (!(sample_spacing > 0.0)) fail(ErrorKind::InvalidArgument, "sample spacing must be positive");
    Domain d;
    d.shape_ = BoxShape{lo, hi};
    for (int axis = 0; axis < 3; ++axis) {
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      const int nu = std::max(1, static_cast<int>(std::ceil((hi[u] - lo[u]) / sample_spacing)));
      const int nv = std::max(1, static_cast<int>(std::ceil((hi[v] - lo[v]) / sample_spacing)));
      const double du = (hi[u] - lo[u]) / nu, dv = (hi[v] - lo[v]) / nv;
      for (int side = 0; side < 2; ++side) {
        Vec3 n{0.0, 0.0, 0.0};
        n[axis] = side == 0 ? -1.0 : 1.0;
        for (int a = 0; a < nu; ++a)
          for (int b = 0; b < nv; ++b) {
            Vec3 p{};
            p[axis] = side == 0 ? lo[axis] : hi[axis];
            p[u] = lo[u] + (a + 0.5) * du;
            p[v] = lo[v] + (b + 0.5) * dv;
            d.boundary_.points.push_back(p);
            d.boundary_.normals.push_back(n);
            d.boundary_.weights.push_back(du * dv);
          }
      }
    }
    return d;
  }

  bool is_ball() const { return std::holds_alternative<BallShape>(shape_); }
  const BallShape &as_ball() const { return std::get<BallShape>(shape_); }
  const BoxShape &as_box() const { return std::get<BoxShape>(shape_); }
  const BoundarySamples &boundary() const { return boundary_; }

  Vec3 center() const {
    if (is_ball()) return as_ball().center;
    const auto &b = as_box();
    return 0.5 * (b.lo + b.hi);
  }

  /// Negative inside, positive outside (exact Euclidean distance for the ball,
  /// the usual box SDF otherwise).
  double signed_distance(const Vec3 &x) const {
    if (is_ball()) {
      const auto &b = as_ball();
      return norm(x - b.center) - b.radius;
    }
    const auto &b = as_box();
    Vec3 q{};
    for (int a = 0; a < 3; ++a) q[a] = std::max(b.lo[a] - x[a], x[a] - b.hi[a]);
    const double outside = norm({std::max(q[0], 0.0), std::max(q[1], 0.0), std::max(q[2], 0.0)});
    return outside + std::min(std::max({q[0], q[1], q[2]}), 0.0);
  }

  bool contains(const Vec3 &x) const { return signed_distance(x) < 0.0; }

  double volume() const {
    if (is_ball()) return 4.0 / 3.0 * std::numbers::pi * std::pow(as_ball().radius, 3);
    const auto &b = as_box();
    return (b.hi[0] - b.lo[0]) * (b.hi[1] - b.lo[1]) * (b.hi[2] - b.lo[2]);
  }

  double surface_area() const {
    if (is_ball()) return 4.0 * std::numbers::pi * std::pow(as_ball().radius, 2);
    const auto &b = as_box();
    const double a = b.hi[0] - b.lo[0], c = b.hi[1] - b.lo[1], e = b.hi[2] - b.lo[2];
    return 2.0 * (a * c + c * e + a * e);
  }

  double diameter() const {
    if (is_ball()) return 2.0 * as_ball().radius;
    return norm(as_box().hi - as_box().lo);
  }

  /// Distance from an interior point x to ∂Ω moving along +axis (dir = +1) or
  /// -axis (dir = -1).
  double axis_distance(const Vec3 &x, int axis, int dir) const {
    if (is_ball()) {
      const auto &b = as_ball();
      const Vec3 d = x - b.center;
      const double da = dir * d[axis];
      const double disc = da * da - (dot(d, d) - b.radius * b.radius);
      return -da + std::sqrt(std::max(0.0, disc));
    }
    const auto &b = as_box();
    return dir > 0 ? b.hi[axis] - x[axis] : x[axis] - b.lo[axis];
  }

  /// Ω must sit strictly inside the lattice with at least `margin_cells` of room.
  Box bounding_box() const {
    if (!is_ball()) return {as_box().lo, as_box().hi};
    const auto &b = as_ball();
    Box out;
    for (int a = 0; a < 3; ++a) out.lo[a] = b.center[a] - b.radius, out.hi[a] = b.center[a] + b.radius;
    return out;
  }

  void validate_in(const Lattice &lattice, double margin_cells = 4.0) const {
    const double need = margin_cells * lattice.spacing();
    const auto [lo, hi] = bounding_box();
    const Vec3 top = lattice.upper();
    for (int a = 0; a < 3; ++a) {
      if (lo[a] - lattice.origin()[a] < need - 1e-12 || top[a] - hi[a] < need - 1e-12) {
        std::ostringstream os;
        os << "domain must lie inside the lattice with a margin of " << margin_cells << " cells (" << need
           << ") on axis " << a;
        fail(ErrorKind::InvalidArgument, os.str());
      }
    }
  }

  /// Identifies (lattice, Ω) pairs for memoized per-lattice data.
  using CacheKey = std::tuple<Vec3, double, Dims, int, Vec3, Vec3, double>;
  CacheKey cache_key(const Lattice &lattice) const {
    if (is_ball())
      return {lattice.origin(), lattice.spacing(), lattice.dims(), 0, as_ball().center, Vec3{}, as_ball().radius};
    return {lattice.origin(), lattice.spacing(), lattice.dims(), 1, as_box().lo, as_box().hi, 0.0};
  }

  /// Fraction of each lattice cell (cube of side h centered at the point)
  /// inside Ω. Memoized per lattice.
  std::shared_ptr<const std::vector<double>> cell_fractions(const Lattice &lattice) const {
    static std::mutex mutex;
    static std::map<CacheKey, std::shared_ptr<const std::vector<double>>> cache;
    const CacheKey key = cache_key(lattice);
    {
      std::lock_guard lock(mutex);
      if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    auto result = std::make_shared<const std::vector<double>>(compute_fractions(lattice));
    std::lock_guard lock(mutex);
    cache.emplace(key, result);
    return result;
  }

private:
  std::vector<double> compute_fractions(const Lattice &lattice) const {
    const double h = lattice.spacing();
    std::vector<double> frac(lattice.size(), 0.0);
    for (std::size_t idx = 0; idx < lattice.size(); ++idx) {
      const Vec3 x = lattice.point(idx);
      if (is_ball()) {
        const auto &b = as_ball();
        const Vec3 d = x - b.center;
        const double r = norm(d);
        const double half_diag = 0.5 * std::sqrt(3.0) * h;
        if (r + half_diag <= b.radius) {
          frac[idx] = 1.0;
        } else if (r - half_diag >= b.radius) {
          frac[idx] = 0.0;
        } else {
          const Vec3 lo = d - (0.5 * h) * Vec3{1, 1, 1};
          const Vec3 hi = d + (0.5 * h) * Vec3{1, 1, 1};
          frac[idx] = std::clamp(detail::ball_box_volume(lo, hi, b.radius) / (h * h * h), 0.0, 1.0);
        }
      } else {
        const auto &b = as_box();
        double f = 1.0;
        for (int a = 0; a < 3; ++a) {
          const double l = std::max(x[a] - 0.5 * h, b.lo[a]);
          const double u = std::min(x[a] + 0.5 * h, b.hi[a]);
          f *= std::max(0.0, u - l) / h;
        }
        frac[idx] = f;
      }
    }
    return frac;
  }

  std::variant<BallShape, BoxShape> shape_;
  BoundarySamples boundary_;
};

} // namespace wavemoment
