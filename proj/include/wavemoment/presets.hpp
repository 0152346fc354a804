#pragma once

#include <cmath>
#include <string>
#include <variant>

#include "wavemoment/expression.hpp"
#include "wavemoment/field.hpp"

namespace wavemoment {

/// Relative threshold below which smooth presets are truncated to zero.
inline constexpr double kSmoothSupportThreshold = 1e-12;

struct ConstantPreset {
  double value = 1.0;
};

/// amplitude * exp(-|x - center|^2 / (2 sigma^2))
struct GaussianBumpPreset {
  double amplitude = 1.0;
  double sigma = 0.3;
  Vec3 center{0.0, 0.0, 0.0};
};

/// Indicator of a ball; with smoothing > 0 the edge is a quintic smoothstep
/// over [radius - smoothing, radius + smoothing].
struct BallIndicatorPreset {
  double amplitude = 1.0;
  double radius = 0.5;
  Vec3 center{0.0, 0.0, 0.0};
  double smoothing = 0.0;
};

/// amplitude * (1 - |x - center|^2 / radius^2)^power inside the ball, 0 outside.
struct PolynomialBumpPreset {
  double amplitude = 1.0;
  double radius = 0.5;
  Vec3 center{0.0, 0.0, 0.0};
  int power = 4;
};

/// Values of c^{-2} = 1 + epsilon * phi(x - center) on the ball (center,
/// radius) and 1 elsewhere; phi is a harmonic expression such as "x" or "x*y".
struct HarmonicPerturbationPreset {
  double epsilon = 0.05;
  std::string harmonic = "x";
  Vec3 center{0.0, 0.0, 0.0};
  double radius = 0.5;
};

struct ExpressionPreset {
  std::string expression = "0";
};

using FieldPreset = std::variant<ConstantPreset, GaussianBumpPreset, BallIndicatorPreset, PolynomialBumpPreset,
                                 HarmonicPerturbationPreset, ExpressionPreset>;

namespace detail {
inline double smoothstep5(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
}
} // namespace detail

inline double evaluate_preset(const FieldPreset &preset, const Vec3 &x) {
  return std::visit(
      [&](const auto &p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ConstantPreset>) {
          return p.value;
        } else if constexpr (std::is_same_v<P, GaussianBumpPreset>) {
          const Vec3 d = x - p.center;
          return p.amplitude * std::exp(-dot(d, d) / (2.0 * p.sigma * p.sigma));
        } else if constexpr (std::is_same_v<P, BallIndicatorPreset>) {
          const double r = norm(x - p.center);
          if (p.smoothing <= 0.0) return r <= p.radius ? p.amplitude : 0.0;
          return p.amplitude * detail::smoothstep5((p.radius + p.smoothing - r) / (2.0 * p.smoothing));
        } else if constexpr (std::is_same_v<P, PolynomialBumpPreset>) {
          const Vec3 d = x - p.center;
          const double s = 1.0 - dot(d, d) / (p.radius * p.radius);
          return s > 0.0 ? p.amplitude * std::pow(s, p.power) : 0.0;
        } else if constexpr (std::is_same_v<P, HarmonicPerturbationPreset>) {
          const Vec3 d = x - p.center;
          if (norm(d) > p.radius) return 1.0;
          return 1.0 + p.epsilon * Expression(p.harmonic)(d);
        } else {
          return Expression(p.expression)(x);
        }
      },
      preset);
}

/// Samples a preset on the lattice and assigns its support mask: |v| > 0 for
/// indicator-type presets, |v| > 1e-12 * peak (with values below zeroed) for
/// smooth ones.
inline RealField sample_field(const FieldPreset &preset, const Lattice &lattice) {
  RealField::Vector v(static_cast<Eigen::Index>(lattice.size()));
  if (const auto *e = std::get_if<ExpressionPreset>(&preset)) {
    const Expression expr(e->expression);
    for (std::size_t i = 0; i < lattice.size(); ++i) v[static_cast<Eigen::Index>(i)] = expr(lattice.point(i));
  } else if (const auto *h = std::get_if<HarmonicPerturbationPreset>(&preset)) {
    const Expression phi(h->harmonic);
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      const Vec3 d = lattice.point(i) - h->center;
      v[static_cast<Eigen::Index>(i)] = norm(d) > h->radius ? 1.0 : 1.0 + h->epsilon * phi(d);
    }
  } else {
    for (std::size_t i = 0; i < lattice.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = evaluate_preset(preset, lattice.point(i));
  }
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      fail(ErrorKind::InvalidArgument, "preset evaluates to a non-finite value at " + std::to_string(i));

  RealField field(lattice, std::move(v));
  const bool indicator = std::holds_alternative<BallIndicatorPreset>(preset) ||
                         std::holds_alternative<PolynomialBumpPreset>(preset) ||
                         std::holds_alternative<ConstantPreset>(preset) ||
                         std::holds_alternative<HarmonicPerturbationPreset>(preset);
  if (!indicator) {
    const double cut = kSmoothSupportThreshold * field.peak();
    for (Eigen::Index i = 0; i < field.values().size(); ++i)
      if (std::abs(field.values()[i]) <= cut) field.values()[i] = 0.0;
  }
  field.mask() = field.nonzero_mask();
  return field;
}

} // namespace wavemoment
