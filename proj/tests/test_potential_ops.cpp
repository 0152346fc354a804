#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "wavemoment/field_core.hpp"
#include "wavemoment/potential_ops.hpp"

using namespace wavemoment;
using boost::math::quadrature::gauss_kronrod;

namespace {

constexpr double kPi = std::numbers::pi;

Lattice lattice48() { return build_cubic_lattice(-2.0, 2.0, 48); }

// Radial Newtonian potential: w(r) = (1/r) ∫_0^r g s² ds + ∫_r^∞ g s ds.
double radial_potential(const std::function<double(double)> &g, double r, double rmax) {
  auto inner = [&](double s) { return g(s) * s * s; };
  auto outer = [&](double s) { return g(s) * s; };
  const double a = r > 0 ? gauss_kronrod<double, 31>::integrate(inner, 0.0, std::min(r, rmax), 20, 1e-13) / r : 0.0;
  const double b = r < rmax ? gauss_kronrod<double, 31>::integrate(outer, r, rmax, 20, 1e-13) : 0.0;
  return a + b;
}

RealField random_field(const Lattice &lat, const Domain &d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  RealField f(lat);
  for (std::size_t i = 0; i < lat.size(); ++i)
    if (d.contains(lat.point(i))) f.values()[static_cast<Eigen::Index>(i)] = nd(rng);
  return f;
}

double max_abs(const RealField::Vector &v) { return v.cwiseAbs().maxCoeff(); }

// φ = (1 - r²/a²)^6 and g = -Δ_h φ: a member of 𝒜 for any Ω containing the ball of radius a.
RealField bump_source(const Lattice &lat, double a = 0.8) {
  return negative_laplacian(sample_field(PolynomialBumpPreset{1.0, a, {0, 0, 0}, 6}, lat));
}

} // namespace

TEST(SelfCell, UnitCubeIntegral) {
  // Independent: midpoint sum over a fine sub-grid of the cube, excluding nothing
  // (the singularity is integrable and the sub-grid avoids r = 0).
  const int m = 120;
  double acc = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) {
        const double x = (i + 0.5) / m - 0.5, y = (j + 0.5) / m - 0.5, z = (k + 0.5) / m - 0.5;
        acc += 1.0 / std::sqrt(x * x + y * y + z * z);
      }
  acc /= static_cast<double>(m) * m * m;
  EXPECT_NEAR(unit_cube_inverse_distance_integral(), acc, 2e-3);
  EXPECT_NEAR(unit_cube_inverse_distance_integral(), 2.380077, 1e-5);
}

TEST(Newtonian, ZeroSource) {
  const Lattice lat = lattice48();
  const auto w = newtonian_potential(RealField(lat), Domain::ball({0, 0, 0}, 1.5));
  EXPECT_EQ(max_abs(w.w.values()), 0.0);
}

TEST(Newtonian, BallIndicator) {
  const Lattice lat = lattice48();
  const Domain d = Domain::ball({0, 0, 0}, 1.5);
  const double a = 0.5;
  const RealField g = sample_field(BallIndicatorPreset{1.0, a, {0, 0, 0}, 0.0}, lat);
  auto gr = [a](double s) { return s <= a ? 1.0 : 0.0; };
  const double w0 = radial_potential(gr, 0.0, a);
  const double w1 = radial_potential(gr, 1.0, a);
  EXPECT_NEAR(w0, 0.125, 1e-12);
  EXPECT_NEAR(w1, 0.041667, 1e-6);
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {0, 0.6, 0.8}};
  const auto w = newtonian_potential_at(g, pts);
  EXPECT_NEAR(w[0], w0, 0.02 * w0);
  EXPECT_NEAR(w[1], w1, 0.02 * w1);
  EXPECT_NEAR(w[2], w1, 0.02 * w1);
  // The lattice path agrees with point evaluation at lattice points.
  const auto grid = newtonian_potential(g, d);
  const std::size_t idx = lat.index(36, 24, 24);
  const Vec3 p = lat.point(idx);
  EXPECT_NEAR(grid.w[idx], newtonian_potential_at(g, std::vector<Vec3>{p})[0], 1e-12);
}

TEST(Newtonian, FftMatchesDirectSum) {
  const Lattice lat = build_cubic_lattice(-1.0, 1.0, 12);
  const RealField g = random_field(lat, Domain::ball({0, 0, 0}, 0.5), 11);
  const RealField fast = newtonian_potential_values(g);
  const RealField slow = newtonian_potential_direct(g);
  EXPECT_LE(max_abs(fast.values() - slow.values()), 1e-12 * max_abs(slow.values()));
  const auto engine = shared_engine(lat);
  for (double k : {0.7, 3.0}) {
    const ComplexField::Vector gc = g.values().cast<Complex>();
    const auto f = engine->convolve(gc, KernelSpec::helmholtz(k));
    const auto s = convolve_direct(lat, gc, KernelSpec::helmholtz(k));
    EXPECT_LE((f - s).cwiseAbs().maxCoeff(), 1e-12 * s.cwiseAbs().maxCoeff());
  }
}

TEST(Newtonian, DiscreteLaplacianRoundTrip) {
  const Lattice lat = lattice48();
  const Domain d = Domain::ball({0, 0, 0}, 1.5);
  const RealField g = sample_field(GaussianBumpPreset{1.0, 0.2, {0, 0, 0}}, lat);
  const RealField back = negative_laplacian(newtonian_potential(g, d).w);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i)
    if (g[i] > 1e-3) num += std::pow(back[i] - g[i], 2), den += g[i] * g[i];
  EXPECT_LE(std::sqrt(num / den), 0.05);
}

TEST(Newtonian, FarFieldMonopole) {
  const Lattice lat = lattice48();
  const Domain d = Domain::ball({0, 0, 0}, 1.5);
  const RealField g = sample_field(GaussianBumpPreset{1.0, 0.2, {0, 0, 0}}, lat);
  const double mass = volume_integral(g);
  const RealField w = newtonian_potential(g, d).w;
  for (std::size_t idx : {lat.index(47, 24, 24), lat.index(0, 0, 0), lat.index(47, 47, 10)}) {
    const double r = norm(lat.point(idx));
    EXPECT_NEAR(r * w[idx], mass / (4.0 * kPi), 0.05 * mass / (4.0 * kPi));
  }
}

TEST(Newtonian, SupportViolation) {
  const Lattice lat = lattice48();
  const RealField g = sample_field(BallIndicatorPreset{1.0, 1.45, {0, 0, 0}, 0.0}, lat);
  try {
    newtonian_potential(g, Domain::ball({0, 0, 0}, 1.5));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::Support);
  }
}

TEST(Dirichlet, ZeroSource) {
  const Lattice lat = lattice48();
  const auto w = dirichlet_inverse(RealField(lat), Domain::ball({0, 0, 0}, 1.0));
  EXPECT_EQ(max_abs(w.w.values()), 0.0);
}

TEST(Dirichlet, ConstantSourceUnitBall) {
  const Lattice lat = lattice48();
  const Domain d = Domain::ball({0, 0, 0}, 1.0);
  const auto w = dirichlet_inverse(sample_field(ConstantPreset{1.0}, lat), d);
  EXPECT_NEAR(interpolate(w.w, {0, 0, 0}), 1.0 / 6.0, 0.02 / 6.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const double r = norm(lat.point(i));
    if (r < 1.0) worst = std::max(worst, std::abs(w.w[i] - (1.0 - r * r) / 6.0));
    else EXPECT_EQ(w.w[i], 0.0);
  }
  EXPECT_LE(worst, 0.02 / 6.0);
}

TEST(Dirichlet, EigenfunctionRoundTrip) {
  const Lattice lat = lattice48();
  const Domain d = Domain::ball({0, 0, 0}, 1.0);
  auto phi = [](const Vec3 &p) {
    const double r = norm(p);
    if (r >= 1.0) return 0.0;
    return r < 1e-12 ? kPi : std::sin(kPi * r) / r;
  };
  const RealField w = RealField::from_function(lat, phi);
  const RealField rhs(lat, kPi * kPi * w.values());
  const RealField back = dirichlet_inverse(rhs, d).w;
  EXPECT_LE(max_abs(back.values() - w.values()), 0.02 * kPi);
}

TEST(Dirichlet, NormalDerivativeOfQuadratic) {
  const Lattice lat = lattice48();
  const Domain d = Domain::ball({0, 0, 0}, 1.0);
  const auto w = dirichlet_inverse(sample_field(ConstantPreset{1.0}, lat), d);
  for (double v : normal_derivative(w, d)) EXPECT_NEAR(v, -1.0 / 3.0, 0.05 / 3.0);
  for (double v : normal_derivative(RealField(lat), d, false)) EXPECT_EQ(v, 0.0);
}

TEST(Dirichlet, NormalDerivativeNearEdgeRejected) {
  const Lattice lat = build_cubic_lattice(-1.0, 1.0, 21);
  const Domain d = Domain::box({-0.95, -0.5, -0.5}, {0.5, 0.5, 0.5}, 0.2);
  try {
    normal_derivative(RealField(lat), d, true);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
}

TEST(Dirichlet, SelfAdjoint) {
  const Lattice lat = build_cubic_lattice(-2.0, 2.0, 33);
  const Domain d = Domain::ball({0, 0, 0}, 1.5);
  for (std::uint64_t s = 0; s < 3; ++s) {
    const RealField g = random_field(lat, d, 100 + s), h = random_field(lat, d, 200 + s);
    const double a = inner(dirichlet_inverse(g, d).w, h);
    const double b = inner(g, dirichlet_inverse(h, d).w);
    EXPECT_NEAR(a, b, 1e-8 * std::abs(a));
  }
}

TEST(Dirichlet, MaximumPrinciple) {
  const Lattice lat = build_cubic_lattice(-2.0, 2.0, 33);
  const Domain d = Domain::ball({0, 0, 0}, 1.5);
  RealField g = random_field(lat, d, 5);
  g.values() = g.values().cwiseAbs();
  const RealField w = dirichlet_inverse(g, d).w;
  EXPECT_GE(w.values().minCoeff(), -1e-10 * max_abs(w.values()));
}

TEST(ApplyL, Zero) {
  const Lattice lat = lattice48();
  EXPECT_EQ(max_abs(apply_L(RealField(lat), SpeedModel::constant(lat), Domain::ball({0, 0, 0}, 1.0)).values()), 0.0);
}

TEST(ApplyL, EigenfunctionOfUnitBall) {
  const Lattice lat = lattice48();
  const Domain d = Domain::ball({0, 0, 0}, 1.0);
  const RealField g = RealField::from_function(lat, [](const Vec3 &p) {
    const double r = norm(p);
    return r >= 1.0 ? 0.0 : (r < 1e-12 ? kPi : std::sin(kPi * r) / r);
  });
  const RealField Lg = apply_L(g, SpeedModel::constant(lat), d);
  EXPECT_NEAR(1.0 / (kPi * kPi), 0.101321, 1e-6);
  EXPECT_LE(max_abs(Lg.values() - g.values() / (kPi * kPi)), 0.02 * kPi / (kPi * kPi));
}

TEST(ApplyL, SelfAdjointAndNonNegativeInWeightedProduct) {
  const Lattice lat = build_cubic_lattice(-2.0, 2.0, 33);
  const Domain d = Domain::ball({0, 0, 0}, 1.5);
  const SpeedModel c =
      SpeedModel::from_inverse_square(sample_field(HarmonicPerturbationPreset{0.3, "1 + x*y", {0, 0, 0}, 1.0}, lat));
  const RealField weight = c.inverse_square();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const RealField v = random_field(lat, d, 300 + s), u = random_field(lat, d, 400 + s);
    const RealField Lv = apply_L(v, c, d);
    const double vv = weighted_inner(Lv, v, weight);
    EXPECT_GE(vv, -1e-12 * inner(v, v));
    // Independent quadratic form: forward-difference Dirichlet energy of w = Δ⁻¹(c⁻²v),
    // with w = 0 outside Ω. Agrees with ⟨Lv, v⟩ up to the cut-cell boundary terms.
    double energy = 0.0;
    const double h = lat.spacing();
    for (int k = 0; k + 1 < lat.nz(); ++k)
      for (int j = 0; j + 1 < lat.ny(); ++j)
        for (int i = 0; i + 1 < lat.nx(); ++i) {
          const double w0 = Lv.at(i, j, k);
          energy += std::pow(Lv.at(i + 1, j, k) - w0, 2) + std::pow(Lv.at(i, j + 1, k) - w0, 2) +
                    std::pow(Lv.at(i, j, k + 1) - w0, 2);
        }
    energy *= h;
    EXPECT_GT(energy, 0.0);
    EXPECT_NEAR(vv, energy, 0.25 * energy);
    if (s < 3) {
      const double a = weighted_inner(Lv, u, weight);
      const double b = weighted_inner(v, apply_L(u, c, d), weight);
      EXPECT_NEAR(a, b, 1e-8 * std::max(std::abs(a), std::abs(b)));
    }
  }
}

TEST(Ibyp, ZeroSource) {
  const Lattice lat = lattice48();
  const auto r = ibyp_identity(RealField(lat), Domain::ball({0, 0, 0}, 1.5), 1, {2, 0, 0});
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.rhs, 0.0);
}

TEST(Ibyp, BumpSourceAgrees) {
  const Lattice lat = lattice48();
  const Domain d = Domain::ball({0, 0, 0}, 1.5);
  const RealField g = bump_source(lat);
  for (int n : {1, 3, 5}) {
    const auto r = ibyp_identity(g, d, n, {2, 0, 0});
    EXPECT_LE(r.relative_gap(), 0.03) << "n=" << n << " lhs=" << r.lhs << " rhs=" << r.rhs;
  }
  EXPECT_LE(boundary_flux_ratio(g, d), kFluxMembershipTolerance);
}

TEST(Ibyp, RejectsNonMember) {
  const Lattice lat = lattice48();
  const Domain d = Domain::ball({0, 0, 0}, 1.5);
  const RealField g = sample_field(GaussianBumpPreset{1.0, 0.2, {0.3, 0, 0}}, lat);
  EXPECT_GT(boundary_flux_ratio(g, d), 10.0 * kFluxMembershipTolerance);
  try {
    ibyp_identity(g, d, 1, {2, 0, 0});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::Membership);
  }
}

TEST(Ibyp, RejectsEvenPower) {
  const Lattice lat = lattice48();
  EXPECT_THROW(ibyp_identity(bump_source(lat), Domain::ball({0, 0, 0}, 1.5), 2, {2, 0, 0}), Error);
}
