#include <cmath>
#include <filesystem>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "wavemoment/wave_forward.hpp"

using namespace wavemoment;

namespace {

struct Scene {
  Lattice lattice;
  Domain domain;
  GaussianBumpPreset bump{1.0, 0.2, {0.0, 0.0, 0.0}};
  RealField f;
  explicit Scene(int n)
      : lattice(build_cubic_lattice(-2.0, 2.0, n)), domain(Domain::ball({0.0, 0.0, 0.0}, 1.5, 32)),
        f(sample_field(bump, lattice)) {}
};

// t times the spherical mean of F(|y|) over the sphere |y - x| = t, by direct
// quadrature over the polar angle.
double t_times_mean(const RadialProfile &F, double rho, double t) {
  auto integrand = [&](double theta) {
    return F(std::sqrt(rho * rho + t * t + 2.0 * rho * t * std::cos(theta))) * std::sin(theta);
  };
  return t * 0.5 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, std::numbers::pi, 15, 1e-13);
}

void expect_error(ErrorKind kind, const std::function<void()> &fn) {
  try {
    fn();
    FAIL() << "expected an error";
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

} // namespace

TEST(Kirchhoff, MatchesSphericalMeanQuadrature) {
  const RadialProfile F = radial_profile(GaussianBumpPreset{1.0, 0.2, {0.0, 0.0, 0.0}});
  const Vec3 x{0.9, 0.6, std::sqrt(1.5 * 1.5 - 0.81 - 0.36)};
  for (double t : {0.3, 1.0, 1.3, 1.5, 1.62, 2.0}) {
    const double e = 1e-4;
    const double oracle = (t_times_mean(F, 1.5, t + e) - t_times_mean(F, 1.5, t - e)) / (2.0 * e);
    EXPECT_NEAR(kirchhoff_reference(F, x, t), oracle, 1e-7) << "t = " << t;
  }
}

TEST(Kirchhoff, InitialValueAndZeroSource) {
  const RadialProfile F = radial_profile(GaussianBumpPreset{2.0, 0.3, {0.0, 0.0, 0.0}});
  const Vec3 x{0.1, 0.2, 0.0};
  EXPECT_DOUBLE_EQ(kirchhoff_reference(F, x, 0.0), F(norm(x)));
  const RadialProfile zero = radial_profile(ConstantPreset{0.0});
  EXPECT_EQ(kirchhoff_reference(zero, {1.0, 0.0, 0.0}, 0.7), 0.0);
}

TEST(Kirchhoff, CentreLimitIsContinuous) {
  const RadialProfile F = radial_profile(PolynomialBumpPreset{1.0, 0.8, {0.0, 0.0, 0.0}, 4});
  const double t = 0.35;
  EXPECT_NEAR(kirchhoff_reference(F, {0.0, 0.0, 0.0}, t), kirchhoff_reference(F, {1e-5, 0.0, 0.0}, t), 1e-4);
}

TEST(Kirchhoff, PeakArrivesAtSensorRadius) {
  const RadialProfile F = radial_profile(GaussianBumpPreset{1.0, 0.2, {0.0, 0.0, 0.0}});
  double best_t = 0.0, best = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double t = 1.0 + i * 1e-3;
    const double v = std::abs(kirchhoff_reference(F, {1.5, 0.0, 0.0}, t));
    if (v > best) best = v, best_t = t;
  }
  EXPECT_NEAR(best_t, 1.5, 0.2);
}

TEST(Kirchhoff, RejectsOffCentreSource) {
  expect_error(ErrorKind::NotApplicable, [] { radial_profile(GaussianBumpPreset{1.0, 0.2, {0.1, 0.0, 0.0}}); });
}

TEST(Wave, ZeroSourceGivesZeroTrace) {
  Scene s(24);
  WaveRunConfig cfg;
  cfg.t_final = 1.0;
  const auto run = simulate_wave(RealField(s.lattice), SpeedModel::constant(s.lattice), cfg, s.domain);
  EXPECT_EQ(run.trace.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Wave, TraceRecordingLayout) {
  Scene s(24);
  WaveRunConfig cfg;
  cfg.t_final = 1.0;
  const auto run = simulate_wave(s.f, SpeedModel::constant(s.lattice), cfg, s.domain);
  ASSERT_EQ(run.trace.sensors.size(), s.domain.boundary().points.size());
  ASSERT_EQ(static_cast<std::size_t>(run.trace.values.rows()), run.trace.times.size());
  EXPECT_DOUBLE_EQ(run.trace.dt_record(), 4.0 * run.dt);
  EXPECT_NEAR(run.dt, 0.9 * s.lattice.spacing() / std::sqrt(3.0), 1e-15);
  EXPECT_TRUE(run.trace.values.allFinite());
}

// Both the 24^3 and 48^3 runs against the closed-form oracle; also gives the
// empirical refinement order.
TEST(Wave, KirchhoffAgreementAndRefinement) {
  double err[2];
  int idx = 0;
  for (int n : {24, 48}) {
    Scene s(n);
    WaveRunConfig cfg;
    const auto run = simulate_wave(s.f, SpeedModel::constant(s.lattice), cfg, s.domain);
    const auto ref = kirchhoff_trace(radial_profile(s.bump), run.trace.sensors, run.trace.times);
    err[idx++] = trace_equal(run.trace, ref, 0.03).relative_l2;
  }
  EXPECT_LE(err[1], 0.03);
  EXPECT_GE(std::log2(err[0] / err[1]), 1.5) << err[0] << " -> " << err[1];
}

TEST(Wave, SecondOrderSchemeConverges) {
  double err[2];
  int idx = 0;
  for (int n : {24, 48}) {
    Scene s(n);
    WaveRunConfig cfg;
    cfg.order = 2;
    cfg.t_final = 2.5;
    const auto run = simulate_wave(s.f, SpeedModel::constant(s.lattice), cfg, s.domain);
    const auto ref = kirchhoff_trace(radial_profile(s.bump), run.trace.sensors, run.trace.times);
    err[idx++] = trace_equal(run.trace, ref, 1.0).relative_l2;
  }
  EXPECT_GE(std::log2(err[0] / err[1]), 1.5) << err[0] << " -> " << err[1];
}

TEST(Wave, ReflectingBoxConservesEnergy) {
  Scene s(24);
  // Variable speed with a jump, to exercise the weighted energy.
  RealField c(s.lattice);
  for (std::size_t i = 0; i < s.lattice.size(); ++i)
    c.values()[static_cast<Eigen::Index>(i)] = s.lattice.point(i)[0] > 0.3 ? 1.3 : 1.0;
  for (int order : {2, 4}) {
    WaveRunConfig cfg;
    cfg.absorbing = false;
    cfg.t_final = 2.0;
    cfg.order = order;
    cfg.track_energy = true;
    const auto run = simulate_wave(s.f, SpeedModel(c), cfg, s.domain);
    const double e0 = run.energy.front();
    double drift = 0.0;
    for (double e : run.energy) drift = std::max(drift, std::abs(e - e0) / e0);
    EXPECT_LE(drift, 5e-3) << "order " << order;
    EXPECT_GT(e0, 0.0);
  }
}

TEST(Wave, SpongeDissipatesEnergy) {
  Scene s(24);
  WaveRunConfig cfg;
  cfg.t_final = 6.0;
  cfg.pml_buffer = 0.0;
  cfg.track_energy = true;
  const auto run = simulate_wave(s.f, SpeedModel::constant(s.lattice), cfg, s.domain);
  for (std::size_t i = 1; i < run.energy.size(); ++i) EXPECT_LE(run.energy[i], run.energy[i - 1] * (1.0 + 1e-12));
  EXPECT_LT(run.energy.back(), 1e-2 * run.energy.front());
}

TEST(Wave, TimeReversalRecoversInitialState) {
  Scene s(24);
  WaveRunConfig cfg;
  cfg.absorbing = false;
  WaveStepper stepper(s.f, SpeedModel::constant(s.lattice), cfg);
  while (stepper.steps() < 40) stepper.step();
  stepper.reverse();
  while (stepper.steps() < 79) stepper.step();
  const RealField back = stepper.current();
  EXPECT_LE((back.values() - s.f.values()).cwiseAbs().maxCoeff(), 1e-10 * s.f.peak());
}

TEST(Wave, LinearInSource) {
  Scene s(24);
  const RealField g = sample_field(PolynomialBumpPreset{1.0, 0.6, {0.2, -0.1, 0.0}, 4}, s.lattice);
  const double a = 0.7, b = -1.9;
  const RealField mix(s.lattice, a * s.f.values() + b * g.values());
  WaveRunConfig cfg;
  cfg.t_final = 2.0;
  const SpeedModel c = SpeedModel::constant(s.lattice);
  const auto r1 = simulate_wave(s.f, c, cfg, s.domain);
  const auto r2 = simulate_wave(g, c, cfg, s.domain);
  const auto r12 = simulate_wave(mix, c, cfg, s.domain);
  const Eigen::MatrixXd combo = a * r1.trace.values + b * r2.trace.values;
  EXPECT_LE((r12.trace.values - combo).norm() / combo.norm(), 1e-10);
}

TEST(Wave, CflViolationIsRejected) {
  Scene s(24);
  WaveRunConfig cfg;
  cfg.dt = 0.95 * s.lattice.spacing() / std::sqrt(3.0);
  expect_error(ErrorKind::Cfl, [&] { simulate_wave(s.f, SpeedModel::constant(s.lattice), cfg, s.domain); });
  cfg.dt = 0.5 * s.lattice.spacing() / std::sqrt(3.0);
  expect_error(ErrorKind::Cfl, [&] { simulate_wave(s.f, SpeedModel::constant(s.lattice, 2.0), cfg, s.domain); });
}

TEST(Wave, ThinSpongeIsRejected) {
  Scene s(24);
  WaveRunConfig cfg;
  cfg.pml_width = 4;
  expect_error(ErrorKind::InvalidArgument, [&] { simulate_wave(s.f, SpeedModel::constant(s.lattice), cfg, s.domain); });
}

TEST(Wave, SourceOutsideDomainIsRejected) {
  Scene s(24);
  const RealField f = sample_field(GaussianBumpPreset{1.0, 0.2, {1.4, 0.0, 0.0}}, s.lattice);
  expect_error(ErrorKind::Support, [&] { simulate_wave(f, SpeedModel::constant(s.lattice), WaveRunConfig{}, s.domain); });
}

TEST(Wave, BufferKeepsRecordedWindowClean) {
  Scene s(24);
  WaveRunConfig cfg;
  const auto run = simulate_wave(s.f, SpeedModel::constant(s.lattice), cfg, s.domain);
  EXPECT_GE(run.reflection_free_until, cfg.t_final);
  cfg.pml_buffer = 0.0;
  const auto bare = simulate_wave(s.f, SpeedModel::constant(s.lattice), cfg, s.domain);
  EXPECT_LT(bare.reflection_free_until, cfg.t_final);
  // Huygens: for c = 1 the exact trace vanishes after the pulse has passed.
  EXPECT_LT(run.trace.tail_ratio(), 0.1 * bare.trace.tail_ratio());
}

TEST(Wave, WavesLeaveTheBox) {
  Scene s(24);
  WaveRunConfig cfg; // t_final = 6 = 2 * diameter of Ω
  const auto run = simulate_wave(s.f, SpeedModel::constant(s.lattice), cfg, s.domain);
  EXPECT_LE(run.final_interior_ratio, 1e-2);
  EXPECT_LE(run.trace.tail_ratio(), 2e-2);
}

TEST(Wave, MovieFramesFollowStride) {
  Scene s(20);
  WaveRunConfig cfg;
  cfg.t_final = 1.0;
  cfg.record_movie = true;
  cfg.record_stride = 3;
  const auto run = simulate_wave(s.f, SpeedModel::constant(s.lattice), cfg, s.domain);
  ASSERT_EQ(run.movie.size(), run.trace.times.size());
  EXPECT_EQ(run.movie.front().values(), s.f.values());
  EXPECT_NEAR(run.movie_times[1], 3.0 * run.dt, 1e-14);
  const auto dir = std::filesystem::temp_directory_path() / "wavemoment_movie_test";
  std::filesystem::remove_all(dir);
  persist_movie(run, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "frame_0000.wmf"));
  std::filesystem::remove_all(dir);
}

TEST(TraceEqual, IdenticalAndScaled) {
  Scene s(20);
  WaveRunConfig cfg;
  cfg.t_final = 2.0;
  const auto run = simulate_wave(s.f, SpeedModel::constant(s.lattice), cfg, s.domain);
  const auto same = trace_equal(run.trace, run.trace, 1e-12);
  EXPECT_TRUE(same.equal);
  EXPECT_EQ(same.sup, 0.0);
  BoundaryTrace scaled = run.trace;
  scaled.values *= 1.01;
  const auto r = trace_equal(scaled, run.trace, 0.005);
  EXPECT_NEAR(r.relative_l2, 0.01, 1e-12);
  EXPECT_FALSE(r.equal);
}

TEST(TraceEqual, MismatchedGridsAreRejected) {
  Scene s(20);
  WaveRunConfig cfg;
  cfg.t_final = 1.0;
  const auto run = simulate_wave(s.f, SpeedModel::constant(s.lattice), cfg, s.domain);
  BoundaryTrace shorter = run.trace;
  shorter.times.pop_back();
  shorter.values.conservativeResize(shorter.values.rows() - 1, Eigen::NoChange);
  expect_error(ErrorKind::Dimension, [&] { trace_equal(run.trace, shorter, 0.1); });
  BoundaryTrace moved = run.trace;
  moved.sensors[0][0] += 0.01;
  expect_error(ErrorKind::Dimension, [&] { trace_equal(run.trace, moved, 0.1); });
}

TEST(TraceIo, CsvRoundTripIsExact) {
  Scene s(20);
  WaveRunConfig cfg;
  cfg.t_final = 1.0;
  const auto run = simulate_wave(s.f, SpeedModel::constant(s.lattice), cfg, s.domain);
  const auto path = std::filesystem::temp_directory_path() / "wavemoment_trace_test.csv";
  write_trace_csv(run.trace, path);
  const auto back = read_trace_csv(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.sensors.size(), run.trace.sensors.size());
  EXPECT_EQ(back.times, run.trace.times);
  EXPECT_EQ(back.values, run.trace.values);
  for (std::size_t b = 0; b < back.sensors.size(); ++b) EXPECT_EQ(back.sensors[b], run.trace.sensors[b]);
}

TEST(TraceIo, MissingFileIsIoError) {
  expect_error(ErrorKind::Io, [] { read_trace_csv("/nonexistent/dir/trace.csv"); });
}
