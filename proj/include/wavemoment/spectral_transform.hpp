#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "wavemoment/wave_forward.hpp"

namespace wavemoment {

/// Upper end of the small-k band; frequencies above it are rejected.
inline constexpr double kDefaultEpsilon = 0.5;
inline constexpr double kCstarSpreadThreshold = 0.02;

struct KWindow {
  double lo = 0.02;
  double hi = 0.2;
  bool contains(double k) const { return k >= lo - 1e-15 && k <= hi + 1e-15; }
};

/// `count` equispaced frequencies covering the window.
inline std::vector<double> k_grid(const KWindow &w, int count) {
  if (count < 1 || !(w.lo > 0.0) || !(w.hi >= w.lo)) fail(ErrorKind::InvalidArgument, "bad frequency window");
  std::vector<double> k(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) k[static_cast<std::size_t>(i)] = count == 1 ? w.lo : w.lo + (w.hi - w.lo) * i / (count - 1);
  return k;
}

/// û(x, k) at a set of points; values(q, p) belongs to k[q] and points[p].
struct SpectralField {
  std::vector<double> k;
  std::vector<Vec3> points;
  Eigen::MatrixXcd values;
  double tail_estimate = 0.0; // bound on the neglected ∫_T^∞ part, see temporal_fourier

  std::vector<Complex> at_point(std::size_t p) const {
    std::vector<Complex> out(k.size());
    for (std::size_t q = 0; q < k.size(); ++q) out[q] = values(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p));
    return out;
  }
};

namespace detail {

inline std::vector<double> trapezoid_weights(std::span<const double> t) {
  std::vector<double> w(t.size(), 0.0);
  for (std::size_t j = 0; j + 1 < t.size(); ++j) {
    const double dt = t[j + 1] - t[j];
    if (!(dt > 0.0)) fail(ErrorKind::InvalidArgument, "sample times must be strictly increasing");
    w[j] += 0.5 * dt;
    w[j + 1] += 0.5 * dt;
  }
  return w;
}

inline void check_frequencies(std::span<const double> k, double epsilon) {
  if (k.empty()) fail(ErrorKind::InvalidArgument, "no frequencies requested");
  for (double v : k) {
    if (!(v > 0.0)) fail(ErrorKind::InvalidArgument, "frequencies must be positive (k > 0)");
    if (v > epsilon) fail(ErrorKind::InvalidArgument, "frequency " + std::to_string(v) + " lies above the band limit");
  }
}

// (1/2π) Σ_j u_j e^{ik t_j} w_j for every column of `u` (rows are times).
inline Eigen::MatrixXcd fourier_rows(std::span<const double> times, const Eigen::MatrixXd &u, std::span<const double> k) {
  const auto w = trapezoid_weights(times);
  Eigen::MatrixXcd phase(static_cast<Eigen::Index>(k.size()), static_cast<Eigen::Index>(times.size()));
  for (std::size_t q = 0; q < k.size(); ++q)
    for (std::size_t j = 0; j < times.size(); ++j)
      phase(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)) =
          std::exp(Complex(0.0, k[q] * times[j])) * (w[j] / (2.0 * std::numbers::pi));
  return phase * u.cast<Complex>();
}

// Treats the terminal level as if it persisted for another T.
inline double tail_bound(std::span<const double> times, const Eigen::MatrixXd &u) {
  if (times.empty()) return 0.0;
  const double T = times.back();
  double level = 0.0;
  for (std::size_t j = 0; j < times.size(); ++j)
    if (times[j] >= 0.9 * T) level = std::max(level, u.row(static_cast<Eigen::Index>(j)).cwiseAbs().maxCoeff());
  return level * T / (2.0 * std::numbers::pi);
}

} // namespace detail

/// û(x_b, k) = (1/2π) ∫_0^T u(x_b, t) e^{ikt} dt by the trapezoid rule.
inline SpectralField temporal_fourier(const BoundaryTrace &trace, std::span<const double> k,
                                      double epsilon = kDefaultEpsilon) {
  detail::check_frequencies(k, epsilon);
  if (!trace.values.allFinite()) fail(ErrorKind::InvalidArgument, "trace has non-finite values");
  if (static_cast<std::size_t>(trace.values.rows()) != trace.times.size())
    fail(ErrorKind::Dimension, "trace rows do not match its time grid");
  SpectralField out;
  out.k.assign(k.begin(), k.end());
  out.points = trace.sensors;
  out.values = detail::fourier_rows(trace.times, trace.values, k);
  out.tail_estimate = detail::tail_bound(trace.times, trace.values);
  return out;
}

/// Same transform applied to every lattice point of a recorded movie.
inline SpectralField temporal_fourier(const std::vector<RealField> &movie, std::span<const double> times,
                                      std::span<const double> k, double epsilon = kDefaultEpsilon) {
  detail::check_frequencies(k, epsilon);
  if (movie.empty() || movie.size() != times.size()) fail(ErrorKind::Dimension, "movie frames do not match their times");
  const Lattice &lat = movie.front().lattice();
  Eigen::MatrixXd u(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(lat.size()));
  for (std::size_t j = 0; j < movie.size(); ++j) {
    if (!(movie[j].lattice() == lat)) fail(ErrorKind::Dimension, "movie frames live on different lattices");
    if (!movie[j].all_finite()) fail(ErrorKind::InvalidArgument, "movie frame has non-finite values");
    u.row(static_cast<Eigen::Index>(j)) = movie[j].values().transpose();
  }
  SpectralField out;
  out.k.assign(k.begin(), k.end());
  out.points.reserve(lat.size());
  for (std::size_t i = 0; i < lat.size(); ++i) out.points.push_back(lat.point(i));
  out.values = detail::fourier_rows(times, u, k);
  out.tail_estimate = detail::tail_bound(times, u);
  return out;
}

/// û(k) ≈ p1 k + p2 k² on one point.
struct SmallKFit {
  Vec3 point{};
  Complex p1{}, p2{};
  double residual = 0.0;     // ‖û - fit‖ / ‖û‖ over the window (absolute when û ≡ 0)
  KWindow window;
  int samples = 0;
  // For real f, c the exact p1 is imaginary and p2 real.
  double p1_real_part = 0.0; // |Re p1| / |p1|
  double p2_imag_part = 0.0; // |Im p2| / |p2|
  double halving_shift = std::numeric_limits<double>::quiet_NaN(); // |Δp2| / |p2| when refit on [lo, hi/2]
};

namespace detail {

struct TwoTermFit {
  Complex p1, p2;
  double residual;
};

inline TwoTermFit fit_two_terms(const std::vector<double> &k, const std::vector<Complex> &y) {
  const auto n = static_cast<Eigen::Index>(k.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXcd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = k[static_cast<std::size_t>(i)];
    A(i, 1) = k[static_cast<std::size_t>(i)] * k[static_cast<std::size_t>(i)];
    b[i] = y[static_cast<std::size_t>(i)];
  }
  // Column scaling keeps the conditioning check meaningful for tiny k.
  const Eigen::Vector2d scale(A.col(0).norm(), A.col(1).norm());
  if (!(scale.minCoeff() > 0.0)) fail(ErrorKind::InvalidArgument, "small-k fit is rank deficient");
  const Eigen::MatrixXd As = A * scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(As, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto &s = svd.singularValues();
  if (s[1] < 1e-10 * s[0]) fail(ErrorKind::InvalidArgument, "small-k fit is rank deficient (collinear samples)");
  Eigen::VectorXcd p(2);
  p.real() = svd.solve(Eigen::VectorXd(b.real()));
  p.imag() = svd.solve(Eigen::VectorXd(b.imag()));
  p = p.cwiseQuotient(scale.cast<Complex>());
  const Eigen::VectorXcd r = b - A.cast<Complex>() * p;
  const double bn = b.norm();
  return {p[0], p[1], bn > 0.0 ? r.norm() / bn : r.norm()};
}

inline double ratio_or_zero(double num, double den) { return den > 0.0 ? num / den : 0.0; }

} // namespace detail

inline constexpr int kMinFitSamples = 4;

/// Least-squares fit of the two-term small-k model at point `p` using the
/// samples inside `window`. No constant term: û vanishes at k = 0.
inline SmallKFit fit_small_k(const SpectralField &spectral, std::size_t p, const KWindow &window = {}) {
  if (p >= spectral.points.size()) fail(ErrorKind::InvalidArgument, "fit point out of range");
  std::vector<double> k;
  std::vector<Complex> y;
  for (std::size_t q = 0; q < spectral.k.size(); ++q)
    if (window.contains(spectral.k[q])) {
      k.push_back(spectral.k[q]);
      y.push_back(spectral.values(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p)));
    }
  if (static_cast<int>(k.size()) < kMinFitSamples)
    fail(ErrorKind::InvalidArgument, "small-k fit needs at least 4 frequencies inside the window");
  const auto fit = detail::fit_two_terms(k, y);
  SmallKFit out;
  out.point = spectral.points[p];
  out.p1 = fit.p1;
  out.p2 = fit.p2;
  out.residual = fit.residual;
  out.window = window;
  out.samples = static_cast<int>(k.size());
  out.p1_real_part = detail::ratio_or_zero(std::abs(fit.p1.real()), std::abs(fit.p1));
  out.p2_imag_part = detail::ratio_or_zero(std::abs(fit.p2.imag()), std::abs(fit.p2));
  std::vector<double> kh;
  std::vector<Complex> yh;
  for (std::size_t i = 0; i < k.size(); ++i)
    if (k[i] <= 0.5 * window.hi + 1e-15) kh.push_back(k[i]), yh.push_back(y[i]);
  if (static_cast<int>(kh.size()) >= kMinFitSamples) {
    try {
      const auto half = detail::fit_two_terms(kh, yh);
      out.halving_shift = detail::ratio_or_zero(std::abs(half.p2 - fit.p2), std::abs(fit.p2));
    } catch (const Error &) {
      // leave NaN: the half window alone cannot support the fit
    }
  }
  return out;
}

inline std::vector<SmallKFit> fit_small_k_all(const SpectralField &spectral, const KWindow &window = {}) {
  std::vector<SmallKFit> out;
  out.reserve(spectral.points.size());
  for (std::size_t p = 0; p < spectral.points.size(); ++p) out.push_back(fit_small_k(spectral, p, window));
  return out;
}

struct CstarEstimate {
  double value = 0.0;
  double spread = 0.0; // sensor-to-sensor standard deviation / |value|
  bool consistent = true;
  std::vector<double> per_sensor;
};

/// C* = 8π² Re p2, averaged over sensors. The k² coefficient is the same at
/// every sensor, so a large spread flags data the model does not explain.
inline CstarEstimate extract_Cstar(std::span<const SmallKFit> fits, double spread_threshold = kCstarSpreadThreshold) {
  if (fits.empty()) fail(ErrorKind::InvalidArgument, "C* needs at least one fitted sensor");
  CstarEstimate out;
  double sum = 0.0;
  for (const auto &f : fits) {
    out.per_sensor.push_back(8.0 * std::numbers::pi * std::numbers::pi * f.p2.real());
    sum += out.per_sensor.back();
  }
  const double n = static_cast<double>(fits.size());
  out.value = sum / n;
  double var = 0.0;
  for (double v : out.per_sensor) var += (v - out.value) * (v - out.value);
  const double sd = std::sqrt(var / n);
  out.spread = std::abs(out.value) > 0.0 ? sd / std::abs(out.value) : (sd > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  out.consistent = out.spread <= spread_threshold;
  return out;
}

/// "x,y,z,k,re,im", one row per point and frequency.
inline void write_spectral_csv(const SpectralField &s, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "x,y,z,k,re,im\n";
  for (std::size_t p = 0; p < s.points.size(); ++p)
    for (std::size_t q = 0; q < s.k.size(); ++q) {
      const Complex v = s.values(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p));
      out << format_double(s.points[p][0]) << ',' << format_double(s.points[p][1]) << ',' << format_double(s.points[p][2])
          << ',' << format_double(s.k[q]) << ',' << format_double(v.real()) << ',' << format_double(v.imag()) << '\n';
    }
}

/// "x,y,z,re_p1,im_p1,re_p2,im_p2,residual", one row per point.
inline void write_fit_csv(std::span<const SmallKFit> fits, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "x,y,z,re_p1,im_p1,re_p2,im_p2,residual\n";
  for (const auto &f : fits)
    out << format_double(f.point[0]) << ',' << format_double(f.point[1]) << ',' << format_double(f.point[2]) << ','
        << format_double(f.p1.real()) << ',' << format_double(f.p1.imag()) << ',' << format_double(f.p2.real()) << ','
        << format_double(f.p2.imag()) << ',' << format_double(f.residual) << '\n';
}

} // namespace wavemoment
