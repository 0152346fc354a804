#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <vector>

#include "wavemoment/convolution.hpp"
#include "wavemoment/field.hpp"
#include "wavemoment/field_io.hpp"
#include "wavemoment/potential_ops.hpp"

namespace wavemoment {

/// v = Σ_y g(y) e^{ik|x-y|}/(4π|x-y|) h³ on the lattice. Shares the FFT engine
/// and self-cell weight with the Newtonian potential, which is the k = 0 case.
inline ComplexField helmholtz_green_convolve(const ComplexField &g, double k) {
  if (!(k >= 0.0)) fail(ErrorKind::InvalidArgument, "wavenumber must be non-negative");
  return shared_engine(g.lattice())->convolve(g, KernelSpec::helmholtz(k));
}

inline ComplexField helmholtz_green_convolve(const RealField &g, double k) {
  if (k == 0.0) return to_complex(newtonian_potential_values(g));
  return helmholtz_green_convolve(to_complex(g), k);
}

struct LSSolveReport {
  double k = 0.0;
  int iterations = 0;
  std::vector<double> differences; // ‖û⁽ⁿ⁺¹⁾ - û⁽ⁿ⁾‖ / ‖û⁽ⁿ⁺¹⁾‖
  double contraction = 0.0;        // max ratio of successive differences
  double residual = 0.0;           // ‖û - k² G[(c⁻² - 1) û] - û⁽⁰⁾‖ / ‖û‖
  bool converged = false;
};

/// Divergence carries the report so callers can still log it.
class LSDivergence : public Error {
public:
  LSDivergence(const std::string &msg, LSSolveReport report) : Error(ErrorKind::Divergence, msg), report_(std::move(report)) {}
  const LSSolveReport &report() const { return report_; }

private:
  LSSolveReport report_;
};

struct LSSolution {
  ComplexField u;
  ComplexField source_term; // û⁽⁰⁾ = -(ik/2π) G_k[f/c²]
  RealField contrast;       // c⁻² - 1
  RealField weighted_source; // f / c²
  LSSolveReport report;

  /// Evaluates the integral equation's right-hand side at arbitrary points;
  /// outside the supports this is û itself, free of interpolation error.
  std::vector<Complex> evaluate_at(std::span<const Vec3> points) const {
    const double k = report.k;
    ComplexField::Vector density = (k * k) * contrast.values().cast<Complex>().cwiseProduct(u.values()) -
                                   Complex(0.0, k / (2.0 * std::numbers::pi)) * weighted_source.values().cast<Complex>();
    return convolve_at(u.lattice(), density, KernelSpec::helmholtz(k), points);
  }
};

inline constexpr double kLSTolerance = 1e-10;
inline constexpr int kLSMaxIterations = 200;

/// Neumann iteration for û = k² G_k[(c⁻² - 1) û] - (ik/2π) G_k[f/c²].
inline LSSolution solve_lippmann_schwinger(const RealField &f, const SpeedModel &c, double k, const Domain &domain,
                                           double epsilon = 0.5, double tolerance = kLSTolerance,
                                           int max_iterations = kLSMaxIterations) {
  if (!(k > 0.0) || k > epsilon) fail(ErrorKind::InvalidArgument, "wavenumber must lie in (0, epsilon]");
  if (!(c.lattice() == f.lattice())) fail(ErrorKind::Dimension, "source and speed live on different lattices");
  require_support_in(f, domain, "source f");
  const RealField s = c.inverse_square();
  RealField contrast(f.lattice(), s.values().array() - 1.0);
  require_support_in(contrast, domain, "speed contrast c^-2 - 1");
  const RealField weighted(f.lattice(), f.values().cwiseProduct(s.values()));

  LSSolution out;
  out.report.k = k;
  out.contrast = contrast;
  out.weighted_source = weighted;
  out.source_term = helmholtz_green_convolve(weighted, k);
  out.source_term.values() *= Complex(0.0, -k / (2.0 * std::numbers::pi));

  const bool homogeneous = contrast.values().cwiseAbs().maxCoeff() == 0.0;
  ComplexField::Vector u = out.source_term.values();
  auto apply = [&](const ComplexField::Vector &v) {
    const ComplexField::Vector density = contrast.values().cast<Complex>().cwiseProduct(v);
    ComplexField::Vector next = shared_engine(f.lattice())->convolve(density, KernelSpec::helmholtz(k));
    next *= k * k;
    next += out.source_term.values();
    return next;
  };
  double prev_diff = 0.0;
  for (int it = 1; it <= max_iterations; ++it) {
    const ComplexField::Vector next = homogeneous ? u : apply(u);
    const double norm_next = next.norm();
    const double diff = norm_next > 0.0 ? (next - u).norm() / norm_next : (next - u).norm();
    out.report.differences.push_back(diff);
    out.report.iterations = it;
    if (prev_diff > 0.0) out.report.contraction = std::max(out.report.contraction, diff / prev_diff);
    u = next;
    if (diff <= tolerance) {
      out.report.converged = true;
      break;
    }
    if (prev_diff > 0.0 && out.report.contraction >= 1.0) break;
    prev_diff = diff;
  }
  const double un = u.norm();
  const ComplexField::Vector r = homogeneous ? ComplexField::Vector(u - out.source_term.values()) : ComplexField::Vector(u - apply(u));
  out.report.residual = un > 0.0 ? r.norm() / un : r.norm();
  out.u = ComplexField(f.lattice(), std::move(u));
  if (!out.report.converged) {
    std::ostringstream os;
    os << "Neumann iteration for k = " << k << " did not converge (contraction estimate " << out.report.contraction
       << ", " << out.report.iterations << " iterations)";
    throw LSDivergence(os.str(), out.report);
  }
  return out;
}

/// R · |∂û/∂r - ik û| averaged over points on the sphere |x| = R, per radius.
/// Centered differences along x/|x| with tricubic sampling.
inline std::vector<double> sommerfeld_residual(const ComplexField &u, double k, std::span<const double> radii,
                                               int samples = 200) {
  const Lattice &lat = u.lattice();
  const double h = lat.spacing();
  const Vec3 top = lat.upper();
  std::vector<double> out;
  for (double R : radii) {
    if (!(R > 2.0 * h)) fail(ErrorKind::InvalidArgument, "Sommerfeld radius too small for the lattice spacing");
    for (int a = 0; a < 3; ++a)
      if (R + 3.0 * h > std::min(top[a], -lat.origin()[a]) + 1e-12)
        fail(ErrorKind::InvalidArgument, "Sommerfeld radius " + std::to_string(R) + " leaves the lattice");
    // Fibonacci sphere.
    double acc = 0.0;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < samples; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / samples;
      const double rho = std::sqrt(1.0 - z * z);
      const Vec3 dir{rho * std::cos(golden * i), rho * std::sin(golden * i), z};
      const Complex up = sample_tricubic(lat, u.values().data(), (R + h) * dir);
      const Complex um = sample_tricubic(lat, u.values().data(), (R - h) * dir);
      const Complex u0 = sample_tricubic(lat, u.values().data(), R * dir);
      acc += R * std::abs((up - um) / (2.0 * h) - Complex(0.0, k) * u0);
    }
    out.push_back(acc / samples);
  }
  return out;
}

/// "k,iterations,contraction,residual,converged" header for report rows.
inline void write_ls_reports_csv(std::span<const LSSolveReport> reports, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "k,iterations,contraction,residual,converged\n";
  for (const auto &r : reports)
    out << format_double(r.k) << ',' << r.iterations << ',' << format_double(r.contraction) << ','
        << format_double(r.residual) << ',' << (r.converged ? 1 : 0) << '\n';
}

} // namespace wavemoment
