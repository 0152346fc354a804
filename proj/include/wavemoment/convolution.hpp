#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <tuple>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fftw3.h>

#include "wavemoment/field.hpp"

namespace wavemoment {

/// ∫ over the unit cube centered at 0 of 1/|r|. Scaling gives the exact
/// self-cell weight h^2 * C for a cube of side h.
inline double unit_cube_inverse_distance_integral() {
  // Pyramid decomposition: 6 * ∫_0^{1/2} x dx * ∫∫_{[-1,1]^2} (1+u^2+v^2)^{-1/2},
  // the inner u-integral being 2 asinh(1/sqrt(1+v^2)).
  static const double value = [] {
    auto f = [](double v) { return 2.0 * std::asinh(1.0 / std::sqrt(1.0 + v * v)); };
    const double half = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 15, 1e-15);
    return 6.0 * 0.125 * 2.0 * half;
  }();
  return value;
}

/// Convolution kernels K(x - y) used across the library. Sums take the form
/// Σ_y g(y) K(x - y) h^3.
struct KernelSpec {
  enum class Kind { Helmholtz, Power };
  Kind kind = Kind::Helmholtz;
  double wavenumber = 0.0; // Helmholtz: e^{ikr}/(4πr)
  int power = -1;          // Power: r^power, power >= -1

  static KernelSpec helmholtz(double k) { return {Kind::Helmholtz, k, -1}; }
  static KernelSpec newtonian() { return helmholtz(0.0); }
  static KernelSpec distance_power(int n) { return {Kind::Power, 0.0, n}; }

  friend bool operator<(const KernelSpec &a, const KernelSpec &b) {
    return std::tie(a.kind, a.wavenumber, a.power) < std::tie(b.kind, b.wavenumber, b.power);
  }
};

/// Kernel value at distance r; r == 0 is the singular self cell, replaced by
/// the cell average of the singular part.
inline Complex kernel_value(const KernelSpec &spec, double r, double h) {
  if (spec.kind == KernelSpec::Kind::Helmholtz) {
    if (r == 0.0) return unit_cube_inverse_distance_integral() / (4.0 * std::numbers::pi * h);
    return std::exp(Complex(0.0, spec.wavenumber * r)) / (4.0 * std::numbers::pi * r);
  }
  if (spec.power < -1) fail(ErrorKind::InvalidArgument, "distance kernels below r^-1 are not supported");
  if (spec.power == -1) return r == 0.0 ? unit_cube_inverse_distance_integral() / h : 1.0 / r;
  if (spec.power == 0) return 1.0;
  return r == 0.0 ? 0.0 : std::pow(r, spec.power);
}

namespace detail {
inline std::mutex &fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : size(n), data(fftw_alloc_complex(n)) {
    if (!data) throw std::bad_alloc();
    std::fill(reinterpret_cast<double *>(data), reinterpret_cast<double *>(data) + 2 * n, 0.0);
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer &) = delete;
  FftwBuffer &operator=(const FftwBuffer &) = delete;
  Complex *as_complex() { return reinterpret_cast<Complex *>(data); }
  std::size_t size;
  fftw_complex *data;
};
} // namespace detail

/// Aperiodic lattice convolution by zero-padded FFT (padding 2n per axis, so
/// no wrap-around). Kernel transforms are cached per spec. Results agree with
/// direct summation to rounding.
class ConvolutionEngine {
public:
  explicit ConvolutionEngine(Lattice lattice) : lattice_(std::move(lattice)) {
    for (int a = 0; a < 3; ++a) padded_[a] = 2 * lattice_.dims()[a];
    total_ = static_cast<std::size_t>(padded_[0]) * padded_[1] * padded_[2];
    detail::FftwBuffer probe(total_);
    std::lock_guard lock(detail::fftw_planner_mutex());
    // FFTW wants row-major dims with the last index fastest; x is fastest here.
    forward_ = fftw_plan_dft_3d(padded_[2], padded_[1], padded_[0], probe.data, probe.data, FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ =
        fftw_plan_dft_3d(padded_[2], padded_[1], padded_[0], probe.data, probe.data, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~ConvolutionEngine() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  ConvolutionEngine(const ConvolutionEngine &) = delete;
  ConvolutionEngine &operator=(const ConvolutionEngine &) = delete;

  const Lattice &lattice() const { return lattice_; }

  ComplexField::Vector convolve(const ComplexField::Vector &g, const KernelSpec &spec) const {
    if (static_cast<std::size_t>(g.size()) != lattice_.size()) fail(ErrorKind::Dimension, "convolution input size mismatch");
    ComplexField::Vector out = ComplexField::Vector::Zero(g.size());
    if ((g.array() == Complex(0.0, 0.0)).all()) return out;
    const auto kernel_ptr = kernel_transform(spec);
    const auto &kernel = *kernel_ptr;
    detail::FftwBuffer buf(total_);
    scatter(g, buf.as_complex());
    fftw_execute_dft(forward_, buf.data, buf.data);
    Complex *b = buf.as_complex();
    for (std::size_t i = 0; i < total_; ++i) b[i] *= kernel[i];
    fftw_execute_dft(backward_, buf.data, buf.data);
    const double scale = lattice_.cell_volume() / static_cast<double>(total_);
    gather(b, out, scale);
    return out;
  }

  ComplexField convolve(const ComplexField &g, const KernelSpec &spec) const {
    return ComplexField(lattice_, convolve(g.values(), spec));
  }
  ComplexField convolve(const RealField &g, const KernelSpec &spec) const {
    return ComplexField(lattice_, convolve(ComplexField::Vector(g.values().cast<Complex>()), spec));
  }

private:
  std::size_t padded_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(padded_[0]) *
                                             (static_cast<std::size_t>(j) + static_cast<std::size_t>(padded_[1]) * k);
  }

  void scatter(const ComplexField::Vector &g, Complex *buf) const {
    for (int k = 0; k < lattice_.nz(); ++k)
      for (int j = 0; j < lattice_.ny(); ++j)
        for (int i = 0; i < lattice_.nx(); ++i)
          buf[padded_index(i, j, k)] = g[static_cast<Eigen::Index>(lattice_.index(i, j, k))];
  }

  void gather(const Complex *buf, ComplexField::Vector &out, double scale) const {
    for (int k = 0; k < lattice_.nz(); ++k)
      for (int j = 0; j < lattice_.ny(); ++j)
        for (int i = 0; i < lattice_.nx(); ++i)
          out[static_cast<Eigen::Index>(lattice_.index(i, j, k))] = buf[padded_index(i, j, k)] * scale;
  }

  std::shared_ptr<const std::vector<Complex>> kernel_transform(const KernelSpec &spec) const {
    std::lock_guard lock(cache_mutex_);
    if (auto it = cache_.find(spec); it != cache_.end()) return it->second;
    // Each transform holds 8 N complex values; keep only a handful (k sweeps).
    if (cache_.size() >= kMaxCachedKernels) cache_.clear();
    auto kernel = std::make_shared<std::vector<Complex>>(total_, Complex(0.0, 0.0));
    const double h = lattice_.spacing();
    const Dims &n = lattice_.dims();
    for (int dk = -(n[2] - 1); dk <= n[2] - 1; ++dk)
      for (int dj = -(n[1] - 1); dj <= n[1] - 1; ++dj)
        for (int di = -(n[0] - 1); di <= n[0] - 1; ++di) {
          const double r = h * std::sqrt(static_cast<double>(di * di + dj * dj + dk * dk));
          const int i = di < 0 ? di + padded_[0] : di;
          const int j = dj < 0 ? dj + padded_[1] : dj;
          const int k = dk < 0 ? dk + padded_[2] : dk;
          (*kernel)[padded_index(i, j, k)] = kernel_value(spec, r, h);
        }
    detail::FftwBuffer buf(total_);
    std::copy(kernel->begin(), kernel->end(), buf.as_complex());
    fftw_execute_dft(forward_, buf.data, buf.data);
    std::copy(buf.as_complex(), buf.as_complex() + total_, kernel->begin());
    cache_[spec] = kernel;
    return kernel;
  }

  static constexpr std::size_t kMaxCachedKernels = 6;

  Lattice lattice_;
  Dims padded_{};
  std::size_t total_ = 0;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
  mutable std::mutex cache_mutex_;
  mutable std::map<KernelSpec, std::shared_ptr<const std::vector<Complex>>> cache_;
};

/// Process-wide engine per lattice so kernel transforms are reused across calls.
inline std::shared_ptr<const ConvolutionEngine> shared_engine(const Lattice &lattice) {
  static std::mutex m;
  static std::vector<std::shared_ptr<const ConvolutionEngine>> engines;
  std::lock_guard lock(m);
  for (const auto &e : engines)
    if (e->lattice() == lattice) return e;
  if (engines.size() >= 3) engines.erase(engines.begin());
  engines.push_back(std::make_shared<const ConvolutionEngine>(lattice));
  return engines.back();
}

/// Reference path: Σ_y g(y) K(x - y) h^3 by direct summation over the
/// support of g. O(N * |supp g|).
inline ComplexField::Vector convolve_direct(const Lattice &lattice, const ComplexField::Vector &g, const KernelSpec &spec) {
  std::vector<std::size_t> support;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (g[i] != Complex(0.0, 0.0)) support.push_back(static_cast<std::size_t>(i));
  ComplexField::Vector out = ComplexField::Vector::Zero(g.size());
  const double h = lattice.spacing();
  for (std::size_t x = 0; x < lattice.size(); ++x) {
    const auto cx = lattice.coords(x);
    Complex acc(0.0, 0.0);
    for (std::size_t y : support) {
      const auto cy = lattice.coords(y);
      const int di = cx[0] - cy[0], dj = cx[1] - cy[1], dk = cx[2] - cy[2];
      const double r = h * std::sqrt(static_cast<double>(di * di + dj * dj + dk * dk));
      acc += g[static_cast<Eigen::Index>(y)] * kernel_value(spec, r, h);
    }
    out[static_cast<Eigen::Index>(x)] = acc * lattice.cell_volume();
  }
  return out;
}

/// Evaluates Σ_y g(y) K(x - y) h^3 at arbitrary points (e.g. sensors).
inline std::vector<Complex> convolve_at(const Lattice &lattice, const ComplexField::Vector &g, const KernelSpec &spec,
                                        std::span<const Vec3> points) {
  std::vector<std::size_t> support;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (g[i] != Complex(0.0, 0.0)) support.push_back(static_cast<std::size_t>(i));
  std::vector<Complex> out(points.size());
  const double h = lattice.spacing();
  for (std::size_t p = 0; p < points.size(); ++p) {
    Complex acc(0.0, 0.0);
    for (std::size_t y : support) {
      const double r = norm(points[p] - lattice.point(y));
      acc += g[static_cast<Eigen::Index>(y)] * kernel_value(spec, r < 1e-12 * h ? 0.0 : r, h);
    }
    out[p] = acc * lattice.cell_volume();
  }
  return out;
}

} // namespace wavemoment
