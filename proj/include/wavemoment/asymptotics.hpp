#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "wavemoment/convolution.hpp"
#include "wavemoment/field.hpp"
#include "wavemoment/field_io.hpp"
#include "wavemoment/potential_ops.hpp"

namespace wavemoment {

inline constexpr int kMaxExpansionOrder = 7;

/// Coefficients p_1..p_N of û(x, k) = Σ p_n(x) kⁿ for the difference data
/// (df, c), all on the lattice.
struct ExpansionSeries {
  std::vector<ComplexField> p; // p[n - 1] holds p_n
  RealField df;
  RealField inverse_square;
  std::vector<std::vector<std::string>> trace; // contributing terms per p_n

  int order() const { return static_cast<int>(p.size()); }
  const ComplexField &coefficient(int n) const {
    if (n < 1 || n > order()) fail(ErrorKind::InvalidArgument, "expansion index out of range");
    return p[static_cast<std::size_t>(n - 1)];
  }
  double norm(int n) const { return coefficient(n).values().norm() * std::sqrt(df.lattice().cell_volume()); }
};

namespace detail {

/// Σ_y g(y)|x-y|^power h³ with the standard kernel self-cell values.
inline ComplexField::Vector distance_power_sum(const ComplexField::Vector &g, const Lattice &lat, int power) {
  return shared_engine(lat)->convolve(g, KernelSpec::distance_power(power));
}

inline Complex ipow(int m) {
  static const Complex units[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
  return units[((m % 4) + 4) % 4];
}

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

} // namespace detail

/// Generates p_1..p_N by substituting the series into the integral equation
/// û = k² G_k[(c⁻² − 1) û] − (ik/2π) G_k[c⁻² df] and expanding
/// G_k = Σ_m (ik)^m r^{m-1} / (4π m!). Each p_{n+2} collects
///   Σ_{m=0}^{n} i^m/(4π m!) ∫(c⁻² − 1) p_{n-m} r^{m-1}  −  i^{n+2}/(8π² (n+1)!) ∫ c⁻² df rⁿ.
inline ExpansionSeries pn_recursion(const RealField &df, const SpeedModel &c, int N, const Domain &domain) {
  if (N < 1 || N > kMaxExpansionOrder) fail(ErrorKind::InvalidArgument, "expansion order must lie in [1, 7]");
  if (!(c.lattice() == df.lattice())) fail(ErrorKind::Dimension, "difference source and speed live on different lattices");
  require_support_in(df, domain, "difference source df");
  const Lattice &lat = df.lattice();
  ExpansionSeries out;
  out.df = df;
  out.inverse_square = c.inverse_square();
  RealField contrast(lat, out.inverse_square.values().array() - 1.0);
  require_support_in(contrast, domain, "speed contrast c^-2 - 1");
  const ComplexField::Vector w = out.inverse_square.values().cwiseProduct(df.values()).cast<Complex>();
  const ComplexField::Vector contrast_c = contrast.values().cast<Complex>();
  const bool homogeneous = contrast.values().cwiseAbs().maxCoeff() == 0.0;
  constexpr double pi = std::numbers::pi;

  for (int j = 1; j <= N; ++j) {
    const int n = j - 2; // p_j = p_{n+2}
    std::vector<std::string> terms;
    ComplexField::Vector pj = ComplexField::Vector::Zero(w.size());
    if (n >= 1 && !homogeneous) {
      for (int m = 0; m <= n; ++m) {
        const int src = n - m;
        if (src < 1) continue;
        const ComplexField::Vector dens = contrast_c.cwiseProduct(out.p[static_cast<std::size_t>(src - 1)].values());
        if ((dens.array() == Complex(0.0, 0.0)).all()) continue;
        pj += (detail::ipow(m) / (4.0 * pi * detail::factorial(m))) * detail::distance_power_sum(dens, lat, m - 1);
        terms.push_back("contrast*p" + std::to_string(src) + " r^" + std::to_string(m - 1));
      }
    }
    // Source part: the m = j - 1 term of -(ik/2π) G_k[w].
    pj -= (detail::ipow(j) / (8.0 * pi * pi * detail::factorial(j - 1))) * detail::distance_power_sum(w, lat, j - 2);
    terms.push_back("source r^" + std::to_string(j - 2));
    out.p.emplace_back(lat, std::move(pj));
    out.trace.push_back(std::move(terms));
  }
  return out;
}

/// Σ_{m ≤ N} p_m kᵐ.
inline ComplexField series_eval(const ExpansionSeries &s, double k) {
  if (s.p.empty()) fail(ErrorKind::InvalidArgument, "empty expansion series");
  ComplexField::Vector acc = ComplexField::Vector::Zero(s.p.front().values().size());
  double kn = 1.0;
  for (const auto &pn : s.p) {
    kn *= k;
    acc += kn * pn.values();
  }
  return ComplexField(s.p.front().lattice(), std::move(acc));
}

/// Partial sums up to order N ≤ s.order().
inline ComplexField series_eval(const ExpansionSeries &s, double k, int N) {
  if (N < 1 || N > s.order()) fail(ErrorKind::InvalidArgument, "partial sum order out of range");
  ExpansionSeries head;
  head.p.assign(s.p.begin(), s.p.begin() + N);
  return series_eval(head, k);
}

/// df = c²(−Δ_h)(c²(−Δ_h)(… c²(−Δ_h χ))) with `levels` factors. For compact χ
/// each c⁻² L^j df (j < levels) is −Δ_h of a compact field, so its difference
/// potentials vanish outside the support: the closed form's hypothesis holds
/// through index 2·levels.
inline RealField matched_trace_difference(const RealField &chi, const SpeedModel &c, int levels) {
  if (levels < 1) fail(ErrorKind::InvalidArgument, "matched difference needs at least one level");
  const RealField c2(chi.lattice(), c.inverse_square().values().cwiseInverse());
  RealField g = chi;
  for (int j = 0; j < levels; ++j) g = multiply(c2, negative_laplacian(g));
  g.mask() = g.nonzero_mask();
  return g;
}

struct ClosedFormCoefficient {
  ComplexField p;
  double worst_flux = 0.0; // largest flux ratio of c⁻² L^j df over the levels used
  std::vector<std::string> warnings;
};

/// p_n = −(i/2π) L^{(n+1)/2} df for odd n and 0 for even n, valid when the
/// difference potentials vanish outside Ω. Each c⁻² L^j df that the formula
/// relies on is checked for membership in 𝒜 via its boundary flux; failures
/// only attach a warning.
inline ClosedFormCoefficient closed_form_pn(const RealField &df, const SpeedModel &c, int n, const Domain &domain,
                                            double flux_tolerance = kFluxMembershipTolerance) {
  if (n < 1 || n > kMaxExpansionOrder) fail(ErrorKind::InvalidArgument, "closed-form index must lie in [1, 7]");
  if (!df.all_finite()) fail(ErrorKind::InvalidArgument, "difference source has non-finite values");
  ClosedFormCoefficient out;
  const RealField s = c.inverse_square();
  const int levels = n % 2 == 1 ? (n + 1) / 2 : n / 2;
  RealField g = restrict_to(df, domain);
  for (int j = 0; j < levels; ++j) {
    const RealField weighted = multiply(s, g);
    const double flux = boundary_flux_ratio(weighted, domain);
    out.worst_flux = std::max(out.worst_flux, flux);
    if (flux > flux_tolerance)
      out.warnings.push_back("c^-2 L^" + std::to_string(j) + " df fails the membership check (flux ratio " +
                             format_double(flux) + "); the closed form's hypothesis is unverified");
    g = dirichlet_inverse(weighted, domain).w;
  }
  if (n % 2 == 0) {
    out.p = ComplexField(df.lattice());
    return out;
  }
  out.p = ComplexField(df.lattice(), Complex(0.0, -1.0 / (2.0 * std::numbers::pi)) * g.values().cast<Complex>());
  return out;
}

struct FnSequence {
  std::vector<RealField> F; // F_0 .. F_N
  std::vector<double> norms; // weighted L² norms ‖F_n‖_{c⁻²}

  /// ‖F_{n+1}‖ / ‖F_n‖ for n = 0..N-1.
  std::vector<double> ratios() const {
    std::vector<double> r;
    for (std::size_t i = 0; i + 1 < norms.size(); ++i) r.push_back(norms[i] > 0.0 ? norms[i + 1] / norms[i] : 0.0);
    return r;
  }
};

/// F_0 = df, F_n = L F_{n-1}.
inline FnSequence fn_cascade(const RealField &F0, const SpeedModel &c, int N, const Domain &domain) {
  if (N < 0) fail(ErrorKind::InvalidArgument, "cascade length must be non-negative");
  if (!F0.all_finite()) fail(ErrorKind::InvalidArgument, "F0 has non-finite values");
  FnSequence out;
  const RealField s = c.inverse_square();
  out.F.push_back(restrict_to(F0, domain));
  for (int n = 1; n <= N; ++n) out.F.push_back(apply_L(out.F.back(), c, domain));
  for (const auto &f : out.F) out.norms.push_back(std::sqrt(std::max(0.0, weighted_inner(f, f, s))));
  return out;
}

/// Writes p_n.wmf files plus manifest.json (indices, norms, terms, parameters).
inline void persist_series(const ExpansionSeries &s, const std::filesystem::path &dir, const nlohmann::json &parameters = {}) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["order"] = s.order();
  manifest["parameters"] = parameters;
  for (int n = 1; n <= s.order(); ++n) {
    const std::string name = "p_" + std::to_string(n) + ".wmf";
    persist_field(s.coefficient(n), dir / name);
    manifest["coefficients"].push_back({{"n", n}, {"file", name}, {"norm", s.norm(n)}, {"terms", s.trace[n - 1]}});
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write series manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

} // namespace wavemoment
