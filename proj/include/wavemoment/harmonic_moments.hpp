#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include <boost/math/statistics/bivariate_statistics.hpp>

#include "wavemoment/field.hpp"
#include "wavemoment/field_io.hpp"
#include "wavemoment/potential_ops.hpp"
#include "wavemoment/presets.hpp"

namespace wavemoment {

inline constexpr int kMaxHarmonicDegree = 8;

/// Real regular solid harmonics r^l P_l^|m|(cos θ) {cos, sin}(|m| φ) with the
/// Racah normalization sqrt((l-|m|)!/(l+|m|)!), so |φ| ≤ r^l. Index order is
/// l = 0..N, m = -l..l (negative m are the sine forms).
class HarmonicBasis {
public:
  explicit HarmonicBasis(int max_degree) : degree_(max_degree) {
    if (max_degree < 0) fail(ErrorKind::InvalidArgument, "harmonic degree must be non-negative");
    if (max_degree > kMaxHarmonicDegree) fail(ErrorKind::InvalidArgument, "harmonic degree above 8 is not supported (conditioning)");
  }

  int degree() const { return degree_; }
  std::size_t size() const { return static_cast<std::size_t>((degree_ + 1) * (degree_ + 1)); }
  static std::size_t index(int l, int m) { return static_cast<std::size_t>(l * l + l + m); }
  static int l_of(std::size_t a) { return static_cast<int>(std::floor(std::sqrt(static_cast<double>(a)) + 1e-9)); }
  static int m_of(std::size_t a) {
    const int l = l_of(a);
    return static_cast<int>(a) - l * l - l;
  }

  /// All basis values at x (relative to `origin`), in index order.
  std::vector<double> evaluate(const Vec3 &p, const Vec3 &origin = {0.0, 0.0, 0.0}) const {
    const Vec3 d = p - origin;
    const double x = d[0], y = d[1], z = d[2], r2 = x * x + y * y + z * z;
    const int N = degree_;
    // c[l][m], s[l][m] for 0 <= m <= l.
    std::vector<std::vector<double>> c(N + 1, std::vector<double>(N + 1, 0.0)), s = c;
    c[0][0] = 1.0;
    for (int l = 0; l < N; ++l) {
      const double f = std::sqrt((2.0 * l + 1.0) / (2.0 * l + 2.0));
      c[l + 1][l + 1] = f * (x * c[l][l] - y * s[l][l]);
      s[l + 1][l + 1] = f * (y * c[l][l] + x * s[l][l]);
      for (int m = 0; m <= l; ++m) {
        const double lower = l >= 1 && m <= l - 1 ? std::sqrt(static_cast<double>((l + m) * (l - m))) : 0.0;
        const double denom = std::sqrt(static_cast<double>((l + m + 1) * (l - m + 1)));
        c[l + 1][m] = ((2.0 * l + 1.0) * z * c[l][m] - (lower > 0.0 ? lower * r2 * c[l - 1][m] : 0.0)) / denom;
        s[l + 1][m] = ((2.0 * l + 1.0) * z * s[l][m] - (lower > 0.0 ? lower * r2 * s[l - 1][m] : 0.0)) / denom;
      }
    }
    std::vector<double> out(size());
    for (int l = 0; l <= N; ++l)
      for (int m = -l; m <= l; ++m) out[index(l, m)] = m < 0 ? s[l][-m] : c[l][m];
    return out;
  }

  /// Basis function a sampled on a lattice.
  RealField sample(std::size_t a, const Lattice &lattice, const Vec3 &origin = {0.0, 0.0, 0.0}) const {
    if (a >= size()) fail(ErrorKind::InvalidArgument, "basis index out of range");
    return RealField::from_function(lattice, [&](const Vec3 &p) { return evaluate(p, origin)[a]; });
  }

  /// Gram matrix ∫_Ω φ_a φ_b over the domain (cut-cell weights) and its 2-norm condition number.
  std::pair<Eigen::MatrixXd, double> gram(const Lattice &lattice, const Domain &domain, const Vec3 &origin = {0.0, 0.0, 0.0}) const {
    const auto frac = domain.cell_fractions(lattice);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      if ((*frac)[i] == 0.0) continue;
      const auto v = evaluate(lattice.point(i), origin);
      const Eigen::Map<const Eigen::VectorXd> phi(v.data(), static_cast<Eigen::Index>(v.size()));
      G.noalias() += ((*frac)[i] * lattice.cell_volume()) * phi * phi.transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
    const auto &sv = svd.singularValues();
    const double cond = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
    return {G, cond};
  }

private:
  int degree_;
};

inline HarmonicBasis build_harmonic_basis(int max_degree) { return HarmonicBasis(max_degree); }

struct MomentVector {
  std::vector<double> values; // index order of HarmonicBasis
  bool weighted = false;      // true: weight c⁻²

  std::size_t size() const { return values.size(); }
  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
};

/// m_α = ∫_Ω g φ_α (weight) dx with the domain's cut-cell weights.
inline MomentVector moments(const RealField &g, const HarmonicBasis &basis, const Domain &domain,
                            const RealField *weight = nullptr) {
  if (!g.all_finite()) fail(ErrorKind::InvalidArgument, "moment input has non-finite values");
  if (weight && !(weight->lattice() == g.lattice())) fail(ErrorKind::Dimension, "weight lives on a different lattice");
  const Lattice &lat = g.lattice();
  const auto frac = domain.cell_fractions(lat);
  const Vec3 origin = domain.center();
  MomentVector out;
  out.weighted = weight != nullptr;
  out.values.assign(basis.size(), 0.0);
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const double gi = g[i] * (weight ? (*weight)[i] : 1.0);
    if ((*frac)[i] == 0.0 || gi == 0.0) continue;
    const auto phi = basis.evaluate(lat.point(i), origin);
    const double w = (*frac)[i] * gi;
    for (std::size_t a = 0; a < phi.size(); ++a) out.values[a] += w * phi[a];
  }
  for (double &v : out.values) v *= lat.cell_volume();
  return out;
}

inline MomentVector weighted_moments(const RealField &g, const SpeedModel &c, const HarmonicBasis &basis,
                                     const Domain &domain) {
  const RealField s = c.inverse_square();
  return moments(g, basis, domain, &s);
}

/// Default membership thresholds on the two dimensionless diagnostics.
inline constexpr double kMomentMembershipTolerance = 1e-3;
inline constexpr double kFluxDiagnosticTolerance = 1e-3;

struct MembershipReport {
  double moment_diagnostic = 0.0; // max_α |m_α| / (‖g‖_L1 · max_Ω |φ_α|)
  double flux_diagnostic = 0.0;   // sup |∂ν Δ⁻¹ g| · |∂Ω| / ‖g‖_L1
  bool moment_member = true;
  bool flux_member = true;
  bool verdict = true; // both routes agree on membership

  std::string to_text() const {
    std::ostringstream os;
    os << "moment_diagnostic " << format_double(moment_diagnostic) << (moment_member ? " member" : " non-member") << '\n'
       << "flux_diagnostic " << format_double(flux_diagnostic) << (flux_member ? " member" : " non-member") << '\n'
       << "verdict " << (verdict ? "member" : "non-member") << '\n';
    return os.str();
  }
};

/// Route 1: every moment is tiny relative to the size of g. Route 2: the
/// Dirichlet potential of g has no normal flux through ∂Ω.
inline MembershipReport membership_in_A(const RealField &g, const Domain &domain, const HarmonicBasis &basis,
                                        double moment_tol = kMomentMembershipTolerance,
                                        double flux_tol = kFluxDiagnosticTolerance) {
  require_support_in(g, domain, "membership candidate g");
  MembershipReport r;
  const Lattice &lat = g.lattice();
  const double l1 = g.values().cwiseAbs().sum() * lat.cell_volume();
  if (l1 == 0.0) return r;
  const auto m = moments(g, basis, domain);
  const auto frac = domain.cell_fractions(lat);
  const Vec3 origin = domain.center();
  std::vector<double> peak(basis.size(), 0.0);
  for (std::size_t i = 0; i < lat.size(); ++i) {
    if ((*frac)[i] == 0.0) continue;
    const auto phi = basis.evaluate(lat.point(i), origin);
    for (std::size_t a = 0; a < phi.size(); ++a) peak[a] = std::max(peak[a], std::abs(phi[a]));
  }
  for (std::size_t a = 0; a < m.size(); ++a)
    if (peak[a] > 0.0) r.moment_diagnostic = std::max(r.moment_diagnostic, std::abs(m.values[a]) / (l1 * peak[a]));
  r.flux_diagnostic = boundary_flux_ratio(g, domain);
  r.moment_member = r.moment_diagnostic <= moment_tol;
  r.flux_member = r.flux_diagnostic <= flux_tol;
  r.verdict = r.moment_member && r.flux_member;
  return r;
}

/// Portable uniform [0, 1) from a 64-bit engine (the standard distributions
/// are implementation-defined).
inline double uniform01(std::mt19937_64 &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline constexpr int kGeneratorBumpPower = 6;

/// −Δ_h of a random sum of one to three polynomial bumps (1 - |x-c|²/R²)^6,
/// each ball sitting at least 4h inside Ω. Summation by parts moves −Δ_h onto
/// the harmonic test function, so every moment vanishes up to O(h²).
inline RealField generate_A_element(std::uint64_t seed, const Domain &domain, const Lattice &lattice) {
  std::mt19937_64 rng(seed);
  const double h = lattice.spacing();
  const Box bb = domain.bounding_box();
  const int count = 1 + static_cast<int>(uniform01(rng) * 3.0);
  RealField phi(lattice);
  const double margin = 4.0 * h, r_min = 10.0 * h;
  const double r_max = -domain.signed_distance(domain.center()) - margin;
  if (r_max < r_min) fail(ErrorKind::InvalidArgument, "domain too small for the generator at this lattice spacing");
  for (int b = 0; b < count; ++b) {
    // Radius first, then a centre from the shrunken bounding box by rejection.
    const double R = r_min + (r_max - r_min) * uniform01(rng);
    Vec3 c = domain.center();
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Vec3 t{};
      for (int a = 0; a < 3; ++a) t[a] = bb.lo[a] + R + margin + (bb.hi[a] - bb.lo[a] - 2.0 * (R + margin)) * uniform01(rng);
      if (domain.signed_distance(t) <= -(R + margin)) {
        c = t;
        break;
      }
    }
    const double amp = (uniform01(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + uniform01(rng));
    phi.values() += sample_field(PolynomialBumpPreset{amp, R, c, kGeneratorBumpPower}, lattice).values();
  }
  RealField g = negative_laplacian(phi);
  g.mask() = g.nonzero_mask();
  return g;
}

/// A member plus a gaussian mixture carrying a fraction ε ∈ [10⁻², 1]
/// (log-uniform) of its L1 mass: generically outside 𝒜, with the distance to
/// 𝒜 spread over two decades.
inline RealField generate_generic_field(std::uint64_t seed, const Domain &domain, const Lattice &lattice) {
  RealField g = generate_A_element(seed, domain, lattice);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const Box bb = domain.bounding_box();
  const int count = 1 + static_cast<int>(uniform01(rng) * 3.0);
  RealField mix(lattice);
  for (int b = 0; b < count; ++b) {
    Vec3 c{};
    double room = 0.0;
    for (int attempt = 0; attempt < 1000 && room < 0.4; ++attempt) {
      for (int a = 0; a < 3; ++a) c[a] = bb.lo[a] + (bb.hi[a] - bb.lo[a]) * uniform01(rng);
      room = -domain.signed_distance(c) - 2.0 * lattice.spacing();
    }
    if (room < 0.4) fail(ErrorKind::InvalidArgument, "domain too small for the generic field generator");
    // 5.5σ inside keeps the tail under the 1e-6 support tolerance.
    const double sigma = std::min(0.2, room / 5.5);
    const double amp = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    mix.values() += sample_field(GaussianBumpPreset{amp, sigma, c}, lattice).values();
  }
  const double eps = std::pow(10.0, -2.0 + 2.0 * uniform01(rng));
  const double scale = eps * g.values().cwiseAbs().sum() / mix.values().cwiseAbs().sum();
  g.values() += scale * mix.values();
  g.mask() = g.nonzero_mask();
  return g;
}

/// Average ranks (ties share the mean rank).
inline std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

inline double spearman_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) fail(ErrorKind::InvalidArgument, "Spearman correlation needs two equal samples of size >= 2");
  const auto ra = ranks(a), rb = ranks(b);
  return boost::math::statistics::correlation_coefficient(ra, rb);
}

struct RouteEquivalence {
  std::vector<MembershipReport> members; // from generate_A_element
  std::vector<MembershipReport> generic; // from generate_generic_field
  int agreements = 0;
  int total = 0;
  double spearman = 0.0; // moment vs flux diagnostic on the generic half

  bool all_agree() const { return agreements == total; }
};

/// Runs both membership routes over `count_each` members and generic fields
/// (seeds first_seed.. and first_seed + count_each..).
inline RouteEquivalence route_equivalence(const Domain &domain, const Lattice &lattice, const HarmonicBasis &basis,
                                          int count_each, std::uint64_t first_seed = 0) {
  if (count_each < 2) fail(ErrorKind::InvalidArgument, "route equivalence needs at least two fields per family");
  RouteEquivalence out;
  std::vector<double> d1, d2;
  for (int i = 0; i < count_each; ++i) {
    out.members.push_back(membership_in_A(generate_A_element(first_seed + i, domain, lattice), domain, basis));
    const auto r = membership_in_A(generate_generic_field(first_seed + count_each + i, domain, lattice), domain, basis);
    d1.push_back(r.moment_diagnostic);
    d2.push_back(r.flux_diagnostic);
    out.generic.push_back(r);
  }
  for (const auto *family : {&out.members, &out.generic})
    for (const auto &r : *family) {
      ++out.total;
      if (r.moment_member == r.flux_member) ++out.agreements;
    }
  out.spearman = spearman_correlation(d1, d2);
  return out;
}

/// "l,m,value" rows.
inline void write_moments_csv(const MomentVector &m, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "l,m,value\n";
  for (std::size_t a = 0; a < m.size(); ++a)
    out << HarmonicBasis::l_of(a) << ',' << HarmonicBasis::m_of(a) << ',' << format_double(m.values[a]) << '\n';
}

inline MomentVector read_moments_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open moment file " + path.string());
  std::string line;
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
  }
  if (line != "l,m,value") fail(ErrorKind::Format, "moment file " + path.string() + " has no l,m,value header");
  MomentVector m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int l = 0, mm = 0;
    char c1 = 0, c2 = 0;
    double v = 0.0;
    std::istringstream ss(line);
    if (!(ss >> l >> c1 >> mm >> c2 >> v) || c1 != ',' || c2 != ',') fail(ErrorKind::Format, "bad moment row: " + line);
    if (HarmonicBasis::index(l, mm) != m.values.size()) fail(ErrorKind::Format, "moment rows out of order");
    m.values.push_back(v);
  }
  return m;
}

} // namespace wavemoment
