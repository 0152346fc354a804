#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <boost/math/special_functions/bessel.hpp>

#include "wavemoment/asymptotics.hpp"
#include "wavemoment/field.hpp"
#include "wavemoment/field_io.hpp"
#include "wavemoment/harmonic_moments.hpp"
#include "wavemoment/potential_ops.hpp"
#include "wavemoment/presets.hpp"
#include "wavemoment/spectral_transform.hpp"
#include "wavemoment/wave_forward.hpp"

namespace wavemoment {

// ---------------------------------------------------------------------------
// Spectrum of L

inline constexpr int kMaxSpectrumCount = 40;

struct OperatorSpectrum {
  std::vector<double> eigenvalues; // descending
  std::vector<RealField> eigenfields; // orthonormal in ⟨·,·⟩_{c⁻²}
  std::vector<double> residuals;   // ‖L e_j − λ_j e_j‖_{c⁻²}, re-applied through apply_L
  int krylov_dimension = 0;

  std::size_t size() const { return eigenvalues.size(); }
};

struct SpectrumOptions {
  int block = 6;
  int max_dimension = 480;
  double ritz_tolerance = 1e-10; // relative to λ₁, on the Lanczos residual estimate
  std::uint64_t seed = 7;
};

namespace detail {

/// y ↦ s^{1/2} A⁻¹ s^{1/2} y on the Dirichlet unknowns: symmetric, with the
/// eigenvalues of L.
class SymmetrizedL {
public:
  SymmetrizedL(const DirichletLaplacian &op, const Eigen::VectorXd &s) : sqrt_s_(s.cwiseSqrt()) {
    llt_.compute(op.matrix());
    if (llt_.info() != Eigen::Success) fail(ErrorKind::Convergence, "Cholesky factorization of the Dirichlet Laplacian failed");
  }
  Eigen::MatrixXd apply(const Eigen::MatrixXd &y) const {
    Eigen::MatrixXd rhs = sqrt_s_.asDiagonal() * y;
    Eigen::MatrixXd w = llt_.solve(rhs);
    return sqrt_s_.asDiagonal() * w;
  }

private:
  Eigen::VectorXd sqrt_s_;
  Eigen::SimplicialLLT<DirichletLaplacian::SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
};

} // namespace detail

/// Top m eigenpairs of the discrete L by block Lanczos with full
/// reorthogonalization and Rayleigh–Ritz. The block handles the degenerate
/// levels of symmetric domains, which a single start vector cannot resolve.
inline OperatorSpectrum operator_spectrum(const SpeedModel &c, const Domain &domain, int m, const SpectrumOptions &opt = {}) {
  if (m < 1 || m > kMaxSpectrumCount) fail(ErrorKind::InvalidArgument, "spectrum count must lie in [1, 40]");
  if (opt.block < 1) fail(ErrorKind::InvalidArgument, "Lanczos block size must be positive");
  const Lattice &lat = c.lattice();
  const auto op = dirichlet_operator(lat, domain);
  const RealField s_full = c.inverse_square();
  const Eigen::VectorXd s = op->gather(s_full.values());
  const auto n = static_cast<Eigen::Index>(op->unknowns());
  const int b = static_cast<int>(std::min<Eigen::Index>(opt.block, n));
  const int kmax = static_cast<int>(std::min<Eigen::Index>(opt.max_dimension, n));
  if (m > kmax) fail(ErrorKind::InvalidArgument, "spectrum count exceeds the number of unknowns");
  const detail::SymmetrizedL M(*op, s);

  std::mt19937_64 rng(opt.seed);
  auto random_block = [&](int cols) {
    Eigen::MatrixXd r(n, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < n; ++i) r(i, j) = 2.0 * uniform01(rng) - 1.0;
    return r;
  };

  Eigen::MatrixXd Q(n, kmax + b);
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(kmax + b, kmax + b);
  int K = 0; // columns of Q filled

  // Orthonormalizes X against Q(:, 0:K) and itself, appending the result;
  // columns that collapse are replaced by fresh random directions. Returns the
  // coefficients of X in the new columns.
  auto append_block = [&](Eigen::MatrixXd X, Eigen::MatrixXd *coeffs_prev) -> Eigen::MatrixXd {
    for (int pass = 0; pass < 2; ++pass) {
      if (K == 0) break;
      const Eigen::MatrixXd C = Q.leftCols(K).transpose() * X;
      X -= Q.leftCols(K) * C;
      if (coeffs_prev) coeffs_prev->topRows(K) += C;
    }
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      Eigen::VectorXd v = X.col(j);
      const double original = v.norm();
      for (int pass = 0; pass < 2; ++pass)
        for (int q = 0; q < K + static_cast<int>(j); ++q) {
          const double d = Q.col(q).dot(v);
          v -= d * Q.col(q);
          if (q >= K) R(q - K, j) += d;
        }
      double nv = v.norm();
      if (!(nv > 1e-10 * std::max(original, 1e-300))) {
        // Invariant subspace reached along this direction: restart it.
        v = random_block(1).col(0);
        for (int pass = 0; pass < 2; ++pass)
          for (int q = 0; q < K + static_cast<int>(j); ++q) v -= Q.col(q).dot(v) * Q.col(q);
        nv = v.norm();
        R(j, j) = 0.0;
      } else {
        R(j, j) = nv;
      }
      Q.col(K + j) = v / nv;
    }
    K += static_cast<int>(X.cols());
    return R;
  };

  append_block(random_block(b), nullptr);
  OperatorSpectrum out;
  Eigen::VectorXd theta;
  Eigen::MatrixXd Y;
  int converged = 0;
  int start = 0; // first column of the current block
  while (true) {
    const Eigen::MatrixXd X = M.apply(Q.middleCols(start, b));
    Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(kmax + b, b);
    const int before = K;
    const Eigen::MatrixXd R = append_block(X, &coeffs);
    T.block(0, start, before, b) = coeffs.topRows(before);
    T.block(before, start, b, b) = R;
    const int dim = start + b; // Rayleigh–Ritz on the blocks processed so far
    if (dim >= m + b || K + b > kmax + b) {
      const Eigen::MatrixXd H = 0.5 * (T.topLeftCorner(dim, dim) + T.topLeftCorner(dim, dim).transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
      theta = es.eigenvalues().reverse();
      Y = es.eigenvectors().rowwise().reverse();
      const double scale = std::max(std::abs(theta[0]), 1e-300);
      converged = 0;
      for (int j = 0; j < m && j < dim; ++j) {
        const double res = (R * Y.col(j).segment(start, b)).norm();
        if (res <= opt.ritz_tolerance * scale) ++converged;
        else break;
      }
      if (converged >= m) {
        out.krylov_dimension = dim;
        break;
      }
    }
    start += b;
    if (K + b > kmax) {
      std::ostringstream os;
      os << "Lanczos stopped at dimension " << K << " with " << converged << " of " << m << " eigenpairs converged";
      fail(ErrorKind::Convergence, os.str());
    }
  }

  const double h3 = lat.cell_volume();
  const Eigen::VectorXd inv_sqrt_s = s.cwiseSqrt().cwiseInverse();
  for (int j = 0; j < m; ++j) {
    Eigen::VectorXd y = Q.leftCols(out.krylov_dimension) * Y.col(j);
    y /= y.norm();
    Eigen::Index at = 0;
    y.cwiseAbs().maxCoeff(&at);
    if (y[at] < 0.0) y = -y;
    RealField e(lat, op->scatter(inv_sqrt_s.cwiseProduct(y) / std::sqrt(h3)));
    e.mask() = e.nonzero_mask();
    const double lambda = theta[j];
    const RealField Le = apply_L(e, c, domain);
    const RealField r(lat, Le.values() - lambda * e.values());
    out.residuals.push_back(std::sqrt(std::max(0.0, weighted_inner(r, r, s_full))));
    out.eigenvalues.push_back(lambda);
    out.eigenfields.push_back(std::move(e));
  }
  return out;
}

/// max |⟨e_i, e_j⟩_{c⁻²} − δ_ij|.
inline double orthonormality_defect(const OperatorSpectrum &sp, const SpeedModel &c) {
  const RealField s = c.inverse_square();
  double worst = 0.0;
  for (std::size_t i = 0; i < sp.size(); ++i)
    for (std::size_t j = i; j < sp.size(); ++j)
      worst = std::max(worst, std::abs(weighted_inner(sp.eigenfields[i], sp.eigenfields[j], s) - (i == j ? 1.0 : 0.0)));
  return worst;
}

/// |⟨Lu, v⟩ − ⟨u, Lv⟩| / (‖Lu‖ ‖v‖) in the c⁻²-weighted inner product.
inline double self_adjointness_defect(const RealField &u, const RealField &v, const SpeedModel &c, const Domain &domain) {
  const RealField s = c.inverse_square();
  const RealField Lu = apply_L(u, c, domain), Lv = apply_L(v, c, domain);
  const double a = weighted_inner(Lu, v, s), b = weighted_inner(u, Lv, s);
  const double scale = std::sqrt(weighted_inner(Lu, Lu, s) * weighted_inner(v, v, s));
  return scale > 0.0 ? std::abs(a - b) / scale : std::abs(a - b);
}

struct BallLevel {
  double lambda = 0.0;
  int l = 0;
  int k = 0; // k-th zero of j_l
  int multiplicity = 1;
};

/// Eigenvalue levels of L for a ball of the given radius and constant speed:
/// λ = R²/(c² z²) with z the zeros of the spherical Bessel functions j_l,
/// sorted descending until `count` eigenvalues (with multiplicity) are covered.
inline std::vector<BallLevel> ball_spectrum_levels(double radius, double speed, std::size_t count) {
  if (!(radius > 0.0) || !(speed > 0.0)) fail(ErrorKind::InvalidArgument, "ball spectrum needs positive radius and speed");
  std::vector<BallLevel> levels;
  const int lmax = static_cast<int>(count) + 2;
  for (int l = 0; l <= lmax; ++l)
    for (int k = 1; k <= static_cast<int>(count) + 1; ++k) {
      const double z = boost::math::cyl_bessel_j_zero(l + 0.5, k);
      levels.push_back({radius * radius / (speed * speed * z * z), l, k, 2 * l + 1});
    }
  std::sort(levels.begin(), levels.end(), [](const BallLevel &a, const BallLevel &b) { return a.lambda > b.lambda; });
  std::size_t total = 0, keep = 0;
  while (keep < levels.size() && total < count) total += static_cast<std::size_t>(levels[keep++].multiplicity);
  levels.resize(keep);
  return levels;
}

/// The same levels repeated by multiplicity: entry j is λ_{j+1}.
inline std::vector<double> ball_spectrum(double radius, double speed, std::size_t count) {
  std::vector<double> out;
  for (const auto &lv : ball_spectrum_levels(radius, speed, count))
    for (int i = 0; i < lv.multiplicity && out.size() < count; ++i) out.push_back(lv.lambda);
  return out;
}

/// "j,lambda,residual".
inline void write_spectrum_csv(const OperatorSpectrum &sp, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "j,lambda,residual\n";
  for (std::size_t j = 0; j < sp.size(); ++j)
    out << j + 1 << ',' << format_double(sp.eigenvalues[j]) << ',' << format_double(sp.residuals[j]) << '\n';
}

// ---------------------------------------------------------------------------
// Moment diagnostics of eigenfunctions

inline constexpr double kExclusionFloor = 1e-3;
inline constexpr double kExclusionMinLambda = 1e-6;

struct ExclusionRow {
  int j = 0;
  double lambda = 0.0;
  double moment_norm = 0.0; // ‖moments(e, basis, c⁻²)‖∞ / ‖e‖_{c⁻²}
  int leading_l = 0, leading_m = 0;
  bool applies = false;
  bool holds = true;
};

struct ExclusionTable {
  std::vector<ExclusionRow> rows;
  double floor = kExclusionFloor;
  bool all_hold() const {
    return std::all_of(rows.begin(), rows.end(), [](const ExclusionRow &r) { return r.holds; });
  }
};

inline ExclusionRow exclusion_row(const RealField &g, double lambda, const SpeedModel &c, const HarmonicBasis &basis,
                                  const Domain &domain, double floor = kExclusionFloor) {
  const RealField s = c.inverse_square();
  const MomentVector mv = moments(g, basis, domain, &s);
  const double gn = std::sqrt(std::max(0.0, weighted_inner(g, g, s)));
  ExclusionRow row;
  row.lambda = lambda;
  std::size_t lead = 0;
  for (std::size_t a = 0; a < mv.size(); ++a)
    if (std::abs(mv.values[a]) > std::abs(mv.values[lead])) lead = a;
  row.leading_l = basis.l_of(lead);
  row.leading_m = basis.m_of(lead);
  row.moment_norm = gn > 0.0 ? mv.max_abs() / gn : 0.0;
  row.applies = lambda > kExclusionMinLambda && gn > 0.0;
  row.holds = !row.applies || row.moment_norm >= floor;
  return row;
}

/// No eigenfunction of L has all its c⁻²-weighted harmonic moments zero;
/// numerically every e_j with λ_j > 10⁻⁶ must clear `floor`.
inline ExclusionTable eigen_moment_exclusion(const OperatorSpectrum &sp, const SpeedModel &c, const HarmonicBasis &basis,
                                             const Domain &domain, double floor = kExclusionFloor) {
  ExclusionTable t;
  t.floor = floor;
  for (std::size_t j = 0; j < sp.size(); ++j) {
    auto row = exclusion_row(sp.eigenfields[j], sp.eigenvalues[j], c, basis, domain, floor);
    row.j = static_cast<int>(j + 1);
    t.rows.push_back(row);
  }
  return t;
}

/// g minus its c⁻²-weighted projection onto the harmonic basis restricted to
/// Ω: every weighted moment through the basis degree vanishes.
inline RealField remove_moments(const RealField &g, const SpeedModel &c, const HarmonicBasis &basis, const Domain &domain) {
  const Lattice &lat = g.lattice();
  const RealField s = c.inverse_square();
  std::vector<RealField> phi;
  for (std::size_t a = 0; a < basis.size(); ++a) phi.push_back(restrict_to(basis.sample(a, lat, domain.center()), domain));
  const auto na = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd G(na, na);
  for (Eigen::Index a = 0; a < na; ++a) {
    const MomentVector row = moments(phi[static_cast<std::size_t>(a)], basis, domain, &s);
    for (Eigen::Index b = 0; b < na; ++b) G(a, b) = row.values[static_cast<std::size_t>(b)];
  }
  const MomentVector mg = moments(g, basis, domain, &s);
  const Eigen::VectorXd beta = G.colPivHouseholderQr().solve(Eigen::Map<const Eigen::VectorXd>(mg.values.data(), na));
  RealField out = restrict_to(g, domain);
  for (Eigen::Index a = 0; a < na; ++a) out.values() -= beta[a] * phi[static_cast<std::size_t>(a)].values();
  return out;
}

/// ‖L g − ρ g‖/‖L g‖ with ρ the Rayleigh quotient: 0 exactly for eigenfunctions.
inline double eigen_residual(const RealField &g, const SpeedModel &c, const Domain &domain) {
  const RealField s = c.inverse_square();
  const RealField Lg = apply_L(g, c, domain);
  const double gg = weighted_inner(g, g, s);
  if (gg == 0.0) return 0.0;
  const double rho = weighted_inner(Lg, g, s) / gg;
  const RealField r(g.lattice(), Lg.values() - rho * g.values());
  const double lg = weighted_inner(Lg, Lg, s);
  return lg > 0.0 ? std::sqrt(weighted_inner(r, r, s) / lg) : 0.0;
}

struct MomentRank {
  Eigen::VectorXd singular_values; // of the column-normalized matrix
  int rows = 0, cols = 0, rank = 0;
  double smallest() const { return singular_values.size() ? singular_values[singular_values.size() - 1] : 0.0; }
  bool full_column_rank() const { return rank == cols; }
};

/// Singular values of the column-normalized matrix with entries
/// (λ_j/λ₁)ⁿ m_α(e_j), rows (n, α) for n ≤ depth. depth = 0 is the plain
/// moment matrix [m_α(e_j)]; depth > 0 stacks the moments of Lⁿ e_j, which is
/// what the cascade F_n = Lⁿ F₀ observes.
inline MomentRank moment_matrix_rank(const OperatorSpectrum &sp, const SpeedModel &c, const HarmonicBasis &basis,
                                     const Domain &domain, int depth = 0, std::size_t columns = 0,
                                     double rank_tolerance = 1e-3) {
  if (depth < 0) fail(ErrorKind::InvalidArgument, "moment matrix depth must be non-negative");
  const std::size_t cols = columns == 0 ? sp.size() : std::min(columns, sp.size());
  if (cols == 0) fail(ErrorKind::InvalidArgument, "moment matrix needs at least one eigenfunction");
  const RealField s = c.inverse_square();
  const auto na = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd A(na * (depth + 1), static_cast<Eigen::Index>(cols));
  const double l1 = sp.eigenvalues.front();
  for (std::size_t j = 0; j < cols; ++j) {
    const MomentVector mv = moments(sp.eigenfields[j], basis, domain, &s);
    const double ratio = sp.eigenvalues[j] / l1;
    double w = 1.0;
    for (int nn = 0; nn <= depth; ++nn, w *= ratio)
      for (Eigen::Index a = 0; a < na; ++a)
        A(nn * na + a, static_cast<Eigen::Index>(j)) = w * mv.values[static_cast<std::size_t>(a)];
    const double cn = A.col(static_cast<Eigen::Index>(j)).norm();
    if (cn > 0.0) A.col(static_cast<Eigen::Index>(j)) /= cn;
  }
  MomentRank out;
  out.rows = static_cast<int>(A.rows());
  out.cols = static_cast<int>(A.cols());
  out.singular_values = Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues();
  for (Eigen::Index i = 0; i < out.singular_values.size(); ++i)
    if (out.singular_values[i] > rank_tolerance) ++out.rank;
  return out;
}

// ---------------------------------------------------------------------------
// Scene comparison (equal traces ⇒ equal C* and vanishing moment differences)

enum class Verdict { Pass, Violation, NotEvaluated, Skipped };

inline const char *to_string(Verdict v) {
  switch (v) {
  case Verdict::Pass: return "pass";
  case Verdict::Violation: return "violation";
  case Verdict::NotEvaluated: return "not-evaluated";
  case Verdict::Skipped: return "skipped";
  }
  return "?";
}

struct Scene {
  RealField f;
  SpeedModel c;
};

struct UniquenessConfig {
  WaveRunConfig wave;
  std::vector<double> k = k_grid(KWindow{0.02, 0.2}, 10);
  KWindow window{0.02, 0.2};
  double epsilon = kDefaultEpsilon;
  int basis_degree = 4;
  double trace_tolerance = 1e-3;      // τ: relative L² trace discrepancy
  double cstar_tolerance = 0.05;      // relative |C*₁ − C*₂|
  double moment_tolerance = 1e-6;     // absolute, on ‖moment vector‖∞
  double cstar_zero_threshold = 1e-8; // below: the speed clause is skipped
  double l1_tolerance = 1e-3;         // relative to ∫_Ω c₁
};

struct UniquenessReport {
  TraceComparison trace;
  bool traces_agree = false;
  CstarEstimate cstar1, cstar2;     // from the traces
  double cstar1_truth = 0.0, cstar2_truth = 0.0;
  double cstar_difference = 0.0;    // extracted
  MomentVector speed_moments;       // of c₂⁻² − c₁⁻²
  MomentVector source_moments;      // of f₂/c₂² − f₁/c₁²
  HarmonicBasis basis{0};
  Verdict cstar_verdict = Verdict::NotEvaluated;
  Verdict speed_verdict = Verdict::NotEvaluated;
  Verdict source_verdict = Verdict::NotEvaluated;
  std::vector<std::string> notes;

  bool all_finite() const {
    auto fin = [](const MomentVector &m) {
      return std::all_of(m.values.begin(), m.values.end(), [](double v) { return std::isfinite(v); });
    };
    return std::isfinite(trace.relative_l2) && std::isfinite(cstar1.value) && std::isfinite(cstar2.value) &&
           std::isfinite(cstar1_truth) && std::isfinite(cstar2_truth) && fin(speed_moments) && fin(source_moments);
  }
  bool violated() const {
    return cstar_verdict == Verdict::Violation || speed_verdict == Verdict::Violation ||
           source_verdict == Verdict::Violation;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "trace_relative_l2 " << format_double(trace.relative_l2) << "\n"
       << "trace_sup " << format_double(trace.sup) << "\n"
       << "traces_agree " << (traces_agree ? "yes" : "no") << "\n"
       << "cstar1 " << format_double(cstar1.value) << " spread " << format_double(cstar1.spread) << "\n"
       << "cstar2 " << format_double(cstar2.value) << " spread " << format_double(cstar2.spread) << "\n"
       << "cstar1_truth " << format_double(cstar1_truth) << "\n"
       << "cstar2_truth " << format_double(cstar2_truth) << "\n"
       << "cstar_difference " << format_double(cstar_difference) << "\n"
       << "speed_moment_max " << format_double(speed_moments.max_abs()) << "\n"
       << "source_moment_max " << format_double(source_moments.max_abs()) << "\n"
       << "verdict_cstar " << to_string(cstar_verdict) << "\n"
       << "verdict_speed_moments " << to_string(speed_verdict) << "\n"
       << "verdict_source_moments " << to_string(source_verdict) << "\n";
    for (const auto &n : notes) os << "note " << n << "\n";
    return os.str();
  }
};

namespace detail {

inline void require_same_scene_grid(const Scene &a, const Scene &b) {
  if (!(a.f.lattice() == b.f.lattice()) || !(a.c.lattice() == a.f.lattice()) || !(b.c.lattice() == b.f.lattice()))
    fail(ErrorKind::Dimension, "scenes live on different lattices");
}

inline CstarEstimate cstar_from_trace(const BoundaryTrace &trace, const UniquenessConfig &cfg) {
  const auto spectral = temporal_fourier(trace, cfg.k, cfg.epsilon);
  const auto fits = fit_small_k_all(spectral, cfg.window);
  return extract_Cstar(fits);
}

/// Both scenes must be recorded on one time grid, so an automatic step is
/// fixed by the faster of the two speeds.
inline WaveRunConfig shared_time_step(WaveRunConfig w, const Scene &a, const Scene &b) {
  if (w.dt == 0.0) {
    const double vmax = std::max({1.0, a.c.field().values().maxCoeff(), b.c.field().values().maxCoeff()});
    w.dt = kCflSafety * cfl_limit(a.f.lattice().spacing(), vmax);
  }
  return w;
}

inline double cstar_truth(const Scene &s, const Domain &domain) {
  return volume_integral(multiply(s.f, s.c.inverse_square()), domain);
}

} // namespace detail

/// Compares two scenes from already simulated traces.
inline UniquenessReport verify_theorem1(const Scene &s1, const BoundaryTrace &t1, const Scene &s2, const BoundaryTrace &t2,
                                        const Domain &domain, const UniquenessConfig &cfg) {
  detail::require_same_scene_grid(s1, s2);
  UniquenessReport r;
  r.basis = build_harmonic_basis(cfg.basis_degree);
  r.trace = trace_equal(t2, t1, cfg.trace_tolerance);
  r.traces_agree = r.trace.equal;
  r.cstar1 = detail::cstar_from_trace(t1, cfg);
  r.cstar2 = detail::cstar_from_trace(t2, cfg);
  r.cstar1_truth = detail::cstar_truth(s1, domain);
  r.cstar2_truth = detail::cstar_truth(s2, domain);
  r.cstar_difference = r.cstar2.value - r.cstar1.value;
  const RealField ds(s1.f.lattice(), s2.c.inverse_square().values() - s1.c.inverse_square().values());
  const RealField dq(s1.f.lattice(), multiply(s2.f, s2.c.inverse_square()).values() -
                                         multiply(s1.f, s1.c.inverse_square()).values());
  r.speed_moments = moments(ds, r.basis, domain);
  r.source_moments = moments(dq, r.basis, domain);
  if (!r.traces_agree) {
    r.notes.push_back("traces differ: quantities reported without verdicts");
    return r;
  }
  const double cscale = std::max(std::abs(r.cstar1.value), std::abs(r.cstar2.value));
  r.cstar_verdict = std::abs(r.cstar_difference) <= cfg.cstar_tolerance * cscale ? Verdict::Pass : Verdict::Violation;
  r.source_verdict = r.source_moments.max_abs() <= cfg.moment_tolerance ? Verdict::Pass : Verdict::Violation;
  if (cscale <= cfg.cstar_zero_threshold) {
    r.speed_verdict = Verdict::Skipped;
    r.notes.push_back("|C*| below threshold: speed-moment clause not applicable");
  } else {
    r.speed_verdict = r.speed_moments.max_abs() <= cfg.moment_tolerance ? Verdict::Pass : Verdict::Violation;
  }
  return r;
}

inline UniquenessReport verify_theorem1(const Scene &s1, const Scene &s2, const Domain &domain, const UniquenessConfig &cfg) {
  detail::require_same_scene_grid(s1, s2);
  const WaveRunConfig w = detail::shared_time_step(cfg.wave, s1, s2);
  const auto r1 = simulate_wave(s1.f, s1.c, w, domain);
  const auto r2 = simulate_wave(s2.f, s2.c, w, domain);
  return verify_theorem1(s1, r1.trace, s2, r2.trace, domain, cfg);
}

struct MonotoneReport {
  std::string ordering; // "c1>=c2", "c1<=c2" or "equal"
  TraceComparison trace;
  bool traces_agree = false;
  CstarEstimate cstar;
  double zeroth_moment = 0.0; // ∫_Ω (c₂⁻² − c₁⁻²)
  double l1_difference = 0.0; // ∫_Ω |c₁ − c₂|
  double l1_scale = 0.0;      // ∫_Ω c₁
  Verdict verdict = Verdict::NotEvaluated;
  std::vector<std::string> notes;

  std::string to_text() const {
    std::ostringstream os;
    os << "ordering " << ordering << "\n"
       << "trace_relative_l2 " << format_double(trace.relative_l2) << "\n"
       << "traces_agree " << (traces_agree ? "yes" : "no") << "\n"
       << "cstar " << format_double(cstar.value) << "\n"
       << "zeroth_moment " << format_double(zeroth_moment) << "\n"
       << "l1_difference " << format_double(l1_difference) << "\n"
       << "l1_scale " << format_double(l1_scale) << "\n"
       << "verdict " << to_string(verdict) << "\n";
    for (const auto &n : notes) os << "note " << n << "\n";
    return os.str();
  }
};

/// Ordered speeds: equal traces force the zeroth moment of c₂⁻² − c₁⁻² to
/// vanish, and with a fixed sign that means c₁ ≡ c₂.
inline MonotoneReport monotone_speed_test(const Scene &s1, const BoundaryTrace &t1, const Scene &s2, const BoundaryTrace &t2,
                                          const Domain &domain, const UniquenessConfig &cfg) {
  detail::require_same_scene_grid(s1, s2);
  const auto &c1 = s1.c.field().values(), &c2 = s2.c.field().values();
  const bool ge = (c1.array() >= c2.array()).all(), le = (c1.array() <= c2.array()).all();
  if (!ge && !le) fail(ErrorKind::NotApplicable, "speeds are not ordered: c1 - c2 changes sign on the lattice");
  MonotoneReport r;
  r.ordering = ge && le ? "equal" : (ge ? "c1>=c2" : "c1<=c2");
  r.trace = trace_equal(t2, t1, cfg.trace_tolerance);
  r.traces_agree = r.trace.equal;
  r.cstar = detail::cstar_from_trace(t1, cfg);
  const Lattice &lat = s1.f.lattice();
  const HarmonicBasis b0 = build_harmonic_basis(0);
  r.zeroth_moment =
      moments(RealField(lat, s2.c.inverse_square().values() - s1.c.inverse_square().values()), b0, domain).values[0];
  r.l1_difference = volume_integral(RealField(lat, (c1 - c2).cwiseAbs()), domain);
  r.l1_scale = volume_integral(s1.c.field(), domain);
  if (!r.traces_agree) {
    r.notes.push_back("traces differ: quantities reported without verdicts");
    return r;
  }
  if (std::abs(r.cstar.value) <= cfg.cstar_zero_threshold) {
    r.verdict = Verdict::Skipped;
    r.notes.push_back("|C*| below threshold: the zeroth-moment argument does not apply");
    return r;
  }
  const bool ok = std::abs(r.zeroth_moment) <= cfg.moment_tolerance && r.l1_difference <= cfg.l1_tolerance * r.l1_scale;
  r.verdict = ok ? Verdict::Pass : Verdict::Violation;
  return r;
}

inline MonotoneReport monotone_speed_test(const Scene &s1, const Scene &s2, const Domain &domain, const UniquenessConfig &cfg) {
  detail::require_same_scene_grid(s1, s2);
  const auto &c1 = s1.c.field().values(), &c2 = s2.c.field().values();
  if (!(c1.array() >= c2.array()).all() && !(c1.array() <= c2.array()).all())
    fail(ErrorKind::NotApplicable, "speeds are not ordered: c1 - c2 changes sign on the lattice");
  const WaveRunConfig w = detail::shared_time_step(cfg.wave, s1, s2);
  const auto r1 = simulate_wave(s1.f, s1.c, w, domain);
  const auto r2 = simulate_wave(s2.f, s2.c, w, domain);
  return monotone_speed_test(s1, r1.trace, s2, r2.trace, domain, cfg);
}

// ---------------------------------------------------------------------------
// Source uniqueness for a shared speed

struct Theorem2Config {
  int cascade_depth = 15;
  int basis_degree = 4;
  double moment_tolerance = 1e-10; // on max |M(n, α)|
  double df_tolerance = 1e-10;     // on ‖df‖_{c⁻²}
  double alpha_threshold = 1e-8;   // |α_j| > threshold·‖df‖ counts as present
  double group_tolerance = 1e-6;   // relative eigenvalue spread of a degenerate group
};

struct Theorem2Report {
  HarmonicBasis basis{0};
  Eigen::MatrixXd table; // M(n, α) = ∫ F_n φ_α c⁻², rows n = 0..N
  std::vector<double> alphas; // ⟨df, e_j⟩_{c⁻²}
  double df_norm = 0.0;
  double lambda_star = 0.0;
  std::vector<int> group; // eigen indices (0-based) sharing λ_*
  std::vector<double> dominance_gap; // per n: ‖M(n,·)/λ_*ⁿ − Σ_group α_j m(e_j)‖∞ / ‖·‖∞
  bool moments_small = false;
  bool df_small = false;
  bool implication_holds = true; // moments small ⇒ df small
  Verdict verdict = Verdict::Pass;

  std::string to_text() const {
    std::ostringstream os;
    os << "df_norm " << format_double(df_norm) << "\n"
       << "max_table " << format_double(table.size() ? table.cwiseAbs().maxCoeff() : 0.0) << "\n"
       << "lambda_star " << format_double(lambda_star) << "\n"
       << "group_size " << group.size() << "\n"
       << "moments_small " << (moments_small ? "yes" : "no") << "\n"
       << "df_small " << (df_small ? "yes" : "no") << "\n"
       << "implication_holds " << (implication_holds ? "yes" : "no") << "\n"
       << "verdict " << to_string(verdict) << "\n";
    for (std::size_t n = 0; n < dominance_gap.size(); ++n)
      os << "dominance_gap " << n << " " << format_double(dominance_gap[n]) << "\n";
    return os.str();
  }
};

/// Runs the cascade F_n = Lⁿ(f₂ − f₁), tabulates its weighted moments and
/// compares them with the spectral expansion of df.
inline Theorem2Report verify_theorem2(const SpeedModel &c, const RealField &f1, const RealField &f2,
                                      const OperatorSpectrum &spectrum, const Domain &domain,
                                      const Theorem2Config &cfg = {}) {
  if (spectrum.size() == 0) fail(ErrorKind::InvalidArgument, "verify_theorem2 needs a computed spectrum");
  if (!(f1.lattice() == f2.lattice()) || !(c.lattice() == f1.lattice()))
    fail(ErrorKind::Dimension, "sources and speed live on different lattices");
  if (cfg.cascade_depth < 0) fail(ErrorKind::InvalidArgument, "cascade depth must be non-negative");
  Theorem2Report r;
  r.basis = build_harmonic_basis(cfg.basis_degree);
  const RealField s = c.inverse_square();
  const RealField df(f1.lattice(), f2.values() - f1.values());
  const FnSequence seq = fn_cascade(df, c, cfg.cascade_depth, domain);
  const auto na = static_cast<Eigen::Index>(r.basis.size());
  r.table.resize(cfg.cascade_depth + 1, na);
  for (int n = 0; n <= cfg.cascade_depth; ++n) {
    const MomentVector mv = moments(seq.F[static_cast<std::size_t>(n)], r.basis, domain, &s);
    for (Eigen::Index a = 0; a < na; ++a) r.table(n, a) = mv.values[static_cast<std::size_t>(a)];
  }
  r.df_norm = seq.norms.front();
  r.moments_small = r.table.cwiseAbs().maxCoeff() <= cfg.moment_tolerance;
  r.df_small = r.df_norm <= cfg.df_tolerance;
  r.implication_holds = !r.moments_small || r.df_small;
  r.verdict = r.implication_holds ? Verdict::Pass : Verdict::Violation;

  for (const auto &e : spectrum.eigenfields) r.alphas.push_back(weighted_inner(seq.F.front(), e, s));
  // λ_*: the largest eigenvalue group carrying a nonzero component of df.
  const double cut = cfg.alpha_threshold * r.df_norm;
  for (std::size_t j = 0; j < spectrum.size() && r.group.empty();) {
    std::size_t end = j + 1;
    while (end < spectrum.size() && std::abs(spectrum.eigenvalues[end] - spectrum.eigenvalues[j]) <=
                                        cfg.group_tolerance * std::abs(spectrum.eigenvalues[j]))
      ++end;
    double joint = 0.0;
    for (std::size_t q = j; q < end; ++q) joint += r.alphas[q] * r.alphas[q];
    if (r.df_norm > 0.0 && std::sqrt(joint) > cut) {
      r.lambda_star = spectrum.eigenvalues[j];
      for (std::size_t q = j; q < end; ++q) r.group.push_back(static_cast<int>(q));
    }
    j = end;
  }
  if (r.group.empty()) return r;
  Eigen::VectorXd predicted = Eigen::VectorXd::Zero(na);
  for (int q : r.group) {
    const MomentVector mv = moments(spectrum.eigenfields[static_cast<std::size_t>(q)], r.basis, domain, &s);
    predicted += r.alphas[static_cast<std::size_t>(q)] * Eigen::Map<const Eigen::VectorXd>(mv.values.data(), na);
  }
  const double pn = predicted.cwiseAbs().maxCoeff();
  double scale = 1.0;
  for (int n = 0; n <= cfg.cascade_depth; ++n, scale *= r.lambda_star) {
    const Eigen::VectorXd row = r.table.row(n).transpose() / scale;
    r.dominance_gap.push_back(pn > 0.0 ? (row - predicted).cwiseAbs().maxCoeff() / pn : 0.0);
  }
  return r;
}

/// "n,l,m,value".
inline void write_theorem2_table_csv(const Theorem2Report &r, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "n,l,m,value\n";
  for (Eigen::Index n = 0; n < r.table.rows(); ++n)
    for (Eigen::Index a = 0; a < r.table.cols(); ++a)
      out << n << ',' << r.basis.l_of(static_cast<std::size_t>(a)) << ',' << r.basis.m_of(static_cast<std::size_t>(a))
          << ',' << format_double(r.table(n, a)) << '\n';
}

// ---------------------------------------------------------------------------
// Linear source reconstruction

/// Polynomial bumps (power 4) on a per_axis³ grid of centres spanning
/// [−extent, extent]³ around the domain centre; centres whose bump would leave
/// Ω by less than two cells are dropped.
inline std::vector<RealField> smooth_bump_basis(const Lattice &lat, const Domain &domain, int per_axis, double extent,
                                                double radius) {
  if (per_axis < 1) fail(ErrorKind::InvalidArgument, "basis needs at least one centre per axis");
  if (!(radius > 0.0) || !(extent >= 0.0)) fail(ErrorKind::InvalidArgument, "basis radius must be positive");
  std::vector<RealField> out;
  const Vec3 o = domain.center();
  for (int i = 0; i < per_axis; ++i)
    for (int j = 0; j < per_axis; ++j)
      for (int k = 0; k < per_axis; ++k) {
        auto t = [&](int q) { return per_axis == 1 ? 0.0 : -extent + 2.0 * extent * q / (per_axis - 1); };
        const Vec3 c = o + Vec3{t(i), t(j), t(k)};
        if (domain.signed_distance(c) > -(radius + 2.0 * lat.spacing())) continue;
        out.push_back(sample_field(PolynomialBumpPreset{1.0, radius, c, 4}, lat));
      }
  if (out.empty()) fail(ErrorKind::InvalidArgument, "no basis bump fits inside the domain");
  return out;
}

struct ReconstructionConfig {
  WaveRunConfig wave;
  double singular_floor = 1e-12; // relative; smaller singular values are dropped
  int threads = 0;               // 0: hardware concurrency
  std::optional<RealField> truth;
  std::filesystem::path cache_dir; // empty: $WAVEMOMENT_CACHE, unset means no cache
};

struct ForwardMatrix {
  Eigen::MatrixXd G; // column j = vec(trace of basis field j), column-major (time, sensor)
  std::vector<double> times;
  std::vector<Vec3> sensors;
  int cache_hits = 0;
};

struct Reconstruction {
  RealField f_hat;
  Eigen::VectorXd coefficients;
  double misfit = 0.0; // ‖G a − d‖ / ‖d‖
  std::optional<double> field_error;
  double sigma_max = 0.0, sigma_min = 0.0;
  double rho = 0.0; // ridge · σ_max²
  int dropped = 0;  // singular values below the floor
  std::vector<std::string> warnings;
};

namespace detail {

inline void fnv1a(std::uint64_t &h, const void *data, std::size_t bytes) {
  const auto *p = static_cast<const unsigned char *>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

inline std::string forward_cache_key(const RealField &basis, const SpeedModel &c, const WaveRunConfig &w, const Domain &domain) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv1a(h, basis.values().data(), sizeof(double) * static_cast<std::size_t>(basis.values().size()));
  fnv1a(h, c.field().values().data(), sizeof(double) * static_cast<std::size_t>(c.field().values().size()));
  const double reals[] = {w.t_final, w.dt, w.pml_thickness, w.pml_strength, w.pml_buffer,
                          basis.lattice().spacing(), basis.lattice().origin()[0], basis.lattice().origin()[1],
                          basis.lattice().origin()[2]};
  const int ints[] = {w.pml_width, w.order, w.absorbing ? 1 : 0, w.record_stride, static_cast<int>(basis.lattice().size())};
  fnv1a(h, reals, sizeof(reals));
  fnv1a(h, ints, sizeof(ints));
  for (const auto &p : domain.boundary().points) fnv1a(h, p.data(), sizeof(double) * 3);
  std::ostringstream os;
  os << "fwd_" << std::hex << h << ".csv";
  return os.str();
}

inline std::filesystem::path resolve_cache_dir(const ReconstructionConfig &cfg) {
  if (!cfg.cache_dir.empty()) return cfg.cache_dir;
  if (const char *env = std::getenv("WAVEMOMENT_CACHE"); env && *env) return env;
  return {};
}

} // namespace detail

/// One wave simulation per basis field (or a cache hit), run on worker threads.
inline ForwardMatrix assemble_forward_matrix(const SpeedModel &c, const std::vector<RealField> &basis, const Domain &domain,
                                             const ReconstructionConfig &cfg) {
  if (basis.empty()) fail(ErrorKind::InvalidArgument, "source basis is empty");
  for (const auto &b : basis) {
    if (!(b.lattice() == c.lattice())) fail(ErrorKind::Dimension, "basis field and speed live on different lattices");
    require_support_in(b, domain, "source basis field");
  }
  const auto cache = detail::resolve_cache_dir(cfg);
  if (!cache.empty()) std::filesystem::create_directories(cache);
  std::vector<BoundaryTrace> traces(basis.size());
  std::vector<int> hit(basis.size(), 0);
  std::vector<std::exception_ptr> errors(basis.size());
  auto work = [&](std::size_t j) {
    try {
      std::filesystem::path file;
      if (!cache.empty()) {
        file = cache / detail::forward_cache_key(basis[j], c, cfg.wave, domain);
        if (std::filesystem::exists(file)) {
          traces[j] = read_trace_csv(file);
          hit[j] = 1;
          return;
        }
      }
      traces[j] = simulate_wave(basis[j], c, cfg.wave, domain).trace;
      if (!file.empty()) {
        // Write then rename so concurrent readers never see a partial file.
        const auto tmp = file.string() + ".tmp" + std::to_string(j);
        write_trace_csv(traces[j], tmp);
        std::filesystem::rename(tmp, file);
      }
    } catch (...) {
      errors[j] = std::current_exception();
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t nthreads = std::min<std::size_t>(basis.size(), cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : hw);
  if (nthreads <= 1) {
    for (std::size_t j = 0; j < basis.size(); ++j) work(j);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t j = t; j < basis.size(); j += nthreads) work(j);
      });
    for (auto &th : pool) th.join();
  }
  for (const auto &e : errors)
    if (e) std::rethrow_exception(e);

  ForwardMatrix out;
  out.times = traces.front().times;
  out.sensors = traces.front().sensors;
  const Eigen::Index rows = traces.front().values.size();
  out.G.resize(rows, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) {
    if (traces[j].values.size() != rows) fail(ErrorKind::Dimension, "basis traces have different shapes");
    out.G.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(traces[j].values.data(), rows);
    out.cache_hits += hit[j];
  }
  return out;
}

/// Ridge least squares over the span of the basis: minimizes
/// ‖G a − d‖² + ρ‖a‖² with ρ = ridge · σ_max(G)².
inline Reconstruction solve_reconstruction(const ForwardMatrix &fm, const BoundaryTrace &trace,
                                           const std::vector<RealField> &basis, double ridge, const ReconstructionConfig &cfg) {
  if (!(ridge >= 0.0)) fail(ErrorKind::InvalidArgument, "ridge weight must be non-negative");
  if (trace.sensors.size() != fm.sensors.size() || trace.times.size() != fm.times.size() ||
      trace.values.size() != fm.G.rows())
    fail(ErrorKind::Dimension, "trace does not match the forward operator's sensor/time grid");
  for (std::size_t j = 0; j < fm.times.size(); ++j)
    if (std::abs(trace.times[j] - fm.times[j]) > 1e-9 * (1.0 + std::abs(fm.times[j])))
      fail(ErrorKind::Dimension, "trace time grid differs from the forward operator's");
  const Eigen::Map<const Eigen::VectorXd> d(trace.values.data(), trace.values.size());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(fm.G, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd &sv = svd.singularValues();
  Reconstruction r;
  r.sigma_max = sv[0];
  r.sigma_min = sv[sv.size() - 1];
  r.rho = ridge * r.sigma_max * r.sigma_max;
  const Eigen::VectorXd ud = svd.matrixU().transpose() * d;
  Eigen::VectorXd filt = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] <= cfg.singular_floor * r.sigma_max) {
      ++r.dropped;
      continue;
    }
    filt[i] = sv[i] / (sv[i] * sv[i] + r.rho) * ud[i];
  }
  if (r.dropped > 0) {
    std::ostringstream os;
    os << "forward operator is ill-conditioned: " << r.dropped << " singular values below the floor "
       << format_double(cfg.singular_floor) << " * sigma_max were dropped";
    r.warnings.push_back(os.str());
  }
  r.coefficients = svd.matrixV() * filt;
  const double dn = d.norm();
  r.misfit = dn > 0.0 ? (fm.G * r.coefficients - d).norm() / dn : (fm.G * r.coefficients).norm();
  RealField::Vector acc = RealField::Vector::Zero(basis.front().values().size());
  for (std::size_t j = 0; j < basis.size(); ++j) acc += r.coefficients[static_cast<Eigen::Index>(j)] * basis[j].values();
  r.f_hat = RealField(basis.front().lattice(), std::move(acc));
  r.f_hat.mask() = r.f_hat.nonzero_mask();
  if (cfg.truth) {
    const double tn = cfg.truth->values().norm();
    const double e = (r.f_hat.values() - cfg.truth->values()).norm();
    r.field_error = tn > 0.0 ? e / tn : e;
  }
  return r;
}

inline Reconstruction reconstruct_source(const BoundaryTrace &trace, const SpeedModel &c, const std::vector<RealField> &basis,
                                         double ridge, const Domain &domain, const ReconstructionConfig &cfg = {}) {
  const ForwardMatrix fm = assemble_forward_matrix(c, basis, domain, cfg);
  return solve_reconstruction(fm, trace, basis, ridge, cfg);
}

/// "j,coefficient".
inline void write_coefficients_csv(const Eigen::VectorXd &a, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << "j,coefficient\n";
  for (Eigen::Index j = 0; j < a.size(); ++j) out << j << ',' << format_double(a[j]) << '\n';
}

} // namespace wavemoment
