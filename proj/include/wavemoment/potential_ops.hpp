#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "wavemoment/convolution.hpp"
#include "wavemoment/field.hpp"

namespace wavemoment {

enum class PotentialKind { FreeSpace, Dirichlet };

/// A potential w together with the source g that produced it.
struct PotentialField {
  RealField w;
  RealField source;
  PotentialKind kind = PotentialKind::FreeSpace;
};

/// Relative residual for every Dirichlet solve.
inline constexpr double kPoissonTolerance = 1e-10;

// ---------------------------------------------------------------------------
// Free-space potential w = Φ₀ * g

inline RealField newtonian_potential_values(const RealField &g) {
  const auto engine = shared_engine(g.lattice());
  const ComplexField::Vector w = engine->convolve(ComplexField::Vector(g.values().cast<Complex>()), KernelSpec::newtonian());
  return RealField(g.lattice(), w.real());
}

inline PotentialField newtonian_potential(const RealField &g, const Domain &domain) {
  require_support_in(g, domain, "source g");
  return {newtonian_potential_values(g), g, PotentialKind::FreeSpace};
}

/// Direct O(N |supp g|) summation, the bit-reproducible reference path.
inline RealField newtonian_potential_direct(const RealField &g) {
  const ComplexField::Vector w =
      convolve_direct(g.lattice(), ComplexField::Vector(g.values().cast<Complex>()), KernelSpec::newtonian());
  return RealField(g.lattice(), w.real());
}

inline std::vector<double> newtonian_potential_at(const RealField &g, std::span<const Vec3> points) {
  const auto w = convolve_at(g.lattice(), ComplexField::Vector(g.values().cast<Complex>()), KernelSpec::newtonian(), points);
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i].real();
  return out;
}

/// 7-point -Δ_h applied at interior lattice points (zero on the outer layer).
inline RealField negative_laplacian(const RealField &f) {
  const Lattice &lat = f.lattice();
  const double inv_h2 = 1.0 / (lat.spacing() * lat.spacing());
  RealField::Vector out = RealField::Vector::Zero(f.values().size());
  for (int k = 1; k < lat.nz() - 1; ++k)
    for (int j = 1; j < lat.ny() - 1; ++j)
      for (int i = 1; i < lat.nx() - 1; ++i) {
        const double c = f.at(i, j, k);
        const double sum = f.at(i - 1, j, k) + f.at(i + 1, j, k) + f.at(i, j - 1, k) + f.at(i, j + 1, k) +
                           f.at(i, j, k - 1) + f.at(i, j, k + 1);
        out[static_cast<Eigen::Index>(lat.index(i, j, k))] = (6.0 * c - sum) * inv_h2;
      }
  return RealField(lat, std::move(out));
}

// ---------------------------------------------------------------------------
// Dirichlet problem -Δw = g in Ω, w = 0 on ∂Ω

/// Symmetric embedded-boundary discretisation of -Δ on the lattice points
/// inside Ω. A neighbour outside Ω is replaced by the linear extrapolation
/// through the boundary zero, which puts 1/θ on the diagonal (θ = fractional
/// distance to ∂Ω along that axis). The off-diagonal pattern is that of the
/// plain 7-point stencil, so the matrix stays symmetric positive definite.
class DirichletLaplacian {
public:
  using SparseMatrix = Eigen::SparseMatrix<double>;

  DirichletLaplacian(const Lattice &lattice, const Domain &domain) : lattice_(lattice) {
    domain.validate_in(lattice, 1.0);
    unknown_of_.assign(lattice.size(), -1);
    for (std::size_t i = 0; i < lattice.size(); ++i)
      if (domain.contains(lattice.point(i))) {
        unknown_of_[i] = static_cast<int>(points_.size());
        points_.push_back(i);
      }
    if (points_.empty()) fail(ErrorKind::InvalidArgument, "no lattice points inside the domain");

    const double h = lattice.spacing();
    const double inv_h2 = 1.0 / (h * h);
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(points_.size() * 7);
    for (std::size_t row = 0; row < points_.size(); ++row) {
      const auto c = lattice.coords(points_[row]);
      const Vec3 x = lattice.point(points_[row]);
      double diag = 0.0;
      for (int axis = 0; axis < 3; ++axis)
        for (int dir : {-1, 1}) {
          auto n = c;
          n[axis] += dir;
          const int col = unknown_of_[lattice.index(n[0], n[1], n[2])];
          if (col >= 0) {
            diag += 1.0;
            entries.emplace_back(static_cast<int>(row), col, -inv_h2);
          } else {
            const double theta = std::clamp(domain.axis_distance(x, axis, dir) / h, kMinTheta, 1.0);
            diag += 1.0 / theta;
          }
        }
      entries.emplace_back(static_cast<int>(row), static_cast<int>(row), diag * inv_h2);
    }
    matrix_.resize(static_cast<Eigen::Index>(points_.size()), static_cast<Eigen::Index>(points_.size()));
    matrix_.setFromTriplets(entries.begin(), entries.end());
    matrix_.makeCompressed();
  }

  const SparseMatrix &matrix() const { return matrix_; }
  const Lattice &lattice() const { return lattice_; }
  std::size_t unknowns() const { return points_.size(); }
  const std::vector<std::size_t> &points() const { return points_; }

  Eigen::VectorXd gather(const RealField::Vector &full) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(points_.size()));
    for (std::size_t r = 0; r < points_.size(); ++r)
      v[static_cast<Eigen::Index>(r)] = full[static_cast<Eigen::Index>(points_[r])];
    return v;
  }

  RealField::Vector scatter(const Eigen::VectorXd &v) const {
    RealField::Vector full = RealField::Vector::Zero(static_cast<Eigen::Index>(lattice_.size()));
    for (std::size_t r = 0; r < points_.size(); ++r)
      full[static_cast<Eigen::Index>(points_[r])] = v[static_cast<Eigen::Index>(r)];
    return full;
  }

  /// Solves A w = b on the unknowns by Jacobi-preconditioned CG.
  Eigen::VectorXd solve(const Eigen::VectorXd &b) const {
    if (b.squaredNorm() == 0.0) return Eigen::VectorXd::Zero(b.size());
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
    cg.setTolerance(kPoissonTolerance);
    cg.setMaxIterations(20000);
    cg.compute(matrix_);
    Eigen::VectorXd x = cg.solve(b);
    if (cg.info() != Eigen::Success) {
      std::ostringstream os;
      os << "Poisson CG did not converge after " << cg.iterations() << " iterations (relative residual " << cg.error()
         << ")";
      fail(ErrorKind::Convergence, os.str());
    }
    return x;
  }

private:
  static constexpr double kMinTheta = 0.01;

  Lattice lattice_;
  std::vector<int> unknown_of_;
  std::vector<std::size_t> points_;
  SparseMatrix matrix_;
};

/// Memoized operator per (lattice, Ω).
inline std::shared_ptr<const DirichletLaplacian> dirichlet_operator(const Lattice &lattice, const Domain &domain) {
  static std::mutex mutex;
  static std::map<Domain::CacheKey, std::shared_ptr<const DirichletLaplacian>> cache;
  const auto key = domain.cache_key(lattice);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto op = std::make_shared<const DirichletLaplacian>(lattice, domain);
  std::lock_guard lock(mutex);
  if (cache.size() >= 8) cache.clear();
  cache.emplace(key, op);
  return op;
}

/// Δ⁻¹g: the solution of -Δw = g in Ω, w = 0 outside. Values of g outside Ω
/// are ignored.
inline PotentialField dirichlet_inverse(const RealField &g, const Domain &domain) {
  const auto op = dirichlet_operator(g.lattice(), domain);
  RealField w(g.lattice(), op->scatter(op->solve(op->gather(g.values()))));
  return {std::move(w), g, PotentialKind::Dirichlet};
}

/// L g = Δ⁻¹(c⁻² g).
inline RealField apply_L(const RealField &g, const SpeedModel &c, const Domain &domain) {
  if (!g.all_finite()) fail(ErrorKind::InvalidArgument, "apply_L needs a finite field");
  return dirichlet_inverse(multiply(c.inverse_square(), g), domain).w;
}

inline RealField apply_L_power(RealField g, const SpeedModel &c, const Domain &domain, int n) {
  if (n < 0) fail(ErrorKind::InvalidArgument, "L power must be non-negative");
  for (int i = 0; i < n; ++i) g = apply_L(g, c, domain);
  return g;
}

/// ⟨u, v⟩ weighted by `weight` (pass c⁻² for the natural inner product of L).
inline double weighted_inner(const RealField &u, const RealField &v, const RealField &weight) {
  return (u.values().array() * v.values().array() * weight.values().array()).sum() * u.lattice().cell_volume();
}

inline double inner(const RealField &u, const RealField &v) { return u.values().dot(v.values()) * u.lattice().cell_volume(); }

// ---------------------------------------------------------------------------
// Boundary data

/// ∂w/∂ν at each boundary sample by a one-sided second-order difference along
/// -ν with sample depths 2h and 4h. Dirichlet potentials use w = 0 on ∂Ω;
/// other potentials interpolate w at the boundary point.
inline std::vector<double> normal_derivative(const RealField &w, const Domain &domain, bool zero_on_boundary) {
  const Lattice &lat = w.lattice();
  const double delta = 2.0 * lat.spacing();
  const auto &bs = domain.boundary();
  std::vector<double> out(bs.size());
  for (std::size_t s = 0; s < bs.size(); ++s) {
    const Vec3 &xb = bs.points[s];
    const Vec3 &nu = bs.normals[s];
    if (lat.distance_to_edge(xb) < lat.spacing())
      fail(ErrorKind::InvalidArgument, "boundary sample too close to the lattice edge for a normal derivative");
    const double w0 = zero_on_boundary ? 0.0 : interpolate(w, xb);
    const double w1 = interpolate(w, xb - delta * nu);
    const double w2 = interpolate(w, xb - (2.0 * delta) * nu);
    out[s] = -(-3.0 * w0 + 4.0 * w1 - w2) / (2.0 * delta);
  }
  return out;
}

inline std::vector<double> normal_derivative(const PotentialField &p, const Domain &domain) {
  return normal_derivative(p.w, domain, p.kind == PotentialKind::Dirichlet);
}

/// sup |∂ν Δ⁻¹g| · |∂Ω| / ‖g‖_{L¹}: dimensionless boundary flux of the
/// Dirichlet potential. Vanishes exactly for members of 𝒜.
inline double boundary_flux_ratio(const RealField &g, const Domain &domain) {
  const double l1 = g.values().cwiseAbs().sum() * g.lattice().cell_volume();
  if (l1 == 0.0) return 0.0;
  const auto dn = normal_derivative(dirichlet_inverse(g, domain), domain);
  double sup = 0.0;
  for (double v : dn) sup = std::max(sup, std::abs(v));
  return sup * domain.surface_area() / l1;
}

/// Flux ratio below which a field counts as a discrete member of 𝒜 (well above
/// the O(h²) truncation floor of generated members, well below generic fields).
inline constexpr double kFluxMembershipTolerance = 1e-2;

// ---------------------------------------------------------------------------
// Integration by parts against |x - y|^n

struct IbypResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double relative_gap() const { return lhs == 0.0 ? std::abs(rhs) : std::abs(lhs - rhs) / std::abs(lhs); }
};

/// lhs = ∫ g(y)|x-y|^n dy and rhs = -n(n+1) ∫ Δ⁻¹g(y)|x-y|^{n-2} dy for odd n.
/// Equal for g in 𝒜; other g are rejected.
inline IbypResult ibyp_identity(const RealField &g, const Domain &domain, int n, const Vec3 &x,
                                double flux_tolerance = kFluxMembershipTolerance) {
  if (n < 1 || n % 2 == 0) fail(ErrorKind::InvalidArgument, "ibyp_identity needs an odd n >= 1");
  if (g.peak() == 0.0) return {};
  const PotentialField w = dirichlet_inverse(g, domain);
  {
    const double l1 = g.values().cwiseAbs().sum() * g.lattice().cell_volume();
    double sup = 0.0;
    for (double v : normal_derivative(w, domain)) sup = std::max(sup, std::abs(v));
    const double ratio = sup * domain.surface_area() / l1;
    if (ratio > flux_tolerance) {
      std::ostringstream os;
      os << "source is not in A (boundary flux ratio " << ratio << " > " << flux_tolerance
         << "); the integration-by-parts identity does not apply";
      fail(ErrorKind::Membership, os.str());
    }
  }
  const Lattice &lat = g.lattice();
  const double h = lat.spacing();
  IbypResult out;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const double r = norm(x - lat.point(i));
    const double rr = r < 1e-12 * h ? 0.0 : r;
    if (g[i] != 0.0) out.lhs += g[i] * kernel_value(KernelSpec::distance_power(n), rr, h).real();
    if (w.w[i] != 0.0) out.rhs += w.w[i] * kernel_value(KernelSpec::distance_power(n - 2), rr, h).real();
  }
  out.lhs *= lat.cell_volume();
  out.rhs *= -static_cast<double>(n) * (n + 1) * lat.cell_volume();
  return out;
}

} // namespace wavemoment
