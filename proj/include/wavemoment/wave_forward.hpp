#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wavemoment/field_core.hpp"

namespace wavemoment {

inline constexpr double kCflSafety = 0.9;

struct WaveRunConfig {
  double t_final = 6.0;
  double dt = 0.0;          // 0 picks kCflSafety * h / (√3 max c)
  int pml_width = 0;        // sponge cells; 0 derives it from pml_thickness
  double pml_thickness = 1.2;
  double pml_strength = 20.0;
  double pml_buffer = -1.0; // undamped padding between lattice and sponge (length units); < 0: automatic
  int order = 4;            // 2: 7-point leapfrog; 4: 13-point + modified equation
  bool absorbing = true;    // false: reflecting box (u = 0 on the outer layer)
  bool record_movie = false;
  int record_stride = 4;
  bool track_energy = false;

  int sponge_cells(double h) const {
    if (pml_width > 0) return pml_width;
    return std::max(8, static_cast<int>(std::lround(pml_thickness / h)));
  }
  int buffer_cells(double h) const { return pml_buffer > 0.0 ? static_cast<int>(std::ceil(pml_buffer / h)) : 0; }
};

// The sponge reflects part of every wave, and its low-frequency reflections
// bias the small-k content of the traces. Placing it far enough out that
// nothing can come back before t_final keeps the recorded window clean.
inline constexpr double kMaxAutoBuffer = 4.0;

inline double cfl_limit(double h, double max_speed) { return h / (std::sqrt(3.0) * max_speed); }

/// u(x_b, t_j) at boundary sensors; values(j, b).
struct BoundaryTrace {
  std::vector<Vec3> sensors;
  std::vector<double> times;
  Eigen::MatrixXd values;

  double dt_record() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
  double peak() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }

  /// max |u| over t in [0.9 T, T] relative to the peak.
  double tail_ratio() const {
    if (times.empty() || peak() == 0.0) return 0.0;
    const double cut = 0.9 * times.back();
    double tail = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j)
      if (times[j] >= cut) tail = std::max(tail, values.row(static_cast<Eigen::Index>(j)).cwiseAbs().maxCoeff());
    return tail / peak();
  }
};

struct WaveRunResult {
  BoundaryTrace trace;
  std::vector<RealField> movie;  // on the caller's lattice, every record_stride steps
  std::vector<double> movie_times;
  std::vector<double> energy;    // per step when tracked
  double dt = 0.0;
  int steps = 0;
  double final_interior_ratio = 0.0; // max|u(T)| / max|f| on the caller's lattice
  double reflection_free_until = 0.0; // earliest time edge reflections can reach Ω
};

/// Three-level leapfrog for u_tt + σ u_t = c² Δu on a lattice padded by the
/// sponge. order 2 is the 7-point scheme; order 4 (default) uses the 13-point
/// Laplacian plus the modified-equation correction (dt²/12)(c²Δ)², giving
/// fourth order in space and time at the same step size.
class WaveStepper {
public:
  WaveStepper(const RealField &f, const SpeedModel &c, const WaveRunConfig &cfg)
      : base_(f.lattice()), order_(cfg.order), ghost_(cfg.order == 4 ? 2 : 1),
        sponge_(cfg.absorbing ? cfg.sponge_cells(base_.spacing()) : 0),
        pad_(cfg.absorbing ? std::max(sponge_ + cfg.buffer_cells(base_.spacing()), ghost_) : ghost_), grid_(base_.padded(pad_)) {
    if (!(c.lattice() == base_)) fail(ErrorKind::Dimension, "source and speed live on different lattices");
    if (order_ != 2 && order_ != 4) fail(ErrorKind::InvalidArgument, "scheme order must be 2 or 4");
    if (cfg.absorbing && cfg.sponge_cells(base_.spacing()) < 8)
      fail(ErrorKind::InvalidArgument, "the sponge must be at least 8 cells wide");
    if (!(cfg.t_final > 0.0)) fail(ErrorKind::InvalidArgument, "t_final must be positive");
    const double h = base_.spacing();
    const double limit = kCflSafety * cfl_limit(h, c.max_speed());
    dt_ = cfg.dt > 0.0 ? cfg.dt : limit;
    if (dt_ > limit * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "time step " << dt_ << " violates the CFL bound " << limit << " (0.9 h / (sqrt(3) max c))";
      fail(ErrorKind::Cfl, os.str());
    }
    const std::size_t n = grid_.size();
    c2_.assign(n, 1.0);
    damp_plus_.assign(n, 1.0);
    damp_minus_.assign(n, 1.0);
    u_prev_.assign(n, 0.0);
    u_.assign(n, 0.0);
    u_next_.assign(n, 0.0);
    scratch_.assign(n, 0.0);
    for (int k = 0; k < base_.nz(); ++k)
      for (int j = 0; j < base_.ny(); ++j)
        for (int i = 0; i < base_.nx(); ++i) {
          const std::size_t src = base_.index(i, j, k);
          const std::size_t dst = grid_.index(i + pad_, j + pad_, k + pad_);
          c2_[dst] = c.field()[src] * c.field()[src];
          u_[dst] = f[src];
        }
    if (cfg.absorbing) {
      const int w = sponge_;
      for (int k = 0; k < grid_.nz(); ++k)
        for (int j = 0; j < grid_.ny(); ++j)
          for (int i = 0; i < grid_.nx(); ++i) {
            double sigma = 0.0;
            const std::array<int, 3> idx{i, j, k};
            for (int a = 0; a < 3; ++a) {
              const int depth = std::max(w - idx[a], idx[a] - (grid_.dims()[a] - 1 - w));
              if (depth > 0) sigma += cfg.pml_strength * std::pow(static_cast<double>(depth) / w, 4);
            }
            const std::size_t id = grid_.index(i, j, k);
            damp_plus_[id] = 1.0 + 0.5 * sigma * dt_;
            damp_minus_[id] = 1.0 - 0.5 * sigma * dt_;
          }
    }
    // Taylor start for u_t(0) = 0: u¹ = u⁰ - (dt²/2) A u⁰.
    apply_A(u_, u_next_);
    u_prev_ = u_;
    for_unknowns([&](std::size_t id) { u_next_[id] = u_[id] - 0.5 * dt_ * dt_ * u_next_[id]; });
    std::swap(u_, u_next_);
    time_ = dt_;
    steps_ = 1;
  }

  double dt() const { return dt_; }
  double time() const { return time_; }
  int steps() const { return steps_; }
  const Lattice &grid() const { return grid_; }
  int padding() const { return pad_; }

  void step() {
    apply_A(u_, u_next_);
    const double dt2 = dt_ * dt_;
    for_unknowns([&](std::size_t id) {
      u_next_[id] = (2.0 * u_[id] - damp_minus_[id] * u_prev_[id] - dt2 * u_next_[id]) / damp_plus_[id];
    });
    std::swap(u_prev_, u_);
    std::swap(u_, u_next_);
    time_ += dt_;
    ++steps_;
  }

  /// Swaps the two time levels so subsequent steps run backwards in time.
  void reverse() {
    std::swap(u_prev_, u_);
    dt_ = -dt_;
  }

  /// Discrete energy between the last two levels, exactly conserved by the
  /// undamped scheme: ‖(uⁿ⁺¹ - uⁿ)/dt‖²_{c⁻²} + ⟨uⁿ⁺¹, A uⁿ⟩_{c⁻²}.
  double energy() const {
    std::vector<double> au(grid_.size(), 0.0);
    apply_A(u_prev_, au);
    double kinetic = 0.0, potential = 0.0;
    for_unknowns([&](std::size_t id) {
      const double v = (u_[id] - u_prev_[id]) / dt_;
      kinetic += v * v / c2_[id];
      potential += u_[id] * au[id] / c2_[id];
    });
    return (kinetic + potential) * grid_.cell_volume();
  }

  /// Current field restricted to the caller's lattice.
  RealField current() const {
    RealField::Vector v(static_cast<Eigen::Index>(base_.size()));
    for (int k = 0; k < base_.nz(); ++k)
      for (int j = 0; j < base_.ny(); ++j)
        for (int i = 0; i < base_.nx(); ++i)
          v[static_cast<Eigen::Index>(base_.index(i, j, k))] = u_[grid_.index(i + pad_, j + pad_, k + pad_)];
    return RealField(base_, std::move(v));
  }

  double sample(const Vec3 &x) const { return sample_tricubic(grid_, u_.data(), x); }

  bool finite() const {
    for (double v : u_)
      if (!std::isfinite(v)) return false;
    return true;
  }

private:
  // Visits points at least `layer` cells from the padded edge.
  template <class Fn> void for_layers(int layer, Fn &&fn) const {
    for (int k = layer; k < grid_.nz() - layer; ++k)
      for (int j = layer; j < grid_.ny() - layer; ++j) {
        const std::size_t row = grid_.index(0, j, k);
        for (int i = layer; i < grid_.nx() - layer; ++i) fn(row + static_cast<std::size_t>(i));
      }
  }
  template <class Fn> void for_unknowns(Fn &&fn) const { for_layers(ghost_, fn); }

  // out = A u = -c² Δ₂ u (order 2) or -c² [Δ₄ u + (dt²/12) Δ₂(c² Δ₂ u)] (order 4)
  // on the unknowns; the outer ghost layers hold u = 0.
  void apply_A(const std::vector<double> &u, std::vector<double> &out) const {
    const double inv_h2 = 1.0 / (grid_.spacing() * grid_.spacing());
    const std::size_t sx = 1, sy = static_cast<std::size_t>(grid_.nx()),
                      sz = static_cast<std::size_t>(grid_.nx()) * grid_.ny();
    auto lap2 = [&](const std::vector<double> &v, std::size_t id) {
      return (v[id - sx] + v[id + sx] + v[id - sy] + v[id + sy] + v[id - sz] + v[id + sz] - 6.0 * v[id]) * inv_h2;
    };
    if (order_ == 2) {
      for_unknowns([&](std::size_t id) { out[id] = -c2_[id] * lap2(u, id); });
      return;
    }
    auto &v = scratch_;
    for_layers(1, [&](std::size_t id) { v[id] = c2_[id] * lap2(u, id); });
    const double corr = dt_ * dt_ / 12.0;
    for_unknowns([&](std::size_t id) {
      double lap4 = -90.0 * u[id];
      for (std::size_t s : {sx, sy, sz})
        lap4 += 16.0 * (u[id - s] + u[id + s]) - (u[id - 2 * s] + u[id + 2 * s]);
      out[id] = -c2_[id] * (lap4 * inv_h2 / 12.0 + corr * lap2(v, id));
    });
  }

  Lattice base_;
  int order_;
  int ghost_;
  int sponge_;
  int pad_;
  Lattice grid_;
  double dt_ = 0.0;
  double time_ = 0.0;
  int steps_ = 0;
  std::vector<double> c2_, damp_plus_, damp_minus_;
  std::vector<double> u_prev_, u_, u_next_;
  mutable std::vector<double> scratch_;
};

/// Solves u_tt = c² Δu, u(0) = f, u_t(0) = 0 and records u on the domain's
/// boundary samples every record_stride steps.
inline WaveRunResult simulate_wave(const RealField &f, const SpeedModel &c, const WaveRunConfig &cfg, const Domain &domain) {
  // The sponge lives outside the lattice, so two cells of room suffice here;
  // this keeps the coarse 24^3 refinement level usable.
  domain.validate_in(f.lattice(), 2.0);
  require_support_in(f, domain, "initial displacement f");
  if (!f.all_finite()) fail(ErrorKind::InvalidArgument, "initial displacement has non-finite values");
  if (cfg.record_stride < 1) fail(ErrorKind::InvalidArgument, "record_stride must be >= 1");

  WaveRunConfig run_cfg = cfg;
  const Lattice &lat = f.lattice();
  const Box bb = domain.bounding_box();
  double gap = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a)
    gap = std::min({gap, bb.lo[a] - lat.origin()[a], lat.upper()[a] - bb.hi[a]});
  if (cfg.absorbing && cfg.pml_buffer < 0.0)
    run_cfg.pml_buffer = std::clamp(0.5 * cfg.t_final - gap + 2.0 * lat.spacing(), 0.0, kMaxAutoBuffer);

  WaveStepper stepper(f, c, run_cfg);
  WaveRunResult out;
  // Outside Ω the speed is 1; waves need 2 (gap + buffer) to return to Ω.
  out.reflection_free_until =
      cfg.absorbing ? 2.0 * (gap + stepper.padding() * lat.spacing() - run_cfg.sponge_cells(lat.spacing()) * lat.spacing())
                    : 2.0 * gap;
  out.dt = stepper.dt();
  const auto &sensors = domain.boundary().points;
  out.trace.sensors = sensors;
  const int total_steps = static_cast<int>(std::ceil(cfg.t_final / stepper.dt() - 1e-9));
  const int records = total_steps / cfg.record_stride + 1;
  out.trace.values.resize(records, static_cast<Eigen::Index>(sensors.size()));

  auto record = [&](int row, const RealField *field_now, double t) {
    out.trace.times.push_back(t);
    for (std::size_t b = 0; b < sensors.size(); ++b)
      out.trace.values(row, static_cast<Eigen::Index>(b)) =
          field_now ? sample_tricubic(f.lattice(), f.values().data(), sensors[b]) : stepper.sample(sensors[b]);
    if (cfg.record_movie) {
      out.movie.push_back(field_now ? *field_now : stepper.current());
      out.movie_times.push_back(t);
    }
  };
  record(0, &f, 0.0);
  int row = 1;
  if (cfg.track_energy) out.energy.push_back(stepper.energy());
  if (stepper.steps() % cfg.record_stride == 0 && row < records) record(row++, nullptr, stepper.time());
  while (stepper.steps() < total_steps) {
    stepper.step();
    if (cfg.track_energy) out.energy.push_back(stepper.energy());
    if (stepper.steps() % cfg.record_stride == 0) {
      if (!stepper.finite()) {
        std::ostringstream os;
        os << "wave solution blew up (non-finite values) at step " << stepper.steps();
        fail(ErrorKind::BlowUp, os.str());
      }
      if (row < records) record(row++, nullptr, stepper.time());
    }
  }
  if (!stepper.finite()) fail(ErrorKind::BlowUp, "wave solution blew up at step " + std::to_string(stepper.steps()));
  out.trace.values.conservativeResize(row, Eigen::NoChange);
  out.steps = stepper.steps();
  const double fpeak = f.peak();
  out.final_interior_ratio = fpeak > 0.0 ? stepper.current().peak() / fpeak : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Constant-speed oracle

using RadialProfile = std::function<double(double)>;

/// Exact solution for c ≡ 1 and radial f(x) = F(|x|): u = ∂_t [t M_t], where
/// t M_t = (1/2ρ) ∫_{|ρ-t|}^{ρ+t} F(s) s ds (ρ = |x|). Differentiating the
/// limits gives the closed form below.
inline double kirchhoff_reference(const RadialProfile &F, const Vec3 &x, double t) {
  if (t < 0.0) fail(ErrorKind::InvalidArgument, "time must be non-negative");
  const double rho = norm(x);
  if (t == 0.0) return F(rho);
  if (rho < 1e-12) {
    // Limit ρ → 0: u = F(t) + t F'(t).
    const double e = 1e-5 * std::max(t, 1e-3);
    return F(t) + t * (F(t + e) - F(std::max(0.0, t - e))) / (t + e - std::max(0.0, t - e));
  }
  return ((rho + t) * F(rho + t) + (rho - t) * F(std::abs(rho - t))) / (2.0 * rho);
}

/// Radial profile of a preset centered at the origin; other presets are rejected.
inline RadialProfile radial_profile(const FieldPreset &preset) {
  auto centered = [](const Vec3 &c) { return norm(c) == 0.0; };
  if (const auto *g = std::get_if<GaussianBumpPreset>(&preset); g && centered(g->center))
    return [a = g->amplitude, s = g->sigma](double r) { return a * std::exp(-r * r / (2.0 * s * s)); };
  if (const auto *p = std::get_if<PolynomialBumpPreset>(&preset); p && centered(p->center))
    return [q = *p](double r) {
      const double s = 1.0 - r * r / (q.radius * q.radius);
      return s > 0.0 ? q.amplitude * std::pow(s, q.power) : 0.0;
    };
  if (const auto *b = std::get_if<BallIndicatorPreset>(&preset); b && centered(b->center))
    return [q = *b](double r) { return evaluate_preset(q, Vec3{r, 0.0, 0.0}); };
  if (const auto *c = std::get_if<ConstantPreset>(&preset); c && c->value == 0.0) return [](double) { return 0.0; };
  fail(ErrorKind::NotApplicable, "the Kirchhoff oracle needs a radially symmetric source centred at the origin");
}

inline BoundaryTrace kirchhoff_trace(const RadialProfile &F, const std::vector<Vec3> &sensors,
                                     const std::vector<double> &times) {
  BoundaryTrace out;
  out.sensors = sensors;
  out.times = times;
  out.values.resize(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(sensors.size()));
  for (std::size_t j = 0; j < times.size(); ++j)
    for (std::size_t b = 0; b < sensors.size(); ++b)
      out.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(b)) = kirchhoff_reference(F, sensors[b], times[j]);
  return out;
}

// ---------------------------------------------------------------------------
// Trace comparison and I/O

struct TraceComparison {
  bool equal = false;
  double sup = 0.0;      // max |a - b|
  double relative_l2 = 0.0; // ‖a - b‖ / ‖b‖ (or ‖a - b‖ when b ≡ 0)
  double mean_abs = 0.0;
};

/// Compares `a` against the reference `b`; equal means relative L² ≤ tol.
inline TraceComparison trace_equal(const BoundaryTrace &a, const BoundaryTrace &b, double tol) {
  if (a.sensors.size() != b.sensors.size() || a.times.size() != b.times.size())
    fail(ErrorKind::Dimension, "traces have different sensor or time grids");
  for (std::size_t i = 0; i < a.sensors.size(); ++i)
    if (norm(a.sensors[i] - b.sensors[i]) > 1e-12) fail(ErrorKind::Dimension, "traces use different sensor positions");
  for (std::size_t j = 0; j < a.times.size(); ++j)
    if (std::abs(a.times[j] - b.times[j]) > 1e-9 * (1.0 + std::abs(b.times[j])))
      fail(ErrorKind::Dimension, "traces use different time grids");
  TraceComparison r;
  const Eigen::MatrixXd d = a.values - b.values;
  r.sup = d.size() ? d.cwiseAbs().maxCoeff() : 0.0;
  r.mean_abs = d.size() ? d.cwiseAbs().mean() : 0.0;
  const double ref = b.values.norm();
  r.relative_l2 = ref > 0.0 ? d.norm() / ref : d.norm();
  r.equal = r.relative_l2 <= tol;
  return r;
}

/// Header lines "# sensor,<i>,x,y,z", then "t,u_0,...,u_{B-1}" rows.
inline void write_trace_csv(const BoundaryTrace &trace, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  for (std::size_t b = 0; b < trace.sensors.size(); ++b)
    out << "# sensor," << b << ',' << format_double(trace.sensors[b][0]) << ',' << format_double(trace.sensors[b][1])
        << ',' << format_double(trace.sensors[b][2]) << '\n';
  out << 't';
  for (std::size_t b = 0; b < trace.sensors.size(); ++b) out << ",u" << b;
  out << '\n';
  for (std::size_t j = 0; j < trace.times.size(); ++j) {
    out << format_double(trace.times[j]);
    for (std::size_t b = 0; b < trace.sensors.size(); ++b)
      out << ',' << format_double(trace.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(b)));
    out << '\n';
  }
}

inline BoundaryTrace read_trace_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open trace file " + path.string());
  BoundaryTrace trace;
  std::vector<std::vector<double>> rows;
  std::string line;
  auto split = [](const std::string &s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(item);
    return parts;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# sensor,", 0) == 0) {
      const auto p = split(line.substr(2));
      if (p.size() != 5) fail(ErrorKind::Format, "bad sensor line in " + path.string());
      trace.sensors.push_back({std::stod(p[2]), std::stod(p[3]), std::stod(p[4])});
    } else if (line[0] == 't' || line[0] == '#') {
      continue;
    } else {
      std::vector<double> row;
      for (const auto &p : split(line)) row.push_back(std::stod(p));
      if (row.size() != trace.sensors.size() + 1) fail(ErrorKind::Format, "trace row has the wrong number of columns");
      rows.push_back(std::move(row));
    }
  }
  trace.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(trace.sensors.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    trace.times.push_back(rows[j][0]);
    for (std::size_t b = 0; b < trace.sensors.size(); ++b)
      trace.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(b)) = rows[j][b + 1];
  }
  return trace;
}

/// Movie frames as field files frame_0000.wmf, frame_0001.wmf, ...
inline void persist_movie(const WaveRunResult &run, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < run.movie.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.wmf", i);
    persist_field(run.movie[i], dir / name);
  }
}

} // namespace wavemoment
