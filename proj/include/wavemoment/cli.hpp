#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <fftw3.h>
#include <json.hpp>

#include "wavemoment/asymptotics.hpp"
#include "wavemoment/cli_config.hpp"
#include "wavemoment/field_io.hpp"
#include "wavemoment/harmonic_moments.hpp"
#include "wavemoment/helmholtz_ls.hpp"
#include "wavemoment/spectral_transform.hpp"
#include "wavemoment/uniqueness_lab.hpp"
#include "wavemoment/wave_forward.hpp"

namespace wavemoment::cli {

inline constexpr const char *kToolVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitInternal = 1, kExitConfig = 2, kExitViolation = 3 };

/// Bad inputs (configs, files, grids, CFL) map to 2; numerical breakdowns to 1.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::BlowUp:
  case ErrorKind::Convergence:
  case ErrorKind::Divergence:
  case ErrorKind::Membership: return kExitInternal;
  default: return kExitConfig;
  }
}

namespace detail {

inline std::string hash_hex(const std::string &text) {
  std::uint64_t h = 1469598103934665603ull;
  wavemoment::detail::fnv1a(h, text.data(), text.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json library_versions() {
  return {{"wavemoment", kToolVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"fftw", std::string(fftw_version)},
          {"cli11", CLI11_VERSION},
          {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                       "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

inline void write_text_atomic(const std::filesystem::path &path, const std::string &text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

/// Runs `writer` into a scratch file and prefixes its output with '#' comments.
inline void write_commented(const std::filesystem::path &path, const std::vector<std::string> &comments,
                            const std::function<void(const std::filesystem::path &)> &writer) {
  auto tmp = path;
  tmp += ".body";
  writer(tmp);
  std::stringstream body;
  {
    std::ifstream in(tmp, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read back " + tmp.string());
    body << in.rdbuf();
  }
  std::filesystem::remove(tmp);
  std::ostringstream text;
  for (const auto &c : comments) text << "# " << c << '\n';
  text << body.str();
  write_text_atomic(path, text.str());
}

inline void write_commented_text(const std::filesystem::path &path, const std::vector<std::string> &comments,
                                 const std::string &body) {
  std::ostringstream text;
  for (const auto &c : comments) text << "# " << c << '\n';
  text << body;
  write_text_atomic(path, text.str());
}

template <class Fn> void parallel_for(std::size_t n, int threads, Fn fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto &t : pool) t.join();
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

/// Data rows of a CSV file: comment lines and the header are dropped.
inline std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> parts;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(item);
    rows.push_back(std::move(parts));
  }
  return rows;
}

} // namespace detail

/// A run directory owned by one invocation. The manifest is written on
/// construction, before any artifact, and completed by finish().
class RunDirectory {
public:
  RunDirectory(std::filesystem::path dir, const std::string &command, const json &config, int threads)
      : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    lock_ = dir_ / ".lock";
    const int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      fail(ErrorKind::Config, "run directory " + dir_.string() +
                                  " is locked by another invocation (remove .lock if no run is active)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    (void)!::write(fd, pid.data(), pid.size());
    ::close(fd);
    json reduced = config;
    if (reduced.contains("lattice")) reduced["lattice"].erase("n");
    manifest_ = {{"tool", "wavemoment"},
                 {"versions", detail::library_versions()},
                 {"command", command},
                 {"config", config},
                 {"config_hash", detail::hash_hex(config.dump())},
                 {"scenario_hash", detail::hash_hex(reduced.dump())},
                 {"seed", config.value("seed", json(nullptr))},
                 {"threads", threads},
                 {"started", detail::utc_timestamp()},
                 {"status", "running"},
                 {"artifacts", json::array()}};
    write_manifest();
  }
  RunDirectory(const RunDirectory &) = delete;
  RunDirectory &operator=(const RunDirectory &) = delete;

  ~RunDirectory() {
    try {
      if (!finished_) {
        manifest_["status"] = "failed";
        manifest_["finished"] = detail::utc_timestamp();
        write_manifest();
      }
    } catch (...) {
    }
    std::error_code ec;
    std::filesystem::remove(lock_, ec);
  }

  const std::filesystem::path &path() const { return dir_; }
  std::string config_hash() const { return manifest_["config_hash"]; }

  /// Registers an artifact and returns its path.
  std::filesystem::path artifact(const std::string &name) {
    manifest_["artifacts"].push_back(name);
    return dir_ / name;
  }

  void set(const std::string &key, const json &value) { manifest_[key] = value; }
  void note(const std::string &text) { manifest_["notes"].push_back(text); }
  void error(const std::string &text) { manifest_["error"] = text; }

  void finish(int exit_code) {
    manifest_["status"] = "complete";
    manifest_["exit_code"] = exit_code;
    manifest_["finished"] = detail::utc_timestamp();
    write_manifest();
    finished_ = true;
  }

private:
  void write_manifest() { detail::write_text_atomic(dir_ / "manifest.json", manifest_.dump(2) + "\n"); }

  std::filesystem::path dir_, lock_;
  json manifest_;
  bool finished_ = false;
};

struct CommandContext {
  const ScenarioConfig &cfg;
  RunDirectory &run;
  int threads = 0;
  std::ostream &log;
  std::string command;

  std::vector<std::string> header(const std::string &what) const {
    return {"wavemoment " + command + ": " + what, "config_hash " + run.config_hash(), "seed " + std::to_string(cfg.seed)};
  }
};

struct SceneSet {
  Lattice lattice;
  Domain domain;
  Scene s1, s2;
};

inline SceneSet build_scenes(const ScenarioConfig &cfg) {
  SceneSet out{make_lattice(cfg), make_domain(cfg), {}, {}};
  out.s1 = Scene{make_source(cfg.source, out.lattice, out.domain), make_speed(cfg.speed, out.lattice)};
  out.s2 = Scene{make_source(cfg.source2, out.lattice, out.domain), make_speed(cfg.speed2, out.lattice)};
  return out;
}

inline UniquenessConfig uniqueness_config(const ScenarioConfig &cfg) {
  UniquenessConfig u;
  u.wave = cfg.wave;
  u.window = KWindow{cfg.spectral.k_min, cfg.spectral.k_max};
  u.k = k_grid(u.window, cfg.spectral.count);
  u.epsilon = cfg.spectral.epsilon;
  u.basis_degree = cfg.basis_degree;
  u.trace_tolerance = cfg.tolerances.trace;
  u.cstar_tolerance = cfg.tolerances.cstar;
  u.moment_tolerance = cfg.tolerances.moment;
  u.cstar_zero_threshold = cfg.tolerances.cstar_zero;
  u.l1_tolerance = cfg.tolerances.l1;
  return u;
}

inline SpectrumOptions spectrum_options(const ScenarioConfig &cfg) {
  SpectrumOptions o;
  o.block = cfg.spectrum.block;
  o.max_dimension = cfg.spectrum.max_dimension;
  o.seed = cfg.seed;
  return o;
}

inline std::string lattice_label(const Lattice &lat) {
  return std::to_string(lat.nx()) + "^3 lattice, h = " + format_double(lat.spacing());
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_simulate(CommandContext &ctx) {
  const auto &cfg = ctx.cfg;
  const Lattice lat = make_lattice(cfg);
  const Domain domain = make_domain(cfg);
  const RealField f = make_source(cfg.source, lat, domain);
  const SpeedModel c = make_speed(cfg.speed, lat);
  ctx.log << "wavemoment simulate: " << lattice_label(lat) << '\n';
  const WaveRunResult r = simulate_wave(f, c, cfg.wave, domain);
  detail::write_commented(ctx.run.artifact("trace.csv"), ctx.header("boundary trace, columns t then one per sensor"),
                          [&](const auto &p) { write_trace_csv(r.trace, p); });

  std::ostringstream decay;
  const double tail = r.trace.tail_ratio();
  decay << "dt " << format_double(r.dt) << "\n"
        << "steps " << r.steps << "\n"
        << "t_final " << format_double(cfg.wave.t_final) << "\n"
        << "trace_peak " << format_double(r.trace.peak()) << "\n"
        << "tail_ratio " << format_double(tail) << "\n"
        << "fourier_tail_bound " << format_double(wavemoment::detail::tail_bound(r.trace.times, r.trace.values)) << "\n"
        << "final_interior_ratio " << format_double(r.final_interior_ratio) << "\n"
        << "reflection_free_until " << format_double(r.reflection_free_until) << "\n"
        << "decayed " << (tail <= 1e-2 ? "yes" : "no") << "\n";
  detail::write_commented_text(ctx.run.artifact("decay.txt"), ctx.header("admissibility decay of the boundary trace"),
                               decay.str());

  if (radial_unit_scene(cfg)) {
    const auto oracle = kirchhoff_trace(radial_profile(cfg.source.preset), r.trace.sensors, r.trace.times);
    const auto cmp = trace_equal(r.trace, oracle, 0.03);
    std::ostringstream csv;
    csv << "h,error\n" << format_double(lat.spacing()) << ',' << format_double(cmp.relative_l2) << '\n';
    detail::write_commented_text(ctx.run.artifact("oracle_error.csv"),
                                 ctx.header("relative L2 trace error against the spherical-means closed form"), csv.str());
    ctx.log << "wavemoment simulate: closed-form trace error " << format_double(cmp.relative_l2) << '\n';
  }
  return kExitOk;
}

inline int cmd_spectrum(CommandContext &ctx) {
  const auto &cfg = ctx.cfg;
  const SceneSet sc = build_scenes(cfg);
  BoundaryTrace trace;
  const bool from_file = !cfg.spectral.trace.empty();
  if (from_file) {
    trace = read_trace_csv(cfg.resolve(cfg.spectral.trace));
  } else {
    ctx.log << "wavemoment spectrum: simulating scene 1 on the " << lattice_label(sc.lattice) << '\n';
    trace = simulate_wave(sc.s1.f, sc.s1.c, cfg.wave, sc.domain).trace;
  }
  const KWindow window{cfg.spectral.k_min, cfg.spectral.k_max};
  const auto ks = k_grid(window, cfg.spectral.count);
  const SpectralField spec = temporal_fourier(trace, ks, cfg.spectral.epsilon);
  const auto fits = fit_small_k_all(spec, window);
  const auto est = extract_Cstar(fits);
  detail::write_commented(ctx.run.artifact("spectral.csv"), ctx.header("time Fourier transform of the trace"),
                          [&](const auto &p) { write_spectral_csv(spec, p); });
  detail::write_commented(ctx.run.artifact("fits.csv"), ctx.header("two-term small-k fit per sensor"),
                          [&](const auto &p) { write_fit_csv(fits, p); });

  std::ostringstream text;
  text << "cstar " << format_double(est.value) << "\n"
       << "spread " << format_double(est.spread) << "\n"
       << "consistent " << (est.consistent ? "yes" : "no") << "\n"
       << "tail_estimate " << format_double(spec.tail_estimate) << "\n";
  if (!from_file) {
    const double truth = wavemoment::detail::cstar_truth(sc.s1, sc.domain);
    text << "cstar_truth " << format_double(truth) << "\n";
    if (truth != 0.0) text << "relative_error " << format_double(std::abs(est.value - truth) / std::abs(truth)) << "\n";
  }
  detail::write_commented_text(ctx.run.artifact("cstar.txt"), ctx.header("k^2 invariant from the small-k fits"), text.str());

  if (cfg.series.enabled()) {
    // L2 distance between series partial sums and LS solves over lattice
    // points outside the supports of f and c^-2 - 1, where neither carries
    // self-cell effects. The order-N remainder scales as k^(N+1).
    const int max_order = *std::max_element(cfg.series.orders.begin(), cfg.series.orders.end());
    const auto series = pn_recursion(sc.s1.f, sc.s1.c, max_order, sc.domain);
    const RealField s = sc.s1.c.inverse_square();
    std::vector<Eigen::Index> pts;
    for (Eigen::Index i = 0; i < sc.s1.f.values().size(); ++i)
      if (s.values()[i] == 1.0 && sc.s1.f.values()[i] == 0.0) pts.push_back(i);
    if (pts.empty()) fail(ErrorKind::InvalidArgument, "series check needs lattice points outside the supports");
    std::vector<ComplexField> ls(cfg.series.k.size());
    detail::parallel_for(cfg.series.k.size(), ctx.threads, [&](std::size_t i) {
      ls[i] = solve_lippmann_schwinger(sc.s1.f, sc.s1.c, cfg.series.k[i], sc.domain, cfg.spectral.epsilon).u;
    });
    std::ostringstream csv;
    csv << "order,k,misfit\n";
    for (int order : cfg.series.orders)
      for (std::size_t i = 0; i < cfg.series.k.size(); ++i) {
        const ComplexField partial = series_eval(series, cfg.series.k[i], order);
        double num = 0.0;
        for (auto p : pts) num += std::norm(partial.values()[p] - ls[i].values()[p]);
        csv << order << ',' << format_double(cfg.series.k[i]) << ','
            << format_double(std::sqrt(num * sc.lattice.cell_volume())) << '\n';
      }
    detail::write_commented_text(ctx.run.artifact("series_misfit.csv"),
                                 ctx.header("L2 misfit of the order-N series against the LS solve outside the supports"), csv.str());
  }
  return kExitOk;
}

inline int cmd_moments(CommandContext &ctx) {
  const auto &cfg = ctx.cfg;
  const SceneSet sc = build_scenes(cfg);
  const HarmonicBasis basis(cfg.basis_degree);
  const RealField s = sc.s1.c.inverse_square();
  const RealField contrast(sc.lattice, s.values().array() - 1.0);
  auto moments_csv = [&](const std::string &name, const std::string &what, const MomentVector &m) {
    detail::write_commented(ctx.run.artifact(name), ctx.header(what), [&](const auto &p) { write_moments_csv(m, p); });
  };
  moments_csv("moments_source.csv", "harmonic moments of f over the domain", moments(sc.s1.f, basis, sc.domain));
  moments_csv("moments_source_weighted.csv", "harmonic moments of f c^-2 over the domain",
              weighted_moments(sc.s1.f, sc.s1.c, basis, sc.domain));
  moments_csv("moments_speed_contrast.csv", "harmonic moments of c^-2 - 1 over the domain",
              moments(contrast, basis, sc.domain));
  const auto member = membership_in_A(sc.s1.f, sc.domain, basis, cfg.tolerances.membership_moment,
                                      cfg.tolerances.membership_flux);
  detail::write_commented_text(ctx.run.artifact("membership.txt"), ctx.header("membership of f by both routes"),
                               member.to_text());

  if (cfg.moments.generated > 0) {
    ctx.log << "wavemoment moments: comparing membership routes on " << 2 * cfg.moments.generated << " fields\n";
    const auto re = route_equivalence(sc.domain, sc.lattice, basis, cfg.moments.generated, cfg.seed);
    std::ostringstream csv;
    csv << "family,seed,moment_diagnostic,flux_diagnostic,moment_member,flux_member\n";
    auto rows = [&](const char *family, const std::vector<MembershipReport> &rs, std::uint64_t first) {
      for (std::size_t i = 0; i < rs.size(); ++i)
        csv << family << ',' << first + i << ',' << format_double(rs[i].moment_diagnostic) << ','
            << format_double(rs[i].flux_diagnostic) << ',' << rs[i].moment_member << ',' << rs[i].flux_member << '\n';
    };
    rows("member", re.members, cfg.seed);
    rows("generic", re.generic, cfg.seed + static_cast<std::uint64_t>(cfg.moments.generated));
    detail::write_commented_text(ctx.run.artifact("routes.csv"), ctx.header("membership diagnostics per generated field"),
                                 csv.str());
    std::ostringstream text;
    text << "agreements " << re.agreements << "\n"
         << "total " << re.total << "\n"
         << "spearman " << format_double(re.spearman) << "\n";
    detail::write_commented_text(ctx.run.artifact("routes.txt"), ctx.header("membership route comparison"), text.str());
  }
  return kExitOk;
}

inline int cmd_verify_speed(CommandContext &ctx) {
  const auto &cfg = ctx.cfg;
  const SceneSet sc = build_scenes(cfg);
  UniquenessConfig u = uniqueness_config(cfg);
  u.wave = wavemoment::detail::shared_time_step(cfg.wave, sc.s1, sc.s2);
  ctx.log << "wavemoment verify-speed: simulating both scenes on the " << lattice_label(sc.lattice) << '\n';
  const BoundaryTrace t1 = simulate_wave(sc.s1.f, sc.s1.c, u.wave, sc.domain).trace;
  const BoundaryTrace t2 = simulate_wave(sc.s2.f, sc.s2.c, u.wave, sc.domain).trace;
  const UniquenessReport rep = verify_theorem1(sc.s1, t1, sc.s2, t2, sc.domain, u);
  detail::write_commented_text(ctx.run.artifact("report.txt"), ctx.header("speed and source moment comparison"),
                               rep.to_text());
  detail::write_commented(ctx.run.artifact("speed_moments.csv"), ctx.header("moments of c2^-2 - c1^-2"),
                          [&](const auto &p) { write_moments_csv(rep.speed_moments, p); });
  detail::write_commented(ctx.run.artifact("source_moments.csv"), ctx.header("moments of f2 c2^-2 - f1 c1^-2"),
                          [&](const auto &p) { write_moments_csv(rep.source_moments, p); });
  bool violated = rep.violated();
  try {
    const MonotoneReport mono = monotone_speed_test(sc.s1, t1, sc.s2, t2, sc.domain, u);
    detail::write_commented_text(ctx.run.artifact("monotone.txt"), ctx.header("ordered-speed comparison"), mono.to_text());
    violated = violated || mono.verdict == Verdict::Violation;
  } catch (const Error &e) {
    if (e.kind() != ErrorKind::NotApplicable) throw;
    ctx.run.note(std::string("monotone test skipped: ") + e.what());
  }
  return violated ? kExitViolation : kExitOk;
}

inline int cmd_verify_source(CommandContext &ctx) {
  const auto &cfg = ctx.cfg;
  const SceneSet sc = build_scenes(cfg);
  ctx.log << "wavemoment verify-source: " << cfg.spectrum.count << " eigenpairs on the " << lattice_label(sc.lattice) << '\n';
  const OperatorSpectrum sp = operator_spectrum(sc.s1.c, sc.domain, cfg.spectrum.count, spectrum_options(cfg));
  Theorem2Config t;
  t.cascade_depth = cfg.cascade.depth;
  t.basis_degree = cfg.basis_degree;
  t.moment_tolerance = cfg.cascade.moment_tolerance;
  t.df_tolerance = cfg.cascade.df_tolerance;
  t.alpha_threshold = cfg.cascade.alpha_threshold;
  t.group_tolerance = cfg.cascade.group_tolerance;
  const Theorem2Report rep = verify_theorem2(sc.s1.c, sc.s1.f, sc.s2.f, sp, sc.domain, t);
  detail::write_commented(ctx.run.artifact("spectrum.csv"), ctx.header("eigenvalues of L = -c^2 Delta on the domain"),
                          [&](const auto &p) { write_spectrum_csv(sp, p); });
  detail::write_commented(ctx.run.artifact("cascade_moments.csv"), ctx.header("moments M(n, l, m) of L^n (f2 - f1)"),
                          [&](const auto &p) { write_theorem2_table_csv(rep, p); });
  detail::write_commented_text(ctx.run.artifact("report.txt"), ctx.header("source uniqueness check"), rep.to_text());
  return rep.verdict == Verdict::Violation ? kExitViolation : kExitOk;
}

inline int cmd_reconstruct(CommandContext &ctx) {
  const auto &cfg = ctx.cfg;
  const SceneSet sc = build_scenes(cfg);
  const auto &r = cfg.reconstruction;
  const auto basis = smooth_bump_basis(sc.lattice, sc.domain, r.per_axis, r.extent, r.radius);
  ReconstructionConfig rc;
  rc.wave = cfg.wave;
  rc.singular_floor = r.singular_floor;
  rc.threads = ctx.threads;
  BoundaryTrace trace;
  if (!r.trace.empty()) {
    trace = read_trace_csv(cfg.resolve(r.trace));
  } else {
    trace = simulate_wave(sc.s1.f, sc.s1.c, cfg.wave, sc.domain).trace;
    rc.truth = sc.s1.f;
  }
  ctx.log << "wavemoment reconstruct: " << basis.size() << " basis fields on the " << lattice_label(sc.lattice) << '\n';
  const Reconstruction rec = reconstruct_source(trace, sc.s1.c, basis, r.ridge, sc.domain, rc);
  persist_field(rec.f_hat, ctx.run.artifact("f_hat.wmf"));
  detail::write_commented(ctx.run.artifact("coefficients.csv"), ctx.header("basis coefficients of the reconstruction"),
                          [&](const auto &p) { write_coefficients_csv(rec.coefficients, p); });
  std::ostringstream text;
  text << "basis_size " << basis.size() << "\n"
       << "misfit " << format_double(rec.misfit) << "\n"
       << "sigma_max " << format_double(rec.sigma_max) << "\n"
       << "sigma_min " << format_double(rec.sigma_min) << "\n"
       << "rho " << format_double(rec.rho) << "\n"
       << "dropped " << rec.dropped << "\n";
  if (rec.field_error) text << "field_error " << format_double(*rec.field_error) << "\n";
  for (const auto &w : rec.warnings) text << "warning " << w << "\n";
  detail::write_commented_text(ctx.run.artifact("reconstruction.txt"), ctx.header("ridge least-squares reconstruction"),
                               text.str());
  return kExitOk;
}

inline int cmd_operator_spectrum(CommandContext &ctx) {
  const auto &cfg = ctx.cfg;
  const Lattice lat = make_lattice(cfg);
  const Domain domain = make_domain(cfg);
  const SpeedModel c = make_speed(cfg.speed, lat);
  ctx.log << "wavemoment operator-spectrum: " << cfg.spectrum.count << " eigenpairs on the " << lattice_label(lat) << '\n';
  const OperatorSpectrum sp = operator_spectrum(c, domain, cfg.spectrum.count, spectrum_options(cfg));
  detail::write_commented(ctx.run.artifact("spectrum.csv"), ctx.header("eigenvalues of L = -c^2 Delta on the domain"),
                          [&](const auto &p) { write_spectrum_csv(sp, p); });

  const auto *cst = std::get_if<ConstantPreset>(&cfg.speed.preset);
  if (cfg.domain.type == "ball" && cst) {
    const auto oracle = ball_spectrum(cfg.domain.radius, cst->value, sp.size());
    std::ostringstream csv;
    csv << "j,lambda,oracle,relative_error\n";
    for (std::size_t j = 0; j < sp.size(); ++j)
      csv << j + 1 << ',' << format_double(sp.eigenvalues[j]) << ',' << format_double(oracle[j]) << ','
          << format_double(std::abs(sp.eigenvalues[j] - oracle[j]) / oracle[j]) << '\n';
    detail::write_commented_text(ctx.run.artifact("spectrum_oracle.csv"),
                                 ctx.header("computed eigenvalues against spherical Bessel zeros"), csv.str());
  }

  const HarmonicBasis basis(cfg.basis_degree);
  const ExclusionTable table = eigen_moment_exclusion(sp, c, basis, domain, cfg.tolerances.exclusion_floor);
  std::ostringstream csv;
  csv << "j,lambda,moment_norm,leading_l,leading_m,applies,holds\n";
  for (const auto &row : table.rows)
    csv << row.j << ',' << format_double(row.lambda) << ',' << format_double(row.moment_norm) << ',' << row.leading_l
        << ',' << row.leading_m << ',' << row.applies << ',' << row.holds << '\n';
  detail::write_commented_text(ctx.run.artifact("exclusion.csv"),
                               ctx.header("largest weighted moment of each eigenfunction"), csv.str());

  const MomentRank plain = moment_matrix_rank(sp, c, basis, domain, 0, 0, cfg.tolerances.rank);
  const MomentRank stacked = moment_matrix_rank(sp, c, basis, domain, cfg.spectrum.rank_depth, 0, cfg.tolerances.rank);
  std::ostringstream text;
  auto rank_lines = [&](const char *name, const MomentRank &m) {
    text << name << "_rows " << m.rows << "\n"
         << name << "_cols " << m.cols << "\n"
         << name << "_rank " << m.rank << "\n"
         << name << "_smallest_singular_value " << format_double(m.smallest()) << "\n";
  };
  rank_lines("plain", plain);
  rank_lines("stacked", stacked);
  text << "orthonormality_defect " << format_double(orthonormality_defect(sp, c)) << "\n"
       << "exclusion_holds " << (table.all_hold() ? "yes" : "no") << "\n";
  detail::write_commented_text(ctx.run.artifact("rank.txt"), ctx.header("moment matrix rank of the eigenfunctions"),
                               text.str());
  return table.all_hold() ? kExitOk : kExitViolation;
}

/// Collates finished runs into one CSV per figure.
inline int cmd_report(const std::vector<std::filesystem::path> &runs, const std::filesystem::path &out, std::ostream &log) {
  if (runs.empty()) fail(ErrorKind::Config, "report needs at least one run directory");
  struct Entry {
    std::filesystem::path dir;
    std::string name;
    json manifest;
  };
  std::vector<Entry> entries;
  for (const auto &dir : runs) {
    std::ifstream in(dir / "manifest.json");
    if (!in) fail(ErrorKind::Config, "no manifest.json in " + dir.string());
    json m;
    try {
      m = json::parse(in);
    } catch (const json::exception &e) {
      fail(ErrorKind::Format, "unreadable manifest in " + dir.string() + ": " + e.what());
    }
    if (m.value("tool", "") != "wavemoment") fail(ErrorKind::Config, dir.string() + " is not a wavemoment run directory");
    if (m.value("status", "") != "complete") fail(ErrorKind::Config, "run " + dir.string() + " did not complete");
    entries.push_back({dir, std::filesystem::absolute(dir).lexically_normal().filename().string(), std::move(m)});
  }
  const json first_versions = entries.front().manifest["versions"];
  for (const auto &e : entries)
    if (e.manifest["versions"] != first_versions)
      fail(ErrorKind::Config, "manifest mismatch: " + e.name + " was produced by different tool or library versions");

  json inputs = json::array();
  for (const auto &e : entries)
    inputs.push_back({{"run", e.name}, {"command", e.manifest["command"]}, {"config_hash", e.manifest["config_hash"]}});
  RunDirectory run(out, "report", json{{"runs", inputs}}, 1);
  auto header = [&](const std::string &what, const std::string &columns) {
    return std::vector<std::string>{"wavemoment report: " + what, "columns: " + columns};
  };
  std::ostringstream notes;

  {
    std::ostringstream csv;
    csv << "run,command,config_hash,exit_code\n";
    for (const auto &e : entries)
      csv << e.name << ',' << e.manifest["command"].get<std::string>() << ','
          << e.manifest["config_hash"].get<std::string>() << ',' << e.manifest.value("exit_code", -1) << '\n';
    detail::write_commented_text(run.artifact("summary.csv"), header("runs collated", "run,command,config_hash,exit_code"),
                                 csv.str());
  }

  // Error vs h: refinement runs must agree on everything but the resolution.
  std::vector<const Entry *> refinement;
  for (const auto &e : entries)
    if (std::filesystem::exists(e.dir / "oracle_error.csv")) refinement.push_back(&e);
  if (!refinement.empty()) {
    for (const auto *e : refinement)
      if (e->manifest["scenario_hash"] != refinement.front()->manifest["scenario_hash"])
        fail(ErrorKind::Config, "manifest mismatch: refinement runs " + refinement.front()->name + " and " + e->name +
                                    " differ in more than the lattice resolution");
    std::vector<std::pair<double, std::vector<std::string>>> rows;
    for (const auto *e : refinement)
      for (auto &r : detail::read_csv_rows(e->dir / "oracle_error.csv")) {
        if (r.size() != 2) fail(ErrorKind::Format, "bad oracle_error.csv in " + e->name);
        rows.emplace_back(std::stod(r[0]), std::move(r));
      }
    std::stable_sort(rows.begin(), rows.end(), [](const auto &a, const auto &b) { return a.first > b.first; });
    std::ostringstream csv;
    csv << "h,error\n";
    for (const auto &r : rows) csv << r.second[0] << ',' << r.second[1] << '\n';
    detail::write_commented_text(run.artifact("convergence.csv"),
                                 header("trace error against the closed form versus lattice spacing", "h,error"), csv.str());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double e0 = std::stod(rows[i - 1].second[1]), e1 = std::stod(rows[i].second[1]);
      if (e0 > 0.0 && e1 > 0.0 && rows[i - 1].first != rows[i].first)
        notes << "observed_order " << format_double(rows[i - 1].first) << " " << format_double(rows[i].first) << " "
              << format_double(std::log(e0 / e1) / std::log(rows[i - 1].first / rows[i].first)) << "\n";
    }
  }

  // Series misfit vs k, with a log-log slope per run and order.
  {
    std::ostringstream csv;
    csv << "run,order,k,misfit\n";
    bool any = false;
    for (const auto &e : entries) {
      const auto path = e.dir / "series_misfit.csv";
      if (!std::filesystem::exists(path)) continue;
      any = true;
      std::map<int, std::vector<std::pair<double, double>>> by_order;
      for (const auto &r : detail::read_csv_rows(path)) {
        if (r.size() != 3) fail(ErrorKind::Format, "bad series_misfit.csv in " + e.name);
        csv << e.name << ',' << r[0] << ',' << r[1] << ',' << r[2] << '\n';
        by_order[std::stoi(r[0])].emplace_back(std::log(std::stod(r[1])), std::log(std::stod(r[2])));
      }
      for (const auto &[order, pts] : by_order) {
        if (pts.size() < 2) continue;
        double mx = 0.0, my = 0.0;
        for (const auto &p : pts) mx += p.first, my += p.second;
        mx /= static_cast<double>(pts.size());
        my /= static_cast<double>(pts.size());
        double sxy = 0.0, sxx = 0.0;
        for (const auto &p : pts) sxy += (p.first - mx) * (p.second - my), sxx += (p.first - mx) * (p.first - mx);
        notes << "series_slope " << e.name << " " << order << " " << format_double(sxx > 0.0 ? sxy / sxx : 0.0) << "\n";
      }
    }
    if (any)
      detail::write_commented_text(run.artifact("misfit_vs_k.csv"),
                                   header("series misfit against the LS solve versus k", "run,order,k,misfit"), csv.str());
  }

  // Eigenvalue tables.
  {
    std::ostringstream csv;
    csv << "run,j,lambda,residual\n";
    bool any = false;
    for (const auto &e : entries) {
      const auto path = e.dir / "spectrum.csv";
      if (!std::filesystem::exists(path)) continue;
      any = true;
      for (const auto &r : detail::read_csv_rows(path)) {
        if (r.size() != 3) fail(ErrorKind::Format, "bad spectrum.csv in " + e.name);
        csv << e.name << ',' << r[0] << ',' << r[1] << ',' << r[2] << '\n';
      }
    }
    if (any)
      detail::write_commented_text(run.artifact("eigenvalues.csv"),
                                   header("eigenvalues of L per run", "run,j,lambda,residual"), csv.str());
  }

  detail::write_commented_text(run.artifact("report.txt"), {"wavemoment report: derived rates"}, notes.str());
  log << "wavemoment report: collated " << entries.size() << " runs into " << out.string() << '\n';
  run.finish(kExitOk);
  return kExitOk;
}

using CommandFn = int (*)(CommandContext &);

inline const std::vector<std::pair<std::string, std::pair<CommandFn, std::string>>> &commands() {
  static const std::vector<std::pair<std::string, std::pair<CommandFn, std::string>>> table{
      {"simulate", {cmd_simulate, "simulate the wave equation and record the boundary trace"}},
      {"spectrum", {cmd_spectrum, "transform a trace in time, fit the small-k coefficients and extract C*"}},
      {"moments", {cmd_moments, "harmonic moments and membership diagnostics of the source"}},
      {"verify-speed", {cmd_verify_speed, "compare two scenes through their traces, C* and moment differences"}},
      {"verify-source", {cmd_verify_source, "check that vanishing cascade moments force equal sources"}},
      {"reconstruct", {cmd_reconstruct, "ridge least-squares source reconstruction on a bump basis"}},
      {"operator-spectrum", {cmd_operator_spectrum, "eigenpairs of the operator L with moment diagnostics"}},
  };
  return table;
}

/// Runs one scenario command into `out`; returns the exit code.
inline int run_command(const std::string &name, const ScenarioConfig &cfg, const std::filesystem::path &out, int threads,
                       std::ostream &log) {
  CommandFn fn = nullptr;
  for (const auto &[n, entry] : commands())
    if (n == name) fn = entry.first;
  if (!fn) fail(ErrorKind::Config, "unknown command " + name);
  RunDirectory run(out, name, cfg.normalized, threads);
  CommandContext ctx{cfg, run, threads, log, name};
  try {
    const int code = fn(ctx);
    run.finish(code);
    return code;
  } catch (const std::exception &e) {
    run.error(e.what());
    throw;
  }
}

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
  CLI::App app{"Numerical lab for recovering a wave source and speed from boundary traces", "wavemoment"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  int threads = 0;
  std::int64_t seed = -1;
  std::vector<std::string> run_dirs;
  std::vector<std::pair<CLI::App *, std::string>> subs;
  for (const auto &[name, entry] : commands()) {
    CLI::App *sub = app.add_subcommand(name, entry.second);
    sub->add_option("--config", config_path, "scenario config (JSON)")->required();
    sub->add_option("--out", out_dir, "run directory (default runs/<command>)");
    sub->add_option("--threads", threads, "worker threads, 0 for all cores")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", seed, "override the config seed")->check(CLI::NonNegativeNumber);
    subs.emplace_back(sub, name);
  }
  CLI::App *report = app.add_subcommand("report", "collate run directories into plot-ready CSV");
  report->add_option("runs", run_dirs, "run directories")->required();
  report->add_option("--out", out_dir, "output directory (default runs/report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (report->parsed()) {
      std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
      return cmd_report(dirs, out_dir.empty() ? std::filesystem::path("runs/report") : std::filesystem::path(out_dir), err);
    }
    for (const auto &[sub, name] : subs) {
      if (!sub->parsed()) continue;
      std::optional<std::uint64_t> override_seed;
      if (seed >= 0) override_seed = static_cast<std::uint64_t>(seed);
      const ScenarioConfig cfg = load_config(config_path, override_seed);
      const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path("runs") / name : std::filesystem::path(out_dir);
      const int code = run_command(name, cfg, dir, threads, err);
      if (code == kExitViolation) err << "wavemoment " << name << ": verdict violation recorded in " << dir.string() << '\n';
      return code;
    }
  } catch (const Error &e) {
    err << "wavemoment: error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception &e) {
    err << "wavemoment: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

} // namespace wavemoment::cli
