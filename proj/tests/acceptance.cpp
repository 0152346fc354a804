// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <unistd.h>

#include "wavemoment/asymptotics.hpp"
#include "wavemoment/harmonic_moments.hpp"
#include "wavemoment/helmholtz_ls.hpp"
#include "wavemoment/potential_ops.hpp"
#include "wavemoment/presets.hpp"
#include "wavemoment/spectral_transform.hpp"
#include "wavemoment/uniqueness_lab.hpp"
#include "wavemoment/wave_forward.hpp"

using namespace wavemoment;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string &what) {
    if (!ok) {
      pass = false;
      detail << "[miss] ";
    }
    detail << what << "; ";
  }
};

std::string fmt(const char *f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string sci(double v) { return fmt("%.3e", v); }

double radial_integral(const std::function<double(double)> &g, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, a, b, 15, 1e-13);
}

const Lattice &lattice48() {
  static const Lattice lat = build_cubic_lattice(-2.0, 2.0, 48);
  return lat;
}

const Domain &ball() {
  static const Domain d = Domain::ball({0.0, 0.0, 0.0}, 1.5, 32);
  return d;
}

const Lattice &unit_lattice() {
  static const Lattice lat = build_cubic_lattice(-1.3, 1.3, 40);
  return lat;
}

const Domain &unit_ball() {
  static const Domain d = Domain::ball({0.0, 0.0, 0.0}, 1.0, 64);
  return d;
}

const OperatorSpectrum &unit_spectrum() {
  static const OperatorSpectrum sp = operator_spectrum(SpeedModel::constant(unit_lattice()), unit_ball(), 20);
  return sp;
}

// c = 1 + ε(1 − |x − x₀|²/R²)³ with R = 0.6: c ≥ 1 everywhere, ordered in ε.
SpeedModel ordered_speed(const Lattice &lat, double eps) {
  return SpeedModel(RealField(lat, sample_field(PolynomialBumpPreset{eps, 0.6, {0.1, 0.0, 0.0}, 3}, lat).values().array() + 1.0));
}

// c⁻² = 1 + a(1 − |x − x₀|²/0.81)³.
SpeedModel inverse_square_bump(const Lattice &lat, double amp) {
  return SpeedModel::from_inverse_square(
      RealField(lat, sample_field(PolynomialBumpPreset{amp, 0.9, {0.1, -0.05, 0.0}, 3}, lat).values().array() + 1.0));
}

RealField times_inverse_square(const RealField &f, const SpeedModel &c) {
  return RealField(f.lattice(), f.values().cwiseProduct(c.inverse_square().values()));
}

// Lattice points outside both supports.
std::vector<Eigen::Index> exterior_points(const RealField &f, const SpeedModel &c) {
  const RealField s = c.inverse_square();
  std::vector<Eigen::Index> pts;
  for (Eigen::Index i = 0; i < f.values().size(); ++i)
    if (s[static_cast<std::size_t>(i)] == 1.0 && f[static_cast<std::size_t>(i)] == 0.0) pts.push_back(i);
  return pts;
}

double misfit(const ComplexField &a, const ComplexField &b, const std::vector<Eigen::Index> &pts) {
  double num = 0.0;
  for (auto i : pts) num += std::norm(a.values()[i] - b.values()[i]);
  return std::sqrt(num);
}

double rel_diff(const ComplexField &a, const ComplexField &b) {
  const double den = b.values().norm();
  return den > 0.0 ? (a.values() - b.values()).norm() / den : (a.values() - b.values()).norm();
}

// One simulated scene on the default lattice, shared by criteria 2 and 3.
struct SpectralScene {
  std::string name;
  RealField f;
  SpeedModel c;
  SpectralField spectral;
  std::vector<SmallKFit> fits;
};

SpectralScene spectral_scene(std::string name, RealField f, SpeedModel c) {
  const auto run = simulate_wave(f, c, WaveRunConfig{}, ball());
  auto spectral = temporal_fourier(run.trace, k_grid({0.02, 0.2}, 10));
  auto fits = fit_small_k_all(spectral, {0.02, 0.2});
  return SpectralScene{std::move(name), std::move(f), std::move(c), std::move(spectral), std::move(fits)};
}

const std::vector<SpectralScene> &spectral_scenes() {
  static const std::vector<SpectralScene> s = [] {
    const auto &lat = lattice48();
    std::vector<SpectralScene> out;
    out.push_back(spectral_scene("c=1", sample_field(GaussianBumpPreset{1.0, 0.2, {0.2, 0.1, -0.15}}, lat),
                                 SpeedModel::constant(lat)));
    out.push_back(spectral_scene("bump", sample_field(GaussianBumpPreset{1.0, 0.2, {-0.2, 0.1, 0.15}}, lat),
                                 inverse_square_bump(lat, 0.5)));
    return out;
  }();
  return s;
}

// 1. Kirchhoff oracle and 24³ → 48³ refinement.
void criterion1(Outcome &o) {
  const GaussianBumpPreset bump{1.0, 0.2, {0.0, 0.0, 0.0}};
  double err[2];
  int idx = 0;
  for (int n : {24, 48}) {
    const Lattice lat = build_cubic_lattice(-2.0, 2.0, n);
    const auto run = simulate_wave(sample_field(bump, lat), SpeedModel::constant(lat), WaveRunConfig{}, ball());
    const auto ref = kirchhoff_trace(radial_profile(bump), run.trace.sensors, run.trace.times);
    err[idx++] = trace_equal(run.trace, ref, 0.03).relative_l2;
  }
  const double order = std::log2(err[0] / err[1]);
  o.check(err[1] <= 0.03, "rel L2 at 48^3 " + sci(err[1]) + " <= 3e-2");
  o.check(order >= 1.5, "order " + fmt("%.2f", order) + " >= 1.5 (24^3 error " + sci(err[0]) + ")");
}

// 2. p̂₁ against the Newtonian potential and the k³ remainder of the two-term series.
void criterion2(Outcome &o) {
  for (const auto &s : spectral_scenes()) {
    const auto N = newtonian_potential_at(times_inverse_square(s.f, s.c), s.spectral.points);
    double worst = 0.0;
    for (std::size_t b = 0; b < N.size(); ++b) {
      const Complex oracle(0.0, -N[b] / (2.0 * kPi));
      worst = std::max(worst, std::abs(s.fits[b].p1 - oracle) / std::abs(oracle));
    }
    o.check(worst <= 0.05, "p1 worst rel error (" + s.name + ") " + sci(worst) + " <= 5e-2");
  }
  const auto &lat = lattice48();
  const SpeedModel c = inverse_square_bump(lat, 0.5);
  const RealField f = sample_field(GaussianBumpPreset{1.0, 0.2, {-0.2, 0.1, 0.15}}, lat);
  const auto series = pn_recursion(f, c, 2, ball());
  const auto pts = exterior_points(f, c);
  const std::vector<double> ks{0.05, 0.1, 0.2};
  std::vector<double> lx, ly;
  for (double k : ks) {
    const auto ls = solve_lippmann_schwinger(f, c, k, ball());
    lx.push_back(std::log(k));
    ly.push_back(std::log(misfit(series_eval(series, k, 2), ls.u, pts)));
  }
  // Least-squares slope over the three frequencies.
  const double mx = (lx[0] + lx[1] + lx[2]) / 3.0, my = (ly[0] + ly[1] + ly[2]) / 3.0;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = num / den;
  o.check(slope >= 2.5 && slope <= 3.5, "two-term remainder slope " + fmt("%.3f", slope) + " in [2.5, 3.5] over " +
                                            std::to_string(pts.size()) + " exterior points");
}

// 3. C* against ∫ f/c².
void criterion3(Outcome &o) {
  for (const auto &s : spectral_scenes()) {
    const auto cs = extract_Cstar(s.fits);
    // Gaussian mass in closed form for c ≡ 1; lattice quadrature of f c⁻² otherwise.
    const double truth = s.name == "c=1" ? std::pow(2.0 * kPi * 0.04, 1.5) : volume_integral(times_inverse_square(s.f, s.c));
    const double rel = std::abs(cs.value - truth) / truth;
    o.check(rel <= 0.05, "C* rel error (" + s.name + ") " + sci(rel) + " <= 5e-2");
    o.check(cs.spread <= 0.02, "spread (" + s.name + ") " + sci(cs.spread) + " <= 2e-2");
  }
}

// 4. Moment route and normal-derivative route on 50 generated fields.
void criterion4(Outcome &o) {
  const auto eq = route_equivalence(ball(), lattice48(), HarmonicBasis(8), 25);
  o.check(eq.total == 50 && eq.agreements == 50,
          "verdicts agree " + std::to_string(eq.agreements) + "/" + std::to_string(eq.total));
  o.check(eq.spearman > 0.9, "Spearman " + fmt("%.3f", eq.spearman) + " > 0.9");
}

// 5. The odd-power identity for generated members of 𝒜.
void criterion5(Outcome &o) {
  const Domain d = Domain::ball({0.0, 0.0, 0.0}, 1.5);
  const std::vector<Vec3> points{{2.0, 0.0, 0.0}, {0.0, -1.4, 1.4}, {1.2, 1.2, 1.2}};
  double worst = 0.0;
  int evaluated = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RealField g = generate_A_element(seed, d, lattice48());
    for (int n : {1, 3})
      for (const auto &x : points) {
        worst = std::max(worst, ibyp_identity(g, d, n, x).relative_gap());
        ++evaluated;
      }
  }
  o.check(worst <= 0.03, "worst |lhs-rhs|/|lhs| " + sci(worst) + " <= 3e-2 over " + std::to_string(evaluated) + " cases");
}

// 6. Recursion against closed form under the matched construction.
void criterion6(Outcome &o) {
  const auto &lat = lattice48();
  const RealField chi = sample_field(PolynomialBumpPreset{1.0, 1.07, {0.0, 0.0, 0.0}, 7}, lat);
  const auto run = [&](const SpeedModel &c, double &odd_worst, double &even_worst) {
    const RealField df = matched_trace_difference(chi, c, 3);
    const auto s = pn_recursion(df, c, 6, ball());
    odd_worst = 0.0;
    even_worst = 0.0;
    for (int n = 1; n <= 5; n += 2) odd_worst = std::max(odd_worst, rel_diff(s.coefficient(n), closed_form_pn(df, c, n, ball()).p));
    for (int n = 2; n <= 6; n += 2) {
      const double odd = n + 1 <= 6 ? std::min(s.norm(n - 1), s.norm(n + 1)) : s.norm(n - 1);
      even_worst = std::max(even_worst, s.norm(n) / odd);
    }
  };
  double odd = 0.0, even = 0.0;
  run(SpeedModel::constant(lat), odd, even);
  o.check(odd <= 0.05, "odd n<=5 recursion vs closed form " + sci(odd) + " <= 5e-2");
  o.check(even <= 1e-3, "even/odd norm ratio " + sci(even) + " <= 1e-3");
  run(inverse_square_bump(lat, 0.3), odd, even);
  o.detail << "INFO variable speed (c^-2 bump 0.3): odd " << sci(odd) << ", even/odd " << sci(even) << "; ";
}

// 7. Self-adjointness, non-negativity and the Bessel-zero spectrum.
void criterion7(Outcome &o) {
  const auto &lat = unit_lattice();
  const RealField u = restrict_to(sample_field(GaussianBumpPreset{1.0, 0.3, {0.2, -0.1, 0.0}}, lat), unit_ball());
  const RealField v = restrict_to(sample_field(PolynomialBumpPreset{1.0, 0.6, {-0.1, 0.2, 0.1}, 2}, lat), unit_ball());
  const SpeedModel variable(RealField(lat, sample_field(PolynomialBumpPreset{0.3, 0.5, {0.2, 0.0, -0.1}, 3}, lat).values().array() + 1.0));
  const double sa = std::max(self_adjointness_defect(u, v, SpeedModel::constant(lat), unit_ball()),
                             self_adjointness_defect(u, v, variable, unit_ball()));
  o.check(sa <= 1e-8, "self-adjointness defect " + sci(sa) + " <= 1e-8");
  const auto &sp = unit_spectrum();
  const auto spv = operator_spectrum(variable, unit_ball(), 8);
  double lowest = sp.eigenvalues.back();
  for (double l : sp.eigenvalues) lowest = std::min(lowest, l);
  for (double l : spv.eigenvalues) lowest = std::min(lowest, l);
  o.check(lowest >= -1e-10, "smallest computed eigenvalue " + sci(lowest) + " >= -1e-10");
  const double l1 = sp.eigenvalues[0], oracle = 1.0 / (kPi * kPi);
  o.check(std::abs(l1 - oracle) / oracle <= 0.02, "lambda1 " + fmt("%.6f", l1) + " vs 1/pi^2 " + fmt("%.6f", oracle));
  const double lo = std::min({sp.eigenvalues[1], sp.eigenvalues[2], sp.eigenvalues[3]});
  const double hi = std::max({sp.eigenvalues[1], sp.eigenvalues[2], sp.eigenvalues[3]});
  o.check((hi - lo) / hi <= 1e-3, "lambda2 triple spread " + sci((hi - lo) / hi) + " <= 1e-3");
}

// 8. Cascade decay, moment-matrix rank and the eigen-moment exclusion.
void criterion8(Outcome &o) {
  const auto &lat = unit_lattice();
  const auto &sp = unit_spectrum();
  const SpeedModel c = SpeedModel::constant(lat);
  const RealField F0 = restrict_to(sample_field(GaussianBumpPreset{1.0, 0.25, {0.3, -0.2, 0.1}}, lat), unit_ball());
  const auto cascade = fn_cascade(F0, c, 12, unit_ball());
  const auto r = cascade.ratios();
  const double l1 = sp.eigenvalues[0];
  double worst = 0.0;
  for (std::size_t n = 5; n < r.size(); ++n) worst = std::max(worst, std::abs(r[n] - l1) / l1);
  o.check(worst <= 0.05, "cascade step ratio vs lambda1 after n=5 " + sci(worst) + " <= 5e-2");
  const HarmonicBasis basis(4);
  const auto rank = moment_matrix_rank(sp, c, basis, unit_ball(), 15);
  o.check(rank.full_column_rank() && rank.smallest() > 1e-3,
          "stacked moment matrix " + std::to_string(rank.cols) + " cols, sigma_min " + sci(rank.smallest()) + " > 1e-3");
  const auto table = eigen_moment_exclusion(sp, c, basis, unit_ball());
  double floor = table.rows.empty() ? 0.0 : table.rows.front().moment_norm;
  for (const auto &row : table.rows) floor = std::min(floor, row.moment_norm);
  o.check(table.all_hold() && table.rows.size() == sp.size(),
          "exclusion holds for " + std::to_string(table.rows.size()) + " eigenfunctions, min moment norm " + sci(floor));
}

// 9. Reconstruction and the equal-source table.
void criterion9(Outcome &o) {
  const Lattice lat = build_cubic_lattice(-2.0, 2.0, 32);
  const auto basis = smooth_bump_basis(lat, ball(), 4, 0.39, 0.55);
  ReconstructionConfig cfg;
  cfg.wave.t_final = 4.0;
  cfg.cache_dir = fs::temp_directory_path() / ("wavemoment_acceptance_cache_" + std::to_string(::getpid()));
  fs::remove_all(cfg.cache_dir);
  const SpeedModel c = SpeedModel::constant(lat);
  const auto fm = assemble_forward_matrix(c, basis, ball(), cfg);
  fs::remove_all(cfg.cache_dir);

  ReconstructionConfig member = cfg;
  member.truth = basis[21];
  const auto tm = simulate_wave(basis[21], c, cfg.wave, ball()).trace;
  const auto rm = solve_reconstruction(fm, tm, basis, 1e-8, member);
  o.check(rm.field_error && *rm.field_error <= 0.01, "basis member field error " + sci(rm.field_error.value_or(1.0)) + " <= 1e-2");

  const RealField f = restrict_to(sample_field(GaussianBumpPreset{1.0, 0.25, {0.1, -0.05, 0.05}}, lat),
                                  Domain::ball({0.1, -0.05, 0.05}, 1.0, 8));
  ReconstructionConfig generic = cfg;
  generic.truth = f;
  const auto rg = solve_reconstruction(fm, simulate_wave(f, c, cfg.wave, ball()).trace, basis, 1e-8, generic);
  Eigen::MatrixXd P(f.values().size(), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) P.col(static_cast<Eigen::Index>(j)) = basis[j].values();
  const Eigen::VectorXd a = P.colPivHouseholderQr().solve(f.values());
  const double best = (P * a - f.values()).norm() / f.values().norm();
  const double err = rg.field_error.value_or(1.0);
  o.check(err <= best + 0.10, "generic field error " + sci(err) + " <= best " + sci(best) + " + 0.10");

  const RealField g = restrict_to(sample_field(GaussianBumpPreset{1.0, 0.25, {0.1, 0.0, 0.0}}, unit_lattice()), unit_ball());
  const auto t2 = verify_theorem2(SpeedModel::constant(unit_lattice()), g, g, unit_spectrum(), unit_ball());
  o.check(t2.table.size() > 0 && t2.table.cwiseAbs().maxCoeff() == 0.0,
          "f1 = f2 table " + std::to_string(t2.table.rows()) + "x" + std::to_string(t2.table.cols()) + " max |entry| " +
              sci(t2.table.size() > 0 ? t2.table.cwiseAbs().maxCoeff() : -1.0));
}

// 10. Monotone response to ordered speed perturbations.
void criterion10(Outcome &o) {
  const auto &lat = lattice48();
  WaveRunConfig wave;
  wave.dt = kCflSafety * cfl_limit(lat.spacing(), 1.1);
  UniquenessConfig cfg;
  cfg.wave = wave;
  const RealField f = sample_field(GaussianBumpPreset{1.0, 0.2, {0.2, 0.1, -0.15}}, lat);
  const Scene s1{f, SpeedModel::constant(lat)};
  const auto t1 = simulate_wave(f, s1.c, wave, ball()).trace;
  double prev_trace = 0.0, prev_moment = 0.0, worst_oracle = 0.0;
  bool monotone = true, ordered = true;
  for (double eps : {0.01, 0.02, 0.05}) {
    const Scene s2{f, ordered_speed(lat, eps)};
    const auto t2 = simulate_wave(f, s2.c, wave, ball()).trace;
    const auto r = monotone_speed_test(s1, t1, s2, t2, ball(), cfg);
    ordered = ordered && r.ordering == "c1<=c2";
    const double R = 0.6;
    const double oracle = radial_integral(
        [&](double rr) {
          const double b = std::pow(1.0 - rr * rr / (R * R), 3);
          return 4.0 * kPi * rr * rr * (1.0 / ((1.0 + eps * b) * (1.0 + eps * b)) - 1.0);
        },
        0.0, R);
    worst_oracle = std::max(worst_oracle, std::abs(r.zeroth_moment - oracle) / std::abs(oracle));
    monotone = monotone && r.trace.relative_l2 > prev_trace && std::abs(r.zeroth_moment) > prev_moment;
    o.detail << "eps " << eps << ": trace " << sci(r.trace.relative_l2) << ", moment " << sci(r.zeroth_moment) << "; ";
    prev_trace = r.trace.relative_l2;
    prev_moment = std::abs(r.zeroth_moment);
  }
  o.check(ordered, "speeds ordered c1<=c2");
  o.check(monotone, "trace discrepancy and |zeroth moment| strictly increase with eps");
  o.check(worst_oracle <= 0.02, "zeroth moment vs radial quadrature " + sci(worst_oracle) + " <= 2e-2");
}

// 11. Every CLI command twice with the same config and seed; CSVs compared byte for byte.
std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> csv_files(const fs::path &dir) {
  std::map<std::string, std::string> out;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") out[e.path().filename().string()] = slurp(e.path());
  return out;
}

int run_cli(const std::string &args, const fs::path &log) {
  const std::string cmd = std::string("\"") + WAVEMOMENT_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion11(Outcome &o) {
  const fs::path root = fs::temp_directory_path() / ("wavemoment_acceptance_cli_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  // Cold forward-matrix cache on the first pass, warm on the second.
  setenv("WAVEMOMENT_CACHE", (root / "cache").c_str(), 1);
  const fs::path configs = WAVEMOMENT_CONFIG_DIR;
  const std::vector<std::pair<std::string, std::string>> jobs{
      {"simulate", "refine_24.json"},          {"simulate", "refine_48.json"},
      {"spectrum", "spectrum_series.json"},    {"moments", "moments_routes.json"},
      {"verify-speed", "verify_speed_ordered.json"}, {"verify-source", "verify_source.json"},
      {"reconstruct", "reconstruct.json"},     {"operator-spectrum", "operator_spectrum_unit_ball.json"},
  };
  int compared = 0;
  std::vector<std::string> mismatched;
  for (const char *pass : {"a", "b"}) {
    std::vector<std::string> reported;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const auto &[cmd, file] = jobs[i];
      const fs::path out = root / pass / (std::to_string(i) + "_" + cmd);
      const int code = run_cli(cmd + " --config \"" + (configs / file).string() + "\" --seed 7 --out \"" + out.string() + "\"",
                               root / (std::string(pass) + std::to_string(i) + ".log"));
      if (code != 0) {
        o.check(false, cmd + " " + file + " exited " + std::to_string(code));
        return;
      }
      if (cmd == "simulate" || cmd == "spectrum" || cmd == "operator-spectrum") reported.push_back("\"" + out.string() + "\"");
    }
    std::string args = "report";
    for (const auto &r : reported) args += " " + r;
    args += " --out \"" + (root / pass / "report").string() + "\"";
    const int code = run_cli(args, root / (std::string(pass) + "_report.log"));
    if (code != 0) {
      o.check(false, "report exited " + std::to_string(code));
      return;
    }
  }
  for (const auto &entry : fs::directory_iterator(root / "a")) {
    const auto a = csv_files(entry.path()), b = csv_files(root / "b" / entry.path().filename());
    if (a.empty()) mismatched.push_back(entry.path().filename().string() + " (no CSV)");
    for (const auto &[name, bytes] : a) {
      ++compared;
      const auto it = b.find(name);
      if (it == b.end() || it->second != bytes) mismatched.push_back(entry.path().filename().string() + "/" + name);
    }
    if (a.size() != b.size()) mismatched.push_back(entry.path().filename().string() + " (file count)");
  }
  std::string list;
  for (const auto &m : mismatched) list += " " + m;
  o.check(mismatched.empty(), std::to_string(compared) + " CSV files over 8 commands bitwise identical" +
                                  (list.empty() ? "" : ", differing:" + list));
  fs::remove_all(root);
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome &)>>> criteria{
      {"forward solver vs spherical-means oracle", criterion1},
      {"small-k expansion fidelity", criterion2},
      {"C* invariance", criterion3},
      {"membership route equivalence", criterion4},
      {"odd-power integration-by-parts identity", criterion5},
      {"recursion vs closed form", criterion6},
      {"operator L spectrum", criterion7},
      {"cascade decay, moment rank, exclusion", criterion8},
      {"constructive reconstruction", criterion9},
      {"ordered speed perturbations", criterion10},
      {"CLI determinism", criterion11},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception &e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failures;
    std::printf("criterion %zu (%s): %s -- %s\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL", o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
