#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wavemoment/asymptotics.hpp"
#include "wavemoment/domain.hpp"
#include "wavemoment/expression.hpp"
#include "wavemoment/harmonic_moments.hpp"
#include "wavemoment/lattice.hpp"
#include "wavemoment/presets.hpp"
#include "wavemoment/spectral_transform.hpp"
#include "wavemoment/wave_forward.hpp"

namespace wavemoment::cli {

using nlohmann::json;

// Scenario schema. Every field has a default; the defaults describe the
// reference scene (48³ lattice on [-2, 2]³, ball of radius 1.5, unit speed,
// centred gaussian source).

struct LatticeSpec {
  double lo = -2.0;
  double hi = 2.0;
  int n = 48;
};

struct DomainSpec {
  std::string type = "ball"; // "ball" or "box"
  Vec3 center{0.0, 0.0, 0.0};
  double radius = 1.5;
  int sensors = 32;
  Vec3 lo{-1.5, -1.5, -1.5};
  Vec3 hi{1.5, 1.5, 1.5};
  double sensor_spacing = 0.5;
};

struct SourceSpec {
  std::string type = "gaussian"; // gaussian, ball_indicator, polynomial_bump, expression, a_element, generic, zero
  FieldPreset preset = GaussianBumpPreset{1.0, 0.2, {0.0, 0.0, 0.0}};
  std::uint64_t seed = 0;   // a_element / generic
  double clip_radius = 0.0; // > 0: zero outside the ball of this radius about the domain centre
};

struct SpeedSpec {
  std::string type = "constant"; // constant, bump, harmonic_perturbation, expression
  FieldPreset preset = ConstantPreset{1.0};
};

struct SpectralSpec {
  double epsilon = kDefaultEpsilon;
  double k_min = 0.02;
  double k_max = 0.2;
  int count = 10;
  std::string trace; // input trace for `spectrum`; empty simulates scene 1
};

struct SeriesCheckSpec {
  std::vector<int> orders;
  std::vector<double> k;
  bool enabled() const { return !orders.empty() && !k.empty(); }
};

struct ToleranceSpec {
  double trace = 1e-3;
  double cstar = 0.05;
  double moment = 1e-6;
  double cstar_zero = 1e-8;
  double l1 = 1e-3;
  double membership_moment = kMomentMembershipTolerance;
  double membership_flux = kFluxDiagnosticTolerance;
  double exclusion_floor = 1e-3;
  double rank = 1e-3;
};

struct SpectrumSpec {
  int count = 20;
  int block = 6;
  int max_dimension = 480;
  int rank_depth = 15;
};

struct CascadeSpec {
  int depth = 15;
  double moment_tolerance = 1e-10;
  double df_tolerance = 1e-10;
  double alpha_threshold = 1e-8;
  double group_tolerance = 1e-6;
};

struct ReconstructionSpec {
  double ridge = 1e-8;
  int per_axis = 4;
  double extent = 0.39;
  double radius = 0.55;
  double singular_floor = 1e-12;
  std::string trace; // input trace; empty simulates scene 1
};

struct MomentsSpec {
  int generated = 0; // fields per family for the membership route comparison
};

struct ScenarioConfig {
  LatticeSpec lattice;
  DomainSpec domain;
  SourceSpec source, source2;
  SpeedSpec speed, speed2;
  WaveRunConfig wave;
  SpectralSpec spectral;
  SeriesCheckSpec series;
  int basis_degree = 4;
  ToleranceSpec tolerances;
  SpectrumSpec spectrum;
  CascadeSpec cascade;
  ReconstructionSpec reconstruction;
  MomentsSpec moments;
  std::uint64_t seed = 0;

  std::filesystem::path base_dir; // relative input paths resolve here
  json normalized;                // every field with its effective value

  std::filesystem::path resolve(const std::string &p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
};

namespace detail {

inline std::string join_path(const std::vector<std::string> &path) {
  std::string s;
  for (const auto &p : path) s += (s.empty() ? "" : ".") + p;
  return s;
}

/// Line of the last key in `path`, found by scanning the keys in order.
inline std::optional<int> locate_key(const std::string &text, const std::vector<std::string> &path) {
  if (text.empty() || path.empty()) return std::nullopt;
  std::size_t pos = 0;
  for (const auto &key : path) {
    const auto p = text.find('"' + key + '"', pos);
    if (p == std::string::npos) return std::nullopt;
    pos = p;
  }
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

/// Object view that records defaults into the normalized output and rejects
/// unknown keys on finish().
class Node {
public:
  Node(const json &in, json &out, std::vector<std::string> path, const std::string &text, const std::string &source)
      : in_(in), out_(out), path_(std::move(path)), text_(text), source_(source) {
    if (!in_.is_object()) error({}, "expected an object");
  }

  [[noreturn]] void error(const std::string &key, const std::string &msg) const {
    auto path = path_;
    if (!key.empty()) path.push_back(key);
    std::string where = source_;
    if (const auto line = locate_key(text_, path)) where += ":" + std::to_string(*line);
    const std::string field = path.empty() ? "<root>" : join_path(path);
    fail(ErrorKind::Config, where + ": field '" + field + "': " + msg);
  }

  bool has(const std::string &key) const { return in_.contains(key); }

  double real(const std::string &key, double def) {
    const json *v = take(key);
    double x = def;
    if (v) {
      if (!v->is_number()) error(key, "expected a number");
      x = v->get<double>();
      if (!std::isfinite(x)) error(key, "expected a finite number");
    }
    out_[key] = x;
    return x;
  }

  std::int64_t integer(const std::string &key, std::int64_t def) {
    const json *v = take(key);
    std::int64_t x = def;
    if (v) {
      if (!v->is_number_integer()) error(key, "expected an integer");
      x = v->get<std::int64_t>();
    }
    out_[key] = x;
    return x;
  }

  bool boolean(const std::string &key, bool def) {
    const json *v = take(key);
    bool x = def;
    if (v) {
      if (!v->is_boolean()) error(key, "expected true or false");
      x = v->get<bool>();
    }
    out_[key] = x;
    return x;
  }

  std::string string(const std::string &key, const std::string &def) {
    const json *v = take(key);
    std::string x = def;
    if (v) {
      if (!v->is_string()) error(key, "expected a string");
      x = v->get<std::string>();
    }
    out_[key] = x;
    return x;
  }

  Vec3 vec3(const std::string &key, const Vec3 &def) {
    const json *v = take(key);
    Vec3 x = def;
    if (v) {
      if (!v->is_array() || v->size() != 3) error(key, "expected an array of three numbers");
      for (std::size_t i = 0; i < 3; ++i) {
        if (!(*v)[i].is_number()) error(key, "expected an array of three numbers");
        x[i] = (*v)[i].get<double>();
      }
    }
    out_[key] = {x[0], x[1], x[2]};
    return x;
  }

  std::vector<double> reals(const std::string &key) {
    const json *v = take(key);
    std::vector<double> x;
    if (v) {
      if (!v->is_array()) error(key, "expected an array of numbers");
      for (const auto &e : *v) {
        if (!e.is_number()) error(key, "expected an array of numbers");
        x.push_back(e.get<double>());
      }
    }
    out_[key] = x;
    return x;
  }

  std::vector<int> integers(const std::string &key) {
    const json *v = take(key);
    std::vector<int> x;
    if (v) {
      if (!v->is_array()) error(key, "expected an array of integers");
      for (const auto &e : *v) {
        if (!e.is_number_integer()) error(key, "expected an array of integers");
        x.push_back(e.get<int>());
      }
    }
    out_[key] = x;
    return x;
  }

  /// Nested object; a missing key yields an empty object (all defaults).
  Node child(const std::string &key) {
    static const json empty = json::object();
    const json *v = take(key);
    if (v && !v->is_object()) error(key, "expected an object");
    out_[key] = json::object();
    auto path = path_;
    path.push_back(key);
    return Node(v ? *v : empty, out_[key], std::move(path), text_, source_);
  }

  void check(bool ok, const std::string &key, const std::string &msg) const {
    if (!ok) error(key, msg);
  }

  void finish() const {
    for (auto it = in_.begin(); it != in_.end(); ++it)
      if (!used_.count(it.key())) error(it.key(), "unknown key");
  }

  const json &raw() const { return in_; }

private:
  const json *take(const std::string &key) {
    used_.insert(key);
    const auto it = in_.find(key);
    return it == in_.end() ? nullptr : &*it;
  }

  const json &in_;
  json &out_;
  std::vector<std::string> path_;
  const std::string &text_;
  const std::string &source_;
  std::set<std::string> used_;
};

inline void check_expression(Node &n, const std::string &key, const std::string &text) {
  try {
    (void)Expression(text);
  } catch (const Error &e) {
    n.error(key, e.what());
  }
}

inline SourceSpec parse_source(Node n, std::uint64_t seed) {
  SourceSpec s;
  s.type = n.string("type", "gaussian");
  if (s.type == "gaussian") {
    GaussianBumpPreset p;
    p.amplitude = n.real("amplitude", 1.0);
    p.sigma = n.real("sigma", 0.2);
    n.check(p.sigma > 0.0, "sigma", "must be positive");
    p.center = n.vec3("center", {0.0, 0.0, 0.0});
    s.preset = p;
  } else if (s.type == "ball_indicator") {
    BallIndicatorPreset p;
    p.amplitude = n.real("amplitude", 1.0);
    p.radius = n.real("radius", 0.5);
    n.check(p.radius > 0.0, "radius", "must be positive");
    p.center = n.vec3("center", {0.0, 0.0, 0.0});
    p.smoothing = n.real("smoothing", 0.0);
    n.check(p.smoothing >= 0.0, "smoothing", "must be non-negative");
    s.preset = p;
  } else if (s.type == "polynomial_bump") {
    PolynomialBumpPreset p;
    p.amplitude = n.real("amplitude", 1.0);
    p.radius = n.real("radius", 0.5);
    n.check(p.radius > 0.0, "radius", "must be positive");
    p.center = n.vec3("center", {0.0, 0.0, 0.0});
    p.power = static_cast<int>(n.integer("power", 4));
    n.check(p.power >= 1, "power", "must be at least 1");
    s.preset = p;
  } else if (s.type == "expression") {
    ExpressionPreset p;
    p.expression = n.string("expression", "0");
    check_expression(n, "expression", p.expression);
    s.preset = p;
  } else if (s.type == "a_element" || s.type == "generic") {
    const auto v = n.integer("seed", static_cast<std::int64_t>(seed));
    n.check(v >= 0, "seed", "must be non-negative");
    s.seed = static_cast<std::uint64_t>(v);
  } else if (s.type == "zero") {
    s.preset = ConstantPreset{0.0};
  } else {
    n.error("type", "unknown source type '" + s.type +
                        "' (expected gaussian, ball_indicator, polynomial_bump, expression, a_element, generic or zero)");
  }
  s.clip_radius = n.real("clip_radius", 0.0);
  n.check(s.clip_radius >= 0.0, "clip_radius", "must be non-negative");
  n.finish();
  return s;
}

inline SpeedSpec parse_speed(Node n) {
  SpeedSpec s;
  s.type = n.string("type", "constant");
  if (s.type == "constant") {
    ConstantPreset p;
    p.value = n.real("value", 1.0);
    n.check(p.value > 0.0, "value", "speed must be positive");
    s.preset = p;
  } else if (s.type == "bump") {
    // c = 1 + amplitude (1 - |x - center|²/radius²)^power
    PolynomialBumpPreset p;
    p.amplitude = n.real("amplitude", 0.1);
    n.check(p.amplitude > -1.0, "amplitude", "speed must stay positive (amplitude > -1)");
    p.radius = n.real("radius", 0.6);
    n.check(p.radius > 0.0, "radius", "must be positive");
    p.center = n.vec3("center", {0.0, 0.0, 0.0});
    p.power = static_cast<int>(n.integer("power", 3));
    n.check(p.power >= 1, "power", "must be at least 1");
    s.preset = p;
  } else if (s.type == "harmonic_perturbation") {
    // c⁻² = 1 + epsilon φ(x - center) on the ball (center, radius)
    HarmonicPerturbationPreset p;
    p.epsilon = n.real("epsilon", 0.05);
    p.harmonic = n.string("harmonic", "x");
    check_expression(n, "harmonic", p.harmonic);
    p.center = n.vec3("center", {0.0, 0.0, 0.0});
    p.radius = n.real("radius", 0.5);
    n.check(p.radius > 0.0, "radius", "must be positive");
    s.preset = p;
  } else if (s.type == "expression") {
    ExpressionPreset p;
    p.expression = n.string("expression", "1");
    check_expression(n, "expression", p.expression);
    s.preset = p;
  } else {
    n.error("type", "unknown speed type '" + s.type + "' (expected constant, bump, harmonic_perturbation or expression)");
  }
  n.finish();
  return s;
}

inline std::string line_of_offset(const std::string &text, std::size_t byte) {
  byte = std::min(byte, text.size());
  const auto nl = std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n');
  return std::to_string(nl + 1);
}

} // namespace detail

/// Parses and validates a scenario. `source` names the input in diagnostics.
inline ScenarioConfig parse_config(const std::string &text, const std::string &source = "<config>",
                                   std::optional<std::uint64_t> seed_override = std::nullopt) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::parse_error &e) {
    fail(ErrorKind::Config, source + ":" + detail::line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1) +
                                ": syntax error: " + e.what());
  }
  ScenarioConfig cfg;
  json out = json::object();
  detail::Node root(in, out, {}, text, source);

  const auto seed = root.integer("seed", 0);
  root.check(seed >= 0, "seed", "must be non-negative");
  cfg.seed = seed_override ? *seed_override : static_cast<std::uint64_t>(seed);
  out["seed"] = cfg.seed;

  {
    auto n = root.child("lattice");
    cfg.lattice.lo = n.real("lo", -2.0);
    cfg.lattice.hi = n.real("hi", 2.0);
    n.check(cfg.lattice.hi > cfg.lattice.lo, "hi", "must exceed lattice.lo");
    cfg.lattice.n = static_cast<int>(n.integer("n", 48));
    n.check(cfg.lattice.n >= 8 && cfg.lattice.n <= 96, "n", "must lie in [8, 96]");
    n.finish();
  }
  {
    auto n = root.child("domain");
    auto &d = cfg.domain;
    d.type = n.string("type", "ball");
    if (d.type == "ball") {
      d.center = n.vec3("center", {0.0, 0.0, 0.0});
      d.radius = n.real("radius", 1.5);
      n.check(d.radius > 0.0, "radius", "must be positive");
      d.sensors = static_cast<int>(n.integer("sensors", 32));
      n.check(d.sensors >= 4, "sensors", "needs at least 4 sensors");
    } else if (d.type == "box") {
      d.lo = n.vec3("lo", {-1.5, -1.5, -1.5});
      d.hi = n.vec3("hi", {1.5, 1.5, 1.5});
      for (int i = 0; i < 3; ++i) n.check(d.hi[i] > d.lo[i], "hi", "must exceed domain.lo componentwise");
      d.sensor_spacing = n.real("sensor_spacing", 0.5);
      n.check(d.sensor_spacing > 0.0, "sensor_spacing", "must be positive");
    } else {
      n.error("type", "unknown domain type '" + d.type + "' (expected ball or box)");
    }
    n.finish();
  }
  cfg.source = detail::parse_source(root.child("source"), cfg.seed);
  cfg.speed = detail::parse_speed(root.child("speed"));
  {
    // Scene 2 defaults to a copy of scene 1.
    auto n = root.child("scene2");
    const json src1 = out["source"], spd1 = out["speed"];
    if (n.has("source")) {
      cfg.source2 = detail::parse_source(n.child("source"), cfg.seed);
    } else {
      cfg.source2 = cfg.source;
      out["scene2"]["source"] = src1;
    }
    if (n.has("speed")) {
      cfg.speed2 = detail::parse_speed(n.child("speed"));
    } else {
      cfg.speed2 = cfg.speed;
      out["scene2"]["speed"] = spd1;
    }
    n.finish();
  }
  {
    auto n = root.child("wave");
    auto &w = cfg.wave;
    w.t_final = n.real("t_final", 6.0);
    n.check(w.t_final > 0.0, "t_final", "must be positive");
    w.dt = n.real("dt", 0.0);
    n.check(w.dt >= 0.0, "dt", "must be non-negative (0 selects the CFL step)");
    w.order = static_cast<int>(n.integer("order", 4));
    n.check(w.order == 2 || w.order == 4, "order", "must be 2 or 4");
    w.record_stride = static_cast<int>(n.integer("record_stride", 4));
    n.check(w.record_stride >= 1, "record_stride", "must be at least 1");
    w.absorbing = n.boolean("absorbing", true);
    w.pml_thickness = n.real("pml_thickness", 1.2);
    n.check(w.pml_thickness > 0.0, "pml_thickness", "must be positive");
    w.pml_strength = n.real("pml_strength", 20.0);
    n.check(w.pml_strength >= 0.0, "pml_strength", "must be non-negative");
    w.pml_buffer = n.real("pml_buffer", -1.0);
    n.finish();
  }
  {
    auto n = root.child("spectral");
    auto &s = cfg.spectral;
    s.epsilon = n.real("epsilon", kDefaultEpsilon);
    n.check(s.epsilon > 0.0, "epsilon", "must be positive");
    s.k_min = n.real("k_min", 0.02);
    n.check(s.k_min > 0.0, "k_min", "must be positive");
    s.k_max = n.real("k_max", 0.2);
    n.check(s.k_max >= s.k_min, "k_max", "must be at least spectral.k_min");
    n.check(s.k_max <= s.epsilon, "k_max", "must not exceed spectral.epsilon");
    s.count = static_cast<int>(n.integer("count", 10));
    n.check(s.count >= 3, "count", "the two-term fit needs at least 3 frequencies");
    s.trace = n.string("trace", "");
    n.finish();
  }
  {
    auto n = root.child("series_check");
    cfg.series.orders = n.integers("orders");
    for (int o : cfg.series.orders) n.check(o >= 1 && o <= kMaxExpansionOrder, "orders", "orders must lie in [1, 7]");
    cfg.series.k = n.reals("k");
    for (double k : cfg.series.k)
      n.check(k > 0.0 && k <= cfg.spectral.epsilon, "k", "wavenumbers must lie in (0, spectral.epsilon]");
    n.check(cfg.series.orders.empty() == cfg.series.k.empty(), "k", "orders and k must both be given or both omitted");
    n.finish();
  }
  cfg.basis_degree = static_cast<int>(root.integer("basis_degree", 4));
  root.check(cfg.basis_degree >= 0 && cfg.basis_degree <= 12, "basis_degree", "must lie in [0, 12]");
  {
    auto n = root.child("tolerances");
    auto &t = cfg.tolerances;
    auto pos = [&](const char *key, double def) {
      const double v = n.real(key, def);
      n.check(v > 0.0, key, "must be positive");
      return v;
    };
    t.trace = pos("trace", 1e-3);
    t.cstar = pos("cstar", 0.05);
    t.moment = pos("moment", 1e-6);
    t.cstar_zero = pos("cstar_zero", 1e-8);
    t.l1 = pos("l1", 1e-3);
    t.membership_moment = pos("membership_moment", kMomentMembershipTolerance);
    t.membership_flux = pos("membership_flux", kFluxDiagnosticTolerance);
    t.exclusion_floor = pos("exclusion_floor", 1e-3);
    t.rank = pos("rank", 1e-3);
    n.finish();
  }
  {
    auto n = root.child("spectrum");
    auto &s = cfg.spectrum;
    s.count = static_cast<int>(n.integer("count", 20));
    n.check(s.count >= 1 && s.count <= 40, "count", "must lie in [1, 40]");
    s.block = static_cast<int>(n.integer("block", 6));
    n.check(s.block >= 1, "block", "must be at least 1");
    s.max_dimension = static_cast<int>(n.integer("max_dimension", 480));
    n.check(s.max_dimension >= s.count, "max_dimension", "must be at least spectrum.count");
    s.rank_depth = static_cast<int>(n.integer("rank_depth", 15));
    n.check(s.rank_depth >= 0, "rank_depth", "must be non-negative");
    n.finish();
  }
  {
    auto n = root.child("cascade");
    auto &c = cfg.cascade;
    c.depth = static_cast<int>(n.integer("depth", 15));
    n.check(c.depth >= 1, "depth", "must be at least 1");
    c.moment_tolerance = n.real("moment_tolerance", 1e-10);
    c.df_tolerance = n.real("df_tolerance", 1e-10);
    c.alpha_threshold = n.real("alpha_threshold", 1e-8);
    c.group_tolerance = n.real("group_tolerance", 1e-6);
    n.finish();
  }
  {
    auto n = root.child("reconstruction");
    auto &r = cfg.reconstruction;
    r.ridge = n.real("ridge", 1e-8);
    n.check(r.ridge >= 0.0, "ridge", "must be non-negative");
    r.per_axis = static_cast<int>(n.integer("per_axis", 4));
    n.check(r.per_axis >= 1 && r.per_axis <= 8, "per_axis", "must lie in [1, 8]");
    r.extent = n.real("extent", 0.39);
    n.check(r.extent >= 0.0, "extent", "must be non-negative");
    r.radius = n.real("radius", 0.55);
    n.check(r.radius > 0.0, "radius", "must be positive");
    r.singular_floor = n.real("singular_floor", 1e-12);
    n.check(r.singular_floor >= 0.0, "singular_floor", "must be non-negative");
    r.trace = n.string("trace", "");
    n.finish();
  }
  {
    auto n = root.child("moments");
    cfg.moments.generated = static_cast<int>(n.integer("generated", 0));
    n.check(cfg.moments.generated == 0 || cfg.moments.generated >= 2, "generated",
            "must be 0 (off) or at least 2 fields per family");
    n.finish();
  }
  root.finish();
  cfg.normalized = std::move(out);
  return cfg;
}

inline ScenarioConfig load_config(const std::filesystem::path &path,
                                  std::optional<std::uint64_t> seed_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto cfg = parse_config(ss.str(), path.string(), seed_override);
  cfg.base_dir = std::filesystem::absolute(path).parent_path();
  return cfg;
}

// ---------------------------------------------------------------------------
// Scenario construction

inline Lattice make_lattice(const ScenarioConfig &cfg) {
  return build_cubic_lattice(cfg.lattice.lo, cfg.lattice.hi, cfg.lattice.n);
}

inline Domain make_domain(const ScenarioConfig &cfg) {
  const auto &d = cfg.domain;
  if (d.type == "box") return Domain::box(d.lo, d.hi, d.sensor_spacing);
  return Domain::ball(d.center, d.radius, d.sensors);
}

inline RealField make_source(const SourceSpec &s, const Lattice &lat, const Domain &domain) {
  RealField f = s.type == "a_element" ? generate_A_element(s.seed, domain, lat)
                : s.type == "generic" ? generate_generic_field(s.seed, domain, lat)
                                      : sample_field(s.preset, lat);
  if (s.clip_radius > 0.0) {
    f = restrict_to(f, Domain::ball(domain.center(), s.clip_radius));
    f.mask() = f.nonzero_mask();
  }
  return f;
}

inline SpeedModel make_speed(const SpeedSpec &s, const Lattice &lat) {
  if (const auto *c = std::get_if<ConstantPreset>(&s.preset)) return SpeedModel::constant(lat, c->value);
  if (std::holds_alternative<HarmonicPerturbationPreset>(s.preset))
    return SpeedModel::from_inverse_square(sample_field(s.preset, lat));
  RealField c = sample_field(s.preset, lat);
  if (std::holds_alternative<PolynomialBumpPreset>(s.preset)) c.values().array() += 1.0;
  return SpeedModel(std::move(c));
}

/// True when the c ≡ 1 closed-form oracle applies to scene 1.
inline bool radial_unit_scene(const ScenarioConfig &cfg) {
  const auto *c = std::get_if<ConstantPreset>(&cfg.speed.preset);
  if (!c || c->value != 1.0 || cfg.source.clip_radius > 0.0) return false;
  if (cfg.source.type == "a_element" || cfg.source.type == "generic") return false;
  try {
    (void)radial_profile(cfg.source.preset);
    return true;
  } catch (const Error &) {
    return false;
  }
}

} // namespace wavemoment::cli
