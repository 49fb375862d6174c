#include "tmcf/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace tmcf {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Command c) {
  switch (c) {
    case Command::estimate_beta0: return "estimate-beta0";
    case Command::verify: return "verify";
    case Command::simulate: return "simulate";
    case Command::report: return "report";
  }
  return "?";
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[md[k] >> 4];
    out += hex[md[k] & 15];
  }
  return out;
}

json default_config_json() {
  return json::parse(R"({
    "grid": {"nx": 64, "ny": 64, "lx": 1.0, "ly": 1.0},
    "dt": 0.0,
    "t_end": 5.0,
    "diag_every": 100,
    "n0": {"kind": "cos_product", "base": 1.0, "amplitude": 0.5, "kx": 1, "ky": 1},
    "c0": {"kind": "cos_product", "base": 0.5, "amplitude": 0.2, "kx": 0, "ky": 1},
    "u0": {"kind": "zero"},
    "phi": {"kind": "linear", "g": 0.1},
    "f": {"kind": "linear"},
    "sensitivity": {"a_diag": 1.0, "b_rot": 0.5, "s0": 2.0, "s0_slope": 0.0, "eps": 0.1, "boundary_band": 0.05}
  })");
}

namespace {

// Reads one JSON object, remembering which keys were consumed so unknown
// keys can be rejected, and records the value actually used.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("syntax", path_ + " must be an object");
  }

  double num(const std::string& key, double def) {
    double v = def;
    if (auto* x = find(key)) {
      if (!x->is_number()) throw ConfigError("syntax", where(key) + " must be a number");
      v = x->get<double>();
    }
    if (!std::isfinite(v)) throw ConfigError("syntax", where(key) + " must be finite");
    out_[key] = v;
    return v;
  }

  std::int64_t integer(const std::string& key, std::int64_t def) {
    std::int64_t v = def;
    if (auto* x = find(key)) {
      if (!x->is_number_integer()) throw ConfigError("syntax", where(key) + " must be an integer");
      v = x->get<std::int64_t>();
    }
    out_[key] = v;
    return v;
  }

  bool flag(const std::string& key, bool def) {
    bool v = def;
    if (auto* x = find(key)) {
      if (!x->is_boolean()) throw ConfigError("syntax", where(key) + " must be true or false");
      v = x->get<bool>();
    }
    out_[key] = v;
    return v;
  }

  std::string str(const std::string& key, const std::string& def) {
    std::string v = def;
    if (auto* x = find(key)) {
      if (!x->is_string()) throw ConfigError("syntax", where(key) + " must be a string");
      v = x->get<std::string>();
    }
    out_[key] = v;
    return v;
  }

  std::vector<double> numbers(const std::string& key) {
    auto* x = find(key);
    if (!x || !x->is_array()) throw ConfigError("syntax", where(key) + " must be an array of numbers");
    std::vector<double> v;
    for (const auto& e : *x) {
      if (!e.is_number()) throw ConfigError("syntax", where(key) + " must be an array of numbers");
      v.push_back(e.get<double>());
    }
    out_[key] = v;
    return v;
  }

  const json& child(const std::string& key, const json& def) {
    if (auto* x = find(key)) return *x;
    return def;
  }
  void put(const std::string& key, json v) { out_[key] = std::move(v); }
  bool has(const std::string& key) const { return j_.contains(key); }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  json finish() {
    for (const auto& [k, _] : j_.items())
      if (!seen_.contains(k)) throw ConfigError("unknown_key", "unknown setting " + where(k));
    return out_;
  }

 private:
  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
  json out_ = json::object();
};

Grid parse_grid(Section& parent, const std::string& key, json& canon) {
  static const json empty = json::object();
  Section s(parent.child(key, empty), parent.where(key));
  const auto nx = s.integer("nx", 64), ny = s.integer("ny", 64);
  const double lx = s.num("lx", 1.0), ly = s.num("ly", 1.0);
  if (nx < 2 || ny < 2 || nx > 100000 || ny > 100000)
    throw ConfigError("grid", s.where("nx/ny") + " must be at least 2");
  if (!(lx > 0.0) || !(ly > 0.0)) throw ConfigError("grid", s.where("lx/ly") + " must be positive");
  canon[key] = s.finish();
  return make_grid(static_cast<int>(nx), static_cast<int>(ny), lx, ly);
}

ScalarField read_csv_field(const fs::path& base, const std::string& path, const Grid& g, const std::string& what) {
  const fs::path p = fs::path(path).is_absolute() ? fs::path(path) : base / path;
  std::ifstream is(p);
  if (!is) throw ConfigError("io", "cannot read " + what + " from " + p.string());
  try {
    return read_scalar_csv(is, g);
  } catch (const std::exception& e) {
    throw ConfigError("io", what + " from " + p.string() + ": " + e.what());
  }
}

ScalarField parse_scalar_init(Section& parent, const std::string& key, const json& def, const Grid& g,
                              const fs::path& base, json& canon) {
  Section s(parent.child(key, def), parent.where(key));
  const std::string kind = s.str("kind", "constant");
  const double pi = std::numbers::pi;
  ScalarField f(g);
  if (kind == "cos_product") {
    const double base_v = s.num("base", 1.0), amp = s.num("amplitude", 0.0);
    const auto kx = s.integer("kx", 1), ky = s.integer("ky", 1);
    f = sample(g, [&](double x, double y) {
      return base_v + amp * std::cos(kx * pi * x / g.lx()) * std::cos(ky * pi * y / g.ly());
    });
  } else if (kind == "constant") {
    f = ScalarField(g, s.num("value", 1.0));
  } else if (kind == "random") {
    const double base_v = s.num("base", 1.0);
    RandomFieldSpec spec;
    spec.amplitude = s.num("amplitude", 0.1);
    spec.max_frequency = static_cast<int>(s.integer("max_frequency", 4));
    spec.seed = static_cast<std::uint64_t>(s.integer("seed", 0));
    if (spec.max_frequency < 0) throw ConfigError("syntax", s.where("max_frequency") + " must be >= 0");
    f = random_smooth_field(g, spec);
    f += base_v;
  } else if (kind == "csv") {
    f = read_csv_field(base, s.str("path", ""), g, s.where("path"));
  } else {
    throw ConfigError("syntax", s.where("kind") + " must be cos_product, constant, random or csv");
  }
  canon[key] = s.finish();
  return f;
}

VectorField parse_velocity_init(Section& parent, const json& def, const Grid& g, json& canon) {
  Section s(parent.child("u0", def), parent.where("u0"));
  const std::string kind = s.str("kind", "zero");
  VectorField u(g);
  if (kind == "vortex") {
    // Discrete curl of a corner-sampled stream function: divergence free
    // and zero on the walls.
    const double amp = s.num("amplitude", 0.1);
    const double pi = std::numbers::pi;
    auto psi = [&](int i, int j) {
      const double sx = std::sin(pi * g.xf(i) / g.lx()), sy = std::sin(pi * g.yf(j) / g.ly());
      return amp * sx * sx * sy * sy;
    };
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i <= g.nx(); ++i) u.x(i, j) = (psi(i, j + 1) - psi(i, j)) / g.hy();
    for (int j = 0; j <= g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i) u.y(i, j) = -(psi(i + 1, j) - psi(i, j)) / g.hx();
    for (int j = 0; j < g.ny(); ++j) u.x(0, j) = u.x(g.nx(), j) = 0.0;
    for (int i = 0; i < g.nx(); ++i) u.y(i, 0) = u.y(i, g.ny()) = 0.0;
  } else if (kind != "zero") {
    throw ConfigError("syntax", s.where("kind") + " must be zero or vortex");
  }
  canon["u0"] = s.finish();
  return u;
}

ScalarField parse_potential(Section& parent, const json& def, const Grid& g, json& canon) {
  Section s(parent.child("phi", def), parent.where("phi"));
  const std::string kind = s.str("kind", "linear");
  ScalarField f(g);
  if (kind == "linear") {
    const double gv = s.num("g", 0.1);
    f = sample(g, [&](double, double y) { return gv * y; });
  } else if (kind == "bump") {
    const double amp = s.num("amplitude", 0.1), x0 = s.num("x0", 0.5 * g.lx()), y0 = s.num("y0", 0.5 * g.ly());
    const double w = s.num("width", 0.2);
    if (!(w > 0.0)) throw ConfigError("phi_regular", s.where("width") + " must be positive");
    f = sample(g, [&](double x, double y) { return amp * std::exp(-((x - x0) * (x - x0) + (y - y0) * (y - y0)) / (w * w)); });
  } else if (kind != "zero") {
    throw ConfigError("syntax", s.where("kind") + " must be linear, bump or zero");
  }
  if (!all_finite(f)) throw ConfigError("phi_regular", "gravitational potential must be finite and smooth");
  canon["phi"] = s.finish();
  return f;
}

Consumption parse_consumption(Section& parent, const json& def, double c_max, json& canon) {
  Section s(parent.child("f", def), parent.where("f"));
  const std::string kind = s.str("kind", "linear");
  Consumption f;
  if (kind == "table") {
    f.kind = Consumption::Kind::table;
    f.c = s.numbers("c");
    f.f = s.numbers("f");
    if (f.c.size() < 2 || f.c.size() != f.f.size())
      throw ConfigError("syntax", s.where("c/f") + " need equal lengths of at least 2");
    for (std::size_t k = 1; k < f.c.size(); ++k)
      if (!(f.c[k] > f.c[k - 1])) throw ConfigError("syntax", s.where("c") + " must be strictly increasing");
    if (f.c.front() != 0.0) throw ConfigError("syntax", s.where("c") + " must start at 0");
  } else if (kind != "linear") {
    throw ConfigError("syntax", s.where("kind") + " must be linear or table");
  }
  canon["f"] = s.finish();
  if (f(0.0) != 0.0) throw ConfigError("f_zero_at_origin", "consumption rate must satisfy f(0) = 0");
  const double top = std::max(c_max, f.kind == Consumption::Kind::table ? f.c.back() : 0.0);
  for (int k = 1; k <= 1000; ++k) {
    const double c = top * k / 1000.0;
    if (!(f(c) > 0.0))
      throw ConfigError("f_positive", "consumption rate must be positive on (0, c_max]; f(" + std::to_string(c) +
                                          ") = " + std::to_string(f(c)));
  }
  return f;
}

SensitivityParams parse_sensitivity(Section& parent, const json& def, json& canon) {
  Section s(parent.child("sensitivity", def), parent.where("sensitivity"));
  SensitivityParams p;
  p.a_diag = s.num("a_diag", p.a_diag);
  p.b_rot = s.num("b_rot", p.b_rot);
  p.s0 = s.num("s0", p.s0);
  p.s0_slope = s.num("s0_slope", p.s0_slope);
  p.eps = s.num("eps", p.eps);
  p.boundary_band = s.num("boundary_band", p.boundary_band);
  canon["sensitivity"] = s.finish();
  if (!(p.a_diag > 0.0)) throw ConfigError("sensitivity_positive", "a_diag must be positive");
  if (!(p.s0 >= 0.0) || !(p.s0_slope >= 0.0))
    throw ConfigError("sensitivity_bound", "the sensitivity cap s0 + s0_slope c must be nonnegative and nondecreasing");
  if (!(p.eps > 0.0 && p.eps < 1.0)) throw ConfigError("sensitivity_eps", "eps must lie in (0, 1)");
  if (!(p.boundary_band >= 0.0)) throw ConfigError("sensitivity_band", "boundary_band must be nonnegative");
  return p;
}

}  // namespace

AppConfig parse_config(const json& doc, Command cmd, const fs::path& base_dir) {
  const json defaults = default_config_json();
  AppConfig cfg;
  json canon = json::object();
  Section top(doc, "");

  SimConfig& sim = cfg.sim;
  sim.grid = parse_grid(top, "grid", canon);
  const Grid& g = sim.grid;
  sim.dt = top.num("dt", 0.0);
  sim.t_end = top.num("t_end", 5.0);
  const auto diag_every = top.integer("diag_every", 100);
  if (sim.dt < 0.0) throw ConfigError("time", "dt must be nonnegative (0 selects 0.25 h^2)");
  if (sim.t_end < 0.0) throw ConfigError("time", "t_end must be nonnegative");
  if (diag_every < 1 || diag_every > 1'000'000'000) throw ConfigError("time", "diag_every must be at least 1");
  sim.diag_every = static_cast<int>(diag_every);
  canon["dt"] = sim.dt;
  canon["t_end"] = sim.t_end;
  canon["diag_every"] = diag_every;

  sim.n0 = parse_scalar_init(top, "n0", defaults["n0"], g, base_dir, canon);
  sim.c0 = parse_scalar_init(top, "c0", defaults["c0"], g, base_dir, canon);
  if (!all_finite(sim.n0) || !(min_value(sim.n0) > 0.0))
    throw ConfigError("n0_positive", "initial cell density must be strictly positive on the closed domain; min = " +
                                         std::to_string(min_value(sim.n0)));
  if (!all_finite(sim.c0) || !(min_value(sim.c0) > 0.0))
    throw ConfigError("c0_positive",
                      "initial concentration must be strictly positive; min = " + std::to_string(min_value(sim.c0)));
  sim.u0 = parse_velocity_init(top, defaults["u0"], g, canon);
  sim.phi = parse_potential(top, defaults["phi"], g, canon);
  sim.f = parse_consumption(top, defaults["f"], max_value(sim.c0), canon);
  sim.sensitivity = parse_sensitivity(top, defaults["sensitivity"], canon);

  {
    static const json empty = json::object();
    Section s(top.child("switches", empty), "switches");
    sim.switches.chemotaxis = s.flag("chemotaxis", true);
    sim.switches.buoyancy = s.flag("buoyancy", true);
    sim.switches.convection = s.flag("convection", true);
    canon["switches"] = s.finish();
  }
  sim.fluid_weight_C = top.num("fluid_weight_C", 1.0);
  if (!(sim.fluid_weight_C >= 1.0)) throw ConfigError("fluid_weight", "fluid_weight_C must be at least 1");
  canon["fluid_weight_C"] = sim.fluid_weight_C;
  {
    static const json empty = json::object();
    Section s(top.child("tolerances", empty), "tolerances");
    sim.mass_tol = s.num("mass", 1e-8);
    sim.proj_tol = s.num("divergence", 1e-8);
    if (!(sim.mass_tol > 0.0) || !(sim.proj_tol > 0.0)) throw ConfigError("tolerances", "tolerances must be positive");
    canon["tolerances"] = s.finish();
  }
  {
    static const json empty = json::object();
    Section s(top.child("thresholds", empty), "thresholds");
    cfg.thresholds.delta0 = s.num("delta0", 1e-2);
    const auto window = s.integer("stabilization_window", 0);
    if (!(cfg.thresholds.delta0 > 0.0)) throw ConfigError("thresholds", "delta0 must be positive");
    if (window < 0) throw ConfigError("thresholds", "stabilization_window must be nonnegative");
    cfg.thresholds.stabilization_window = static_cast<std::size_t>(window);
    canon["thresholds"] = s.finish();
  }
  const auto seed = top.integer("seed", 1);
  if (seed < 0) throw ConfigError("syntax", "seed must be nonnegative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  canon["seed"] = seed;

  {
    static const json empty = json::object();
    Section s(top.child("estimate", empty), "estimate");
    json sub = json::object();
    cfg.estimate.grid = parse_grid(s, "grid", sub);
    Beta0Options& o = cfg.estimate.options;
    o.beta_hi_start = s.num("beta_hi_start", o.beta_hi_start);
    o.multistarts = static_cast<int>(s.integer("multistarts", o.multistarts));
    o.tol_zero = s.num("tol_zero", o.tol_zero);
    o.bisect_steps = static_cast<int>(s.integer("bisect_steps", o.bisect_steps));
    o.minimize.max_iter = static_cast<int>(s.integer("max_iter", o.minimize.max_iter));
    o.minimize.tol = s.num("tol", o.minimize.tol);
    if (!(o.beta_hi_start > 0.0) || o.multistarts < 0 || !(o.tol_zero > 0.0) || o.bisect_steps < 1 ||
        o.minimize.max_iter < 1 || !(o.minimize.tol > 0.0))
      throw ConfigError("estimate", "estimate settings must be positive (multistarts may be 0)");
    json rest = s.finish();
    rest.update(sub);
    canon["estimate"] = rest;
  }
  {
    static const json empty = json::object();
    Section s(top.child("verify", empty), "verify");
    json sub = json::object();
    VerifySettings& v = cfg.verify;
    v.grid = parse_grid(s, "grid", sub);
    v.a = s.num("a", 1.0);
    if (const json& b = s.child("beta0", json()); !b.is_null()) {
      if (!b.is_number()) throw ConfigError("syntax", "verify.beta0 must be a number or null");
      v.beta0 = b.get<double>();
      s.put("beta0", *v.beta0);
    } else {
      s.put("beta0", nullptr);
    }
    v.beta0_report = s.str("beta0_report", "");
    const auto count = s.integer("count", 1000);
    if (count < 0) throw ConfigError("verify", "count must be nonnegative");
    v.count = static_cast<std::size_t>(count);
    if (s.has("kinds")) {
      v.kinds.clear();
      const json& kinds = s.child("kinds", json());
      if (!kinds.is_array()) throw ConfigError("syntax", "verify.kinds must be an array");
      for (const auto& k : kinds) {
        try {
          v.kinds.push_back(ineq_kind_from_string(k.get<std::string>()));
        } catch (const std::exception&) {
          throw ConfigError("syntax", "verify.kinds entries must be ineq1, ineq2 or corollary");
        }
      }
    }
    json kinds = json::array();
    for (auto k : v.kinds) kinds.push_back(to_string(k));
    s.put("kinds", kinds);
    v.fields.max_frequency = static_cast<int>(s.integer("max_frequency", 4));
    v.fields.amplitude = s.num("amplitude", 1.0);
    const std::string pos = s.str("positivity", "exp");
    if (pos == "exp") v.fields.positivity = Positivity::exp_transform;
    else if (pos == "shift_clip") v.fields.positivity = Positivity::shift_clip;
    else throw ConfigError("syntax", "verify.positivity must be exp or shift_clip");
    v.rel_tol = s.num("rel_tol", 1e-8);
    if (v.fields.max_frequency < 0 || !(v.fields.amplitude >= 0.0) || !(v.rel_tol >= 0.0))
      throw ConfigError("verify", "field settings must be nonnegative");
    json rest = s.finish();
    rest.update(sub);
    canon["verify"] = rest;

    if (cmd == Command::verify) {
      if (!(v.a > 0.0)) throw ConfigError("verify_a_positive", "the weight a must be positive");
      if (!v.beta0 && !v.beta0_report.empty()) {
        const fs::path p = fs::path(v.beta0_report).is_absolute() ? fs::path(v.beta0_report) : base_dir / v.beta0_report;
        std::ifstream is(p);
        if (!is) throw ConfigError("io", "cannot read beta0 report " + p.string());
        try {
          v.beta0 = json::parse(is).at("beta0_hat").get<double>();
        } catch (const std::exception& e) {
          throw ConfigError("io", "beta0 report " + p.string() + ": " + e.what());
        }
      }
      if (!v.beta0) throw ConfigError("verify_beta0_missing", "verify needs verify.beta0 or a beta0 report");
      if (!(*v.beta0 > 0.0)) throw ConfigError("verify_beta0_positive", "beta0 must be positive");
    }
  }

  top.finish();
  cfg.canonical = canon;
  cfg.hash = sha256_hex(canon.dump());
  return cfg;
}

AppConfig load_config(const fs::path& path, Command cmd) {
  std::ifstream is(path);
  if (!is) throw ConfigError("io", "cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("syntax", path.string() + ": " + e.what());
  }
  return parse_config(doc, cmd, path.parent_path());
}

}  // namespace tmcf
