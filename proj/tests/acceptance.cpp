// Acceptance driver: one PASS/FAIL line per criterion. Arguments select a
// subset by number; the tmcf executable path is compiled in for the
// reproducibility run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "tmcf/config.hpp"
#include "tmcf/diagnostics.hpp"
#include "tmcf/ineq_verify.hpp"
#include "tmcf/simulation.hpp"
#include "tmcf/tm_variational.hpp"

using namespace tmcf;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "FAILED: ";
      detail << what << "; ";
    }
    pass = pass && ok;
  }
};

ScalarField white_noise(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ScalarField f(g);
  for (auto& v : f.values()) v = u(rng);
  return f;
}

ScalarField smooth(const Grid& g, std::uint64_t seed, double amplitude, int freq = 4) {
  RandomFieldSpec spec;
  spec.seed = seed;
  spec.amplitude = amplitude;
  spec.max_frequency = freq;
  return random_smooth_field(g, spec);
}

double max_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

double lp(const ScalarField& f, double p) {
  double s = 0.0;
  for (double v : f.values()) s += std::pow(std::abs(v), p);
  return std::pow(s * f.grid().cell_volume(), 1.0 / p);
}

// 1 ------------------------------------------------------------------------

void discrete_calculus(Outcome& o) {
  const Grid g = make_grid(64, 64, 1.0, 1.0);
  const int nx = g.nx(), ny = g.ny();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_div = 0.0, worst_sbp = 0.0, worst_lap = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const ScalarField f = white_noise(g, rng), q = white_noise(g, rng);
    VectorField v(g, VectorBc::neumann_derived);
    for (auto& x : v.xs()) x = u(rng);
    for (auto& y : v.ys()) y = u(rng);

    // int div v = boundary flux
    long double flux = 0, fscale = 0, bterm = 0, bscale = 0;
    for (int j = 0; j < ny; ++j) {
      const long double r = g.hy() * v.x(nx, j), l = g.hy() * v.x(0, j);
      flux += r - l;
      fscale += std::abs(r) + std::abs(l);
      bterm += r * f(nx - 1, j) - l * f(0, j);
      bscale += std::abs(r * f(nx - 1, j)) + std::abs(l * f(0, j));
    }
    for (int i = 0; i < nx; ++i) {
      const long double t = g.hx() * v.y(i, ny), b = g.hx() * v.y(i, 0);
      flux += t - b;
      fscale += std::abs(t) + std::abs(b);
      bterm += t * f(i, ny - 1) - b * f(i, 0);
      bscale += std::abs(t * f(i, ny - 1)) + std::abs(b * f(i, 0));
    }
    const ScalarField dv = divergence(v);
    worst_div = std::max(worst_div, static_cast<double>(std::abs(integrate(dv) - flux) / fscale));

    // int f div v + <grad f, v> = boundary term
    const VectorField gf = gradient_neumann(f);
    const double a = integrate(hadamard(f, dv)), b = inner(gf, v);
    worst_sbp = std::max(worst_sbp, static_cast<double>(std::abs(a + b - bterm) /
                                                        (std::abs(a) + std::abs(b) + bscale)));

    // int f Lap q = -<grad f, grad q>
    const double c = integrate(hadamard(f, laplacian_neumann(q))), d = inner(gf, gradient_neumann(q));
    worst_lap = std::max(worst_lap, std::abs(c + d) / (std::abs(c) + std::abs(d)));
  }
  o.detail << "max rel error: divergence theorem " << worst_div << ", by parts " << worst_sbp << ", Neumann Laplacian "
           << worst_lap << "; ";
  o.require(worst_div <= 1e-10, "divergence theorem");
  o.require(worst_sbp <= 1e-10, "summation by parts");
  o.require(worst_lap <= 1e-10, "Laplacian by parts");
}

// 2 ------------------------------------------------------------------------

void j_correctness(Outcome& o) {
  const Grid g = make_grid(48, 48, 1.0, 1.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> shift(-20.0, 20.0);

  double worst_shift = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const ScalarField f = smooth(g, s, 3.0);
    const double beta = 0.3 + 0.1 * static_cast<double>(s);
    ScalarField moved = f;
    moved += shift(rng);
    const double base = eval_J(beta, f);
    worst_shift = std::max(worst_shift, std::abs(eval_J(beta, moved) - base) / std::max(std::abs(base), 1.0));
  }

  double worst_fd = 0.0;
  const double eps = 1e-5;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const double beta = 0.5 + 0.3 * static_cast<double>(s);
    const ScalarField phi = smooth(g, 100 + s, 1.5), dir = smooth(g, 200 + s, 1.0);
    ScalarField plus = phi, minus = phi;
    for (std::size_t k = 0; k < phi.size(); ++k) plus[k] += eps * dir[k], minus[k] -= eps * dir[k];
    const double fd = static_cast<double>(
        (oracle::j_functional(beta, plus) - oracle::j_functional(beta, minus)) / (2.0L * eps));
    const double an = inner(grad_J(beta, phi), dir);
    worst_fd = std::max(worst_fd, std::abs(fd - an) / std::max(std::abs(an), 1e-3));
  }

  bool zero_exact = true;
  for (double beta : {0.1, 1.0, 2.0 * pi})
    for (double v : grad_J(beta, ScalarField(g, 0.0)).values()) zero_exact = zero_exact && v == 0.0;

  bool monotone = true;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const ScalarField f = smooth(g, 300 + s, 4.0, 6);
    double prev = eval_J(0.01, f);
    for (double beta = 0.012; beta <= 2.0 * pi; beta *= 1.2) {
      const double cur = eval_J(beta, f);
      monotone = monotone && cur <= prev;
      prev = cur;
    }
  }
  o.detail << "shift " << worst_shift << ", gradient vs central differences " << worst_fd << "; ";
  o.require(worst_shift <= 1e-10, "translation invariance");
  o.require(worst_fd <= 1e-6, "gradient vs finite differences");
  o.require(zero_exact, "gradient at zero is not exactly zero");
  o.require(monotone, "J increased with beta");
}

// 3 ------------------------------------------------------------------------

void minimizer_oracle(Outcome& o) {
  const Grid g = make_grid(4, 4, 1.0, 1.0);
  Beta0Options opts;
  for (double beta : {0.5, 1.0, 2.0, 4.0}) {
    const BetaClassification c = classify_beta(g, beta, opts);
    const double bf = oracle::brute_force_min_j(beta, 4, 4, 1.0, 1.0, 12, 11);
    o.detail << "beta " << beta << ": " << c.j_min << " vs " << bf << "; ";
    o.require(std::abs(c.j_min - bf) <= 1e-6, "objective mismatch at beta " + std::to_string(beta));
  }
}

// 4 ------------------------------------------------------------------------

void small_beta_collapse(Outcome& o) {
  const Grid g = make_grid(32, 32, 1.0, 1.0);
  Beta0Options opts;
  const BetaClassification c = classify_beta(g, 0.05, opts);
  double sup = 0.0, jmin = std::numeric_limits<double>::infinity();
  for (const auto& s : c.starts) sup = std::max(sup, s.sup_norm), jmin = std::min(jmin, s.j_min);
  o.detail << c.starts.size() << " starts, max sup " << sup << ", min J " << jmin << "; ";
  o.require(!c.starts.empty(), "no starts");
  o.require(sup <= 1e-6, "a start did not collapse");
  o.require(jmin >= -1e-8, "negative J");
}

// 5 ------------------------------------------------------------------------

void inequality_suite(Outcome& o) {
  const Grid g = make_grid(64, 64, 1.0, 1.0);
  Beta0Options bo;
  const Beta0Estimate est = estimate_beta0(g, bo);
  o.detail << "beta0_hat " << est.beta0_hat << "; ";
  RandomFieldSpec spec{4, 1.0, Positivity::exp_transform, 0};
  EnsembleParams params;
  params.beta0 = est.beta0_hat;
  params.master_seed = 1;
  for (IneqKind k : {IneqKind::ineq1, IneqKind::ineq2, IneqKind::corollary}) {
    const IneqReport rep = run_ensemble(g, k, 1000, spec, params);
    o.detail << to_string(k) << " min rel margin " << rep.min_relative_margin << "; ";
    o.require(rep.samples.size() == 1000 && rep.failures == 0, std::string("negative margin in ") + to_string(k));
  }
  double eq = 0.0;
  for (double cst : {0.01, 0.5, 1.0, 3.7, 42.0}) {
    const Ineq2Sides s2 = ineq2_sides(ScalarField(g, cst), est.beta0_hat);
    eq = std::max({eq, std::abs(s2.lhs), std::abs(s2.rhs)});
    const CorollarySides sc = corollary_bound_sides(ScalarField(g, std::log(cst)), est.beta0_hat);
    eq = std::max(eq, std::abs(sc.margin()) / sc.rhs);
  }
  o.detail << "constant-field equality gap " << eq << "; ";
  o.require(eq <= 1e-12, "equality cases");
}

// 6-8 ----------------------------------------------------------------------

struct DefaultRun {
  bool done = false;
  double t_end = 0.0;
  std::vector<DiagnosticsRecord> records;
  std::optional<SimState> final_state;
  double mass_drift = 0.0, c_increase = 0.0, min_n = 1e300, min_c = 1e300, max_div = 0.0;
  double nbar0 = 0.0, c0_int = 0.0, n0_dist = 0.0;
  std::string error;
};

DefaultRun run_default(double t_end) {
  auto doc = default_config_json();
  doc["t_end"] = t_end;
  const AppConfig cfg = parse_config(doc, Command::simulate);
  DefaultRun r;
  r.t_end = t_end;
  const double m0 = integrate(cfg.sim.n0);
  r.nbar0 = m0 / cfg.sim.grid.area();
  r.c0_int = integrate(cfg.sim.c0);
  r.n0_dist = integrate(map(cfg.sim.n0, [&](double v) { return std::abs(v - r.nbar0); }));
  RunOptions ro;
  ro.weights = cfg.weights();
  ro.observer = [&](const SimState& prev, const SimState& next, const DiagnosticsRecord&) {
    r.mass_drift = std::max(r.mass_drift, std::abs(integrate(next.n) - m0) / m0);
    for (double p : {1.0, 2.0})
      r.c_increase = std::max(r.c_increase, lp(next.c, p) - lp(prev.c, p));
    r.c_increase = std::max(r.c_increase, max_abs(next.c) - max_abs(prev.c));
    r.min_n = std::min(r.min_n, min_value(next.n));
    r.min_c = std::min(r.min_c, min_value(next.c));
    r.max_div = std::max(r.max_div, max_abs_divergence(next.u));
  };
  try {
    RunResult res = run_simulation(cfg.sim, ro);
    r.records = std::move(res.records);
    r.final_state = std::move(res.final_state);
    r.done = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

DefaultRun& default_run() {
  static DefaultRun r = run_default(5.0);
  return r;
}

void conservation(Outcome& o) {
  const DefaultRun& r = default_run();
  o.require(r.done, "run aborted: " + r.error);
  o.detail << "mass drift " << r.mass_drift << ", largest c norm increase " << r.c_increase << ", min n " << r.min_n
           << ", min c " << r.min_c << ", max |div u| " << r.max_div << "; ";
  o.require(r.mass_drift <= 1e-8, "mass drift");
  o.require(r.c_increase <= 1e-12, "c norm increased");
  o.require(r.min_n > 0.0, "n not positive");
  o.require(r.min_c >= 0.0, "c negative");
  o.require(r.max_div <= 1e-8, "divergence");
}

// Per-step |dKE + dt int |grad u|^2| / dt with buoyancy and chemotaxis off.
double ke_mismatch(double dt, double& cumulative_gap) {
  SimConfig cfg = parse_config(default_config_json(), Command::simulate).sim;
  cfg.switches.buoyancy = false;
  cfg.switches.chemotaxis = false;
  const Grid& g = cfg.grid;
  auto psi = [](double x, double y) { return std::pow(std::sin(pi * x) * std::sin(pi * y), 2); };
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i <= g.nx(); ++i) cfg.u0.x(i, j) = (psi(g.xf(i), g.yf(j + 1)) - psi(g.xf(i), g.yf(j))) / g.hy();
  for (int j = 0; j <= g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) cfg.u0.y(i, j) = -(psi(g.xf(i + 1), g.yf(j)) - psi(g.xf(i), g.yf(j))) / g.hx();
  Stepper st(cfg);
  SimState s = st.initial_state();
  const double ke_start = 0.5 * inner(s.u, s.u);
  double worst = 0.0, dissipated = 0.0;
  const int steps = static_cast<int>(std::lround(0.02 / dt));
  for (int k = 0; k < steps; ++k) {
    const double ke0 = 0.5 * inner(s.u, s.u);
    s = st.step(s, dt);
    const double d = dt * velocity_dirichlet_energy(s.u);
    dissipated += d;
    worst = std::max(worst, std::abs(0.5 * inner(s.u, s.u) - ke0 + d) / dt);
  }
  cumulative_gap = std::abs(ke_start - 0.5 * inner(s.u, s.u) - dissipated) / ke_start;
  return worst;
}

void budgets(Outcome& o) {
  const DefaultRun& r = default_run();
  o.require(r.done, "run aborted: " + r.error);
  if (r.done) {
    const double removed = r.c0_int - integrate(r.final_state->c);
    const double rel = std::abs(r.records.back().cum_nfc - removed) / removed;
    o.detail << "consumption tally vs int c0 - int c(t_end): rel " << rel << "; ";
    o.require(rel <= 1e-8, "consumption budget");
  }
  double gap1 = 0.0, gap2 = 0.0;
  const double m1 = ke_mismatch(2e-4, gap1), m2 = ke_mismatch(1e-4, gap2);
  o.detail << "kinetic energy mismatch per unit time " << m1 << " (dt 2e-4), " << m2 << " (dt 1e-4), ratio " << m2 / m1
           << "; cumulative rel gap " << gap1 << ", " << gap2 << "; ";
  o.require(m2 / m1 >= 0.35 && m2 / m1 <= 0.65, "kinetic energy mismatch is not first order in dt");
}

bool check_stabilization(const DefaultRun& r, std::ostringstream& d) {
  if (!r.done) {
    d << "t_end " << r.t_end << ": aborted (" << r.error << "); ";
    return false;
  }
  ThresholdParams th;
  th.delta0 = 1e-2;
  const auto t0 = detect_stabilization(r.records, th);
  bool stays = t0.has_value();
  if (t0)
    for (const auto& rec : r.records)
      if (rec.t >= *t0) stays = stays && rec.F <= th.delta0;
  const ConvergenceMetrics m = convergence_metrics(*r.final_state, r.nbar0);
  d << "t_end " << r.t_end << ": t0 " << (t0 ? std::to_string(*t0) : "none") << ", |n-nbar|_1 " << m.n_dist_l1
     << " (initial " << r.n0_dist << "), |c|_inf " << m.c_linf << ", |u|_2 " << m.u_l2 << "; ";
  return t0 && *t0 < r.t_end && stays && m.n_dist_l1 <= 0.01 * r.n0_dist && m.c_linf <= 1e-2 && m.u_l2 <= 1e-2;
}

void stabilization(Outcome& o) {
  if (check_stabilization(default_run(), o.detail)) return;
  o.detail << "retrying with t_end doubled; ";
  o.require(check_stabilization(run_default(10.0), o.detail), "no stabilization");
}

// 9 ------------------------------------------------------------------------

void equilibrium(Outcome& o) {
  SimConfig cfg = parse_config(default_config_json(), Command::simulate).sim;
  const double nbar0 = integrate(cfg.n0) / cfg.grid.area();
  cfg.n0 = ScalarField(cfg.grid, nbar0);
  cfg.c0 = ScalarField(cfg.grid, 0.0);
  cfg.u0 = VectorField(cfg.grid);
  Stepper st(cfg);
  const SimState s0 = st.initial_state();
  SimState s = s0;
  for (int k = 0; k < 100; ++k) s = st.step(s, cfg.effective_dt());
  const double dn = max_diff(s.n.values(), s0.n.values()), dc = max_diff(s.c.values(), s0.c.values());
  const double du = std::max(max_diff(s.u.xs(), s0.u.xs()), max_diff(s.u.ys(), s0.u.ys()));
  o.detail << "max change n " << dn << ", c " << dc << ", u " << du << "; ";
  o.require(dn <= 1e-12 && dc <= 1e-12 && du <= 1e-12, "equilibrium moved");
}

// 10 -----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

int sh(const std::string& cmd) { return std::system((cmd + " > /dev/null").c_str()); }

void reproducibility(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / "tmcf_acceptance_repro";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path out = root / "out";
  const std::string exe = TMCF_EXE;
  auto pipeline = [&] {
    fs::remove_all(out);
    const std::string o_ = out.string();
    return sh(exe + " estimate-beta0 --seed 7 --out " + o_ + "/est") == 0 &&
           sh(exe + " verify --seed 7 --beta0-report " + o_ + "/est/beta0-report.json --out " + o_ + "/verify") == 0 &&
           sh(exe + " simulate --seed 7 --out " + o_ + "/sim") == 0 &&
           sh(exe + " report --diagnostics " + o_ + "/sim/diagnostics.csv --out " + o_ + "/report") == 0;
  };
  o.require(pipeline(), "first pipeline run failed");
  fs::rename(out, root / "first");
  o.require(pipeline(), "second pipeline run failed");
  std::size_t files = 0;
  std::vector<std::string> differing;
  for (const auto& e : fs::recursive_directory_iterator(root / "first")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(e.path(), root / "first");
    if (slurp(e.path()) != slurp(out / rel)) differing.push_back(rel.string());
  }
  std::size_t second = 0;
  for (const auto& e : fs::recursive_directory_iterator(out)) second += e.is_regular_file();
  o.detail << files << " artifacts compared; ";
  o.require(files > 0 && files == second, "artifact sets differ");
  for (const auto& d : differing) o.require(false, "differs: " + d);
  if (o.pass) fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"discrete calculus identities on 1000 random fields", discrete_calculus},
      {"J invariance, gradient and monotonicity", j_correctness},
      {"4x4 minimizer vs brute force", minimizer_oracle},
      {"small-beta collapse", small_beta_collapse},
      {"inequality ensembles at beta0_hat", inequality_suite},
      {"default scenario conservation and monotonicity", conservation},
      {"consumption and kinetic energy budgets", budgets},
      {"stabilization and convergence", stabilization},
      {"equilibrium fixed point", equilibrium},
      {"byte-identical pipeline reruns", reproducibility},
  };
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::atoi(argv[k]));

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.contains(id)) continue;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[k].second(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("criterion %2d %s  %s (%.1f s)\n    %s\n", id, o.pass ? "PASS" : "FAIL", criteria[k].first, secs,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
