#include "tmcf/ineq_verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

#include "csv_util.hpp"
#include "tmcf/parallel.hpp"
#include "tmcf/tm_variational.hpp"

namespace tmcf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double grad_energy(const ScalarField& f) {
  const VectorField gr = gradient_neumann(f);
  return inner(gr, gr);
}

void require_positive(const ScalarField& psi) {
  if (!(min_value(psi) > 0.0)) throw std::invalid_argument("psi must be strictly positive");
}

double relative_entropy(const ScalarField& psi) {
  const double pbar = mean(psi);
  return integrate(map(psi, [pbar](double v) { return v * std::log(v / pbar); }));
}

}  // namespace

std::vector<double> draw_cosine_coefficients(const RandomFieldSpec& spec) {
  if (spec.max_frequency < 0) throw std::invalid_argument("max_frequency must be nonnegative");
  const int f = spec.max_frequency;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> a(static_cast<std::size_t>((f + 1) * (f + 1)));
  for (int j = 0; j <= f; ++j)
    for (int k = 0; k <= f; ++k)
      a[static_cast<std::size_t>(j * (f + 1) + k)] = normal(rng) * spec.amplitude / (1.0 + j * j + k * k);
  return a;
}

ScalarField cosine_series(const Grid& g, const std::vector<double>& coeffs, int max_frequency) {
  const int f = max_frequency;
  if (coeffs.size() != static_cast<std::size_t>((f + 1) * (f + 1)))
    throw std::invalid_argument("coefficient count does not match max_frequency");
  // Separable evaluation: tabulate the 1D cosines once.
  std::vector<double> cx(static_cast<std::size_t>((f + 1) * g.nx())), cy(static_cast<std::size_t>((f + 1) * g.ny()));
  for (int j = 0; j <= f; ++j)
    for (int i = 0; i < g.nx(); ++i) cx[j * g.nx() + i] = std::cos(j * std::numbers::pi * g.xc(i) / g.lx());
  for (int k = 0; k <= f; ++k)
    for (int l = 0; l < g.ny(); ++l) cy[k * g.ny() + l] = std::cos(k * std::numbers::pi * g.yc(l) / g.ly());
  ScalarField out(g, 0.0);
  for (int l = 0; l < g.ny(); ++l)
    for (int i = 0; i < g.nx(); ++i) {
      double s = 0.0;
      for (int j = 0; j <= f; ++j)
        for (int k = 0; k <= f; ++k) s += coeffs[j * (f + 1) + k] * cx[j * g.nx() + i] * cy[k * g.ny() + l];
      out(i, l) = s;
    }
  return out;
}

ScalarField random_smooth_field(const Grid& g, const RandomFieldSpec& spec) {
  ScalarField f = cosine_series(g, draw_cosine_coefficients(spec), spec.max_frequency);
  switch (spec.positivity) {
    case Positivity::none: break;
    case Positivity::exp_transform: f = map(f, [](double v) { return std::exp(v); }); break;
    case Positivity::shift_clip: {
      const double lo = min_value(f);
      const double floor = 0.05 * std::abs(spec.amplitude) + 1e-12;
      f = map(f, [&](double v) { return std::max(v - lo, 0.0) + floor; });
      break;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------

Sides ineq1_sides(const ScalarField& phi, const ScalarField& psi, double a, double beta0) {
  require_positive(psi);
  if (!(a > 0.0) || !(beta0 > 0.0)) throw std::invalid_argument("a and beta0 must be positive");
  const double pbar = mean(psi);
  const double mass = integrate(psi);
  Sides s;
  ScalarField centered = psi;
  centered += -pbar;
  s.lhs = integrate(hadamard(phi, centered));
  s.rhs = relative_entropy(psi) / a + a / (4.0 * beta0) * mass * grad_energy(phi);
  return s;
}

Ineq2Sides ineq2_sides(const ScalarField& psi, double beta0) {
  require_positive(psi);
  if (!(beta0 > 0.0)) throw std::invalid_argument("beta0 must be positive");
  const Grid& g = psi.grid();
  const double mass = integrate(psi);
  Ineq2Sides s;
  s.lhs = relative_entropy(psi);
  s.rhs = mass * grad_energy(map(psi, [](double v) { return std::log(v); })) / beta0;

  double acc = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 1; i < g.nx(); ++i) {
      const double d = (psi(i, j) - psi(i - 1, j)) / g.hx();
      const double pf = 0.5 * (psi(i, j) + psi(i - 1, j));
      acc += d * d / (pf * pf);
    }
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const double d = (psi(i, j) - psi(i, j - 1)) / g.hy();
      const double pf = 0.5 * (psi(i, j) + psi(i, j - 1));
      acc += d * d / (pf * pf);
    }
  s.rhs_alt = 2.0 / beta0 * mass * (g.area() * acc / static_cast<double>(g.cell_count()));
  return s;
}

CorollarySides corollary_bound_sides(const ScalarField& phi, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  CorollarySides s;
  s.log_lhs = log_exp_integral(phi);
  s.log_rhs = std::log(phi.grid().area()) + grad_energy(phi) / (4.0 * beta) + mean(phi);
  s.lhs = std::exp(s.log_lhs);
  s.rhs = std::exp(s.log_rhs);
  return s;
}

std::vector<double> ineq1_rhs_sweep(const ScalarField& phi, const ScalarField& psi, double beta0,
                                    const std::vector<double>& a_values) {
  std::vector<double> out;
  out.reserve(a_values.size());
  for (double a : a_values) out.push_back(ineq1_sides(phi, psi, a, beta0).rhs);
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(IneqKind k) {
  switch (k) {
    case IneqKind::ineq1: return "ineq1";
    case IneqKind::ineq2: return "ineq2";
    case IneqKind::corollary: return "corollary";
  }
  return "unknown";
}

IneqKind ineq_kind_from_string(const std::string& s) {
  if (s == "ineq1") return IneqKind::ineq1;
  if (s == "ineq2") return IneqKind::ineq2;
  if (s == "corollary") return IneqKind::corollary;
  throw std::invalid_argument("unknown inequality kind '" + s + "'");
}

double IneqSample::relative_margin() const {
  const double scale = std::abs(lhs) + std::abs(rhs);
  return scale > 0.0 ? margin / scale : 0.0;
}

std::uint64_t sample_seed(std::uint64_t master_seed, std::size_t index) {
  return splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(index)));
}

IneqSample evaluate_sample(const Grid& g, IneqKind kind, const RandomFieldSpec& spec, const EnsembleParams& params,
                           std::uint64_t seed) {
  RandomFieldSpec phi_spec = spec;
  phi_spec.seed = seed;
  phi_spec.positivity = Positivity::none;
  RandomFieldSpec psi_spec = spec;
  psi_spec.seed = splitmix64(seed);
  if (psi_spec.positivity == Positivity::none) psi_spec.positivity = Positivity::exp_transform;

  IneqSample s;
  s.seed = seed;
  s.kind = kind;
  s.beta0 = params.beta0;
  switch (kind) {
    case IneqKind::ineq1: {
      s.a = params.a;
      const Sides r = ineq1_sides(random_smooth_field(g, phi_spec), random_smooth_field(g, psi_spec), params.a,
                                  params.beta0);
      s.lhs = r.lhs;
      s.rhs = r.rhs;
      break;
    }
    case IneqKind::ineq2: {
      const Ineq2Sides r = ineq2_sides(random_smooth_field(g, psi_spec), params.beta0);
      s.lhs = r.lhs;
      s.rhs = r.rhs;
      break;
    }
    case IneqKind::corollary: {
      const CorollarySides r = corollary_bound_sides(random_smooth_field(g, phi_spec), params.beta0);
      s.lhs = r.lhs;
      s.rhs = r.rhs;
      break;
    }
  }
  s.margin = s.rhs - s.lhs;
  return s;
}

IneqReport run_ensemble(const Grid& g, IneqKind kind, std::size_t count, const RandomFieldSpec& spec,
                        const EnsembleParams& params) {
  IneqReport rep;
  rep.kind = kind;
  rep.samples.resize(count);
  parallel_for(count, [&](std::size_t k) {
    rep.samples[k] = evaluate_sample(g, kind, spec, params, sample_seed(params.master_seed, k));
  });
  std::sort(rep.samples.begin(), rep.samples.end(),
            [](const IneqSample& a, const IneqSample& b) { return a.seed < b.seed; });
  if (rep.samples.empty()) return rep;

  std::vector<double> margins;
  margins.reserve(count);
  rep.min_margin = rep.samples.front().margin;
  rep.min_relative_margin = rep.samples.front().relative_margin();
  rep.worst_seed = rep.samples.front().seed;
  for (const auto& s : rep.samples) {
    margins.push_back(s.margin);
    rep.min_margin = std::min(rep.min_margin, s.margin);
    if (s.relative_margin() < rep.min_relative_margin) {
      rep.min_relative_margin = s.relative_margin();
      rep.worst_seed = s.seed;
    }
    if (s.margin < -params.rel_tol * (std::abs(s.lhs) + std::abs(s.rhs))) ++rep.failures;
  }
  std::sort(margins.begin(), margins.end());
  const std::size_t n = margins.size();
  rep.median_margin = n % 2 ? margins[n / 2] : 0.5 * (margins[n / 2 - 1] + margins[n / 2]);
  return rep;
}

void write_ineq_csv_header(std::ostream& os) { os << "seed,kind,a,beta0,lhs,rhs,margin\n"; }

void write_ineq_csv_rows(std::ostream& os, const IneqReport& report) {
  using detail::num;
  for (const auto& s : report.samples)
    os << s.seed << ',' << to_string(s.kind) << ',' << num(s.a) << ',' << num(s.beta0) << ',' << num(s.lhs) << ','
       << num(s.rhs) << ',' << num(s.margin) << '\n';
}

}  // namespace tmcf
