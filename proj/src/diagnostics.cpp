#include "tmcf/diagnostics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <utility>

#include "csv_util.hpp"

namespace tmcf {

namespace {

// (1 + x) ln(1 + x) - x, accurate down to x -> 0.
double entropy_kernel(double x) {
  if (std::abs(x) < 1e-3) {
    double term = x * x, sum = 0.0;
    for (int k = 2; k < 9; ++k) {
      sum += term / (k * (k - 1.0));
      term *= -x;
    }
    return sum;
  }
  return (1.0 + x) * std::log1p(x) - x;
}

double sum_sq(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

double relative_entropy(const ScalarField& n, double nbar0) {
  double s = 0.0;
  for (double v : n.values()) s += entropy_kernel(std::max(v, 1e-300) / nbar0 - 1.0);
  return n.grid().cell_volume() * nbar0 * s;
}

EnergyParts energy_functional(const SimState& s, double nbar0, const FunctionalWeights& w) {
  EnergyParts e;
  e.entropy = relative_entropy(s.n, nbar0);
  const VectorField gc = gradient_neumann(s.c);
  e.grad_c_sq = inner(gc, gc);
  e.kinetic = inner(s.u, s.u);
  e.total = e.entropy + 0.5 * e.grad_c_sq + e.kinetic / (2.0 * w.fluid_weight_C);
  return e;
}

Dissipation dissipation_terms(const SimState& s) {
  if (!(min_value(s.n) > 0.0)) throw std::invalid_argument("dissipation_terms: n must be strictly positive");
  const Grid& g = s.n.grid();
  const auto& n = s.n;
  const double vol = g.cell_volume();
  Dissipation d;
  double a = 0.0, b = 0.0;
  auto face = [&](double lo, double hi, double h) {
    const double gr = (hi - lo) / h;
    const double nf = 0.5 * (lo + hi);
    a += gr * gr / nf;
    b += gr * gr / (nf * nf);
  };
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 1; i < g.nx(); ++i) face(n(i - 1, j), n(i, j), g.hx());
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) face(n(i, j - 1), n(i, j), g.hy());
  d.dn2_over_n = vol * a;
  d.dn2_over_n2 = vol * b;
  d.lap_c_sq = vol * sum_sq(laplacian_neumann(s.c).values());
  d.grad_u_sq = velocity_dirichlet_energy(s.u);
  return d;
}

ConvergenceMetrics convergence_metrics(const SimState& s, double nbar0) {
  ConvergenceMetrics m;
  const double vol = s.n.grid().cell_volume();
  double l1 = 0.0;
  for (double v : s.n.values()) l1 += std::abs(v - nbar0);
  m.n_dist_l1 = vol * l1;
  m.c_linf = max_abs(s.c);
  m.u_l2 = std::sqrt(inner(s.u, s.u));
  const double ent = relative_entropy(s.n, nbar0);
  const double mass = integrate(s.n);
  m.pinsker_ratio = ent > 0.0 ? m.n_dist_l1 / std::sqrt(mass * ent) : 0.0;
  return m;
}

DiagnosticsRecord snapshot(const SimState& s, double nbar0, const FunctionalWeights& w) {
  DiagnosticsRecord r;
  const double vol = s.c.grid().cell_volume();
  r.t = s.t;
  r.mass = integrate(s.n);
  double l1 = 0.0;
  for (double v : s.c.values()) l1 += std::abs(v);
  r.c_l1 = vol * l1;
  r.c_l2 = std::sqrt(vol * sum_sq(s.c.values()));
  r.c_linf = max_abs(s.c);
  const EnergyParts e = energy_functional(s, nbar0, w);
  r.entropy = e.entropy;
  r.grad_c_sq = e.grad_c_sq;
  r.kinetic = e.kinetic;
  r.F = e.total;
  const Dissipation d = dissipation_terms(s);
  r.dn2_over_n = d.dn2_over_n;
  r.dn2_over_n2 = d.dn2_over_n2;
  r.lap_c_sq = d.lap_c_sq;
  r.grad_u_sq = d.grad_u_sq;
  r.cum_nfc = s.consumed;
  const ConvergenceMetrics m = convergence_metrics(s, nbar0);
  r.n_dist_l1 = m.n_dist_l1;
  r.pinsker_ratio = m.pinsker_ratio;
  return r;
}

DiagnosticsRecord accumulate(const DiagnosticsRecord& prev, const SimState& s, double nbar0,
                             const FunctionalWeights& w) {
  if (s.t < prev.t) throw std::invalid_argument("accumulate: time must not decrease");
  DiagnosticsRecord r = snapshot(s, nbar0, w);
  const double half = 0.5 * (s.t - prev.t);
  r.cum_dn2_over_n = prev.cum_dn2_over_n + half * (prev.dn2_over_n + r.dn2_over_n);
  r.cum_lap_c_sq = prev.cum_lap_c_sq + half * (prev.lap_c_sq + r.lap_c_sq);
  r.cum_grad_u_sq = prev.cum_grad_u_sq + half * (prev.grad_u_sq + r.grad_u_sq);
  return r;
}

std::optional<double> detect_stabilization(const std::vector<DiagnosticsRecord>& series, const ThresholdParams& th) {
  const std::size_t n = series.size();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t end = th.stabilization_window == 0 ? n : std::min(n, k + 1 + th.stabilization_window);
    bool below = true;
    for (std::size_t m = k; m < end && below; ++m) below = series[m].F <= th.delta0;
    if (below) return series[k].t;
  }
  return std::nullopt;
}

namespace {

using Member = double DiagnosticsRecord::*;

const std::array<std::pair<const char*, Member>, 19>& column_table() {
  static const std::array<std::pair<const char*, Member>, 19> table{{
      {"t", &DiagnosticsRecord::t},
      {"mass", &DiagnosticsRecord::mass},
      {"c_l1", &DiagnosticsRecord::c_l1},
      {"c_l2", &DiagnosticsRecord::c_l2},
      {"c_linf", &DiagnosticsRecord::c_linf},
      {"entropy", &DiagnosticsRecord::entropy},
      {"grad_c_sq", &DiagnosticsRecord::grad_c_sq},
      {"kinetic", &DiagnosticsRecord::kinetic},
      {"F", &DiagnosticsRecord::F},
      {"dn2_over_n", &DiagnosticsRecord::dn2_over_n},
      {"dn2_over_n2", &DiagnosticsRecord::dn2_over_n2},
      {"lap_c_sq", &DiagnosticsRecord::lap_c_sq},
      {"grad_u_sq", &DiagnosticsRecord::grad_u_sq},
      {"cum_dn2_over_n", &DiagnosticsRecord::cum_dn2_over_n},
      {"cum_lap_c_sq", &DiagnosticsRecord::cum_lap_c_sq},
      {"cum_grad_u_sq", &DiagnosticsRecord::cum_grad_u_sq},
      {"cum_nfc", &DiagnosticsRecord::cum_nfc},
      {"n_dist_l1", &DiagnosticsRecord::n_dist_l1},
      {"pinsker_ratio", &DiagnosticsRecord::pinsker_ratio},
  }};
  return table;
}

}  // namespace

const std::vector<std::string>& diagnostics_columns() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [name, _] : column_table()) v.emplace_back(name);
    return v;
  }();
  return names;
}

std::vector<double> record_values(const DiagnosticsRecord& r) {
  std::vector<double> v;
  for (const auto& [_, m] : column_table()) v.push_back(r.*m);
  return v;
}

DiagnosticsRecord record_from_values(const std::vector<double>& v) {
  const auto& cols = column_table();
  if (v.size() != cols.size()) throw std::invalid_argument("record_from_values: wrong field count");
  DiagnosticsRecord r;
  for (std::size_t k = 0; k < cols.size(); ++k) r.*(cols[k].second) = v[k];
  return r;
}

void write_diagnostics_csv(std::ostream& os, const std::vector<DiagnosticsRecord>& series) {
  const auto& cols = column_table();
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k].first;
  os << '\n';
  for (const auto& r : series) {
    for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << detail::num(r.*(cols[k].second));
    os << '\n';
  }
}

std::vector<DiagnosticsRecord> read_diagnostics_csv(std::istream& is) {
  const auto& cols = column_table();
  std::string line;
  if (!std::getline(is, line)) throw CsvFormatError(1, "missing header");
  if (detail::split_csv(line) != diagnostics_columns()) throw CsvFormatError(1, "unexpected header");
  std::vector<DiagnosticsRecord> out;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != cols.size())
      throw CsvFormatError(row, "expected " + std::to_string(cols.size()) + " fields, got " +
                                    std::to_string(fields.size()));
    DiagnosticsRecord r;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      try {
        r.*(cols[k].second) = detail::parse_double(fields[k], row);
      } catch (const std::runtime_error&) {
        throw CsvFormatError(row, "malformed value '" + fields[k] + "' in column " + cols[k].first);
      }
    }
    if (!out.empty() && r.t < out.back().t) throw CsvFormatError(row, "time decreases");
    out.push_back(r);
  }
  return out;
}

}  // namespace tmcf
