#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmcf/cns_solver.hpp"

namespace tmcf {

struct FunctionalWeights {
  double fluid_weight_C = 1.0;  ///< kinetic energy enters F as 1/(2C); must be >= 1
};

struct ThresholdParams {
  double delta0 = 1e-2;
  /// Samples after a candidate that must also stay below delta0; 0 means all of them.
  std::size_t stabilization_window = 0;
};

struct EnergyParts {
  double entropy = 0.0;    ///< int n ln(n / nbar0)
  double grad_c_sq = 0.0;  ///< int |grad c|^2
  double kinetic = 0.0;    ///< int |u|^2
  double total = 0.0;      ///< entropy + grad_c_sq / 2 + kinetic / (2 C)
};

struct Dissipation {
  double dn2_over_n = 0.0;   ///< int |grad n|^2 / n
  double dn2_over_n2 = 0.0;  ///< int |grad n|^2 / n^2
  double lap_c_sq = 0.0;     ///< int |Lap c|^2
  double grad_u_sq = 0.0;    ///< int |grad u|^2
};

struct ConvergenceMetrics {
  double n_dist_l1 = 0.0;  ///< ||n - nbar0||_1
  double c_linf = 0.0;
  double u_l2 = 0.0;
  /// ||n - nbar0||_1 / sqrt(mass * entropy); 0 when the entropy vanishes.
  double pinsker_ratio = 0.0;
};

/// One row of diagnostics.csv.
struct DiagnosticsRecord {
  double t = 0.0;
  double mass = 0.0;
  double c_l1 = 0.0, c_l2 = 0.0, c_linf = 0.0;
  double entropy = 0.0, grad_c_sq = 0.0, kinetic = 0.0, F = 0.0;
  double dn2_over_n = 0.0, dn2_over_n2 = 0.0, lap_c_sq = 0.0, grad_u_sq = 0.0;
  double cum_dn2_over_n = 0.0, cum_lap_c_sq = 0.0, cum_grad_u_sq = 0.0, cum_nfc = 0.0;
  double n_dist_l1 = 0.0, pinsker_ratio = 0.0;

  bool operator==(const DiagnosticsRecord&) const = default;
};

/// Relative entropy of n against the constant nbar0, summed in the pointwise
/// nonnegative form nbar0 * h(n / nbar0 - 1), h(x) = (1 + x) ln(1 + x) - x.
/// This equals int n ln(n / nbar0) whenever int n = nbar0 |Omega|.
double relative_entropy(const ScalarField& n, double nbar0);

EnergyParts energy_functional(const SimState& s, double nbar0, const FunctionalWeights& w);

/// Throws std::invalid_argument unless min n > 0.
Dissipation dissipation_terms(const SimState& s);

ConvergenceMetrics convergence_metrics(const SimState& s, double nbar0);

/// Instantaneous quantities; cumulative columns start at zero except
/// cum_nfc, which is the solver's exact sink tally.
DiagnosticsRecord snapshot(const SimState& s, double nbar0, const FunctionalWeights& w);

/// Trapezoidal update of the cumulative integrals from prev.t to s.t.
/// Throws std::invalid_argument if s.t < prev.t.
DiagnosticsRecord accumulate(const DiagnosticsRecord& prev, const SimState& s, double nbar0,
                             const FunctionalWeights& w);

/// Earliest sample time whose F and every later F within the window are
/// <= delta0.
std::optional<double> detect_stabilization(const std::vector<DiagnosticsRecord>& series, const ThresholdParams& th);

const std::vector<std::string>& diagnostics_columns();
/// Record fields in column order, and back.
std::vector<double> record_values(const DiagnosticsRecord& r);
DiagnosticsRecord record_from_values(const std::vector<double>& v);

void write_diagnostics_csv(std::ostream& os, const std::vector<DiagnosticsRecord>& series);

class CsvFormatError : public std::runtime_error {
 public:
  CsvFormatError(std::size_t row, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row(row) {}
  std::size_t row;  ///< 1-based line number, header is row 1
};

std::vector<DiagnosticsRecord> read_diagnostics_csv(std::istream& is);

}  // namespace tmcf
