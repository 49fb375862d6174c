#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tmcf/grid.hpp"

namespace tmcf {

enum class Positivity { none, exp_transform, shift_clip };

struct RandomFieldSpec {
  int max_frequency = 4;
  double amplitude = 1.0;
  Positivity positivity = Positivity::none;
  std::uint64_t seed = 0;
};

/// Coefficients a_jk, j,k in [0, max_frequency], stored row-major in j,
/// each a standard normal draw scaled by amplitude / (1 + j^2 + k^2).
std::vector<double> draw_cosine_coefficients(const RandomFieldSpec& spec);

/// sum_jk a_jk cos(j pi x / lx) cos(k pi y / ly) at cell centers.
ScalarField cosine_series(const Grid& g, const std::vector<double>& coeffs, int max_frequency);

/// Seeded cosine series with the positivity transform applied. The
/// shift_clip variant maps f to max(f - min f, 0) + 0.05 * amplitude.
ScalarField random_smooth_field(const Grid& g, const RandomFieldSpec& spec);

struct Sides {
  double lhs = 0.0;
  double rhs = 0.0;
  double margin() const { return rhs - lhs; }
};

/// int phi (psi - psi_bar) <= (1/a) int psi ln(psi/psi_bar) + a/(4 beta0) (int psi) |grad phi|^2.
/// Throws std::invalid_argument for non-positive psi, a or beta0.
Sides ineq1_sides(const ScalarField& phi, const ScalarField& psi, double a, double beta0);

struct Ineq2Sides {
  double lhs = 0.0;
  double rhs = 0.0;      ///< (1/beta0) (int psi) |grad ln psi|^2
  double rhs_alt = 0.0;  ///< (2/beta0) (int psi) int |grad psi|^2 / psi^2, psi averaged to faces
  double margin() const { return rhs - lhs; }
};

/// int psi ln(psi/psi_bar) <= (1/beta0) (int psi) |grad ln psi|^2.
Ineq2Sides ineq2_sides(const ScalarField& psi, double beta0);

struct CorollarySides {
  double lhs = 0.0;      ///< int e^phi
  double rhs = 0.0;      ///< area * exp(|grad phi|^2 / (4 beta) + mean phi)
  double log_lhs = 0.0;
  double log_rhs = 0.0;
  double margin() const { return rhs - lhs; }
  double log_margin() const { return log_rhs - log_lhs; }
};

CorollarySides corollary_bound_sides(const ScalarField& phi, double beta);

/// Right-hand side of the first inequality for each a in `a_values`.
std::vector<double> ineq1_rhs_sweep(const ScalarField& phi, const ScalarField& psi, double beta0,
                                    const std::vector<double>& a_values);

// ---------------------------------------------------------------------------

enum class IneqKind { ineq1, ineq2, corollary };

const char* to_string(IneqKind k);
IneqKind ineq_kind_from_string(const std::string& s);

struct IneqSample {
  std::uint64_t seed = 0;
  IneqKind kind = IneqKind::ineq1;
  double a = 0.0;
  double beta0 = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  /// margin / (|lhs| + |rhs|), zero when both sides vanish.
  double relative_margin() const;
};

struct EnsembleParams {
  double a = 1.0;       ///< weight in the first inequality
  double beta0 = 1.0;   ///< beta_0 for the inequalities, beta for the corollary
  double rel_tol = 1e-8;  ///< a sample fails when margin < -rel_tol (|lhs| + |rhs|)
  std::uint64_t master_seed = 0;
};

struct IneqReport {
  IneqKind kind = IneqKind::ineq1;
  std::vector<IneqSample> samples;  ///< sorted by seed
  std::size_t failures = 0;
  double min_margin = 0.0;
  double min_relative_margin = 0.0;
  double median_margin = 0.0;
  std::uint64_t worst_seed = 0;  ///< sample with the smallest relative margin
  bool empty() const { return samples.empty(); }
};

/// Seed of sample `index` in an ensemble with the given master seed.
std::uint64_t sample_seed(std::uint64_t master_seed, std::size_t index);

/// One sample, fully determined by (kind, spec shape, params, seed).
IneqSample evaluate_sample(const Grid& g, IneqKind kind, const RandomFieldSpec& spec, const EnsembleParams& params,
                           std::uint64_t seed);

IneqReport run_ensemble(const Grid& g, IneqKind kind, std::size_t count, const RandomFieldSpec& spec,
                        const EnsembleParams& params);

/// `ineq-report.csv`: seed,kind,a,beta0,lhs,rhs,margin.
void write_ineq_csv_header(std::ostream& os);
void write_ineq_csv_rows(std::ostream& os, const IneqReport& report);

}  // namespace tmcf
