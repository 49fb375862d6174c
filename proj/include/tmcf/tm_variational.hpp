#pragma once

#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <vector>

#include "tmcf/grid.hpp"

namespace tmcf {

/// The three addends of
///   J_beta(phi) = 1/(4 beta) |grad phi|^2 + mean(phi) - ln( (1/area) int e^phi ).
struct JTerms {
  double gradient_energy = 0.0;  ///< |grad phi|^2 (before the 1/(4 beta) weight)
  double gradient_term = 0.0;    ///< gradient_energy / (4 beta)
  double mean_term = 0.0;        ///< mean(phi)
  double log_term = 0.0;         ///< ln( int e^phi / area ), subtracted
  double value = 0.0;
};

JTerms eval_J_terms(double beta, const ScalarField& phi);
double eval_J(double beta, const ScalarField& phi);

/// ln( int e^phi ), shifted by mean(phi) (or max(phi) when that could
/// overflow) so neither form loses the small-phi regime.
double log_exp_integral(const ScalarField& phi);
double exp_integral(const ScalarField& phi);

/// L2 gradient of J_beta: -(1/2beta) Lap_N phi + 1/area - e^phi / int e^phi.
ScalarField grad_J(double beta, const ScalarField& phi);

/// L2 norm of grad_J; zero exactly at discrete stationary points.
double el_residual(double beta, const ScalarField& phi);

enum class StepRule {
  armijo,            ///< previous accepted step doubled, then backtracking
  barzilai_borwein,  ///< BB1 trial step, then backtracking
};

struct MinimizeOptions {
  int max_iter = 20000;
  double tol = 1e-9;  ///< on the L2 norm of grad_J
  StepRule step_rule = StepRule::barzilai_borwein;
  double armijo_c = 1e-4;
  /// Descend along (1/area - Lap_N/(2 beta))^-1 grad_J instead of grad_J,
  /// i.e. the gradient in an H1-type metric. Same fixed points, far fewer
  /// iterations on fine grids.
  bool precondition = true;
  bool record_trace = false;
};

struct TracePoint {
  double j_value;
  double gradient_energy;
};

struct MinimizeResult {
  ScalarField phi_min;
  double j_value = 0.0;
  double j_initial = 0.0;
  double el_residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<TracePoint> trace;
};

/// Projected (optionally preconditioned) gradient descent on the zero-mean
/// subspace with Armijo backtracking. Every accepted step strictly lowers J; non-convergence is
/// reported through `converged`, never thrown.
MinimizeResult minimize_J(double beta, const ScalarField& init, const MinimizeOptions& opts = {});

// ---------------------------------------------------------------------------
// beta_0 estimation

enum class BetaClass { zero, negative, unresolved };

struct Beta0Options {
  double beta_hi_start = 2.0 * std::numbers::pi;
  int multistarts = 4;  ///< seeded random starts on top of the structured ones
  double tol_zero = 1e-8;
  int bisect_steps = 30;
  std::uint64_t seed = 1;
  MinimizeOptions minimize{};
};

struct StartOutcome {
  int start_id = 0;
  double j_min = 0.0;
  double residual = 0.0;
  double sup_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct BetaClassification {
  double beta = 0.0;
  BetaClass cls = BetaClass::unresolved;
  double j_min = 0.0;   ///< smallest J over all starts
  int argmin_start = 0;
  std::vector<StartOutcome> starts;
  std::optional<ScalarField> witness;  ///< minimizer of the best start when NEGATIVE
};

struct Beta0Estimate {
  double beta0_hat = 0.0;
  double beta_lo = 0.0;
  double beta_hi = 0.0;
  bool no_negative_bracket = false;
  int multistart_count = 0;
  std::vector<BetaClassification> samples;  ///< sorted by beta
  Grid grid;
};

/// Initial fields for the multistart search: zero, +-cosine bumps in the
/// four lowest Neumann modes, a corner spike, and `opts.multistarts` seeded
/// random smooth fields.
std::vector<ScalarField> multistart_inits(const Grid& g, const Beta0Options& opts);

/// ZERO when every start collapses (J >= -tol_zero, |phi|_inf <= sqrt(tol_zero)),
/// NEGATIVE when any start reaches J < -tol_zero, otherwise UNRESOLVED.
/// `extra` starts are appended after the standard ones.
BetaClassification classify_beta(const Grid& g, double beta, const Beta0Options& opts,
                                 const std::vector<ScalarField>& extra = {});

/// Bisection on beta in (0, beta_hi_start]. Each probe also restarts from
/// the witness of the nearest NEGATIVE beta seen so far, which keeps a
/// concentrated branch in view near the threshold. UNRESOLVED counts as "not ZERO",
/// so the bracket errs low and beta0_hat is an empirical lower-confidence
/// estimate of the discrete threshold, not a certified bound.
Beta0Estimate estimate_beta0(const Grid& g, const Beta0Options& opts);

const char* to_string(BetaClass c);

/// JSON: { beta0_hat, bracket, per_beta: [{beta, j_min, start_id, residual, class}], grid, ... }.
void write_beta0_report(std::ostream& os, const Beta0Estimate& est);

}  // namespace tmcf
