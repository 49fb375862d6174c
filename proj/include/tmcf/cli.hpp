#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tmcf/config.hpp"
#include "tmcf/diagnostics.hpp"

namespace tmcf {

inline constexpr const char* tool_version = "0.1.0";

/// Exit statuses shared by every command.
enum ExitCode : int {
  exit_ok = 0,
  exit_error = 1,              ///< I/O or unexpected failure
  exit_config = 2,             ///< hypothesis or format rejection at load
  exit_invariant = 3,          ///< runtime invariant violation
  exit_solver = 4,             ///< linear solver did not converge
};

struct CliOptions {
  std::filesystem::path config;       ///< empty: built-in default scenario
  std::filesystem::path out = "out";
  std::optional<std::uint64_t> seed;  ///< overrides the config seed
  std::optional<std::uint64_t> replay_seed;
  std::filesystem::path beta0_report;  ///< verify: take beta0_hat from here
  std::filesystem::path diagnostics;   ///< report: input series
  bool resume = false;                 ///< simulate: continue from out/checkpoint
};

/// Runs one command, mapping exceptions to exit codes. Progress goes to
/// `log`, errors to `err`.
int run_command(Command cmd, const CliOptions& opts, std::ostream& log, std::ostream& err);

struct Violation {
  std::string invariant;
  std::size_t row = 0;  ///< CSV line number of the offending sample
  double t = 0.0;
  std::string detail;
};

/// Checks a recorded series against the run-time invariants that survive
/// sampling: mass, c norm monotonicity, entropy and F signs, cumulative
/// monotonicity, the Pinsker bound and the consumption budget.
std::vector<Violation> scan_series(const std::vector<DiagnosticsRecord>& series, double mass_tol = 1e-8);

/// {t0_detected, final_metrics, invariant_violations}.
nlohmann::json summarize_series(const std::vector<DiagnosticsRecord>& series, const ThresholdParams& th,
                                double mass_tol = 1e-8);

}  // namespace tmcf
