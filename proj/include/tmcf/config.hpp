#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "tmcf/cns_solver.hpp"
#include "tmcf/diagnostics.hpp"
#include "tmcf/ineq_verify.hpp"
#include "tmcf/tm_variational.hpp"

namespace tmcf {

/// A configuration that fails to parse or breaks a model hypothesis.
/// `check` names the failed check, e.g. "n0_positive".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& check, const std::string& detail)
      : std::runtime_error(check + ": " + detail), check(check) {}
  std::string check;
};

enum class Command { estimate_beta0, verify, simulate, report };

const char* to_string(Command c);

struct EstimateSettings {
  Grid grid{64, 64, 1.0, 1.0};
  Beta0Options options;
};

struct VerifySettings {
  Grid grid{64, 64, 1.0, 1.0};
  double a = 1.0;
  std::optional<double> beta0;
  /// beta0-report.json to take beta0_hat from when beta0 is not given.
  std::string beta0_report;
  std::size_t count = 1000;
  std::vector<IneqKind> kinds{IneqKind::ineq1, IneqKind::ineq2, IneqKind::corollary};
  RandomFieldSpec fields{4, 1.0, Positivity::exp_transform, 0};
  double rel_tol = 1e-8;
};

struct AppConfig {
  SimConfig sim;
  ThresholdParams thresholds;
  EstimateSettings estimate;
  VerifySettings verify;
  std::uint64_t seed = 1;
  /// Every setting with defaults filled in; keys sorted on dump.
  nlohmann::json canonical;
  std::string hash;  ///< SHA-256 of canonical.dump(), hex

  FunctionalWeights weights() const { return {sim.fluid_weight_C}; }
};

/// The default scenario: 64^2 unit square, n0 = 1 + cos(pi x) cos(pi y) / 2,
/// c0 = 0.5 + 0.2 cos(pi y), u0 = 0, Phi = 0.1 y, f(c) = c, t_end = 5.
nlohmann::json default_config_json();

/// Fills defaults, validates every hypothesis relevant to `cmd`, and builds
/// the fields. Relative CSV paths resolve against `base_dir`.
AppConfig parse_config(const nlohmann::json& doc, Command cmd, const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path, Command cmd);

std::string sha256_hex(const std::string& data);

}  // namespace tmcf
