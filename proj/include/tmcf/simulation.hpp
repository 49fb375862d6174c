#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tmcf/cns_solver.hpp"
#include "tmcf/diagnostics.hpp"

namespace tmcf {

/// State plus the running diagnostics record, enough to continue a run
/// bit-exactly.
struct Checkpoint {
  SimState state;
  DiagnosticsRecord running;
  std::string config_hash;
};

struct RunOptions {
  FunctionalWeights weights;
  /// Written at the end of the run and, on abort, with the last good state.
  /// Empty disables checkpointing.
  std::filesystem::path checkpoint_dir;
  std::string config_hash;
  /// Called after every accepted step with the previous and new state and
  /// the running record (cumulative integrals up to next.t).
  std::function<void(const SimState& prev, const SimState& next, const DiagnosticsRecord& running)> observer;
  /// Called for every emitted record, as it is emitted.
  std::function<void(const DiagnosticsRecord&)> on_record;
  /// Continue from here instead of the configured initial data.
  std::optional<Checkpoint> resume;
};

struct RunResult {
  std::vector<DiagnosticsRecord> records;
  SimState final_state;
};

/// Steps to cfg.t_end with t = step * dt (the last step is shortened to
/// land on t_end), checking invariants after every step. Records are
/// emitted at step 0, every diag_every steps and at the end. Invariant and
/// solver failures propagate after the last good state is checkpointed.
RunResult run_simulation(const SimConfig& cfg, const RunOptions& opts = {});

/// n.csv, c.csv, P.csv, u.csv (cell-centered), u_x.csv, u_y.csv (faces) and
/// manifest.json {t, step, config_hash, consumed, running}.
void write_checkpoint(const std::filesystem::path& dir, const Checkpoint& cp);
Checkpoint read_checkpoint(const std::filesystem::path& dir, const Grid& g);

}  // namespace tmcf
