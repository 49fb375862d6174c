#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "tmcf/config.hpp"
#include "tmcf/simulation.hpp"

using namespace tmcf;
namespace fs = std::filesystem;

namespace {

SimConfig small_scenario(double t_end, int diag_every) {
  auto doc = default_config_json();
  doc["grid"] = {{"nx", 24}, {"ny", 24}, {"lx", 1.0}, {"ly", 1.0}};
  doc["t_end"] = t_end;
  doc["diag_every"] = diag_every;
  doc["u0"] = {{"kind", "vortex"}, {"amplitude", 0.05}};
  return parse_config(doc, Command::simulate).sim;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tmcf_test_sim_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("t_end = 0 yields the initial record only") {
  const SimConfig cfg = small_scenario(0.0, 10);
  const RunResult r = run_simulation(cfg);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].t == 0.0);
  CHECK(r.records[0].mass == doctest::Approx(integrate(cfg.n0)).epsilon(1e-15));
  CHECK(r.final_state.step == 0);
}

TEST_CASE("records land on diag_every multiples and on t_end") {
  SimConfig cfg = small_scenario(0.0, 4);
  const double dt = cfg.effective_dt();
  cfg.t_end = 10.5 * dt;  // ten full steps and a half step
  std::size_t steps_seen = 0;
  RunOptions opts;
  opts.observer = [&](const SimState& prev, const SimState& next, const DiagnosticsRecord& rec) {
    ++steps_seen;
    CHECK(next.step == prev.step + 1);
    CHECK(rec.t == next.t);
  };
  const RunResult r = run_simulation(cfg, opts);
  CHECK(steps_seen == 11);
  REQUIRE(r.records.size() == 4);
  CHECK(r.records[1].t == 4 * dt);
  CHECK(r.records[2].t == 8 * dt);
  CHECK(r.records[3].t == cfg.t_end);
  CHECK(r.final_state.t == cfg.t_end);
  for (std::size_t k = 1; k < r.records.size(); ++k) {
    CHECK(r.records[k].cum_dn2_over_n >= r.records[k - 1].cum_dn2_over_n);
    CHECK(r.records[k].cum_nfc >= r.records[k - 1].cum_nfc);
  }
}

TEST_CASE("repeated runs are bit-identical") {
  const SimConfig cfg = small_scenario(0.02, 7);
  const RunResult a = run_simulation(cfg), b = run_simulation(cfg);
  CHECK(a.records == b.records);
  CHECK(a.final_state.n == b.final_state.n);
  CHECK(a.final_state.u == b.final_state.u);
}

TEST_CASE("restart from a checkpoint continues bit-exactly") {
  SimConfig full_cfg = small_scenario(0.0, 5);
  const double dt = full_cfg.effective_dt();
  full_cfg.t_end = 40 * dt;
  const RunResult full = run_simulation(full_cfg);

  const fs::path dir = scratch("restart");
  SimConfig first = full_cfg;
  first.t_end = 15 * dt;
  RunOptions o1;
  o1.checkpoint_dir = dir;
  o1.config_hash = "abc";
  run_simulation(first, o1);

  Checkpoint cp = read_checkpoint(dir, full_cfg.grid);
  CHECK(cp.config_hash == "abc");
  CHECK(cp.state.step == 15);
  RunOptions o2;
  o2.resume = cp;
  const RunResult rest = run_simulation(full_cfg, o2);

  CHECK(rest.final_state.n == full.final_state.n);
  CHECK(rest.final_state.c == full.final_state.c);
  CHECK(rest.final_state.u == full.final_state.u);
  CHECK(rest.final_state.P == full.final_state.P);
  CHECK(rest.final_state.consumed == full.final_state.consumed);
  REQUIRE(!rest.records.empty());
  CHECK(rest.records.back() == full.records.back());
  // Records at steps 20, 25, ... appear in both.
  for (const auto& r : rest.records) {
    bool found = false;
    for (const auto& f : full.records) found = found || f == r;
    CHECK(found);
  }
  fs::remove_all(dir);
}

TEST_CASE("an aborted run leaves the last good state checkpointed") {
  auto doc = default_config_json();
  doc["grid"] = {{"nx", 24}, {"ny", 24}, {"lx", 1.0}, {"ly", 1.0}};
  doc["u0"] = {{"kind", "vortex"}, {"amplitude", 5.0}};
  doc["dt"] = 4e-3;
  doc["t_end"] = 0.05;
  // Fast flow with a large step: the transport CFL check fails at once.
  const SimConfig cfg = parse_config(doc, Command::simulate).sim;
  const fs::path dir = scratch("abort");
  RunOptions opts;
  opts.checkpoint_dir = dir;
  opts.config_hash = "h";
  CHECK_THROWS_AS(run_simulation(cfg, opts), CflError);
  REQUIRE(fs::exists(dir / "manifest.json"));
  const Checkpoint cp = read_checkpoint(dir, cfg.grid);
  CHECK(cp.state.step == 0);
  CHECK(cp.state.t == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("consumption tally respects the c0 budget on a short run") {
  const SimConfig cfg = small_scenario(0.2, 50);
  const RunResult r = run_simulation(cfg);
  const double c0 = integrate(cfg.c0);
  const double c_end = integrate(r.final_state.c);
  CHECK(r.records.back().cum_nfc <= c0);
  CHECK(std::abs(r.records.back().cum_nfc - (c0 - c_end)) <= 1e-10 * c0);
}
