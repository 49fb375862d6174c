#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tmcf/cli.hpp"
#include "tmcf/config.hpp"
#include "tmcf/simulation.hpp"

using namespace tmcf;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tmcf_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json small_doc() {
  auto doc = default_config_json();
  doc["grid"] = {{"nx", 16}, {"ny", 16}, {"lx", 1.0}, {"ly", 1.0}};
  doc["t_end"] = 0.02;
  doc["diag_every"] = 10;
  doc["estimate"] = {{"grid", {{"nx", 8}, {"ny", 8}, {"lx", 1.0}, {"ly", 1.0}}},
                     {"multistarts", 2},
                     {"bisect_steps", 6},
                     {"max_iter", 300}};
  doc["verify"] = {{"grid", {{"nx", 16}, {"ny", 16}, {"lx", 1.0}, {"ly", 1.0}}}, {"count", 5}};
  return doc;
}

fs::path write_config(const fs::path& dir, const json& doc) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << doc.dump(2);
  return p;
}

std::string rejected_check(const json& doc, Command cmd = Command::simulate) {
  try {
    parse_config(doc, cmd);
  } catch (const ConfigError& e) {
    return e.check;
  }
  return "accepted";
}

int run(Command cmd, const CliOptions& o, std::string* err_text = nullptr) {
  std::ostringstream log, err;
  const int code = run_command(cmd, o, log, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("the default config parses with a stable hash") {
  const AppConfig a = parse_config(default_config_json(), Command::simulate);
  const AppConfig b = parse_config(default_config_json(), Command::simulate);
  CHECK(a.hash.size() == 64);
  CHECK(a.hash == b.hash);
  CHECK(a.sim.grid.nx() == 64);
  CHECK(a.sim.t_end == 5.0);
  // Canonical form is a fixed point.
  const AppConfig c = parse_config(a.canonical, Command::simulate);
  CHECK(c.hash == a.hash);
  // Any setting change moves the hash.
  auto doc = default_config_json();
  doc["t_end"] = 4.0;
  CHECK(parse_config(doc, Command::simulate).hash != a.hash);
}

TEST_CASE("sha256 matches known digests") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("hypothesis violations are rejected by name") {
  auto doc = default_config_json();
  doc["f"] = {{"kind", "table"}, {"c", {0.0, 1.0}}, {"f", {0.1, 1.0}}};
  CHECK(rejected_check(doc) == "f_zero_at_origin");

  doc = default_config_json();
  doc["f"] = {{"kind", "table"}, {"c", {0.0, 0.3, 1.0}}, {"f", {0.0, -0.1, 1.0}}};
  CHECK(rejected_check(doc) == "f_positive");

  doc = default_config_json();
  doc["n0"] = {{"kind", "cos_product"}, {"base", 1.0}, {"amplitude", 1.5}, {"kx", 1}, {"ky", 1}};
  CHECK(rejected_check(doc) == "n0_positive");

  doc = default_config_json();
  doc["c0"] = {{"kind", "constant"}, {"value", 0.0}};
  CHECK(rejected_check(doc) == "c0_positive");

  doc = default_config_json();
  doc["unexpected"] = 1;
  CHECK(rejected_check(doc) == "unknown_key");

  doc = default_config_json();
  doc["sensitivity"] = {{"eps", 1.5}};
  CHECK(rejected_check(doc) == "sensitivity_eps");

  doc = default_config_json();
  CHECK(rejected_check(doc, Command::verify) == "verify_beta0_missing");
  doc["verify"] = {{"beta0", 2.0}, {"a", 0.0}};
  CHECK(rejected_check(doc, Command::verify) == "verify_a_positive");
  doc["verify"] = {{"beta0", -1.0}};
  CHECK(rejected_check(doc, Command::verify) == "verify_beta0_positive");
  // Verify settings only matter to verify.
  CHECK(rejected_check(doc, Command::simulate) == "accepted");
}

TEST_CASE("csv initial data resolves against the config directory") {
  const fs::path dir = scratch("csvinit");
  {
    std::ofstream os(dir / "n0.csv");
    os << "x,y,value\n";
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) os << (i + 0.5) / 4 << ',' << (j + 0.5) / 4 << ',' << 1.0 + 0.1 * i + 0.01 * j << '\n';
  }
  auto doc = default_config_json();
  doc["grid"] = {{"nx", 4}, {"ny", 4}, {"lx", 1.0}, {"ly", 1.0}};
  doc["n0"] = {{"kind", "csv"}, {"path", "n0.csv"}};
  const AppConfig cfg = load_config(write_config(dir, doc), Command::simulate);
  CHECK(cfg.sim.n0(3, 2) == doctest::Approx(1.32).epsilon(1e-15));
  CHECK(cfg.sim.n0(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  fs::remove_all(dir);
}

TEST_CASE("simulate writes the series, checkpoint and manifest") {
  const fs::path dir = scratch("simulate");
  auto doc = small_doc();
  doc["t_end"] = 0.0;
  CliOptions o;
  o.config = write_config(dir, doc);
  o.out = dir / "out";
  REQUIRE(run(Command::simulate, o) == exit_ok);
  std::ifstream is(o.out / "diagnostics.csv");
  const auto series = read_diagnostics_csv(is);
  CHECK(series.size() == 1);
  CHECK(fs::exists(o.out / "checkpoint" / "manifest.json"));
  const json m = json::parse(slurp(o.out / "run-manifest.json"));
  CHECK(m["command"] == "simulate");
  CHECK(m["tool_version"] == tool_version);
  CHECK(m["config_hash"] == parse_config(doc, Command::simulate).hash);
  fs::remove_all(dir);
}

TEST_CASE("resume continues the series and refuses a different config") {
  const fs::path dir = scratch("resume");
  auto doc = small_doc();
  CliOptions o;
  o.config = write_config(dir, doc);
  o.out = dir / "full";
  REQUIRE(run(Command::simulate, o) == exit_ok);
  const std::string full = slurp(o.out / "diagnostics.csv");

  // Stop after ten whole steps with a shorter config, then patch the
  // checkpoint hash to the full config and resume.
  auto half = doc;
  half["t_end"] = 10 * parse_config(doc, Command::simulate).sim.effective_dt();
  CliOptions oh;
  oh.config = dir / "half.json";
  std::ofstream(oh.config) << half.dump();
  oh.out = dir / "part";
  REQUIRE(run(Command::simulate, oh) == exit_ok);
  const fs::path man = oh.out / "checkpoint" / "manifest.json";
  json cp = json::parse(slurp(man));
  CliOptions resumed = o;
  resumed.out = oh.out;
  resumed.resume = true;
  std::string err;
  CHECK(run(Command::simulate, resumed, &err) == exit_config);
  CHECK(err.find("resume_config_mismatch") != std::string::npos);

  cp["config_hash"] = parse_config(doc, Command::simulate).hash;
  std::ofstream(man) << cp.dump();
  REQUIRE(run(Command::simulate, resumed) == exit_ok);
  CHECK(slurp(oh.out / "diagnostics.csv") == full);
  fs::remove_all(dir);
}

TEST_CASE("exit codes follow the failure class") {
  const fs::path dir = scratch("codes");
  CliOptions o;
  o.out = dir / "out";

  o.config = dir / "missing.json";
  CHECK(run(Command::simulate, o) == exit_config);

  o.config = dir / "broken.json";
  std::ofstream(o.config) << "{ \"dt\": ";
  CHECK(run(Command::simulate, o) == exit_config);

  auto doc = small_doc();
  doc["n0"] = {{"kind", "constant"}, {"value", -1.0}};
  o.config = write_config(dir, doc);
  std::string err;
  CHECK(run(Command::simulate, o, &err) == exit_config);
  CHECK(err.find("n0_positive") != std::string::npos);

  // A fast vortex with a coarse step trips the transport CFL check.
  doc = small_doc();
  doc["u0"] = {{"kind", "vortex"}, {"amplitude", 5.0}};
  doc["dt"] = 4e-3;
  o.config = write_config(dir, doc);
  CHECK(run(Command::simulate, o, &err) == exit_invariant);
  CHECK(fs::exists(o.out / "diagnostics.csv"));
  CHECK(fs::exists(o.out / "checkpoint" / "manifest.json"));
  fs::remove_all(dir);
}

TEST_CASE("report summarizes a series and flags injected violations") {
  SimConfig cfg = parse_config(small_doc(), Command::simulate).sim;
  cfg.diag_every = 2;
  const auto series = run_simulation(cfg).records;
  REQUIRE(series.size() > 3);
  CHECK(scan_series(series).empty());

  ThresholdParams th;
  th.delta0 = 1e9;
  const json s = summarize_series(series, th);
  CHECK(s["t0_detected"].get<double>() == series.front().t);
  CHECK(s["invariant_violations"].empty());
  CHECK(s["final_metrics"]["t"].get<double>() == series.back().t);

  auto bad = series;
  bad[2].mass *= 1.0 + 1e-6;
  bad[3].c_linf = bad[2].c_linf * 2.0;
  const auto v = scan_series(bad);
  REQUIRE(v.size() == 2);
  CHECK(v[0].invariant == "mass_conservation");
  CHECK(v[0].row == 4);
  CHECK(v[1].invariant == "c_lp_monotonicity");
  CHECK(v[1].row == 5);

  const fs::path dir = scratch("report");
  {
    std::ofstream os(dir / "diagnostics.csv");
    write_diagnostics_csv(os, bad);
  }
  CliOptions o;
  o.diagnostics = dir / "diagnostics.csv";
  o.out = dir / "out";
  REQUIRE(run(Command::report, o) == exit_ok);
  const json rep = json::parse(slurp(o.out / "report.json"));
  CHECK(rep["invariant_violations"].size() == 2);

  // A truncated line is a format error naming the line.
  std::string text = slurp(dir / "diagnostics.csv");
  text += "0.5,1,2\n";
  std::ofstream(dir / "diagnostics.csv", std::ios::binary) << text;
  std::string err;
  CHECK(run(Command::report, o, &err) == exit_config);
  CHECK(err.find(std::to_string(bad.size() + 2)) != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("estimate, verify and replay chain through their artifacts") {
  const fs::path dir = scratch("pipeline");
  CliOptions o;
  o.config = write_config(dir, small_doc());
  o.out = dir / "est";
  REQUIRE(run(Command::estimate_beta0, o) == exit_ok);
  const json est = json::parse(slurp(o.out / "beta0-report.json"));
  const double beta0 = est["beta0_hat"].get<double>();
  CHECK(beta0 > 0.0);

  CliOptions v = o;
  v.out = dir / "ver";
  v.beta0_report = o.out / "beta0-report.json";
  REQUIRE(run(Command::verify, v) == exit_ok);
  const json rep = json::parse(slurp(v.out / "verify-report.json"));
  CHECK(rep["beta0"].get<double>() == beta0);
  CHECK(rep["kinds"]["ineq1"]["count"] == 5);

  // The CSV row for a seed matches a replay of that seed.
  std::ifstream csv(v.out / "ineq-report.csv");
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(header == "seed,kind,a,beta0,lhs,rhs,margin");
  const std::uint64_t seed = std::stoull(row.substr(0, row.find(',')));
  const double margin = std::stod(row.substr(row.rfind(',') + 1));
  CliOptions r = v;
  r.out = dir / "replay";
  r.replay_seed = seed;
  REQUIRE(run(Command::verify, r) == exit_ok);
  const json replay = json::parse(slurp(r.out / "replay.json"));
  CHECK(replay["samples"][0]["kind"] == "ineq1");
  CHECK(replay["samples"][0]["margin"].get<double>() == margin);

  // An empty ensemble is still a valid report.
  auto doc = small_doc();
  doc["verify"]["count"] = 0;
  doc["verify"]["beta0"] = 1.0;
  CliOptions z;
  z.config = write_config(dir, doc);
  z.out = dir / "empty";
  REQUIRE(run(Command::verify, z) == exit_ok);
  const json zr = json::parse(slurp(z.out / "verify-report.json"));
  CHECK(zr["kinds"]["ineq1"]["count"] == 0);
  CHECK(zr["flags"].empty());
  fs::remove_all(dir);
}
