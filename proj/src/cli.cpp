#include "tmcf/cli.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "tmcf/ineq_verify.hpp"
#include "tmcf/simulation.hpp"
#include "tmcf/tm_variational.hpp"

namespace tmcf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

void write_json(const fs::path& p, const json& j) {
  auto os = open_out(p);
  os << j.dump(2) << '\n';
}

AppConfig load(Command cmd, const CliOptions& opts) {
  json doc;
  fs::path base;
  if (opts.config.empty()) {
    doc = default_config_json();
  } else {
    std::ifstream is(opts.config);
    if (!is) throw ConfigError("io", "cannot read config " + opts.config.string());
    try {
      doc = json::parse(is);
    } catch (const json::parse_error& e) {
      throw ConfigError("syntax", opts.config.string() + ": " + e.what());
    }
    base = opts.config.parent_path();
  }
  if (!opts.beta0_report.empty()) {
    if (!doc.is_object()) throw ConfigError("syntax", "config must be a JSON object");
    doc["verify"]["beta0_report"] = fs::absolute(opts.beta0_report).lexically_normal().string();
  }
  AppConfig cfg = parse_config(doc, cmd, base);
  if (opts.seed) cfg.seed = *opts.seed;
  return cfg;
}

void write_manifest(Command cmd, const CliOptions& opts, const AppConfig& cfg) {
  write_json(opts.out / "run-manifest.json", {{"command", to_string(cmd)},
                                              {"config_path", opts.config.string()},
                                              {"output_dir", opts.out.string()},
                                              {"master_seed", cfg.seed},
                                              {"tool_version", tool_version},
                                              {"config_hash", cfg.hash}});
}

json record_json(const DiagnosticsRecord& r) {
  json j = json::object();
  const auto values = record_values(r);
  for (std::size_t k = 0; k < values.size(); ++k) j[diagnostics_columns()[k]] = values[k];
  return j;
}

int estimate(const CliOptions& opts, std::ostream& log) {
  const AppConfig cfg = load(Command::estimate_beta0, opts);
  fs::create_directories(opts.out);
  Beta0Options o = cfg.estimate.options;
  o.seed = cfg.seed;
  const Beta0Estimate est = estimate_beta0(cfg.estimate.grid, o);
  {
    auto os = open_out(opts.out / "beta0-report.json");
    write_beta0_report(os, est);
  }
  write_manifest(Command::estimate_beta0, opts, cfg);
  log << "beta0_hat = " << est.beta0_hat << " (bracket " << est.beta_lo << ", " << est.beta_hi << ")"
      << (est.no_negative_bracket ? ", no negative bracket found" : "") << '\n';
  return exit_ok;
}

json sample_json(const IneqSample& s) {
  return {{"seed", s.seed}, {"kind", to_string(s.kind)}, {"a", s.a}, {"beta0", s.beta0},
          {"lhs", s.lhs},   {"rhs", s.rhs},              {"margin", s.margin}};
}

int verify(const CliOptions& opts, std::ostream& log) {
  const AppConfig cfg = load(Command::verify, opts);
  const VerifySettings& v = cfg.verify;
  fs::create_directories(opts.out);
  EnsembleParams params;
  params.a = v.a;
  params.beta0 = *v.beta0;
  params.rel_tol = v.rel_tol;
  params.master_seed = cfg.seed;

  if (opts.replay_seed) {
    json samples = json::array();
    for (IneqKind k : v.kinds) {
      const IneqSample s = evaluate_sample(v.grid, k, v.fields, params, *opts.replay_seed);
      samples.push_back(sample_json(s));
      log << to_string(k) << " seed " << s.seed << ": lhs " << s.lhs << " rhs " << s.rhs << " margin " << s.margin
          << '\n';
    }
    write_json(opts.out / "replay.json", {{"seed", *opts.replay_seed}, {"samples", samples}});
    write_manifest(Command::verify, opts, cfg);
    return exit_ok;
  }

  json kinds = json::object();
  json flags = json::array();
  auto csv = open_out(opts.out / "ineq-report.csv");
  write_ineq_csv_header(csv);
  for (IneqKind k : v.kinds) {
    const IneqReport rep = run_ensemble(v.grid, k, v.count, v.fields, params);
    write_ineq_csv_rows(csv, rep);
    json entry = {{"count", rep.samples.size()}, {"failures", rep.failures}};
    if (!rep.empty()) {
      entry["min_margin"] = rep.min_margin;
      entry["min_relative_margin"] = rep.min_relative_margin;
      entry["median_margin"] = rep.median_margin;
      entry["worst_seed"] = rep.worst_seed;
    }
    kinds[to_string(k)] = entry;
    if (rep.failures > 0) flags.push_back(std::string("negative_margin:") + to_string(k));
    log << to_string(k) << ": " << rep.samples.size() << " samples, " << rep.failures << " below tolerance";
    if (!rep.empty()) log << ", min relative margin " << rep.min_relative_margin << " (seed " << rep.worst_seed << ")";
    log << '\n';
  }
  write_json(opts.out / "verify-report.json", {{"beta0", params.beta0},
                                               {"a", params.a},
                                               {"rel_tol", params.rel_tol},
                                               {"master_seed", cfg.seed},
                                               {"grid", {{"nx", v.grid.nx()}, {"ny", v.grid.ny()}, {"lx", v.grid.lx()}, {"ly", v.grid.ly()}}},
                                               {"kinds", kinds},
                                               {"flags", flags}});
  write_manifest(Command::verify, opts, cfg);
  return exit_ok;
}

int simulate(const CliOptions& opts, std::ostream& log) {
  const AppConfig cfg = load(Command::simulate, opts);
  fs::create_directories(opts.out);
  const fs::path csv_path = opts.out / "diagnostics.csv";

  RunOptions ro;
  ro.weights = cfg.weights();
  ro.checkpoint_dir = opts.out / "checkpoint";
  ro.config_hash = cfg.hash;
  std::vector<DiagnosticsRecord> records;
  if (opts.resume) {
    Checkpoint cp = read_checkpoint(ro.checkpoint_dir, cfg.sim.grid);
    if (cp.config_hash != cfg.hash)
      throw ConfigError("resume_config_mismatch", "checkpoint was written by a different configuration");
    std::ifstream is(csv_path);
    if (is) records = read_diagnostics_csv(is);
    std::erase_if(records, [&](const DiagnosticsRecord& r) { return r.t > cp.state.t; });
    ro.resume = std::move(cp);
  }
  ro.on_record = [&](const DiagnosticsRecord& r) { records.push_back(r); };

  auto flush = [&] {
    auto os = open_out(csv_path);
    write_diagnostics_csv(os, records);
  };
  try {
    run_simulation(cfg.sim, ro);
  } catch (...) {
    flush();
    write_manifest(Command::simulate, opts, cfg);
    throw;
  }
  flush();
  write_manifest(Command::simulate, opts, cfg);
  if (records.empty()) return exit_ok;
  const DiagnosticsRecord& last = records.back();
  log << "t = " << last.t << ": mass " << last.mass << ", F " << last.F << ", |c|_inf " << last.c_linf << '\n';
  return exit_ok;
}

int report(const CliOptions& opts, std::ostream& log) {
  if (opts.diagnostics.empty()) throw ConfigError("io", "report needs --diagnostics <path>");
  ThresholdParams th;
  double mass_tol = 1e-8;
  if (!opts.config.empty()) {
    const AppConfig cfg = load(Command::report, opts);
    th = cfg.thresholds;
    mass_tol = cfg.sim.mass_tol;
  }
  std::ifstream is(opts.diagnostics);
  if (!is) throw ConfigError("io", "cannot read " + opts.diagnostics.string());
  const auto series = read_diagnostics_csv(is);
  fs::create_directories(opts.out);
  const json summary = summarize_series(series, th, mass_tol);
  write_json(opts.out / "report.json", summary);
  log << "t0_detected = " << summary["t0_detected"].dump() << ", " << summary["invariant_violations"].size()
      << " invariant violations\n";
  return exit_ok;
}

}  // namespace

std::vector<Violation> scan_series(const std::vector<DiagnosticsRecord>& series, double mass_tol) {
  std::vector<Violation> out;
  if (series.empty()) return out;
  auto add = [&](const char* name, std::size_t k, const std::string& detail) {
    out.push_back({name, k + 2, series[k].t, detail});
  };
  const DiagnosticsRecord& first = series.front();
  for (std::size_t k = 0; k < series.size(); ++k) {
    const DiagnosticsRecord& r = series[k];
    std::ostringstream d;
    d.precision(6);
    if (const double drift = std::abs(r.mass - first.mass) / std::abs(first.mass); drift > mass_tol) {
      d << "relative mass drift " << drift;
      add("mass_conservation", k, d.str());
    }
    if (r.entropy < 0.0 || r.F < 0.0) add("entropy_nonnegative", k, "negative entropy or F");
    if (r.pinsker_ratio > std::sqrt(2.0) + 1e-12) add("pinsker_bound", k, "ratio exceeds sqrt(2)");
    if (r.cum_nfc > first.c_l1 * (1.0 + 1e-8)) add("consumption_budget", k, "consumed more than int c0");
    if (k == 0) continue;
    const DiagnosticsRecord& p = series[k - 1];
    if (r.c_l1 > p.c_l1 + 1e-12 || r.c_l2 > p.c_l2 + 1e-12 || r.c_linf > p.c_linf + 1e-12)
      add("c_lp_monotonicity", k, "a norm of c increased");
    if (r.cum_dn2_over_n < p.cum_dn2_over_n || r.cum_lap_c_sq < p.cum_lap_c_sq ||
        r.cum_grad_u_sq < p.cum_grad_u_sq || r.cum_nfc < p.cum_nfc)
      add("cumulative_monotonicity", k, "a cumulative integral decreased");
  }
  return out;
}

json summarize_series(const std::vector<DiagnosticsRecord>& series, const ThresholdParams& th, double mass_tol) {
  json j;
  const auto t0 = detect_stabilization(series, th);
  j["t0_detected"] = t0 ? json(*t0) : json(nullptr);
  j["final_metrics"] = series.empty() ? json(nullptr) : record_json(series.back());
  json v = json::array();
  for (const auto& x : scan_series(series, mass_tol))
    v.push_back({{"invariant", x.invariant}, {"row", x.row}, {"t", x.t}, {"detail", x.detail}});
  j["invariant_violations"] = v;
  return j;
}

int run_command(Command cmd, const CliOptions& opts, std::ostream& log, std::ostream& err) {
  try {
    switch (cmd) {
      case Command::estimate_beta0: return estimate(opts, log);
      case Command::verify: return verify(opts, log);
      case Command::simulate: return simulate(opts, log);
      case Command::report: return report(opts, log);
    }
  } catch (const ConfigError& e) {
    err << "configuration rejected: " << e.what() << '\n';
    return exit_config;
  } catch (const CsvFormatError& e) {
    err << "malformed diagnostics: " << e.what() << '\n';
    return exit_config;
  } catch (const InvariantViolation& e) {
    err << "invariant violated: " << e.what() << '\n';
    return exit_invariant;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << '\n';
    return exit_solver;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_error;
  }
  return exit_error;
}

}  // namespace tmcf
