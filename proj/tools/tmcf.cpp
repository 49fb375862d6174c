#include <iostream>

#include "CLI11.hpp"
#include "tmcf/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Trudinger-Moser constant estimation, inequality checks and chemotaxis-fluid simulation"};
  app.set_version_flag("--version", tmcf::tool_version);
  app.require_subcommand(1);

  tmcf::CliOptions opts;
  std::uint64_t seed = 0, replay = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "JSON configuration (default scenario when omitted)");
    sub->add_option("--out", opts.out, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "master seed, overrides the config");
  };

  auto* est = app.add_subcommand("estimate-beta0", "bisection estimate of the sharp constant");
  common(est);
  auto* ver = app.add_subcommand("verify", "inequality ensembles at beta0");
  common(ver);
  ver->add_option("--beta0-report", opts.beta0_report, "beta0-report.json from estimate-beta0");
  ver->add_option("--replay-seed", replay, "evaluate one sample seed and exit");
  auto* sim = app.add_subcommand("simulate", "time-step the regularized system");
  common(sim);
  sim->add_flag("--resume", opts.resume, "continue from <out>/checkpoint");
  auto* rep = app.add_subcommand("report", "summarize a diagnostics.csv");
  common(rep);
  rep->add_option("--diagnostics", opts.diagnostics, "diagnostics.csv to summarize")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : tmcf::exit_config;
  }

  tmcf::Command cmd = tmcf::Command::simulate;
  CLI::App* used = nullptr;
  if (est->parsed()) cmd = tmcf::Command::estimate_beta0, used = est;
  if (ver->parsed()) cmd = tmcf::Command::verify, used = ver;
  if (sim->parsed()) cmd = tmcf::Command::simulate, used = sim;
  if (rep->parsed()) cmd = tmcf::Command::report, used = rep;
  if (used->count("--seed")) opts.seed = seed;
  if (used == ver && ver->count("--replay-seed")) opts.replay_seed = replay;

  return tmcf::run_command(cmd, opts, std::cout, std::cerr);
}
