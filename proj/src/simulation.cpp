#include "tmcf/simulation.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace tmcf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  return is;
}

}  // namespace

void write_checkpoint(const fs::path& dir, const Checkpoint& cp) {
  fs::create_directories(dir);
  const SimState& s = cp.state;
  {
    auto os = open_out(dir / "n.csv");
    write_scalar_csv(os, s.n);
  }
  {
    auto os = open_out(dir / "c.csv");
    write_scalar_csv(os, s.c);
  }
  {
    auto os = open_out(dir / "P.csv");
    write_scalar_csv(os, s.P);
  }
  {
    auto os = open_out(dir / "u.csv");
    write_vector_csv(os, s.u);
  }
  {
    auto os = open_out(dir / "u_x.csv");
    write_face_csv(os, s.u, 0);
  }
  {
    auto os = open_out(dir / "u_y.csv");
    write_face_csv(os, s.u, 1);
  }
  json running = json::object();
  const auto values = record_values(cp.running);
  for (std::size_t k = 0; k < values.size(); ++k) running[diagnostics_columns()[k]] = values[k];
  const json manifest = {{"t", s.t},
                         {"step", s.step},
                         {"config_hash", cp.config_hash},
                         {"consumed", s.consumed},
                         {"running", running}};
  auto os = open_out(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
}

Checkpoint read_checkpoint(const fs::path& dir, const Grid& g) {
  json m;
  {
    auto is = open_in(dir / "manifest.json");
    m = json::parse(is);
  }
  Checkpoint cp{SimState(g), {}, m.at("config_hash").get<std::string>()};
  SimState& s = cp.state;
  s.t = m.at("t").get<double>();
  s.step = m.at("step").get<std::int64_t>();
  s.consumed = m.at("consumed").get<double>();
  {
    auto is = open_in(dir / "n.csv");
    s.n = read_scalar_csv(is, g);
  }
  {
    auto is = open_in(dir / "c.csv");
    s.c = read_scalar_csv(is, g);
  }
  {
    auto is = open_in(dir / "P.csv");
    s.P = read_scalar_csv(is, g);
  }
  std::vector<double> ux, uy;
  {
    auto is = open_in(dir / "u_x.csv");
    ux = read_face_csv(is, g, 0);
  }
  {
    auto is = open_in(dir / "u_y.csv");
    uy = read_face_csv(is, g, 1);
  }
  s.u = VectorField(g, std::move(ux), std::move(uy), VectorBc::dirichlet_zero);
  std::vector<double> values;
  for (const auto& name : diagnostics_columns()) values.push_back(m.at("running").at(name).get<double>());
  cp.running = record_from_values(values);
  return cp;
}

RunResult run_simulation(const SimConfig& cfg, const RunOptions& opts) {
  Stepper stepper(cfg);
  const double nbar0 = integrate(cfg.n0) / cfg.grid.area();
  const double dt = cfg.effective_dt();
  const std::int64_t total =
      cfg.t_end > 0.0 ? static_cast<std::int64_t>(std::ceil(cfg.t_end / dt - 1e-9)) : std::int64_t{0};
  const std::int64_t every = cfg.diag_every > 0 ? cfg.diag_every : 1;

  SimState s(cfg.grid);
  DiagnosticsRecord running;
  if (opts.resume) {
    s = opts.resume->state;
    running = opts.resume->running;
  } else {
    s = stepper.initial_state();
    stepper.check_invariants(s);
    running = snapshot(s, nbar0, opts.weights);
  }

  RunResult out{{}, s};
  auto emit = [&](const DiagnosticsRecord& r) {
    out.records.push_back(r);
    if (opts.on_record) opts.on_record(r);
  };
  if (!opts.resume) emit(running);

  auto checkpoint = [&](const SimState& st, const DiagnosticsRecord& rec) {
    if (!opts.checkpoint_dir.empty()) write_checkpoint(opts.checkpoint_dir, {st, rec, opts.config_hash});
  };

  try {
    while (s.step < total) {
      const std::int64_t k = s.step + 1;
      const double t_next = k == total ? cfg.t_end : static_cast<double>(k) * dt;
      SimState next = stepper.step(s, t_next - s.t);
      next.t = t_next;
      stepper.check_invariants(next);
      DiagnosticsRecord rec = accumulate(running, next, nbar0, opts.weights);
      if (opts.observer) opts.observer(s, next, rec);
      s = std::move(next);
      running = rec;
      if (s.step % every == 0 || s.step == total) emit(running);
    }
  } catch (...) {
    checkpoint(s, running);
    throw;
  }
  checkpoint(s, running);
  out.final_state = std::move(s);
  return out;
}

}  // namespace tmcf
