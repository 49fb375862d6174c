#include "tmcf/cns_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tmcf {

double frobenius(const Matrix2& m) { return std::sqrt(m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + m[3] * m[3]); }

Matrix2 sensitivity(double, double, double, double c, const SensitivityParams& p) {
  Matrix2 s{p.a_diag, -p.b_rot, p.b_rot, p.a_diag};
  const double norm = frobenius(s);
  const double cap = p.cap(std::max(c, 0.0));
  if (norm > cap) {
    const double k = cap / norm;
    for (auto& v : s) v *= k;
  }
  return s;
}

double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * (3.0 - 2.0 * t);
}

double cutoff_density(double n, double eps) {
  const double lo = 0.5 / eps;
  return 1.0 - smoothstep((n - lo) / lo);
}

double cutoff_boundary(double dist, double band) {
  if (band <= 0.0) return 1.0;
  return smoothstep((dist - band) / band);
}

Matrix2 regularize_sensitivity(const Matrix2& s, double n, double x, double y, const Grid& g,
                               const SensitivityParams& p) {
  const double dist = std::min({x, g.lx() - x, y, g.ly() - y});
  const double k = cutoff_density(n, p.eps) * cutoff_boundary(dist, p.boundary_band);
  return {s[0] * k, s[1] * k, s[2] * k, s[3] * k};
}

double Consumption::operator()(double cv) const {
  if (kind == Kind::linear) return cv;
  // Tables are validated at load: c strictly increasing, at least two points.
  std::size_t k = 1;
  while (k + 1 < c.size() && cv > c[k]) ++k;
  const double slope = (f[k] - f[k - 1]) / (c[k] - c[k - 1]);
  return f[k - 1] + slope * (cv - c[k - 1]);
}

double SimConfig::effective_dt() const {
  if (dt > 0.0) return dt;
  const double h = grid.min_spacing();
  return 0.25 * h * h;
}

// ---------------------------------------------------------------------------

VectorField transport_velocity(const SimState& s, const SimConfig& cfg) {
  const Grid& g = s.n.grid();
  VectorField w = s.u;
  if (!cfg.switches.chemotaxis) return w;
  const int nx = g.nx(), ny = g.ny();
  const double hx = g.hx(), hy = g.hy();
  const auto& c = s.c;
  const auto& n = s.n;
  // Centered cell derivatives with mirrored ghosts.
  auto cdx = [&](int i, int j) { return (c(std::min(i + 1, nx - 1), j) - c(std::max(i - 1, 0), j)) / (2.0 * hx); };
  auto cdy = [&](int i, int j) { return (c(i, std::min(j + 1, ny - 1)) - c(i, std::max(j - 1, 0))) / (2.0 * hy); };
  const SensitivityParams& p = cfg.sensitivity;

  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i) {
      const double x = g.xf(i), y = g.yc(j);
      const double nf = 0.5 * (n(i - 1, j) + n(i, j));
      const double cf = 0.5 * (c(i - 1, j) + c(i, j));
      const Matrix2 S = regularize_sensitivity(sensitivity(x, y, nf, cf, p), nf, x, y, g, p);
      if (S[0] == 0.0 && S[1] == 0.0) continue;
      const double gx = (c(i, j) - c(i - 1, j)) / hx;
      const double gy = 0.5 * (cdy(i - 1, j) + cdy(i, j));
      w.x(i, j) += S[0] * gx + S[1] * gy;
    }
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double x = g.xc(i), y = g.yf(j);
      const double nf = 0.5 * (n(i, j - 1) + n(i, j));
      const double cf = 0.5 * (c(i, j - 1) + c(i, j));
      const Matrix2 S = regularize_sensitivity(sensitivity(x, y, nf, cf, p), nf, x, y, g, p);
      if (S[2] == 0.0 && S[3] == 0.0) continue;
      const double gx = 0.5 * (cdx(i, j - 1) + cdx(i, j));
      const double gy = (c(i, j) - c(i, j - 1)) / hy;
      w.y(i, j) += S[2] * gx + S[3] * gy;
    }
  return w;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// q - dt div(F), F the first-order upwind flux of q carried by w. Wall faces
// carry no flux. Throws CflError if the update could lose positivity or the
// face speed exceeds half a cell per step.
ScalarField upwind_transport(const ScalarField& q, const VectorField& w, double dt) {
  const Grid& g = q.grid();
  const int nx = g.nx(), ny = g.ny();
  const double hx = g.hx(), hy = g.hy();

  double max_speed_ratio = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i) max_speed_ratio = std::max(max_speed_ratio, std::abs(w.x(i, j)) * dt / hx);
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) max_speed_ratio = std::max(max_speed_ratio, std::abs(w.y(i, j)) * dt / hy);
  if (max_speed_ratio > 0.5) throw CflError("face speed * dt / h = " + fmt(max_speed_ratio) + " exceeds 0.5");
  if (max_speed_ratio == 0.0) return q;

  ScalarField out = q;
  double worst_out = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double we = i + 1 < nx ? w.x(i + 1, j) : 0.0;
      const double ww = i > 0 ? w.x(i, j) : 0.0;
      const double wn = j + 1 < ny ? w.y(i, j + 1) : 0.0;
      const double ws = j > 0 ? w.y(i, j) : 0.0;
      const double qc = q(i, j);
      const double fe = we > 0.0 ? we * qc : (i + 1 < nx ? we * q(i + 1, j) : 0.0);
      const double fw = ww > 0.0 ? (i > 0 ? ww * q(i - 1, j) : 0.0) : ww * qc;
      const double fn = wn > 0.0 ? wn * qc : (j + 1 < ny ? wn * q(i, j + 1) : 0.0);
      const double fs = ws > 0.0 ? (j > 0 ? ws * q(i, j - 1) : 0.0) : ws * qc;
      out(i, j) = qc - dt * ((fe - fw) / hx + (fn - fs) / hy);
      const double outflow =
          dt * (std::max(we, 0.0) / hx + std::max(-ww, 0.0) / hx + std::max(wn, 0.0) / hy + std::max(-ws, 0.0) / hy);
      worst_out = std::max(worst_out, outflow);
    }
  if (worst_out >= 1.0) throw CflError("cell outflow fraction " + fmt(worst_out) + " per step reaches 1");
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

void vector_laplacian(const VectorField& u, VectorField& out) {
  const Grid& g = u.grid();
  const int nx = g.nx(), ny = g.ny();
  const double ax = 1.0 / (g.hx() * g.hx()), ay = 1.0 / (g.hy() * g.hy());
  for (int j = 0; j < ny; ++j) {
    out.x(0, j) = 0.0;
    out.x(nx, j) = 0.0;
    for (int i = 1; i < nx; ++i) {
      const double v = u.x(i, j);
      const double vn = j + 1 < ny ? u.x(i, j + 1) : -v;
      const double vs = j > 0 ? u.x(i, j - 1) : -v;
      out.x(i, j) = ax * (u.x(i + 1, j) - 2.0 * v + u.x(i - 1, j)) + ay * (vn - 2.0 * v + vs);
    }
  }
  for (int i = 0; i < nx; ++i) {
    out.y(i, 0) = 0.0;
    out.y(i, ny) = 0.0;
  }
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double v = u.y(i, j);
      const double ve = i + 1 < nx ? u.y(i + 1, j) : -v;
      const double vw = i > 0 ? u.y(i - 1, j) : -v;
      out.y(i, j) = ax * (ve - 2.0 * v + vw) + ay * (u.y(i, j + 1) - 2.0 * v + u.y(i, j - 1));
    }
}

double velocity_dirichlet_energy(const VectorField& u) {
  VectorField lap(u.grid());
  vector_laplacian(u, lap);
  return 0.0 - inner(u, lap);
}

VectorField convection(const VectorField& u) {
  const Grid& g = u.grid();
  const int nx = g.nx(), ny = g.ny();
  const double hx = g.hx(), hy = g.hy();
  VectorField out(g);
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i) {
      const double v = u.x(i, j);
      const double fe = 0.5 * (v + u.x(i + 1, j));
      const double fw = 0.5 * (u.x(i - 1, j) + v);
      const double fn = 0.5 * (u.y(i - 1, j + 1) + u.y(i, j + 1));
      const double fs = 0.5 * (u.y(i - 1, j) + u.y(i, j));
      const double vn = j + 1 < ny ? u.x(i, j + 1) : -v;
      const double vs = j > 0 ? u.x(i, j - 1) : -v;
      out.x(i, j) = 0.5 * ((fe * u.x(i + 1, j) - fw * u.x(i - 1, j)) / hx + (fn * vn - fs * vs) / hy);
    }
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double v = u.y(i, j);
      const double fn = 0.5 * (v + u.y(i, j + 1));
      const double fs = 0.5 * (u.y(i, j - 1) + v);
      const double fe = 0.5 * (u.x(i + 1, j - 1) + u.x(i + 1, j));
      const double fw = 0.5 * (u.x(i, j - 1) + u.x(i, j));
      const double ve = i + 1 < nx ? u.y(i + 1, j) : -v;
      const double vw = i > 0 ? u.y(i - 1, j) : -v;
      out.y(i, j) = 0.5 * ((fe * ve - fw * vw) / hx + (fn * u.y(i, j + 1) - fs * u.y(i, j - 1)) / hy);
    }
  return out;
}

// ---------------------------------------------------------------------------

struct Stepper::Work {
  explicit Work(const Grid& g) : scalar(g), vinv(g), r(g), z(g), p(g), ap(g) {}
  NeumannSolver scalar;
  NoSlipSpectralInverse vinv;
  VectorField r, z, p, ap;
};

Stepper::Stepper(const SimConfig& cfg)
    : cfg_(cfg), mass0_(integrate(cfg.n0)), w_(std::make_unique<Work>(cfg.grid)) {}

Stepper::~Stepper() = default;

namespace {

void require_converged(const SolveReport& r, const char* what) {
  if (!r.converged)
    throw SolverError(std::string(what) + " did not converge: relative residual " + fmt(r.relative_residual) +
                          " after " + std::to_string(r.iterations) + " iterations",
                      r);
}

}  // namespace

ScalarField Stepper::advance_c(const SimState& s, double dt, double& consumed) {
  const Grid& g = cfg_.grid;
  ScalarField c = upwind_transport(s.c, s.u, dt);
  ScalarField rhs = c;
  require_converged(w_->scalar.solve(1.0, dt, rhs, c), "c diffusion solve");
  double removed = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double before = c[k];
    double after;
    if (cfg_.f.kind == Consumption::Kind::linear) {
      after = before / (1.0 + dt * s.n[k]);
    } else {
      const double rate = before > 0.0 ? cfg_.f(before) / before : 0.0;
      after = before / (1.0 + dt * s.n[k] * rate);
    }
    c[k] = after;
    removed += before - after;
  }
  consumed += g.cell_volume() * removed;
  return c;
}

ScalarField Stepper::advance_n(const SimState& s, double dt) {
  const VectorField w = transport_velocity(s, cfg_);
  ScalarField n = upwind_transport(s.n, w, dt);
  ScalarField rhs = n;
  require_converged(w_->scalar.solve(1.0, dt, rhs, n), "n diffusion solve");
  return n;
}

void Stepper::advance_u(const SimState& s, double dt, VectorField& u_out, ScalarField& P_out) {
  const Grid& g = cfg_.grid;
  const int nx = g.nx(), ny = g.ny();
  VectorField u = s.u;
  if (cfg_.switches.convection) {
    const VectorField conv = convection(s.u);
    for (std::size_t k = 0; k < u.xs().size(); ++k) u.xs()[k] -= dt * conv.xs()[k];
    for (std::size_t k = 0; k < u.ys().size(); ++k) u.ys()[k] -= dt * conv.ys()[k];
  }

  // (I - dt Lap_h) u = u*: conjugate gradients preconditioned by the exact
  // sine-transform inverse, so the residual is certified, not assumed.
  {
    Work& w = *w_;
    const VectorField b = u;
    auto apply = [&](const VectorField& x, VectorField& y) {
      vector_laplacian(x, y);
      for (std::size_t k = 0; k < y.xs().size(); ++k) y.xs()[k] = x.xs()[k] - dt * y.xs()[k];
      for (std::size_t k = 0; k < y.ys().size(); ++k) y.ys()[k] = x.ys()[k] - dt * y.ys()[k];
    };
    auto vdot = [](const VectorField& a, const VectorField& c) { return dot(a.xs(), c.xs()) + dot(a.ys(), c.ys()); };
    auto axpy = [](double a, const VectorField& x, VectorField& y) {
      for (std::size_t k = 0; k < y.xs().size(); ++k) y.xs()[k] += a * x.xs()[k];
      for (std::size_t k = 0; k < y.ys().size(); ++k) y.ys()[k] += a * x.ys()[k];
    };
    const double bnorm = std::sqrt(vdot(b, b));
    if (bnorm > 0.0) {
      constexpr double tol = 1e-12;
      apply(u, w.ap);
      w.r = b;
      axpy(-1.0, w.ap, w.r);
      w.vinv.apply(w.r, w.z, 1.0, dt);
      w.p = w.z;
      double rz = vdot(w.r, w.z);
      double rnorm = std::sqrt(vdot(w.r, w.r));
      SolveReport rep;
      while (rnorm > tol * bnorm && rep.iterations < 200) {
        apply(w.p, w.ap);
        const double a = rz / vdot(w.p, w.ap);
        axpy(a, w.p, u);
        axpy(-a, w.ap, w.r);
        ++rep.iterations;
        rnorm = std::sqrt(vdot(w.r, w.r));
        if (rnorm <= tol * bnorm) break;
        w.vinv.apply(w.r, w.z, 1.0, dt);
        const double rz_new = vdot(w.r, w.z);
        for (std::size_t k = 0; k < w.p.xs().size(); ++k) w.p.xs()[k] = w.z.xs()[k] + rz_new / rz * w.p.xs()[k];
        for (std::size_t k = 0; k < w.p.ys().size(); ++k) w.p.ys()[k] = w.z.ys()[k] + rz_new / rz * w.p.ys()[k];
        rz = rz_new;
      }
      rep.relative_residual = rnorm / bnorm;
      rep.converged = rep.relative_residual <= tol;
      require_converged(rep, "velocity diffusion solve");
    }
  }

  if (cfg_.switches.buoyancy) {
    const auto& n = s.n;
    const auto& phi = cfg_.phi;
    for (int j = 0; j < ny; ++j)
      for (int i = 1; i < nx; ++i)
        u.x(i, j) += dt * 0.5 * (n(i - 1, j) + n(i, j)) * (phi(i, j) - phi(i - 1, j)) / g.hx();
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        u.y(i, j) += dt * 0.5 * (n(i, j - 1) + n(i, j)) * (phi(i, j) - phi(i, j - 1)) / g.hy();
  }

  // Lap q = div u*, u = u* - grad q, P = q / dt.
  ScalarField rhs = divergence(u);
  rhs *= -1.0;
  rhs.set_bc(ScalarBc::neumann);
  ScalarField q = s.P;
  q *= dt;
  require_converged(w_->scalar.solve(0.0, 1.0, rhs, q, 1e-12), "pressure solve");
  const VectorField gq = gradient_neumann(q);
  for (std::size_t k = 0; k < u.xs().size(); ++k) u.xs()[k] -= gq.xs()[k];
  for (std::size_t k = 0; k < u.ys().size(); ++k) u.ys()[k] -= gq.ys()[k];
  q *= 1.0 / dt;
  u_out = std::move(u);
  P_out = std::move(q);
}

SimState Stepper::step(const SimState& s, double dt) {
  SimState next = s;
  next.c = advance_c(s, dt, next.consumed);
  SimState mid = s;
  mid.c = next.c;
  next.n = advance_n(mid, dt);
  mid.n = next.n;
  advance_u(mid, dt, next.u, next.P);
  next.step = s.step + 1;
  next.t = s.t + dt;
  return next;
}

VectorField Stepper::project(const VectorField& u0) {
  VectorField u = u0;
  ScalarField rhs = divergence(u);
  rhs *= -1.0;
  rhs.set_bc(ScalarBc::neumann);
  ScalarField q(cfg_.grid);
  require_converged(w_->scalar.solve(0.0, 1.0, rhs, q, 1e-12), "initial projection");
  const VectorField gq = gradient_neumann(q);
  for (std::size_t k = 0; k < u.xs().size(); ++k) u.xs()[k] -= gq.xs()[k];
  for (std::size_t k = 0; k < u.ys().size(); ++k) u.ys()[k] -= gq.ys()[k];
  return u;
}

SimState Stepper::initial_state() {
  SimState s(cfg_.grid);
  s.n = cfg_.n0;
  s.c = cfg_.c0;
  s.u = project(cfg_.u0);
  return s;
}

void Stepper::check_invariants(const SimState& s) const {
  const std::string at = " at t = " + fmt(s.t) + " (step " + std::to_string(s.step) + ")";
  if (!all_finite(s.n) || !all_finite(s.c) || !all_finite(s.u) || !all_finite(s.P))
    throw InvariantViolation("finiteness", "non-finite value" + at);
  if (const double m = min_value(s.n); !(m > 0.0)) throw InvariantViolation("positivity_n", "min n = " + fmt(m) + at);
  if (const double m = min_value(s.c); !(m >= 0.0)) throw InvariantViolation("positivity_c", "min c = " + fmt(m) + at);
  const double drift = std::abs(integrate(s.n) - mass0_) / mass0_;
  if (drift > cfg_.mass_tol) throw InvariantViolation("mass_conservation", "relative drift " + fmt(drift) + at);
  const double div = max_abs_divergence(s.u);
  if (div > cfg_.proj_tol) throw InvariantViolation("incompressibility", "max |div u| = " + fmt(div) + at);
}

}  // namespace tmcf
