#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmcf/grid.hpp"
#include "tmcf/linear_solvers.hpp"

namespace tmcf {

/// Row-major 2x2 matrix.
using Matrix2 = std::array<double, 4>;

double frobenius(const Matrix2& m);

struct SensitivityParams {
  double a_diag = 1.0;
  double b_rot = 0.5;
  /// Cap on |S|_F: s0 + s0_slope * c (nondecreasing in c).
  double s0 = 2.0;
  double s0_slope = 0.0;
  double eps = 0.1;            ///< S_eps vanishes for n >= 1/eps
  double boundary_band = 0.05;  ///< S_eps vanishes within this distance of the walls

  double cap(double c) const { return s0 + s0_slope * c; }
};

/// a I + b R (R the quarter turn), scaled down to Frobenius norm cap(c) when larger.
Matrix2 sensitivity(double x, double y, double n, double c, const SensitivityParams& p);

/// C1 cubic blend 3t^2 - 2t^3 clamped to [0, 1].
double smoothstep(double t);
/// 1 on [0, 1/(2 eps)], 0 on [1/eps, inf).
double cutoff_density(double n, double eps);
/// 0 within `band` of the boundary, 1 beyond 2 band. A zero band disables it.
double cutoff_boundary(double dist, double band);

/// S chi_n(n) chi_b(dist(x, boundary)).
Matrix2 regularize_sensitivity(const Matrix2& s, double n, double x, double y, const Grid& g,
                               const SensitivityParams& p);

/// Consumption term f(c): linear f(c) = c, or a piecewise-linear table
/// through (c_k, f_k), continued with the last slope.
struct Consumption {
  enum class Kind { linear, table } kind = Kind::linear;
  std::vector<double> c, f;

  double operator()(double cv) const;
};

struct SimState {
  ScalarField n, c;
  VectorField u;
  /// Projection pressure: the solve is Lap P = div(u*) / dt and u = u* - dt grad P.
  ScalarField P;
  double t = 0.0;
  std::int64_t step = 0;
  /// Running total of int c removed by the sink, i.e. the discrete
  /// time integral of int n f(c).
  double consumed = 0.0;

  explicit SimState(const Grid& g) : n(g), c(g), u(g), P(g) {}
};

struct SolverSwitches {
  bool chemotaxis = true;
  bool buoyancy = true;
  bool convection = true;
};

struct SimConfig {
  Grid grid{64, 64, 1.0, 1.0};
  double dt = 0.0;  ///< 0 selects 0.25 h^2
  double t_end = 5.0;
  int diag_every = 100;
  ScalarField n0{grid}, c0{grid};
  VectorField u0{grid};
  ScalarField phi{grid};  ///< gravitational potential
  SensitivityParams sensitivity;
  Consumption f;
  SolverSwitches switches;
  double fluid_weight_C = 1.0;
  double mass_tol = 1e-8;
  double proj_tol = 1e-8;

  double effective_dt() const;
};

/// A run-time invariant failed (positivity, mass, incompressibility, CFL).
class InvariantViolation : public std::runtime_error {
 public:
  InvariantViolation(const std::string& invariant, const std::string& detail)
      : std::runtime_error(invariant + ": " + detail), invariant(invariant) {}
  std::string invariant;
};

class CflError : public InvariantViolation {
 public:
  explicit CflError(const std::string& detail) : InvariantViolation("cfl", detail) {}
};

/// Fractional-step integrator. Holds solver workspaces, so one instance per
/// running simulation.
class Stepper {
 public:
  explicit Stepper(const SimConfig& cfg);
  ~Stepper();
  Stepper(const Stepper&) = delete;
  Stepper& operator=(const Stepper&) = delete;

  /// Upwind advection by u, implicit diffusion, implicit sink.
  /// Adds the amount removed by the sink to `consumed`.
  ScalarField advance_c(const SimState& s, double dt, double& consumed);
  /// Upwind transport by u + S_eps grad c, then implicit diffusion.
  ScalarField advance_n(const SimState& s, double dt);
  /// Skew-symmetric convection, implicit viscous step, buoyancy, projection.
  void advance_u(const SimState& s, double dt, VectorField& u, ScalarField& P);
  /// c, then n (seeing the new c), then u (seeing the new n).
  SimState step(const SimState& s, double dt);

  /// Throws InvariantViolation when the state breaks a hard invariant.
  void check_invariants(const SimState& s) const;

  /// u0 made discretely divergence free.
  VectorField project(const VectorField& u);

  /// (n0, c0, projected u0) at t = 0.
  SimState initial_state();

  const SimConfig& config() const { return cfg_; }
  double initial_mass() const { return mass0_; }

 private:
  struct Work;
  SimConfig cfg_;
  double mass0_;
  std::unique_ptr<Work> w_;
};

/// Face transport velocity u + S_eps grad c used for n.
VectorField transport_velocity(const SimState& s, const SimConfig& cfg);

/// y = Lap_h u for the staggered velocity with no-slip walls (ghost = -interior
/// for tangential components, wall-normal faces held at zero).
void vector_laplacian(const VectorField& u, VectorField& out);

/// -<u, Lap_h u>: the discrete Dirichlet energy int |grad u|^2.
double velocity_dirichlet_energy(const VectorField& u);

/// Skew-symmetric central convection term; <C(u), u> = 0 to round-off.
VectorField convection(const VectorField& u);

}  // namespace tmcf
