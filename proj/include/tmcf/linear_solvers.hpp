#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmcf/grid.hpp"

namespace tmcf {

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = true;
};

/// Raised when an iterative solve misses its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, SolveReport r) : std::runtime_error(what), report(r) {}
  SolveReport report;
};

/// Exact inverse of (alpha I - beta Lap_N) for the cell-centered 5-point
/// Neumann Laplacian, by 2D cosine transforms (DCT-II / DCT-III).
///
/// With alpha == 0 the constant mode is dropped, which selects the
/// zero-mean member of the solution set.
class NeumannSpectralInverse {
 public:
  explicit NeumannSpectralInverse(const Grid& g);
  ~NeumannSpectralInverse();
  NeumannSpectralInverse(const NeumannSpectralInverse&) = delete;
  NeumannSpectralInverse& operator=(const NeumannSpectralInverse&) = delete;

  void apply(std::span<const double> in, std::span<double> out, double alpha, double beta);

  /// Eigenvalue of -Lap_N for cosine mode (k, l).
  double eigenvalue(int k, int l) const;

  /// Forward DCT-II coefficients (FFTW's unnormalized REDFT10).
  void forward(std::span<const double> in, std::span<double> out);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Exact inverse of (alpha I - beta Lap_h) for staggered velocities with
/// no-slip walls: wall-normal faces are fixed at zero (DST-I across the
/// faces), tangential components see ghost = -interior (DST-II along the
/// wall). Wall faces of the output are zero.
class NoSlipSpectralInverse {
 public:
  explicit NoSlipSpectralInverse(const Grid& g);
  ~NoSlipSpectralInverse();
  NoSlipSpectralInverse(const NoSlipSpectralInverse&) = delete;
  NoSlipSpectralInverse& operator=(const NoSlipSpectralInverse&) = delete;

  void apply(const VectorField& in, VectorField& out, double alpha, double beta);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// (alpha I - beta Lap_N) x = b by preconditioned conjugate gradients with
/// the spectral inverse as preconditioner. For alpha == 0 the right-hand
/// side is projected to zero mean and x is returned in the zero-mean gauge.
/// `x` is used as the initial guess.
class NeumannSolver {
 public:
  explicit NeumannSolver(const Grid& g) : grid_(g), precond_(g) {}

  SolveReport solve(double alpha, double beta, const ScalarField& b, ScalarField& x, double rel_tol = 1e-12,
                    int max_iter = 200);

  const Grid& grid() const { return grid_; }

 private:
  Grid grid_;
  NeumannSpectralInverse precond_;
  std::vector<double> r_, z_, p_, ap_;
};

/// y = (alpha I - beta Lap_N) x on raw cell arrays.
void apply_neumann_operator(const Grid& g, std::span<const double> x, std::span<double> y, double alpha,
                            double beta);

}  // namespace tmcf
