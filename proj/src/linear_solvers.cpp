#include "tmcf/linear_solvers.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>

namespace tmcf {

namespace {
// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}
}  // namespace

struct NeumannSpectralInverse::Impl {
  Grid grid;
  double* buf_a = nullptr;
  double* buf_b = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
  std::vector<double> lam_x, lam_y;

  explicit Impl(const Grid& g) : grid(g) {
    const std::size_t n = g.cell_count();
    std::lock_guard lock(planner_mutex());
    buf_a = fftw_alloc_real(n);
    buf_b = fftw_alloc_real(n);
    // FFTW_ESTIMATE keeps the chosen algorithm, hence rounding, deterministic.
    fwd = fftw_plan_r2r_2d(g.ny(), g.nx(), buf_a, buf_b, FFTW_REDFT10, FFTW_REDFT10, FFTW_ESTIMATE);
    inv = fftw_plan_r2r_2d(g.ny(), g.nx(), buf_b, buf_a, FFTW_REDFT01, FFTW_REDFT01, FFTW_ESTIMATE);
    lam_x.resize(g.nx());
    lam_y.resize(g.ny());
    for (int k = 0; k < g.nx(); ++k) {
      double s = std::sin(std::numbers::pi * k / (2.0 * g.nx()));
      lam_x[k] = 4.0 * s * s / (g.hx() * g.hx());
    }
    for (int l = 0; l < g.ny(); ++l) {
      double s = std::sin(std::numbers::pi * l / (2.0 * g.ny()));
      lam_y[l] = 4.0 * s * s / (g.hy() * g.hy());
    }
  }

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    fftw_free(buf_a);
    fftw_free(buf_b);
  }
};

NeumannSpectralInverse::NeumannSpectralInverse(const Grid& g) : impl_(std::make_unique<Impl>(g)) {}
NeumannSpectralInverse::~NeumannSpectralInverse() = default;

double NeumannSpectralInverse::eigenvalue(int k, int l) const { return impl_->lam_x[k] + impl_->lam_y[l]; }

void NeumannSpectralInverse::forward(std::span<const double> in, std::span<double> out) {
  auto& m = *impl_;
  std::copy(in.begin(), in.end(), m.buf_a);
  fftw_execute(m.fwd);
  std::copy(m.buf_b, m.buf_b + in.size(), out.begin());
}

void NeumannSpectralInverse::apply(std::span<const double> in, std::span<double> out, double alpha, double beta) {
  auto& m = *impl_;
  const int nx = m.grid.nx(), ny = m.grid.ny();
  std::copy(in.begin(), in.end(), m.buf_a);
  fftw_execute(m.fwd);
  const double norm = 4.0 * nx * ny;
  for (int l = 0; l < ny; ++l)
    for (int k = 0; k < nx; ++k) {
      const std::size_t idx = static_cast<std::size_t>(l) * nx + k;
      const double d = alpha + beta * (m.lam_x[k] + m.lam_y[l]);
      m.buf_b[idx] = d > 0.0 ? m.buf_b[idx] / (d * norm) : 0.0;
    }
  fftw_execute(m.inv);
  std::copy(m.buf_a, m.buf_a + in.size(), out.begin());
}

// ---------------------------------------------------------------------------

namespace {

// One staggered component: `rows` x `cols` interior unknowns, sine
// transforms of the given kinds along each direction.
struct SineBlock {
  int rows, cols;
  double* buf_a = nullptr;
  double* buf_b = nullptr;
  fftw_plan fwd = nullptr, inv = nullptr;
  std::vector<double> lam_r, lam_c;
  double norm;

  // dirichlet_rows: rows are face-aligned unknowns (DST-I), otherwise cell
  // aligned with odd reflection (DST-II). Same for columns.
  SineBlock(int r, int c, bool dirichlet_rows, bool dirichlet_cols, double hr, double hc) : rows(r), cols(c) {
    const std::size_t n = static_cast<std::size_t>(r) * c;
    buf_a = fftw_alloc_real(n);
    buf_b = fftw_alloc_real(n);
    const fftw_r2r_kind kr = dirichlet_rows ? FFTW_RODFT00 : FFTW_RODFT10;
    const fftw_r2r_kind kc = dirichlet_cols ? FFTW_RODFT00 : FFTW_RODFT10;
    const fftw_r2r_kind ir = dirichlet_rows ? FFTW_RODFT00 : FFTW_RODFT01;
    const fftw_r2r_kind ic = dirichlet_cols ? FFTW_RODFT00 : FFTW_RODFT01;
    fwd = fftw_plan_r2r_2d(r, c, buf_a, buf_b, kr, kc, FFTW_ESTIMATE);
    inv = fftw_plan_r2r_2d(r, c, buf_b, buf_a, ir, ic, FFTW_ESTIMATE);
    // Both kinds have frequencies 1..N over a period of 2 * (cells across).
    const int cells_r = dirichlet_rows ? r + 1 : r;
    const int cells_c = dirichlet_cols ? c + 1 : c;
    auto fill = [](std::vector<double>& lam, int count, int cells, double h) {
      lam.resize(count);
      for (int k = 0; k < count; ++k) {
        const double s = std::sin(std::numbers::pi * (k + 1) / (2.0 * cells));
        lam[k] = 4.0 * s * s / (h * h);
      }
    };
    fill(lam_r, r, cells_r, hr);
    fill(lam_c, c, cells_c, hc);
    norm = 4.0 * cells_r * cells_c;
  }

  ~SineBlock() {
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    fftw_free(buf_a);
    fftw_free(buf_b);
  }

  void solve(double alpha, double beta) {
    fftw_execute(fwd);
    for (int a = 0; a < rows; ++a)
      for (int b = 0; b < cols; ++b) {
        const std::size_t idx = static_cast<std::size_t>(a) * cols + b;
        buf_b[idx] /= (alpha + beta * (lam_r[a] + lam_c[b])) * norm;
      }
    fftw_execute(inv);
  }
};

}  // namespace

struct NoSlipSpectralInverse::Impl {
  Grid grid;
  std::unique_ptr<SineBlock> xb, yb;
  explicit Impl(const Grid& g) : grid(g) {
    std::lock_guard lock(planner_mutex());
    // x-faces: rows along y (cell aligned), columns i = 1..nx-1 (face aligned).
    xb = std::make_unique<SineBlock>(g.ny(), g.nx() - 1, false, true, g.hy(), g.hx());
    // y-faces: rows j = 1..ny-1 (face aligned), columns along x (cell aligned).
    yb = std::make_unique<SineBlock>(g.ny() - 1, g.nx(), true, false, g.hy(), g.hx());
  }
  ~Impl() {
    std::lock_guard lock(planner_mutex());
    xb.reset();
    yb.reset();
  }
};

NoSlipSpectralInverse::NoSlipSpectralInverse(const Grid& g) : impl_(std::make_unique<Impl>(g)) {}
NoSlipSpectralInverse::~NoSlipSpectralInverse() = default;

void NoSlipSpectralInverse::apply(const VectorField& in, VectorField& out, double alpha, double beta) {
  auto& m = *impl_;
  const int nx = m.grid.nx(), ny = m.grid.ny();
  SineBlock& xb = *m.xb;
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i) xb.buf_a[static_cast<std::size_t>(j) * (nx - 1) + (i - 1)] = in.x(i, j);
  xb.solve(alpha, beta);
  for (int j = 0; j < ny; ++j) {
    out.x(0, j) = 0.0;
    out.x(nx, j) = 0.0;
    for (int i = 1; i < nx; ++i) out.x(i, j) = xb.buf_a[static_cast<std::size_t>(j) * (nx - 1) + (i - 1)];
  }
  SineBlock& yb = *m.yb;
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) yb.buf_a[static_cast<std::size_t>(j - 1) * nx + i] = in.y(i, j);
  yb.solve(alpha, beta);
  for (int i = 0; i < nx; ++i) {
    out.y(i, 0) = 0.0;
    out.y(i, ny) = 0.0;
  }
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) out.y(i, j) = yb.buf_a[static_cast<std::size_t>(j - 1) * nx + i];
}

void apply_neumann_operator(const Grid& g, std::span<const double> x, std::span<double> y, double alpha,
                            double beta) {
  const int nx = g.nx(), ny = g.ny();
  const double ax = beta / (g.hx() * g.hx()), ay = beta / (g.hy() * g.hy());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const std::size_t c = g.cell(i, j);
      const double xc = x[c];
      double lap = 0.0;
      if (i > 0) lap += ax * (x[c - 1] - xc);
      if (i < nx - 1) lap += ax * (x[c + 1] - xc);
      if (j > 0) lap += ay * (x[c - nx] - xc);
      if (j < ny - 1) lap += ay * (x[c + nx] - xc);
      y[c] = alpha * xc - lap;
    }
}

SolveReport NeumannSolver::solve(double alpha, double beta, const ScalarField& b_in, ScalarField& x, double rel_tol,
                                 int max_iter) {
  const std::size_t n = grid_.cell_count();
  r_.resize(n);
  z_.resize(n);
  p_.resize(n);
  ap_.resize(n);
  std::vector<double> b(b_in.values().begin(), b_in.values().end());
  auto xs = x.values();
  if (alpha == 0.0) {
    // Singular Neumann problem: enforce compatibility and the zero-mean gauge.
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    for (auto& v : b) v -= mb;
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    for (auto& v : xs) v -= mx;
  }

  const double bnorm = std::sqrt(dot(b, b));
  SolveReport rep;
  if (bnorm == 0.0) {
    std::fill(xs.begin(), xs.end(), 0.0);
    return rep;
  }

  apply_neumann_operator(grid_, xs, ap_, alpha, beta);
  for (std::size_t k = 0; k < n; ++k) r_[k] = b[k] - ap_[k];
  double rnorm = std::sqrt(dot(r_, r_));
  precond_.apply(r_, z_, alpha, beta);
  p_ = z_;
  double rz = dot(r_, z_);
  int it = 0;
  while (rnorm > rel_tol * bnorm && it < max_iter) {
    apply_neumann_operator(grid_, p_, ap_, alpha, beta);
    const double pap = dot(p_, ap_);
    if (!(pap > 0.0)) break;
    const double a = rz / pap;
    for (std::size_t k = 0; k < n; ++k) {
      xs[k] += a * p_[k];
      r_[k] -= a * ap_[k];
    }
    rnorm = std::sqrt(dot(r_, r_));
    ++it;
    if (rnorm <= rel_tol * bnorm) break;
    precond_.apply(r_, z_, alpha, beta);
    const double rz_new = dot(r_, z_);
    const double beta_cg = rz_new / rz;
    rz = rz_new;
    for (std::size_t k = 0; k < n; ++k) p_[k] = z_[k] + beta_cg * p_[k];
  }
  rep.iterations = it;
  rep.relative_residual = rnorm / bnorm;
  rep.converged = rep.relative_residual <= rel_tol;
  return rep;
}

}  // namespace tmcf
