#include "tmcf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "csv_util.hpp"

namespace tmcf {

Grid::Grid(int nx, int ny, double lx, double ly) : nx_(nx), ny_(ny), lx_(lx), ly_(ly) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("grid needs at least 2 cells per direction");
  if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
    throw std::invalid_argument("grid side lengths must be positive and finite");
  hx_ = lx / nx;
  hy_ = ly / ny;
  area_ = lx * ly;
}

Grid make_grid(int nx, int ny, double lx, double ly) { return Grid(nx, ny, lx, ly); }

// ---------------------------------------------------------------------------

ScalarField::ScalarField(const Grid& g, double value, ScalarBc bc)
    : grid_(g), v_(g.cell_count(), value), bc_(bc) {}

ScalarField::ScalarField(const Grid& g, std::vector<double> values, ScalarBc bc)
    : grid_(g), v_(std::move(values)), bc_(bc) {
  if (v_.size() != g.cell_count()) throw std::invalid_argument("scalar field size does not match grid");
}

static void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw std::invalid_argument("fields live on different grids");
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  require_same_grid(grid_, o.grid_);
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  require_same_grid(grid_, o.grid_);
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
  return *this;
}

ScalarField& ScalarField::operator+=(double c) {
  for (auto& v : v_) v += c;
  return *this;
}

ScalarField& ScalarField::operator*=(double c) {
  for (auto& v : v_) v *= c;
  return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double c, ScalarField a) { return a *= c; }

ScalarField hadamard(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid(), b.grid());
  ScalarField out = a;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= b[k];
  return out;
}

// ---------------------------------------------------------------------------

VectorField::VectorField(const Grid& g, VectorBc bc)
    : grid_(g), x_(g.xface_count(), 0.0), y_(g.yface_count(), 0.0), bc_(bc) {}

VectorField::VectorField(const Grid& g, std::vector<double> x, std::vector<double> y, VectorBc bc)
    : grid_(g), x_(std::move(x)), y_(std::move(y)), bc_(bc) {
  if (x_.size() != g.xface_count() || y_.size() != g.yface_count())
    throw std::invalid_argument("vector field component counts do not match the staggered grid");
  if (bc_ == VectorBc::dirichlet_zero && !boundary_is_zero())
    throw std::invalid_argument("dirichlet_zero vector field has nonzero boundary faces");
}

bool VectorField::boundary_is_zero() const {
  const int nx = grid_.nx(), ny = grid_.ny();
  for (int j = 0; j < ny; ++j)
    if (x(0, j) != 0.0 || x(nx, j) != 0.0) return false;
  for (int i = 0; i < nx; ++i)
    if (y(i, 0) != 0.0 || y(i, ny) != 0.0) return false;
  return true;
}

// ---------------------------------------------------------------------------

double mean(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s / static_cast<double>(f.size());
}

double integrate(const ScalarField& f) { return f.grid().area() * mean(f); }

double max_value(const ScalarField& f) { return *std::max_element(f.values().begin(), f.values().end()); }
double min_value(const ScalarField& f) { return *std::min_element(f.values().begin(), f.values().end()); }

double max_abs(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(const ScalarField& f) {
  return std::all_of(f.values().begin(), f.values().end(), [](double v) { return std::isfinite(v); });
}

bool all_finite(const VectorField& v) {
  auto fin = [](double a) { return std::isfinite(a); };
  return std::all_of(v.xs().begin(), v.xs().end(), fin) && std::all_of(v.ys().begin(), v.ys().end(), fin);
}

double inner(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid(), b.grid());
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return a.grid().area() * (s / static_cast<double>(a.size()));
}

double inner(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid(), b.grid());
  double s = 0.0;
  for (std::size_t k = 0; k < a.xs().size(); ++k) s += a.xs()[k] * b.xs()[k];
  for (std::size_t k = 0; k < a.ys().size(); ++k) s += a.ys()[k] * b.ys()[k];
  return a.grid().area() * (s / static_cast<double>(a.grid().cell_count()));
}

double norm_l2(const ScalarField& f) { return std::sqrt(inner(f, f)); }

// ---------------------------------------------------------------------------

VectorField gradient_neumann(const ScalarField& f) {
  const Grid& g = f.grid();
  const int nx = g.nx(), ny = g.ny();
  VectorField out(g, VectorBc::neumann_derived);
  // Boundary faces stay zero: the mirrored ghost equals its interior twin.
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i) out.x(i, j) = (f(i, j) - f(i - 1, j)) / g.hx();
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) out.y(i, j) = (f(i, j) - f(i, j - 1)) / g.hy();
  return out;
}

ScalarField divergence(const VectorField& v) {
  const Grid& g = v.grid();
  ScalarField out(g, 0.0, ScalarBc::none);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      out(i, j) = (v.x(i + 1, j) - v.x(i, j)) / g.hx() + (v.y(i, j + 1) - v.y(i, j)) / g.hy();
  return out;
}

ScalarField laplacian_neumann(const ScalarField& f) {
  if (f.bc() != ScalarBc::neumann) throw std::invalid_argument("laplacian_neumann needs a neumann-tagged field");
  ScalarField out = divergence(gradient_neumann(f));
  out.set_bc(ScalarBc::neumann);
  return out;
}

double max_abs_divergence(const VectorField& v) { return max_abs(divergence(v)); }

void center_components(const VectorField& v, ScalarField& vx, ScalarField& vy) {
  const Grid& g = v.grid();
  vx = ScalarField(g, 0.0, ScalarBc::none);
  vy = ScalarField(g, 0.0, ScalarBc::none);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      vx(i, j) = 0.5 * (v.x(i, j) + v.x(i + 1, j));
      vy(i, j) = 0.5 * (v.y(i, j) + v.y(i, j + 1));
    }
}

// ---------------------------------------------------------------------------

using detail::num;

void write_scalar_csv(std::ostream& os, const ScalarField& f) {
  const Grid& g = f.grid();
  os << "x,y,value\n";
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) os << num(g.xc(i)) << ',' << num(g.yc(j)) << ',' << num(f(i, j)) << '\n';
}

namespace {

std::vector<double> read_value_column(std::istream& is, std::size_t expected, const char* what) {
  std::string line;
  std::size_t row = 1;
  if (!std::getline(is, line)) throw std::runtime_error(std::string(what) + ": empty CSV");
  auto header = detail::split_csv(line);
  if (header.size() != 3 || header[0] != "x" || header[1] != "y" || header[2] != "value")
    throw std::runtime_error(std::string(what) + ": expected header x,y,value at row 1");
  std::vector<double> values;
  values.reserve(expected);
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    auto cols = detail::split_csv(line);
    if (cols.size() != 3) throw std::runtime_error(std::string(what) + ": wrong column count at row " + std::to_string(row));
    values.push_back(detail::parse_double(cols[2], row));
  }
  if (values.size() != expected)
    throw std::runtime_error(std::string(what) + ": expected " + std::to_string(expected) + " rows, got " +
                             std::to_string(values.size()));
  return values;
}

}  // namespace

ScalarField read_scalar_csv(std::istream& is, const Grid& g) {
  return ScalarField(g, read_value_column(is, g.cell_count(), "scalar field"));
}

void write_vector_csv(std::ostream& os, const VectorField& v) {
  const Grid& g = v.grid();
  ScalarField vx(g), vy(g);
  center_components(v, vx, vy);
  os << "x,y,vx,vy\n";
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      os << num(g.xc(i)) << ',' << num(g.yc(j)) << ',' << num(vx(i, j)) << ',' << num(vy(i, j)) << '\n';
}

void write_face_csv(std::ostream& os, const VectorField& v, int component) {
  const Grid& g = v.grid();
  os << "x,y,value\n";
  if (component == 0) {
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i <= g.nx(); ++i) os << num(g.xf(i)) << ',' << num(g.yc(j)) << ',' << num(v.x(i, j)) << '\n';
  } else {
    for (int j = 0; j <= g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i) os << num(g.xc(i)) << ',' << num(g.yf(j)) << ',' << num(v.y(i, j)) << '\n';
  }
}

std::vector<double> read_face_csv(std::istream& is, const Grid& g, int component) {
  return read_value_column(is, component == 0 ? g.xface_count() : g.yface_count(), "face field");
}

}  // namespace tmcf
