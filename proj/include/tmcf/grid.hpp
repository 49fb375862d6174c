#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace tmcf {

/// Uniform Cartesian discretization of [0,lx] x [0,ly].
///
/// Scalars live at cell centers (i + 1/2) h_x, (j + 1/2) h_y with the
/// linear index j * nx + i. Velocities are staggered (MAC): x-components on
/// the nx+1 vertical face columns, y-components on the ny+1 horizontal rows.
class Grid {
 public:
  Grid(int nx, int ny, double lx, double ly);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double area() const { return area_; }
  double min_spacing() const { return hx_ < hy_ ? hx_ : hy_; }

  std::size_t cell_count() const { return static_cast<std::size_t>(nx_) * ny_; }
  std::size_t xface_count() const { return static_cast<std::size_t>(nx_ + 1) * ny_; }
  std::size_t yface_count() const { return static_cast<std::size_t>(nx_) * (ny_ + 1); }

  /// Quadrature weight carried by one cell (and by one face in the
  /// staggered inner products).
  double cell_volume() const { return area_ / static_cast<double>(cell_count()); }

  std::size_t cell(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }
  std::size_t xface(int i, int j) const { return static_cast<std::size_t>(j) * (nx_ + 1) + i; }
  std::size_t yface(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }

  double xc(int i) const { return (i + 0.5) * hx_; }
  double yc(int j) const { return (j + 0.5) * hy_; }
  double xf(int i) const { return i * hx_; }
  double yf(int j) const { return j * hy_; }

  bool operator==(const Grid& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && lx_ == o.lx_ && ly_ == o.ly_;
  }

 private:
  int nx_, ny_;
  double lx_, ly_, hx_, hy_, area_;
};

Grid make_grid(int nx, int ny, double lx, double ly);

enum class ScalarBc { neumann, none };
enum class VectorBc { dirichlet_zero, neumann_derived };

class ScalarField {
 public:
  explicit ScalarField(const Grid& g, double value = 0.0, ScalarBc bc = ScalarBc::neumann);
  ScalarField(const Grid& g, std::vector<double> values, ScalarBc bc = ScalarBc::neumann);

  const Grid& grid() const { return grid_; }
  ScalarBc bc() const { return bc_; }
  void set_bc(ScalarBc bc) { bc_ = bc; }

  double& operator()(int i, int j) { return v_[grid_.cell(i, j)]; }
  double operator()(int i, int j) const { return v_[grid_.cell(i, j)]; }
  double& operator[](std::size_t k) { return v_[k]; }
  double operator[](std::size_t k) const { return v_[k]; }
  std::size_t size() const { return v_.size(); }

  std::span<double> values() { return v_; }
  std::span<const double> values() const { return v_; }

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator+=(double c);
  ScalarField& operator*=(double c);

  bool operator==(const ScalarField& o) const { return grid_ == o.grid_ && v_ == o.v_; }

 private:
  Grid grid_;
  std::vector<double> v_;
  ScalarBc bc_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double c, ScalarField a);
/// Pointwise product.
ScalarField hadamard(const ScalarField& a, const ScalarField& b);

template <class Fn>
ScalarField sample(const Grid& g, Fn&& fn, ScalarBc bc = ScalarBc::neumann) {
  ScalarField f(g, 0.0, bc);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) f(i, j) = fn(g.xc(i), g.yc(j));
  return f;
}

template <class Fn>
ScalarField map(const ScalarField& f, Fn&& fn) {
  ScalarField out = f;
  for (auto& v : out.values()) v = fn(v);
  return out;
}

class VectorField {
 public:
  /// Zero field.
  explicit VectorField(const Grid& g, VectorBc bc = VectorBc::dirichlet_zero);
  /// Throws std::invalid_argument on size mismatch or, for dirichlet_zero,
  /// on any nonzero wall-normal boundary face.
  VectorField(const Grid& g, std::vector<double> x, std::vector<double> y, VectorBc bc);

  const Grid& grid() const { return grid_; }
  VectorBc bc() const { return bc_; }

  double& x(int i, int j) { return x_[grid_.xface(i, j)]; }
  double x(int i, int j) const { return x_[grid_.xface(i, j)]; }
  double& y(int i, int j) { return y_[grid_.yface(i, j)]; }
  double y(int i, int j) const { return y_[grid_.yface(i, j)]; }

  std::span<double> xs() { return x_; }
  std::span<const double> xs() const { return x_; }
  std::span<double> ys() { return y_; }
  std::span<const double> ys() const { return y_; }

  /// True when every wall-normal boundary face is exactly zero.
  bool boundary_is_zero() const;

  bool operator==(const VectorField& o) const {
    return grid_ == o.grid_ && x_ == o.x_ && y_ == o.y_;
  }

 private:
  Grid grid_;
  std::vector<double> x_, y_;
  VectorBc bc_;
};

// Quadrature. All integrals use the midpoint rule on the uniform cells,
// written as area * (sum / N) so that integrate(1) == area exactly.
double integrate(const ScalarField& f);
double mean(const ScalarField& f);
double max_value(const ScalarField& f);
double min_value(const ScalarField& f);
double max_abs(const ScalarField& f);
bool all_finite(const ScalarField& f);
bool all_finite(const VectorField& v);

/// L2 inner product of two scalar fields.
double inner(const ScalarField& a, const ScalarField& b);
/// Staggered inner product: every face carries one cell volume of weight.
double inner(const VectorField& a, const VectorField& b);
double norm_l2(const ScalarField& f);

// Differential operators with mirrored ghost cells for Neumann data.
VectorField gradient_neumann(const ScalarField& f);
ScalarField laplacian_neumann(const ScalarField& f);
ScalarField divergence(const VectorField& v);
double max_abs_divergence(const VectorField& v);

/// Face-to-center average of a staggered field (used for output only).
void center_components(const VectorField& v, ScalarField& vx, ScalarField& vy);

// CSV I/O. Scalars: `x,y,value` at cell centers; vectors: `x,y,vx,vy`
// interpolated to centers. Face-level component files (`x,y,value` at face
// midpoints) keep checkpoints lossless. All numbers are printed with 17
// significant digits so a read restores the exact doubles.
void write_scalar_csv(std::ostream& os, const ScalarField& f);
ScalarField read_scalar_csv(std::istream& is, const Grid& g);
void write_vector_csv(std::ostream& os, const VectorField& v);
void write_face_csv(std::ostream& os, const VectorField& v, int component);
std::vector<double> read_face_csv(std::istream& is, const Grid& g, int component);

}  // namespace tmcf
