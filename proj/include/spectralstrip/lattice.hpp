#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spectralstrip/errors.hpp"

namespace spectralstrip {

using cplx = std::complex<double>;

// Matrix potentials are small (N <= kMaxDim), so every per-node matrix lives
// on the stack.
inline constexpr int kMaxDim = 8;
using Mat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using RVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using CVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, 0, kMaxDim, 1>;

/// Contiguous per-node N x N matrices; each node is exposed as an Eigen::Map.
class MatrixSeries {
 public:
  using View = Eigen::Map<Eigen::MatrixXcd>;
  using ConstView = Eigen::Map<const Eigen::MatrixXcd>;

  MatrixSeries() = default;
  explicit MatrixSeries(int dim, int count = 0)
      : dim_(dim), data_(static_cast<std::size_t>(dim * dim * count), cplx(0.0, 0.0)) {}

  int dim() const { return dim_; }
  int size() const { return dim_ == 0 ? 0 : static_cast<int>(data_.size()) / (dim_ * dim_); }
  bool empty() const { return data_.empty(); }
  void reserve(int count) { data_.reserve(static_cast<std::size_t>(dim_ * dim_ * count)); }

  View operator[](int i) { return View(data_.data() + offset(i), dim_, dim_); }
  ConstView operator[](int i) const { return ConstView(data_.data() + offset(i), dim_, dim_); }
  ConstView back() const { return (*this)[size() - 1]; }

  template <typename Derived>
  void push_back(const Eigen::MatrixBase<Derived>& m) {
    const Mat tmp = m;
    data_.insert(data_.end(), tmp.data(), tmp.data() + dim_ * dim_);
  }

 private:
  std::size_t offset(int i) const { return static_cast<std::size_t>(i) * static_cast<std::size_t>(dim_ * dim_); }

  int dim_ = 0;
  std::vector<cplx> data_;
};

/// Uniform lattice x_i = x_min + i*h, i = 0..n_points-1.
struct Grid {
  double x_min = 0.0;
  double x_max = 0.0;
  int n_points = 0;
  double h = 0.0;

  double node(int i) const { return x_min + i * h; }
  double width() const { return x_max - x_min; }
  int nearest_index(double x) const;

  friend bool operator==(const Grid&, const Grid&) = default;
};

Grid make_uniform_grid(double x_min, double x_max, int n_points);

/// Grid-sampled N x N matrix field. Transform outputs live here; they carry no
/// support claim.
struct MatrixField {
  Grid grid;
  int dim = 1;
  MatrixSeries samples;

  MatrixField() = default;
  MatrixField(Grid g, int n);  // zero field

  MatrixSeries::ConstView operator[](int i) const { return samples[i]; }
  MatrixSeries::View operator[](int i) { return samples[i]; }
  int size() const { return grid.n_points; }

  double max_hermiticity_defect() const;
  double max_norm2() const;  // max over nodes of the spectral norm
  // Index range [first, last] of nodes with a nonzero sample; {-1,-1} if zero.
  std::pair<int, int> support_indices() const;
  bool is_zero() const { return support_indices().first < 0; }
};

/// Field with compact support in [-a, a], hermitian at every node.
class MatrixPotential : public MatrixField {
 public:
  MatrixPotential() = default;
  // Validates hermiticity, the support claim and that the grid strictly
  // contains [-a, a]. Throws ParameterError.
  MatrixPotential(MatrixField field, double support_half_width);

  double support_half_width() const { return a_; }

 private:
  double a_ = 0.0;
};

// V = -depth * I_N on [-a, a]. A node sitting on an edge (|x| = a up to
// rounding) carries half the depth, the mean of the one-sided limits; this
// keeps the finite-difference eigenvalues second-order accurate.
MatrixPotential square_well(double depth, double a, int dim, const Grid& grid);

// Diagonal well diag(depths) on [-a, a], same edge convention as square_well.
MatrixPotential diagonal_well(const std::vector<double>& depths, double a, const Grid& grid);

enum class RandomStructure { full, diagonal };

// V(x) = -strength * eta(x/a) * B(x) B(x)^*, B from a seeded trigonometric
// polynomial. Diagonal structure draws only B's diagonal, in the same order
// the full structure draws its (0,0) entry first.
MatrixPotential random_potential(std::uint64_t seed, int dim, double a, double strength,
                                 const Grid& grid,
                                 RandomStructure structure = RandomStructure::full);

// Smooth bump exp(-1/(1-t^2)) on |t| < 1.
double bump(double t);

struct Truncation {
  MatrixPotential potential;
  double cutoff_radius = 0.0;
  double tail_mass = 0.0;  // integral of Tr(field^2) over |x| > cutoff_radius
};

// Largest Frobenius norm over the outer 5% of nodes on each side.
double edge_band_norm(const MatrixField& field);

// Zero the field outside the smallest symmetric [-c, c] beyond which every
// node has Frobenius norm below threshold. Throws DecayError when the outer
// 5% of nodes on either side is not below 10*threshold.
Truncation truncate_support(const MatrixField& field, double threshold);

// Trapezoidal integral of Tr(field(x)^power), power in {1, 2}.
double potential_moment(const MatrixField& field, int power);

// JSON potential file: {"grid": {...}, "dim", "a", "samples": [[[re, im], ...], ...]}.
std::string potential_to_json(const MatrixPotential& v);
MatrixPotential potential_from_json(const std::string& text);
void write_potential(const MatrixPotential& v, const std::string& path);
MatrixPotential read_potential(const std::string& path);

// CSV with columns x, tr_v, tr_v2.
void write_potential_csv(const MatrixField& field, std::ostream& out);

}  // namespace spectralstrip
