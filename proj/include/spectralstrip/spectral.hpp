#pragma once

#include <vector>

#include "spectralstrip/lattice.hpp"

namespace spectralstrip {

/// Second-order finite-difference form of -d^2/dx^2 (x) I + V on the interior
/// nodes, Dirichlet at both grid ends. Stored as the diagonal blocks
/// 2/h^2 I + V(x_i); the coupling between neighbours is -1/h^2 I.
class DiscreteHamiltonian {
 public:
  explicit DiscreteHamiltonian(const MatrixField& v);

  int dim() const { return dim_; }
  const Grid& grid() const { return grid_; }
  int interior_nodes() const { return static_cast<int>(blocks_.size()); }
  int size() const { return interior_nodes() * dim_; }
  const Mat& diagonal_block(int k) const { return blocks_[static_cast<std::size_t>(k)]; }
  double off_diagonal() const { return -1.0 / (grid_.h * grid_.h); }
  // Lower bound on the spectrum: min eigenvalue of V over the nodes.
  double spectrum_floor() const { return floor_; }

 private:
  Grid grid_;
  int dim_ = 1;
  std::vector<Mat> blocks_;
  double floor_ = 0.0;
};

DiscreteHamiltonian assemble(const MatrixField& v);

// Number of eigenvalues strictly below shift, from the inertia of the block
// LDL* factorization of H - shift. Throws NumericalError on repeated pivot
// breakdown.
int count_below(const DiscreteHamiltonian& hd, double shift);

struct Multiplet {
  double lambda = 0.0;  // eigenvalue is -lambda
  int multiplicity = 1;
  bool marginal = false;  // below the Dirichlet-box resolution floor
};

struct Spectrum {
  std::vector<Multiplet> multiplets;  // lambda descending, ground first
  std::vector<double> raw_eigenvalues;  // -lambda values, ascending
  double marginal_floor = 0.0;

  int total_count() const;
  bool empty() const { return multiplets.empty(); }
};

struct SpectrumOptions {
  // Absolute gap below which consecutive eigenvalues merge; <= 0 selects the
  // default max(1e-8, 1e-6 * lambda).
  double cluster_tol = 0.0;
};

// 10 * (pi / width)^2: eigenvalues shallower than this are not resolved by the
// Dirichlet box.
double marginal_floor(const Grid& grid);

Spectrum negative_spectrum(const MatrixField& v, const SpectrumOptions& opts = {});

// Smallest eigenvalue of H located by inertia bisection to the given absolute
// tolerance. Returns 0 if H has no negative eigenvalue.
double ground_energy(const DiscreteHamiltonian& hd, double tol);

// Sum over multiplets of multiplicity * lambda^p.
double lt_moment(const Spectrum& s, double p);

// Normalized eigenvector of the discrete operator nearest to energy e, by
// inverse iteration with a block-tridiagonal solve. The result is sampled on
// every grid node (zero at both ends). Used to build test vectors.
std::vector<CVec> eigenvector_near(const MatrixField& v, double energy);

}  // namespace spectralstrip
