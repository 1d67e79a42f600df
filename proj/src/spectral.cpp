#include "spectralstrip/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spectralstrip {

namespace {

// Pivots below this (in units where the diagonal is ~2) are breakdowns.
constexpr double kPivotFloor = 1e-14;

struct BlockPivot {
  int negatives = 0;
  Mat inverse;
  bool ok = true;
};

// Inertia and inverse of a small hermitian block. Tries an unpivoted LDL*
// first and falls back to a full eigendecomposition when a pivot is small
// relative to the block.
BlockPivot factor_block(const Mat& d) {
  const int n = static_cast<int>(d.rows());
  BlockPivot out;
  const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());

  Mat l = Mat::Identity(n, n);
  RVec piv(n);
  bool stable = true;
  for (int j = 0; j < n && stable; ++j) {
    double dj = d(j, j).real();
    for (int k = 0; k < j; ++k) dj -= std::norm(l(j, k)) * piv(k);
    if (std::abs(dj) < 1e-8 * scale) {
      stable = false;
      break;
    }
    piv(j) = dj;
    for (int i = j + 1; i < n; ++i) {
      cplx s = d(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k)) * piv(k);
      l(i, j) = s / dj;
    }
  }
  if (stable) {
    out.negatives = static_cast<int>((piv.array() < 0.0).count());
    const Mat linv = l.triangularView<Eigen::UnitLower>().solve(Mat::Identity(n, n));
    out.inverse = linv.adjoint() * piv.cwiseInverse().asDiagonal() * linv;
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Mat> es(d);
  const RVec& mu = es.eigenvalues();
  if (mu.cwiseAbs().minCoeff() < kPivotFloor) {
    out.ok = false;
    return out;
  }
  out.negatives = static_cast<int>((mu.array() < 0.0).count());
  out.inverse = es.eigenvectors() * mu.cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
  return out;
}

// Inertia count of h^2 (H - shift), which has diagonal blocks
// 2I + h^2 (V_i - shift) and coupling -I. Returns -1 on pivot breakdown.
int inertia_scaled(const DiscreteHamiltonian& hd, double shift) {
  const double h2 = hd.grid().h * hd.grid().h;
  const int m = hd.interior_nodes();
  int count = 0;
  if (hd.dim() == 1) {
    double prev = 0.0;
    for (int k = 0; k < m; ++k) {
      double d = h2 * (hd.diagonal_block(k)(0, 0).real() - shift);
      if (k > 0) d -= 1.0 / prev;
      if (std::abs(d) < kPivotFloor || !std::isfinite(d)) return -1;
      if (d < 0.0) ++count;
      prev = d;
    }
    return count;
  }
  const int n = hd.dim();
  Mat prev_inv;
  for (int k = 0; k < m; ++k) {
    Mat d = h2 * hd.diagonal_block(k);
    d.diagonal().array() -= h2 * shift;
    if (k > 0) d -= prev_inv;
    BlockPivot p = factor_block(d);
    if (!p.ok || !p.inverse.allFinite()) return -1;
    count += p.negatives;
    prev_inv = std::move(p.inverse);
  }
  (void)n;
  return count;
}

}  // namespace

DiscreteHamiltonian::DiscreteHamiltonian(const MatrixField& v) : grid_(v.grid), dim_(v.dim) {
  const double kinetic = 2.0 / (grid_.h * grid_.h);
  const int m = grid_.n_points - 2;
  blocks_.reserve(static_cast<std::size_t>(m));
  floor_ = 0.0;
  for (int i = 1; i <= m; ++i) {
    const Mat& vi = v[i];
    Mat b = 0.5 * (vi + vi.adjoint());
    if (!b.isZero(0.0)) {
      Eigen::SelfAdjointEigenSolver<Mat> es(b, Eigen::EigenvaluesOnly);
      floor_ = std::min(floor_, es.eigenvalues().minCoeff());
    }
    b.diagonal().array() += kinetic;
    blocks_.push_back(std::move(b));
  }
}

DiscreteHamiltonian assemble(const MatrixField& v) { return DiscreteHamiltonian(v); }

int count_below(const DiscreteHamiltonian& hd, double shift) {
  double s = shift;
  const double nudge = 1e-12 * std::max(std::abs(shift), 1.0);
  for (int attempt = 0; attempt <= 3; ++attempt) {
    const int c = inertia_scaled(hd, s);
    if (c >= 0) return c;
    s = shift + (attempt + 1) * nudge;
  }
  throw NumericalError("count_below: pivot breakdown at shift " + std::to_string(shift));
}

int Spectrum::total_count() const {
  int l = 0;
  for (const Multiplet& m : multiplets) l += m.multiplicity;
  return l;
}

double marginal_floor(const Grid& grid) {
  const double k = M_PI / grid.width();
  return 10.0 * k * k;
}

double ground_energy(const DiscreteHamiltonian& hd, double tol) {
  if (count_below(hd, 0.0) == 0) return 0.0;
  double lo = hd.spectrum_floor() - 1.0;
  double hi = 0.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (count_below(hd, mid) >= 1)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

Spectrum negative_spectrum(const MatrixField& v, const SpectrumOptions& opts) {
  const DiscreteHamiltonian hd = assemble(v);
  Spectrum out;
  out.marginal_floor = marginal_floor(v.grid);

  const int total = count_below(hd, 0.0);
  if (total == 0) return out;

  const double depth = std::max(1.0, -hd.spectrum_floor());
  const double tol = 1e-10 * depth;

  // Depth-first bisection over (lo, hi] keeping the counts at both ends, so
  // intervals are emitted in ascending order.
  struct Interval {
    double lo, hi;
    int c_lo, c_hi;
  };
  std::vector<Interval> stack;
  const double lo0 = hd.spectrum_floor() - 1.0;
  stack.push_back({lo0, 0.0, count_below(hd, lo0), total});
  while (!stack.empty()) {
    Interval iv = stack.back();
    stack.pop_back();
    const int inside = iv.c_hi - iv.c_lo;
    if (inside == 0) continue;
    if (iv.hi - iv.lo <= tol) {
      const double e = 0.5 * (iv.lo + iv.hi);
      for (int k = 0; k < inside; ++k) out.raw_eigenvalues.push_back(e);
      continue;
    }
    const double mid = 0.5 * (iv.lo + iv.hi);
    const int c_mid = count_below(hd, mid);
    // Upper half pushed first so the lower half is processed next.
    stack.push_back({mid, iv.hi, c_mid, iv.c_hi});
    stack.push_back({iv.lo, mid, iv.c_lo, c_mid});
  }

  // raw_eigenvalues ascending == lambda descending.
  std::size_t i = 0;
  const auto& raw = out.raw_eigenvalues;
  while (i < raw.size()) {
    std::size_t j = i + 1;
    double sum = raw[i];
    while (j < raw.size()) {
      const double lam = -raw[j - 1];
      const double gap_tol = opts.cluster_tol > 0.0 ? opts.cluster_tol : std::max(1e-8, 1e-6 * lam);
      if (raw[j] - raw[j - 1] >= gap_tol) break;
      sum += raw[j];
      ++j;
    }
    Multiplet m;
    m.lambda = -sum / static_cast<double>(j - i);
    m.multiplicity = static_cast<int>(j - i);
    m.marginal = m.lambda < out.marginal_floor;
    out.multiplets.push_back(m);
    i = j;
  }
  return out;
}

double lt_moment(const Spectrum& s, double p) {
  double sum = 0.0;
  for (const Multiplet& m : s.multiplets) sum += m.multiplicity * std::pow(m.lambda, p);
  return sum;
}

std::vector<CVec> eigenvector_near(const MatrixField& v, double energy) {
  const DiscreteHamiltonian hd = assemble(v);
  const int m = hd.interior_nodes();
  const int n = hd.dim();
  const double h2 = v.grid.h * v.grid.h;

  // Block Thomas on h^2 (H - e): D_k = A_k - D_{k-1}^{-1}, coupling -I.
  std::vector<Mat> dinv(static_cast<std::size_t>(m));
  {
    Mat prev_inv;
    for (int k = 0; k < m; ++k) {
      Mat d = h2 * hd.diagonal_block(k);
      d.diagonal().array() -= h2 * energy;
      if (k > 0) d -= prev_inv;
      Eigen::SelfAdjointEigenSolver<Mat> es(d);
      RVec mu = es.eigenvalues();
      for (int q = 0; q < n; ++q)
        if (std::abs(mu(q)) < 1e-300) mu(q) = 1e-300;
      dinv[static_cast<std::size_t>(k)] =
          es.eigenvectors() * mu.cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
      prev_inv = dinv[static_cast<std::size_t>(k)];
    }
  }
  auto solve = [&](std::vector<CVec>& x) {
    // Forward: y_k = b_k + y_{k-1} projected through D_{k-1}^{-1}.
    std::vector<CVec> y(x.size());
    for (int k = 0; k < m; ++k) {
      y[k] = x[k];
      if (k > 0) y[k] += dinv[k - 1] * y[k - 1];
    }
    for (int k = m - 1; k >= 0; --k) {
      CVec r = y[k];
      if (k + 1 < m) r += x[k + 1];
      x[k] = dinv[k] * r;
    }
  };

  std::vector<CVec> x(static_cast<std::size_t>(m), CVec::Ones(n));
  auto normalize = [&] {
    double s = 0.0;
    for (const CVec& c : x) s += c.squaredNorm();
    s = std::sqrt(s * v.grid.h);
    for (CVec& c : x) c /= s;
  };
  normalize();
  for (int it = 0; it < 6; ++it) {
    solve(x);
    normalize();
  }

  std::vector<CVec> full(static_cast<std::size_t>(v.grid.n_points), CVec::Zero(n));
  for (int k = 0; k < m; ++k) full[static_cast<std::size_t>(k + 1)] = x[static_cast<std::size_t>(k)];
  return full;
}

}  // namespace spectralstrip
