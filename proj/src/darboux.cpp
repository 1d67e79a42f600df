#include <algorithm>
#include <cmath>

#include "spectralstrip/darboux.hpp"

namespace spectralstrip {

namespace {

struct EdgeSpectrum {
  RVec raw;
  RVec snapped;
  Mat vectors;
  int k = 0;
};

// Eigenvalues of F(x0): those within tol of -sqrt(lambda) are bound
// directions and get pinned to exactly -sqrt(lambda); the rest are clamped to
// (-sqrt(lambda), sqrt(lambda)].
EdgeSpectrum edge_spectrum(const Mat& f, double lambda, double tol) {
  const double s = std::sqrt(lambda);
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (f + f.adjoint()));
  EdgeSpectrum out;
  out.raw = es.eigenvalues();
  out.vectors = es.eigenvectors();
  out.snapped = out.raw;
  for (int j = 0; j < out.raw.size(); ++j) {
    if (std::abs(out.raw(j) + s) <= tol) {
      out.snapped(j) = -s;
      ++out.k;
    } else {
      out.snapped(j) = std::clamp(out.raw(j), -s, s);
    }
  }
  return out;
}

}  // namespace

int right_edge_node(const MatrixField& v) {
  double peak = 0.0;
  for (int i = 0; i < v.size(); ++i) peak = std::max(peak, v[i].norm());
  if (peak == 0.0) return 0;
  int last = v.size() - 1;
  while (last > 0 && !(v[last].norm() > kFreeLevel * peak)) --last;
  return std::min(last + 1, v.size() - 1);
}

std::optional<double> shooting_function(const MatrixField& v, double lambda) {
  RiccatiOptions opts;
  opts.stop_node = right_edge_node(v);
  opts.keep_samples = false;
  const RiccatiField f = propagate_riccati(v, lambda, opts);
  if (!f.complete()) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<Mat> es(f.samples.back(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() + std::sqrt(lambda);
}

GroundState shoot_ground_state(const MatrixField& v, std::pair<double, double> bracket,
                               const ShootOptions& opts) {
  auto [lo, hi] = bracket;
  if (!(lo > 0.0) || !(hi > lo)) throw BracketError("shoot_ground_state: need 0 < lo < hi");
  const auto g_hi = shooting_function(v, hi);
  if (!g_hi) throw BracketError("shoot_ground_state: Riccati flow blows up at the upper bracket end");
  if (*g_hi <= 0.0) throw BracketError("shoot_ground_state: g(hi) <= 0, bracket lies below the ground state");
  const auto g_lo = shooting_function(v, lo);
  if (g_lo && *g_lo > 0.0)
    throw BracketError("shoot_ground_state: g > 0 at both bracket ends, no bound state in the bracket");

  double lambda1 = hi;
  while (true) {
    const double mid = 0.5 * (lo + hi);
    const auto g = shooting_function(v, mid);
    if (g && std::abs(*g) <= 1e-10) {
      lambda1 = mid;
      break;
    }
    if (!g || *g < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-12 * std::max(1.0, hi)) {
      lambda1 = hi;
      break;
    }
  }

  GroundState gs;
  gs.lambda1 = lambda1;
  gs.edge_node = right_edge_node(v);
  const double s = std::sqrt(lambda1);
  gs.degeneracy_tol = opts.degeneracy_tol > 0.0 ? opts.degeneracy_tol : 1e-5 * s;

  RiccatiOptions ro;
  ro.stop_node = gs.edge_node;
  gs.F = propagate_riccati(v, lambda1, ro);
  if (!gs.F.complete())
    throw NumericalError("shoot_ground_state: Riccati flow blew up at the converged energy");

  const EdgeSpectrum edge = edge_spectrum(gs.F.samples.back(), lambda1, gs.degeneracy_tol);
  gs.K = edge.k;
  gs.edge_eigenvalues = edge.raw;
  gs.edge_vectors = edge.vectors;
  if (gs.K == 0)
    throw NumericalError("shoot_ground_state: no eigenvalue of F(x0) near -sqrt(lambda1)");

  // Free right tail from the closed form, starting at the pinned spectrum.
  const double x0 = v.grid.node(gs.edge_node);
  for (int i = gs.edge_node + 1; i < v.size(); ++i) {
    const double t = std::tanh(s * (v.grid.node(i) - x0));
    RVec nu(edge.snapped.size());
    for (int j = 0; j < nu.size(); ++j) nu(j) = free_riccati_map(edge.snapped(j), s, t);
    gs.F.samples.push_back(edge.vectors * nu.asDiagonal() * edge.vectors.adjoint());
  }
  return gs;
}

MatrixField darboux_transform(const MatrixField& v, const GroundState& gs) {
  if (!gs.F.complete() || gs.F.samples.size() != v.size())
    throw InvalidStateError("darboux_transform: ground-state F is not complete on the grid");
  const double lambda = gs.lambda1;
  const double s = std::sqrt(lambda);
  const int dim = v.dim;
  MatrixField out(v.grid, dim);
  const Mat lam2 = 2.0 * lambda * Mat::Identity(dim, dim);

  const EdgeSpectrum edge = edge_spectrum(gs.F.samples[gs.edge_node],
                                          lambda, gs.degeneracy_tol);
  const double x0 = v.grid.node(gs.edge_node);

  for (int i = 0; i < v.size(); ++i) {
    const Mat f = gs.F.samples[i];
    if (i >= gs.edge_node) {
      // 2(nu^2 - lambda) = 2(nu - s)(nu + s) vanishes exactly on bound directions.
      const double t = std::tanh(s * (v.grid.node(i) - x0));
      RVec w(edge.snapped.size());
      for (int j = 0; j < w.size(); ++j) {
        const double nu = free_riccati_map(edge.snapped(j), s, t);
        w(j) = 2.0 * (nu - s) * (nu + s);
      }
      Mat o = edge.vectors * w.asDiagonal() * edge.vectors.adjoint() - v[i];
      out[i] = 0.5 * (o + o.adjoint());
      continue;
    }
    if (v[i].isZero(0.0)) {
      bool fixed = true;
      for (int r = 0; r < dim && fixed; ++r)
        for (int c = 0; c < dim && fixed; ++c)
          fixed = f(r, c) == (r == c ? cplx(s, 0.0) : cplx(0.0, 0.0));
      if (fixed) continue;  // F = sqrt(lambda) I: V - 2F' is exactly zero
    }
    Mat o = 2.0 * f * f - v[i] - lam2;
    out[i] = 0.5 * (o + o.adjoint());
  }
  return out;
}

double trace_identity_residual(const MatrixField& v, const MatrixField& v_new, const GroundState& gs) {
  return potential_moment(v_new, 2) - potential_moment(v, 2) +
         (16.0 / 3.0) * gs.K * std::pow(gs.lambda1, 1.5);
}

namespace {

std::vector<CVec> central_derivative(const std::vector<CVec>& phi, double h) {
  const int n = static_cast<int>(phi.size());
  std::vector<CVec> d(phi.size());
  for (int i = 0; i < n; ++i) {
    if (i == 0)
      d[0] = (phi[1] - phi[0]) / h;
    else if (i == n - 1)
      d[i] = (phi[i] - phi[i - 1]) / h;
    else
      d[i] = (phi[i + 1] - phi[i - 1]) / (2.0 * h);
  }
  return d;
}

template <typename Fn>
double trapezoid(int n, double h, Fn&& fn) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += (i == 0 || i == n - 1) ? 0.5 * fn(i) : fn(i);
  return s * h;
}

}  // namespace

double d_operator_norm(const Grid& grid, const GroundState& gs, const std::vector<CVec>& phi) {
  const int n = grid.n_points;
  if (static_cast<int>(phi.size()) != n) throw ParameterError("d_operator_norm: wrong length");
  const auto dphi = central_derivative(phi, grid.h);
  const double num = trapezoid(n, grid.h, [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    return (dphi[k] - gs.F.samples[static_cast<int>(k)] * phi[k]).squaredNorm();
  });
  const double den = trapezoid(n, grid.h, [&](int i) { return phi[static_cast<std::size_t>(i)].squaredNorm(); });
  return std::sqrt(num / den);
}

double factorization_residual(const MatrixField& v, const GroundState& gs,
                              const std::vector<std::vector<CVec>>& trials) {
  const int n = v.size();
  const double h = v.grid.h;
  double worst = 0.0;
  for (const auto& phi : trials) {
    if (static_cast<int>(phi.size()) != n) throw ParameterError("trial vector has wrong length");
    const auto dphi = central_derivative(phi, h);
    const double quad_h = trapezoid(n, h, [&](int i) {
      const CVec& p = phi[static_cast<std::size_t>(i)];
      return dphi[static_cast<std::size_t>(i)].squaredNorm() +
             (p.adjoint() * v[i] * p)(0, 0).real() + gs.lambda1 * p.squaredNorm();
    });
    const double quad_d = trapezoid(n, h, [&](int i) {
      const CVec r = dphi[static_cast<std::size_t>(i)] -
                     gs.F.samples[i] * phi[static_cast<std::size_t>(i)];
      return r.squaredNorm();
    });
    const double norm2 = trapezoid(n, h, [&](int i) { return phi[static_cast<std::size_t>(i)].squaredNorm(); });
    worst = std::max(worst, std::abs(quad_h - quad_d) / norm2);
  }
  return worst;
}

double adjoint_zero_mode_log_growth(const Grid& grid, const GroundState& gs) {
  const int n = grid.n_points;
  if (gs.F.samples.size() != n)
    throw InvalidStateError("adjoint_zero_mode_log_growth: F does not cover the grid");
  const int dim = gs.F.samples.dim();
  constexpr int kSub = 4;
  const double dt = grid.h / kSub;

  // In tau = -x the equation reads dpsi/dtau = F psi.
  Mat psi = Mat::Identity(dim, dim);
  double log_scale = 0.0;
  auto log_norm = [&] {
    Eigen::JacobiSVD<Mat> svd(psi);
    return log_scale + std::log(svd.singularValues()(0));
  };
  double min_log = log_norm();
  for (int i = n - 1; i > 0; --i) {
    const Mat f0 = gs.F.samples[i];
    const Mat f1 = gs.F.samples[i - 1];
    for (int sub = 0; sub < kSub; ++sub) {
      const double ta = static_cast<double>(sub) / kSub;
      const double tm = (sub + 0.5) / kSub;
      const double tb = static_cast<double>(sub + 1) / kSub;
      const Mat fa = (1.0 - ta) * f0 + ta * f1;
      const Mat fm = (1.0 - tm) * f0 + tm * f1;
      const Mat fb = (1.0 - tb) * f0 + tb * f1;
      const Mat k1 = fa * psi;
      const Mat k2 = fm * (psi + 0.5 * dt * k1);
      const Mat k3 = fm * (psi + 0.5 * dt * k2);
      const Mat k4 = fb * (psi + dt * k3);
      psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const double nrm = psi.norm();
    psi /= nrm;
    log_scale += std::log(nrm);
    min_log = std::min(min_log, log_norm());
  }
  return log_norm() - min_log;
}

}  // namespace spectralstrip
