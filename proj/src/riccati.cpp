#include <algorithm>
#include <cmath>

#include "spectralstrip/darboux.hpp"

namespace spectralstrip {

namespace {

constexpr int kSubsteps = 4;

Mat lerp(const Mat& a, const Mat& b, double theta) { return (1.0 - theta) * a + theta * b; }

double spectral_norm(const Mat& f) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (f + f.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_scaled_identity(const Mat& f, double s) {
  for (int r = 0; r < f.rows(); ++r)
    for (int c = 0; c < f.cols(); ++c)
      if (f(r, c) != (r == c ? cplx(s, 0.0) : cplx(0.0, 0.0))) return false;
  return true;
}

}  // namespace

RiccatiField propagate_riccati(const MatrixField& v, double lambda, const RiccatiOptions& opts) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw ParameterError("propagate_riccati: lambda must be positive and finite");
  const int n = v.size();
  const int dim = v.dim;
  const int last = opts.stop_node < 0 ? n - 1 : std::min(opts.stop_node, n - 1);
  const double s = std::sqrt(lambda);
  const double h = v.grid.h;
  const double dt = h / kSubsteps;

  RiccatiField out;
  out.lambda = lambda;
  out.norm_bound = 10.0 * s + std::sqrt(v.max_norm2());
  if (opts.keep_samples) out.samples.reserve(last + 1);

  Mat f = s * Mat::Identity(dim, dim);
  Mat lam = lambda * Mat::Identity(dim, dim);
  out.samples = MatrixSeries(dim);
  if (opts.keep_samples) out.samples.push_back(f);

  auto rhs = [&lam](const Mat& vv, const Mat& ff) -> Mat { return vv + lam - ff * ff; };

  for (int i = 0; i < last; ++i) {
    const Mat v0 = v[i];
    const Mat v1 = v[i + 1];
    // Inside a potential-free stretch sqrt(lambda) I is an exact fixed point;
    // keep it bit-exact.
    if (v0.isZero(0.0) && v1.isZero(0.0) && is_scaled_identity(f, s)) {
      if (opts.keep_samples) out.samples.push_back(f);
      continue;
    }
    double prev_norm = f.norm();
    for (int sub = 0; sub < kSubsteps; ++sub) {
      const double t0 = static_cast<double>(sub) / kSubsteps;
      const double th = (sub + 0.5) / kSubsteps;
      const double t1 = static_cast<double>(sub + 1) / kSubsteps;
      const Mat va = lerp(v0, v1, t0);
      const Mat vm = lerp(v0, v1, th);
      const Mat vb = lerp(v0, v1, t1);
      const Mat k1 = rhs(va, f);
      const Mat k2 = rhs(vm, f + 0.5 * dt * k1);
      const Mat k3 = rhs(vm, f + 0.5 * dt * k2);
      const Mat k4 = rhs(vb, f + dt * k3);
      Mat next = f + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

      if (!next.allFinite()) {
        if (prev_norm > 0.25 * out.norm_bound) {
          out.status = RiccatiStatus::blown_up;
          out.blowup_node = i + 1;
          return out;
        }
        throw NumericalError("propagate_riccati: non-finite value at node " + std::to_string(i));
      }
      out.max_hermiticity_defect =
          std::max(out.max_hermiticity_defect, (next - next.adjoint()).norm());
      f = 0.5 * (next + next.adjoint());
      const double fro = f.norm();
      if (fro > out.norm_bound && spectral_norm(f) > out.norm_bound) {
        out.status = RiccatiStatus::blown_up;
        out.blowup_node = i + 1;
        return out;
      }
      prev_norm = fro;
    }
    if (opts.keep_samples) out.samples.push_back(f);
  }
  if (!opts.keep_samples) out.samples.push_back(f);
  return out;
}

double free_riccati_map(double nu, double sqrt_lambda, double t) {
  if (nu == sqrt_lambda || nu == -sqrt_lambda) return nu;
  return sqrt_lambda * (sqrt_lambda * t + nu) / (sqrt_lambda + t * nu);
}

Mat closed_form_F_free(const Mat& f_x0, double lambda, double dx) {
  if (!(lambda > 0.0)) throw ParameterError("closed_form_F_free: lambda must be positive");
  const double s = std::sqrt(lambda);
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (f_x0 + f_x0.adjoint()));
  RVec nu = es.eigenvalues();
  const double slack = 1e-8;
  for (int k = 0; k < nu.size(); ++k) {
    if (nu(k) < -s - slack || nu(k) > s + slack)
      throw ConsistencyError("closed_form_F_free: eigenvalue " + std::to_string(nu(k)) +
                             " outside [-sqrt(lambda), sqrt(lambda)]");
    nu(k) = std::clamp(nu(k), -s, s);
  }
  const double t = std::tanh(s * dx);
  for (int k = 0; k < nu.size(); ++k) nu(k) = free_riccati_map(nu(k), s, t);
  return es.eigenvectors() * nu.asDiagonal() * es.eigenvectors().adjoint();
}

double riccati_residual(const MatrixField& v, const RiccatiField& f) {
  const int m = f.samples.size();
  const double h = v.grid.h;
  const Mat lam = f.lambda * Mat::Identity(v.dim, v.dim);
  double worst = 0.0;
  for (int i = 1; i + 1 < m; ++i) {
    const Mat fi = f.samples[i];
    const Mat d = (f.samples[i + 1] - f.samples[i - 1]) / (2.0 * h);
    worst = std::max(worst, (d - (v[i] + lam - fi * fi)).norm());
  }
  return worst;
}

Mat MatrixSolutionField::accumulated(int i) const {
  const int n = m_samples.dim();
  Mat acc = Mat::Identity(n, n);
  for (const auto& [node, r] : renorm_log) {
    if (node > i) break;
    acc = r * acc;
  }
  return acc;
}

Mat MatrixSolutionField::riccati(int i) const {
  const Mat m = m_samples[i];
  const Mat dm = dm_samples[i];
  return dm * m.inverse();
}

double MatrixSolutionField::wronskian_defect(int i) const {
  const Mat m = m_samples[i];
  const Mat dm = dm_samples[i];
  const Mat a = m.adjoint() * dm;
  const Mat w = a - dm.adjoint() * m;
  return w.norm() / a.norm();
}

double MatrixSolutionField::log_abs_det(int i) const {
  double acc = std::log(std::abs(m_samples[i].determinant()));
  for (const auto& [node, r] : renorm_log) {
    if (node > i) break;
    acc += std::log(std::abs(r.determinant()));
  }
  return acc;
}

MatrixSolutionField propagate_M(const MatrixField& v, double lambda, const Mat& a) {
  if (!(lambda > 0.0)) throw ParameterError("propagate_M: lambda must be positive");
  const int dim = v.dim;
  if (a.rows() != dim || a.cols() != dim) throw ParameterError("propagate_M: A has wrong shape");
  {
    Eigen::JacobiSVD<Mat> svd(a);
    const auto& sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > 0.0) || sv(0) / sv(sv.size() - 1) >= 1e8)
      throw ParameterError("propagate_M: A is singular or badly conditioned");
  }
  const int n = v.size();
  const double s = std::sqrt(lambda);
  const double dt = v.grid.h / kSubsteps;
  const Mat lam = lambda * Mat::Identity(dim, dim);

  MatrixSolutionField out;
  out.lambda = lambda;
  out.m_samples = MatrixSeries(dim);
  out.dm_samples = MatrixSeries(dim);
  out.m_samples.reserve(n);
  out.dm_samples.reserve(n);
  Mat m = std::exp(s * v.grid.x_min) * a;
  Mat p = s * m;
  out.m_samples.push_back(m);
  out.dm_samples.push_back(p);

  for (int i = 0; i + 1 < n; ++i) {
    const Mat v0 = v[i];
    const Mat v1 = v[i + 1];
    for (int sub = 0; sub < kSubsteps; ++sub) {
      const Mat wa = lerp(v0, v1, static_cast<double>(sub) / kSubsteps) + lam;
      const Mat wm = lerp(v0, v1, (sub + 0.5) / kSubsteps) + lam;
      const Mat wb = lerp(v0, v1, static_cast<double>(sub + 1) / kSubsteps) + lam;
      const Mat km1 = p;
      const Mat kp1 = wa * m;
      const Mat km2 = p + 0.5 * dt * kp1;
      const Mat kp2 = wm * (m + 0.5 * dt * km1);
      const Mat km3 = p + 0.5 * dt * kp2;
      const Mat kp3 = wm * (m + 0.5 * dt * km2);
      const Mat km4 = p + dt * kp3;
      const Mat kp4 = wb * (m + dt * km3);
      m += (dt / 6.0) * (km1 + 2.0 * km2 + 2.0 * km3 + km4);
      p += (dt / 6.0) * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4);
    }
    if (!m.allFinite() || !p.allFinite())
      throw NumericalError("propagate_M: non-finite value at node " + std::to_string(i + 1));
    if (m.norm() > 1e8) {
      Eigen::MatrixXcd stacked(2 * dim, dim);
      stacked << m, p;
      Eigen::HouseholderQR<Eigen::MatrixXcd> qr(stacked);
      const Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(2 * dim, dim);
      const Eigen::MatrixXcd r = qr.matrixQR().topRows(dim).triangularView<Eigen::Upper>();
      m = q.topRows(dim);
      p = q.bottomRows(dim);
      out.renorm_log.emplace_back(i + 1, Mat(r));
    }
    out.m_samples.push_back(m);
    out.dm_samples.push_back(p);
  }
  return out;
}

}  // namespace spectralstrip
