#include "spectralstrip/stripping.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spectralstrip {

// The inertia bisection gives lambda1 to ~1e-9; the shooter refines it. The
// bracket is widened step by step in case the two discretizations disagree
// by more than 10% (only plausible for very shallow states).
GroundState locate_ground_state(const MatrixField& v, const ShootOptions& so) {
  const DiscreteHamiltonian hd = assemble(v);
  if (count_below(hd, 0.0) == 0) throw InvalidStateError("locate_ground_state: no negative eigenvalue");
  const double depth = std::max(1.0, -hd.spectrum_floor());
  const double est = -ground_energy(hd, 1e-9 * depth);
  const double top = -hd.spectrum_floor() + 1.0;
  const std::pair<double, double> brackets[] = {
      {0.9 * est, 1.1 * est}, {0.5 * est, std::min(2.0 * est, top)}, {1e-3 * est, top}};
  std::string last_error;
  for (const auto& b : brackets) {
    if (!(b.second > b.first)) continue;
    try {
      return shoot_ground_state(v, b, so);
    } catch (const BracketError& e) {
      last_error = e.what();
    }
  }
  throw BracketError("locate_ground_state: no bracket around the ground state (" + last_error + ")");
}

std::optional<StripResult> strip_once(const MatrixPotential& v, const StripOptions& opts) {
  if (!(opts.cutoff_threshold > 0.0)) throw ParameterError("strip_once: cutoff threshold must be positive");
  const DiscreteHamiltonian hd = assemble(v);
  if (count_below(hd, 0.0) == 0) return std::nullopt;

  ShootOptions so;
  so.degeneracy_tol = opts.degeneracy_tol;
  const GroundState gs = locate_ground_state(v, so);
  const MatrixField transformed = darboux_transform(v, gs);

  StripStep st;
  st.lambda = gs.lambda1;
  st.K = gs.K;
  st.moment_before = potential_moment(v, 2);
  st.moment_after = potential_moment(transformed, 2);
  st.identity_residual = trace_identity_residual(v, transformed, gs);
  st.identity_ok = std::abs(st.identity_residual) <= 1e-3 * std::max(st.moment_before, 1e-300);

  double threshold = opts.cutoff_threshold;
  const double band = edge_band_norm(transformed);
  if (band >= 0.1 * threshold) {
    double peak = 0.0;
    for (int i = 0; i < transformed.size(); ++i) peak = std::max(peak, transformed[i].norm());
    threshold = std::max(threshold, 2.0 * band);
    if (threshold > kMaxRaisedThreshold * std::max(1.0, peak))
      throw DecayError("strip_once: transformed field is still " + std::to_string(band) +
                       " at the grid ends; enlarge the domain");
  }
  Truncation cut = truncate_support(transformed, threshold);
  st.cutoff_radius = cut.cutoff_radius;
  st.effective_threshold = threshold;
  st.tail_mass = cut.tail_mass;
  st.shift_bound = v.dim * threshold * v.grid.width();
  st.e = st.tail_mass + st.shift_bound;
  return StripResult{st, std::move(cut.potential)};
}

StrippingTrace strip_all(const MatrixPotential& v, const StripOptions& opts) {
  const int max_steps = opts.max_steps > 0 ? opts.max_steps : 64 * v.dim;
  StrippingTrace tr;
  tr.marginal_floor = marginal_floor(v.grid);
  tr.initial_moment = potential_moment(v, 2);
  const double target = (3.0 / 16.0) * tr.initial_moment;

  MatrixPotential current = v;
  double removed = 0.0;
  double discarded = 0.0;
  double sum_e = 0.0;
  while (true) {
    const DiscreteHamiltonian hd = assemble(current);
    if (count_below(hd, -tr.marginal_floor) == 0) break;
    if (static_cast<int>(tr.steps.size()) >= max_steps) {
      tr.complete = false;
      break;
    }
    auto r = strip_once(current, opts);
    if (!r) break;
    StripStep& st = r->step;
    removed += st.K * std::pow(st.lambda, 1.5);
    st.telescoped = removed + (3.0 / 16.0) * (st.moment_after + discarded);
    discarded += st.tail_mass;
    sum_e += st.e;
    const double drift = std::abs(st.telescoped - target);
    tr.max_telescoping_drift = std::max(tr.max_telescoping_drift, drift);
    if (!st.identity_ok || drift > 1e-3 * std::max(target, 1e-300)) tr.telescoping_ok = false;
    tr.steps.push_back(st);
    if (opts.keep_intermediates) tr.intermediates.push_back(r->potential);
    current = std::move(r->potential);
  }

  const Spectrum rest = negative_spectrum(current);
  tr.remaining = rest.multiplets;
  double rest_sum = 0.0;
  int rest_count = 0;
  for (const Multiplet& m : rest.multiplets) {
    rest_sum += m.multiplicity * std::pow(m.lambda, 1.5);
    rest_count += m.multiplicity;
  }
  tr.final_potential = std::move(current);
  tr.deficit = removed + rest_sum - target;
  tr.residual_moment = (3.0 / 16.0) * potential_moment(tr.final_potential, 2);
  tr.marginal_allowance = rest_count * std::pow(tr.marginal_floor, 1.5);
  tr.total_error = sum_e + tr.marginal_allowance;
  return tr;
}

Theorem1Verdict verify_theorem1(const MatrixField& v, const SpectrumOptions& opts) {
  Theorem1Verdict out;
  out.lhs = lt_moment(negative_spectrum(v, opts), 1.5);
  out.rhs = (3.0 / 16.0) * potential_moment(v, 2);
  out.deficit = out.lhs - out.rhs;
  out.pass = out.deficit <= 1e-6 * std::max(1.0, out.rhs);
  return out;
}

HalfMomentVerdict half_moment_bounds(const MatrixField& v, const SpectrumOptions& opts) {
  HalfMomentVerdict out;
  out.moment = lt_moment(negative_spectrum(v, opts), 0.5);
  const double m1 = potential_moment(v, 1);
  out.lower = -0.25 * m1;
  out.upper = -0.5 * m1;
  out.tol = 1e-6 * std::max(1.0, out.upper);
  out.pass = out.lower - out.tol <= out.moment && out.moment <= out.upper + out.tol;
  return out;
}

}  // namespace spectralstrip
