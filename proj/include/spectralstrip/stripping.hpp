#pragma once

#include <optional>
#include <vector>

#include "spectralstrip/darboux.hpp"
#include "spectralstrip/lattice.hpp"
#include "spectralstrip/spectral.hpp"

namespace spectralstrip {

/// One ground-state removal: shoot, transform, cut off.
struct StripStep {
  double lambda = 0.0;  // ground-state magnitude removed
  int K = 0;  // its multiplicity
  double moment_before = 0.0;  // int Tr(V^2) of the input
  double moment_after = 0.0;  // int Tr((V - 2F')^2) before the cutoff
  double identity_residual = 0.0;  // moment_after - moment_before + (16/3) K lambda^{3/2}
  bool identity_ok = false;  // |residual| <= 1e-3 * moment_before
  double cutoff_radius = 0.0;
  // Threshold actually used: the requested one, or a larger one when the
  // transformed field has not decayed to it inside the grid.
  double effective_threshold = 0.0;
  double tail_mass = 0.0;
  double shift_bound = 0.0;  // N * effective_threshold * domain width
  double e = 0.0;  // tail_mass + shift_bound
  // Running sum of removed K lambda^{3/2} plus (3/16) of the current moment and
  // of every discarded tail; constant (= (3/16) int Tr V0^2) along the strip.
  double telescoped = 0.0;
};

struct StripOptions {
  double cutoff_threshold = 1e-10;
  int max_steps = 0;  // <= 0 selects 64 * N
  double degeneracy_tol = 0.0;  // <= 0: shooter default
  bool keep_intermediates = false;
};

struct StripResult {
  StripStep step;
  MatrixPotential potential;  // V - 2F', cut off
};

// Estimates lambda1 by inertia bisection and shoots inside +-10% of it,
// widening the bracket if needed. Throws InvalidStateError when v has no
// negative eigenvalue.
GroundState locate_ground_state(const MatrixField& v, const ShootOptions& opts = {});

// Cutoff thresholds are never raised above this (times max(1, peak norm)).
inline constexpr double kMaxRaisedThreshold = 1e-6;

// Removes the ground multiplet of v. Returns nullopt when v has no negative
// eigenvalue. If V - 2F' has not decayed to the cutoff threshold near the grid
// ends (slow e^{-2 sqrt(lambda) x} tails when K < N), the threshold is raised
// to twice the edge-band norm and the step's e grows accordingly. Throws
// DecayError if that would exceed kMaxRaisedThreshold.
std::optional<StripResult> strip_once(const MatrixPotential& v, const StripOptions& opts = {});

struct StrippingTrace {
  std::vector<StripStep> steps;
  std::vector<MatrixPotential> intermediates;  // only with keep_intermediates
  MatrixPotential final_potential;  // W
  std::vector<Multiplet> remaining;  // spectrum of W (continuum-marginal when complete)
  double marginal_floor = 0.0;
  double initial_moment = 0.0;  // int Tr(V^2)
  // sum_steps K lambda^{3/2} + sum_remaining lambda^{3/2} - (3/16) int Tr(V^2)
  double deficit = 0.0;
  double residual_moment = 0.0;  // (3/16) int Tr(W^2)
  double marginal_allowance = 0.0;  // remaining count * floor^{3/2}
  double total_error = 0.0;  // sum e_i + marginal_allowance
  double max_telescoping_drift = 0.0;
  bool telescoping_ok = true;
  bool complete = true;  // false when max_steps ran out with non-marginal states left
};

// Repeats strip_once until only continuum-marginal eigenvalues (lambda below
// the box floor) remain, or max_steps is reached (trace flagged incomplete).
StrippingTrace strip_all(const MatrixPotential& v, const StripOptions& opts = {});

struct Theorem1Verdict {
  double lhs = 0.0;  // sum lambda^{3/2}
  double rhs = 0.0;  // (3/16) int Tr(V^2)
  double deficit = 0.0;
  bool pass = false;
};

Theorem1Verdict verify_theorem1(const MatrixField& v, const SpectrumOptions& opts = {});

struct HalfMomentVerdict {
  double moment = 0.0;  // sum lambda^{1/2}
  double lower = 0.0;  // -(1/4) int Tr V
  double upper = 0.0;  // -(1/2) int Tr V
  double tol = 0.0;
  bool pass = false;
};

HalfMomentVerdict half_moment_bounds(const MatrixField& v, const SpectrumOptions& opts = {});

}  // namespace spectralstrip
