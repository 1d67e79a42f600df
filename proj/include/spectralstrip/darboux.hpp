#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "spectralstrip/lattice.hpp"

namespace spectralstrip {

enum class RiccatiStatus { complete, blown_up };

/// Logarithmic-derivative matrix F = M' M^{-1} of the solution that behaves
/// like e^{sqrt(lambda) x} I at the left end, sampled on the grid.
struct RiccatiField {
  double lambda = 0.0;  // trial energy is -lambda
  MatrixSeries samples;  // nodes 0 .. samples.size()-1
  RiccatiStatus status = RiccatiStatus::complete;
  int blowup_node = -1;  // first node where the a-priori bound was exceeded
  double max_hermiticity_defect = 0.0;  // before re-hermitization
  double norm_bound = 0.0;

  bool complete() const { return status == RiccatiStatus::complete; }
};

struct RiccatiOptions {
  // Integrate only up to this node (inclusive); -1 means the whole grid.
  int stop_node = -1;
  // When false only the final node is stored (shooting needs nothing else).
  bool keep_samples = true;
};

// F' = V + lambda I - F^2 from x_min with F = sqrt(lambda) I, RK4 with four
// substeps per interval and V interpolated linearly. Exceeding
// 10 sqrt(lambda) + max ||V||^{1/2} stops the run with status blown_up.
// Non-finite arithmetic throws NumericalError.
RiccatiField propagate_riccati(const MatrixField& v, double lambda, const RiccatiOptions& opts = {});

/// Matrix solution of -M'' + V M = -lambda M started from e^{sqrt(lambda) x} A,
/// stored in renormalized form: true M(x_i) = M_samples[i] * accumulated(i).
struct MatrixSolutionField {
  double lambda = 0.0;
  MatrixSeries m_samples;
  MatrixSeries dm_samples;  // derivative, same normalization
  // (node, R): at that node the pair [M; M'] was replaced by its Q factor.
  std::vector<std::pair<int, Mat>> renorm_log;

  // Product of right factors applied up to and including node i.
  Mat accumulated(int i) const;
  Mat unwound(int i) const { return m_samples[i] * accumulated(i); }
  Mat riccati(int i) const;  // M' M^{-1}
  // ||M*M' - M'*M||_F / ||M*M'||_F at node i.
  double wronskian_defect(int i) const;
  // log|det M| of the true (unwound) solution at node i.
  double log_abs_det(int i) const;
};

// Same integrator as propagate_riccati, applied to (M, M'). Renormalizes by QR
// of the stacked pair whenever ||M||_F > 1e8. Throws ParameterError if A is
// singular (condition number >= 1e8).
MatrixSolutionField propagate_M(const MatrixField& v, double lambda, const Mat& a);

// Evaluates F(x0 + dx) in a potential-free region from F(x0) by mapping each
// eigenvalue nu -> sqrt(l)(sqrt(l) t + nu)/(sqrt(l) + t nu), t = tanh(sqrt(l) dx).
// Throws ConsistencyError if an eigenvalue lies outside [-sqrt(l), sqrt(l)] by
// more than 1e-8.
Mat closed_form_F_free(const Mat& f_x0, double lambda, double dx);

// Scalar version of the eigenvalue map; +-sqrt(lambda) are exact fixed points.
double free_riccati_map(double nu, double sqrt_lambda, double t);

struct GroundState {
  double lambda1 = 0.0;
  int K = 0;
  RiccatiField F;  // every node; beyond edge_node from the closed form
  int edge_node = 0;  // first node of the potential-free right tail
  RVec edge_eigenvalues;  // eigenvalues of F at edge_node, ascending
  Mat edge_vectors;  // matching eigenvectors (columns)
  double degeneracy_tol = 0.0;
};

struct ShootOptions {
  double degeneracy_tol = 0.0;  // <= 0 selects 1e-5 * sqrt(lambda1)
};

// g(lambda) = min eig F_lambda(x0) + sqrt(lambda); nullopt when the Riccati
// flow blows up before x0 (treated as negative by the shooter).
std::optional<double> shooting_function(const MatrixField& v, double lambda);

// Relative node norm below which a field counts as free for shooting.
inline constexpr double kFreeLevel = 1e-9;

// First node past the last one with ||V||_F > kFreeLevel * max ||V||_F (the
// last node if the field reaches the boundary). For compactly supported wells
// this is the node just outside the support. Exponential tails left by a
// cutoff are treated as free beyond it: integrating F through them would
// amplify errors along the unstable -sqrt(lambda) direction.
int right_edge_node(const MatrixField& v);

// Bisection on the sign of g over [lo, hi]. Throws BracketError if g does not
// change sign.
GroundState shoot_ground_state(const MatrixField& v, std::pair<double, double> bracket,
                               const ShootOptions& opts = {});

// 2 F^2 - V - 2 lambda1 I, i.e. V - 2F'. Exactly zero where F = sqrt(lambda1) I
// on the left and along bound directions on the right. Throws
// InvalidStateError for a blown-up F.
MatrixField darboux_transform(const MatrixField& v, const GroundState& gs);

// int Tr(V_new^2) - int Tr(V^2) + (16/3) K lambda1^{3/2}.
double trace_identity_residual(const MatrixField& v, const MatrixField& v_new, const GroundState& gs);

// max over trial vectors of |<phi,(H+lambda1)phi> - ||phi' - F phi||^2| / ||phi||^2.
double factorization_residual(const MatrixField& v, const GroundState& gs,
                              const std::vector<std::vector<CVec>>& trials);

// ||phi' - F phi|| / ||phi|| for a single grid-sampled vector function.
double d_operator_norm(const Grid& grid, const GroundState& gs, const std::vector<CVec>& phi);

// Max over interior nodes of ||(F_{i+1}-F_{i-1})/2h - (V + lambda - F^2)||_F
// for nodes whose stencil lies where F was integrated.
double riccati_residual(const MatrixField& v, const RiccatiField& f);

// Solves psi' = -F psi backwards from x_max with psi(x_max) = I and returns
// log(||psi(x_min)||_2 / min_x ||psi(x)||_2): the growth of the zero mode of
// D* towards the left end.
double adjoint_zero_mode_log_growth(const Grid& grid, const GroundState& gs);

}  // namespace spectralstrip
