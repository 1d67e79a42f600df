#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle/square_well_oracle.hpp"
#include "spectralstrip/darboux.hpp"
#include "spectralstrip/spectral.hpp"
#include "spectralstrip/stripping.hpp"

using namespace spectralstrip;

namespace {

Grid box(double half, double h) { return make_uniform_grid(-half, half, static_cast<int>(std::lround(2 * half / h)) + 1); }

Mat random_matrix(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = cplx(u(rng), u(rng));
  return a + 2.0 * Mat::Identity(n, n);
}

double min_eig(const Mat& f) {
  Eigen::SelfAdjointEigenSolver<Mat> es(f, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

std::vector<CVec> smooth_trial(const Grid& g, int dim, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<CVec> phi(static_cast<std::size_t>(g.n_points), CVec::Zero(dim));
  std::vector<cplx> c(static_cast<std::size_t>(3 * dim));
  for (auto& z : c) z = cplx(u(rng), u(rng));
  const double center = 0.5 * u(rng);
  for (int i = 0; i < g.n_points; ++i) {
    const double x = g.node(i);
    const double env = bump((x - center) / 4.0);
    for (int d = 0; d < dim; ++d)
      phi[static_cast<std::size_t>(i)](d) =
          env * (c[3 * d] + c[3 * d + 1] * std::sin(x) + c[3 * d + 2] * std::cos(2.0 * x));
  }
  return phi;
}

}  // namespace

TEST_CASE("free Riccati flow is the fixed point") {
  const Grid g = box(5.0, 0.01);
  for (double lambda : {0.01, 1.0, 37.0}) {
    const RiccatiField f = propagate_riccati(MatrixField(g, 2), lambda);
    REQUIRE(f.complete());
    CHECK(f.samples.size() == g.n_points);
    for (int i = 0; i < f.samples.size(); ++i) CHECK(Mat(f.samples[i]) == std::sqrt(lambda) * Mat::Identity(2, 2));
  }
  CHECK_THROWS_AS(propagate_riccati(MatrixField(g, 1), 0.0), ParameterError);
  CHECK_THROWS_AS(propagate_riccati(MatrixField(g, 1), -1.0), ParameterError);
}

TEST_CASE("Riccati flow on the scalar well") {
  const Grid g = box(12.0, 2e-3);
  const MatrixPotential v = square_well(1.0, 1.0, 1, g);
  const double l1 = oracle::ground_level(1.0, 1.0);
  const int edge = right_edge_node(v);
  CHECK(g.node(edge) == doctest::Approx(1.0 + g.h));

  SUBCASE("left boundary value is exact") {
    const RiccatiField f = propagate_riccati(v, l1);
    for (int i = 0; i < g.nearest_index(-1.0); ++i) CHECK(f.samples[i](0, 0) == cplx(std::sqrt(l1), 0.0));
  }
  SUBCASE("below the ground energy F(a) stays above -sqrt(lambda)") {
    const RiccatiField f = propagate_riccati(v, 0.9);
    REQUIRE(f.complete());
    CHECK(f.samples[edge](0, 0).real() > -std::sqrt(0.9));
    CHECK(f.max_hermiticity_defect <= 1e-8 * std::sqrt(0.9));
  }
  SUBCASE("at the ground energy F(a) = -sqrt(lambda1)") {
    const GroundState gs = shoot_ground_state(v, {0.9 * l1, 1.1 * l1});
    CHECK(gs.F.samples[edge](0, 0).real() == doctest::Approx(-std::sqrt(l1)).epsilon(1e-6));
    for (int i = edge + 1; i < g.n_points; ++i)
      CHECK(std::abs(gs.F.samples[i](0, 0).real() + std::sqrt(gs.lambda1)) <= 1e-14);
  }
  SUBCASE("stop_node and keep_samples") {
    RiccatiOptions o;
    o.stop_node = edge;
    const RiccatiField full = propagate_riccati(v, 0.7, o);
    CHECK(full.samples.size() == edge + 1);
    o.keep_samples = false;
    const RiccatiField last = propagate_riccati(v, 0.7, o);
    REQUIRE(last.samples.size() == 1);
    CHECK(Mat(last.samples[0]) == Mat(full.samples[edge]));
  }
}

TEST_CASE("blow-up is reported, not thrown") {
  // Far below the ground state the flow has a pole inside the well.
  const Grid g = box(10.0, 2e-3);
  const MatrixPotential v = square_well(40.0, 1.0, 1, g);
  const RiccatiField f = propagate_riccati(v, 0.05);
  CHECK_FALSE(f.complete());
  CHECK(f.blowup_node > 0);
  CHECK(std::abs(g.node(f.blowup_node)) <= 1.0 + 2 * g.h);
  CHECK_FALSE(shooting_function(v, 0.05).has_value());

  GroundState gs;
  gs.F = f;
  gs.lambda1 = 0.05;
  CHECK_THROWS_AS(darboux_transform(v, gs), InvalidStateError);
}

TEST_CASE("closed form in the free region") {
  const double s = 1.3;
  for (double t : {0.0, 0.2, 0.9, 0.999999}) {
    CHECK(free_riccati_map(-s, s, t) == -s);
    CHECK(free_riccati_map(s, s, t) == s);
  }
  CHECK(free_riccati_map(0.4, s, 0.0) == doctest::Approx(0.4));

  Mat f0(2, 2);
  f0 << cplx(-0.5, 0), cplx(0.2, 0.3), cplx(0.2, -0.3), cplx(0.7, 0);
  const double lambda = s * s, dx = 0.8;
  const double t = std::tanh(s * dx);
  const Mat id = Mat::Identity(2, 2);
  const Mat direct = s * (s * t * id + f0) * (s * id + t * f0).inverse();
  CHECK((closed_form_F_free(f0, lambda, dx) - direct).norm() < 1e-13);

  Mat bad = f0;
  bad(0, 0) = -2.0;
  CHECK_THROWS_AS(closed_form_F_free(bad, lambda, dx), ConsistencyError);
  CHECK_THROWS_AS(closed_form_F_free(f0, 0.0, dx), ParameterError);
}

TEST_CASE("closed form matches the integrated flow outside the support") {
  const Grid g = box(12.0, 2e-3);
  const MatrixPotential v = square_well(1.0, 1.0, 1, g);
  const double l1 = oracle::ground_level(1.0, 1.0);
  const int edge = right_edge_node(v);
  for (double lambda : {l1, 0.7, 2.0}) {
    const RiccatiField f = propagate_riccati(v, lambda);
    REQUIRE(f.complete());
    const int j = g.nearest_index(g.node(edge) + 1.0);
    const Mat cf = closed_form_F_free(Mat(f.samples[edge]), lambda, g.node(j) - g.node(edge));
    CHECK((cf - Mat(f.samples[j])).norm() < 1e-6);
  }
}

TEST_CASE("M propagation: free solution, Wronskian, A-independence") {
  const Grid g = box(12.0, 4e-3);
  SUBCASE("V = 0 gives e^{sqrt(lambda) x} A through renormalizations") {
    const Mat a = random_matrix(2, 3);
    const MatrixSolutionField m = propagate_M(MatrixField(g, 2), 4.0, a);
    CHECK_FALSE(m.renorm_log.empty());
    for (int i = 0; i < g.n_points; i += 500) {
      const Mat expect = std::exp(2.0 * g.node(i)) * a;
      CHECK((m.unwound(i) - expect).norm() <= 1e-8 * expect.norm());
    }
  }
  SUBCASE("Wronskian and F on a random matrix potential") {
    const MatrixPotential v = random_potential(21, 3, 1.0, 3.0, g);
    const double lambda = v.max_norm2() + 0.5;  // above the ground state
    const MatrixSolutionField mi = propagate_M(v, lambda, Mat::Identity(3, 3));
    const MatrixSolutionField ma = propagate_M(v, lambda, random_matrix(3, 8));
    const RiccatiField f = propagate_riccati(v, lambda);
    REQUIRE(f.complete());
    double wr = 0.0, dA = 0.0, dF = 0.0;
    for (int i = 0; i < g.n_points; ++i) {
      wr = std::max({wr, mi.wronskian_defect(i), ma.wronskian_defect(i)});
      dA = std::max(dA, (mi.riccati(i) - ma.riccati(i)).norm());
      dF = std::max(dF, (mi.riccati(i) - Mat(f.samples[i])).norm());
    }
    CHECK(wr <= 1e-8);
    CHECK(dA <= 1e-8);
    CHECK(dF <= 1e-6 * std::sqrt(lambda));
  }
  SUBCASE("F consistency on the scalar well") {
    const MatrixPotential v = square_well(1.0, 1.0, 1, g);
    for (double lambda : {0.6, 0.9}) {
      const MatrixSolutionField m = propagate_M(v, lambda, Mat::Constant(1, 1, cplx(0.3, 0.0)));
      const RiccatiField f = propagate_riccati(v, lambda);
      double d = 0.0;
      for (int i = 0; i < g.n_points; ++i) d = std::max(d, std::abs(m.riccati(i)(0, 0) - f.samples[i](0, 0)));
      CHECK(d <= 1e-6 * std::sqrt(lambda));
    }
  }
  CHECK_THROWS_AS(propagate_M(MatrixField(g, 2), 1.0, Mat::Zero(2, 2)), ParameterError);
  Mat near_singular = Mat::Identity(2, 2);
  near_singular(1, 1) = 1e-10;
  CHECK_THROWS_AS(propagate_M(MatrixField(g, 2), 1.0, near_singular), ParameterError);
  CHECK_THROWS_AS(propagate_M(MatrixField(g, 2), 1.0, Mat::Identity(3, 3)), ParameterError);
}

TEST_CASE("det M never vanishes at the ground energy") {
  const Grid g = box(12.0, 2e-3);
  for (int dim : {1, 2}) {
    const MatrixPotential v = square_well(1.0, 1.0, dim, g);
    const GroundState gs = shoot_ground_state(v, {0.4, 0.5});
    const MatrixSolutionField m = propagate_M(v, gs.lambda1, Mat::Identity(dim, dim));
    double running = -1e300, worst = 0.0;
    for (int i = 0; i < g.n_points; ++i) {
      const double l = m.log_abs_det(i);
      running = std::max(running, l);
      worst = std::min(worst, l - running);
    }
    CHECK(worst >= -30.0);
  }
}

TEST_CASE("Riccati residual is second order") {
  double r[3];
  int k = 0;
  for (double h : {8e-3, 4e-3, 2e-3}) {
    const Grid g = box(6.0, h);
    const MatrixPotential v = random_potential(4, 2, 1.5, 3.0, g);
    const double lambda = v.max_norm2() + 1.0;
    const RiccatiField f = propagate_riccati(v, lambda);
    REQUIRE(f.complete());
    r[k++] = riccati_residual(v, f);
  }
  CHECK(r[0] / r[1] >= 3.5);
  CHECK(r[0] / r[1] <= 4.5);
  CHECK(r[1] / r[2] >= 3.5);
  CHECK(r[1] / r[2] <= 4.5);
}

TEST_CASE("shooting: oracle, degeneracy, bracket errors") {
  const Grid g = box(12.0, 1e-3);
  const double l1 = oracle::ground_level(1.0, 1.0);
  SUBCASE("scalar well") {
    const GroundState gs = shoot_ground_state(square_well(1.0, 1.0, 1, g), {0.9 * l1, 1.1 * l1});
    CHECK(gs.lambda1 == doctest::Approx(l1).epsilon(1e-6));
    CHECK(gs.K == 1);
    CHECK(gs.degeneracy_tol == doctest::Approx(1e-5 * std::sqrt(gs.lambda1)));
  }
  SUBCASE("doubled well has K = 2") {
    const GroundState gs = shoot_ground_state(square_well(1.0, 1.0, 2, g), {0.9 * l1, 1.1 * l1});
    CHECK(gs.lambda1 == doctest::Approx(l1).epsilon(1e-6));
    CHECK(gs.K == 2);
  }
  SUBCASE("diagonal well has K = 1 and one free direction") {
    const GroundState gs = shoot_ground_state(diagonal_well({1.0, 0.5}, 1.0, g), {0.9 * l1, 1.1 * l1});
    CHECK(gs.K == 1);
    const double s = std::sqrt(gs.lambda1);
    CHECK(std::abs(gs.edge_eigenvalues(0) + s) <= gs.degeneracy_tol);
    CHECK(gs.edge_eigenvalues(1) > -s + gs.degeneracy_tol);
    CHECK(gs.edge_eigenvalues(1) <= s);
    // the free direction relaxes to +sqrt(lambda1) by the right end
    const Mat fend = gs.F.samples[g.n_points - 1];
    Eigen::SelfAdjointEigenSolver<Mat> es(fend, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues()(1) == doctest::Approx(s).epsilon(1e-6));
  }
  SUBCASE("shooting function increases through the root") {
    const MatrixPotential v = square_well(1.0, 1.0, 1, g);
    const GroundState gs = shoot_ground_state(v, {0.9 * l1, 1.1 * l1});
    const auto below = shooting_function(v, gs.lambda1 * (1 - 1e-3));
    const auto at = shooting_function(v, gs.lambda1);
    const auto above = shooting_function(v, gs.lambda1 * (1 + 1e-3));
    REQUIRE(at.has_value());
    REQUIRE(above.has_value());
    CHECK((!below.has_value() || *below < *at));
    CHECK(*at < *above);
    CHECK(*above > 0.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(shoot_ground_state(MatrixField(g, 1), {0.01, 1.0}), BracketError);
    const MatrixPotential v = square_well(1.0, 1.0, 1, g);
    CHECK_THROWS_AS(shoot_ground_state(v, {0.5, 0.9}), BracketError);  // both above lambda1
    CHECK_THROWS_AS(shoot_ground_state(v, {0.9, 0.5}), BracketError);
    CHECK_THROWS_AS(shoot_ground_state(v, {0.0, 0.5}), BracketError);
  }
}

TEST_CASE("Darboux transform") {
  const Grid g = box(12.0, 1e-3);
  SUBCASE("scalar well (1,1): exact zero on the left, empty spectrum after") {
    const MatrixPotential v = square_well(1.0, 1.0, 1, g);
    const GroundState gs = locate_ground_state(v);
    const MatrixField w = darboux_transform(v, gs);
    for (int i = 0; i < g.n_points; ++i)
      if (g.node(i) < -1.0 - 0.5 * g.h) CHECK(w[i].isZero(0.0));
    CHECK(w.max_hermiticity_defect() == 0.0);
    CHECK(negative_spectrum(w).empty());
    const double m2 = potential_moment(v, 2);
    CHECK(std::abs(trace_identity_residual(v, w, gs)) <= 1e-4 * m2);
  }
  SUBCASE("doubled well: K = 2 in the trace identity") {
    const MatrixPotential v = square_well(1.0, 1.0, 2, g);
    const GroundState gs = locate_ground_state(v);
    REQUIRE(gs.K == 2);
    const MatrixField w = darboux_transform(v, gs);
    CHECK(std::abs(trace_identity_residual(v, w, gs)) <= 1e-4 * potential_moment(v, 2));
    CHECK(negative_spectrum(w).empty());
  }
  SUBCASE("depth 10: remaining levels survive") {
    const MatrixPotential v = square_well(10.0, 1.0, 1, g);
    const GroundState gs = locate_ground_state(v);
    const MatrixField w = darboux_transform(v, gs);
    const Spectrum sp = negative_spectrum(w);
    const auto exact = oracle::square_well_levels(10.0, 1.0);
    REQUIRE_FALSE(sp.empty());
    CHECK(sp.multiplets[0].lambda == doctest::Approx(exact[1]).epsilon(1e-4));
    CHECK(std::abs(trace_identity_residual(v, w, gs)) <= 1e-4 * potential_moment(v, 2));
  }
  SUBCASE("random matrix potential stays hermitian") {
    const MatrixPotential v = random_potential(2, 3, 1.0, 3.0, g);
    const GroundState gs = locate_ground_state(v);
    const MatrixField w = darboux_transform(v, gs);
    CHECK(w.max_hermiticity_defect() <= 1e-12);
    CHECK(std::abs(trace_identity_residual(v, w, gs)) <= 1e-3 * potential_moment(v, 2));
    const Spectrum before = negative_spectrum(v), after = negative_spectrum(w);
    CHECK(after.total_count() == before.total_count() - gs.K);
  }
}

TEST_CASE("factorization H + lambda1 = D*D") {
  const Grid g = box(12.0, 2e-3);
  const MatrixPotential v = square_well(1.0, 1.0, 1, g);
  const GroundState gs = locate_ground_state(v);
  std::vector<std::vector<CVec>> trials;
  for (unsigned s = 0; s < 10; ++s) trials.push_back(smooth_trial(g, 1, s));
  CHECK(factorization_residual(v, gs, trials) <= 1e-4);

  // The ground state needs a box wide enough that the walls do not bend it.
  const Grid wide = box(25.0, 2e-3);
  const MatrixPotential vw = square_well(1.0, 1.0, 1, wide);
  const GroundState gw = locate_ground_state(vw);
  const auto phi = eigenvector_near(vw, -gw.lambda1);
  CHECK(d_operator_norm(wide, gw, phi) <= 1e-4);
  CHECK(factorization_residual(vw, gw, {phi}) <= 1e-4);

  // On a vector living where V = 0 and F = sqrt(lambda1), both forms equal
  // ||phi'||^2 + lambda1 ||phi||^2 - 2 sqrt(lambda1) Re<phi', phi> = ||phi'||^2 + lambda1 ||phi||^2.
  std::vector<CVec> left(static_cast<std::size_t>(g.n_points), CVec::Zero(1));
  for (int i = 0; i < g.n_points; ++i) left[static_cast<std::size_t>(i)](0) = bump((g.node(i) + 6.0) / 3.0);
  CHECK(factorization_residual(v, gs, {left}) <= 1e-8);

  CHECK_THROWS_AS(factorization_residual(v, gs, {std::vector<CVec>(3, CVec::Zero(1))}), ParameterError);
}

TEST_CASE("kernel of D* is not normalizable") {
  const Grid g = box(12.0, 2e-3);
  for (int dim : {1, 2}) {
    const MatrixPotential v = square_well(1.0, 1.0, dim, g);
    const GroundState gs = locate_ground_state(v);
    const double growth = adjoint_zero_mode_log_growth(g, gs);
    CHECK(growth >= std::sqrt(gs.lambda1) * (-1.0 - g.x_min) * (1 - 1e-6));
  }
}
