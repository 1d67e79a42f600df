#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle/square_well_oracle.hpp"
#include "spectralstrip/stripping.hpp"

using namespace spectralstrip;

namespace {

Grid box(double half, double h) { return make_uniform_grid(-half, half, static_cast<int>(std::lround(2 * half / h)) + 1); }

MatrixPotential zero_potential(const Grid& g, int dim) { return MatrixPotential(MatrixField(g, dim), 1.0); }

double oracle_moment(double depth, double p) {
  double s = 0.0;
  for (double l : oracle::square_well_levels(depth, 1.0)) s += std::pow(l, p);
  return s;
}

}  // namespace

TEST_CASE("strip_once on the basic wells") {
  const Grid g = box(12.0, 2e-3);
  SUBCASE("scalar well (1,1) empties in one step") {
    const auto r = strip_once(square_well(1.0, 1.0, 1, g));
    REQUIRE(r.has_value());
    CHECK(r->step.K == 1);
    CHECK(r->step.lambda == doctest::Approx(oracle::ground_level(1.0, 1.0)).epsilon(1e-5));
    CHECK(r->step.identity_ok);
    CHECK(r->step.e >= 0.0);
    CHECK(r->step.e == doctest::Approx(r->step.tail_mass + r->step.shift_bound));
    CHECK(r->step.moment_after ==
          doctest::Approx(r->step.moment_before - 16.0 / 3.0 * std::pow(r->step.lambda, 1.5)).epsilon(1e-3));
    CHECK(negative_spectrum(r->potential).empty());
    CHECK(r->potential.support_half_width() <= g.x_max);
  }
  SUBCASE("doubled well: one step with K = 2") {
    const auto r = strip_once(square_well(1.0, 1.0, 2, g));
    REQUIRE(r.has_value());
    CHECK(r->step.K == 2);
    CHECK(negative_spectrum(r->potential).empty());
  }
  SUBCASE("diagonal well: K = 1 and the shallower level survives") {
    // The free direction leaves a tail e^{-2 sqrt(lambda1) x}; it needs room.
    const auto r = strip_once(diagonal_well({1.0, 0.5}, 1.0, box(20.0, 2e-3)));
    REQUIRE(r.has_value());
    CHECK(r->step.K == 1);
    const Spectrum rest = negative_spectrum(r->potential);
    REQUIRE(rest.total_count() == 1);
    CHECK(rest.multiplets[0].lambda == doctest::Approx(oracle::ground_level(0.5, 1.0)).epsilon(1e-4));
  }
  SUBCASE("depth 10: excited levels survive") {
    const auto r = strip_once(square_well(10.0, 1.0, 1, g));
    REQUIRE(r.has_value());
    const auto exact = oracle::square_well_levels(10.0, 1.0);
    CHECK(r->step.lambda == doctest::Approx(exact[0]).epsilon(1e-5));
    const Spectrum rest = negative_spectrum(r->potential);
    REQUIRE_FALSE(rest.empty());
    CHECK(rest.multiplets[0].lambda == doctest::Approx(exact[1]).epsilon(1e-4));
  }
  SUBCASE("nothing to strip") {
    CHECK_FALSE(strip_once(zero_potential(g, 2)).has_value());
  }
  SUBCASE("bad threshold") {
    StripOptions o;
    o.cutoff_threshold = 0.0;
    CHECK_THROWS_AS(strip_once(square_well(1.0, 1.0, 1, g), o), ParameterError);
  }
}

TEST_CASE("strip_once refuses a box too small for the tail") {
  // The unbound direction of the diagonal well leaves a tail that is still
  // ~1e-3 at the walls of [-5, 5]. The scalar well leaves none.
  const Grid g = box(5.0, 2e-3);
  CHECK_THROWS_AS(strip_once(diagonal_well({1.0, 0.5}, 1.0, g)), DecayError);
  CHECK(strip_once(square_well(1.0, 1.0, 1, g)).has_value());
}

TEST_CASE("strip_all on the scalar well (1,1)") {
  const Grid g = box(12.0, 2e-3);
  const MatrixPotential v = square_well(1.0, 1.0, 1, g);
  const StrippingTrace tr = strip_all(v);
  CHECK(tr.complete);
  CHECK(tr.steps.size() == 1);
  CHECK(tr.remaining.empty());
  CHECK(tr.deficit < 0.0);
  const double target = 0.1875 * tr.initial_moment;
  CHECK(std::abs(tr.deficit + tr.residual_moment) <= tr.total_error + 1e-3 * target);
  CHECK(tr.deficit <= tr.total_error + 1e-6);
  CHECK(tr.telescoping_ok);
  CHECK(tr.steps[0].telescoped == doctest::Approx(target).epsilon(1e-3));
  CHECK(tr.intermediates.empty());
}

TEST_CASE("strip_all on the depth-10 well") {
  const Grid g = box(30.0, 4e-3);
  const MatrixPotential v = square_well(10.0, 1.0, 1, g);
  const auto exact = oracle::square_well_levels(10.0, 1.0);
  const double floor = marginal_floor(g);
  std::size_t resolved = 0;
  for (double l : exact) resolved += l > floor ? 1 : 0;

  StripOptions o;
  o.keep_intermediates = true;
  const StrippingTrace tr = strip_all(v, o);
  CHECK(tr.complete);
  CHECK(tr.telescoping_ok);
  CHECK(tr.steps.size() == resolved);
  CHECK(tr.intermediates.size() == tr.steps.size());
  for (std::size_t j = 0; j < tr.steps.size(); ++j) {
    CHECK(tr.steps[j].K == 1);
    CHECK(tr.steps[j].lambda == doctest::Approx(exact[j]).epsilon(1e-4));
    CHECK(tr.steps[j].e >= 0.0);
  }

  double removed = 0.0;
  for (const StripStep& st : tr.steps) removed += st.K * std::pow(st.lambda, 1.5);
  for (const Multiplet& m : tr.remaining) {
    CHECK(m.marginal);
    removed += m.multiplicity * std::pow(m.lambda, 1.5);
  }
  CHECK(removed == doctest::Approx(oracle_moment(10.0, 1.5)).epsilon(1e-4));
  CHECK(tr.deficit <= tr.total_error + 1e-6);
  CHECK(tr.marginal_allowance >= 0.0);
}

TEST_CASE("cutoff threshold barely moves the deficit") {
  const Grid g = box(30.0, 4e-3);
  const MatrixPotential v = square_well(10.0, 1.0, 1, g);
  StripOptions loose, tight;
  loose.cutoff_threshold = 1e-8;
  tight.cutoff_threshold = 1e-12;
  const StrippingTrace a = strip_all(v, loose), b = strip_all(v, tight);
  CHECK(std::abs(a.deficit - b.deficit) < 1e-6);
}

TEST_CASE("strip_all bookkeeping") {
  const Grid g = box(12.0, 4e-3);
  SUBCASE("zero potential") {
    const StrippingTrace tr = strip_all(zero_potential(g, 2));
    CHECK(tr.steps.empty());
    CHECK(tr.deficit == 0.0);
    CHECK(tr.final_potential.is_zero());
    CHECK(tr.complete);
  }
  SUBCASE("max_steps flags an incomplete trace") {
    StripOptions o;
    o.max_steps = 1;
    const StrippingTrace tr = strip_all(square_well(10.0, 1.0, 1, g), o);
    CHECK(tr.steps.size() == 1);
    CHECK_FALSE(tr.complete);
    CHECK_FALSE(tr.remaining.empty());
  }
  SUBCASE("raised threshold is charged to e") {
    // The fast box is too small for the slow tails of this potential at
    // 1e-10, so the cutoff level is raised and the ledger absorbs it.
    const StrippingTrace tr = strip_all(random_potential(7, 2, 1.0, 3.0, g));
    CHECK(tr.complete);
    bool raised = false;
    for (const StripStep& st : tr.steps) {
      CHECK(st.effective_threshold >= 1e-10);
      CHECK(st.effective_threshold <= kMaxRaisedThreshold * 100.0);
      CHECK(st.shift_bound == doctest::Approx(2 * st.effective_threshold * g.width()));
      raised = raised || st.effective_threshold > 1e-10;
    }
    CHECK(raised);
    CHECK(tr.deficit <= tr.total_error + 1e-6);
  }
}

TEST_CASE("Lieb-Thirring verdicts") {
  const Grid g = box(12.0, 1e-3);
  SUBCASE("zero potential") {
    const Theorem1Verdict t = verify_theorem1(zero_potential(g, 1));
    CHECK(t.lhs == 0.0);
    CHECK(t.rhs == 0.0);
    CHECK(t.pass);
  }
  SUBCASE("scalar well (1,1)") {
    const Theorem1Verdict t = verify_theorem1(square_well(1.0, 1.0, 1, g));
    CHECK(t.lhs == doctest::Approx(std::pow(oracle::ground_level(1.0, 1.0), 1.5)).epsilon(1e-5));
    CHECK(t.rhs == doctest::Approx(0.375).epsilon(1e-3));
    CHECK(t.deficit == doctest::Approx(t.lhs - t.rhs));
    CHECK(t.pass);
  }
  SUBCASE("random potentials") {
    for (std::uint64_t seed = 100; seed < 106; ++seed) {
      const Theorem1Verdict t = verify_theorem1(random_potential(seed, 1 + seed % 3, 1.0, 2.0, g));
      CHECK(t.pass);
      CHECK(t.lhs > 0.0);
    }
  }
}

TEST_CASE("half-moment bounds") {
  const Grid g = box(12.0, 1e-3);
  SUBCASE("zero potential") {
    const HalfMomentVerdict h = half_moment_bounds(zero_potential(g, 1));
    CHECK(h.moment == 0.0);
    CHECK(h.lower == 0.0);
    CHECK(h.upper == 0.0);
    CHECK(h.pass);
  }
  SUBCASE("scalar well (1,1)") {
    const HalfMomentVerdict h = half_moment_bounds(square_well(1.0, 1.0, 1, g));
    CHECK(h.lower == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(h.upper == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(h.moment == doctest::Approx(std::sqrt(oracle::ground_level(1.0, 1.0))).epsilon(1e-5));
    CHECK(h.pass);
  }
  SUBCASE("random potentials") {
    for (std::uint64_t seed = 200; seed < 206; ++seed) CHECK(half_moment_bounds(random_potential(seed, 1 + seed % 3, 1.0, 2.0, g)).pass);
  }
}
