#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "frontmix/errors.hpp"
#include "frontmix/piecewise.hpp"
#include "frontmix/problem.hpp"
#include "frontmix/quadrature.hpp"
#include "test_configs.hpp"
#include "test_oracles.hpp"

using namespace frontmix;
using testcfg::kPi;

TEST_CASE("adaptive quadrature matches Simpson on a smooth integrand") {
  auto f = [](double x) { return std::exp(-x * x) * std::cos(3.0 * x); };
  const double got = integrate(f, 0.0, 3.0);
  const double want = oracle::simpson(f, 0.0, 3.0, 20000);
  CHECK(oracle::rel_err(got, want) < 1e-11);
}

TEST_CASE("piece values") {
  Piece c{0.1, 0.4, PieceKind::constant, {20.0 / 3.0}};
  CHECK(c.value(0.2) == doctest::Approx(20.0 / 3.0).epsilon(1e-15));
  CHECK(c.value(0.05) == 0.0);
  CHECK(c.value(0.5) == 0.0);

  Piece poly{1.0, 2.0, PieceKind::polynomial, {1.0, -2.0, 3.0}};
  // local coordinate: 1 - 2(x-1) + 3(x-1)^2 at x=1.5 -> 1 - 1 + 0.75
  CHECK(poly.value(1.5) == doctest::Approx(0.75).epsilon(1e-15));

  Piece s{0.6, 0.8, PieceKind::sinusoid_window, {2.0 * kPi, kPi, 0.0}};
  CHECK(s.value(0.7) == doctest::Approx(2.0 * kPi * std::sin(0.7 * kPi)));
}

TEST_CASE("piece moments against Simpson") {
  Piece pieces[] = {
      Piece{0.1, 0.4, PieceKind::constant, {20.0 / 3.0}},
      Piece{1.0, 2.0, PieceKind::polynomial, {1.0, -2.0, 3.0, 0.5}},
      Piece{0.6, 0.8, PieceKind::sinusoid_window, {2.0 * kPi, kPi, 0.3}},
  };
  for (const Piece& p : pieces) {
    for (int k = 0; k <= 4; ++k) {
      const double got = p.moment(k);
      const double want = oracle::simpson(
          [&](double x) { return std::pow(x, k) * p.value(x); }, p.a, p.b,
          20000);
      CHECK(oracle::rel_err(got, want) < 1e-10);
    }
    // Clipped range.
    const double mid_lo = p.a + 0.3 * (p.b - p.a);
    const double mid_hi = p.a + 0.8 * (p.b - p.a);
    const double got = p.partial_moment(1, mid_lo, mid_hi);
    const double want = oracle::simpson(
        [&](double x) { return x * p.value(x); }, mid_lo, mid_hi, 20000);
    CHECK(oracle::rel_err(got, want) < 1e-10);
  }
}

TEST_CASE("unit block second moment frozen value") {
  // Unit-mass block on [0.2,0.4]: (0.4^3-0.2^3)/(3*0.2) = 0.0933...
  PiecewiseDensity d({Piece{0.2, 0.4, PieceKind::constant, {5.0}}});
  CHECK(d.mass() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(d.moment(2, Axis::left, 1.0) ==
        doctest::Approx(0.0933333333333333).epsilon(1e-12));
}

TEST_CASE("left and right axis moments") {
  PiecewiseDensity d(
      {Piece{0.6, 0.8, PieceKind::sinusoid_window, {2.0 * kPi, kPi, 0.0}}});
  const double ell = 1.0;
  for (int k = 0; k <= 4; ++k) {
    const double got = d.moment(k, Axis::right, ell);
    const double want = oracle::simpson(
        [&](double x) { return std::pow(ell - x, k) * d.value(x); }, 0.6, 0.8,
        20000);
    CHECK(oracle::rel_err(got, want) < 1e-10);
  }
  // k=0 is the mass on either axis.
  CHECK(d.moment(0, Axis::right, ell) == doctest::Approx(d.mass()));
}

TEST_CASE("symmetric density has equal second moments about both ends") {
  // Triangle symmetric about 0.5 on [0.3,0.7], built from two polynomials.
  PiecewiseDensity d({Piece{0.3, 0.5, PieceKind::polynomial, {0.0, 5.0}},
                      Piece{0.5, 0.7, PieceKind::polynomial, {1.0, -5.0}}});
  CHECK(d.moment(2, Axis::left, 1.0) ==
        doctest::Approx(d.moment(2, Axis::right, 1.0)).epsilon(1e-12));
}

TEST_CASE("mirrored pieces reproduce reflected values and moments") {
  const double ell = 1.3;
  Piece pieces[] = {
      Piece{0.1, 0.4, PieceKind::constant, {2.5}},
      Piece{0.2, 0.9, PieceKind::polynomial, {1.0, -0.5, 2.0, -1.0, 0.25}},
      Piece{0.6, 1.1, PieceKind::sinusoid_window, {1.7, 2.3, 0.4}},
  };
  for (const Piece& p : pieces) {
    const Piece m = p.mirrored(ell);
    for (double u = 0.02; u < ell; u += 0.037)
      CHECK(m.value(u) == doctest::Approx(p.value(ell - u)).epsilon(1e-11));
    CHECK(m.moment(0) == doctest::Approx(p.moment(0)).epsilon(1e-11));
    // x-moment of the mirror equals the (ell-x)-moment of the original.
    const double got = m.moment(1);
    const double want = oracle::simpson(
        [&](double x) { return (ell - x) * p.value(x); }, p.a, p.b, 20000);
    CHECK(oracle::rel_err(got, want) < 1e-9);
  }
}

TEST_CASE("density construction rejects overlap and negative values") {
  CHECK_THROWS_AS(PiecewiseDensity({
                      Piece{0.1, 0.5, PieceKind::constant, {1.0}},
                      Piece{0.4, 0.9, PieceKind::constant, {1.0}},
                  }),
                  OverlapError);
  PiecewiseDensity neg({Piece{0.1, 0.5, PieceKind::constant, {-1.0}}});
  CHECK_THROWS_AS(neg.check_nonnegative("rho_b"), NegativeDensityError);
  // Touching pieces are fine.
  CHECK_NOTHROW(PiecewiseDensity({
      Piece{0.1, 0.5, PieceKind::constant, {1.0}},
      Piece{0.5, 0.9, PieceKind::constant, {2.0}},
  }));
}

TEST_CASE("flux schedule closed-form moments and transform") {
  const FluxSchedule j = FluxSchedule::exponential(-20.0, 20.0);
  CHECK(j.integral() == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(j.t_moment() == doctest::Approx(-1.0 / 20.0).epsilon(1e-12));
  CHECK(j.t2_moment() == doctest::Approx(-2.0 / 400.0).epsilon(1e-12));
  CHECK(j.abs_integral() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(j.continuous());
  for (double s : {0.01, 1.0, 50.0})
    CHECK(j.laplace(s) == doctest::Approx(-20.0 / (s + 20.0)).epsilon(1e-12));
  // Complex abscissa against direct quadrature.
  const std::complex<double> s(2.0, 5.0);
  const std::complex<double> got = j.laplace_c(s);
  const std::complex<double> want = -20.0 / (s + 20.0);
  CHECK(std::abs(got - want) < 1e-12);
}

TEST_CASE("flux moments agree with direct quadrature for all kinds") {
  const FluxSchedule burst = testcfg::burst_j2();
  const double cutoff = 3.0;  // exp(-60) tail is below double noise
  for (int k = 0; k <= 2; ++k) {
    const double want = oracle::simpson_split(
        [&](double t) { return std::pow(t, k) * burst.value(t); },
        {0.0, 0.2, cutoff}, 40000);
    const double got = k == 0   ? burst.integral()
                       : k == 1 ? burst.t_moment()
                                : burst.t2_moment();
    CHECK(oracle::rel_err(got, want) < 1e-10);
  }
  // Frozen net injection of the burst schedule.
  CHECK(burst.integral() == doctest::Approx(0.0037811174).epsilon(1e-6));
  CHECK_FALSE(burst.continuous());

  // |J|: bisect the sign change independently, then integrate piecewise.
  double lo = 0.05, hi = 0.06;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (burst.value(mid) < 0.0 ? lo : hi) = mid;
  }
  const double want_abs = oracle::simpson_split(
      [&](double t) { return std::abs(burst.value(t)); },
      {0.0, 0.5 * (lo + hi), 0.2, cutoff}, 40000);
  CHECK(oracle::rel_err(burst.abs_integral(), want_abs) < 1e-8);

  // Laplace transform of the burst against weighted quadrature.
  for (double s : {0.5, 3.0, 20.0}) {
    const double want = oracle::simpson_split(
        [&](double t) { return std::exp(-s * t) * burst.value(t); },
        {0.0, 0.2, cutoff}, 40000);
    CHECK(oracle::rel_err(burst.laplace(s), want) < 1e-9);
  }
}

TEST_CASE("tabulated schedules interpolate monotonically and integrate") {
  FluxTerm tab;
  tab.kind = FluxTerm::Kind::tabulated;
  tab.times = {0.0, 0.5, 1.0, 1.5, 2.5};
  tab.values = {0.0, 1.0, 0.6, 0.6, 0.0};
  const FluxSchedule j({tab});
  // Knot values reproduced.
  for (std::size_t i = 0; i < tab.times.size(); ++i)
    CHECK(j.value(tab.times[i]) == doctest::Approx(tab.values[i]));
  // Monotone segments do not overshoot.
  for (double t = 0.0; t <= 0.5; t += 0.01) {
    CHECK(j.value(t) <= 1.0 + 1e-12);
    CHECK(j.value(t) >= -1e-12);
  }
  // Flat segment stays flat.
  CHECK(j.value(1.25) == doctest::Approx(0.6).epsilon(1e-12));
  // Moments against quadrature of the interpolant itself.
  for (int k = 0; k <= 2; ++k) {
    const double want = oracle::simpson(
        [&](double t) { return std::pow(t, k) * j.value(t); }, 0.0, 2.5,
        40000);
    const double got = k == 0   ? j.integral()
                       : k == 1 ? j.t_moment()
                                : j.t2_moment();
    CHECK(oracle::rel_err(got, want) < 1e-9);
  }
  // Laplace via quadrature path.
  const double want_l = oracle::simpson(
      [&](double t) { return std::exp(-2.0 * t) * j.value(t); }, 0.0, 2.5,
      40000);
  CHECK(oracle::rel_err(j.laplace(2.0), want_l) < 1e-9);
  CHECK_FALSE(j.is_zero());
  CHECK(FluxSchedule::zero().is_zero());
}

TEST_CASE("divergent flux rejected") {
  FluxTerm t;
  t.kind = FluxTerm::Kind::exponential;
  t.amplitude = 1.0;
  t.rate = 0.0;  // constant for all time
  CHECK_THROWS_AS(FluxSchedule({t}), DivergentFluxError);
  t.rate = -1.0;
  CHECK_THROWS_AS(FluxSchedule({t}), DivergentFluxError);
  // A finite window makes it integrable again.
  t.rate = 0.0;
  t.t1 = 2.0;
  CHECK_NOTHROW(FluxSchedule({t}));
  CHECK(FluxSchedule({t}).integral() == doctest::Approx(2.0));
}

TEST_CASE("reference problem validates with frozen values") {
  ProblemSpec p = testcfg::fig1();
  CHECK_NOTHROW(p.validate());
  CHECK(p.rho_a.mass() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(p.rho_b.mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.eval_initial(0.2) == doctest::Approx(20.0 / 3.0).epsilon(1e-14));
  CHECK(p.eval_initial(0.5) == 0.0);  // in the gap
  CHECK(p.eval_initial(0.7) ==
        doctest::Approx(-2.0 * kPi * std::sin(0.7 * kPi)).epsilon(1e-12));
  CHECK(p.eval_initial(0.7) == doctest::Approx(-5.0832).epsilon(1e-4));
  CHECK(std::abs(p.mass_balance_residual()) < 1e-9);
  CHECK(p.gap_lo() == doctest::Approx(0.4));
  CHECK(p.gap_hi() == doctest::Approx(0.6));
  CHECK_THROWS_AS(p.eval_initial(-0.1), DomainError);
  CHECK_THROWS_AS(p.eval_initial(1.1), DomainError);

  const auto blocks = p.blocks();
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].species_a);
  CHECK_FALSE(blocks[1].species_a);
}

TEST_CASE("initial field integrates to the net mass") {
  ProblemSpec p = testcfg::fig1();
  const double direct = oracle::simpson_split(
      [&](double x) { return p.eval_initial(x); }, {0.0, 0.1, 0.4, 0.6, 0.8, 1.0},
      4000);
  const double moments = p.rho_a.mass() - p.v * p.rho_b.mass();
  CHECK(std::abs(direct - moments) < 1e-9);

  // Merged field equals pointwise evaluation.
  const PiecewiseDensity field = p.initial_field();
  for (double x = 0.0; x <= 1.0; x += 0.013)
    CHECK(field.value(x) == doctest::Approx(p.eval_initial(x)).epsilon(1e-12));
}

TEST_CASE("eigenmode fixture: touching supports are valid") {
  ProblemSpec p = testcfg::eigenmode();
  CHECK_NOTHROW(p.validate());
  for (double x = 0.0; x <= 1.0; x += 0.0173)
    CHECK(p.eval_initial(x) == doctest::Approx(std::cos(kPi * x)).epsilon(1e-12));
  CHECK(std::abs(p.mass_balance_residual()) < 1e-12);
  CHECK(p.gap_lo() == doctest::Approx(0.5));
  CHECK(p.gap_hi() == doctest::Approx(0.5));
}

TEST_CASE("separation violations throw") {
  ProblemSpec p;
  p.rho_a = PiecewiseDensity({Piece{0.1, 0.5, PieceKind::constant, {1.0}}});
  p.rho_b = PiecewiseDensity({Piece{0.4, 0.9, PieceKind::constant, {1.0}}});
  CHECK_THROWS_AS(p.validate(), SeparationError);

  ProblemSpec neg;
  neg.rho_a = PiecewiseDensity({Piece{0.1, 0.3, PieceKind::constant, {1.0}}});
  neg.rho_b = PiecewiseDensity({Piece{0.6, 0.9, PieceKind::constant, {-1.0}}});
  CHECK_THROWS_AS(neg.validate(), NegativeDensityError);

  ProblemSpec outside;
  outside.rho_a = PiecewiseDensity({Piece{-0.2, 0.3, PieceKind::constant, {1.0}}});
  CHECK_THROWS_AS(outside.validate(), ConfigError);
}

TEST_CASE("unbalanced masses leave a residual") {
  ProblemSpec p = testcfg::unit_masses(0.5);
  CHECK_NOTHROW(p.validate());
  CHECK(p.mass_balance_residual() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(testcfg::unit_masses(1.0).mass_balance_residual() ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("reflection maps the residual to its negative") {
  for (ProblemSpec p :
       {testcfg::unit_masses(0.5), testcfg::fig1(), testcfg::eigenmode()}) {
    const ProblemSpec m = p.mirrored();
    CHECK_NOTHROW(m.validate());
    CHECK(m.mass_balance_residual() ==
          doctest::Approx(-p.mass_balance_residual()).epsilon(1e-12));
    for (double x = 0.0; x <= p.ell; x += 0.0171)
      CHECK(m.eval_initial(x) ==
            doctest::Approx(-p.eval_initial(p.ell - x)).epsilon(1e-11));
  }
}

TEST_CASE("multifront layout validation") {
  ProblemSpec p = testcfg::multifront_aba();
  CHECK_NOTHROW(p.validate());
  CHECK(p.blocks().size() == 3);

  // Same densities but a non-alternating declaration.
  ProblemSpec bad = p;
  bad.fronts[2].species_a = false;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  // Overlapping declared blocks.
  ProblemSpec overlap = p;
  overlap.fronts[1].lo = 0.2;
  CHECK_THROWS_AS(overlap.validate(), SeparationError);

  // A piece outside every declared block of its species.
  ProblemSpec uncovered = p;
  uncovered.fronts[2].lo = 0.8;
  CHECK_THROWS_AS(uncovered.validate(), ConfigError);
}

TEST_CASE("normalized flag enforces unit masses") {
  ProblemSpec p = testcfg::unit_masses(1.0);
  p.normalized = true;
  CHECK_NOTHROW(p.validate());
  ProblemSpec q = testcfg::fig1();
  q.normalized = true;  // rho_a has mass 2
  CHECK_THROWS_AS(q.validate(), ConfigError);
}

TEST_CASE("binomial coefficients") {
  CHECK(binomial(4, 2) == doctest::Approx(6.0));
  CHECK(binomial(6, 0) == doctest::Approx(1.0));
  CHECK(binomial(6, 6) == doctest::Approx(1.0));
  CHECK(binomial(10, 3) == doctest::Approx(120.0));
}
