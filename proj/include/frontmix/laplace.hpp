#pragma once

#include <complex>
#include <limits>
#include <utility>
#include <vector>

#include "frontmix/piecewise.hpp"
#include "frontmix/problem.hpp"

namespace frontmix {

// Transform-domain solution of D c'' = s c - C(x,0) on [0, ell] with flux
// boundary data D c'(0) = -j1, D c'(ell) = +j2.
//
// All internal quantities are kept in exponentially scaled form: with
// E(d) = exp(-d q), q = sqrt(s/D), every stored factor is bounded by 1 for
// Re q > 0, so no hyperbolic ever overflows regardless of s.
//
// S is double (real transform axis) or std::complex<double> (contour
// evaluations for series-accelerated inversion).
template <class S>
class LaplaceField {
 public:
  // Uses the problem's flux schedules for j1(s), j2(s).
  LaplaceField(const ProblemSpec& p, S s);
  // Explicit transform-domain boundary data (Dirichlet conversion, network
  // edge solves).
  LaplaceField(PiecewiseDensity field, double ell, double D, S s, S j1, S j2);

  S s() const { return s_; }
  S q() const { return q_; }
  double ell() const { return ell_; }
  double D() const { return D_; }
  S j1() const { return j1_; }
  S j2() const { return j2_; }

  // exp(-len * q); len >= 0.
  S E(double len) const;

  // Scaled kernel integrals over the initial field:
  //   zhat1(x) = e^{-x q} * integral_0^x cosh(x' q) C(x',0) dx'
  //   zhat2(x) = e^{-(ell-x) q} * integral_x^ell cosh((ell-x') q) C(x',0) dx'
  S zhat1(double x) const;
  S zhat2(double x) const;
  // Plain kernel integrals (grow like e^{x q}; fine for moderate q).
  S z1(double x) const;
  S z2(double x) const;

  // c(x,s) and its x-derivative; 0 <= x <= ell (throws DomainError).
  S value(double x) const;
  S derivative(double x) const;

  // Scaled single-front building blocks:
  //   phat(xl) = j1 E(xl) + zhat1(xl)           (e^{-xl q} times j1+Z1[xl])
  //   what(xr) = -(j2 E(ell-xr) + zhat2(xr))    (e^{-(ell-xr) q} times vZ2-j2)
  S phat(double xl) const;
  S what(double xr) const;

  // 1 - E(2 ell), the scaled sinh denominator; always nonzero for Re q > 0.
  S denom() const { return denom_; }

 private:
  PiecewiseDensity field_;
  double ell_ = 1.0;
  double D_ = 1.0;
  S s_{};
  S q_{};
  S j1_{};
  S j2_{};
  S denom_{};
};

// One mixing front: the gap between block i and block i+1.
struct FrontSpec {
  int index = 0;
  double left_lo = 0.0, left_hi = 0.0;    // block i support
  double right_lo = 0.0, right_hi = 0.0;  // block i+1 support
  bool left_is_a = true;
};

// N fronts from the problem's N+1 alternating blocks.
std::vector<FrontSpec> enumerate_fronts(const ProblemSpec& p);

// f(s) sample: the radicand is kept for diagnostics; a negative radicand is
// never clamped, it marks the sample invalid (f = NaN).
struct GenResult {
  double f = std::numeric_limits<double>::quiet_NaN();
  double radicand = 0.0;
  bool valid = false;
};

// Mixing locus y(s) of the single-front problem; real transform axis only.
// Throws ArctanhDomainError when c(., s) has no interior zero crossing of
// the required orientation, LocusOutOfGap when the zero leaves the support
// gap (criterion failure signal).
double mixing_locus(const ProblemSpec& p, double s);
// Same for one front of a multifront layout.
double mixing_locus(const FrontSpec& front, const ProblemSpec& p, double s);

// Generating function f(s) of the mixing flux at the single front.
GenResult generating_function(const ProblemSpec& p, double s);
// Contour variant for inversion: principal branch, agrees with the real
// routine for s > 0 whenever the radicand is positive.
std::complex<double> generating_function_c(const ProblemSpec& p,
                                           std::complex<double> s);

// Per-front generating function f_i(s); N=1 reduces to generating_function.
GenResult multifront_generating(const FrontSpec& front, const ProblemSpec& p,
                                double s);

// Transform-domain energy density (D c')^2 - s D c^2, constant in x across
// a source-free gap; equals f_i(s)^2 there.
double gap_energy(const ProblemSpec& p, double s, double x);

// Boundary fluxes that produce the requested boundary values c(0,s) = alpha,
// c(ell,s) = beta for this problem's initial data.
template <class S>
std::pair<S, S> dirichlet_to_neumann(const ProblemSpec& p, S s, S alpha,
                                     S beta);

}  // namespace frontmix
