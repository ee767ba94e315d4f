#pragma once

#include <string>

#include "frontmix/laplace.hpp"
#include "frontmix/problem.hpp"

namespace frontmix {

// Polynomial moments of the signed initial field and the boundary fluxes that
// feed the small-s expansion of the squared flux transform about one front.
// Left moments weight x^k on [0, left_hi]; right moments weight (ell-x)^k on
// [right_lo, ell]. Flux moments weight t^k over the whole schedule.
struct FrontMoments {
  double mass_left = 0;
  double m2_left = 0;
  double m4_left = 0;
  double mass_right = 0;
  double n2_right = 0;
  double n4_right = 0;
  double mu0 = 0, mu1 = 0, mu2 = 0;
  double nu0 = 0, nu1 = 0, nu2 = 0;
  double ell = 1;
  double D = 1;
};

FrontMoments front_moments(const FrontSpec& front, const ProblemSpec& p);
FrontMoments front_moments(const ProblemSpec& p);

// s * f^2(s) = a1 + a2 s + a3 s^2 + O(s^3).
struct SmallS {
  double a1 = 0;
  double a2 = 0;
  double a3 = 0;
};

SmallS small_s_coefficients(const FrontMoments& m);
SmallS small_s_coefficients(const FrontSpec& front, const ProblemSpec& p);
SmallS small_s_coefficients(const ProblemSpec& p);

// Signed radii of gyration about x=0 and x=ell. The squared values are always
// real; a negative square means the radius itself is undefined and is reported
// as NaN with the matching flag cleared. A vanishing denominator (region mass
// plus injected mass) throws ZeroDenominator.
struct GyrationResult {
  double r_plus = 0;
  double r_minus = 0;
  double r_plus_sq = 0;
  double r_minus_sq = 0;
  bool plus_defined = false;
  bool minus_defined = false;
};

GyrationResult gyration_radii(const FrontMoments& m);
GyrationResult gyration_radii(const FrontSpec& front, const ProblemSpec& p);
GyrationResult gyration_radii(const ProblemSpec& p);

// Necessary conditions for a homogeneously mixing front: the leading small-s
// coefficient must vanish (balanced masses) and the quartic radius bound must
// hold. The bound is evaluated through the product form in squared radii,
// which equals the a3 < 0 condition and reduces to ell > R+ + R- whenever both
// radii are real. Passing both yields may_persist, never a guarantee.
struct HomogeneityVerdict {
  bool a1_zero = false;
  bool bound_holds = false;
  bool may_persist = false;
  SmallS coeffs;
  GyrationResult gyration;
  std::string text;
};

HomogeneityVerdict homogeneity_check(const FrontMoments& m);
HomogeneityVerdict homogeneity_check(const FrontSpec& front,
                                     const ProblemSpec& p);
HomogeneityVerdict homogeneity_check(const ProblemSpec& p);

}  // namespace frontmix
