#include "frontmix/fronts.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "frontmix/errors.hpp"
#include "frontmix/piecewise.hpp"

namespace frontmix {

namespace {

// x^k moment of the signed field over [lo, hi], left coordinate.
double partial_left(const PiecewiseDensity& field, int k, double lo,
                    double hi) {
  double acc = 0;
  for (const auto& piece : field.pieces()) acc += piece.partial_moment(k, lo, hi);
  return acc;
}

// (ell - x)^k moment over [lo, hi] via binomial expansion in x moments.
double partial_right(const PiecewiseDensity& field, int k, double lo,
                     double hi, double ell) {
  double acc = 0;
  for (int j = 0; j <= k; ++j) {
    double sign = (j % 2 == 0) ? 1.0 : -1.0;
    acc += sign * binomial(k, j) * std::pow(ell, k - j) *
           partial_left(field, j, lo, hi);
  }
  return acc;
}

}  // namespace

FrontMoments front_moments(const FrontSpec& front, const ProblemSpec& p) {
  FrontMoments m;
  m.ell = p.ell;
  m.D = p.D;
  const PiecewiseDensity field = p.initial_field();
  const double xl = front.left_hi;
  const double xr = front.right_lo;
  m.mass_left = partial_left(field, 0, 0.0, xl);
  m.m2_left = partial_left(field, 2, 0.0, xl);
  m.m4_left = partial_left(field, 4, 0.0, xl);
  m.mass_right = partial_right(field, 0, xr, p.ell, p.ell);
  m.n2_right = partial_right(field, 2, xr, p.ell, p.ell);
  m.n4_right = partial_right(field, 4, xr, p.ell, p.ell);
  m.mu0 = p.j1.integral();
  m.mu1 = p.j1.t_moment();
  m.mu2 = p.j1.t2_moment();
  m.nu0 = p.j2.integral();
  m.nu1 = p.j2.t_moment();
  m.nu2 = p.j2.t2_moment();
  return m;
}

FrontMoments front_moments(const ProblemSpec& p) {
  const auto fronts = enumerate_fronts(p);
  if (fronts.size() != 1)
    throw ConfigError("front_moments without an index needs a single front");
  return front_moments(fronts.front(), p);
}

SmallS small_s_coefficients(const FrontMoments& m) {
  const double D = m.D;
  const double ell = m.ell;
  const double a0 = m.mass_left + m.mu0;
  const double a1 = m.m2_left / (2 * D) - m.mu1;
  const double a2 = m.m4_left / (24 * D * D) + m.mu2 / 2;
  const double b0 = m.mass_right + m.nu0;
  const double b1 = m.n2_right / (2 * D) - m.nu1;
  const double b2 = m.n4_right / (24 * D * D) + m.nu2 / 2;
  const double g0 = a0 + b0;
  const double g1 = a1 + b1 + a0 * ell * ell / (2 * D);
  const double g2 = a2 + b2 + a1 * ell * ell / (2 * D) +
                    a0 * std::pow(ell, 4) / (24 * D * D);
  SmallS out;
  out.a1 = -(D / (ell * ell)) * g0 * g0;
  out.a2 = a0 * a0 - 2 * (D / (ell * ell)) * g0 * g1 + g0 * g0 / 3;
  out.a3 = 2 * a0 * a1 -
           (D / (ell * ell)) *
               (g1 * g1 + 2 * g0 * g2 - 2 * g0 * g1 * ell * ell / (3 * D) +
                g0 * g0 * std::pow(ell, 4) / (15 * D * D));
  return out;
}

SmallS small_s_coefficients(const FrontSpec& front, const ProblemSpec& p) {
  return small_s_coefficients(front_moments(front, p));
}

SmallS small_s_coefficients(const ProblemSpec& p) {
  return small_s_coefficients(front_moments(p));
}

GyrationResult gyration_radii(const FrontMoments& m) {
  const double denom_plus = m.mass_left + m.mu0;
  const double denom_minus = m.mass_right + m.nu0;
  const double scale_plus = std::abs(m.mass_left) + std::abs(m.mu0);
  const double scale_minus = std::abs(m.mass_right) + std::abs(m.nu0);
  if (std::abs(denom_plus) <= 1e-13 * scale_plus || scale_plus == 0)
    throw ZeroDenominator("left region mass plus injected mass vanishes");
  if (std::abs(denom_minus) <= 1e-13 * scale_minus || scale_minus == 0)
    throw ZeroDenominator("right region mass plus injected mass vanishes");
  GyrationResult out;
  out.r_plus_sq = (m.m2_left - 2 * m.D * m.mu1) / denom_plus;
  out.r_minus_sq = (m.n2_right - 2 * m.D * m.nu1) / denom_minus;
  out.plus_defined = out.r_plus_sq >= 0;
  out.minus_defined = out.r_minus_sq >= 0;
  out.r_plus = out.plus_defined ? std::sqrt(out.r_plus_sq)
                                : std::numeric_limits<double>::quiet_NaN();
  out.r_minus = out.minus_defined ? std::sqrt(out.r_minus_sq)
                                  : std::numeric_limits<double>::quiet_NaN();
  return out;
}

GyrationResult gyration_radii(const FrontSpec& front, const ProblemSpec& p) {
  return gyration_radii(front_moments(front, p));
}

GyrationResult gyration_radii(const ProblemSpec& p) {
  return gyration_radii(front_moments(p));
}

HomogeneityVerdict homogeneity_check(const FrontMoments& m) {
  HomogeneityVerdict out;
  out.coeffs = small_s_coefficients(m);
  out.gyration = gyration_radii(m);
  out.a1_zero = std::abs(out.coeffs.a1) < 1e-9;
  const double ell2 = m.ell * m.ell;
  const double rp2 = out.gyration.r_plus_sq;
  const double rm2 = out.gyration.r_minus_sq;
  const double product =
      (ell2 + rp2 - rm2) * (ell2 + rp2 - rm2) - 4 * ell2 * rp2;
  // Strict positivity with a rounding guard so that an exactly marginal
  // configuration (ell equal to the radius sum) lands on the failing side.
  out.bound_holds = product > 1e-12 * ell2 * ell2;
  out.may_persist = out.a1_zero && out.bound_holds;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%s: a1=%.3e (%s), radius bound %s; both conditions are "
                "necessary for homogeneous mixing, not sufficient",
                out.may_persist ? "may_persist" : "cannot_persist",
                out.coeffs.a1, out.a1_zero ? "zero" : "nonzero",
                out.bound_holds ? "holds" : "fails");
  out.text = buf;
  return out;
}

HomogeneityVerdict homogeneity_check(const FrontSpec& front,
                                     const ProblemSpec& p) {
  return homogeneity_check(front_moments(front, p));
}

HomogeneityVerdict homogeneity_check(const ProblemSpec& p) {
  return homogeneity_check(front_moments(p));
}

}  // namespace frontmix
