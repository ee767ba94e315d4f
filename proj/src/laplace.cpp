#include "frontmix/laplace.hpp"

#include <cmath>

#include "frontmix/errors.hpp"
#include "frontmix/exp_kernel.hpp"

namespace frontmix {

namespace {

using cplx = std::complex<double>;
using detail::tk_exp_integral;

// integral over [lo,hi] (clipped to the piece) of
//   value(x') * exp(-z * (origin + flip*x')) dx'
// with flip = +-1 and origin chosen so the exponent argument is >= 0 across
// the range; every addend stays bounded for Re z >= 0.
cplx piece_weighted_exp(const Piece& piece, double lo, double hi, cplx z,
                        double origin, double flip) {
  const double a = std::max(lo, piece.a);
  const double b = std::min(hi, piece.b);
  if (!(b > a)) return 0.0;
  const double wa = origin + flip * a;
  const double wb = origin + flip * b;
  const double wlo = std::min(wa, wb);
  const double whi = std::max(wa, wb);
  switch (piece.kind) {
    case PieceKind::constant:
      return piece.coef[0] * tk_exp_integral(0, z, wlo, whi);
    case PieceKind::polynomial: {
      // x' - a_piece = flip*w + gamma as a polynomial in w.
      const double gamma = -flip * origin - piece.a;
      const int deg = static_cast<int>(piece.coef.size()) - 1;
      if (deg > 7)
        throw ConfigError("polynomial pieces support degree <= 7");
      double pw[8] = {0, 0, 0, 0, 0, 0, 0, 0};
      for (int m = 0; m <= deg; ++m) {
        if (piece.coef[m] == 0.0) continue;
        for (int j = 0; j <= m; ++j) {
          pw[j] += piece.coef[m] * binomial(m, j) *
                   (j % 2 == 0 ? 1.0 : flip) * std::pow(gamma, m - j);
        }
      }
      cplx acc = 0.0;
      for (int j = 0; j <= deg; ++j)
        if (pw[j] != 0.0) acc += pw[j] * tk_exp_integral(j, z, wlo, whi);
      return acc;
    }
    case PieceKind::sinusoid_window: {
      const double amp = piece.coef[0];
      const double omega = piece.coef[1];
      const double phase = piece.coef[2];
      const double psi = phase - flip * omega * origin;
      const cplx up = std::exp(cplx(0.0, psi)) *
                      tk_exp_integral(0, z - cplx(0.0, flip * omega), wlo, whi);
      const cplx dn = std::exp(cplx(0.0, -psi)) *
                      tk_exp_integral(0, z + cplx(0.0, flip * omega), wlo, whi);
      return amp * (up - dn) / cplx(0.0, 2.0);
    }
  }
  return 0.0;
}

cplx field_weighted_exp(const PiecewiseDensity& field, double lo, double hi,
                        cplx z, double origin, double flip) {
  cplx acc = 0.0;
  for (const Piece& piece : field.pieces())
    acc += piece_weighted_exp(piece, lo, hi, z, origin, flip);
  return acc;
}

template <class S>
S from_cplx(cplx v);
template <>
double from_cplx<double>(cplx v) {
  return v.real();
}
template <>
cplx from_cplx<cplx>(cplx v) {
  return v;
}

double neg_expm1_neg(double z) { return -std::expm1(-z); }
cplx neg_expm1_neg(cplx z) { return -detail::expm1c(-z); }

template <class S>
S sqrt_s_over_d(S s, double D);
template <>
double sqrt_s_over_d<double>(double s, double D) {
  if (!(s > 0.0)) throw DomainError("transform variable must be positive");
  return std::sqrt(s / D);
}
template <>
cplx sqrt_s_over_d<cplx>(cplx s, double D) {
  const cplx q = std::sqrt(s / D);
  if (!(q.real() > 0.0))
    throw DomainError("transform variable must have positive real part");
  return q;
}

}  // namespace

template <class S>
LaplaceField<S>::LaplaceField(const ProblemSpec& p, S s)
    : LaplaceField(p.initial_field(), p.ell, p.D, s,
                   from_cplx<S>(p.j1.laplace_c(cplx(s))),
                   from_cplx<S>(p.j2.laplace_c(cplx(s)))) {}

template <class S>
LaplaceField<S>::LaplaceField(PiecewiseDensity field, double ell, double D,
                              S s, S j1, S j2)
    : field_(std::move(field)), ell_(ell), D_(D), s_(s), j1_(j1), j2_(j2) {
  q_ = sqrt_s_over_d<S>(s_, D_);
  denom_ = neg_expm1_neg(2.0 * ell_ * q_);
}

template <class S>
S LaplaceField<S>::E(double len) const {
  return std::exp(-std::max(len, 0.0) * q_);
}

template <class S>
S LaplaceField<S>::zhat1(double x) const {
  const cplx z = cplx(q_);
  const cplx a = field_weighted_exp(field_, 0.0, x, z, x, -1.0);
  const cplx b = field_weighted_exp(field_, 0.0, x, z, x, +1.0);
  return from_cplx<S>(0.5 * (a + b));
}

template <class S>
S LaplaceField<S>::zhat2(double x) const {
  const cplx z = cplx(q_);
  const cplx a = field_weighted_exp(field_, x, ell_, z, -x, +1.0);
  const cplx b = field_weighted_exp(field_, x, ell_, z, 2.0 * ell_ - x, -1.0);
  return from_cplx<S>(0.5 * (a + b));
}

template <class S>
S LaplaceField<S>::z1(double x) const {
  return std::exp(x * q_) * zhat1(x);
}

template <class S>
S LaplaceField<S>::z2(double x) const {
  return std::exp((ell_ - x) * q_) * zhat2(x);
}

template <class S>
S LaplaceField<S>::value(double x) const {
  if (x < 0.0 || x > ell_) throw DomainError("position outside [0, ell]");
  const S u1 = j1_ * E(x) + zhat1(x);
  const S u2 = j2_ * E(ell_ - x) + zhat2(x);
  const S num =
      (1.0 + E(2.0 * (ell_ - x))) * u1 + (1.0 + E(2.0 * x)) * u2;
  return num / (D_ * q_ * denom_);
}

template <class S>
S LaplaceField<S>::derivative(double x) const {
  if (x < 0.0 || x > ell_) throw DomainError("position outside [0, ell]");
  const S u1 = j1_ * E(x) + zhat1(x);
  const S u2 = j2_ * E(ell_ - x) + zhat2(x);
  const S num =
      -(1.0 - E(2.0 * (ell_ - x))) * u1 + (1.0 - E(2.0 * x)) * u2;
  return num / (D_ * denom_);
}

template <class S>
S LaplaceField<S>::phat(double xl) const {
  return j1_ * E(xl) + zhat1(xl);
}

template <class S>
S LaplaceField<S>::what(double xr) const {
  return -(j2_ * E(ell_ - xr) + zhat2(xr));
}

template class LaplaceField<double>;
template class LaplaceField<cplx>;

std::vector<FrontSpec> enumerate_fronts(const ProblemSpec& p) {
  const std::vector<FrontBlock> blocks = p.blocks();
  std::vector<FrontSpec> out;
  for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
    FrontSpec f;
    f.index = static_cast<int>(i);
    f.left_lo = blocks[i].lo;
    f.left_hi = blocks[i].hi;
    f.right_lo = blocks[i + 1].lo;
    f.right_hi = blocks[i + 1].hi;
    f.left_is_a = blocks[i].species_a;
    out.push_back(f);
  }
  return out;
}

namespace {

GenResult gen_core(const LaplaceField<double>& fld, double xl, double xr) {
  const double ph = fld.phat(xl);
  const double wh = fld.what(xr);
  const double g2 = ph - wh * fld.E(xl + xr);
  const double g1 = wh - ph * fld.E(2.0 * fld.ell() - xl - xr);
  const double dn = fld.denom();
  GenResult r;
  r.radicand = 4.0 * fld.E(xr - xl) * g1 * g2 / (dn * dn);
  r.valid = std::isfinite(r.radicand) && r.radicand >= 0.0;
  if (r.valid) r.f = std::sqrt(r.radicand);
  return r;
}

double locus_core(const LaplaceField<double>& fld, double xl, double xr) {
  const double ph = fld.phat(xl);
  const double wh = fld.what(xr);
  const double t1 = ph - wh * fld.E(xl + xr);
  const double w2 = wh - ph * fld.E(2.0 * fld.ell() - xl - xr);
  if (!(t1 * w2 > 0.0))
    throw ArctanhDomainError(
        "no interior zero: boundary-weight ratio leaves (-1,1)");
  const double y =
      0.5 * (xl + xr) + 0.5 / fld.q() * std::log(t1 / w2);
  const double tol = 1e-9 * fld.ell();
  if (y < xl - tol || y > xr + tol)
    throw LocusOutOfGap("mixing locus left the support gap", y);
  return y;
}

}  // namespace

double mixing_locus(const ProblemSpec& p, double s) {
  const auto fronts = enumerate_fronts(p);
  if (fronts.size() != 1)
    throw ConfigError("single-front locus requires exactly two blocks");
  return mixing_locus(fronts[0], p, s);
}

double mixing_locus(const FrontSpec& front, const ProblemSpec& p, double s) {
  const LaplaceField<double> fld(p, s);
  return locus_core(fld, front.left_hi, front.right_lo);
}

GenResult generating_function(const ProblemSpec& p, double s) {
  const auto fronts = enumerate_fronts(p);
  if (fronts.size() != 1)
    throw ConfigError("single-front generating function requires exactly two blocks");
  const LaplaceField<double> fld(p, s);
  return gen_core(fld, fronts[0].left_hi, fronts[0].right_lo);
}

cplx generating_function_c(const ProblemSpec& p, cplx s) {
  const auto fronts = enumerate_fronts(p);
  if (fronts.size() != 1)
    throw ConfigError("single-front generating function requires exactly two blocks");
  const double xl = fronts[0].left_hi;
  const double xr = fronts[0].right_lo;
  const LaplaceField<cplx> fld(p, s);
  const cplx ph = fld.phat(xl);
  const cplx wh = fld.what(xr);
  const cplx g2 = ph - wh * fld.E(xl + xr);
  const cplx g1 = wh - ph * fld.E(2.0 * fld.ell() - xl - xr);
  // Only the product needs a branch choice; the remaining factors are exact
  // exponentials, so f agrees with the real-axis routine for s > 0.
  return 2.0 * fld.E(0.5 * (xr - xl)) * std::sqrt(g1 * g2) / fld.denom();
}

GenResult multifront_generating(const FrontSpec& front, const ProblemSpec& p,
                                double s) {
  const LaplaceField<double> fld(p, s);
  return gen_core(fld, front.left_hi, front.right_lo);
}

double gap_energy(const ProblemSpec& p, double s, double x) {
  const LaplaceField<double> fld(p, s);
  const double dc = p.D * fld.derivative(x);
  const double c = fld.value(x);
  return dc * dc - s * p.D * c * c;
}

template <class S>
std::pair<S, S> dirichlet_to_neumann(const ProblemSpec& p, S s, S alpha,
                                     S beta) {
  const LaplaceField<S> fld(p.initial_field(), p.ell, p.D, s, S{}, S{});
  const S sh = 0.5 * fld.denom();
  const S ch = 1.0 - sh;
  const S el = fld.E(p.ell);
  const S r1 = alpha * p.D * fld.q() * sh - fld.zhat2(0.0);
  const S r2 = beta * p.D * fld.q() * sh - fld.zhat1(p.ell);
  const S det = sh * sh;
  return {(ch * r1 - el * r2) / det, (ch * r2 - el * r1) / det};
}

template std::pair<double, double> dirichlet_to_neumann<double>(
    const ProblemSpec&, double, double, double);
template std::pair<cplx, cplx> dirichlet_to_neumann<cplx>(const ProblemSpec&,
                                                          cplx, cplx, cplx);

}  // namespace frontmix
