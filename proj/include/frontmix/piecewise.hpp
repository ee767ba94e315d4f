#pragma once

#include <string>
#include <utility>
#include <vector>

namespace frontmix {

enum class PieceKind { constant, polynomial, sinusoid_window };

enum class Axis { left, right };

// One analytically-integrable piece supported on [a,b].
//   constant:        coef = {c0}
//   polynomial:      value = sum_m coef[m] * (x - a)^m   (local coordinates)
//   sinusoid_window: coef = {amp, omega, phase}, value = amp*sin(omega*x + phase)
//                    (global phase, so a window cut out of sin(pi x) keeps its shape)
struct Piece {
  double a = 0.0;
  double b = 0.0;
  PieceKind kind = PieceKind::constant;
  std::vector<double> coef;

  double value(double x) const;
  // Exact integral of x^k * value(x) over [lo,hi] clipped to [a,b].
  double partial_moment(int k, double lo, double hi) const;
  double moment(int k) const { return partial_moment(k, a, b); }
  Piece scaled(double factor) const;
  Piece mirrored(double ell) const;
};

// Ordered, non-overlapping pieces; zero off their union. Values may be signed
// (the merged initial field rho_A - v*rho_B lives here too); species densities
// additionally pass check_nonnegative().
class PiecewiseDensity {
 public:
  PiecewiseDensity() = default;
  explicit PiecewiseDensity(std::vector<Piece> pieces);

  double value(double x) const;
  bool empty() const { return pieces_.empty(); }
  double support_lo() const;
  double support_hi() const;
  double mass() const { return moment(0, Axis::left, 0.0); }
  // Left axis: integral of x^k * rho; right axis: integral of (ell-x)^k * rho.
  double moment(int k, Axis axis, double ell) const;
  double integral(double lo, double hi) const;
  void check_nonnegative(const std::string& name) const;
  const std::vector<Piece>& pieces() const { return pieces_; }

  PiecewiseDensity scaled(double factor) const;
  PiecewiseDensity mirrored(double ell) const;
  // Union of two densities with disjoint-or-touching pieces.
  static PiecewiseDensity merged(const PiecewiseDensity& p,
                                 const PiecewiseDensity& q);

 private:
  std::vector<Piece> pieces_;
};

double binomial(int n, int k);

}  // namespace frontmix
