#include "frontmix/piecewise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "frontmix/errors.hpp"

namespace frontmix {

namespace {

double int_pow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

// Antiderivatives of x^k sin(w x + p) and x^k cos(w x + p), by the usual
// integration-by-parts recurrence. Requires |w| bounded away from zero.
double antideriv_sin(int k, double x, double w, double p);

double antideriv_cos(int k, double x, double w, double p) {
  double r = int_pow(x, k) * std::sin(w * x + p) / w;
  if (k > 0) r -= (k / w) * antideriv_sin(k - 1, x, w, p);
  return r;
}

double antideriv_sin(int k, double x, double w, double p) {
  double r = -int_pow(x, k) * std::cos(w * x + p) / w;
  if (k > 0) r += (k / w) * antideriv_cos(k - 1, x, w, p);
  return r;
}

}  // namespace

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

double Piece::value(double x) const {
  if (x < a || x > b) return 0.0;
  switch (kind) {
    case PieceKind::constant:
      return coef.empty() ? 0.0 : coef[0];
    case PieceKind::polynomial: {
      // Horner in the local coordinate.
      const double u = x - a;
      double r = 0.0;
      for (auto it = coef.rbegin(); it != coef.rend(); ++it) r = r * u + *it;
      return r;
    }
    case PieceKind::sinusoid_window:
      return coef[0] * std::sin(coef[1] * x + coef[2]);
  }
  return 0.0;
}

double Piece::partial_moment(int k, double lo, double hi) const {
  lo = std::max(lo, a);
  hi = std::min(hi, b);
  if (!(hi > lo)) return 0.0;
  switch (kind) {
    case PieceKind::constant: {
      const double c0 = coef.empty() ? 0.0 : coef[0];
      return c0 * (int_pow(hi, k + 1) - int_pow(lo, k + 1)) / (k + 1);
    }
    case PieceKind::polynomial: {
      // integral x^k (x-a)^m dx with x^k expanded about a.
      double r = 0.0;
      for (std::size_t m = 0; m < coef.size(); ++m) {
        if (coef[m] == 0.0) continue;
        double term = 0.0;
        for (int j = 0; j <= k; ++j) {
          const int e = static_cast<int>(m) + j + 1;
          term += binomial(k, j) * int_pow(a, k - j) *
                  (int_pow(hi - a, e) - int_pow(lo - a, e)) / e;
        }
        r += coef[m] * term;
      }
      return r;
    }
    case PieceKind::sinusoid_window: {
      const double amp = coef[0], w = coef[1], p = coef[2];
      if (std::abs(w) < 1e-12) {
        // Degenerates to a constant amp*sin(p).
        return amp * std::sin(p) * (int_pow(hi, k + 1) - int_pow(lo, k + 1)) /
               (k + 1);
      }
      return amp * (antideriv_sin(k, hi, w, p) - antideriv_sin(k, lo, w, p));
    }
  }
  return 0.0;
}

Piece Piece::scaled(double factor) const {
  Piece out = *this;
  if (kind == PieceKind::sinusoid_window) {
    out.coef[0] *= factor;
  } else {
    for (double& c : out.coef) c *= factor;
  }
  return out;
}

Piece Piece::mirrored(double ell) const {
  Piece out = *this;
  out.a = ell - b;
  out.b = ell - a;
  switch (kind) {
    case PieceKind::constant:
      break;
    case PieceKind::polynomial: {
      // value'(xi) = value(w - xi) in local coordinates, w = b - a.
      const double w = b - a;
      std::vector<double> c(coef.size(), 0.0);
      for (std::size_t j = 0; j < coef.size(); ++j) {
        double s = 0.0;
        for (std::size_t m = j; m < coef.size(); ++m) {
          s += coef[m] * binomial(static_cast<int>(m), static_cast<int>(j)) *
               int_pow(w, static_cast<int>(m - j));
        }
        c[j] = ((j % 2) ? -1.0 : 1.0) * s;
      }
      out.coef = std::move(c);
      break;
    }
    case PieceKind::sinusoid_window:
      // amp sin(w(ell-x)+p) = -amp sin(w x - w ell - p)
      out.coef = {-coef[0], coef[1], -coef[1] * ell - coef[2]};
      break;
  }
  return out;
}

PiecewiseDensity::PiecewiseDensity(std::vector<Piece> pieces)
    : pieces_(std::move(pieces)) {
  for (const Piece& p : pieces_) {
    if (!(p.b > p.a)) throw ConfigError("piece interval must have b > a");
    if (p.kind == PieceKind::sinusoid_window && p.coef.size() != 3)
      throw ConfigError("sinusoid piece needs {amp, omega, phase}");
    for (double c : p.coef)
      if (!std::isfinite(c)) throw ConfigError("non-finite piece coefficient");
  }
  std::sort(pieces_.begin(), pieces_.end(),
            [](const Piece& x, const Piece& y) { return x.a < y.a; });
  for (std::size_t i = 1; i < pieces_.size(); ++i) {
    const double slack = 1e-12 * std::max(1.0, std::abs(pieces_[i - 1].b));
    if (pieces_[i].a < pieces_[i - 1].b - slack)
      throw OverlapError("pieces overlap near x=" + std::to_string(pieces_[i].a));
  }
}

double PiecewiseDensity::value(double x) const {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const Piece& p = pieces_[i];
    if (x < p.a) break;
    // Half-open on the right except for the final piece, so touching pieces
    // yield a single value.
    const bool last = (i + 1 == pieces_.size());
    if (x < p.b || (last && x <= p.b)) return p.value(x);
  }
  return 0.0;
}

double PiecewiseDensity::support_lo() const {
  if (pieces_.empty()) throw DomainError("support of empty density");
  return pieces_.front().a;
}

double PiecewiseDensity::support_hi() const {
  if (pieces_.empty()) throw DomainError("support of empty density");
  double hi = pieces_.front().b;
  for (const Piece& p : pieces_) hi = std::max(hi, p.b);
  return hi;
}

double PiecewiseDensity::moment(int k, Axis axis, double ell) const {
  double r = 0.0;
  if (axis == Axis::left) {
    for (const Piece& p : pieces_) r += p.moment(k);
  } else {
    // (ell-x)^k expanded binomially in left moments.
    for (int j = 0; j <= k; ++j) {
      double mj = 0.0;
      for (const Piece& p : pieces_) mj += p.moment(j);
      r += binomial(k, j) * int_pow(ell, k - j) * ((j % 2) ? -1.0 : 1.0) * mj;
    }
  }
  return r;
}

double PiecewiseDensity::integral(double lo, double hi) const {
  double r = 0.0;
  for (const Piece& p : pieces_) r += p.partial_moment(0, lo, hi);
  return r;
}

void PiecewiseDensity::check_nonnegative(const std::string& name) const {
  constexpr int kSamples = 4096;
  for (const Piece& p : pieces_) {
    double maxabs = 0.0;
    double minval = std::numeric_limits<double>::infinity();
    double minx = p.a;
    for (int i = 0; i <= kSamples; ++i) {
      const double x = p.a + (p.b - p.a) * i / kSamples;
      const double v = p.value(x);
      maxabs = std::max(maxabs, std::abs(v));
      if (v < minval) {
        minval = v;
        minx = x;
      }
    }
    if (minval < -1e-12 * std::max(1.0, maxabs))
      throw NegativeDensityError(name + " is negative near x=" +
                                 std::to_string(minx));
  }
}

PiecewiseDensity PiecewiseDensity::scaled(double factor) const {
  std::vector<Piece> out;
  out.reserve(pieces_.size());
  for (const Piece& p : pieces_) out.push_back(p.scaled(factor));
  return PiecewiseDensity(std::move(out));
}

PiecewiseDensity PiecewiseDensity::mirrored(double ell) const {
  std::vector<Piece> out;
  out.reserve(pieces_.size());
  for (const Piece& p : pieces_) out.push_back(p.mirrored(ell));
  return PiecewiseDensity(std::move(out));
}

PiecewiseDensity PiecewiseDensity::merged(const PiecewiseDensity& p,
                                          const PiecewiseDensity& q) {
  std::vector<Piece> out = p.pieces_;
  out.insert(out.end(), q.pieces_.begin(), q.pieces_.end());
  return PiecewiseDensity(std::move(out));
}

}  // namespace frontmix
