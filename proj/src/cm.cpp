#include "frontmix/cm.hpp"

#include <cmath>
#include <limits>

#include "frontmix/errors.hpp"
#include "frontmix/piecewise.hpp"

namespace frontmix {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct DiffSample {
  double value = 0;
  double max_abs = 0;  // largest |h| among the stencil evaluations
  bool finite = false;
};

// n-th central difference quotient at s with step h. Offsets run from n/2
// down to -n/2, half-integers for odd n.
DiffSample central(const std::function<double(double)>& h, double s, int n,
                   double step) {
  DiffSample out;
  double acc = 0;
  double max_abs = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = s + (n / 2.0 - i) * step;
    const double v = h(x);
    if (!std::isfinite(v)) return out;
    max_abs = std::max(max_abs, std::abs(v));
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    acc += sign * binomial(n, i) * v;
  }
  out.value = acc / std::pow(step, n);
  out.max_abs = max_abs;
  out.finite = true;
  return out;
}

}  // namespace

CmReport cm_probe(const std::function<double(double)>& h,
                  const std::vector<double>& grid, int max_order,
                  double rel_step) {
  if (max_order < 0 || max_order > 6)
    throw DomainError("cm_probe: derivative order must be in [0, 6]");
  if (!(rel_step > 0) || rel_step >= 0.5)
    throw DomainError("cm_probe: relative step must lie in (0, 0.5)");
  CmReport report;
  bool saw_inconclusive = false;
  for (double s : grid) {
    if (!(s > 0) || !std::isfinite(s))
      throw DomainError("cm_probe: grid points must be positive finite");
    for (int n = 0; n <= max_order; ++n) {
      double refined, err;
      if (n == 0) {
        const double v = h(s);
        if (!std::isfinite(v)) {
          saw_inconclusive = true;
          continue;
        }
        refined = v;
        err = kEps * std::abs(v);
      } else {
        const double step = rel_step * s;
        const DiffSample coarse = central(h, s, n, step);
        const DiffSample fine = central(h, s, n, step / 2);
        if (!coarse.finite || !fine.finite) {
          saw_inconclusive = true;
          continue;
        }
        // Both quotients carry O(step^2) truncation error, so the half-step
        // correction bounds it; add the propagated rounding floor.
        refined = fine.value + (fine.value - coarse.value) / 3;
        const double scheme = std::abs(fine.value - coarse.value) / 3;
        const double rounding =
            kEps * fine.max_abs * std::pow(2.0, n) / std::pow(step / 2, n);
        err = scheme + rounding;
      }
      if (!std::isfinite(refined)) {
        saw_inconclusive = true;
        continue;
      }
      const double signed_value = (n % 2 == 0) ? refined : -refined;
      if (signed_value < -3 * err) {
        report.verdict = CmVerdict::fail;
        report.violation_order = n;
        report.violation_s = s;
        return report;
      }
    }
  }
  report.verdict = saw_inconclusive ? CmVerdict::inconclusive : CmVerdict::pass;
  return report;
}

std::vector<double> geometric_grid(double lo, double hi, int n) {
  if (!(lo > 0) || !(hi > lo) || n < 2)
    throw DomainError("geometric_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> out(n);
  const double ratio = std::log(hi / lo) / (n - 1);
  for (int i = 0; i < n; ++i) out[i] = lo * std::exp(ratio * i);
  out.back() = hi;
  return out;
}

}  // namespace frontmix
