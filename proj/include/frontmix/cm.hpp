#pragma once

#include <functional>
#include <vector>

namespace frontmix {

// Numerical surrogate for membership in the completely monotone class:
// checks (-1)^n h^(n)(s) > 0 for n = 0..max_order at every grid point, with
// derivatives estimated by central differences plus Richardson refinement.
// A violation must exceed three times the combined scheme and rounding error
// estimate to count as fail; a non-finite estimate anywhere (and no confirmed
// violation) yields inconclusive. This can refute but never prove.
enum class CmVerdict { pass, fail, inconclusive };

struct CmReport {
  CmVerdict verdict = CmVerdict::inconclusive;
  int violation_order = -1;
  double violation_s = 0;
};

CmReport cm_probe(const std::function<double(double)>& h,
                  const std::vector<double>& grid, int max_order,
                  double rel_step = 0.05);

// n log-spaced points from lo to hi inclusive.
std::vector<double> geometric_grid(double lo, double hi, int n);

}  // namespace frontmix
