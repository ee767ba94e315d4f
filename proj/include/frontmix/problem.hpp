#pragma once

#include <vector>

#include "frontmix/flux_schedule.hpp"
#include "frontmix/piecewise.hpp"

namespace frontmix {

// One species block in a multifront layout: the initial data restricted to
// [lo, hi]. A blocks enter the fluctuation field with weight +1, B blocks
// with weight -v.
struct FrontBlock {
  bool species_a = true;
  double lo = 0.0;
  double hi = 0.0;
};

// Full problem statement on [0, ell]: initial densities, boundary flux
// schedules, and the boundary mode used by the time stepper.
struct ProblemSpec {
  double ell = 1.0;
  double D = 1.0;
  double v = 1.0;
  PiecewiseDensity rho_a;
  PiecewiseDensity rho_b;
  FluxSchedule j1;
  FluxSchedule j2;
  // Optional explicit layout for several alternating blocks. Empty means the
  // single-front case: one A block left of one B block.
  std::vector<FrontBlock> fronts;
  bool dirichlet = false;
  bool normalized = false;

  // Throws ConfigError subclasses. Species densities must be nonnegative and
  // supported inside [0, ell]; block supports may touch but not overlap.
  void validate() const;

  // Declared blocks, or the derived A|B pair when `fronts` is empty.
  std::vector<FrontBlock> blocks() const;

  // rho_a(x) - v*rho_b(x); throws DomainError outside [0, ell].
  double eval_initial(double x) const;

  // The signed field rho_a - v*rho_b as a single piecewise function.
  PiecewiseDensity initial_field() const;

  // integral of C(x,0) dx + integral of (J1+J2) dt. Zero is necessary for a
  // persistent interior mixing point.
  double mass_balance_residual() const;

  // Single-front gap edges: sup of the A support and inf of the B support.
  double gap_lo() const;
  double gap_hi() const;

  // Reflection x -> ell - x with species roles swapped: rho_a' = v*rho_b
  // mirrored, rho_b' = rho_a mirrored, v' = 1, fluxes swapped and negated.
  // Maps C(x,0) to -C(ell-x,0) and mass_balance_residual to its negative.
  ProblemSpec mirrored() const;
};

}  // namespace frontmix
