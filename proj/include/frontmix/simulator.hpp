#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "frontmix/problem.hpp"

namespace frontmix {

// Theta-weighted finite difference grid. dx is ell/(nx-1); the tridiagonal
// system matrix is constant in time and factored once per run. The scheme is
// unconditionally stable at theta >= 0.5, but dt > dx starves the front
// tracker of samples, so dt <= dx is enforced.
struct SimGrid {
  int nx = 2001;
  // <= 0 picks the default 1e-5 * ell^2 / D, which resolves boundary-flux
  // time constants down to ~1e-3 of the diffusion time.
  double dt = 0.0;
  double theta = 0.5;
  // Trace thinning: state rows are stored every record_every steps. Events,
  // cumF and the mass budget are still tracked at every step.
  int record_every = 1;
};

// One sign change of the nodal vector. position is the linear interpolation
// between the bracketing nodes (or the midpoint of a run of zero nodes whose
// flanks disagree in sign). Slopes are signed one-sided derivatives taken
// from the three nodes on each side, evaluated at the crossing itself so the
// left/right mismatch vanishes at second order where C is smooth.
struct ZeroCrossing {
  double position = 0.0;
  double left_slope = 0.0;
  double right_slope = 0.0;
};

// All interior sign changes of c sampled on the uniform grid x_i = i*dx.
// A run of near-zero nodes (|c| <= 1e-10 * max|c|) collapses to a single
// crossing at the run midpoint when the flanking signs differ, and to no
// crossing when they agree or the run touches the boundary on one side.
std::vector<ZeroCrossing> locate_zeros(const std::vector<double>& c, double dx);

enum class EventKind {
  boundary_hit,              // a zero entered [0,dx] or [ell-dx,ell]
  front_merge,               // zero count decreased
  front_branch,              // zero count increased
  sign_change_at_boundary,   // boundary value (flux mode) or boundary slope
                             // (pinned mode) flipped sign
};

const char* event_kind_name(EventKind kind);

struct SimEvent {
  EventKind kind = EventKind::boundary_hit;
  double time = 0.0;
  double position = 0.0;
};

// Output of run(): per-time rows plus the event log. Rows tied to the mixing
// point (M, slopes, F, masses) are NaN whenever the zero count differs from
// one; cumF holds its value across such windows.
struct MixingTrace {
  std::vector<double> times;
  std::vector<double> M;
  std::vector<double> F_left;   // D * |left slope|
  std::vector<double> F_right;  // D * |right slope|
  std::vector<double> F;        // (F_left + F_right) / 2
  std::vector<double> cumF;
  std::vector<int> zero_count;
  // Signed integrals of C over [0, M] and [M, ell]; the B-side integral is
  // negative while mixing persists.
  std::vector<double> mass_left;
  std::vector<double> mass_right;
  std::vector<double> mass_total;  // trapezoidal mass of the whole domain
  std::vector<SimEvent> events;

  double ell = 1.0;
  double D = 1.0;
  double dx = 0.0;
  double dt = 0.0;
  double theta = 0.5;
  double horizon = 0.0;
  // First boundary_hit time; NaN when no zero ever reached a boundary cell.
  double t_c = std::numeric_limits<double>::quiet_NaN();
  // Largest per-step defect of the discrete mass law
  //   mass(t+dt) - mass(t) = dt * (J1 + J2)(t + theta*dt)
  // over the whole run (exact for the ghost-node scheme, so this measures
  // rounding only). NaN for pinned-boundary runs, which exchange mass with
  // the walls.
  double max_mass_step_error = 0.0;
};

// Crank-Nicolson run over [0, horizon]. Flux boundaries use ghost nodes with
// the schedules evaluated at the theta point of each step; p.dirichlet pins
// both boundary nodes to zero instead. Throws ConfigError for a bad grid and
// Error if the state turns non-finite.
MixingTrace run(const ProblemSpec& p, const SimGrid& grid, double horizon);

// Low-level driver behind run(): advances a nodal vector with the same
// factored stepper, without zero tracking. j1/j2 (optional) are evaluated at
// the theta point of each step. Used by the scheme invariance tests and as
// the single-edge reference kernel.
std::vector<double> advance_nodal(std::vector<double> c, double ell, double D,
                                  const SimGrid& grid, int steps,
                                  const std::function<double(double)>& j1 = {},
                                  const std::function<double(double)>& j2 = {},
                                  bool dirichlet = false);

// Time-integrated bookkeeping of a trace. Regional budgets follow
//   d/dt int_0^M C dx = J1 - F,   d/dt int_M^ell C dx = J2 + F,
// and the closures compare the total mixed mass against the absolute mass
// fed to each side of the front.
struct MassAudit {
  double t_lo = 0.0;   // audited window (M defined and unique throughout)
  double t_hi = 0.0;
  // Window change of each signed regional mass minus the integrated budget
  // right-hand side.
  double residual_left = 0.0;
  double residual_right = 0.0;
  // Scale for the residuals: initial absolute mass + total |flux| input.
  double mass_scale = 0.0;

  double norm_F = 0.0;    // total cumF of the run
  double norm_J1 = 0.0;   // int |J1| dt over the whole schedule
  double norm_J2 = 0.0;
  double influx_a = 0.0;  // mass of rho_A + norm_J1
  double influx_b = 0.0;  // v * mass of rho_B + norm_J2
  // influx - norm_F: zero when every unit of input mass exits through the
  // front. A sign-changing boundary flux breaks the right closure by twice
  // the integral of its positive part.
  double closure_left = 0.0;
  double closure_right = 0.0;
};

// Audit over the maximal window where M is defined and unique.
MassAudit mass_audit(const MixingTrace& trace, const ProblemSpec& p);
// Audit over [t_lo, t_hi]; throws UndefinedFront when M is NaN anywhere in
// the window (closures still use the full-run totals).
MassAudit mass_audit(const MixingTrace& trace, const ProblemSpec& p,
                     double t_lo, double t_hi);

}  // namespace frontmix
