#include "frontmix/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "frontmix/errors.hpp"

namespace frontmix {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Relative thresholds: zero detection for the crossing scan, deadband for
// the boundary sign-change monitors.
constexpr double kZeroRel = 1e-10;
constexpr double kDeadbandRel = 1e-9;

struct Stepper {
  int n = 0;
  double ell = 0.0, D = 0.0, dx = 0.0, dt = 0.0, theta = 0.5;
  bool dirichlet = false;
  double r = 0.0;  // diffusion number D*dt/dx^2
  // Factored constant tridiagonal matrix: lower elimination multipliers and
  // modified diagonal (upper diagonal is unchanged by the sweep).
  std::vector<double> w, diag, upper;
  std::vector<double> rhs;

  Stepper(int nx, double ell_, double D_, double dt_, double theta_,
          bool dirichlet_)
      : n(nx), ell(ell_), D(D_), theta(theta_), dirichlet(dirichlet_) {
    dx = ell / (n - 1);
    dt = dt_;
    r = D * dt / (dx * dx);
    w.assign(n, 0.0);
    diag.assign(n, 0.0);
    upper.assign(n, 0.0);
    rhs.assign(n, 0.0);

    std::vector<double> lower(n, 0.0);
    for (int i = 0; i < n; ++i) {
      diag[i] = 1.0 + 2.0 * theta * r;
      lower[i] = -theta * r;
      upper[i] = -theta * r;
    }
    if (dirichlet) {
      diag[0] = diag[n - 1] = 1.0;
      upper[0] = 0.0;
      lower[n - 1] = 0.0;
    } else {
      // Reflecting ghost nodes fold into doubled off-diagonal entries.
      upper[0] = -2.0 * theta * r;
      lower[n - 1] = -2.0 * theta * r;
    }
    for (int i = 1; i < n; ++i) {
      w[i] = lower[i] / diag[i - 1];
      diag[i] -= w[i] * upper[i - 1];
    }
  }

  // One step from time t; boundary fluxes evaluated at t + theta*dt.
  void advance(std::vector<double>& c, double j1, double j2) {
    const double er = (1.0 - theta) * r;
    if (dirichlet) {
      rhs[0] = 0.0;
      rhs[n - 1] = 0.0;
    } else {
      rhs[0] = c[0] + 2.0 * er * (c[1] - c[0]) + 2.0 * dt * j1 / dx;
      rhs[n - 1] = c[n - 1] + 2.0 * er * (c[n - 2] - c[n - 1]) +
                   2.0 * dt * j2 / dx;
    }
    for (int i = 1; i < n - 1; ++i)
      rhs[i] = c[i] + er * (c[i - 1] - 2.0 * c[i] + c[i + 1]);
    for (int i = 1; i < n; ++i) rhs[i] -= w[i] * rhs[i - 1];
    c[n - 1] = rhs[n - 1] / diag[n - 1];
    for (int i = n - 2; i >= 0; --i)
      c[i] = (rhs[i] - upper[i] * c[i + 1]) / diag[i];
  }
};

double trapezoid_mass(const std::vector<double>& c, double dx) {
  long double acc = 0.5L * (c.front() + c.back());
  for (size_t i = 1; i + 1 < c.size(); ++i) acc += c[i];
  return static_cast<double>(acc * dx);
}

double max_abs(const std::vector<double>& c) {
  double m = 0.0;
  for (double v : c) m = std::max(m, std::abs(v));
  return m;
}

// Signed derivative of the quadratic through nodes (i-2, i-1, i) evaluated at
// x_i + t*dx. Falls back to lower order near the boundary.
double backward_slope(const std::vector<double>& c, int i, double t,
                      double dx) {
  if (i >= 2) {
    const double a = c[i - 2], b = c[i - 1], cc = c[i];
    return (a * (2.0 * t + 1.0) - 2.0 * b * (2.0 * t + 2.0) +
            cc * (2.0 * t + 3.0)) /
           (2.0 * dx);
  }
  if (i == 1) return (c[1] - c[0]) / dx;
  return 0.0;
}

// Same through nodes (j, j+1, j+2) evaluated at x_j - u*dx (u >= 0 means the
// crossing sits left of the stencil).
double forward_slope(const std::vector<double>& c, int j, double u,
                     double dx) {
  const int n = static_cast<int>(c.size());
  if (j + 2 < n) {
    const double cc = c[j], b = c[j + 1], a = c[j + 2];
    const double xi = -u;
    return (cc * (2.0 * xi - 3.0) - 2.0 * b * (2.0 * xi - 2.0) +
            a * (2.0 * xi - 1.0)) /
           (2.0 * dx);
  }
  if (j + 1 < n) return (c[j + 1] - c[j]) / dx;
  return 0.0;
}

void emit_crossing(const std::vector<double>& c, double dx, double pos,
                   std::vector<ZeroCrossing>& out) {
  const int n = static_cast<int>(c.size());
  const double u = pos / dx;
  int il, ir;
  if (std::abs(u - std::llround(u)) < 1e-9) {
    il = ir = static_cast<int>(std::llround(u));
  } else {
    il = static_cast<int>(std::floor(u));
    ir = il + 1;
  }
  il = std::clamp(il, 0, n - 1);
  ir = std::clamp(ir, 0, n - 1);
  ZeroCrossing z;
  z.position = pos;
  z.left_slope = backward_slope(c, il, pos / dx - il, dx);
  z.right_slope = forward_slope(c, ir, ir - pos / dx, dx);
  out.push_back(z);
}

}  // namespace

std::vector<ZeroCrossing> locate_zeros(const std::vector<double>& c,
                                       double dx) {
  std::vector<ZeroCrossing> out;
  const int n = static_cast<int>(c.size());
  if (n < 2 || !(dx > 0.0)) return out;
  const double eps = kZeroRel * max_abs(c);

  auto sgn = [&](int i) -> int {
    if (std::abs(c[i]) <= eps) return 0;
    return c[i] > 0.0 ? 1 : -1;
  };

  int prev_idx = -1;  // last node with a nonzero sign
  int prev_sign = 0;
  for (int i = 0; i < n; ++i) {
    const int s = sgn(i);
    if (s == 0) continue;
    if (prev_sign != 0 && s != prev_sign) {
      double pos;
      if (i == prev_idx + 1) {
        // Strict flip across one cell: linear interpolation.
        pos = (prev_idx + c[prev_idx] / (c[prev_idx] - c[i])) * dx;
      } else {
        // A run of zero nodes separates the signs: one crossing at the run
        // midpoint.
        pos = 0.5 * (prev_idx + 1 + i - 1) * dx;
      }
      emit_crossing(c, dx, pos, out);
    }
    prev_idx = i;
    prev_sign = s;
  }
  return out;
}

const char* event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::boundary_hit: return "boundary_hit";
    case EventKind::front_merge: return "front_merge";
    case EventKind::front_branch: return "front_branch";
    case EventKind::sign_change_at_boundary: return "sign_change_at_boundary";
  }
  return "unknown";
}

namespace {

// Position in `now` farthest from every position in `before`; used to name
// the crossing that appeared (or, with the lists swapped, disappeared).
double odd_one_out(const std::vector<ZeroCrossing>& now,
                   const std::vector<ZeroCrossing>& before) {
  double best_pos = now.empty() ? 0.0 : now.front().position;
  double best_dist = -1.0;
  for (const auto& z : now) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& b : before)
      d = std::min(d, std::abs(z.position - b.position));
    if (before.empty()) d = 0.0;
    if (d > best_dist) {
      best_dist = d;
      best_pos = z.position;
    }
  }
  return best_pos;
}

struct RowScratch {
  double M = kNaN, fl = kNaN, fr = kNaN, f = kNaN;
  double mass_l = kNaN, mass_r = kNaN, mass_tot = 0.0;
  int count = 0;
};

RowScratch measure(const std::vector<double>& c, double dx, double D,
                   const std::vector<ZeroCrossing>& zs) {
  RowScratch row;
  row.count = static_cast<int>(zs.size());
  row.mass_tot = trapezoid_mass(c, dx);
  if (row.count == 1) {
    const auto& z = zs.front();
    row.M = z.position;
    row.fl = D * std::abs(z.left_slope);
    row.fr = D * std::abs(z.right_slope);
    row.f = 0.5 * (row.fl + row.fr);
    // Signed mass left of M: trapezoid up to the last node before M plus the
    // linear sliver from that node to the crossing.
    const int k = std::min(static_cast<int>(z.position / dx),
                           static_cast<int>(c.size()) - 1);
    long double acc = 0.5L * c[0];
    for (int i = 1; i <= k; ++i) acc += c[i];
    acc -= 0.5L * c[k];
    double left = static_cast<double>(acc) * dx;
    left += 0.5 * (z.position - k * dx) * c[k];
    row.mass_l = left;
    row.mass_r = row.mass_tot - left;
  }
  return row;
}

}  // namespace

std::vector<double> advance_nodal(std::vector<double> c, double ell, double D,
                                  const SimGrid& grid, int steps,
                                  const std::function<double(double)>& j1,
                                  const std::function<double(double)>& j2,
                                  bool dirichlet) {
  if (static_cast<int>(c.size()) != grid.nx)
    throw ConfigError("advance_nodal: state size does not match grid.nx");
  if (grid.nx < 5) throw ConfigError("grid.nx must be at least 5");
  if (!(grid.theta >= 0.0 && grid.theta <= 1.0))
    throw ConfigError("grid.theta must lie in [0, 1]");
  const double dx = ell / (grid.nx - 1);
  const double dt = grid.dt > 0.0 ? grid.dt : 1e-5 * ell * ell / D;
  if (dt > dx)
    throw ConfigError("grid.dt exceeds dx; the front tracker needs dt <= dx");
  Stepper st(grid.nx, ell, D, dt, grid.theta, dirichlet);
  for (int k = 0; k < steps; ++k) {
    const double tt = k * dt + grid.theta * dt;
    st.advance(c, j1 ? j1(tt) : 0.0, j2 ? j2(tt) : 0.0);
  }
  return c;
}

MixingTrace run(const ProblemSpec& p, const SimGrid& grid, double horizon) {
  p.validate();
  if (grid.nx < 5) throw ConfigError("grid.nx must be at least 5");
  if (!(grid.theta >= 0.0 && grid.theta <= 1.0))
    throw ConfigError("grid.theta must lie in [0, 1]");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (grid.record_every < 1)
    throw ConfigError("grid.record_every must be at least 1");

  const int n = grid.nx;
  const double dx = p.ell / (n - 1);
  const double dt = grid.dt > 0.0 ? grid.dt : 1e-5 * p.ell * p.ell / p.D;
  if (dt > dx)
    throw ConfigError("grid.dt exceeds dx; the front tracker needs dt <= dx");

  // Cell-averaged projection of the initial field preserves the trapezoidal
  // mass exactly (end cells are half width).
  const PiecewiseDensity field = p.initial_field();
  std::vector<double> c(n);
  for (int i = 0; i < n; ++i) {
    const double lo = std::max(0.0, (i - 0.5) * dx);
    const double hi = std::min(p.ell, (i + 0.5) * dx);
    c[i] = field.integral(lo, hi) / (hi - lo);
  }
  if (p.dirichlet) c[0] = c[n - 1] = 0.0;

  Stepper st(n, p.ell, p.D, dt, grid.theta, p.dirichlet);
  const int nsteps = static_cast<int>(std::ceil(horizon / dt - 1e-9));

  MixingTrace tr;
  tr.ell = p.ell;
  tr.D = p.D;
  tr.dx = dx;
  tr.dt = dt;
  tr.theta = grid.theta;
  tr.horizon = nsteps * dt;
  if (p.dirichlet) tr.max_mass_step_error = kNaN;

  auto record = [&](double t, const RowScratch& row, double cum) {
    tr.times.push_back(t);
    tr.M.push_back(row.M);
    tr.F_left.push_back(row.fl);
    tr.F_right.push_back(row.fr);
    tr.F.push_back(row.f);
    tr.cumF.push_back(cum);
    tr.zero_count.push_back(row.count);
    tr.mass_left.push_back(row.mass_l);
    tr.mass_right.push_back(row.mass_r);
    tr.mass_total.push_back(row.mass_tot);
  };

  // Boundary monitors. In flux mode the nodal value at each wall is watched
  // for a sign flip; in pinned mode the one-sided wall slope plays that role
  // (the pinned value itself is identically zero).
  auto boundary_signal = [&](const std::vector<double>& state, bool left) {
    if (!p.dirichlet) return left ? state.front() : state.back();
    const int m = n - 1;
    if (left) return (-3.0 * state[0] + 4.0 * state[1] - state[2]) / (2 * dx);
    return (3.0 * state[m] - 4.0 * state[m - 1] + state[m - 2]) / (2 * dx);
  };

  std::vector<ZeroCrossing> zs = locate_zeros(c, dx);
  RowScratch row = measure(c, dx, p.D, zs);
  double cum = 0.0;
  record(0.0, row, cum);

  int sign_left = 0, sign_right = 0;
  bool in_zone = false;
  {
    const double band = kDeadbandRel * std::max(max_abs(c), 1e-300);
    const double sl = boundary_signal(c, true);
    const double sr = boundary_signal(c, false);
    if (std::abs(sl) > band) sign_left = sl > 0 ? 1 : -1;
    if (std::abs(sr) > band) sign_right = sr > 0 ? 1 : -1;
    for (const auto& z : zs)
      in_zone = in_zone || z.position <= dx || z.position >= p.ell - dx;
  }

  double prev_f = row.f;
  std::vector<ZeroCrossing> prev_zs = zs;

  for (int step = 1; step <= nsteps; ++step) {
    const double t0 = (step - 1) * dt;
    const double tt = t0 + grid.theta * dt;
    const double t = step * dt;
    const double j1 = p.dirichlet ? 0.0 : p.j1.value(tt);
    const double j2 = p.dirichlet ? 0.0 : p.j2.value(tt);
    const double mass_before = row.mass_tot;

    st.advance(c, j1, j2);

    zs = locate_zeros(c, dx);
    row = measure(c, dx, p.D, zs);

    if (!p.dirichlet) {
      const double defect =
          std::abs(row.mass_tot - mass_before - dt * (j1 + j2));
      tr.max_mass_step_error = std::max(tr.max_mass_step_error, defect);
    }
    if (!std::isfinite(row.mass_tot))
      throw Error("simulator state turned non-finite at t = " +
                  std::to_string(t));

    // cumF: trapezoid over steps where both endpoints carry a defined flux;
    // half-steps ramp it across the edges of undefined windows.
    if (std::isfinite(prev_f) && std::isfinite(row.f))
      cum += 0.5 * dt * (prev_f + row.f);
    else if (std::isfinite(prev_f))
      cum += 0.5 * dt * prev_f;
    else if (std::isfinite(row.f))
      cum += 0.5 * dt * row.f;
    prev_f = row.f;

    // Events. A count drop is either an interior merge or a front leaving
    // through a wall; a fast front can cross the one-cell boundary zone in a
    // single step, so zone dwell alone cannot be relied on to spot wall
    // exits.
    const int prev_count = static_cast<int>(prev_zs.size());
    if (row.count > prev_count) {
      tr.events.push_back(
          {EventKind::front_branch, t, odd_one_out(zs, prev_zs)});
    } else if (row.count < prev_count) {
      const double pv = odd_one_out(prev_zs, zs);
      int wall = -1;  // -1 interior, 0 left, 1 right
      if (prev_count == 1 && row.count == 0) {
        // A lone crossing separates two regions that each touch their wall,
        // so it can only die against one of them. The surviving sign plus
        // the old crossing orientation tells which side vanished.
        double snew = 0.0;
        for (double v : c)
          if (std::abs(v) > std::abs(snew)) snew = v;
        const auto& z = prev_zs[0];
        const double orient =
            z.left_slope != 0.0 ? z.left_slope : z.right_slope;
        if (snew != 0.0 && orient != 0.0)
          // orient < 0: positive left of the crossing, negative right.
          wall = (snew > 0.0) == (orient < 0.0) ? 1 : 0;
        else
          wall = pv < p.ell - pv ? 0 : 1;
      } else {
        // With survivors present, only a wall-adjacent vanish close to the
        // boundary counts as an exit.
        const bool left_clear = zs.empty() || zs.front().position > pv;
        const bool right_clear = zs.empty() || zs.back().position < pv;
        const double band = std::max(5 * dx, 0.01 * p.ell);
        if (left_clear && pv <= band)
          wall = 0;
        else if (right_clear && pv >= p.ell - band)
          wall = 1;
      }
      if (wall >= 0) {
        if (!in_zone)
          tr.events.push_back(
              {EventKind::boundary_hit, t, wall == 1 ? p.ell : 0.0});
        if (!std::isfinite(tr.t_c)) tr.t_c = t;
      } else {
        tr.events.push_back({EventKind::front_merge, t, pv});
      }
    }

    bool zone_now = false;
    double zone_pos = 0.0;
    for (const auto& z : zs)
      if (z.position <= dx || z.position >= p.ell - dx) {
        zone_now = true;
        zone_pos = z.position;
      }
    if (zone_now && !in_zone) {
      tr.events.push_back({EventKind::boundary_hit, t, zone_pos});
      if (!std::isfinite(tr.t_c)) tr.t_c = t;
    }
    in_zone = zone_now;

    const double band = kDeadbandRel * std::max(max_abs(c), 1e-300);
    const double sl = boundary_signal(c, true);
    const double sr = boundary_signal(c, false);
    if (std::abs(sl) > band) {
      const int s = sl > 0 ? 1 : -1;
      if (sign_left != 0 && s != sign_left)
        tr.events.push_back({EventKind::sign_change_at_boundary, t, 0.0});
      sign_left = s;
    }
    if (std::abs(sr) > band) {
      const int s = sr > 0 ? 1 : -1;
      if (sign_right != 0 && s != sign_right)
        tr.events.push_back({EventKind::sign_change_at_boundary, t, p.ell});
      sign_right = s;
    }
    prev_zs = zs;

    if (step % grid.record_every == 0 || step == nsteps) record(t, row, cum);
  }
  return tr;
}

namespace {

MassAudit audit_window(const MixingTrace& tr, const ProblemSpec& p,
                       size_t lo, size_t hi) {
  MassAudit a;
  a.t_lo = tr.times[lo];
  a.t_hi = tr.times[hi];

  // Integrated budget right-hand sides over the window (trapezoid on the
  // recorded rows; J evaluated exactly at the row times).
  long double int_left = 0.0, int_right = 0.0;
  for (size_t i = lo; i < hi; ++i) {
    const double h = tr.times[i + 1] - tr.times[i];
    const double l0 = p.j1.value(tr.times[i]) - tr.F[i];
    const double l1 = p.j1.value(tr.times[i + 1]) - tr.F[i + 1];
    const double r0 = p.j2.value(tr.times[i]) + tr.F[i];
    const double r1 = p.j2.value(tr.times[i + 1]) + tr.F[i + 1];
    int_left += 0.5L * h * (l0 + l1);
    int_right += 0.5L * h * (r0 + r1);
  }
  a.residual_left = (tr.mass_left[hi] - tr.mass_left[lo]) -
                    static_cast<double>(int_left);
  a.residual_right = (tr.mass_right[hi] - tr.mass_right[lo]) -
                     static_cast<double>(int_right);

  const double mass_a = p.rho_a.mass();
  const double mass_b = p.v * p.rho_b.mass();
  a.norm_J1 = p.j1.abs_integral();
  a.norm_J2 = p.j2.abs_integral();
  a.mass_scale = mass_a + mass_b + a.norm_J1 + a.norm_J2;
  a.norm_F = tr.cumF.back();
  a.influx_a = mass_a + a.norm_J1;
  a.influx_b = mass_b + a.norm_J2;
  a.closure_left = a.influx_a - a.norm_F;
  a.closure_right = a.influx_b - a.norm_F;
  return a;
}

}  // namespace

MassAudit mass_audit(const MixingTrace& tr, const ProblemSpec& p) {
  size_t lo = 0;
  const size_t n = tr.times.size();
  while (lo < n && !std::isfinite(tr.M[lo])) ++lo;
  if (lo == n) throw UndefinedFront("no window with a unique mixing point");
  size_t hi = lo;
  while (hi + 1 < n && std::isfinite(tr.M[hi + 1])) ++hi;
  if (hi == lo)
    throw UndefinedFront("mixing point defined at a single sample only");
  return audit_window(tr, p, lo, hi);
}

MassAudit mass_audit(const MixingTrace& tr, const ProblemSpec& p,
                     double t_lo, double t_hi) {
  if (!(t_lo < t_hi))
    throw DomainError("mass_audit window must satisfy t_lo < t_hi");
  const auto& ts = tr.times;
  if (t_lo < ts.front() - 1e-12 || t_hi > ts.back() + 1e-12)
    throw DomainError("mass_audit window outside the trace");
  size_t lo = std::lower_bound(ts.begin(), ts.end(), t_lo - 1e-12) -
              ts.begin();
  size_t hi = std::upper_bound(ts.begin(), ts.end(), t_hi + 1e-12) -
              ts.begin();
  if (hi > 0) --hi;
  for (size_t i = lo; i <= hi; ++i)
    if (!std::isfinite(tr.M[i]))
      throw UndefinedFront("mixing point undefined inside the audit window");
  if (hi == lo)
    throw UndefinedFront("audit window contains fewer than two samples");
  return audit_window(tr, p, lo, hi);
}

}  // namespace frontmix
