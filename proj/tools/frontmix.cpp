// Command line front end: config ingestion, pipeline orchestration, CSV and
// report emission. Numerics live in the library; this file only routes data.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "frontmix/cm.hpp"
#include "frontmix/config_io.hpp"
#include "frontmix/errors.hpp"
#include "frontmix/fronts.hpp"
#include "frontmix/inversion.hpp"
#include "frontmix/laplace.hpp"
#include "frontmix/network.hpp"
#include "frontmix/problem.hpp"
#include "frontmix/simulator.hpp"

namespace fs = std::filesystem;
using namespace frontmix;

namespace {

struct Opts {
  std::string config;
  std::string out = ".";
  double s_min = 0.0, s_max = 0.0;
  int s_points = 0;
  int nx = 0;
  double dt = 0.0;
  double horizon = 0.0;
  double tol = 0.02;
  std::string method;
  int terms = 0;
  bool with_sim = false;
};

std::string g17(double x) { return format_g17(x); }

void apply_overrides(RunConfig* cfg, const Opts& o, bool network_cmd) {
  if (o.s_points > 0) cfg->s_grid.points = o.s_points;
  if (o.s_min > 0.0) cfg->s_grid.lo = o.s_min;
  if (o.s_max > 0.0) cfg->s_grid.hi = o.s_max;
  if (cfg->s_grid.hi < cfg->s_grid.lo)
    throw ConfigError("s grid: max must be >= min");
  if (o.nx > 0) cfg->grid.nx = o.nx;
  if (o.dt > 0.0) {
    if (network_cmd)
      cfg->net_grid.dt = o.dt;
    else
      cfg->grid.dt = o.dt;
  }
  if (o.horizon > 0.0) cfg->horizon = o.horizon;
  if (!o.method.empty()) {
    cfg->method.kind = o.method == "euler" ? InversionKind::euler_summation
                                           : InversionKind::gaver_stehfest;
  }
  if (o.terms > 0) {
    if (cfg->method.kind == InversionKind::gaver_stehfest)
      cfg->method.terms = o.terms;
    else
      cfg->method.euler_m = o.terms;
  }
}

const ProblemSpec& need_problem(const RunConfig& cfg) {
  if (!cfg.problem)
    throw ConfigError(cfg.name + ": command needs a \"problem\" section");
  return *cfg.problem;
}

const NetworkSpec& need_network(const RunConfig& cfg) {
  if (!cfg.network)
    throw ConfigError(cfg.name + ": command needs a \"network\" section");
  return *cfg.network;
}

void base_manifest(RunManifest* m, const std::string& command, const Opts& o,
                   const RunConfig& cfg) {
  m->command = command;
  m->config_path = o.config;
  m->config_hash = file_hash_hex(o.config);
  m->parameters["method"] = cfg.method.kind == InversionKind::gaver_stehfest
                                ? "stehfest"
                                : "euler";
  m->parameters["terms"] = std::to_string(
      cfg.method.kind == InversionKind::gaver_stehfest ? cfg.method.terms
                                                       : cfg.method.euler_m);
}

// Linear interpolation on an ascending abscissa grid; NaN outside and across
// NaN-valued brackets.
double interp(const std::vector<double>& xs, const std::vector<double>& ys,
              double x) {
  if (xs.empty() || x < xs.front() - 1e-12 || x > xs.back() + 1e-12)
    return std::numeric_limits<double>::quiet_NaN();
  auto it = std::lower_bound(xs.begin(), xs.end(), x);
  if (it == xs.begin()) return ys.front();
  if (it == xs.end()) return ys.back();
  const std::size_t hi = it - xs.begin(), lo = hi - 1;
  const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + w * (ys[hi] - ys[lo]);
}

// Path-global coordinate -> (edge index, edge-local coordinate).
void path_to_edge(const NetworkSpec& net, double m, int* edge, double* local) {
  *edge = -1;
  *local = std::numeric_limits<double>::quiet_NaN();
  if (!std::isfinite(m)) return;
  const std::vector<int> pv = net.path_vertices();
  const std::vector<double> off = net.path_offsets();
  for (std::size_t k = 0; k + 1 < pv.size(); ++k) {
    if (m > off[k + 1] + 1e-12 && k + 2 < pv.size()) continue;
    for (std::size_t e = 0; e < net.edges.size(); ++e) {
      const NetEdge& ed = net.edges[e];
      if (ed.a == pv[k] && ed.b == pv[k + 1]) {
        *edge = (int)e;
        *local = m - off[k];
        return;
      }
      if (ed.b == pv[k] && ed.a == pv[k + 1]) {
        *edge = (int)e;
        *local = ed.length - (m - off[k]);
        return;
      }
    }
    return;
  }
}

void write_events_csv(const std::string& path,
                      const std::vector<SimEvent>& events) {
  CsvWriter csv(path, "kind,t,position");
  for (const auto& ev : events)
    csv.row({event_kind_name(ev.kind), g17(ev.time), g17(ev.position)});
}

bool runtime_violation(const std::vector<SimEvent>& events,
                       SimEvent* first) {
  for (const auto& ev : events) {
    if (ev.kind == EventKind::boundary_hit ||
        ev.kind == EventKind::front_merge ||
        ev.kind == EventKind::front_branch) {
      *first = ev;
      return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------- analytic

int cmd_analytic(const Opts& o) {
  RunConfig cfg = load_config(o.config);
  apply_overrides(&cfg, o, false);
  const ProblemSpec& p = need_problem(cfg);
  fs::create_directories(o.out);

  const std::vector<double> sg = geometric_points(cfg.s_grid);
  struct Row {
    GenResult g;
    double y = std::numeric_limits<double>::quiet_NaN();
    const char* flag = "ok";
  };
  std::vector<Row> rows(sg.size());
  parallel_for((int)sg.size(), [&](int i) {
    Row& r = rows[i];
    r.g = generating_function(p, sg[i]);
    if (!r.g.valid) {
      r.flag = "no_zero";
      return;
    }
    try {
      r.y = mixing_locus(p, sg[i]);
    } catch (const LocusOutOfGap&) {
      r.flag = "out_of_gap";
    } catch (const Error&) {
      r.flag = "no_zero";
    }
  });

  {
    CsvWriter csv((fs::path(o.out) / "generating.csv").string(),
                  "s,f,radicand,y,flag");
    for (std::size_t i = 0; i < sg.size(); ++i)
      csv.row({g17(sg[i]), g17(rows[i].g.f), g17(rows[i].g.radicand),
               g17(rows[i].y), rows[i].flag});
  }

  const HomogeneityVerdict v = homogeneity_check(p);
  // Fixed probe band: complete monotonicity is a property of f itself, not
  // of whatever s-grid the caller asked to tabulate.
  const CmReport cm = cm_probe(
      [&](double s) {
        const GenResult g = generating_function(p, s);
        return g.valid ? g.f : std::numeric_limits<double>::quiet_NaN();
      },
      geometric_grid(1e-2, 30.0, 25), 3);

  std::size_t ok_rows = 0;
  for (const auto& r : rows)
    if (std::string(r.flag) == "ok") ++ok_rows;

  std::ostringstream rep;
  rep << "rows_ok = " << ok_rows << " / " << sg.size() << "\n";
  rep << "mass_balance_residual = " << g17(p.mass_balance_residual()) << "\n";
  rep << "a1 = " << g17(v.coeffs.a1);
  if (!v.a1_zero)
    rep << "  <-- NONZERO: leading small-s coefficient, mixing cannot be "
           "homogeneous";
  rep << "\n";
  rep << "a2 = " << g17(v.coeffs.a2) << "\n";
  rep << "a3 = " << g17(v.coeffs.a3) << "\n";
  rep << "r_plus = "
      << (v.gyration.plus_defined ? g17(v.gyration.r_plus) : "undefined")
      << "\n";
  rep << "r_minus = "
      << (v.gyration.minus_defined ? g17(v.gyration.r_minus) : "undefined")
      << "\n";
  rep << "bound_holds = " << (v.bound_holds ? "yes" : "no") << "\n";
  rep << "may_persist = " << (v.may_persist ? "yes" : "no") << "\n";
  rep << "verdict: " << v.text << "\n";
  rep << "cm_probe = "
      << (cm.verdict == CmVerdict::pass
              ? "pass"
              : cm.verdict == CmVerdict::fail ? "fail" : "inconclusive");
  if (cm.verdict == CmVerdict::fail)
    rep << " (order " << cm.violation_order << " at s = "
        << g17(cm.violation_s) << ")";
  rep << "\n";
  std::ofstream(fs::path(o.out) / "summary.txt") << rep.str();
  std::cout << rep.str();

  RunManifest m;
  base_manifest(&m, "analytic", o, cfg);
  m.parameters["s_min"] = g17(cfg.s_grid.lo);
  m.parameters["s_max"] = g17(cfg.s_grid.hi);
  m.parameters["s_points"] = std::to_string(cfg.s_grid.points);
  m.outputs = {"generating.csv", "summary.txt"};
  write_manifest(o.out, m);
  return ok_rows == 0 ? 3 : 0;
}

// ------------------------------------------------------------------ invert

int cmd_invert(const Opts& o) {
  RunConfig cfg = load_config(o.config);
  apply_overrides(&cfg, o, false);
  const ProblemSpec& p = need_problem(cfg);
  fs::create_directories(o.out);

  const std::vector<double> tg = linear_points(cfg.t_grid);
  const std::vector<double> cum = invert_cumulative(p, tg, cfg.method);
  std::vector<double> F(tg.size());
  parallel_for((int)tg.size(), [&](int i) {
    F[i] = invert(
        [&](std::complex<double> s) { return generating_function_c(p, s); },
        tg[i], cfg.method);
  });

  {
    CsvWriter csv((fs::path(o.out) / "inversion.csv").string(),
                  "t,F_inv,cumF_inv");
    for (std::size_t i = 0; i < tg.size(); ++i)
      csv.row({g17(tg[i]), g17(F[i]), g17(cum[i])});
  }
  std::cout << "rows = " << tg.size() << "\n"
            << "cumF_inv_end = " << g17(cum.back()) << "\n";

  RunManifest m;
  base_manifest(&m, "invert", o, cfg);
  m.parameters["t_min"] = g17(cfg.t_grid.lo);
  m.parameters["t_max"] = g17(cfg.t_grid.hi);
  m.parameters["t_points"] = std::to_string(cfg.t_grid.points);
  m.outputs = {"inversion.csv"};
  write_manifest(o.out, m);
  return 0;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Opts& o) {
  RunConfig cfg = load_config(o.config);
  apply_overrides(&cfg, o, false);
  const ProblemSpec& p = need_problem(cfg);
  fs::create_directories(o.out);

  const MixingTrace tr = run(p, cfg.grid, cfg.horizon);
  {
    CsvWriter csv(
        (fs::path(o.out) / "trace.csv").string(),
        "t,M,F_left,F_right,F,cumF,zero_count,mass_left,mass_right,mass_total");
    for (std::size_t i = 0; i < tr.times.size(); ++i)
      csv.row({g17(tr.times[i]), g17(tr.M[i]), g17(tr.F_left[i]),
               g17(tr.F_right[i]), g17(tr.F[i]), g17(tr.cumF[i]),
               std::to_string(tr.zero_count[i]), g17(tr.mass_left[i]),
               g17(tr.mass_right[i]), g17(tr.mass_total[i])});
  }
  write_events_csv((fs::path(o.out) / "events.csv").string(), tr.events);

  std::ostringstream rep;
  rep << "rows = " << tr.times.size() << "\n";
  rep << "events = " << tr.events.size() << "\n";
  rep << "t_c = " << (std::isnan(tr.t_c) ? "none" : g17(tr.t_c)) << "\n";
  rep << "cumF_end = " << g17(tr.cumF.back()) << "\n";
  rep << "max_mass_step_error = " << g17(tr.max_mass_step_error) << "\n";
  std::ofstream(fs::path(o.out) / "summary.txt") << rep.str();
  std::cout << rep.str();

  RunManifest m;
  base_manifest(&m, "simulate", o, cfg);
  m.parameters["nx"] = std::to_string(cfg.grid.nx);
  m.parameters["dt"] = g17(cfg.grid.dt);
  m.parameters["horizon"] = g17(cfg.horizon);
  m.outputs = {"trace.csv", "events.csv", "summary.txt"};
  write_manifest(o.out, m);
  return 0;
}

// ---------------------------------------------------------------- validate

int cmd_validate(const Opts& o) {
  RunConfig cfg = load_config(o.config);
  apply_overrides(&cfg, o, false);
  const ProblemSpec& p = need_problem(cfg);
  fs::create_directories(o.out);
  if (cfg.t_grid.hi > cfg.horizon + 1e-12)
    throw ConfigError("t grid extends past the simulation horizon");

  const MixingTrace tr = run(p, cfg.grid, cfg.horizon);
  write_events_csv((fs::path(o.out) / "events.csv").string(), tr.events);
  SimEvent viol;
  const bool violated = runtime_violation(tr.events, &viol);

  const std::vector<double> tg = linear_points(cfg.t_grid);
  std::vector<double> cum_inv;
  std::string inv_failure;
  try {
    cum_inv = invert_cumulative(p, tg, cfg.method);
  } catch (const Error& e) {
    // A mid-run criteria violation outranks a transform-side failure; only
    // rethrow when the run itself stayed clean.
    if (!violated) throw;
    inv_failure = e.what();
    cum_inv.assign(tg.size(), std::numeric_limits<double>::quiet_NaN());
  }
  std::vector<double> cum_sim(tg.size());
  for (std::size_t i = 0; i < tg.size(); ++i)
    cum_sim[i] = interp(tr.times, tr.cumF, tg[i]);

  double max_err = 0.0, max_err_t = tg.front();
  {
    CsvWriter csv((fs::path(o.out) / "validation.csv").string(),
                  "t,cumF_sim,cumF_inv,rel_err");
    for (std::size_t i = 0; i < tg.size(); ++i) {
      const double denom = std::max(std::abs(cum_inv[i]), 1e-300);
      const double err = std::abs(cum_sim[i] - cum_inv[i]) / denom;
      if (err > max_err) {
        max_err = err;
        max_err_t = tg[i];
      }
      csv.row({g17(tg[i]), g17(cum_sim[i]), g17(cum_inv[i]), g17(err)});
    }
  }

  std::ostringstream rep;
  rep << "max_rel_err = " << g17(max_err) << " at t = " << g17(max_err_t)
      << "\n";
  rep << "tol = " << g17(o.tol) << "\n";
  if (!inv_failure.empty())
    rep << "inversion criteria failure: " << inv_failure << "\n";
  if (violated) {
    rep << "runtime criteria violation: " << event_kind_name(viol.kind)
        << " at t = " << g17(viol.time) << ", position = "
        << g17(viol.position) << "\n";
    rep << "t_c = " << (std::isnan(tr.t_c) ? "none" : g17(tr.t_c)) << "\n";
  }
  std::ofstream(fs::path(o.out) / "summary.txt") << rep.str();
  std::cout << rep.str();

  RunManifest m;
  base_manifest(&m, "validate", o, cfg);
  m.parameters["nx"] = std::to_string(cfg.grid.nx);
  m.parameters["dt"] = g17(cfg.grid.dt);
  m.parameters["horizon"] = g17(cfg.horizon);
  m.parameters["tol"] = g17(o.tol);
  m.outputs = {"validation.csv", "events.csv", "summary.txt"};
  write_manifest(o.out, m);

  if (violated) return 4;
  return max_err <= o.tol ? 0 : 3;
}

// -------------------------------------------------------------- multifront

int cmd_multifront(const Opts& o) {
  RunConfig cfg = load_config(o.config);
  apply_overrides(&cfg, o, false);
  const ProblemSpec& p = need_problem(cfg);
  fs::create_directories(o.out);

  const std::vector<FrontSpec> fronts = enumerate_fronts(p);
  std::ostringstream rep;
  {
    CsvWriter csv((fs::path(o.out) / "fronts.csv").string(),
                  "front,left_lo,left_hi,right_lo,right_hi,r_plus,r_minus,"
                  "a1,a2,a3,bound_holds,may_persist");
    for (const auto& fr : fronts) {
      const HomogeneityVerdict v = homogeneity_check(fr, p);
      csv.row({std::to_string(fr.index), g17(fr.left_lo), g17(fr.left_hi),
               g17(fr.right_lo), g17(fr.right_hi), g17(v.gyration.r_plus),
               g17(v.gyration.r_minus), g17(v.coeffs.a1), g17(v.coeffs.a2),
               g17(v.coeffs.a3), v.bound_holds ? "1" : "0",
               v.may_persist ? "1" : "0"});
      rep << "front " << fr.index << " [" << g17(fr.left_lo) << ","
          << g17(fr.left_hi) << "]|[" << g17(fr.right_lo) << ","
          << g17(fr.right_hi) << "]: " << v.text << "\n";
    }
  }

  if (o.with_sim) {
    const MixingTrace tr = run(p, cfg.grid, cfg.horizon);
    write_events_csv((fs::path(o.out) / "events.csv").string(), tr.events);
    rep << "simulation: zero_count " << tr.zero_count.front() << " -> "
        << tr.zero_count.back() << " over [0," << g17(cfg.horizon) << "]\n";
    // A front dies by merge or wall absorption; attribute each such event to
    // the declared front whose gap center sits closest.
    for (const auto& fr : fronts) {
      const double center = 0.5 * (fr.left_hi + fr.right_lo);
      const SimEvent* death = nullptr;
      for (const auto& ev : tr.events) {
        if (ev.kind != EventKind::front_merge &&
            ev.kind != EventKind::boundary_hit)
          continue;
        bool closest = true;
        for (const auto& other : fronts) {
          const double oc = 0.5 * (other.left_hi + other.right_lo);
          if (std::abs(ev.position - oc) <
              std::abs(ev.position - center) - 1e-12)
            closest = false;
        }
        if (closest && !death) death = &ev;
      }
      if (death)
        rep << "front " << fr.index << ": died ("
            << event_kind_name(death->kind) << " at t = " << g17(death->time)
            << ")\n";
      else
        rep << "front " << fr.index << ": survived to horizon\n";
    }
  }
  std::ofstream(fs::path(o.out) / "summary.txt") << rep.str();
  std::cout << rep.str();

  RunManifest m;
  base_manifest(&m, "multifront", o, cfg);
  m.parameters["fronts"] = std::to_string(fronts.size());
  m.parameters["simulate"] = o.with_sim ? "true" : "false";
  m.outputs = {"fronts.csv", "summary.txt"};
  if (o.with_sim) m.outputs.push_back("events.csv");
  write_manifest(o.out, m);
  return 0;
}

// ----------------------------------------------------------------- network

int cmd_network(const Opts& o) {
  RunConfig cfg = load_config(o.config);
  apply_overrides(&cfg, o, true);
  const NetworkSpec& net = need_network(cfg);
  fs::create_directories(o.out);
  const int iv = cfg.network_interval >= 0 ? cfg.network_interval : 0;

  std::ofstream(fs::path(o.out) / "network_spec.json") << network_to_json(net);

  const std::vector<double> sg = geometric_points(cfg.s_grid);
  struct Row {
    double f, f_dim, rad;
    const char* flag;
  };
  std::vector<Row> rows(sg.size());
  parallel_for((int)sg.size(), [&](int i) {
    try {
      const NetGenResult r = network_generating(net, iv, sg[i]);
      rows[i] = {r.f, r.f_dim, r.radicand, "ok"};
    } catch (const NegativeRadicand&) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rows[i] = {nan, nan, nan, "no_zero"};
    }
  });
  std::size_t ok_rows = 0;
  {
    CsvWriter csv((fs::path(o.out) / "network_f.csv").string(),
                  "s,f,f_dim,radicand,flag");
    for (std::size_t i = 0; i < sg.size(); ++i) {
      csv.row({g17(sg[i]), g17(rows[i].f), g17(rows[i].f_dim),
               g17(rows[i].rad), rows[i].flag});
      if (std::string(rows[i].flag) == "ok") ++ok_rows;
    }
  }

  const NetworkTrace tr = run_network(net, cfg.net_grid, cfg.horizon);
  {
    CsvWriter csv((fs::path(o.out) / "network_trace.csv").string(),
                  "t,M_path,M_edge,M_local,F_left,F_right,F,cumF,"
                  "zero_count_path,zero_count_total,mass_total");
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
      int edge;
      double local;
      path_to_edge(net, tr.M[i], &edge, &local);
      csv.row({g17(tr.times[i]), g17(tr.M[i]), std::to_string(edge),
               g17(local), g17(tr.F_left[i]), g17(tr.F_right[i]),
               g17(tr.F[i]), g17(tr.cumF[i]),
               std::to_string(tr.zero_count_path[i]),
               std::to_string(tr.zero_count_total[i]), g17(tr.mass_total[i])});
    }
  }
  {
    CsvWriter csv((fs::path(o.out) / "network_events.csv").string(),
                  "kind,t,position,edge,local");
    for (const auto& ev : tr.events) {
      int edge;
      double local;
      path_to_edge(net, ev.position, &edge, &local);
      csv.row({event_kind_name(ev.kind), g17(ev.time), g17(ev.position),
               std::to_string(edge), g17(local)});
    }
  }

  std::ostringstream rep;
  rep << "interval = " << iv << "\n";
  rep << "f_rows_ok = " << ok_rows << " / " << sg.size() << "\n";
  rep << "events = " << tr.events.size() << "\n";
  for (const auto& ev : tr.events)
    rep << "  " << event_kind_name(ev.kind) << " t = " << g17(ev.time)
        << " position = " << g17(ev.position) << "\n";
  rep << "t_c = " << (std::isnan(tr.t_c) ? "none" : g17(tr.t_c)) << "\n";
  rep << "cumF_end = " << g17(tr.cumF.back()) << "\n";
  rep << "max_mass_step_error = " << g17(tr.max_mass_step_error) << "\n";
  rep << "max_junction_residual = " << g17(tr.max_junction_residual) << "\n";

  RunManifest m;
  base_manifest(&m, "network", o, cfg);
  m.parameters["interval"] = std::to_string(iv);
  m.parameters["horizon"] = g17(cfg.horizon);
  m.outputs = {"network_spec.json", "network_f.csv", "network_trace.csv",
               "network_events.csv"};

  if (cfg.ratio_curve) {
    // Long-time check: simulated flux against the inverted transform over the
    // final decade of the horizon.
    const std::vector<double> tratio =
        geometric_points({cfg.horizon / 10.0, cfg.horizon, 25});
    std::vector<double> finv(tratio.size());
    parallel_for((int)tratio.size(), [&](int i) {
      finv[i] = invert(
          [&](std::complex<double> s) {
            return network_generating_c(net, iv, s);
          },
          tratio[i], cfg.method);
    });
    CsvWriter csv((fs::path(o.out) / "ratio.csv").string(),
                  "t,F_sim,F_inv,ratio");
    for (std::size_t i = 0; i < tratio.size(); ++i) {
      const double fsim = interp(tr.times, tr.F, tratio[i]);
      csv.row({g17(tratio[i]), g17(fsim), g17(finv[i]),
               g17(fsim / finv[i])});
    }
    m.outputs.push_back("ratio.csv");
    rep << "ratio_curve = ratio.csv over [" << g17(cfg.horizon / 10.0) << ","
        << g17(cfg.horizon) << "]\n";
  }

  std::ofstream(fs::path(o.out) / "summary.txt") << rep.str();
  std::cout << rep.str();
  m.outputs.push_back("summary.txt");
  write_manifest(o.out, m);
  return ok_rows == 0 ? 3 : 0;
}

// ---------------------------------------------------------------- selftest

ProblemSpec selftest_eigenmode() {
  constexpr double pi = 3.14159265358979323846;
  ProblemSpec p;
  p.rho_a = PiecewiseDensity(
      {Piece{0.0, 0.5, PieceKind::sinusoid_window, {1.0, pi, pi / 2.0}}});
  p.rho_b = PiecewiseDensity(
      {Piece{0.5, 1.0, PieceKind::sinusoid_window, {1.0, pi, -pi / 2.0}}});
  return p;
}

int cmd_selftest() {
  constexpr double pi = 3.14159265358979323846;
  int failures = 0;
  auto check = [&](const char* name, bool ok, const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name;
    if (!ok && !detail.empty()) std::cout << " (" << detail << ")";
    std::cout << "\n";
    if (!ok) ++failures;
  };

  const ProblemSpec eig = selftest_eigenmode();

  {
    const double got = generating_function(eig, 1.0).f;
    const double want = pi / (1.0 + pi * pi);
    check("closed-form generating function", std::abs(got - want) < 1e-10,
          "got " + g17(got) + " want " + g17(want));
  }
  {
    const double y = mixing_locus(eig, 1.0);
    check("symmetric mixing locus", std::abs(y - 0.5) < 1e-10,
          "got " + g17(y));
  }
  {
    auto hat = [](std::complex<double> s) { return 1.0 / (s + 1.0); };
    const double st = invert(hat, 1.0, InversionMethod::stehfest());
    const double eu = invert(hat, 1.0, InversionMethod::euler());
    const double want = std::exp(-1.0);
    check("inversion round trip",
          std::abs(st - want) < 1e-6 && std::abs(eu - want) < 1e-8,
          "stehfest " + g17(st) + " euler " + g17(eu));
  }
  {
    SimGrid g;
    g.nx = 201;
    g.dt = 1e-4;
    g.record_every = 50;
    const MixingTrace tr = run(eig, g, 0.05);
    const double drift = std::abs(tr.mass_total.back() - tr.mass_total.front());
    check("simulation mass conservation",
          drift < 1e-10 && tr.max_mass_step_error < 1e-12,
          "drift " + g17(drift));
  }
  {
    NetworkSpec net = build_ttree(3, 4.0);
    add_release(net, 0, 1.0, 0.02);
    add_release(net, 1, -1.0, 0.02);
    const auto J = laplace_solve(net, 0.5);
    check("junction solve antisymmetry",
          std::abs(J.p()[2]) < 1e-12 && J.residual() < 1e-10,
          "p2 " + g17(J.p()[2]) + " residual " + g17(J.residual()));
  }
  {
    // Two-edge split of the eigenmode interval; nodal values must match the
    // single-interval transform field.
    NetworkSpec net;
    net.nv = 3;
    NetEdge e0;
    e0.a = 0;
    e0.b = 1;
    e0.length = 0.45;
    e0.rho = PiecewiseDensity(
        {Piece{0.0, 0.45, PieceKind::sinusoid_window, {1.0, pi, pi / 2.0}}});
    NetEdge e1;
    e1.a = 1;
    e1.b = 2;
    e1.length = 0.55;
    e1.rho = PiecewiseDensity({Piece{0.0, 0.55, PieceKind::sinusoid_window,
                                     {1.0, pi, pi / 2.0 + 0.45 * pi}}});
    net.edges = {e0, e1};
    net.path = {0, 1};
    net.source_points = {0.0, 0.45, 1.0};
    net.validate();
    const auto J = laplace_solve(net, 2.0);
    const LaplaceField<double> ref(eig, 2.0);
    double worst = 0.0;
    for (double x : {0.2, 0.45, 0.7})
      worst = std::max(worst,
                       std::abs((x <= 0.45 ? J.value(0, x)
                                           : J.value(1, x - 0.45)) -
                                ref.value(x)));
    check("degenerate network transform", worst < 1e-8, "worst " + g17(worst));
  }

  std::cout << (failures == 0 ? "selftest: all checks passed\n"
                              : "selftest: FAILURES\n");
  return failures == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "mixing-flux toolkit: transform-domain generating functions and "
      "front-tracking simulation on intervals and metric graphs"};
  app.require_subcommand(1);
  Opts o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--method", o.method, "inversion method")
        ->check(CLI::IsMember({"stehfest", "euler"}));
    sub->add_option("--terms", o.terms, "inversion term count");
  };
  auto add_sgrid = [&](CLI::App* sub) {
    sub->add_option("--s-min", o.s_min, "transform grid lower end");
    sub->add_option("--s-max", o.s_max, "transform grid upper end");
    sub->add_option("--s-points", o.s_points, "transform grid point count");
  };
  auto add_simflags = [&](CLI::App* sub) {
    sub->add_option("--nx", o.nx, "spatial node count");
    sub->add_option("--dt", o.dt, "time step");
    sub->add_option("--horizon", o.horizon, "simulation horizon");
  };

  CLI::App* analytic = app.add_subcommand(
      "analytic", "generating function and mixing locus over an s-grid");
  add_common(analytic);
  add_sgrid(analytic);

  CLI::App* invert_cmd = app.add_subcommand(
      "invert", "numerically inverted flux and cumulative flux");
  add_common(invert_cmd);

  CLI::App* simulate = app.add_subcommand(
      "simulate", "front-tracking finite difference run");
  add_common(simulate);
  add_simflags(simulate);

  CLI::App* validate = app.add_subcommand(
      "validate", "simulation against inverted transform");
  add_common(validate);
  add_simflags(validate);
  validate->add_option("--tol", o.tol, "max relative error accepted");

  CLI::App* multifront = app.add_subcommand(
      "multifront", "per-front persistence report");
  add_common(multifront);
  add_simflags(multifront);
  multifront->add_flag("--simulate", o.with_sim,
                       "cross-check verdicts with a PDE run");

  CLI::App* network = app.add_subcommand(
      "network", "metric graph transform and simulation");
  add_common(network);
  add_sgrid(network);
  add_simflags(network);

  app.add_subcommand("selftest", "quick built-in consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(analytic)) return cmd_analytic(o);
    if (app.got_subcommand(invert_cmd)) return cmd_invert(o);
    if (app.got_subcommand(simulate)) return cmd_simulate(o);
    if (app.got_subcommand(validate)) return cmd_validate(o);
    if (app.got_subcommand(multifront)) return cmd_multifront(o);
    if (app.got_subcommand(network)) return cmd_network(o);
    return cmd_selftest();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CriteriaFailedAtAbscissa& e) {
    std::cerr << "criteria failure: " << e.what() << "\n";
    return 3;
  } catch (const NegativeRadicand& e) {
    std::cerr << "criteria failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
