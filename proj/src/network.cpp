#include "frontmix/network.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "frontmix/errors.hpp"

namespace frontmix {

namespace {

using cplx = std::complex<double>;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Same relative thresholds as the interval front tracker.
constexpr double kZeroRel = 1e-10;
constexpr double kDeadbandRel = 1e-9;

template <class S>
S sched_transform(const FluxSchedule& f, S s);
template <>
double sched_transform<double>(const FluxSchedule& f, double s) {
  return f.laplace(s);
}
template <>
cplx sched_transform<cplx>(const FluxSchedule& f, cplx s) {
  return f.laplace_c(s);
}

}  // namespace

int NetworkSpec::degree(int v) const {
  int d = 0;
  for (const NetEdge& e : edges) d += (e.a == v) + (e.b == v);
  return d;
}

double NetworkSpec::total_length() const {
  double acc = 0.0;
  for (const NetEdge& e : edges) acc += e.length;
  return acc;
}

double NetworkSpec::total_signed_mass() const {
  double acc = 0.0;
  for (const NetEdge& e : edges) acc += e.rho.mass();
  return acc;
}

std::vector<int> NetworkSpec::path_vertices() const {
  if (path.empty()) throw ConfigError("path must contain at least one edge");
  for (int idx : path)
    if (idx < 0 || idx >= static_cast<int>(edges.size()))
      throw ConfigError("path references an unknown edge");
  int cur;
  if (path.size() == 1) {
    cur = edges[path[0]].a;
  } else {
    // The first edge's free endpoint is the one not shared with the second.
    const NetEdge& e0 = edges[path[0]];
    const NetEdge& e1 = edges[path[1]];
    const bool a_shared = e0.a == e1.a || e0.a == e1.b;
    const bool b_shared = e0.b == e1.a || e0.b == e1.b;
    if (!a_shared && !b_shared) throw ConfigError("path edges do not chain");
    cur = a_shared ? e0.b : e0.a;
  }
  std::vector<int> vs{cur};
  for (int idx : path) {
    const NetEdge& e = edges[idx];
    if (e.a == cur)
      cur = e.b;
    else if (e.b == cur)
      cur = e.a;
    else
      throw ConfigError("path edges do not chain");
    vs.push_back(cur);
  }
  std::vector<int> sorted = vs;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("path revisits a vertex; a simple walk is required");
  return vs;
}

std::vector<double> NetworkSpec::path_offsets() const {
  const std::vector<int> vs = path_vertices();
  std::vector<double> off(vs.size(), 0.0);
  for (std::size_t k = 0; k < path.size(); ++k)
    off[k + 1] = off[k] + edges[path[k]].length;
  return off;
}

double NetworkSpec::path_length() const {
  double acc = 0.0;
  for (int idx : path) {
    if (idx < 0 || idx >= static_cast<int>(edges.size()))
      throw ConfigError("path references an unknown edge");
    acc += edges[idx].length;
  }
  return acc;
}

int NetworkSpec::vertex_at_path(double x) const {
  const std::vector<int> vs = path_vertices();
  const std::vector<double> off = path_offsets();
  const double tol = 1e-9 * std::max(path_length(), 1e-300);
  for (std::size_t k = 0; k < vs.size(); ++k)
    if (std::abs(off[k] - x) <= tol) return vs[k];
  return -1;
}

void NetworkSpec::validate() const {
  if (nv < 2) throw ConfigError("network needs at least two vertices");
  if (edges.empty()) throw ConfigError("network needs at least one edge");
  if (!(D > 0.0) || !std::isfinite(D))
    throw ConfigError("D must be positive and finite");
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(edges.size());
  for (const NetEdge& e : edges) {
    if (e.a < 0 || e.a >= nv || e.b < 0 || e.b >= nv)
      throw ConfigError("edge endpoint out of range");
    if (e.a == e.b) throw ConfigError("self-loop edges are not supported");
    if (!(e.length > 0.0) || !std::isfinite(e.length))
      throw ConfigError("edge lengths must be positive and finite");
    if (!e.rho.empty()) {
      const double tol = 1e-12 * e.length;
      if (e.rho.support_lo() < -tol || e.rho.support_hi() > e.length + tol)
        throw ConfigError("edge initial data extends past the edge");
    }
    pairs.emplace_back(std::min(e.a, e.b), std::max(e.a, e.b));
  }
  std::sort(pairs.begin(), pairs.end());
  if (std::adjacent_find(pairs.begin(), pairs.end()) != pairs.end())
    throw ConfigError("parallel edges form a loop");
  if (static_cast<int>(edges.size()) != nv - 1)
    throw ConfigError("edge count must equal vertex count minus one (tree)");
  // Connectivity; with the edge count pinned above it also rules out cycles.
  std::vector<std::vector<int>> adj(nv);
  for (const NetEdge& e : edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::vector<char> seen(nv, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int found = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int w : adj[u])
      if (!seen[w]) {
        seen[w] = 1;
        ++found;
        stack.push_back(w);
      }
  }
  if (found != nv) throw ConfigError("graph is not connected");

  std::vector<int> pe = path;
  std::sort(pe.begin(), pe.end());
  if (std::adjacent_find(pe.begin(), pe.end()) != pe.end())
    throw ConfigError("path repeats an edge");
  (void)path_vertices();

  if (source_points.size() < 2)
    throw ConfigError("at least two source points are required");
  for (std::size_t i = 0; i < source_points.size(); ++i) {
    if (i > 0 && !(source_points[i] > source_points[i - 1]))
      throw ConfigError("source points must increase strictly");
    if (vertex_at_path(source_points[i]) < 0)
      throw ConfigError("source point does not land on a path vertex");
  }

  if (!leaf_flux.empty()) {
    if (static_cast<int>(leaf_flux.size()) != nv)
      throw ConfigError("leaf_flux must carry one schedule per vertex");
    for (int v = 0; v < nv; ++v)
      if (!leaf_flux[v].is_zero() && degree(v) != 1)
        throw ConfigError("flux schedules may attach to leaves only");
  }
}

NetworkSpec build_ttree(int iterations, double base_length, double attach_frac,
                        double length_ratio) {
  if (iterations < 1 || iterations > 8)
    throw ConfigError("iterations must lie in [1, 8]");
  if (!(base_length > 0.0) || !std::isfinite(base_length))
    throw ConfigError("base_length must be positive and finite");
  if (!(attach_frac > 0.0 && attach_frac < 1.0))
    throw ConfigError("attach_frac must lie in (0, 1)");
  if (!(length_ratio > 0.0))
    throw ConfigError("length_ratio must be positive");

  NetworkSpec net;
  net.nv = 2;
  net.edges.push_back({0, 1, base_length, {}});
  std::vector<int> chain{0};

  for (int it = 2; it <= iterations; ++it) {
    const int ne = static_cast<int>(net.edges.size());
    std::vector<std::pair<int, int>> halves(ne);
    for (int ei = 0; ei < ne; ++ei) {
      const NetEdge e = net.edges[ei];
      const int mid = net.nv++;
      const int tip = net.nv++;
      const double la = attach_frac * e.length;
      net.edges[ei] = {e.a, mid, la, {}};
      const int second = static_cast<int>(net.edges.size());
      net.edges.push_back({mid, e.b, e.length - la, {}});
      net.edges.push_back({mid, tip, length_ratio * e.length, {}});
      halves[ei] = {ei, second};
    }
    std::vector<int> next;
    next.reserve(2 * chain.size());
    for (int ce : chain) {
      next.push_back(halves[ce].first);
      next.push_back(halves[ce].second);
    }
    chain = std::move(next);
  }
  net.path = chain;
  net.source_points = net.path_offsets();
  return net;
}

void add_release(NetworkSpec& net, int vertex, double mass, double width) {
  if (vertex < 0 || vertex >= net.nv)
    throw ConfigError("release vertex out of range");
  if (!(width > 0.0) || !std::isfinite(width))
    throw ConfigError("release width must be positive and finite");
  const int deg = net.degree(vertex);
  if (deg == 0) throw ConfigError("release vertex has no incident edge");
  for (const NetEdge& e : net.edges)
    if ((e.a == vertex || e.b == vertex) && width > 0.5 * e.length)
      throw ConfigError("release width exceeds half of an incident edge");
  const double level = mass / (deg * width);
  for (NetEdge& e : net.edges) {
    if (e.a != vertex && e.b != vertex) continue;
    Piece blk;
    blk.kind = PieceKind::constant;
    blk.coef = {level};
    if (e.a == vertex) {
      blk.a = 0.0;
      blk.b = width;
    } else {
      blk.a = e.length - width;
      blk.b = e.length;
    }
    e.rho = PiecewiseDensity::merged(e.rho, PiecewiseDensity({blk}));
  }
}

// ---------------------------------------------------------------------------
// Transform-domain junction solve.
//
// Per edge, c = h + u with u the zero-flux particular field (so u' vanishes
// at both ends and all data enters through u's endpoint values) and h the
// nodal interpolant h(x) = va*sh(q(L-x))/sh(qL) + vb*sh(qx)/sh(qL). The flux
// the vertex sends into the edge is then D*[wd*va - wo*vb] with
// wd = q*coth(qL), wo = q*csch(qL), kept in the scaled forms
// wd = q(1+E^2)/(1-E^2), wo = 2qE/(1-E^2), E = exp(-qL), all bounded for
// Re q > 0. Summing over incident edges and equating to the injected leaf
// flux gives one strictly diagonally dominant row per vertex.

template <class S>
JunctionSolution<S>::JunctionSolution(const NetworkSpec& net, S s)
    : net_(&net), s_(s) {
  net.validate();
  const int ne = static_cast<int>(net.edges.size());
  const int nv = net.nv;
  part_.reserve(ne);
  for (const NetEdge& e : net.edges)
    part_.emplace_back(e.rho, e.length, net.D, s, S{}, S{});
  q_ = part_.front().q();

  std::vector<Eigen::Triplet<S>> trips;
  trips.reserve(4 * ne);
  Eigen::Matrix<S, Eigen::Dynamic, 1> rhs(nv);
  rhs.setZero();
  std::vector<S> ua(ne), ub(ne), wd(ne), wo(ne);
  for (int ei = 0; ei < ne; ++ei) {
    const NetEdge& e = net.edges[ei];
    const LaplaceField<S>& pf = part_[ei];
    const S e1 = pf.E(e.length);
    const S e2 = pf.E(2.0 * e.length);
    const S dn = pf.denom();
    wd[ei] = net.D * q_ * (1.0 + e2) / dn;
    wo[ei] = net.D * q_ * 2.0 * e1 / dn;
    ua[ei] = pf.value(0.0);
    ub[ei] = pf.value(e.length);
    trips.emplace_back(e.a, e.a, wd[ei]);
    trips.emplace_back(e.a, e.b, -wo[ei]);
    trips.emplace_back(e.b, e.b, wd[ei]);
    trips.emplace_back(e.b, e.a, -wo[ei]);
    rhs[e.a] += wd[ei] * ua[ei] - wo[ei] * ub[ei];
    rhs[e.b] += wd[ei] * ub[ei] - wo[ei] * ua[ei];
  }
  if (!net.leaf_flux.empty())
    for (int v = 0; v < nv; ++v)
      if (!net.leaf_flux[v].is_zero())
        rhs[v] += sched_transform<S>(net.leaf_flux[v], s);

  Eigen::SparseMatrix<S> A(nv, nv);
  A.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<Eigen::SparseMatrix<S>> solver;
  solver.compute(A);
  if (solver.info() != Eigen::Success)
    throw SingularSystem("junction system factorization failed");
  Eigen::Matrix<S, Eigen::Dynamic, 1> p = solver.solve(rhs);
  if (solver.info() != Eigen::Success)
    throw SingularSystem("junction system solve failed");
  p_.assign(p.data(), p.data() + nv);

  va_.resize(ne);
  vb_.resize(ne);
  for (int ei = 0; ei < ne; ++ei) {
    va_[ei] = p_[net.edges[ei].a] - ua[ei];
    vb_[ei] = p_[net.edges[ei].b] - ub[ei];
  }

  std::vector<S> lhs(nv, S{});
  std::vector<double> scale(nv, 0.0);
  for (int ei = 0; ei < ne; ++ei) {
    const NetEdge& e = net.edges[ei];
    lhs[e.a] += wd[ei] * p_[e.a] - wo[ei] * p_[e.b];
    lhs[e.b] += wd[ei] * p_[e.b] - wo[ei] * p_[e.a];
    scale[e.a] += std::abs(wd[ei] * p_[e.a]) + std::abs(wo[ei] * p_[e.b]);
    scale[e.b] += std::abs(wd[ei] * p_[e.b]) + std::abs(wo[ei] * p_[e.a]);
  }
  residual_ = 0.0;
  for (int v = 0; v < nv; ++v) {
    const double sc = scale[v] + std::abs(rhs[v]);
    if (sc == 0.0) continue;
    residual_ = std::max(residual_, std::abs(lhs[v] - rhs[v]) / sc);
  }
  if (!(residual_ <= 1e-10))
    throw SingularSystem("junction equations exceed the residual tolerance");
}

template <class S>
S JunctionSolution<S>::value(int edge, double x) const {
  if (edge < 0 || edge >= static_cast<int>(net_->edges.size()))
    throw DomainError("edge index out of range");
  const double L = net_->edges[edge].length;
  if (x < 0.0 || x > L) throw DomainError("position outside the edge");
  const LaplaceField<S>& pf = part_[edge];
  const S dn = pf.denom();
  const S ba = (pf.E(x) - pf.E(2.0 * L - x)) / dn;
  const S bb = (pf.E(L - x) - pf.E(L + x)) / dn;
  return va_[edge] * ba + vb_[edge] * bb + pf.value(x);
}

template <class S>
S JunctionSolution<S>::derivative(int edge, double x) const {
  if (edge < 0 || edge >= static_cast<int>(net_->edges.size()))
    throw DomainError("edge index out of range");
  const double L = net_->edges[edge].length;
  if (x < 0.0 || x > L) throw DomainError("position outside the edge");
  const LaplaceField<S>& pf = part_[edge];
  const S dn = pf.denom();
  const S da = -q_ * (pf.E(x) + pf.E(2.0 * L - x)) / dn;
  const S db = q_ * (pf.E(L - x) + pf.E(L + x)) / dn;
  return va_[edge] * da + vb_[edge] * db + pf.derivative(x);
}

template class JunctionSolution<double>;
template class JunctionSolution<cplx>;

JunctionSolution<double> laplace_solve(const NetworkSpec& net, double s) {
  return JunctionSolution<double>(net, s);
}

JunctionSolution<cplx> laplace_solve_c(const NetworkSpec& net, cplx s) {
  return JunctionSolution<cplx>(net, s);
}

namespace {

struct IntervalEnds {
  int va = 0, vb = 0;
  double len = 0.0;
};

IntervalEnds interval_ends(const NetworkSpec& net, int interval) {
  net.validate();
  if (interval < 0 ||
      interval + 1 >= static_cast<int>(net.source_points.size()))
    throw ConfigError("interval index out of range");
  const double xi = net.source_points[interval];
  const double xj = net.source_points[interval + 1];
  IntervalEnds ie;
  ie.va = net.vertex_at_path(xi);
  ie.vb = net.vertex_at_path(xj);
  ie.len = xj - xi;
  const std::vector<int> vs = net.path_vertices();
  const std::vector<double> off = net.path_offsets();
  const double tol = 1e-9 * net.path_length();
  for (std::size_t k = 0; k < vs.size(); ++k)
    if (off[k] > xi + tol && off[k] < xj - tol && net.degree(vs[k]) >= 3)
      throw ConfigError("generating interval spans a junction");
  return ie;
}

}  // namespace

NetGenResult network_generating(const NetworkSpec& net, int interval,
                                double s) {
  const IntervalEnds ie = interval_ends(net, interval);
  const JunctionSolution<double> sol(net, s);
  const double pi = sol.p()[ie.va];
  const double pj = sol.p()[ie.vb];
  const double e1 = std::exp(-sol.q() * ie.len);
  const double g1 = pj - pi * e1;
  const double g2 = pi - pj * e1;
  const double dn = 1.0 - e1 * e1;
  NetGenResult r;
  r.radicand = -4.0 * s * g1 * g2 * e1 / (dn * dn);
  if (!(r.radicand >= 0.0))
    throw NegativeRadicand(
        "no interior zero on the interval at this abscissa", r.radicand);
  r.f = std::sqrt(r.radicand);
  r.f_dim = std::sqrt(net.D * r.radicand);
  return r;
}

cplx network_generating_c(const NetworkSpec& net, int interval, cplx s) {
  const IntervalEnds ie = interval_ends(net, interval);
  const JunctionSolution<cplx> sol(net, s);
  const cplx pi = sol.p()[ie.va];
  const cplx pj = sol.p()[ie.vb];
  const cplx e1 = std::exp(-sol.q() * ie.len);
  const cplx g1 = pj - pi * e1;
  const cplx g2 = pi - pj * e1;
  const cplx dn = 1.0 - e1 * e1;
  // Only the product needs a branch choice; the remaining factors are exact
  // exponentials, so the value agrees with the real-axis routine for s > 0.
  return 2.0 * std::sqrt(s) * std::exp(-0.5 * sol.q() * ie.len) *
         std::sqrt(-(g1 * g2)) / dn;
}

// ---------------------------------------------------------------------------
// Graph time stepper.

namespace {

struct GraphDisc {
  std::vector<int> cells;
  std::vector<double> dx;
  std::vector<std::vector<int>> nodes;  // per edge: [a, interiors..., b]
  std::vector<double> cv;               // per-vertex control volume
  int n = 0;
};

GraphDisc discretize(const NetworkSpec& net, double target) {
  GraphDisc g;
  const int ne = static_cast<int>(net.edges.size());
  g.cells.resize(ne);
  g.dx.resize(ne);
  g.nodes.resize(ne);
  g.cv.assign(net.nv, 0.0);
  long long n = net.nv;
  for (int ei = 0; ei < ne; ++ei) {
    const NetEdge& e = net.edges[ei];
    const long long m = std::max<long long>(2, std::llround(e.length / target));
    if (n + m - 1 > 4'000'000) throw ConfigError("graph grid too fine");
    g.cells[ei] = static_cast<int>(m);
    g.dx[ei] = e.length / static_cast<double>(m);
    g.nodes[ei].resize(m + 1);
    g.nodes[ei][0] = e.a;
    g.nodes[ei][m] = e.b;
    for (int k = 1; k < m; ++k)
      g.nodes[ei][k] = static_cast<int>(n) + k - 1;
    n += m - 1;
    g.cv[e.a] += 0.5 * g.dx[ei];
    g.cv[e.b] += 0.5 * g.dx[ei];
  }
  g.n = static_cast<int>(n);
  return g;
}

// Position in pick farthest from every position in others: the crossing
// that appeared (others = previous) or disappeared (others = current).
double farthest_from(const std::vector<ZeroCrossing>& pick,
                     const std::vector<ZeroCrossing>& others) {
  double best_pos = pick.empty() ? 0.0 : pick.front().position;
  double best = -1.0;
  for (const ZeroCrossing& z : pick) {
    double d = std::numeric_limits<double>::infinity();
    for (const ZeroCrossing& o : others)
      d = std::min(d, std::abs(z.position - o.position));
    if (others.empty()) d = 0.0;
    if (d > best) {
      best = d;
      best_pos = z.position;
    }
  }
  return best_pos;
}

}  // namespace

NetworkTrace run_network(const NetworkSpec& net, const NetGrid& grid,
                         double horizon) {
  net.validate();
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (!(grid.theta >= 0.0 && grid.theta <= 1.0))
    throw ConfigError("grid.theta must lie in [0, 1]");
  if (grid.record_every < 1)
    throw ConfigError("grid.record_every must be at least 1");

  const double plen = net.path_length();
  const double target = grid.dx > 0.0 ? grid.dx : plen / 1000.0;
  const GraphDisc g = discretize(net, target);
  const int ne = static_cast<int>(net.edges.size());
  const int nv = net.nv;
  const double theta = grid.theta;
  double min_dx = g.dx[0];
  for (double d : g.dx) min_dx = std::min(min_dx, d);
  const double dt = grid.dt > 0.0
                        ? grid.dt
                        : std::min(1e-5 * plen * plen / net.D, min_dx);
  if (dt > min_dx)
    throw ConfigError(
        "grid.dt exceeds the smallest edge spacing; the front tracker needs "
        "dt <= dx");

  // Path bookkeeping: orientation and start offset per path edge, plus a
  // mapped path coordinate for every vertex (off-path subtrees inherit the
  // coordinate of their attachment junction).
  const std::vector<int> pvs = net.path_vertices();
  const std::vector<double> poff = net.path_offsets();
  std::vector<int> ppos(ne, -1);
  std::vector<char> pfwd(ne, 1);
  std::vector<double> pstart(ne, 0.0);
  for (std::size_t j = 0; j < net.path.size(); ++j) {
    const int ei = net.path[j];
    ppos[ei] = static_cast<int>(j);
    pfwd[ei] = net.edges[ei].a == pvs[j] ? 1 : 0;
    pstart[ei] = poff[j];
  }
  std::vector<double> vcoord(nv, kNaN);
  for (std::size_t j = 0; j < pvs.size(); ++j) vcoord[pvs[j]] = poff[j];
  {
    std::vector<std::vector<int>> adj(nv);
    for (const NetEdge& e : net.edges) {
      adj[e.a].push_back(e.b);
      adj[e.b].push_back(e.a);
    }
    std::vector<int> stack = pvs;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int w : adj[u])
        if (std::isnan(vcoord[w])) {
          vcoord[w] = vcoord[u];
          stack.push_back(w);
        }
    }
  }
  auto mapped = [&](int ei, double local) {
    if (ppos[ei] < 0) return vcoord[net.edges[ei].a];
    return pfwd[ei] ? pstart[ei] + local
                    : pstart[ei] + (net.edges[ei].length - local);
  };

  struct Leaf {
    int v = 0, edge = 0;
    bool at_a = true;
  };
  std::vector<Leaf> leaves;
  for (int v = 0; v < nv; ++v) {
    if (net.degree(v) != 1) continue;
    for (int ei = 0; ei < ne; ++ei)
      if (net.edges[ei].a == v || net.edges[ei].b == v) {
        leaves.push_back({v, ei, net.edges[ei].a == v});
        break;
      }
  }
  auto leaf_value = [&](int v, double t) {
    return net.leaf_flux.empty() ? 0.0 : net.leaf_flux[v].value(t);
  };

  // Cell-averaged projection of the per-edge data; vertex values average
  // the adjoining half cells over the composite control volume, so the
  // discrete mass matches the piecewise integrals exactly.
  Eigen::VectorXd c(g.n);
  c.setZero();
  {
    std::vector<double> acc(nv, 0.0);
    for (int ei = 0; ei < ne; ++ei) {
      const NetEdge& e = net.edges[ei];
      if (e.rho.empty()) continue;
      const double dx = g.dx[ei];
      const int m = g.cells[ei];
      for (int k = 1; k < m; ++k)
        c[g.nodes[ei][k]] =
            e.rho.integral((k - 0.5) * dx, (k + 0.5) * dx) / dx;
      acc[e.a] += e.rho.integral(0.0, 0.5 * dx);
      acc[e.b] += e.rho.integral(e.length - 0.5 * dx, e.length);
    }
    for (int v = 0; v < nv; ++v) c[v] = acc[v] / g.cv[v];
  }

  // Implicit matrix: identity plus theta-weighted scaled Laplacian. Vertex
  // rows are finite-volume rows over the composite control volume; at a
  // leaf they reduce exactly to the interval stepper's ghost-node row.
  struct VCouple {
    double w = 0.0;
    int other = 0;
  };
  std::vector<std::vector<VCouple>> vc(nv);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(g.n * 3);
  for (int i = 0; i < g.n; ++i) trips.emplace_back(i, i, 1.0);
  for (int ei = 0; ei < ne; ++ei) {
    const NetEdge& e = net.edges[ei];
    const auto& nd = g.nodes[ei];
    const int m = g.cells[ei];
    const double dx = g.dx[ei];
    const double r = net.D * dt / (dx * dx);
    for (int k = 1; k < m; ++k) {
      const int i = nd[k];
      trips.emplace_back(i, i, 2.0 * theta * r);
      trips.emplace_back(i, nd[k - 1], -theta * r);
      trips.emplace_back(i, nd[k + 1], -theta * r);
    }
    const double wa = dt / g.cv[e.a] * net.D / dx;
    const double wb = dt / g.cv[e.b] * net.D / dx;
    trips.emplace_back(e.a, e.a, theta * wa);
    trips.emplace_back(e.a, nd[1], -theta * wa);
    trips.emplace_back(e.b, e.b, theta * wb);
    trips.emplace_back(e.b, nd[m - 1], -theta * wb);
    vc[e.a].push_back({wa, nd[1]});
    vc[e.b].push_back({wb, nd[m - 1]});
  }
  Eigen::SparseMatrix<double> A(g.n, g.n);
  A.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
  solver.compute(A);
  if (solver.info() != Eigen::Success)
    throw SingularSystem("graph stepper factorization failed");

  Eigen::VectorXd rhs(g.n);
  auto build_rhs = [&](double tth) {
    const double et = 1.0 - theta;
    rhs = c;
    for (int ei = 0; ei < ne; ++ei) {
      const NetEdge& e = net.edges[ei];
      const auto& nd = g.nodes[ei];
      const int m = g.cells[ei];
      const double dx = g.dx[ei];
      const double r = net.D * dt / (dx * dx);
      for (int k = 1; k < m; ++k)
        rhs[nd[k]] +=
            et * r * (c[nd[k - 1]] - 2.0 * c[nd[k]] + c[nd[k + 1]]);
      rhs[e.a] += et * (dt / g.cv[e.a]) * net.D / dx * (c[nd[1]] - c[e.a]);
      rhs[e.b] +=
          et * (dt / g.cv[e.b]) * net.D / dx * (c[nd[m - 1]] - c[e.b]);
    }
    for (const Leaf& lf : leaves)
      rhs[lf.v] += dt / g.cv[lf.v] * leaf_value(lf.v, tth);
  };

  auto discrete_mass = [&]() {
    long double accm = 0.0L;
    for (int v = 0; v < nv; ++v)
      accm += static_cast<long double>(g.cv[v]) * c[v];
    for (int ei = 0; ei < ne; ++ei) {
      const auto& nd = g.nodes[ei];
      long double edge_acc = 0.0L;
      for (int k = 1; k < g.cells[ei]; ++k) edge_acc += c[nd[k]];
      accm += edge_acc * g.dx[ei];
    }
    return static_cast<double>(accm);
  };

  std::vector<std::vector<double>> ebuf(ne);
  for (int ei = 0; ei < ne; ++ei) ebuf[ei].resize(g.cells[ei] + 1);
  std::vector<std::vector<ZeroCrossing>> ez(ne), prev_ez(ne);
  // Zero detection uses the global amplitude so quiet far edges cannot turn
  // rounding noise into fake crossings.
  auto scan_zeros = [&]() {
    double gmax = 0.0;
    for (int i = 0; i < g.n; ++i) gmax = std::max(gmax, std::abs(c[i]));
    const double thr = kZeroRel * gmax;
    for (int ei = 0; ei < ne; ++ei) {
      auto& buf = ebuf[ei];
      const auto& nd = g.nodes[ei];
      for (std::size_t k = 0; k < nd.size(); ++k) {
        const double v = c[nd[k]];
        buf[k] = std::abs(v) <= thr ? 0.0 : v;
      }
      ez[ei] = locate_zeros(buf, g.dx[ei]);
    }
    return gmax;
  };

  struct NetRow {
    double M = kNaN, fl = kNaN, fr = kNaN, f = kNaN, mass = 0.0;
    int cpath = 0, ctot = 0;
  };
  auto measure_row = [&]() {
    NetRow row;
    row.mass = discrete_mass();
    for (int ei = 0; ei < ne; ++ei) {
      row.ctot += static_cast<int>(ez[ei].size());
      if (ppos[ei] >= 0) row.cpath += static_cast<int>(ez[ei].size());
    }
    if (row.cpath == 1) {
      for (int ei = 0; ei < ne; ++ei) {
        if (ppos[ei] < 0 || ez[ei].empty()) continue;
        const ZeroCrossing& z = ez[ei][0];
        row.M = mapped(ei, z.position);
        const double dl = net.D * std::abs(z.left_slope);
        const double dr = net.D * std::abs(z.right_slope);
        row.fl = pfwd[ei] ? dl : dr;
        row.fr = pfwd[ei] ? dr : dl;
        row.f = 0.5 * (row.fl + row.fr);
      }
    }
    return row;
  };

  const int nsteps = static_cast<int>(std::ceil(horizon / dt - 1e-9));

  NetworkTrace tr;
  tr.dt = dt;
  tr.theta = theta;
  tr.horizon = nsteps * dt;
  tr.path_len = plen;

  auto record = [&](double t, const NetRow& row, double cum) {
    tr.times.push_back(t);
    tr.M.push_back(row.M);
    tr.F_left.push_back(row.fl);
    tr.F_right.push_back(row.fr);
    tr.F.push_back(row.f);
    tr.cumF.push_back(cum);
    tr.zero_count_path.push_back(row.cpath);
    tr.zero_count_total.push_back(row.ctot);
    tr.mass_total.push_back(row.mass);
  };

  double gmax = scan_zeros();
  NetRow row = measure_row();
  double cum = 0.0;
  record(0.0, row, cum);

  auto leaf_zone = [&](std::size_t li) {
    const Leaf& lf = leaves[li];
    const double L = net.edges[lf.edge].length;
    for (const ZeroCrossing& z : ez[lf.edge]) {
      const double d = lf.at_a ? z.position : L - z.position;
      if (d <= g.dx[lf.edge]) return true;
    }
    return false;
  };

  std::vector<char> in_zone(leaves.size(), 0);
  std::vector<int> lsign(leaves.size(), 0);
  {
    const double band = kDeadbandRel * std::max(gmax, 1e-300);
    for (std::size_t li = 0; li < leaves.size(); ++li) {
      const double v = c[leaves[li].v];
      if (std::abs(v) > band) lsign[li] = v > 0.0 ? 1 : -1;
      in_zone[li] = leaf_zone(li) ? 1 : 0;
    }
  }

  double prev_f = row.f;
  int prev_tot = row.ctot;
  prev_ez = ez;

  for (int step = 1; step <= nsteps; ++step) {
    const double t0 = (step - 1) * dt;
    const double tth = t0 + theta * dt;
    const double t = step * dt;
    const double mass_before = row.mass;
    double jsum = 0.0;
    for (const Leaf& lf : leaves) jsum += leaf_value(lf.v, tth);

    build_rhs(tth);
    c = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
      throw Error("graph stepper solve failed");

    // Residual of the implicit vertex rows: the discrete junction
    // flux-conservation statement for this step.
    for (int v = 0; v < nv; ++v) {
      double wsum = 0.0, lhs = 0.0, scale = 0.0;
      for (const VCouple& cp : vc[v]) {
        wsum += cp.w;
        lhs -= theta * cp.w * c[cp.other];
        scale += theta * cp.w * std::abs(c[cp.other]);
      }
      lhs += (1.0 + theta * wsum) * c[v];
      scale += (1.0 + theta * wsum) * std::abs(c[v]) + std::abs(rhs[v]);
      if (scale > 0.0)
        tr.max_junction_residual = std::max(tr.max_junction_residual,
                                            std::abs(lhs - rhs[v]) / scale);
    }

    gmax = scan_zeros();
    row = measure_row();

    const double defect = std::abs(row.mass - mass_before - dt * jsum);
    tr.max_mass_step_error = std::max(tr.max_mass_step_error, defect);
    if (!std::isfinite(row.mass))
      throw Error("graph state turned non-finite at t = " + std::to_string(t));

    if (std::isfinite(prev_f) && std::isfinite(row.f))
      cum += 0.5 * dt * (prev_f + row.f);
    else if (std::isfinite(prev_f))
      cum += 0.5 * dt * prev_f;
    else if (std::isfinite(row.f))
      cum += 0.5 * dt * row.f;
    prev_f = row.f;

    if (row.ctot > prev_tot) {
      // First appearance of any zero is front formation, not a branch:
      // branch events mark an existing front splitting.
      if (prev_tot > 0)
        for (int ei = 0; ei < ne; ++ei)
          if (ez[ei].size() > prev_ez[ei].size())
            tr.events.push_back(
                {EventKind::front_branch, t,
                 mapped(ei, farthest_from(ez[ei], prev_ez[ei]))});
    } else if (row.ctot < prev_tot) {
      for (int ei = 0; ei < ne; ++ei) {
        if (prev_ez[ei].size() <= ez[ei].size()) continue;
        const double pv = farthest_from(prev_ez[ei], ez[ei]);
        // A vanish right next to a leaf, with no survivor in between, is
        // the front leaving through that wall; anything else is an
        // interior merge (junction hand-offs keep the total unchanged and
        // never reach this branch).
        int hit = -1;
        for (std::size_t li = 0; li < leaves.size(); ++li) {
          const Leaf& lf = leaves[li];
          if (lf.edge != ei) continue;
          const double L = net.edges[ei].length;
          const double end_x = lf.at_a ? 0.0 : L;
          const double band = std::max(5.0 * g.dx[ei], 0.1 * L);
          if (std::abs(pv - end_x) > band) continue;
          bool clear = true;
          for (const ZeroCrossing& z : ez[ei])
            if ((lf.at_a && z.position < pv) ||
                (!lf.at_a && z.position > pv))
              clear = false;
          if (clear) {
            hit = static_cast<int>(li);
            break;
          }
        }
        if (hit >= 0) {
          if (!in_zone[hit])
            tr.events.push_back(
                {EventKind::boundary_hit, t, vcoord[leaves[hit].v]});
          if (!std::isfinite(tr.t_c)) tr.t_c = t;
        } else {
          tr.events.push_back({EventKind::front_merge, t, mapped(ei, pv)});
        }
      }
    }

    for (std::size_t li = 0; li < leaves.size(); ++li) {
      const bool zn = leaf_zone(li);
      if (zn && !in_zone[li]) {
        tr.events.push_back(
            {EventKind::boundary_hit, t, vcoord[leaves[li].v]});
        if (!std::isfinite(tr.t_c)) tr.t_c = t;
      }
      in_zone[li] = zn ? 1 : 0;
    }

    const double band = kDeadbandRel * std::max(gmax, 1e-300);
    for (std::size_t li = 0; li < leaves.size(); ++li) {
      const double v = c[leaves[li].v];
      if (std::abs(v) > band) {
        const int sgn = v > 0.0 ? 1 : -1;
        if (lsign[li] != 0 && sgn != lsign[li])
          tr.events.push_back({EventKind::sign_change_at_boundary, t,
                               vcoord[leaves[li].v]});
        lsign[li] = sgn;
      }
    }

    prev_tot = row.ctot;
    prev_ez = ez;
    if (step % grid.record_every == 0 || step == nsteps) record(t, row, cum);
  }
  return tr;
}

}  // namespace frontmix
