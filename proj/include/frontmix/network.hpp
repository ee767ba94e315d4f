#pragma once

#include <complex>
#include <limits>
#include <vector>

#include "frontmix/flux_schedule.hpp"
#include "frontmix/laplace.hpp"
#include "frontmix/piecewise.hpp"
#include "frontmix/simulator.hpp"

namespace frontmix {

// An edge of a metric graph. The initial signed field rho lives in the
// edge-local coordinate running from vertex a (x = 0) to vertex b
// (x = length).
struct NetEdge {
  int a = 0;
  int b = 0;
  double length = 0.0;
  PiecewiseDensity rho;
};

// A finite tree-like metric graph with a marked observation path.
//
// Vertices are the integers 0..nv-1; their kind is implied by degree (one
// incident edge: leaf, otherwise junction). The path is an ordered list of
// edge indices forming a simple walk; source_points are path-global
// coordinates that must land on path vertices (junction images or the walk's
// endpoints). Leaves carry zero flux unless a schedule is attached in
// leaf_flux (indexed by vertex; empty list means no boundary fluxes
// anywhere), with the same sign convention as the interval problem: a
// positive schedule injects mass, d/dt of total mass is the sum of leaf
// schedules.
struct NetworkSpec {
  int nv = 0;
  std::vector<NetEdge> edges;
  std::vector<int> path;
  std::vector<double> source_points;
  double D = 1.0;
  std::vector<FluxSchedule> leaf_flux;

  // Structural checks: ids in range, positive lengths, connected, loop-free,
  // path a simple walk, source points on path vertices, fluxes only at
  // leaves. Throws ConfigError.
  void validate() const;

  int degree(int v) const;
  bool is_leaf(int v) const { return degree(v) == 1; }
  double total_length() const;
  double total_signed_mass() const;

  // The walk's vertices v_0..v_k (one more than path edges) and their
  // path-global coordinates.
  std::vector<int> path_vertices() const;
  std::vector<double> path_offsets() const;
  double path_length() const;

  // Vertex holding a given path coordinate (within tolerance), or -1.
  int vertex_at_path(double x) const;
};

// T-tree fractal: iteration 1 is a single edge of base_length; each later
// iteration attaches, at attach_frac along every edge of the previous
// iteration, a branch of length_ratio times that edge's length (attachment
// points become degree-3 junctions, so edges are stored subdivided). With
// the default midpoint / half-length convention, after k iterations all
// 3^(k-1) edges share the length base_length / 2^(k-1). The path is the
// original base line; source points mark its subdivision vertices and
// endpoints.
NetworkSpec build_ttree(int iterations, double base_length,
                        double attach_frac = 0.5, double length_ratio = 0.5);

// Adds an instantaneous release at a vertex: total signed mass spread as
// cell-averaged blocks of the given width on every incident edge (density
// mass / (degree * width) per arm). Throws ConfigError when width exceeds
// half of an incident edge.
void add_release(NetworkSpec& net, int vertex, double mass, double width);

// Transform-domain solution on the graph for one abscissa. Unknowns are the
// vertex values p_v; on each edge the solution is the nodal-basis
// interpolant between its endpoint values plus a zero-flux particular part
// carrying the edge's initial data, so continuity holds by construction and
// the assembled system expresses flux conservation at every vertex. Holds a
// reference to the spec: the network must outlive the solution.
template <class S>
class JunctionSolution {
 public:
  JunctionSolution(const NetworkSpec& net, S s);

  S s() const { return s_; }
  S q() const { return q_; }
  const std::vector<S>& p() const { return p_; }

  // Largest componentwise-scaled residual of the vertex equations.
  double residual() const { return residual_; }

  // Edge-local evaluation, 0 <= x <= edge length.
  S value(int edge, double x) const;
  S derivative(int edge, double x) const;

 private:
  const NetworkSpec* net_;
  S s_{};
  S q_{};
  std::vector<S> p_;
  std::vector<LaplaceField<S>> part_;  // per edge, zero-flux particular
  std::vector<S> va_, vb_;             // homogeneous endpoint weights
  double residual_ = 0.0;
};

JunctionSolution<double> laplace_solve(const NetworkSpec& net, double s);
JunctionSolution<std::complex<double>> laplace_solve_c(
    const NetworkSpec& net, std::complex<double> s);

// Generating function of the mixing flux for the path interval between
// consecutive source points x_i and x_{i+1} (interval index i); the interval
// length enters the hyperbolic weights. The interval interior must contain
// no junction. Initial data inside it is permitted but makes the
// two-endpoint formula approximate, so narrow-release layouts keep such
// data within a release width of the endpoints. f is the printed sqrt(s)
// form; f_dim carries the sqrt(D) dimensional companion (they coincide for
// D = 1). The radicand equals f^2, kept in overflow-safe scaled form; a
// negative value throws NegativeRadicand (the transformed field has no zero
// inside the interval at this s).
struct NetGenResult {
  double f = std::numeric_limits<double>::quiet_NaN();
  double f_dim = std::numeric_limits<double>::quiet_NaN();
  double radicand = 0.0;
};

NetGenResult network_generating(const NetworkSpec& net, int interval, double s);
// Contour variant for inversion: principal branch, agrees with the real
// routine wherever the radicand is positive.
std::complex<double> network_generating_c(const NetworkSpec& net, int interval,
                                          std::complex<double> s);

// Grid for the graph time stepper. dx is a target spacing (each edge gets
// the nearest conforming spacing, junction nodes land on vertices); dt <= dx
// is enforced as in the interval simulator. Non-positive entries pick
// defaults scaled to the path length.
struct NetGrid {
  double dx = 0.0;
  double dt = 0.0;
  double theta = 0.5;
  int record_every = 1;
};

// Trace of a graph run. Path quantities use the path-global coordinate; M
// and F are NaN whenever the path does not carry exactly one zero. Events
// off the path are reported at the path coordinate of the junction through
// which the containing subtree attaches. zero_count_total counts zeros on
// every edge of the graph, zero_count_path only those on the path.
struct NetworkTrace {
  std::vector<double> times;
  std::vector<double> M;
  std::vector<double> F_left, F_right, F;
  std::vector<double> cumF;
  std::vector<int> zero_count_path, zero_count_total;
  std::vector<double> mass_total;
  std::vector<SimEvent> events;

  double t_c = std::numeric_limits<double>::quiet_NaN();
  double dt = 0.0;
  double theta = 0.5;
  double horizon = 0.0;
  double path_len = 0.0;

  // Worst per-step defect of mass(t+dt) - mass(t) = dt * sum of leaf fluxes
  // at the theta point.
  double max_mass_step_error = 0.0;
  // Worst componentwise-scaled residual of the implicit vertex rows, the
  // discrete junction flux-conservation statement.
  double max_junction_residual = 0.0;
};

NetworkTrace run_network(const NetworkSpec& net, const NetGrid& grid,
                         double horizon);

}  // namespace frontmix
