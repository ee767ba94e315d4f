#include "frontmix/problem.hpp"

#include <algorithm>
#include <cmath>

#include "frontmix/errors.hpp"

namespace frontmix {

namespace {
constexpr double kEdgeSlack = 1e-12;
}

void ProblemSpec::validate() const {
  if (!(ell > 0.0) || !std::isfinite(ell))
    throw ConfigError("domain length must be positive and finite");
  if (!(D > 0.0) || !std::isfinite(D))
    throw ConfigError("diffusion coefficient must be positive and finite");
  if (!(v >= 0.0) || !(v <= 1.0)) throw ConfigError("v must lie in [0,1]");

  rho_a.check_nonnegative("rho_a");
  rho_b.check_nonnegative("rho_b");

  const double slack = kEdgeSlack * std::max(1.0, ell);
  for (const PiecewiseDensity* d : {&rho_a, &rho_b}) {
    if (d->empty()) continue;
    if (d->support_lo() < -slack || d->support_hi() > ell + slack)
      throw ConfigError("density support extends outside the domain");
  }

  if (fronts.empty()) {
    // Single-front layout: closures of the supports may touch, the open
    // interiors may not cross.
    if (!rho_a.empty() && !rho_b.empty() &&
        rho_b.support_lo() < rho_a.support_hi() - slack)
      throw SeparationError("B support starts left of the A support's end");
  } else {
    if (fronts.size() < 2)
      throw ConfigError("a multifront layout needs at least two blocks");
    for (std::size_t i = 0; i < fronts.size(); ++i) {
      const FrontBlock& b = fronts[i];
      if (!(b.hi > b.lo)) throw ConfigError("front block has empty interval");
      if (b.lo < -slack || b.hi > ell + slack)
        throw ConfigError("front block extends outside the domain");
      if (i > 0) {
        if (fronts[i].species_a == fronts[i - 1].species_a)
          throw ConfigError("front blocks must alternate species");
        if (fronts[i].lo < fronts[i - 1].hi - slack)
          throw SeparationError("front blocks overlap");
      }
    }
    // Every piece of each density must sit inside a block of its species.
    auto covered = [&](const Piece& piece, bool species_a) {
      for (const FrontBlock& b : fronts)
        if (b.species_a == species_a && piece.a >= b.lo - slack &&
            piece.b <= b.hi + slack)
          return true;
      return false;
    };
    for (const Piece& piece : rho_a.pieces())
      if (!covered(piece, true))
        throw ConfigError("rho_a piece not covered by a declared A block");
    for (const Piece& piece : rho_b.pieces())
      if (!covered(piece, false))
        throw ConfigError("rho_b piece not covered by a declared B block");
  }

  if (normalized) {
    if (std::abs(rho_a.mass() - 1.0) > 1e-9 ||
        std::abs(rho_b.mass() - 1.0) > 1e-9)
      throw ConfigError("normalized flag requires unit-mass densities");
  }
}

std::vector<FrontBlock> ProblemSpec::blocks() const {
  if (!fronts.empty()) return fronts;
  std::vector<FrontBlock> out;
  if (!rho_a.empty())
    out.push_back({true, rho_a.support_lo(), rho_a.support_hi()});
  if (!rho_b.empty())
    out.push_back({false, rho_b.support_lo(), rho_b.support_hi()});
  return out;
}

double ProblemSpec::eval_initial(double x) const {
  if (x < 0.0 || x > ell)
    throw DomainError("position outside [0, ell]");
  return rho_a.value(x) - v * rho_b.value(x);
}

PiecewiseDensity ProblemSpec::initial_field() const {
  return PiecewiseDensity::merged(rho_a, rho_b.scaled(-v));
}

double ProblemSpec::mass_balance_residual() const {
  return rho_a.mass() - v * rho_b.mass() + j1.integral() + j2.integral();
}

double ProblemSpec::gap_lo() const {
  if (rho_a.empty()) return 0.0;
  return rho_a.support_hi();
}

double ProblemSpec::gap_hi() const {
  if (rho_b.empty()) return ell;
  return rho_b.support_lo();
}

ProblemSpec ProblemSpec::mirrored() const {
  ProblemSpec m;
  m.ell = ell;
  m.D = D;
  m.v = 1.0;
  m.rho_a = rho_b.scaled(v).mirrored(ell);
  m.rho_b = rho_a.mirrored(ell);
  m.j1 = j2.negated();
  m.j2 = j1.negated();
  m.dirichlet = dirichlet;
  for (auto it = fronts.rbegin(); it != fronts.rend(); ++it)
    m.fronts.push_back({!it->species_a, ell - it->hi, ell - it->lo});
  return m;
}

}  // namespace frontmix
