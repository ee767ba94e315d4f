#include "frontmix/flux_schedule.hpp"

#include <algorithm>
#include <cmath>

#include "frontmix/errors.hpp"
#include "frontmix/exp_kernel.hpp"
#include "frontmix/piecewise.hpp"
#include "frontmix/quadrature.hpp"

namespace frontmix {

namespace {

using cplx = std::complex<double>;
using detail::tk_exp_integral;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Pchip {
  std::vector<double> t, v, d;  // knots, values, slopes

  static Pchip build(const std::vector<double>& times,
                     const std::vector<double>& values) {
    Pchip p;
    p.t = times;
    p.v = values;
    const std::size_t n = times.size();
    p.d.assign(n, 0.0);
    if (n == 2) {
      const double slope = (values[1] - values[0]) / (times[1] - times[0]);
      p.d[0] = p.d[1] = slope;
      return p;
    }
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = times[i + 1] - times[i];
      delta[i] = (values[i + 1] - values[i]) / h[i];
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) {
        p.d[i] = 0.0;
      } else {
        const double w1 = 2.0 * h[i] + h[i - 1];
        const double w2 = h[i] + 2.0 * h[i - 1];
        p.d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
      }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
      double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (d * d0 <= 0.0) return 0.0;
      if (d0 * d1 < 0.0 && std::abs(d) > 3.0 * std::abs(d0)) return 3.0 * d0;
      return d;
    };
    p.d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    p.d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    return p;
  }

  // Cubic coefficients in u = (x - t[i]) / h on interval i.
  void cubic(std::size_t i, double c[4]) const {
    const double h = t[i + 1] - t[i];
    const double v0 = v[i], v1 = v[i + 1];
    const double m0 = d[i] * h, m1 = d[i + 1] * h;
    c[0] = v0;
    c[1] = m0;
    c[2] = -3.0 * v0 + 3.0 * v1 - 2.0 * m0 - m1;
    c[3] = 2.0 * v0 - 2.0 * v1 + m0 + m1;
  }

  double eval(double x) const {
    if (x <= t.front() || x >= t.back()) {
      if (x == t.front()) return v.front();
      if (x == t.back()) return v.back();
      return 0.0;
    }
    const std::size_t i =
        std::upper_bound(t.begin(), t.end(), x) - t.begin() - 1;
    double c[4];
    cubic(i, c);
    const double u = (x - t[i]) / (t[i + 1] - t[i]);
    return ((c[3] * u + c[2]) * u + c[1]) * u + c[0];
  }

  // Exact integral of x^k * pchip(x) over [lo, hi] (clipped to the knot span).
  double moment(int k, double lo, double hi) const {
    lo = std::max(lo, t.front());
    hi = std::min(hi, t.back());
    if (!(hi > lo)) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
      const double a = std::max(lo, t[i]);
      const double b = std::min(hi, t[i + 1]);
      if (!(b > a)) continue;
      const double h = t[i + 1] - t[i];
      double c[4];
      cubic(i, c);
      const double ua = (a - t[i]) / h, ub = (b - t[i]) / h;
      // integral (t_i + h u)^k c(u) h du over [ua, ub]
      for (int j = 0; j < 4; ++j) {
        if (c[j] == 0.0) continue;
        for (int m = 0; m <= k; ++m) {
          const int e = j + m + 1;
          acc += c[j] * binomial(k, m) * std::pow(t[i], k - m) *
                 std::pow(h, m + 1) * (std::pow(ub, e) - std::pow(ua, e)) / e;
        }
      }
    }
    return acc;
  }
};

Pchip pchip_of(const FluxTerm& term) { return Pchip::build(term.times, term.values); }

double term_scale(const FluxTerm& term) {
  if (term.kind == FluxTerm::Kind::tabulated) {
    double m = 0.0;
    for (double v : term.values) m = std::max(m, std::abs(v));
    return m;
  }
  return std::abs(term.amplitude);
}

}  // namespace

FluxSchedule::FluxSchedule(std::vector<FluxTerm> terms)
    : terms_(std::move(terms)) {
  terms_.erase(std::remove_if(terms_.begin(), terms_.end(),
                              [](const FluxTerm& t) {
                                return t.kind != FluxTerm::Kind::tabulated &&
                                       t.amplitude == 0.0;
                              }),
               terms_.end());
  double scale = 0.0;
  for (const FluxTerm& term : terms_) {
    if (term.kind == FluxTerm::Kind::tabulated) {
      if (term.times.size() < 2 || term.times.size() != term.values.size())
        throw ConfigError("tabulated flux needs matching times/values, >= 2");
      if (term.times.front() < 0.0)
        throw ConfigError("tabulated flux times must be >= 0");
      for (std::size_t i = 1; i < term.times.size(); ++i)
        if (!(term.times[i] > term.times[i - 1]))
          throw ConfigError("tabulated flux times must increase");
      effective_end_ = std::max(effective_end_, term.times.back());
    } else {
      if (!std::isfinite(term.amplitude) || !std::isfinite(term.rate))
        throw ConfigError("non-finite flux parameters");
      if (term.t0 < 0.0 || !(term.t1 > term.t0))
        throw ConfigError("flux window must satisfy 0 <= t0 < t1");
      if (std::isinf(term.t1) && term.rate <= 0.0)
        throw DivergentFluxError(
            "flux term with non-decaying tail has infinite |J| integral");
      const double end = std::isinf(term.t1)
                             ? term.t0 + 40.0 / term.rate
                             : term.t1;
      effective_end_ = std::max(effective_end_, end);
    }
    scale = std::max(scale, term_scale(term));
  }

  moment0_ = compute_moment(0);
  moment1_ = compute_moment(1);
  moment2_ = compute_moment(2);

  // Continuity: jumps at window edges or nonzero tabulated endpoints.
  const double jump_tol = 1e-12 * std::max(1.0, scale);
  for (const FluxTerm& term : terms_) {
    if (term.kind == FluxTerm::Kind::tabulated) {
      if (std::abs(term.values.front()) > jump_tol && term.times.front() > 0.0)
        continuous_ = false;
      if (std::abs(term.values.back()) > jump_tol) continuous_ = false;
      continue;
    }
    auto raw = [&](double t) {
      double v = term.amplitude * std::exp(-term.rate * t);
      if (term.kind == FluxTerm::Kind::damped_sinusoid)
        v *= std::sin(term.omega * t + term.phase);
      return v;
    };
    if (term.t0 > 0.0 && std::abs(raw(term.t0)) > jump_tol) continuous_ = false;
    if (!std::isinf(term.t1) && std::abs(raw(term.t1)) > jump_tol)
      continuous_ = false;
  }

  // |J| of the summed schedule: exact segment integrals between sign changes.
  if (!terms_.empty()) {
    std::vector<double> cuts{0.0, effective_end_};
    for (const FluxTerm& term : terms_) {
      if (term.kind == FluxTerm::Kind::tabulated) {
        for (double t : term.times)
          if (t > 0.0 && t < effective_end_) cuts.push_back(t);
      } else {
        if (term.t0 > 0.0 && term.t0 < effective_end_) cuts.push_back(term.t0);
        if (!std::isinf(term.t1) && term.t1 < effective_end_)
          cuts.push_back(term.t1);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<double> bounds;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double a = cuts[c], b = cuts[c + 1];
      bounds.push_back(a);
      const int n = 2048;
      double prev_t = a + (b - a) * 1e-12;
      double prev_v = value(prev_t);
      for (int i = 1; i <= n; ++i) {
        const double t = (i == n) ? b - (b - a) * 1e-12 : a + (b - a) * i / n;
        const double v = value(t);
        if (prev_v * v < 0.0) {
          double lo = prev_t, hi = t, vlo = prev_v;
          for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double vm = value(mid);
            if (vlo * vm <= 0.0) {
              hi = mid;
            } else {
              lo = mid;
              vlo = vm;
            }
          }
          bounds.push_back(0.5 * (lo + hi));
        }
        prev_t = t;
        prev_v = v;
      }
    }
    bounds.push_back(effective_end_);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
      double seg = 0.0;
      for (const FluxTerm& term : terms_) {
        // Exact integral of the term over [bounds[i], bounds[i+1]].
        const double lo = bounds[i], hi = bounds[i + 1];
        if (term.kind == FluxTerm::Kind::tabulated) {
          seg += pchip_of(term).moment(0, lo, hi);
        } else {
          const double a = std::max(lo, term.t0);
          const double b = std::min(hi, term.t1);
          if (!(b > a)) continue;
          if (term.kind == FluxTerm::Kind::exponential) {
            seg += term.amplitude *
                   tk_exp_integral(0, cplx(term.rate, 0.0), a, b).real();
          } else {
            const cplx e = std::exp(cplx(0.0, term.phase)) *
                           tk_exp_integral(0, cplx(term.rate, -term.omega), a, b);
            seg += term.amplitude * e.imag();
          }
        }
      }
      acc += std::abs(seg);
    }
    // Tail beyond the effective end (analytically negligible, added for form).
    for (const FluxTerm& term : terms_) {
      if (term.kind != FluxTerm::Kind::tabulated && std::isinf(term.t1)) {
        acc += std::abs(term.amplitude) *
               std::abs(tk_exp_integral(0, cplx(term.rate, 0.0),
                                        effective_end_, kInf));
      }
    }
    abs_integral_ = acc;
  }

  if (!std::isfinite(abs_integral_))
    throw DivergentFluxError("|J| integral is not finite");
}

FluxSchedule FluxSchedule::exponential(double amplitude, double rate) {
  FluxTerm t;
  t.kind = FluxTerm::Kind::exponential;
  t.amplitude = amplitude;
  t.rate = rate;
  return FluxSchedule({t});
}

bool FluxSchedule::is_zero() const { return terms_.empty(); }

double FluxSchedule::value(double t) const {
  if (t < 0.0) return 0.0;
  double v = 0.0;
  for (const FluxTerm& term : terms_) {
    if (term.kind == FluxTerm::Kind::tabulated) {
      v += pchip_of(term).eval(t);
      continue;
    }
    if (t < term.t0 || t >= term.t1) continue;
    double x = term.amplitude * std::exp(-term.rate * t);
    if (term.kind == FluxTerm::Kind::damped_sinusoid)
      x *= std::sin(term.omega * t + term.phase);
    v += x;
  }
  return v;
}

std::complex<double> FluxSchedule::laplace_c(std::complex<double> s) const {
  cplx acc = 0.0;
  for (const FluxTerm& term : terms_) {
    switch (term.kind) {
      case FluxTerm::Kind::exponential:
        acc += term.amplitude *
               tk_exp_integral(0, s + term.rate, term.t0, term.t1);
        break;
      case FluxTerm::Kind::damped_sinusoid: {
        // sin written as complex exponentials; works for complex s too.
        const cplx z = s + term.rate;
        const cplx up = std::exp(cplx(0.0, term.phase)) *
                        tk_exp_integral(0, z - cplx(0.0, term.omega), term.t0,
                                        term.t1);
        const cplx dn = std::exp(cplx(0.0, -term.phase)) *
                        tk_exp_integral(0, z + cplx(0.0, term.omega), term.t0,
                                        term.t1);
        acc += term.amplitude * (up - dn) / cplx(0.0, 2.0);
        break;
      }
      case FluxTerm::Kind::tabulated: {
        const Pchip p = pchip_of(term);
        const double a = term.times.front(), b = term.times.back();
        const double speed = std::abs(s.real()) + std::abs(s.imag());
        AdaptOpts opts;
        opts.rel_tol = 1e-12;
        opts.init_panels = std::min(
            256, std::max(8, static_cast<int>((b - a) * speed / 1.5) + 1));
        acc += integrate([&](double t) { return std::exp(-s * t) * p.eval(t); },
                         a, b, opts);
        break;
      }
    }
  }
  return acc;
}

double FluxSchedule::compute_moment(int k) const {
  double acc = 0.0;
  for (const FluxTerm& term : terms_) {
    switch (term.kind) {
      case FluxTerm::Kind::exponential:
        acc += term.amplitude *
               tk_exp_integral(k, cplx(term.rate, 0.0), term.t0, term.t1)
                   .real();
        break;
      case FluxTerm::Kind::damped_sinusoid: {
        const cplx e = std::exp(cplx(0.0, term.phase)) *
                       tk_exp_integral(k, cplx(term.rate, -term.omega),
                                       term.t0, term.t1);
        acc += term.amplitude * e.imag();
        break;
      }
      case FluxTerm::Kind::tabulated:
        acc += pchip_of(term).moment(k, term.times.front(), term.times.back());
        break;
    }
  }
  return acc;
}

FluxSchedule FluxSchedule::negated() const {
  std::vector<FluxTerm> out = terms_;
  for (FluxTerm& term : out) {
    if (term.kind == FluxTerm::Kind::tabulated) {
      for (double& v : term.values) v = -v;
    } else {
      term.amplitude = -term.amplitude;
    }
  }
  return FluxSchedule(std::move(out));
}

}  // namespace frontmix
