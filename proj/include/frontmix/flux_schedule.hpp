#pragma once

#include <complex>
#include <limits>
#include <vector>

namespace frontmix {

// One additive term of a boundary flux schedule J(t), t >= 0.
//   exponential:     amplitude * exp(-rate*t)
//   damped_sinusoid: amplitude * exp(-rate*t) * sin(omega*t + phase)
//   tabulated:       monotone cubic (PCHIP) through (times, values), zero
//                    outside [times.front(), times.back()]
// Analytic kinds act only on the window [t0, t1); t1 may be +inf.
struct FluxTerm {
  enum class Kind { exponential, damped_sinusoid, tabulated };
  Kind kind = Kind::exponential;
  double amplitude = 0.0;
  double rate = 0.0;
  double omega = 0.0;
  double phase = 0.0;
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  std::vector<double> times, values;
};

class FluxSchedule {
 public:
  FluxSchedule() = default;
  explicit FluxSchedule(std::vector<FluxTerm> terms);

  static FluxSchedule zero() { return FluxSchedule(); }
  static FluxSchedule exponential(double amplitude, double rate);

  bool is_zero() const;
  double value(double t) const;

  // Laplace transform; closed form for analytic kinds, weighted quadrature
  // for tabulated ones. Valid for Re(s) > 0.
  std::complex<double> laplace_c(std::complex<double> s) const;
  double laplace(double s) const { return laplace_c(s).real(); }

  // Cached time moments: integral of t^k J(t) dt over [0,inf), k <= 2,
  // and integral of |J|.
  double integral() const { return moment0_; }
  double t_moment() const { return moment1_; }
  double t2_moment() const { return moment2_; }
  double abs_integral() const { return abs_integral_; }

  // Direct (uncached) moment computation, also used to populate the cache.
  double compute_moment(int k) const;

  bool continuous() const { return continuous_; }
  // Time beyond which the schedule is negligible (~1e-17 of its scale).
  double effective_end() const { return effective_end_; }

  FluxSchedule negated() const;
  const std::vector<FluxTerm>& terms() const { return terms_; }

 private:
  std::vector<FluxTerm> terms_;
  double moment0_ = 0.0, moment1_ = 0.0, moment2_ = 0.0;
  double abs_integral_ = 0.0;
  double effective_end_ = 0.0;
  bool continuous_ = true;
};

}  // namespace frontmix
