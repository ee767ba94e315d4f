#pragma once

#include <cmath>
#include <complex>
#include <limits>

namespace frontmix::detail {

// exp(z) - 1 with small-|z| series; complex counterpart of std::expm1.
inline std::complex<double> expm1c(std::complex<double> z) {
  if (std::abs(z) < 1e-4)
    return z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)));
  return std::exp(z) - 1.0;
}

// Exact integral of t^k e^{-z t} over [t0, t1]; t1 may be +inf (needs
// Re z > 0). Series branch near z = 0 avoids cancellation and covers z = 0.
inline std::complex<double> tk_exp_integral(int k, std::complex<double> z,
                                            double t0, double t1) {
  using cplx = std::complex<double>;
  const bool infinite = std::isinf(t1);
  if (!infinite && !(t1 > t0)) return 0.0;
  if (!infinite && std::abs(z) * std::max(std::abs(t0), std::abs(t1)) < 0.5) {
    cplx acc = 0.0;
    cplx zpow = 1.0;
    double fact = 1.0;
    for (int m = 0; m < 60; ++m) {
      if (m > 0) {
        zpow *= -z;
        fact *= m;
      }
      const int e = k + m + 1;
      const cplx term =
          zpow / fact * (std::pow(t1, e) - std::pow(t0, e)) / double(e);
      acc += term;
      if (std::abs(term) < 1e-18 * (std::abs(acc) + 1e-300)) break;
    }
    return acc;
  }
  auto antider = [&](double t) {
    // minus the antiderivative: F(t) = e^{-zt} sum_j k!/(k-j)! t^{k-j}/z^{j+1}
    cplx s = 0.0;
    cplx zp = z;
    double fr = 1.0;
    for (int j = 0; j <= k; ++j) {
      s += fr * std::pow(t, k - j) / zp;
      zp *= z;
      fr *= (k - j);
    }
    return std::exp(-z * t) * s;
  };
  if (infinite) return antider(t0);
  return antider(t0) - antider(t1);
}

}  // namespace frontmix::detail
