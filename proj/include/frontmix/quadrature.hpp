#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <type_traits>
#include <vector>

namespace frontmix {

namespace detail {

// 20-point Gauss-Legendre rule on [-1,1], positive half; nodes are symmetric.
inline constexpr double kGL20Nodes[10] = {
    0.0765265211334973, 0.2277858511416451, 0.3737060887154195,
    0.5108670019508271, 0.6360536807265150, 0.7463319064601508,
    0.8391169718222188, 0.9122344282513259, 0.9639719272779138,
    0.9931285991850949};
inline constexpr double kGL20Weights[10] = {
    0.1527533871307258, 0.1491729864726037, 0.1420961093183820,
    0.1316886384491766, 0.1181945319615184, 0.1019301198172404,
    0.0832767415767048, 0.0626720483341091, 0.0406014298003869,
    0.0176140071391521};

template <class T>
double abs_of(const T& v) {
  if constexpr (std::is_same_v<T, std::complex<double>>) {
    return std::abs(v);
  } else {
    return std::abs(static_cast<double>(v));
  }
}

}  // namespace detail

template <class F>
auto gauss20(F&& f, double a, double b) -> decltype(f(a)) {
  using R = decltype(f(a));
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  R sum = R{};
  for (int i = 0; i < 10; ++i) {
    const double dx = half * detail::kGL20Nodes[i];
    sum += detail::kGL20Weights[i] * (f(mid + dx) + f(mid - dx));
  }
  return sum * half;
}

struct AdaptOpts {
  double rel_tol = 1e-13;
  // Absolute floor used when the integral itself is ~0; pass the natural
  // magnitude of the problem (e.g. total mass) times rel_tol.
  double abs_floor = 0.0;
  int max_depth = 12;
  // Pre-split [a,b] into this many equal panels before refining; lets the
  // caller resolve known oscillation/decay scales up front.
  int init_panels = 1;
};

namespace detail {

template <class F, class R>
void adapt_rec(F& f, double a, double b, const R& whole, double tol, int depth,
               int max_depth, R& acc) {
  const double m = 0.5 * (a + b);
  const R left = gauss20(f, a, m);
  const R right = gauss20(f, m, b);
  const R refined = left + right;
  if (depth >= max_depth || abs_of(refined - whole) <= tol) {
    acc += refined;
    return;
  }
  adapt_rec(f, a, m, left, 0.5 * tol, depth + 1, max_depth, acc);
  adapt_rec(f, m, b, right, 0.5 * tol, depth + 1, max_depth, acc);
}

}  // namespace detail

// Adaptive Gauss-Legendre integration of f over [a,b].
template <class F>
auto integrate(F&& f, double a, double b, const AdaptOpts& opts = {})
    -> decltype(f(a)) {
  using R = decltype(f(a));
  if (!(b > a)) return R{};
  const int n0 = opts.init_panels < 1 ? 1 : opts.init_panels;
  std::vector<R> coarse(n0);
  double scale = 0.0;
  const double w = (b - a) / n0;
  for (int i = 0; i < n0; ++i) {
    coarse[i] = gauss20(f, a + i * w, a + (i + 1) * w);
    scale += detail::abs_of(coarse[i]);
  }
  const double tol =
      std::max(opts.abs_floor, opts.rel_tol * std::max(scale, 0.0));
  R acc{};
  for (int i = 0; i < n0; ++i) {
    detail::adapt_rec(f, a + i * w, a + (i + 1) * w, coarse[i],
                      std::max(tol / n0, 0.0), 0, opts.max_depth, acc);
  }
  return acc;
}

}  // namespace frontmix
