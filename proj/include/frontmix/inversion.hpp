#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "frontmix/problem.hpp"

namespace frontmix {

// Numerical inverse Laplace transform. Two independent algorithms are kept on
// purpose: Gaver-Stehfest samples the transform on the real axis only and is
// the method used for the headline comparison; Euler summation samples a
// shifted complex contour and cross-checks it, since Stehfest can fail
// silently on oscillatory transforms.
enum class InversionKind { gaver_stehfest, euler_summation };

struct InversionMethod {
  InversionKind kind = InversionKind::gaver_stehfest;
  int terms = 14;    // Stehfest term count, even, in [8, 20]
  int euler_m = 20;  // Euler summation M; 2M+1 contour evaluations

  static InversionMethod stehfest(int terms = 14) {
    return {InversionKind::gaver_stehfest, terms, 20};
  }
  static InversionMethod euler(int m = 20) {
    return {InversionKind::euler_summation, 14, m};
  }
};

// Stehfest weights for an even term count; computed once per count from exact
// integer factorials, accumulated in long double, then cached.
const std::vector<long double>& stehfest_weights(int terms);

// Real-axis transforms. Euler summation cannot run on a real-only function
// and reports AbscissaError.
double invert(const std::function<double(double)>& fn, double t,
              const InversionMethod& m = {});

// Complex-evaluable transforms work with both methods.
double invert(
    const std::function<std::complex<double>(std::complex<double>)>& fn,
    double t, const InversionMethod& m = {});

// L^-1[s^-1 f(s)] on a grid of positive times: the cumulative mixing flux.
// A negative radicand at a required abscissa is surfaced as
// CriteriaFailedAtAbscissa, never clamped.
std::vector<double> invert_cumulative(const ProblemSpec& p,
                                      const std::vector<double>& t_grid,
                                      const InversionMethod& m = {});

}  // namespace frontmix
