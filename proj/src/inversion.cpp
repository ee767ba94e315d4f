#include "frontmix/inversion.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>

#include "frontmix/errors.hpp"
#include "frontmix/laplace.hpp"

namespace frontmix {

namespace {

using cplx = std::complex<double>;

constexpr double kLn2 = 0.69314718055994530942;
constexpr double kPiD = 3.14159265358979323846;

[[noreturn]] void criteria_failure(double s) {
  char buf[96];
  std::snprintf(buf, sizeof buf,
                "generating function invalid (negative radicand) at s=%.6g", s);
  throw CriteriaFailedAtAbscissa(buf, s);
}

long double factorial_ld(int n) {
  long double out = 1;
  for (int i = 2; i <= n; ++i) out *= i;
  return out;
}

std::vector<long double> make_weights(int n) {
  const int half = n / 2;
  std::vector<long double> v(n + 1, 0.0L);
  for (int k = 1; k <= n; ++k) {
    long double acc = 0;
    const int j_lo = (k + 1) / 2;
    const int j_hi = std::min(k, half);
    for (int j = j_lo; j <= j_hi; ++j) {
      long double term = std::pow(static_cast<long double>(j), half);
      term *= factorial_ld(2 * j);
      term /= factorial_ld(half - j);
      term /= factorial_ld(j);
      term /= factorial_ld(j - 1);
      term /= factorial_ld(k - j);
      term /= factorial_ld(2 * j - k);
      acc += term;
    }
    v[k] = ((k + half) % 2 == 0) ? acc : -acc;
  }
  return v;
}

void check_terms(int terms) {
  if (terms % 2 != 0) throw NonEvenTerms("stehfest term count must be even");
  if (terms < 8 || terms > 20)
    throw DomainError(
        "stehfest term count must lie in [8, 20]: weight cancellation "
        "exceeds double-precision headroom beyond that");
}

void check_time(double t) {
  if (!(t > 0) || !std::isfinite(t))
    throw DomainError("inversion time must be positive finite");
}

[[noreturn]] void abscissa_failure(double s, const char* what) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "transform %s at s=%.6g", what, s);
  throw AbscissaError(buf);
}

double stehfest_sum(const std::function<double(double)>& fn, double t,
                    int terms) {
  const auto& v = stehfest_weights(terms);
  long double acc = 0;
  for (int k = 1; k <= terms; ++k) {
    const double s = k * kLn2 / t;
    double value;
    try {
      value = fn(s);
    } catch (const Error&) {
      abscissa_failure(s, "failed");
    }
    if (!std::isfinite(value)) abscissa_failure(s, "not finite");
    acc += v[k] * static_cast<long double>(value);
  }
  return static_cast<double>(acc * kLn2 / t);
}

double euler_sum(const std::function<cplx(cplx)>& fn, double t, int m) {
  if (m < 5 || m > 40)
    throw DomainError("euler summation M must lie in [5, 40]");
  // Binomial-averaged partial sums of the Bromwich cosine series, shifted so
  // the discretization error is about 10^-M/3.
  std::vector<long double> xi(2 * m + 1, 1.0L);
  xi[0] = 0.5L;
  xi[2 * m] = std::pow(2.0L, -m);
  for (int k = 1; k < m; ++k) {
    long double binom = 1;
    for (int i = 0; i < k; ++i) binom = binom * (m - i) / (i + 1);
    xi[2 * m - k] = xi[2 * m - k + 1] + std::pow(2.0L, -m) * binom;
  }
  const long double scale = std::pow(10.0L, m / 3.0L);
  const double beta = m * std::log(10.0) / 3.0;
  long double acc = 0;
  for (int k = 0; k <= 2 * m; ++k) {
    const cplx s(beta / t, kPiD * k / t);
    cplx value;
    try {
      value = fn(s);
    } catch (const Error&) {
      abscissa_failure(beta / t, "failed on the euler contour");
    }
    if (!std::isfinite(value.real()) || !std::isfinite(value.imag()))
      abscissa_failure(beta / t, "not finite on the euler contour");
    const long double omega = ((k % 2 == 0) ? 1.0L : -1.0L) * xi[k];
    acc += omega * static_cast<long double>(value.real());
  }
  return static_cast<double>(scale * acc / t);
}

}  // namespace

const std::vector<long double>& stehfest_weights(int terms) {
  check_terms(terms);
  static std::mutex mu;
  static std::map<int, std::vector<long double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(terms);
  if (it == cache.end()) it = cache.emplace(terms, make_weights(terms)).first;
  return it->second;
}

double invert(const std::function<double(double)>& fn, double t,
              const InversionMethod& m) {
  check_time(t);
  if (m.kind == InversionKind::euler_summation)
    throw AbscissaError(
        "euler summation needs a complex-evaluable transform");
  check_terms(m.terms);
  return stehfest_sum(fn, t, m.terms);
}

double invert(const std::function<cplx(cplx)>& fn, double t,
              const InversionMethod& m) {
  check_time(t);
  if (m.kind == InversionKind::gaver_stehfest) {
    check_terms(m.terms);
    return stehfest_sum([&fn](double s) { return fn(cplx(s, 0)).real(); }, t,
                        m.terms);
  }
  return euler_sum(fn, t, m.euler_m);
}

std::vector<double> invert_cumulative(const ProblemSpec& p,
                                      const std::vector<double>& t_grid,
                                      const InversionMethod& m) {
  std::vector<double> out;
  out.reserve(t_grid.size());
  auto real_fn = [&p](double s) {
    const GenResult g = generating_function(p, s);
    if (!g.valid) criteria_failure(s);
    return g.f / s;
  };
  auto cplx_fn = [&p](cplx s) { return generating_function_c(p, s) / s; };
  for (double t : t_grid) {
    check_time(t);
    if (m.kind == InversionKind::gaver_stehfest) {
      check_terms(m.terms);
      const auto& v = stehfest_weights(m.terms);
      long double acc = 0;
      for (int k = 1; k <= m.terms; ++k) {
        const double s = k * kLn2 / t;
        acc += v[k] * static_cast<long double>(real_fn(s));
      }
      out.push_back(static_cast<double>(acc * kLn2 / t));
    } else {
      // The contour never meets the real axis where the radicand sign lives;
      // probe the real abscissa of matching magnitude so criteria failures
      // surface identically for both methods.
      const double probe = m.euler_m * std::log(10.0) / 3.0 / t;
      if (!generating_function(p, probe).valid) criteria_failure(probe);
      out.push_back(euler_sum(cplx_fn, t, m.euler_m));
    }
  }
  return out;
}

}  // namespace frontmix
