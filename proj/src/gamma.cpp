// SPDX-License-Identifier: MIT
#include "linkquant/gamma.hpp"

#include <cmath>
#include <stdexcept>

namespace linkquant::special {

namespace {
constexpr double kEpsilon = 1e-15;
constexpr double kBig = 4.503599627370496e15;  // 2^52
constexpr double kBigInv = 2.22044604925031308085e-16;
constexpr double kMaxLog = 709.78;

// exp(a*log(x) - x - lgamma(a)) with underflow clamped to zero.
double scale_factor(double a, double x) {
  const double ax = a * std::log(x) - x - std::lgamma(a);
  if (ax < -kMaxLog) return 0.0;
  return std::exp(ax);
}
}  // namespace

namespace detail {

double lower_series(double a, double x) {
  // P(a,x) = x^a e^-x / Gamma(a+1) * sum_k x^k / ((a+1)...(a+k))
  double r = a;
  double c = 1.0;
  double ans = 1.0;
  do {
    r += 1.0;
    c *= x / r;
    ans += c;
  } while (c / ans > kEpsilon);
  return ans * scale_factor(a, x) / a;
}

double upper_continued_fraction(double a, double x) {
  // Q(a,x) via the classical continued fraction with big-number rescaling.
  const double ax = scale_factor(a, x);
  if (ax == 0.0) return 0.0;

  double y = 1.0 - a;
  double z = x + y + 1.0;
  double c = 0.0;
  double pkm2 = 1.0;
  double qkm2 = x;
  double pkm1 = x + 1.0;
  double qkm1 = z * x;
  double ans = pkm1 / qkm1;
  double t;
  do {
    c += 1.0;
    y += 1.0;
    z += 2.0;
    const double yc = y * c;
    const double pk = pkm1 * z - pkm2 * yc;
    const double qk = qkm1 * z - qkm2 * yc;
    if (qk != 0.0) {
      const double r = pk / qk;
      t = std::fabs((ans - r) / r);
      ans = r;
    } else {
      t = 1.0;
    }
    pkm2 = pkm1;
    pkm1 = pk;
    qkm2 = qkm1;
    qkm1 = qk;
    if (std::fabs(pk) > kBig) {
      pkm2 *= kBigInv;
      pkm1 *= kBigInv;
      qkm2 *= kBigInv;
      qkm1 *= kBigInv;
    }
  } while (t > kEpsilon);
  return ans * ax;
}

}  // namespace detail

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || !std::isfinite(a) || std::isnan(x))
    throw std::invalid_argument("regularized_gamma_p: need a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x > a + 1.0) return 1.0 - detail::upper_continued_fraction(a, x);
  return detail::lower_series(a, x);
}

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || !std::isfinite(a) || std::isnan(x))
    throw std::invalid_argument("regularized_gamma_q: need a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x > a + 1.0) return detail::upper_continued_fraction(a, x);
  return 1.0 - detail::lower_series(a, x);
}

}  // namespace linkquant::special
