// SPDX-License-Identifier: MIT
//
// Small adaptive quadrature toolkit used for cross-checking closed forms and
// for the spherical-cap area integral.  Adaptive Simpson with Richardson
// correction; semi-infinite integrals by chunked doubling until the tail is
// negligible.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace linkquant::quadrature {

namespace detail {

inline double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adapt(const F& f, double a, double b, double fa, double fm, double fb,
             double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson integration of f over [a, b] to roughly `relTol` of the
/// result (an absolute floor avoids stalls when the integral is ~zero).
template <typename F>
double integrate(const F& f, double a, double b, double relTol = 1e-10,
                 double absFloor = 1e-300) {
  if (!(b >= a)) throw std::invalid_argument("integrate: b < a");
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = detail::simpson(a, b, fa, fm, fb);
  const double tol =
      std::max(std::fabs(whole) * relTol, absFloor);
  return detail::adapt(f, a, b, fa, fm, fb, whole, tol, 60);
}

/// Integral of f over [a, infinity) for integrands with (at least)
/// exponential decay.  Chunks double in width; stops once two consecutive
/// chunks contribute below relTol of the running total.
template <typename F>
double integrate_to_infinity(const F& f, double a, double relTol = 1e-10) {
  double total = 0.0;
  double lo = a;
  double width = 1.0;
  int quiet = 0;
  for (int k = 0; k < 200 && quiet < 2; ++k) {
    const double hi = lo + width;
    const double piece = integrate(f, lo, hi, relTol * 0.1);
    total += piece;
    if (std::fabs(piece) <= relTol * std::fabs(total) || total == 0.0)
      ++quiet;
    else
      quiet = 0;
    lo = hi;
    width *= 2.0;
  }
  return total;
}

}  // namespace linkquant::quadrature
