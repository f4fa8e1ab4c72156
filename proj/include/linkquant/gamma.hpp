// SPDX-License-Identifier: MIT
//
// Regularized incomplete gamma functions P(a,x) and Q(a,x) = 1 - P(a,x).
//
// Self-contained implementation: a power series for the lower function when
// x < a + 1 and a continued fraction for the upper function otherwise.  The
// split keeps both expansions in their rapidly converging regimes and gives
// full double precision over the parameter ranges used by chi-square
// distributions of small integer order.
#pragma once

namespace linkquant::special {

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);

namespace detail {
double lower_series(double a, double x);        // P via power series
double upper_continued_fraction(double a, double x);  // Q via Lentz-style CF
}  // namespace detail

}  // namespace linkquant::special
