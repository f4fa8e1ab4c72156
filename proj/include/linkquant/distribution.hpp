// SPDX-License-Identifier: MIT
//
// Channel magnitude distribution: the chi-square law of ||h||^2 for an
// h with i.i.d. standard normal entries, behind a small interface so that
// any sufficiently regular magnitude law can be plugged into the codebook
// machinery (the geometric-codebook results do not depend on the law).
#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>

namespace linkquant {

/// Constants of a magnitude law consumed by the codebook constructions:
///   eta    - the limit of -f(y)/f'(y) as y -> infinity
///   meanY  - E[Y]
///   rhoCsi - E[1/Y], the normalized power of a perfect-information system
///   omega  - meanY / (eta^2 * rhoCsi)
struct DistributionConstants {
  double eta;
  double meanY;
  double rhoCsi;
  double omega;
};

/// Raised when an operation needs moments the model cannot supply
/// (e.g. E[1/Y] diverges below three dimensions).
class unsupported_model : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Interface for a continuous magnitude law on (0, inf).
class MagnitudeDistribution {
 public:
  virtual ~MagnitudeDistribution() = default;

  /// Dimension of the underlying channel vector (sampling + constants).
  virtual int dimension() const = 0;

  virtual double pdf(double y) const = 0;
  virtual double pdf_deriv(double y) const = 0;
  virtual double pdf_deriv2(double y) const = 0;
  virtual double cdf(double y) const = 0;
  /// Survival 1 - cdf, computed without cancellation.
  virtual double survival(double y) const = 0;
  /// Inverse cdf; |cdf(result) - p| <= 1e-12.
  virtual double inv_cdf(double p) const = 0;
  virtual DistributionConstants constants() const = 0;
  /// T(y) = integral of f(t)/t over (y, inf).  T(0) = E[1/Y].
  virtual double tail_mean_inverse(double y) const = 0;
};

/// Chi-square law with M degrees of freedom (M = antenna count, M >= 2).
/// Derived constants require M >= 3; constants() and tail_mean_inverse()
/// throw unsupported_model below that.
class ChiSquareModel final : public MagnitudeDistribution {
 public:
  explicit ChiSquareModel(int M);

  int dimension() const override { return M_; }

  double pdf(double y) const override;
  double pdf_deriv(double y) const override;
  double pdf_deriv2(double y) const override;
  double cdf(double y) const override;
  double survival(double y) const override;
  double inv_cdf(double p) const override;
  DistributionConstants constants() const override;
  double tail_mean_inverse(double y) const override;

 private:
  int M_;
  double halfM_;     // M/2
  double logNorm_;   // log(2^(M/2) Gamma(M/2))
};

namespace detail {

/// Result of a scalar root solve (bracketed bisection + secant hybrid).
struct RootResult {
  double x;
  int iterations;
  bool converged;
};

/// Finds x in [lo, hi] with g(x) = 0 for continuous monotone-through-zero g.
/// The bracket must satisfy g(lo) <= 0 <= g(hi) (or the reverse).
template <typename G>
RootResult solve_bracketed(const G& g, double lo, double hi, double xtol,
                           double ftol, int maxIter = 200) {
  double flo = g(lo);
  double fhi = g(hi);
  if (flo == 0.0) return {lo, 0, true};
  if (fhi == 0.0) return {hi, 0, true};
  if ((flo > 0.0) == (fhi > 0.0))
    throw std::invalid_argument("solve_bracketed: root not bracketed");

  double x = lo;
  int side = 0;   // which bracket end the last update replaced
  int stall = 0;  // consecutive same-side updates; forces a bisection step
  for (int it = 1; it <= maxIter; ++it) {
    // Secant proposal, clipped into the bracket; bisection fallback.
    double cand = hi - fhi * (hi - lo) / (fhi - flo);
    if (!(cand > lo && cand < hi) || stall >= 2) {
      cand = 0.5 * (lo + hi);
      stall = 0;
    }
    const double fc = g(cand);
    x = cand;
    if (std::fabs(fc) <= ftol || hi - lo <= xtol * (1.0 + std::fabs(cand)))
      return {x, it, true};
    const int newSide = ((fc > 0.0) == (fhi > 0.0)) ? 1 : -1;
    if (newSide == 1) {
      hi = cand;
      fhi = fc;
    } else {
      lo = cand;
      flo = fc;
    }
    stall = (newSide == side) ? stall + 1 : 0;
    side = newSide;
  }
  return {x, maxIter, false};
}

}  // namespace detail

}  // namespace linkquant
