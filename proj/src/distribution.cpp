// SPDX-License-Identifier: MIT
#include "linkquant/distribution.hpp"

#include <algorithm>
#include <cmath>

#include "linkquant/gamma.hpp"

namespace linkquant {

ChiSquareModel::ChiSquareModel(int M) : M_(M) {
  if (M < 2)
    throw std::invalid_argument("ChiSquareModel: dimension must be >= 2");
  halfM_ = 0.5 * static_cast<double>(M);
  logNorm_ = halfM_ * std::log(2.0) + std::lgamma(halfM_);
}

double ChiSquareModel::pdf(double y) const {
  if (!(y > 0.0)) {
    if (y == 0.0) return M_ == 2 ? 0.5 : 0.0;  // finite boundary limit
    throw std::invalid_argument("pdf: y must be positive");
  }
  // f(y) = y^(M/2-1) e^(-y/2) / (2^(M/2) Gamma(M/2)), in log space for range.
  return std::exp((halfM_ - 1.0) * std::log(y) - 0.5 * y - logNorm_);
}

double ChiSquareModel::pdf_deriv(double y) const {
  if (!(y > 0.0)) throw std::invalid_argument("pdf_deriv: y must be positive");
  const double k = halfM_ - 1.0;
  return pdf(y) * (k / y - 0.5);
}

double ChiSquareModel::pdf_deriv2(double y) const {
  if (!(y > 0.0))
    throw std::invalid_argument("pdf_deriv2: y must be positive");
  const double k = halfM_ - 1.0;
  const double s = k / y - 0.5;
  return pdf(y) * (s * s - k / (y * y));
}

double ChiSquareModel::cdf(double y) const {
  if (!(y > 0.0)) {
    if (y == 0.0) return 0.0;
    throw std::invalid_argument("cdf: y must be positive");
  }
  return special::regularized_gamma_p(halfM_, 0.5 * y);
}

double ChiSquareModel::survival(double y) const {
  if (!(y > 0.0)) {
    if (y == 0.0) return 1.0;
    throw std::invalid_argument("survival: y must be positive");
  }
  return special::regularized_gamma_q(halfM_, 0.5 * y);
}

double ChiSquareModel::inv_cdf(double p) const {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("inv_cdf: p must lie in (0, 1)");
  const double lo = 1e-12;
  // Lower-tail and upper-tail scales; the loop covers the slack in between.
  double hi = std::max({4.0 * M_, -4.0 * std::log(p), -4.0 * std::log1p(-p)});
  while (cdf(hi) < p) hi *= 2.0;
  const auto root = detail::solve_bracketed(
      [&](double y) { return cdf(y) - p; }, lo, hi,
      /*xtol=*/1e-14, /*ftol=*/std::max(p * 1e-13, 1e-300), /*maxIter=*/300);
  return root.x;
}

DistributionConstants ChiSquareModel::constants() const {
  if (M_ < 3)
    throw unsupported_model(
        "constants: E[1/Y] diverges for dimension < 3");
  const double m = static_cast<double>(M_);
  // eta = lim -f/f' = 1 / (1/2 - (M/2-1)/y) -> 2;  E[Y] = M;
  // E[1/Y] = 1/(M-2);  omega = E[Y] / (eta^2 E[1/Y]) = M(M-2)/4.
  return {2.0, m, 1.0 / (m - 2.0), m * (m - 2.0) / 4.0};
}

double ChiSquareModel::tail_mean_inverse(double y) const {
  if (M_ < 3)
    throw unsupported_model(
        "tail_mean_inverse: E[1/Y] diverges for dimension < 3");
  if (y < 0.0) throw std::invalid_argument("tail_mean_inverse: y < 0");
  const double m = static_cast<double>(M_);
  // f_M(t)/t = f_{M-2}(t)/(M-2), so the tail integral is a survival function
  // of the law two dimensions down.
  if (y == 0.0) return 1.0 / (m - 2.0);
  return special::regularized_gamma_q(0.5 * (m - 2.0), 0.5 * y) / (m - 2.0);
}

}  // namespace linkquant
