// SPDX-License-Identifier: MIT
#include "linkquant/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "linkquant/magnitude.hpp"

namespace linkquant::allocation {

namespace {

constexpr int kMaxBits = 60;  // keeps 2^B inside int64 and double-exact range

void check_mb(int M, int B) {
  if (M < 3) throw std::invalid_argument("allocation: M must be >= 3");
  if (B < 0) throw std::invalid_argument("allocation: B must be >= 0");
  if (B > kMaxBits) throw std::invalid_argument("allocation: B too large");
}

// Normalized average power E[P]/gamma0 of the (2^magBits, sin phi) product.
double normalized_power(const MagnitudeDistribution& model, double q,
                        int magBits, double sinPhi) {
  if (!(sinPhi < 1.0)) return std::numeric_limits<double>::infinity();
  const std::int64_t N = std::int64_t{1} << magBits;
  const double meanInv = magnitude::uniform_db_average_power(model, q, N);
  return meanInv / (1.0 - sinPhi * sinPhi);
}

}  // namespace

double kappa_su(int M) {
  if (M < 3) throw std::invalid_argument("kappa_su: M must be >= 3");
  const double lam = direction::lambda_M(M);
  return (static_cast<double>(M - 1) / (M + 1)) *
         std::log2(32.0 * lam * lam / (M - 1));
}

double sigma_su(int M) {
  if (M < 3) throw std::invalid_argument("sigma_su: M must be >= 3");
  const double base = std::sqrt(std::numbers::pi) * (M - 1) *
                      std::exp(std::lgamma(0.5 * (M + 1)) -
                               std::lgamma(0.5 * M)) /
                      32.0;
  return (16.0 * (M + 1) / (M - 1)) *
         std::pow(base, 2.0 / static_cast<double>(M + 1));
}

BitSplit closed_form(int M, int B) {
  check_mb(M, B);
  BitSplit split;
  split.magBitsReal = 2.0 * B / (M + 1) - kappa_su(M);
  split.dirBitsReal = B - split.magBitsReal;
  const long rounded = std::lround(split.magBitsReal);
  split.magBits = static_cast<int>(std::clamp(rounded, 0L, static_cast<long>(B)));
  split.dirBits = B - split.magBits;
  return split;
}

double lagrange_residual(int M, int B) {
  check_mb(M, B);
  const BitSplit split = closed_form(M, B);
  const double lam = direction::lambda_M(M);
  const double magRate = std::exp2(-split.magBitsReal);
  const double dirRate = (32.0 * lam * lam / (M - 1)) *
                         std::exp2(-2.0 * split.dirBitsReal / (M - 1));
  return std::fabs(magRate - dirRate);
}

OpeningProvider::OpeningProvider(int M, std::string cacheDir,
                                 direction::GenerateOptions opts,
                                 std::int64_t materializeLimit)
    : M_(M),
      cacheDir_(std::move(cacheDir)),
      opts_(opts),
      limit_(materializeLimit) {
  if (M < 2) throw std::invalid_argument("OpeningProvider: M must be >= 2");
  if (limit_ < 2)
    throw std::invalid_argument("OpeningProvider: materialize limit too small");
}

const direction::DirectionCodebook& OpeningProvider::codebook(
    std::int64_t N) const {
  if (N < 2 || N > limit_)
    throw std::invalid_argument(
        "OpeningProvider: size outside the materialized range");
  auto it = packs_.find(N);
  if (it == packs_.end())
    it = packs_.emplace(N, direction::obtain(M_, N, cacheDir_, opts_)).first;
  return it->second;
}

double OpeningProvider::sin_phi(std::int64_t N) const {
  if (N < 1) throw std::invalid_argument("OpeningProvider: N must be >= 1");
  if (N == 1) return 1.0;  // a single line carries no direction information
  if (N <= limit_) return std::min(codebook(N).delta, 1.0);
  return std::min(1.0, fit_coefficient() *
                           std::pow(static_cast<double>(N),
                                    -1.0 / static_cast<double>(M_ - 1)));
}

double OpeningProvider::fit_coefficient() const {
  if (!fitCoefficient_) {
    std::vector<std::pair<std::int64_t, double>> pts;
    for (std::int64_t n : {80, 84, 88, 92, 96, 100})
      pts.emplace_back(n, std::min(codebook(n).delta, 1.0));
    fitCoefficient_ = direction::fit_extrapolation(pts, M_);
  }
  return *fitCoefficient_;
}

ExhaustiveResult exhaustive(const MagnitudeDistribution& model, double q,
                            int B, const OpeningProvider& openings,
                            double gamma0) {
  check_mb(model.dimension(), B);
  if (!(gamma0 > 0.0))
    throw std::invalid_argument("exhaustive: gamma0 must be positive");
  ExhaustiveResult best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int magBits = 0; magBits <= B; ++magBits) {
    const std::int64_t Nddot = std::int64_t{1} << (B - magBits);
    const double sinPhi = openings.sin_phi(Nddot);
    const double obj = gamma0 * normalized_power(model, q, magBits, sinPhi);
    if (obj < best.objective) {  // strict: ties keep the smaller magBits
      best.objective = obj;
      best.magBits = magBits;
      best.dirBits = B - magBits;
    }
  }
  return best;
}

double distortion(const MagnitudeDistribution& model, double q, int magBits,
                  int dirBits, const OpeningProvider& openings,
                  double gamma0) {
  if (magBits < 0 || dirBits < 0 || magBits + dirBits > kMaxBits)
    throw std::invalid_argument("distortion: invalid bit split");
  if (!(gamma0 > 0.0))
    throw std::invalid_argument("distortion: gamma0 must be positive");
  const double sinPhi = openings.sin_phi(std::int64_t{1} << dirBits);
  const double avgPower =
      gamma0 * normalized_power(model, q, magBits, sinPhi);
  const double csi = gamma0 * model.constants().rhoCsi;
  return (avgPower - csi) / csi;
}

double distortion_bound(int M, int B) {
  check_mb(M, B);
  return sigma_su(M) * std::exp2(-2.0 * B / (M + 1));
}

ComplexSplit complex_laws(int M, int B) {
  check_mb(M, B);
  ComplexSplit split;
  split.magBitsReal = static_cast<double>(B) / M;
  split.dirBitsReal = static_cast<double>(B) * (M - 1) / M;
  const long rounded = std::lround(split.magBitsReal);
  split.magBits = static_cast<int>(std::clamp(rounded, 0L, static_cast<long>(B)));
  split.dirBits = B - split.magBits;
  split.exponent = std::exp2(-static_cast<double>(B) / M);
  return split;
}

void write_allocation_csv(std::ostream& out, const MagnitudeDistribution& model,
                          double q, int Blo, int Bhi,
                          const OpeningProvider& openings) {
  if (Blo > Bhi) throw std::invalid_argument("allocation csv: empty bit range");
  out << "B,Bdot_closed,Bddot_closed,Bdot_exh,Bddot_exh\n";
  for (int B = Blo; B <= Bhi; ++B) {
    const BitSplit cf = closed_form(model.dimension(), B);
    const ExhaustiveResult ex = exhaustive(model, q, B, openings);
    out << B << ',' << cf.magBits << ',' << cf.dirBits << ',' << ex.magBits
        << ',' << ex.dirBits << '\n';
  }
}

void write_distortion_csv(std::ostream& out, const MagnitudeDistribution& model,
                          double q, int Blo, int Bhi,
                          const OpeningProvider& openings) {
  if (Blo > Bhi) throw std::invalid_argument("distortion csv: empty bit range");
  out << "B,distortion_exh,distortion_closed,bound\n";
  char buf[96];
  for (int B = Blo; B <= Bhi; ++B) {
    const BitSplit cf = closed_form(model.dimension(), B);
    const ExhaustiveResult ex = exhaustive(model, q, B, openings);
    const double dExh =
        distortion(model, q, ex.magBits, ex.dirBits, openings);
    const double dClosed =
        distortion(model, q, cf.magBits, cf.dirBits, openings);
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", B, dExh, dClosed,
                  distortion_bound(model.dimension(), B));
    out << buf;
  }
}

}  // namespace linkquant::allocation
