// SPDX-License-Identifier: MIT
//
// Feedback-bit budgeting between the magnitude and direction codebooks.
// With B bits total, N = 2^Bdot magnitude cells and Nddot = 2^Bddot lines,
// the normalized power overhead decays like N^-1 + 16 lambda_M^2
// Nddot^(-2/(M-1)); equating the two decay rates gives the closed-form split
//
//     Bdot  = 2B/(M+1) - kappa,    Bddot = B (M-1)/(M+1) + kappa,
//
// with a dimension-only constant kappa.  This module provides that split, an
// exhaustive integer-split search against the exact objective, and the
// resulting distortion (relative power overhead versus perfect CSI).
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "linkquant/direction.hpp"
#include "linkquant/distribution.hpp"

namespace linkquant::allocation {

struct BitSplit {
  double magBitsReal = 0.0;  // unrounded Bdot
  double dirBitsReal = 0.0;  // unrounded Bddot = B - magBitsReal
  int magBits = 0;           // rounded to nearest, clamped to [0, B]
  int dirBits = 0;           // B - magBits
};

struct ExhaustiveResult {
  int magBits = 0;
  int dirBits = 0;
  double objective = 0.0;  // E[P] at the optimum
};

/// kappa = ((M-1)/(M+1)) log2(32 lambda_M^2 / (M-1)); requires M >= 3.
double kappa_su(int M);

/// sigma = (16(M+1)/(M-1)) (sqrt(pi)(M-1) Gamma((M+1)/2) / (32 Gamma(M/2)))^(2/(M+1)).
double sigma_su(int M);

/// Closed-form split for B total bits (round-then-complement integerization).
BitSplit closed_form(int M, int B);

/// Residual of the stationarity condition the closed-form split solves:
/// |N^-1 - (32 lambda^2/(M-1)) Nddot^(-2/(M-1))| at the unrounded split.
double lagrange_residual(int M, int B);

/// Serves sin(phi) for a direction codebook of any size: measured packing
/// distance for sizes up to the materialization limit (cached on disk and in
/// memory), extrapolated via the fitted packing law beyond it.
class OpeningProvider {
 public:
  OpeningProvider(int M, std::string cacheDir,
                  direction::GenerateOptions opts = {},
                  std::int64_t materializeLimit = 128);

  /// sin of the design opening angle for an N-line codebook (1 when the
  /// codebook is too small to pin down a direction, i.e. N <= M).
  double sin_phi(std::int64_t N) const;

  /// Coefficient of the forced-slope fit sin(phi) = c N^(-1/(M-1)) over the
  /// materialized sizes in [80, 100]; computed once on first use.
  double fit_coefficient() const;

  /// Materialized packing for N <= materialize_limit() (throws beyond).
  const direction::DirectionCodebook& codebook(std::int64_t N) const;

  int dimension() const { return M_; }
  std::int64_t materialize_limit() const { return limit_; }

 private:
  int M_;
  std::string cacheDir_;
  direction::GenerateOptions opts_;
  std::int64_t limit_;
  mutable std::map<std::int64_t, direction::DirectionCodebook> packs_;
  mutable std::optional<double> fitCoefficient_;
};

/// Exact-objective search over every integer split Bdot in [0, B].  Ties
/// resolve to the smaller Bdot.  gamma0 scales the objective only; the
/// argmin is invariant to it.
ExhaustiveResult exhaustive(const MagnitudeDistribution& model, double q,
                            int B, const OpeningProvider& openings,
                            double gamma0 = 1.0);

/// Relative power overhead (E[P] - P_CSI) / P_CSI of a given integer split.
/// +infinity when the direction codebook cannot beamform (sin phi = 1).
double distortion(const MagnitudeDistribution& model, double q, int magBits,
                  int dirBits, const OpeningProvider& openings,
                  double gamma0 = 1.0);

/// Closed-form ceiling on the distortion: sigma_su 2^(-2B/(M+1)).
double distortion_bound(int M, int B);

struct ComplexSplit {
  double magBitsReal = 0.0;
  double dirBitsReal = 0.0;
  int magBits = 0;        // rounded as in closed_form
  int dirBits = 0;
  double exponent = 0.0;  // 2^(-B/M), the complex-codebook decay factor
};

/// Complex-codebook counterparts: Bdot = B/M, Bddot = B(M-1)/M.
ComplexSplit complex_laws(int M, int B);

/// CSV: B,Bdot_closed,Bddot_closed,Bdot_exh,Bddot_exh over [Blo, Bhi].
void write_allocation_csv(std::ostream& out, const MagnitudeDistribution& model,
                          double q, int Blo, int Bhi,
                          const OpeningProvider& openings);

/// CSV: B,distortion_exh,distortion_closed,bound over [Blo, Bhi].
void write_distortion_csv(std::ostream& out, const MagnitudeDistribution& model,
                          double q, int Blo, int Bhi,
                          const OpeningProvider& openings);

}  // namespace linkquant::allocation
