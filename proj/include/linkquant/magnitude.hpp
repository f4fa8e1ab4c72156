// SPDX-License-Identifier: MIT
//
// Channel-magnitude quantization codebooks.
//
// A codebook is an ascending set of thresholds y(1) < ... < y(N) for the
// squared channel norm.  The first threshold pins the outage mass: values
// below y(1) receive no transmission.  The average normalized transmission
// power of a codebook is
//
//     P(Y) = sum_n  [F(y(n+1)) - F(y(n))] / y(n),     y(N+1) = inf,
//
// the expectation of 1/Y~ where Y~ is the quantized (rounded-down) magnitude.
// The geometric ("uniform in dB") family y(n) = a r^(n-1) with the ratio
// r = 1 + L_c(N), c = eta/a, is the asymptotically optimal choice; this
// module constructs it, evaluates P and its gradient exactly, and provides a
// brute-force numeric optimizer as an oracle.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "linkquant/distribution.hpp"

namespace linkquant::magnitude {

enum class CodebookKind { UniformDb, Numeric, Custom };

struct MagnitudeCodebook {
  std::vector<double> levels;  // ascending, levels.front() = F^-1(q)
  CodebookKind kind = CodebookKind::Custom;
  // Geometric construction metadata (NaN when not applicable).
  double a = 0.0;
  double r = 0.0;
  std::int64_t size() const { return static_cast<std::int64_t>(levels.size()); }
};

struct MagnitudeDiagnostics {
  double gradientNorm;   // ||grad P|| at the uniform-dB codebook
  double mu;             // max |f'| over [y(1), inf)
  double tailTermD;      // last-level gradient term magnitude
  double zeta;           // zeta_{eta/a}(N)
  double theorem1Bound;  // mu/2 * N^-(2*zeta - 1/2) + tailTermD
  double theorem2Bound;  // 1 + L + omega L^2, relative to the CSI baseline
  double a;
  double r;
  double L;              // r - 1
};

struct OptimizeReport {
  int bestRestart = 0;
  int sweeps = 0;
  bool converged = false;
  double power = 0.0;
};

/// Solves L (1+L)^(n-1) = c for the unique positive L (monotone left side).
/// Relative accuracy ~1e-14.
double solve_Lc(double c, std::int64_t n);

/// zeta_c(n) = -log(L_c(n)) / log(n); any log base (the ratio is base-free).
double zeta(double c, std::int64_t n);

/// Geometric codebook with given ratio r > 1 anchored at a = F^-1(q).
MagnitudeCodebook build_geometric(const MagnitudeDistribution& model, double q,
                                  std::int64_t N, double r,
                                  CodebookKind kind = CodebookKind::Custom);

/// The optimal uniform-in-dB codebook: r = 1 + L_{eta/a}(N).
MagnitudeCodebook build_uniform_db(const MagnitudeDistribution& model, double q,
                                   std::int64_t N);

/// Alternative ratio r = 1 + N^(-1 + 1/sqrt(ln N)) that also achieves the
/// optimal gradient scaling; provided for comparison plots only.
double variant_ratio(std::int64_t N);

/// Exact average normalized power of an explicit codebook.  Requires
/// levels.front() = F^-1(q) within 1e-9 relative (the outage contract).
double average_power(const MagnitudeDistribution& model,
                     const MagnitudeCodebook& codebook, double q);

/// Average power of the uniform-dB codebook of size N without materializing
/// levels.  Uses the exact sum for moderate N and an Euler-Maclaurin closed
/// form beyond (cross-validated at the switch point by the test suite).
double uniform_db_average_power(const MagnitudeDistribution& model, double q,
                                std::int64_t N);

/// Gradient of P with respect to y(2)..y(N); y(1) is fixed by the outage
/// constraint and is not a free variable.
std::vector<double> gradient(const MagnitudeDistribution& model,
                             const MagnitudeCodebook& codebook, double q);

/// Numerically optimized codebook: cyclic per-level 1-D minimization with
/// multiple random restarts.  Restart 0 descends from the uniform-dB
/// codebook unperturbed, so the result is never worse than it; further
/// restarts perturb levels by lognormal noise (sigma = 0.3).  Deterministic
/// given the seed.  Ties across restarts resolve to the lowest index.
MagnitudeCodebook optimize_numeric(const MagnitudeDistribution& model, double q,
                                   std::int64_t N, int restarts,
                                   std::uint64_t seed,
                                   OptimizeReport* report = nullptr);

/// Bound diagnostics for the uniform-dB codebook of size N (N >= 4).
MagnitudeDiagnostics diagnostics(const MagnitudeDistribution& model, double q,
                                 std::int64_t N);

/// JSON serialization of a codebook (full double precision).
std::string to_json_string(const MagnitudeDistribution& model, double q,
                           const MagnitudeCodebook& codebook);

/// CSV rows (n, y_n, y_n_dB) with a mandatory header.
void write_levels_csv(std::ostream& out, const MagnitudeCodebook& codebook);

}  // namespace linkquant::magnitude
