// SPDX-License-Identifier: MIT
//
// Product channel quantizer for a single-user beamforming link: a magnitude
// codebook crossed with a direction codebook, plus one dedicated outage
// word.  The receiver reports (magnitude cell, direction line) or "outage";
// the transmitter then spends exactly the power needed to hit the target
// SNR under the worst channel consistent with that report:
//
//     P = gamma0 / (Ytilde cos^2(phi_eff)),
//
// where Ytilde is the quantized (rounded-down) squared norm and phi_eff the
// assumed worst-case angle between the channel and the reported line.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "linkquant/direction.hpp"
#include "linkquant/distribution.hpp"
#include "linkquant/magnitude.hpp"

namespace linkquant::link {

/// How the worst-case angle phi_eff is chosen.
///  - Paper:  phi_eff = asin(sin phi) from the packing distance (the design
///    value; quantization can occasionally land slightly outside the cap).
///  - Strict: phi_eff additionally honours the measured covering-radius
///    estimate, guaranteeing the target SNR for every quantized channel.
enum class PhiMode { Paper, Strict };

/// Thrown when the direction codebook cannot support positive-power
/// beamforming (effective opening angle reaches pi/2, e.g. too few lines).
class infeasible_codebook : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Direction side of the product: either a materialized packing, or just an
/// opening angle extrapolated from the fitted packing law for sizes that are
/// too large to generate.  Only materialized directions can quantize.
struct DirectionInfo {
  std::optional<direction::DirectionCodebook> codebook;
  std::int64_t count = 0;       // number of lines this side represents
  double sinPhi = 0.0;          // sin of the design opening angle
  double coveringRadius = 0.0;  // radians; 0 when extrapolated

  static DirectionInfo materialized(direction::DirectionCodebook cb);
  static DirectionInfo extrapolated(std::int64_t count, double sinPhi);
  bool is_materialized() const { return codebook.has_value(); }
};

struct ProductSystem {
  magnitude::MagnitudeCodebook mag;
  DirectionInfo dir;
  double q = 0.0;
  double gamma0 = 0.0;
  double outageRadiusSq = 0.0;   // = mag.levels.front() = F^-1(q)
  std::int64_t codebookSize = 0; // |C| = N * Nddot + 1 (outage word included)
};

struct QuantizedChannel {
  bool inOutage = false;
  std::int64_t magIndex = -1;  // 0-based cell, -1 in outage
  std::int64_t dirIndex = -1;
  double quantizedY = 0.0;     // levels[magIndex], 0 in outage
  std::vector<double> quantizedDir;
};

struct EvaluationReport {
  double avgPowerAnalytic = 0.0;
  double avgPowerMC = 0.0;
  double avgPowerMCStderr = 0.0;
  double outageEmpirical = 0.0;
  double outageStderr = 0.0;
  std::int64_t snrViolations = 0;
  double csiPower = 0.0;  // gamma0 E[1/Y] = gamma0 / (M - 2)
  std::int64_t samples = 0;
};

/// Assembles and validates a product system.  The magnitude codebook must be
/// anchored at F^-1(q); the direction dimension must match the model.
ProductSystem make_system(const MagnitudeDistribution& model, double q,
                          double gamma0, magnitude::MagnitudeCodebook mag,
                          DirectionInfo dir);

/// Quantizes a channel vector.  Magnitude cells are closed on the left:
/// ||h||^2 exactly equal to a level maps to that level.  Requires a
/// materialized direction codebook.
QuantizedChannel quantize(const ProductSystem& system,
                          std::span<const double> h);

/// Worst-case angle assumed by the power control for the given mode.
double effective_phi(const ProductSystem& system, PhiMode mode);

/// Power spent for one quantized report (0 in outage).  Throws
/// infeasible_codebook when the effective angle reaches pi/2.
double transmit_power(const ProductSystem& system, const QuantizedChannel& qc,
                      PhiMode mode);

/// Unit beamforming vector for a report; nullopt means "do not transmit".
std::optional<std::vector<double>> beamformer(const ProductSystem& system,
                                              const QuantizedChannel& qc);

/// E[P] in closed form: gamma0 / cos^2(phi_eff) times the magnitude
/// codebook's mean inverse quantized magnitude.
double average_power_analytic(const MagnitudeDistribution& model,
                              const ProductSystem& system, PhiMode mode);

/// Upper bound on E[P] / P_CSI for a size-(N, Nddot) product built from the
/// uniform-dB magnitude codebook and any valid line packing; +infinity when
/// the packing term reaches 1.
double product_power_bound(const MagnitudeDistribution& model, double q,
                           std::int64_t N, std::int64_t Nddot);

/// Monte-Carlo evaluation over `samples` i.i.d. channels (at least 1e4).
/// Deterministic given the seed; outage samples contribute zero power.
EvaluationReport monte_carlo(const MagnitudeDistribution& model,
                             const ProductSystem& system, std::int64_t samples,
                             std::uint64_t seed, PhiMode mode);

}  // namespace linkquant::link
