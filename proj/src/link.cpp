// SPDX-License-Identifier: MIT
#include "linkquant/link.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "linkquant/rng.hpp"

namespace linkquant::link {

namespace {

constexpr double kSnrRelTol = 1e-9;

struct Accum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = v - carry;
    const double s = sum + t;
    carry = (s - sum) - t;
    sum = s;
  }
};

double cos2_effective(const ProductSystem& system, PhiMode mode) {
  const double phi = effective_phi(system, mode);
  const double c = std::cos(phi);
  const double c2 = c * c;
  if (!(phi < std::numbers::pi / 2) || !(c2 > 0.0))
    throw infeasible_codebook(
        "direction codebook leaves no beamforming gain (opening angle "
        "reached pi/2); use more lines");
  return c2;
}

}  // namespace

DirectionInfo DirectionInfo::materialized(direction::DirectionCodebook cb) {
  DirectionInfo info;
  info.count = cb.size();
  info.sinPhi = std::min(cb.delta, 1.0);
  info.coveringRadius = cb.coveringRadiusEstimate;
  info.codebook = std::move(cb);
  return info;
}

DirectionInfo DirectionInfo::extrapolated(std::int64_t count, double sinPhi) {
  if (count < 1)
    throw std::invalid_argument("DirectionInfo: count must be >= 1");
  if (!(sinPhi > 0.0) || sinPhi > 1.0)
    throw std::invalid_argument("DirectionInfo: sinPhi must lie in (0, 1]");
  DirectionInfo info;
  info.count = count;
  info.sinPhi = sinPhi;
  info.coveringRadius = 0.0;
  return info;
}

ProductSystem make_system(const MagnitudeDistribution& model, double q,
                          double gamma0, magnitude::MagnitudeCodebook mag,
                          DirectionInfo dir) {
  if (!(q > 0.0) || !(q < 1.0))
    throw std::invalid_argument("make_system: q must lie in (0, 1)");
  if (!(gamma0 > 0.0) || !std::isfinite(gamma0))
    throw std::invalid_argument("make_system: gamma0 must be positive");
  if (mag.levels.empty())
    throw std::invalid_argument("make_system: empty magnitude codebook");
  const double a = model.inv_cdf(q);
  if (std::fabs(mag.levels.front() - a) > 1e-9 * a)
    throw std::invalid_argument(
        "make_system: magnitude codebook is not anchored at F^-1(q)");
  if (dir.is_materialized() && dir.codebook->M != model.dimension())
    throw std::invalid_argument(
        "make_system: direction codebook dimension mismatch");
  if (dir.count < 1)
    throw std::invalid_argument("make_system: empty direction codebook");

  ProductSystem system;
  system.q = q;
  system.gamma0 = gamma0;
  system.outageRadiusSq = mag.levels.front();
  system.codebookSize = mag.size() * dir.count + 1;
  system.mag = std::move(mag);
  system.dir = std::move(dir);
  return system;
}

QuantizedChannel quantize(const ProductSystem& system,
                          std::span<const double> h) {
  if (!system.dir.is_materialized())
    throw std::invalid_argument(
        "quantize: direction side is extrapolated, not materialized");
  double y = 0.0;
  for (double x : h) {
    if (!std::isfinite(x))
      throw std::invalid_argument("quantize: non-finite channel component");
    y += x * x;
  }

  QuantizedChannel qc;
  if (y < system.outageRadiusSq) {
    qc.inOutage = true;
    return qc;
  }
  const auto& levels = system.mag.levels;
  const auto it = std::upper_bound(levels.begin(), levels.end(), y);
  qc.magIndex = static_cast<std::int64_t>(it - levels.begin()) - 1;
  qc.quantizedY = levels[static_cast<std::size_t>(qc.magIndex)];

  const direction::DirectionMatch match =
      direction::match_direction(*system.dir.codebook, h);
  qc.dirIndex = static_cast<std::int64_t>(match.index);
  qc.quantizedDir = system.dir.codebook->vectors[match.index];
  return qc;
}

double effective_phi(const ProductSystem& system, PhiMode mode) {
  const double phi = std::asin(std::min(system.dir.sinPhi, 1.0));
  if (mode == PhiMode::Strict)
    return std::max(phi, system.dir.coveringRadius);
  return phi;
}

double transmit_power(const ProductSystem& system, const QuantizedChannel& qc,
                      PhiMode mode) {
  if (qc.inOutage) return 0.0;
  if (!(qc.quantizedY > 0.0))
    throw std::invalid_argument("transmit_power: invalid quantized magnitude");
  return system.gamma0 / (qc.quantizedY * cos2_effective(system, mode));
}

std::optional<std::vector<double>> beamformer(const ProductSystem& /*system*/,
                                              const QuantizedChannel& qc) {
  if (qc.inOutage) return std::nullopt;
  if (qc.quantizedDir.empty())
    throw std::invalid_argument("beamformer: report carries no direction");
  return qc.quantizedDir;
}

double average_power_analytic(const MagnitudeDistribution& model,
                              const ProductSystem& system, PhiMode mode) {
  const double meanInv =
      magnitude::average_power(model, system.mag, system.q);
  return system.gamma0 / cos2_effective(system, mode) * meanInv;
}

double product_power_bound(const MagnitudeDistribution& model, double q,
                           std::int64_t N, std::int64_t Nddot) {
  const auto cs = model.constants();
  const double a = model.inv_cdf(q);
  const double L = magnitude::solve_Lc(cs.eta / a, N);
  const double magTerm = 1.0 + L + cs.omega * L * L;
  const double lam = direction::lambda_M(model.dimension());
  const double dirTerm =
      1.0 - 16.0 * lam * lam *
                std::pow(static_cast<double>(Nddot),
                         -2.0 / static_cast<double>(model.dimension() - 1));
  if (!(dirTerm > 0.0)) return std::numeric_limits<double>::infinity();
  return magTerm / dirTerm;
}

EvaluationReport monte_carlo(const MagnitudeDistribution& model,
                             const ProductSystem& system, std::int64_t samples,
                             std::uint64_t seed, PhiMode mode) {
  if (samples < 10000)
    throw std::invalid_argument("monte_carlo: need at least 1e4 samples");
  if (!system.dir.is_materialized())
    throw std::invalid_argument(
        "monte_carlo: direction side is extrapolated, not materialized");
  const double cos2 = cos2_effective(system, mode);
  const double snrFloor = system.gamma0 * (1.0 - kSnrRelTol);
  const auto& levels = system.mag.levels;
  const auto& dirCb = *system.dir.codebook;
  const int M = model.dimension();

  rng::PhiloxStream stream(seed, 0);
  std::vector<double> h(static_cast<std::size_t>(M));
  Accum power, power2;
  std::int64_t outage = 0;
  std::int64_t violations = 0;

  for (std::int64_t s = 0; s < samples; ++s) {
    rng::fill_standard_normal(stream, static_cast<std::uint64_t>(s),
                         std::span<double>(h.data(), h.size()));
    double y = 0.0;
    for (double x : h) y += x * x;
    if (y < system.outageRadiusSq) {
      ++outage;  // dedicated outage word: no transmission, zero power
      continue;
    }
    const auto it = std::upper_bound(levels.begin(), levels.end(), y);
    const double ytil =
        levels[static_cast<std::size_t>(it - levels.begin()) - 1];
    const direction::DirectionMatch match =
        direction::match_direction(dirCb, std::span<const double>(h));
    const double p = system.gamma0 / (ytil * cos2);
    const double received = p * y * match.absCosine * match.absCosine;
    if (received < snrFloor) ++violations;
    power.add(p);
    power2.add(p * p);
  }

  const double n = static_cast<double>(samples);
  EvaluationReport report;
  report.samples = samples;
  report.avgPowerMC = power.sum / n;
  const double var =
      std::max(0.0, (power2.sum / n - report.avgPowerMC * report.avgPowerMC) *
                        (n / (n - 1.0)));
  report.avgPowerMCStderr = std::sqrt(var / n);
  report.outageEmpirical = static_cast<double>(outage) / n;
  report.outageStderr = std::sqrt(std::max(
      0.0, report.outageEmpirical * (1.0 - report.outageEmpirical) / n));
  report.snrViolations = violations;
  report.avgPowerAnalytic = average_power_analytic(model, system, mode);
  report.csiPower = system.gamma0 * model.constants().rhoCsi;
  return report;
}

}  // namespace linkquant::link
