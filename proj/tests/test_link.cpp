// SPDX-License-Identifier: MIT
#include "linkquant/link.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "linkquant/direction.hpp"
#include "linkquant/distribution.hpp"
#include "linkquant/magnitude.hpp"
#include "linkquant/rng.hpp"

using linkquant::ChiSquareModel;
namespace direction = linkquant::direction;
namespace lk = linkquant::link;
namespace magnitude = linkquant::magnitude;

namespace {

direction::GenerateOptions quick_opts(std::uint64_t seed = 1) {
  direction::GenerateOptions opts;
  opts.restarts = 8;
  opts.iterations = 1500;
  opts.seed = seed;
  return opts;
}

lk::ProductSystem small_system(const ChiSquareModel& model, double q,
                                 double gamma0, std::int64_t magLevels,
                                 std::int64_t dirLines) {
  return lk::make_system(
      model, q, gamma0, magnitude::build_uniform_db(model, q, magLevels),
      lk::DirectionInfo::materialized(
          direction::generate(model.dimension(), dirLines, quick_opts())));
}

}  // namespace

TEST_CASE("system assembly validates its parts") {
  const ChiSquareModel m(3);
  const double q = 1e-2;
  const auto mag = magnitude::build_uniform_db(m, q, 8);
  const auto dir = lk::DirectionInfo::materialized(
      direction::generate(3, 8, quick_opts()));

  const lk::ProductSystem sys = lk::make_system(m, q, 1.0, mag, dir);
  CHECK(sys.codebookSize == 8 * 8 + 1);  // one extra word flags outage
  CHECK(sys.outageRadiusSq == mag.levels.front());
  CHECK(sys.q == q);
  CHECK(sys.gamma0 == 1.0);

  // Magnitude anchored elsewhere than the outage threshold.
  auto off = mag;
  for (double& y : off.levels) y *= 1.01;
  CHECK_THROWS_AS(lk::make_system(m, q, 1.0, off, dir),
                  std::invalid_argument);

  // Dimension mismatch between model and direction codebook.
  const auto dir4 = lk::DirectionInfo::materialized(
      direction::generate(4, 8, quick_opts()));
  CHECK_THROWS_AS(lk::make_system(m, q, 1.0, mag, dir4),
                  std::invalid_argument);

  CHECK_THROWS_AS(lk::make_system(m, 0.0, 1.0, mag, dir),
                  std::invalid_argument);
  CHECK_THROWS_AS(lk::make_system(m, q, 0.0, mag, dir),
                  std::invalid_argument);

  // Extrapolated direction sides assemble fine (for analytic work).
  const auto extra = lk::DirectionInfo::extrapolated(1 << 10, 0.11);
  const lk::ProductSystem esys = lk::make_system(m, q, 1.0, mag, extra);
  CHECK(esys.codebookSize == 8 * (1 << 10) + 1);
  CHECK_FALSE(esys.dir.is_materialized());

  CHECK_THROWS_AS(lk::DirectionInfo::extrapolated(0, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(lk::DirectionInfo::extrapolated(8, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(lk::DirectionInfo::extrapolated(8, 1.5),
                  std::invalid_argument);
}

TEST_CASE("quantization reports the floor cell and nearest line") {
  const ChiSquareModel m(3);
  const double q = 1e-2;
  const lk::ProductSystem sys = small_system(m, q, 1.0, 8, 8);
  const auto& levels = sys.mag.levels;
  const auto& cb = *sys.dir.codebook;

  // Deep fade: below the outage threshold nothing is transmitted.
  const std::vector<double> faded = {1e-3, 1e-3, 1e-3};
  const auto out = lk::quantize(sys, faded);
  CHECK(out.inOutage);
  CHECK(out.magIndex == -1);
  CHECK(out.dirIndex == -1);
  CHECK(out.quantizedY == 0.0);
  CHECK(lk::transmit_power(sys, out, lk::PhiMode::Paper) == 0.0);
  CHECK_FALSE(lk::beamformer(sys, out).has_value());

  // Random channels: the reported cell must match a direct linear scan.
  linkquant::rng::PhiloxStream stream(99, 0);
  std::vector<double> h(3);
  int nontrivial = 0;
  for (std::uint64_t s = 0; s < 500; ++s) {
    linkquant::rng::fill_standard_normal(stream, s, h);
    double y = 0.0;
    for (double x : h) y += x * x;
    const auto qc = lk::quantize(sys, h);
    if (y < levels.front()) {
      CHECK(qc.inOutage);
      continue;
    }
    ++nontrivial;
    std::int64_t cell = 0;
    while (cell + 1 < sys.mag.size() && levels[cell + 1] <= y) ++cell;
    CHECK(qc.magIndex == cell);
    CHECK(qc.quantizedY == levels[cell]);
    CHECK(qc.quantizedY <= y);
    CHECK(qc.dirIndex ==
          static_cast<std::int64_t>(direction::quantize_direction(cb, h)));
    CHECK(qc.quantizedDir == cb.vectors[static_cast<std::size_t>(qc.dirIndex)]);
  }
  CHECK(nontrivial > 400);

  // Cells are closed on the left: hitting a level exactly selects it.
  std::vector<double> edge = {std::sqrt(levels[3]), 0.0, 0.0};
  const double ss = edge[0] * edge[0];
  const auto qc = lk::quantize(sys, edge);
  CHECK(qc.magIndex == (ss >= levels[3] ? 3 : 2));

  const std::vector<double> zero = {0.0, 0.0, 0.0};
  CHECK(lk::quantize(sys, zero).inOutage);  // zero power lies in the ball
  const std::vector<double> bad = {1.0, std::nan(""), 0.0};
  CHECK_THROWS_AS(lk::quantize(sys, bad), std::invalid_argument);
}

TEST_CASE("power control hits the target SNR at the cell corner") {
  const ChiSquareModel m(3);
  const double q = 1e-2;
  const double gamma0 = 2.5;
  const lk::ProductSystem sys = small_system(m, q, gamma0, 8, 8);

  linkquant::rng::PhiloxStream stream(7, 0);
  std::vector<double> h(3);
  for (std::uint64_t s = 0; s < 50; ++s) {
    linkquant::rng::fill_standard_normal(stream, s, h);
    const auto qc = lk::quantize(sys, h);
    if (qc.inOutage) continue;
    for (auto mode : {lk::PhiMode::Paper, lk::PhiMode::Strict}) {
      const double p = lk::transmit_power(sys, qc, mode);
      const double phi = lk::effective_phi(sys, mode);
      CHECK(p * qc.quantizedY * std::cos(phi) * std::cos(phi) ==
            doctest::Approx(gamma0).epsilon(1e-12));
    }
    const auto bf = lk::beamformer(sys, qc);
    REQUIRE(bf.has_value());
    double norm = 0.0;
    for (double x : *bf) norm += x * x;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("strict mode honours the covering radius when it exceeds the design angle") {
  const ChiSquareModel m(3);
  const double q = 1e-2;

  // Hand-built direction side: two lines 45 degrees apart, with a measured
  // covering radius larger than the packing half-angle.
  direction::DirectionCodebook cb;
  cb.M = 3;
  cb.seed = 0;
  const double s2 = std::numbers::sqrt2 / 2.0;
  cb.vectors = {{1.0, 0.0, 0.0}, {s2, s2, 0.0}};
  cb.delta = direction::min_chordal(cb.vectors);  // sin 45 deg
  cb.phi = std::asin(cb.delta);
  cb.coveringRadiusEstimate = 1.2;

  const lk::ProductSystem sys =
      lk::make_system(m, q, 1.0, magnitude::build_uniform_db(m, q, 4),
                        lk::DirectionInfo::materialized(cb));

  const double paper = lk::effective_phi(sys, lk::PhiMode::Paper);
  const double strict = lk::effective_phi(sys, lk::PhiMode::Strict);
  CHECK(paper == doctest::Approx(std::asin(s2)).epsilon(1e-12));
  CHECK(strict == doctest::Approx(1.2).epsilon(1e-12));

  const std::vector<double> h = {0.9, 2.0, 0.4};
  const auto qc = lk::quantize(sys, h);
  REQUIRE_FALSE(qc.inOutage);
  CHECK(lk::transmit_power(sys, qc, lk::PhiMode::Strict) >
        lk::transmit_power(sys, qc, lk::PhiMode::Paper));

  // When the design angle dominates, the two modes agree.
  const lk::ProductSystem generated = small_system(m, q, 1.0, 4, 12);
  const double gPhi = lk::effective_phi(generated, lk::PhiMode::Paper);
  const double gStrict = lk::effective_phi(generated, lk::PhiMode::Strict);
  CHECK(gStrict >= gPhi);
  CHECK(gStrict ==
        std::max(gPhi, generated.dir.coveringRadius));
}

TEST_CASE("degenerate openings make beamforming infeasible") {
  const ChiSquareModel m(3);
  const double q = 1e-2;
  const auto mag = magnitude::build_uniform_db(m, q, 4);
  // sin(phi) = 1 is allowed at assembly but cannot beamform.
  const lk::ProductSystem sys = lk::make_system(
      m, q, 1.0, mag, lk::DirectionInfo::extrapolated(2, 1.0));
  CHECK(lk::effective_phi(sys, lk::PhiMode::Paper) ==
        doctest::Approx(std::numbers::pi / 2.0).epsilon(1e-12));
  CHECK_THROWS_AS(lk::average_power_analytic(m, sys, lk::PhiMode::Paper),
                  lk::infeasible_codebook);
}

TEST_CASE("analytic average power factors into magnitude and direction parts") {
  const ChiSquareModel m(3);
  const double q = 1e-2;
  const double gamma0 = 2.5;

  const lk::ProductSystem sys = small_system(m, q, gamma0, 16, 8);
  const double phi = lk::effective_phi(sys, lk::PhiMode::Paper);
  const double magPart = magnitude::average_power(m, sys.mag, q);
  CHECK(lk::average_power_analytic(m, sys, lk::PhiMode::Paper) ==
        doctest::Approx(gamma0 * magPart / (std::cos(phi) * std::cos(phi)))
            .epsilon(1e-12));

  // Extrapolated direction sides use the same closed form.
  const lk::ProductSystem esys = lk::make_system(
      m, q, gamma0, magnitude::build_uniform_db(m, q, 16),
      lk::DirectionInfo::extrapolated(1 << 12, 0.09));
  const double cos2 = 1.0 - 0.09 * 0.09;
  CHECK(lk::average_power_analytic(m, esys, lk::PhiMode::Paper) ==
        doctest::Approx(gamma0 * magPart / cos2).epsilon(1e-12));

  // More lines or more magnitude cells can only help.
  const lk::ProductSystem fewLines = small_system(m, q, gamma0, 16, 6);
  const lk::ProductSystem moreLines = small_system(m, q, gamma0, 16, 12);
  CHECK(lk::average_power_analytic(m, moreLines, lk::PhiMode::Paper) <
        lk::average_power_analytic(m, fewLines, lk::PhiMode::Paper));
  const lk::ProductSystem fewCells = small_system(m, q, gamma0, 8, 8);
  const lk::ProductSystem moreCells = small_system(m, q, gamma0, 16, 8);
  CHECK(lk::average_power_analytic(m, moreCells, lk::PhiMode::Paper) <
        lk::average_power_analytic(m, fewCells, lk::PhiMode::Paper));
}

TEST_CASE("product power ceiling") {
  const ChiSquareModel m(5);
  const double q = 1e-4;

  // Closed form: (1 + L + omega L^2) / (1 - 16 lambda^2 Nddot^(-2/(M-1))).
  const std::int64_t N = 64;
  const std::int64_t Nddot = 4096;
  const double a = m.inv_cdf(q);
  const double L = magnitude::solve_Lc(m.constants().eta / a, N);
  const double omega = m.constants().omega;
  const double lam = direction::lambda_M(5);
  const double packTerm =
      16.0 * lam * lam * std::pow(static_cast<double>(Nddot), -0.5);
  const double expect = (1.0 + L + omega * L * L) / (1.0 - packTerm);
  CHECK(lk::product_power_bound(m, q, N, Nddot) ==
        doctest::Approx(expect).epsilon(1e-12));

  // The ceiling blows up exactly when the packing term reaches one:
  // (16 lambda_5^2)^2 = 2048/3 = 682.67 lines.
  CHECK(std::isinf(lk::product_power_bound(m, q, N, 682)));
  CHECK(std::isfinite(lk::product_power_bound(m, q, N, 683)));

  // A real system (extrapolated opening from the fitted packing law) stays
  // below the ceiling, which assumes the worst admissible packing.
  const lk::ProductSystem sys = lk::make_system(
      m, q, 1.0, magnitude::build_uniform_db(m, q, N),
      lk::DirectionInfo::extrapolated(
          Nddot, 1.97 * std::pow(static_cast<double>(Nddot), -0.25)));
  const double ratio =
      lk::average_power_analytic(m, sys, lk::PhiMode::Paper) /
      (m.constants().rhoCsi);
  CHECK(ratio < lk::product_power_bound(m, q, N, Nddot));
}

TEST_CASE("monte-carlo evaluation is deterministic and statistically sound") {
  const ChiSquareModel m(3);
  const double q = 1e-2;
  const double gamma0 = 1.5;
  const lk::ProductSystem sys = small_system(m, q, gamma0, 8, 8);
  const std::int64_t samples = 10000;

  const auto rep =
      lk::monte_carlo(m, sys, samples, 11, lk::PhiMode::Strict);
  CHECK(rep.samples == samples);
  CHECK(rep.csiPower == doctest::Approx(gamma0 * 1.0).epsilon(1e-12));

  // Strict mode guarantees the target SNR for every quantized channel.
  CHECK(rep.snrViolations == 0);

  // Outage frequency within four binomial standard errors of q.
  CHECK(rep.outageStderr > 0.0);
  CHECK(std::fabs(rep.outageEmpirical - q) <= 4.0 * rep.outageStderr);

  // The sample mean tracks the closed form within five standard errors.
  CHECK(rep.avgPowerMCStderr > 0.0);
  CHECK(std::fabs(rep.avgPowerMC - rep.avgPowerAnalytic) <=
        5.0 * rep.avgPowerMCStderr);
  CHECK(rep.avgPowerAnalytic ==
        doctest::Approx(
            lk::average_power_analytic(m, sys, lk::PhiMode::Strict))
            .epsilon(1e-12));

  // Bitwise determinism.
  const auto again =
      lk::monte_carlo(m, sys, samples, 11, lk::PhiMode::Strict);
  CHECK(again.avgPowerMC == rep.avgPowerMC);
  CHECK(again.avgPowerMCStderr == rep.avgPowerMCStderr);
  CHECK(again.outageEmpirical == rep.outageEmpirical);
  CHECK(again.snrViolations == rep.snrViolations);

  // A different seed moves the estimate but not the analytic value.
  const auto shifted =
      lk::monte_carlo(m, sys, samples, 12, lk::PhiMode::Strict);
  CHECK(shifted.avgPowerMC != rep.avgPowerMC);
  CHECK(shifted.avgPowerAnalytic == rep.avgPowerAnalytic);

  CHECK_THROWS_AS(lk::monte_carlo(m, sys, 9999, 11, lk::PhiMode::Paper),
                  std::invalid_argument);

  const lk::ProductSystem esys = lk::make_system(
      m, q, gamma0, magnitude::build_uniform_db(m, q, 8),
      lk::DirectionInfo::extrapolated(64, 0.3));
  CHECK_THROWS_AS(lk::monte_carlo(m, esys, samples, 11, lk::PhiMode::Paper),
                  std::invalid_argument);
}
