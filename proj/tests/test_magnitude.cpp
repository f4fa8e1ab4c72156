// SPDX-License-Identifier: MIT
#include "linkquant/magnitude.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "linkquant/distribution.hpp"

using linkquant::ChiSquareModel;
namespace magnitude = linkquant::magnitude;
using magnitude::CodebookKind;
using magnitude::MagnitudeCodebook;

namespace {

// Least-squares slope of y against x.
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("ratio equation solver is accurate and consistent") {
  // Reference root from a 40-digit evaluation.
  CHECK(magnitude::solve_Lc(0.5, 100) ==
        doctest::Approx(0.029131339202720209405).epsilon(1e-12));

  // Back-substitution across regimes, in log space: forming (1+L)^(n-1)
  // directly would round L into 1+L and amplify that by n-1, drowning the
  // solver's actual error for large n.
  for (double c : {0.1, 1.0, 10.0, 100.0})
    for (std::int64_t n : {std::int64_t{2}, std::int64_t{10},
                           std::int64_t{1024}, std::int64_t{1000000}}) {
      const double L = magnitude::solve_Lc(c, n);
      CHECK(L > 0.0);
      const double residual = std::log(L) +
                              static_cast<double>(n - 1) * std::log1p(L) -
                              std::log(c);
      CHECK(std::fabs(residual) <= 1e-12);
    }

  // One level: L (1+L)^0 = c exactly.
  CHECK(magnitude::solve_Lc(3.25, 1) == doctest::Approx(3.25).epsilon(1e-14));

  // The root shrinks as the codebook grows.
  CHECK(magnitude::solve_Lc(1.0, 10) > magnitude::solve_Lc(1.0, 100));
  CHECK(magnitude::solve_Lc(1.0, 100) > magnitude::solve_Lc(1.0, 1000));

  CHECK_THROWS_AS(magnitude::solve_Lc(0.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(magnitude::solve_Lc(-1.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(magnitude::solve_Lc(1.0, 0), std::invalid_argument);
}

TEST_CASE("log-scaling exponent of the ratio root") {
  // Reference values from the same 40-digit evaluation.
  CHECK(magnitude::zeta(0.1, 1024) ==
        doctest::Approx(0.82298461806852029).epsilon(1e-9));
  CHECK(magnitude::zeta(1.0, 1024) ==
        doctest::Approx(0.75980184061118507).epsilon(1e-9));
  CHECK(magnitude::zeta(10.0, 1024) ==
        doctest::Approx(0.71357516186240121).epsilon(1e-9));

  // The exponent climbs toward 1 as the codebook grows, from below.
  for (double c : {0.1, 1.0, 10.0}) {
    const double z10 = magnitude::zeta(c, 1 << 10);
    const double z16 = magnitude::zeta(c, 1 << 16);
    CHECK(z10 > 0.7);
    CHECK(z10 < 0.85);
    CHECK(z16 > z10);
    CHECK(z16 < 1.0);
  }
  CHECK_THROWS_AS(magnitude::zeta(1.0, 1), std::invalid_argument);
}

TEST_CASE("geometric codebooks anchor at the outage threshold") {
  const ChiSquareModel m(4);
  const double q = 1e-4;
  const double a = m.inv_cdf(q);

  const MagnitudeCodebook cb = magnitude::build_uniform_db(m, q, 64);
  CHECK(cb.size() == 64);
  CHECK(cb.kind == CodebookKind::UniformDb);
  CHECK(cb.levels.front() == a);
  CHECK(cb.a == a);

  // Constant ratio: the stored r reproduces every adjacent quotient.
  for (std::size_t i = 0; i + 1 < cb.levels.size(); ++i)
    CHECK(cb.levels[i + 1] / cb.levels[i] ==
          doctest::Approx(cb.r).epsilon(1e-12));

  // The construction makes the last level exactly eta / L.
  const double L = cb.r - 1.0;
  CHECK(cb.levels.back() * L ==
        doctest::Approx(m.constants().eta).epsilon(1e-9));

  const MagnitudeCodebook custom = magnitude::build_geometric(m, q, 8, 1.05);
  CHECK(custom.kind == CodebookKind::Custom);
  CHECK(custom.r == 1.05);
  CHECK(custom.levels.front() == a);

  CHECK_THROWS_AS(magnitude::build_geometric(m, q, 1, 1.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(magnitude::build_geometric(m, q, 8, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(magnitude::build_geometric(m, q, std::int64_t{1} << 23, 1.5),
                  std::length_error);
}

TEST_CASE("alternative ratio matches its closed form") {
  const std::int64_t N = 1024;
  const double lnN = std::log(static_cast<double>(N));
  const double expect =
      1.0 + std::pow(static_cast<double>(N), -1.0 + 1.0 / std::sqrt(lnN));
  CHECK(magnitude::variant_ratio(N) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(magnitude::variant_ratio(16) > 1.0);
  CHECK_THROWS_AS(magnitude::variant_ratio(1), std::invalid_argument);
}

TEST_CASE("average power of explicit codebooks") {
  const ChiSquareModel m(5);
  const double q = 1e-4;
  const double a = m.inv_cdf(q);

  // A single level transmits at 1/a for every non-outage channel.
  MagnitudeCodebook one;
  one.levels = {a};
  CHECK(magnitude::average_power(m, one, q) ==
        doctest::Approx((1.0 - q) / a).epsilon(1e-12));

  // Frozen reference for the uniform-dB codebook (independent summation).
  const MagnitudeCodebook cb = magnitude::build_uniform_db(m, q, 64);
  CHECK(magnitude::average_power(m, cb, q) ==
        doctest::Approx(0.34638934641359).epsilon(1e-10));

  // Contract violations.
  MagnitudeCodebook off = cb;
  off.levels.front() *= 1.001;
  CHECK_THROWS_AS(magnitude::average_power(m, off, q), std::invalid_argument);
  MagnitudeCodebook unsorted = cb;
  std::swap(unsorted.levels[3], unsorted.levels[4]);
  CHECK_THROWS_AS(magnitude::average_power(m, unsorted, q),
                  std::invalid_argument);
  MagnitudeCodebook empty;
  CHECK_THROWS_AS(magnitude::average_power(m, empty, q), std::invalid_argument);
}

TEST_CASE("closed-form power path agrees with direct summation") {
  const ChiSquareModel m(4);
  const double q = 1e-4;

  // Sizes on the direct-summation path.
  MagnitudeCodebook one;
  one.levels = {m.inv_cdf(q)};
  CHECK(magnitude::uniform_db_average_power(m, q, 1) ==
        doctest::Approx(magnitude::average_power(m, one, q)).epsilon(1e-12));
  for (std::int64_t N : {std::int64_t{2}, std::int64_t{37}, std::int64_t{1000}})
    CHECK(magnitude::uniform_db_average_power(m, q, N) ==
          doctest::Approx(magnitude::average_power(
                              m, magnitude::build_uniform_db(m, q, N), q))
              .epsilon(1e-12));

  // Beyond the switch point the closed-form path takes over; cross-validate
  // against a fully materialized codebook.
  const std::int64_t big = std::int64_t{1} << 16;
  const double direct = magnitude::average_power(
      m, magnitude::build_uniform_db(m, q, big), q);
  CHECK(magnitude::uniform_db_average_power(m, q, big) ==
        doctest::Approx(direct).epsilon(1e-11));

  CHECK_THROWS_AS(magnitude::uniform_db_average_power(m, q, 0),
                  std::invalid_argument);
}

TEST_CASE("average power decreases toward the conditional floor") {
  const ChiSquareModel m(4);
  const double q = 1e-4;
  const double floor = m.tail_mean_inverse(m.inv_cdf(q));

  std::vector<double> lx, ly;
  double prev = magnitude::uniform_db_average_power(m, q, 2);
  for (int k = 2; k <= 10; ++k) {
    const double p = magnitude::uniform_db_average_power(m, q, 1 << k);
    CHECK(p > floor);
    if (k > 2) CHECK(p < prev);
    prev = p;
    if (k >= 4) {
      lx.push_back(static_cast<double>(k));
      ly.push_back(std::log2(p - floor));
    }
  }
  // The excess over the floor decays at least as fast as ~1/N at this scale.
  CHECK(fitted_slope(lx, ly) <= -0.8);

  // At very large sizes the power hugs the floor from above.
  const double p20 = magnitude::uniform_db_average_power(m, q, 1 << 20);
  CHECK(p20 > floor);
  CHECK(p20 < floor * (1.0 + 1e-4));
}

TEST_CASE("analytic gradient matches finite differences") {
  const ChiSquareModel m4(4);
  const double q4 = 1e-4;
  const MagnitudeCodebook uni = magnitude::build_uniform_db(m4, q4, 16);

  const auto check_fd = [](const ChiSquareModel& m, double q,
                           const MagnitudeCodebook& cb) {
    const std::vector<double> g = magnitude::gradient(m, cb, q);
    REQUIRE(g.size() == cb.levels.size() - 1);
    for (std::size_t n = 1; n < cb.levels.size(); ++n) {
      MagnitudeCodebook up = cb, dn = cb;
      const double h = 1e-6 * cb.levels[n];
      up.levels[n] += h;
      dn.levels[n] -= h;
      const double fd = (magnitude::average_power(m, up, q) -
                         magnitude::average_power(m, dn, q)) /
                        (2.0 * h);
      CHECK(g[n - 1] == doctest::Approx(fd).epsilon(5e-6));
    }
  };
  check_fd(m4, q4, uni);

  // An irregular (non-geometric) codebook exercises the general formula.
  const ChiSquareModel m5(5);
  const double q5 = 1e-3;
  MagnitudeCodebook irregular;
  irregular.levels = {1.0, 1.9, 2.6, 5.5, 9.0, 21.0};
  const double a5 = m5.inv_cdf(q5);
  for (double& y : irregular.levels) y *= a5;
  check_fd(m5, q5, irregular);
}

TEST_CASE("numeric optimizer converges and never loses to its start") {
  const ChiSquareModel m(4);
  const double q = 1e-4;
  magnitude::OptimizeReport report;
  const MagnitudeCodebook best =
      magnitude::optimize_numeric(m, q, 8, 4, 7, &report);

  CHECK(report.converged);
  CHECK(best.kind == CodebookKind::Numeric);
  CHECK(best.levels.front() == m.inv_cdf(q));
  CHECK(report.bestRestart >= 0);
  CHECK(report.bestRestart < 4);

  const double pBest = magnitude::average_power(m, best, q);
  CHECK(report.power == doctest::Approx(pBest).epsilon(1e-12));
  CHECK(pBest <= magnitude::uniform_db_average_power(m, q, 8) * (1.0 + 1e-15));

  // First-order optimality.
  double norm = 0.0;
  for (double g : magnitude::gradient(m, best, q)) norm += g * g;
  CHECK(std::sqrt(norm) <= 1e-7);

  // Determinism.
  const MagnitudeCodebook again = magnitude::optimize_numeric(m, q, 8, 4, 7);
  CHECK(best.levels == again.levels);

  CHECK_THROWS_AS(magnitude::optimize_numeric(m, q, 1, 4, 7),
                  std::invalid_argument);
}

// Independent oracle for the stationarity system: treat the first free level
// as a shooting parameter, propagate the three-term recurrence
//     S(y(n+1)) = S(y(n)) - y(n)^2 f(y(n)) (1/y(n-1) - 1/y(n)),
// and bisect on the terminal condition f(y(N)) (1/y(N-1) - 1/y(N)) =
// S(y(N)) / y(N)^2.  Any interior stationary point of the average power must
// satisfy exactly this system, so the coordinate-descent optimizer and the
// shooting method have to land on the same codebook.
TEST_CASE("numeric optimizer agrees with a shooting-method oracle") {
  const ChiSquareModel m(4);
  const double q = 1e-4;
  const std::int64_t N = 10;
  const double a = m.inv_cdf(q);

  const auto inv_survival = [&](double s) { return m.inv_cdf(1.0 - s); };

  // Propagates levels from y2; returns the terminal residual, or NaN when the
  // trajectory leaves the feasible region (survival must stay decreasing).
  std::vector<double> levels(static_cast<std::size_t>(N));
  const auto residual = [&](double y2) {
    levels[0] = a;
    levels[1] = y2;
    for (std::size_t n = 1; n + 1 < levels.size(); ++n) {
      const double yl = levels[n - 1];
      const double yn = levels[n];
      const double s = m.survival(yn) -
                       yn * yn * m.pdf(yn) * (1.0 / yl - 1.0 / yn);
      if (!(s > 0.0) || !(s < m.survival(yn)))
        return std::numeric_limits<double>::quiet_NaN();
      levels[n + 1] = inv_survival(s);
      if (!(levels[n + 1] > yn))
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double yN = levels.back();
    const double yP = levels[levels.size() - 2];
    return m.pdf(yN) * (1.0 / yP - 1.0 / yN) - m.survival(yN) / (yN * yN);
  };

  // Bracket the shooting parameter around the uniform-dB spacing.
  const MagnitudeCodebook uni = magnitude::build_uniform_db(m, q, N);
  double lo = a * (1.0 + 0.02 * (uni.r - 1.0));
  double hi = a * std::pow(uni.r, 3.0);
  double flo = residual(lo);
  REQUIRE(std::isfinite(flo));
  double fhi = residual(hi);
  // Shrink hi until the trajectory is feasible, then require a sign change.
  int guard = 0;
  while (!std::isfinite(fhi) && ++guard < 200) {
    hi = lo + 0.8 * (hi - lo);
    fhi = residual(hi);
  }
  REQUIRE(std::isfinite(fhi));
  REQUIRE(((flo > 0.0) != (fhi > 0.0)));
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = residual(mid);
    if (!std::isfinite(fm) || (fm > 0.0) == (fhi > 0.0)) {
      hi = mid;
      if (std::isfinite(fm)) fhi = fm;
    } else {
      lo = mid;
    }
  }
  residual(0.5 * (lo + hi));  // leave `levels` at the converged trajectory

  const MagnitudeCodebook numeric = magnitude::optimize_numeric(m, q, N, 6, 1);
  REQUIRE(numeric.size() == N);
  for (std::size_t n = 0; n < levels.size(); ++n)
    CHECK(numeric.levels[n] ==
          doctest::Approx(levels[n]).epsilon(1e-6));

  MagnitudeCodebook shot;
  shot.levels = levels;
  CHECK(magnitude::average_power(m, shot, q) ==
        doctest::Approx(magnitude::average_power(m, numeric, q))
            .epsilon(1e-9));
}

TEST_CASE("uniform-dB diagnostics carry frozen regression values") {
  const ChiSquareModel m(4);
  const double q = 1e-4;
  const double a = m.inv_cdf(q);
  const double eta = m.constants().eta;

  // Gradient norms at the uniform-dB codebook, frozen from a 40-digit
  // independent evaluation of the stationarity system.
  const double frozen[] = {5.0758465576e-2, 1.8043645433e-2, 6.7915272458e-3,
                           2.6238835759e-3};
  std::vector<double> lx, ld;
  for (int k = 4; k <= 7; ++k) {
    const std::int64_t N = std::int64_t{1} << k;
    const auto d = magnitude::diagnostics(m, q, N);
    CHECK(d.gradientNorm == doctest::Approx(frozen[k - 4]).epsilon(5e-9));
    CHECK(d.gradientNorm <= d.theorem1Bound);

    // Internal consistency of the reported fields.
    CHECK(d.a == a);
    const double L = magnitude::solve_Lc(eta / a, N);
    CHECK(d.L == doctest::Approx(L).epsilon(1e-12));
    CHECK(d.r == doctest::Approx(1.0 + L).epsilon(1e-12));
    CHECK(d.zeta == doctest::Approx(magnitude::zeta(eta / a, N)).epsilon(1e-12));
    const double omega = m.constants().omega;
    CHECK(d.theorem2Bound ==
          doctest::Approx(1.0 + L + omega * L * L).epsilon(1e-12));

    // mu is the supremum of |f'| beyond the outage threshold.
    double gridMax = 0.0;
    for (int i = 0; i <= 4000; ++i) {
      const double y = a + (30.0 - a) * i / 4000.0;
      gridMax = std::max(gridMax, std::fabs(m.pdf_deriv(y)));
    }
    CHECK(d.mu >= gridMax * (1.0 - 1e-9));
    CHECK(d.mu <= gridMax * 1.05);

    CHECK(d.tailTermD > 0.0);
    lx.push_back(static_cast<double>(k));
    ld.push_back(std::log2(d.tailTermD));
  }
  // The tail term decays much faster than the gradient norm itself.
  CHECK(fitted_slope(lx, ld) <= -2.5);

  CHECK_THROWS_AS(magnitude::diagnostics(m, q, 3), std::invalid_argument);
}

TEST_CASE("codebook serialization") {
  const ChiSquareModel m(4);
  const double q = 1e-3;
  const MagnitudeCodebook cb = magnitude::build_uniform_db(m, q, 6);

  const std::string json = magnitude::to_json_string(m, q, cb);
  CHECK(json.find("\"uniform-dB\"") != std::string::npos);
  CHECK(json.find("\"levels\"") != std::string::npos);
  CHECK(json.find("\"M\"") != std::string::npos);

  std::ostringstream csv1, csv2;
  magnitude::write_levels_csv(csv1, cb);
  magnitude::write_levels_csv(csv2, cb);
  CHECK(csv1.str() == csv2.str());

  std::istringstream in(csv1.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "n,y_n,y_n_dB");
  int rows = 0;
  while (std::getline(in, line)) {
    if (rows == 0) {
      const auto c1 = line.find(',');
      const auto c2 = line.find(',', c1 + 1);
      REQUIRE(c1 != std::string::npos);
      REQUIRE(c2 != std::string::npos);
      CHECK(line.substr(0, c1) == "1");
      // Full-precision round trip of the level value.
      CHECK(std::stod(line.substr(c1 + 1, c2 - c1 - 1)) == cb.levels[0]);
      CHECK(std::stod(line.substr(c2 + 1)) ==
            doctest::Approx(10.0 * std::log10(cb.levels[0])).epsilon(1e-12));
    }
    ++rows;
  }
  CHECK(rows == 6);
}
