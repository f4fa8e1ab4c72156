// SPDX-License-Identifier: MIT
//
// Direction (beamforming) codebooks: packings of N lines through the origin
// of R^M, scored by the minimum pairwise chordal distance
//
//     delta = min_{i<j} sqrt(1 - (u_i . u_j)^2) = min_{i<j} sin(angle).
//
// Antipodal points are identified (the receiver reports a line, the sign is
// irrelevant to the transmit power), so all distances and quantization
// decisions use |dot|.  Codebooks are produced by a smoothed-maximin
// optimizer with random restarts, polished by direct maximin ascent, and are
// deterministic given (M, N, restarts, iterations, seed).  Generation is
// expensive, so codebooks are cached as JSON keyed by (M, N, seed).
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace linkquant::direction {

struct DirectionCodebook {
  int M = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> vectors;  // N unit rows of length M
  double delta = 0.0;                        // min pairwise chordal distance
  double phi = 0.0;                          // asin(delta)
  double coveringRadiusEstimate = 0.0;       // radians; see estimator below
  std::int64_t size() const { return static_cast<std::int64_t>(vectors.size()); }
};

struct GenerateOptions {
  int restarts = 20;
  int iterations = 4000;
  std::uint64_t seed = 1;
};

struct DirectionMatch {
  std::size_t index = 0;
  double absCosine = 0.0;  // |u_k . h| / ||h||
};

/// Builds an N-line packing in R^M.  For N <= M the canonical orthonormal
/// basis is returned (delta = 1 exactly); otherwise the optimizer runs.
DirectionCodebook generate(int M, std::int64_t N,
                           const GenerateOptions& opts = {});

/// Minimum pairwise chordal distance of a set of unit vectors.
double min_chordal(const std::vector<std::vector<double>>& vectors);

/// Opening half-angle of the packing caps: asin(min_chordal).
double cap_opening(const std::vector<std::vector<double>>& vectors);

/// Nearest codebook line to h (argmax |u_k . h|), ties to the lowest index.
/// Throws std::invalid_argument for a zero or non-finite h.
DirectionMatch match_direction(const DirectionCodebook& codebook,
                               std::span<const double> h);
std::size_t quantize_direction(const DirectionCodebook& codebook,
                               std::span<const double> h);

/// Monte-Carlo estimate of the covering radius: the largest angle any
/// direction makes with its nearest codebook line.  Samples `samples`
/// directions, locally maximizes the deepest holes found, and pads the
/// result by 0.5% so downstream worst-case uses err on the safe side.
double covering_radius_estimate(const std::vector<std::vector<double>>& vectors,
                                std::uint64_t seed,
                                std::int64_t samples = 1000000);

/// Forced-slope fit sin(phi) ~= c * N^(-1/(M-1)) through (N, sin phi)
/// points; returns c.  Throws std::invalid_argument on an empty input.
double fit_extrapolation(
    const std::vector<std::pair<std::int64_t, double>>& sizeAndSin, int M);

/// Packing constant lambda_M = (sqrt(pi) Gamma((M+1)/2) / Gamma(M/2))^(1/(M-1)).
double lambda_M(int M);

/// Surface area of the unit sphere S^(M-1) in R^M.
double sphere_area(int M);

/// Area of the double spherical cap of opening psi (both antipodal caps).
double cap_area(int M, double psi);

/// Sphere-packing ceiling on delta for N lines in R^M: 4 lambda_M N^(-1/(M-1)).
double packing_distance_bound(int M, std::int64_t N);

/// Complex-codebook counterpart: 2 N^(-1/(2(M-1))).
double packing_distance_bound_complex(int M, std::int64_t N);

/// JSON round trip (fields M, N, seed, vectors, delta, phi,
/// coveringRadiusEstimate; full double precision).
std::string to_json_string(const DirectionCodebook& codebook);
DirectionCodebook from_json_string(const std::string& text);

void save(const DirectionCodebook& codebook, const std::string& path);
std::optional<DirectionCodebook> load(const std::string& path);

/// Cache-aware accessor: loads `<cacheDir>/pack_M<M>_N<N>_s<seed>.json` when
/// present and consistent, otherwise generates and stores it.
DirectionCodebook obtain(int M, std::int64_t N, const std::string& cacheDir,
                         const GenerateOptions& opts = {});

}  // namespace linkquant::direction
