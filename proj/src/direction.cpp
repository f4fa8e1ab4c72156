// SPDX-License-Identifier: MIT
#include "linkquant/direction.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "linkquant/quadrature.hpp"
#include "linkquant/rng.hpp"

namespace linkquant::direction {

namespace {

constexpr std::int64_t kMaxVectors = 4096;
constexpr std::uint64_t kCoveringStream = ~std::uint64_t{0};
constexpr double kCoveringPad = 1.005;

void check_dims(int M, std::int64_t N) {
  if (M < 2) throw std::invalid_argument("direction codebook: M must be >= 2");
  if (N < 2) throw std::invalid_argument("direction codebook: N must be >= 2");
  if (N > kMaxVectors)
    throw std::length_error("direction codebook: N too large");
}

double dot(const double* a, const double* b, int M) {
  double s = 0.0;
  for (int m = 0; m < M; ++m) s += a[m] * b[m];
  return s;
}

// Normalizes a row in place; degenerate rows become a basis vector.
void normalize_row(double* v, int M, int fallbackAxis) {
  const double n = std::sqrt(dot(v, v, M));
  if (n < 1e-12) {
    for (int m = 0; m < M; ++m) v[m] = 0.0;
    v[fallbackAxis % M] = 1.0;
    return;
  }
  for (int m = 0; m < M; ++m) v[m] /= n;
}

// Largest |cosine| over all pairs (the closest pair of lines).
double max_abs_cosine(const std::vector<double>& u, std::int64_t N, int M) {
  double cmax = 0.0;
  for (std::int64_t i = 0; i < N; ++i)
    for (std::int64_t j = i + 1; j < N; ++j)
      cmax = std::max(cmax, std::fabs(dot(&u[i * M], &u[j * M], M)));
  return std::min(cmax, 1.0);
}

double delta_from_cos(double c) { return std::sqrt(std::max(0.0, 1.0 - c * c)); }

// Log-sum-exp smoothed maximum of the squared pairwise cosines, with
// gradient.  Returns the energy; grad (N*M) receives dE/du (not yet
// tangent-projected).
double lse_energy_grad(const std::vector<double>& u, std::int64_t N, int M,
                       double beta, std::vector<double>* grad,
                       std::vector<double>& dbuf) {
  const std::int64_t pairs = N * (N - 1) / 2;
  dbuf.resize(static_cast<std::size_t>(pairs));
  double smax = 0.0;
  std::int64_t p = 0;
  for (std::int64_t i = 0; i < N; ++i)
    for (std::int64_t j = i + 1; j < N; ++j, ++p) {
      const double d = dot(&u[i * M], &u[j * M], M);
      dbuf[static_cast<std::size_t>(p)] = d;
      smax = std::max(smax, d * d);
    }
  double W = 0.0;
  p = 0;
  for (std::int64_t i = 0; i < N; ++i)
    for (std::int64_t j = i + 1; j < N; ++j, ++p) {
      const double d = dbuf[static_cast<std::size_t>(p)];
      W += std::exp(beta * (d * d - smax));
    }
  const double energy = smax + std::log(W) / beta;
  if (grad != nullptr) {
    grad->assign(u.size(), 0.0);
    p = 0;
    for (std::int64_t i = 0; i < N; ++i)
      for (std::int64_t j = i + 1; j < N; ++j, ++p) {
        const double d = dbuf[static_cast<std::size_t>(p)];
        const double w = std::exp(beta * (d * d - smax)) / W;
        const double c = 2.0 * w * d;
        for (int m = 0; m < M; ++m) {
          (*grad)[i * M + m] += c * u[j * M + m];
          (*grad)[j * M + m] += c * u[i * M + m];
        }
      }
  }
  return energy;
}

// Annealed smoothed-maximin descent followed by direct maximin polish.
void optimize_pack(std::vector<double>& u, std::int64_t N, int M,
                   int iterations) {
  std::vector<double> grad, trial, dbuf;
  const double betas[] = {32, 64, 128, 256, 512, 1024, 2048, 4096};
  const int perBeta = std::max(10, iterations / 8);
  for (double beta : betas) {
    double step = 0.05;
    for (int it = 0; it < perBeta; ++it) {
      const double e = lse_energy_grad(u, N, M, beta, &grad, dbuf);
      // Tangent projection keeps the update on the sphere to first order.
      for (std::int64_t i = 0; i < N; ++i) {
        const double radial = dot(&grad[i * M], &u[i * M], M);
        for (int m = 0; m < M; ++m) grad[i * M + m] -= radial * u[i * M + m];
      }
      trial = u;
      for (std::size_t k = 0; k < u.size(); ++k) trial[k] -= step * grad[k];
      for (std::int64_t i = 0; i < N; ++i)
        normalize_row(&trial[i * M], M, static_cast<int>(i));
      const double et = lse_energy_grad(trial, N, M, beta, nullptr, dbuf);
      if (et <= e) {
        u.swap(trial);
        step = std::min(step * 1.25, 0.5);
      } else {
        step *= 0.4;
        if (step < 1e-9) break;
      }
    }
  }

  // Maximin polish: repeatedly push the currently closest line pairs apart
  // with a geometrically decaying step; keep the best configuration seen.
  std::vector<double> best = u;
  double bestCos = max_abs_cosine(u, N, M);
  std::vector<double> disp(u.size());
  double eta = 0.02;
  for (int t = 0; t < 600; ++t, eta *= 0.985) {
    const double cmax = max_abs_cosine(u, N, M);
    const double active = cmax * 0.98;
    std::fill(disp.begin(), disp.end(), 0.0);
    for (std::int64_t i = 0; i < N; ++i)
      for (std::int64_t j = i + 1; j < N; ++j) {
        const double d = dot(&u[i * M], &u[j * M], M);
        if (std::fabs(d) < active) continue;
        const double sgn = (d >= 0.0) ? 1.0 : -1.0;
        for (int m = 0; m < M; ++m) {
          // Tangent components of the partner vector, pushed away.
          disp[i * M + m] -= eta * sgn * (u[j * M + m] - d * u[i * M + m]);
          disp[j * M + m] -= eta * sgn * (u[i * M + m] - d * u[j * M + m]);
        }
      }
    for (std::size_t k = 0; k < u.size(); ++k) u[k] += disp[k];
    for (std::int64_t i = 0; i < N; ++i)
      normalize_row(&u[i * M], M, static_cast<int>(i));
    const double c = max_abs_cosine(u, N, M);
    if (c < bestCos) {
      bestCos = c;
      best = u;
    }
  }
  u = best;
}

void check_direction_vector(std::span<const double> h, int M) {
  if (static_cast<int>(h.size()) != M)
    throw std::invalid_argument("direction: dimension mismatch");
  double norm2 = 0.0;
  for (double x : h) {
    if (!std::isfinite(x))
      throw std::invalid_argument("direction: non-finite component");
    norm2 += x * x;
  }
  if (!(norm2 > 0.0))
    throw std::invalid_argument("direction: zero vector has no direction");
}

}  // namespace

double min_chordal(const std::vector<std::vector<double>>& vectors) {
  if (vectors.size() < 2)
    throw std::invalid_argument("min_chordal: need at least two vectors");
  const std::size_t M = vectors.front().size();
  double cmax = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != M)
      throw std::invalid_argument("min_chordal: ragged vector set");
    for (std::size_t j = i + 1; j < vectors.size(); ++j) {
      double d = 0.0;
      for (std::size_t m = 0; m < M; ++m) d += vectors[i][m] * vectors[j][m];
      cmax = std::max(cmax, std::fabs(d));
    }
  }
  return delta_from_cos(std::min(cmax, 1.0));
}

double cap_opening(const std::vector<std::vector<double>>& vectors) {
  return std::asin(std::min(min_chordal(vectors), 1.0));
}

DirectionCodebook generate(int M, std::int64_t N, const GenerateOptions& opts) {
  check_dims(M, N);
  DirectionCodebook cb;
  cb.M = M;
  cb.seed = opts.seed;

  std::vector<double> flat(static_cast<std::size_t>(N) * M, 0.0);
  if (N <= M) {
    // Orthonormal lines are optimal whenever they fit: delta = 1 exactly.
    for (std::int64_t i = 0; i < N; ++i) flat[i * M + i] = 1.0;
  } else {
    std::vector<double> best;
    double bestCos = 2.0;
    const int runs = std::max(opts.restarts, 1);
    for (int r = 0; r < runs; ++r) {
      std::vector<double> u(flat.size());
      rng::PhiloxStream stream(opts.seed, static_cast<std::uint64_t>(r));
      for (std::int64_t i = 0; i < N; ++i) {
        rng::fill_standard_normal(stream, static_cast<std::uint64_t>(i),
                             std::span<double>(&u[i * M], M));
        normalize_row(&u[i * M], M, static_cast<int>(i));
      }
      optimize_pack(u, N, M, opts.iterations);
      const double c = max_abs_cosine(u, N, M);
      if (c < bestCos) {
        bestCos = c;
        best = std::move(u);
      }
    }
    flat = std::move(best);
  }

  cb.vectors.resize(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i)
    cb.vectors[static_cast<std::size_t>(i)] =
        std::vector<double>(flat.begin() + i * M, flat.begin() + (i + 1) * M);
  cb.delta = (N <= M) ? 1.0 : min_chordal(cb.vectors);
  cb.phi = std::asin(std::min(cb.delta, 1.0));
  cb.coveringRadiusEstimate = covering_radius_estimate(cb.vectors, opts.seed);
  return cb;
}

DirectionMatch match_direction(const DirectionCodebook& codebook,
                               std::span<const double> h) {
  check_direction_vector(h, codebook.M);
  if (codebook.vectors.empty())
    throw std::invalid_argument("match_direction: empty codebook");
  double norm2 = 0.0;
  for (double x : h) norm2 += x * x;
  const double norm = std::sqrt(norm2);

  DirectionMatch bestMatch;
  double bestAbs = -1.0;
  for (std::size_t k = 0; k < codebook.vectors.size(); ++k) {
    double d = 0.0;
    for (std::size_t m = 0; m < codebook.vectors[k].size(); ++m)
      d += codebook.vectors[k][m] * h[m];
    const double a = std::fabs(d);
    if (a > bestAbs) {  // strict: ties resolve to the lowest index
      bestAbs = a;
      bestMatch.index = k;
    }
  }
  bestMatch.absCosine = std::min(bestAbs / norm, 1.0);
  return bestMatch;
}

std::size_t quantize_direction(const DirectionCodebook& codebook,
                               std::span<const double> h) {
  return match_direction(codebook, h).index;
}

double covering_radius_estimate(const std::vector<std::vector<double>>& vectors,
                                std::uint64_t seed, std::int64_t samples) {
  if (vectors.empty())
    throw std::invalid_argument("covering_radius_estimate: empty codebook");
  if (samples < 1)
    throw std::invalid_argument("covering_radius_estimate: samples must be >= 1");
  const int M = static_cast<int>(vectors.front().size());
  const std::int64_t N = static_cast<std::int64_t>(vectors.size());
  std::vector<double> u(static_cast<std::size_t>(N) * M);
  for (std::int64_t i = 0; i < N; ++i)
    std::copy(vectors[static_cast<std::size_t>(i)].begin(),
              vectors[static_cast<std::size_t>(i)].end(), u.begin() + i * M);

  const auto nearestCos = [&](const double* x) {
    double best = 0.0;
    for (std::int64_t k = 0; k < N; ++k)
      best = std::max(best, std::fabs(dot(&u[k * M], x, M)));
    return std::min(best, 1.0);
  };

  // Pass 1: Monte-Carlo scan, remembering the deepest holes.
  constexpr std::size_t kHoles = 64;
  using Hole = std::pair<double, std::vector<double>>;  // (cos, direction)
  std::priority_queue<Hole> holes;  // top = shallowest kept hole
  rng::PhiloxStream stream(seed, kCoveringStream);
  std::vector<double> x(static_cast<std::size_t>(M));
  double minCos = 1.0;
  for (std::int64_t s = 0; s < samples; ++s) {
    rng::fill_standard_normal(stream, static_cast<std::uint64_t>(s),
                         std::span<double>(x.data(), x.size()));
    double n2 = 0.0;
    for (double v : x) n2 += v * v;
    if (n2 < 1e-18) continue;
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : x) v *= inv;
    const double c = nearestCos(x.data());
    minCos = std::min(minCos, c);
    if (holes.size() < kHoles || c < holes.top().first) {
      holes.emplace(c, x);
      if (holes.size() > kHoles) holes.pop();
    }
  }

  // Pass 2: deepen each hole by local ascent of the angle to the nearest
  // line (descend its squared cosine), with a shrinking trust step.
  while (!holes.empty()) {
    x = holes.top().second;
    holes.pop();
    double c = nearestCos(x.data());
    double step = 0.05;
    std::vector<double> trial(x.size());
    while (step > 1e-7) {
      // Move against the nearest codeword's tangent direction.
      std::int64_t kNear = 0;
      double dNear = 0.0;
      for (std::int64_t k = 0; k < N; ++k) {
        const double d = dot(&u[k * M], x.data(), M);
        if (std::fabs(d) > std::fabs(dNear)) {
          dNear = d;
          kNear = k;
        }
      }
      for (int m = 0; m < M; ++m) trial[m] = x[m] - step * dNear * u[kNear * M + m];
      normalize_row(trial.data(), M, 0);
      const double ct = nearestCos(trial.data());
      if (ct < c) {
        x = trial;
        c = ct;
        step = std::min(step * 1.2, 0.2);
      } else {
        step *= 0.5;
      }
    }
    minCos = std::min(minCos, c);
  }

  const double radius = std::acos(std::clamp(minCos, 0.0, 1.0)) * kCoveringPad;
  return std::min(radius, std::acos(0.0));
}

double fit_extrapolation(
    const std::vector<std::pair<std::int64_t, double>>& sizeAndSin, int M) {
  if (M < 2) throw std::invalid_argument("fit_extrapolation: M must be >= 2");
  if (sizeAndSin.empty())
    throw std::invalid_argument("fit_extrapolation: no data points");
  const double slope = 1.0 / static_cast<double>(M - 1);
  double acc = 0.0;
  for (const auto& [n, s] : sizeAndSin) {
    if (n < 2 || !(s > 0.0) || !(s <= 1.0))
      throw std::invalid_argument("fit_extrapolation: invalid data point");
    acc += std::log(s) + slope * std::log(static_cast<double>(n));
  }
  return std::exp(acc / static_cast<double>(sizeAndSin.size()));
}

double lambda_M(int M) {
  if (M < 2) throw std::invalid_argument("lambda_M: M must be >= 2");
  const double logv = 0.5 * std::log(std::numbers::pi) +
                      std::lgamma(0.5 * (M + 1)) - std::lgamma(0.5 * M);
  return std::exp(logv / static_cast<double>(M - 1));
}

double sphere_area(int M) {
  if (M < 2) throw std::invalid_argument("sphere_area: M must be >= 2");
  return std::exp(std::log(static_cast<double>(M)) +
                  0.5 * M * std::log(std::numbers::pi) -
                  std::lgamma(0.5 * M + 1.0));
}

double cap_area(int M, double psi) {
  if (M < 2) throw std::invalid_argument("cap_area: M must be >= 2");
  if (!(psi >= 0.0) || psi > std::numbers::pi / 2 + 1e-15)
    throw std::invalid_argument("cap_area: opening must lie in [0, pi/2]");
  if (psi == 0.0) return 0.0;
  // 2 (M-1) C_{M-1} integral_0^psi sin^(M-2), C_{M-1} the unit-ball volume
  // in R^(M-1).  At psi = pi/2 the double cap is the whole sphere.
  const double ballVol = std::exp(0.5 * (M - 1) * std::log(std::numbers::pi) -
                                  std::lgamma(0.5 * (M + 1)));
  const double integral = quadrature::integrate(
      [M](double t) { return std::pow(std::sin(t), M - 2); }, 0.0, psi, 1e-12);
  return 2.0 * (M - 1) * ballVol * integral;
}

double packing_distance_bound(int M, std::int64_t N) {
  if (N < 1) throw std::invalid_argument("packing_distance_bound: N must be >= 1");
  return 4.0 * lambda_M(M) *
         std::pow(static_cast<double>(N), -1.0 / static_cast<double>(M - 1));
}

double packing_distance_bound_complex(int M, std::int64_t N) {
  if (M < 2) throw std::invalid_argument("packing_distance_bound_complex: M must be >= 2");
  if (N < 1)
    throw std::invalid_argument("packing_distance_bound_complex: N must be >= 1");
  return 2.0 * std::pow(static_cast<double>(N),
                        -0.5 / static_cast<double>(M - 1));
}

std::string to_json_string(const DirectionCodebook& cb) {
  nlohmann::json j;
  j["M"] = cb.M;
  j["N"] = cb.size();
  j["seed"] = cb.seed;
  j["vectors"] = cb.vectors;
  j["delta"] = cb.delta;
  j["phi"] = cb.phi;
  j["coveringRadiusEstimate"] = cb.coveringRadiusEstimate;
  return j.dump(2);
}

DirectionCodebook from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  DirectionCodebook cb;
  cb.M = j.at("M").get<int>();
  cb.seed = j.at("seed").get<std::uint64_t>();
  cb.vectors = j.at("vectors").get<std::vector<std::vector<double>>>();
  cb.delta = j.at("delta").get<double>();
  cb.phi = j.at("phi").get<double>();
  cb.coveringRadiusEstimate = j.at("coveringRadiusEstimate").get<double>();
  if (j.at("N").get<std::int64_t>() != cb.size())
    throw std::invalid_argument("direction codebook JSON: N mismatch");
  for (const auto& v : cb.vectors)
    if (static_cast<int>(v.size()) != cb.M)
      throw std::invalid_argument("direction codebook JSON: ragged vectors");
  return cb;
}

void save(const DirectionCodebook& cb, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("direction codebook: cannot write " + path);
  out << to_json_string(cb) << '\n';
  if (!out.flush())
    throw std::runtime_error("direction codebook: write failed for " + path);
}

std::optional<DirectionCodebook> load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return from_json_string(buf.str());
  } catch (const std::exception&) {
    return std::nullopt;  // corrupt cache entries are regenerated
  }
}

DirectionCodebook obtain(int M, std::int64_t N, const std::string& cacheDir,
                         const GenerateOptions& opts) {
  check_dims(M, N);
  std::filesystem::path path;
  if (!cacheDir.empty()) {
    std::ostringstream name;
    name << "pack_M" << M << "_N" << N << "_s" << opts.seed << ".json";
    path = std::filesystem::path(cacheDir) / name.str();
    if (auto cached = load(path.string())) {
      if (cached->M == M && cached->size() == N && cached->seed == opts.seed)
        return std::move(*cached);
    }
  }
  DirectionCodebook cb = generate(M, N, opts);
  if (!path.empty()) save(cb, path.string());
  return cb;
}

}  // namespace linkquant::direction
