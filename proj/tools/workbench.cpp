// SPDX-License-Identifier: MIT
//
// Command-line workbench for product channel-quantization codebooks.
//
// Subcommands:
//   design-mag  geometric + numerically optimized magnitude codebooks (CSV)
//   design-dir  line packings over a size sweep, with the fitted opening law
//   allocate    closed-form vs exhaustive feedback-bit splits (CSV)
//   distortion  relative power overhead of the splits, with its ceiling (CSV)
//   evaluate    assemble one product system and Monte-Carlo it (JSON)
//
// Every output embeds the fully resolved configuration and the tool version,
// and is byte-identical across runs with the same configuration and seed.
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "linkquant/allocation.hpp"
#include "linkquant/direction.hpp"
#include "linkquant/distribution.hpp"
#include "linkquant/link.hpp"
#include "linkquant/magnitude.hpp"
#include "linkquant/version.hpp"

using linkquant::ChiSquareModel;
namespace allocation = linkquant::allocation;
namespace direction = linkquant::direction;
namespace lk = linkquant::link;
namespace magnitude = linkquant::magnitude;

namespace {

// Options shared by every subcommand; defaults are the showcase settings.
struct CommonConfig {
  int M = 5;
  double q = 1e-4;
  double gamma0 = 1.0;
  std::uint64_t seed = 1;
  std::string out;  // empty or "-": stdout
  std::string cacheDir;
};

std::string default_cache_dir() {
  if (const char* env = std::getenv("LINKQUANT_CACHE_DIR"); env && *env)
    return env;
  return "pack_cache";
}

void add_common(CLI::App* sub, CommonConfig& cfg) {
  sub->fallthrough();  // lets --config (a top-level option) follow the verb
  sub->add_option("--antennas,-M", cfg.M, "Number of transmit antennas")
      ->capture_default_str();
  sub->add_option("--outage,-q", cfg.q,
                  "Target outage probability, in (0, 1)")
      ->capture_default_str();
  sub->add_option("--target-snr", cfg.gamma0, "Target SNR (linear)")
      ->capture_default_str();
  sub->add_option("--seed", cfg.seed, "Random seed for all stochastic steps")
      ->capture_default_str();
  sub->add_option("--out,-o", cfg.out, "Output file ('-' for stdout)");
  sub->add_option("--cache-dir", cfg.cacheDir,
                  "Line-packing cache directory (default: LINKQUANT_CACHE_DIR "
                  "or ./pack_cache)");
}

// (0,1) exclusive; CLI range validators are inclusive, so check by hand.
bool validate_common(const CommonConfig& cfg, int minAntennas) {
  if (cfg.M < minAntennas) {
    std::cerr << "error: --antennas must be >= " << minAntennas << "\n";
    return false;
  }
  if (!(cfg.q > 0.0) || !(cfg.q < 1.0)) {
    std::cerr << "error: --outage must lie strictly inside (0, 1)\n";
    return false;
  }
  if (!(cfg.gamma0 > 0.0)) {
    std::cerr << "error: --target-snr must be positive\n";
    return false;
  }
  return true;
}

// Output sink: stdout by default, else the named file (created atomically
// enough for our purposes: written only after the computation succeeded).
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.emplace();
      file_->open(path, std::ios::binary);
      if (!*file_) {
        std::cerr << "error: cannot open output file " << path << "\n";
        ok_ = false;
      }
    }
  }
  bool ok() const { return ok_; }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::optional<std::ofstream> file_;
  bool ok_ = true;
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Resolved-configuration preamble for CSV outputs.
void write_csv_header(std::ostream& out, const std::string& command,
                      const CommonConfig& cfg, const std::string& extra) {
  out << "# linkquant " << linkquant::kVersion << "\n";
  out << "# command=" << command << " antennas=" << cfg.M
      << " outage=" << fmt_double(cfg.q)
      << " target_snr=" << fmt_double(cfg.gamma0) << " seed=" << cfg.seed;
  if (!extra.empty()) out << ' ' << extra;
  out << "\n";
}

nlohmann::json config_json(const std::string& command,
                           const CommonConfig& cfg) {
  nlohmann::json j;
  j["command"] = command;
  j["antennas"] = cfg.M;
  j["outage"] = cfg.q;
  j["target_snr"] = cfg.gamma0;
  j["seed"] = cfg.seed;
  return j;
}

int run_design_mag(const CommonConfig& cfg, std::int64_t levels, int restarts,
                   const std::string& codebookOut) {
  if (!validate_common(cfg, 3)) return 2;
  if (levels < 2 || levels > (std::int64_t{1} << 22)) {
    std::cerr << "error: --levels must lie in [2, 2^22]\n";
    return 2;
  }
  if (restarts < 1) {
    std::cerr << "error: --restarts must be >= 1\n";
    return 2;
  }

  const ChiSquareModel model(cfg.M);
  const auto uniform = magnitude::build_uniform_db(model, cfg.q, levels);
  const auto numeric =
      magnitude::optimize_numeric(model, cfg.q, levels, restarts, cfg.seed);

  Sink sink(cfg.out);
  if (!sink.ok()) return 1;
  std::ostream& out = sink.stream();
  write_csv_header(out, "design-mag", cfg,
                   "levels=" + std::to_string(levels) +
                       " restarts=" + std::to_string(restarts));
  out << "n,y_uniform_dB,y_numeric_dB\n";
  char buf[96];
  for (std::int64_t n = 0; n < levels; ++n) {
    std::snprintf(buf, sizeof buf, "%" PRId64 ",%.17g,%.17g\n", n + 1,
                  10.0 * std::log10(uniform.levels[static_cast<std::size_t>(n)]),
                  10.0 * std::log10(numeric.levels[static_cast<std::size_t>(n)]));
    out << buf;
  }

  if (!codebookOut.empty()) {
    std::ofstream cb(codebookOut, std::ios::binary);
    if (!cb) {
      std::cerr << "error: cannot open codebook file " << codebookOut << "\n";
      return 1;
    }
    cb << magnitude::to_json_string(model, cfg.q, numeric) << "\n";
  }
  return 0;
}

std::string cache_dir_note(const CommonConfig& cfg) {
  return " cache_dir=" + cfg.cacheDir;
}

int run_design_dir(const CommonConfig& cfg, std::vector<std::int64_t> sizes,
                   int restarts) {
  if (cfg.M < 2) {
    std::cerr << "error: --antennas must be >= 2\n";
    return 2;
  }
  if (!(cfg.q > 0.0) || !(cfg.q < 1.0)) {
    std::cerr << "error: --outage must lie strictly inside (0, 1)\n";
    return 2;
  }
  for (std::int64_t n : sizes)
    if (n < 2 || n > 128) {
      std::cerr << "error: --sizes entries must lie in [2, 128]\n";
      return 2;
    }
  if (sizes.empty()) {
    std::cerr << "error: --sizes must name at least one codebook size\n";
    return 2;
  }

  direction::GenerateOptions opts;
  opts.restarts = restarts;
  opts.seed = cfg.seed;
  std::filesystem::create_directories(cfg.cacheDir);

  std::vector<std::pair<std::int64_t, double>> measured;
  for (std::int64_t n : sizes) {
    const auto cb = direction::obtain(cfg.M, n, cfg.cacheDir, opts);
    measured.emplace_back(n, std::min(cb.delta, 1.0));
  }

  // Forced-slope law fitted over the sizes that landed in the fit window.
  std::vector<std::pair<std::int64_t, double>> window;
  for (const auto& [n, s] : measured)
    if (n >= 80 && n <= 100) window.emplace_back(n, s);
  const double coeff = window.empty()
                           ? std::nan("")
                           : direction::fit_extrapolation(window, cfg.M);

  Sink sink(cfg.out);
  if (!sink.ok()) return 1;
  std::ostream& out = sink.stream();
  std::string extra = "restarts=" + std::to_string(restarts) + " sizes=";
  for (std::size_t i = 0; i < sizes.size(); ++i)
    extra += (i ? "," : "") + std::to_string(sizes[i]);
  extra += " fit_coefficient=" + fmt_double(coeff) + cache_dir_note(cfg);
  write_csv_header(out, "design-dir", cfg, extra);
  out << "N,sin_phi,sin_phi_fit\n";
  char buf[96];
  for (const auto& [n, s] : measured) {
    const double fit =
        coeff * std::pow(static_cast<double>(n),
                         -1.0 / static_cast<double>(cfg.M - 1));
    std::snprintf(buf, sizeof buf, "%" PRId64 ",%.17g,%.17g\n", n, s, fit);
    out << buf;
  }
  return 0;
}

int run_allocate(const CommonConfig& cfg, int bLo, int bHi, bool distortion) {
  if (!validate_common(cfg, 3)) return 2;
  if (bLo < 0 || bHi > 60 || bLo > bHi) {
    std::cerr << "error: bit range must satisfy 0 <= lo <= hi <= 60\n";
    return 2;
  }

  const ChiSquareModel model(cfg.M);
  direction::GenerateOptions opts;
  opts.seed = cfg.seed;
  std::filesystem::create_directories(cfg.cacheDir);
  const allocation::OpeningProvider openings(cfg.M, cfg.cacheDir, opts, 128);

  Sink sink(cfg.out);
  if (!sink.ok()) return 1;
  std::ostream& out = sink.stream();
  write_csv_header(out, distortion ? "distortion" : "allocate", cfg,
                   "bits_lo=" + std::to_string(bLo) +
                       " bits_hi=" + std::to_string(bHi) +
                       cache_dir_note(cfg));
  if (distortion)
    allocation::write_distortion_csv(out, model, cfg.q, bLo, bHi, openings);
  else
    allocation::write_allocation_csv(out, model, cfg.q, bLo, bHi, openings);
  return 0;
}

int run_evaluate(const CommonConfig& cfg, int bits, std::int64_t samples,
                 const std::string& phiMode) {
  if (!validate_common(cfg, 3)) return 2;
  if (bits < 0 || bits > 60) {
    std::cerr << "error: --bits must lie in [0, 60]\n";
    return 2;
  }
  if (samples < 10000) {
    std::cerr << "error: --samples must be >= 1e4\n";
    return 2;
  }
  const lk::PhiMode mode =
      phiMode == "strict" ? lk::PhiMode::Strict : lk::PhiMode::Paper;

  const ChiSquareModel model(cfg.M);
  direction::GenerateOptions opts;
  opts.seed = cfg.seed;
  std::filesystem::create_directories(cfg.cacheDir);
  const allocation::OpeningProvider openings(cfg.M, cfg.cacheDir, opts, 128);

  // Best split by the exact objective, then clamped so the direction side
  // stays materializable (the simulator must quantize real channels).
  const auto split = allocation::exhaustive(model, cfg.q, bits, openings);
  if (!std::isfinite(split.objective)) {
    std::cerr << "error: bit budget too small to beamform with M=" << cfg.M
              << "\n";
    return 2;
  }
  int magBits = split.magBits;
  int dirBits = split.dirBits;
  constexpr int kDirBitsCap = 7;  // 2^7 = materialization limit
  if (dirBits > kDirBitsCap) {
    magBits += dirBits - kDirBitsCap;
    dirBits = kDirBitsCap;
  }
  if (magBits > 22) {
    std::cerr << "error: magnitude codebook of 2^" << magBits
              << " levels is too large to materialize\n";
    return 2;
  }

  const auto mag = magnitude::build_uniform_db(model, cfg.q,
                                               std::int64_t{1} << magBits);
  const auto dir = lk::DirectionInfo::materialized(
      openings.codebook(std::int64_t{1} << dirBits));
  const auto sys = lk::make_system(model, cfg.q, cfg.gamma0, mag, dir);
  const auto report = lk::monte_carlo(model, sys, samples, cfg.seed, mode);

  nlohmann::json j;
  j["version"] = linkquant::kVersion;
  j["config"] = config_json("evaluate", cfg);
  j["config"]["bits"] = bits;
  j["config"]["samples"] = samples;
  j["config"]["phi_mode"] = phiMode;
  j["config"]["cache_dir"] = cfg.cacheDir;
  j["split"] = {{"mag_bits", magBits},
                {"dir_bits", dirBits},
                {"mag_levels", std::int64_t{1} << magBits},
                {"dir_lines", std::int64_t{1} << dirBits}};
  j["report"] = {{"avg_power_analytic", report.avgPowerAnalytic},
                 {"avg_power_mc", report.avgPowerMC},
                 {"avg_power_mc_stderr", report.avgPowerMCStderr},
                 {"outage_empirical", report.outageEmpirical},
                 {"outage_stderr", report.outageStderr},
                 {"snr_violations", report.snrViolations},
                 {"csi_power", report.csiPower},
                 {"samples", report.samples}};

  Sink sink(cfg.out);
  if (!sink.ok()) return 1;
  sink.stream() << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Product channel-quantization codebook workbench"};
  app.set_config("--config", "",
                 "INI file with a [subcommand] section per verb; explicit "
                 "command-line options win");
  app.require_subcommand(1);

  CommonConfig cfg;
  cfg.cacheDir = default_cache_dir();

  // design-mag
  std::int64_t levels = 64;
  int restarts = 20;
  std::string codebookOut;
  CLI::App* mag = app.add_subcommand(
      "design-mag", "Design magnitude codebooks (geometric and numeric)");
  add_common(mag, cfg);
  mag->add_option("--levels", levels, "Number of magnitude quantization cells")
      ->capture_default_str();
  mag->add_option("--restarts", restarts, "Optimizer restarts")
      ->capture_default_str();
  mag->add_option("--codebook-out", codebookOut,
                  "Also write the numeric codebook as JSON");

  // design-dir
  std::vector<std::int64_t> sizes = {16, 32, 48, 64, 80, 84,
                                     88, 92, 96, 100, 112, 128};
  CLI::App* dir = app.add_subcommand(
      "design-dir", "Generate line packings and fit the opening-angle law");
  add_common(dir, cfg);
  dir->add_option("--sizes", sizes, "Packing sizes to generate (2..128)")
      ->capture_default_str();
  dir->add_option("--restarts", restarts, "Packing optimizer restarts")
      ->capture_default_str();

  // allocate / distortion
  int bitsLo = 10, bitsHi = 30;
  std::vector<int> bitsRange;
  int bitsSingle = -1;
  const auto addBits = [&](CLI::App* sub) {
    sub->add_option("--bits", bitsSingle,
                    "Single total feedback-bit budget");
    sub->add_option("--bits-range", bitsRange,
                    "Inclusive budget range: LO HI")
        ->expected(2);
  };
  CLI::App* alloc = app.add_subcommand(
      "allocate", "Closed-form vs exhaustive feedback-bit splits");
  add_common(alloc, cfg);
  addBits(alloc);
  CLI::App* dist = app.add_subcommand(
      "distortion", "Relative power overhead of the splits, with ceiling");
  add_common(dist, cfg);
  addBits(dist);

  // evaluate
  std::int64_t samples = 1000000;
  int evalBits = 20;
  std::string phiMode = "paper";
  CLI::App* eval = app.add_subcommand(
      "evaluate", "Assemble one product system and Monte-Carlo it");
  add_common(eval, cfg);
  eval->add_option("--bits", evalBits, "Total feedback-bit budget")
      ->capture_default_str();
  eval->add_option("--samples", samples, "Monte-Carlo sample count (>= 1e4)")
      ->capture_default_str();
  eval->add_option("--phi-mode", phiMode, "Worst-case angle policy")
      ->check(CLI::IsMember({"paper", "strict"}))
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (mag->parsed()) return run_design_mag(cfg, levels, restarts, codebookOut);
    if (dir->parsed()) return run_design_dir(cfg, sizes, restarts);
    if (alloc->parsed() || dist->parsed()) {
      if (!bitsRange.empty()) {
        bitsLo = bitsRange[0];
        bitsHi = bitsRange[1];
      }
      if (bitsSingle >= 0) bitsLo = bitsHi = bitsSingle;
      return run_allocate(cfg, bitsLo, bitsHi, dist->parsed());
    }
    if (eval->parsed()) return run_evaluate(cfg, evalBits, samples, phiMode);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
