// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#ifndef CHANEST_BENCH_EXPERIMENT_HPP_
#define CHANEST_BENCH_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chanest/common.hpp"
#include "chanest/s2s/denoiser.hpp"
#include "chanest/sim/channel.hpp"

namespace chanest::bench {

using sim::ComplexMatrix;

enum class Scenario { kSnrSweep, kPilotSweep, kMobility, kDenoiseOnce };
enum class Estimator { kLs, kLmmse, kMmse, kS2s };

std::string_view to_string(Scenario s);
std::string_view to_string(Estimator e);
/// Throws ValueError on an unknown name.
Scenario parse_scenario(std::string_view name);
Estimator parse_estimator(std::string_view name);
/// Comma-separated list, e.g. "ls,mmse".
std::vector<Estimator> parse_estimator_list(std::string_view list);

struct ExperimentConfig {
  Scenario scenario = Scenario::kSnrSweep;
  sim::ChannelModelConfig channel;
  std::vector<double> snr_db{0, 3, 6, 9, 12, 15, 18};
  double fixed_snr_db = 10.0;  // pilot-sweep, mobility and denoise-once
  std::size_t pilot_len = 48;  // every scenario but pilot-sweep
  std::vector<std::size_t> pilot_lens{44, 48, 52, 56, 60};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::uint64_t seed_base = 0;  // added to every seed
  std::vector<Estimator> estimators{Estimator::kLs, Estimator::kLmmse, Estimator::kMmse, Estimator::kS2s};
  s2s::UNetConfig unet;
  s2s::DenoiserConfig denoiser;
  sim::MobilityScenario mobility;
  std::size_t n_cov_samples = 10000;      // per-geometry covariance for the MMSE oracle
  std::size_t lmmse_cov_samples = 10000;  // scenario covariance for LMMSE
  bool record_timing = false;             // wall_s stays 0 otherwise, keeping output reproducible

  /// Throws ValueError naming the offending keys.
  void validate() const;
};

/// N_r=16, N_t=8, depth 3, 500 iterations.
void apply_small_profile(ExperimentConfig& cfg);

/// Reads a TOML subset: `key = value` lines, arrays of scalars, `[channel]`,
/// `[denoiser]` and `[mobility]` tables, `#` comments. Keys absent from the
/// file keep their value in `base`. Syntax errors report `path:line`.
ExperimentConfig parse_config(const std::filesystem::path& path, const ExperimentConfig& base = {});
ExperimentConfig parse_config_text(std::string_view text, const std::string& origin,
                                   const ExperimentConfig& base = {});

struct ExperimentResult {
  Scenario scenario = Scenario::kSnrSweep;
  Estimator estimator = Estimator::kLs;
  double axis = 0.0;  // SNR in dB, pilot length or 1-based frame index
  std::uint64_t seed = 0;
  double nmse = 0.0;
  double nmse_db = 0.0;
  double wall_s = 0.0;
  std::uint64_t input_hash = 0;  // content hash of (H, Y, X)
};

/// One paired evaluation problem.
struct Cell {
  ComplexMatrix h;
  ComplexMatrix x;
  ComplexMatrix y;
  double noise_variance = 0.0;
  sim::ChannelModelConfig geometry;  // config whose geometry generated h
  std::uint64_t hash = 0;
};

/// The cell for `seed` at one axis point. The channel depends only on the
/// seed (and the frame for mobility); the noise also on `axis_index`.
Cell make_cell(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t axis_index, double snr_db,
               std::size_t pilot_len, std::size_t frame = 0);

/// Shared state across cells of one run, e.g. the LMMSE covariance.
class Runner {
 public:
  explicit Runner(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }

  /// Evaluates every configured estimator on one cell.
  std::vector<ExperimentResult> evaluate(const Cell& cell, double axis, std::uint64_t seed, std::size_t axis_index);

  /// Runs the configured scenario; results come back in CSV order.
  std::vector<ExperimentResult> run();

  /// Loss traces of the Self2Self runs, keyed like the results.
  struct Trace {
    double axis;
    std::uint64_t seed;
    std::vector<double> loss;
  };
  const std::vector<Trace>& traces() const { return traces_; }

 private:
  const ComplexMatrix& scenario_covariance();

  ExperimentConfig cfg_;
  std::optional<ComplexMatrix> r_scenario_;
  std::vector<Trace> traces_;
};

std::vector<ExperimentResult> run_snr_sweep(const ExperimentConfig& cfg);
std::vector<ExperimentResult> run_pilot_sweep(const ExperimentConfig& cfg);
std::vector<ExperimentResult> run_mobility(const ExperimentConfig& cfg);

/// Sorts by axis, then estimator, then seed.
void sort_results(std::vector<ExperimentResult>& results);

/// Header `scenario,estimator,axis,seed,nmse,nmse_db,wall_s,input_hash`;
/// floats with 9 significant digits, hash as 16 hex digits.
void emit_csv(const std::vector<ExperimentResult>& results, const std::filesystem::path& path);
std::string format_csv(const std::vector<ExperimentResult>& results);
std::vector<ExperimentResult> parse_csv(const std::filesystem::path& path);

/// Gnuplot script next to a CSV describing its columns.
void emit_plot_script(Scenario scenario, const std::filesystem::path& csv_path,
                      const std::filesystem::path& script_path);

double median(std::vector<double> values);

}  // namespace chanest::bench

#endif  // CHANEST_BENCH_EXPERIMENT_HPP_
