// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#include "chanest/bench/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "chanest/est/estimators.hpp"

namespace chanest::bench {

namespace {

constexpr std::uint64_t kChannelTag = 0x6368616eULL;  // "chan"
constexpr std::uint64_t kNoiseTag = 0x6e6f6973ULL;    // "nois"
constexpr std::uint64_t kMmseTag = 0x6d6d7365ULL;     // "mmse"
constexpr std::uint64_t kS2sTag = 0x73327363ULL;      // "s2sc"
constexpr std::uint64_t kScenarioTag = 0x7363656eULL;  // "scen"

constexpr std::array<std::string_view, 4> kScenarioNames{"snr-sweep", "pilot-sweep", "mobility", "denoise-once"};
constexpr std::array<std::string_view, 4> kEstimatorNames{"ls", "lmmse", "mmse", "s2s"};

constexpr const char* kCsvHeader = "scenario,estimator,axis,seed,nmse,nmse_db,wall_s,input_hash";

using Clock = std::chrono::steady_clock;

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string_view to_string(Scenario s) { return kScenarioNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(Estimator e) { return kEstimatorNames[static_cast<std::size_t>(e)]; }

Scenario parse_scenario(std::string_view name) {
  for (std::size_t i = 0; i < kScenarioNames.size(); ++i) {
    if (kScenarioNames[i] == name) return static_cast<Scenario>(i);
  }
  throw ValueError("unknown scenario '" + std::string(name) + "'");
}

Estimator parse_estimator(std::string_view name) {
  for (std::size_t i = 0; i < kEstimatorNames.size(); ++i) {
    if (kEstimatorNames[i] == name) return static_cast<Estimator>(i);
  }
  throw ValueError("unknown estimator '" + std::string(name) + "' (expected ls, lmmse, mmse or s2s)");
}

std::vector<Estimator> parse_estimator_list(std::string_view list) {
  std::vector<Estimator> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    out.push_back(parse_estimator(list.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

void ExperimentConfig::validate() const {
  channel.validate();
  unet.validate();
  denoiser.validate();
  mobility.validate();
  const std::string n_tx = "channel.n_tx = " + std::to_string(channel.n_tx);
  if (snr_db.empty()) throw ValueError("snr_db must not be empty");
  for (double s : snr_db) {
    if (!std::isfinite(s)) throw ValueError("snr_db entries must be finite");
  }
  if (!std::isfinite(fixed_snr_db)) throw ValueError("fixed_snr_db must be finite");
  if (pilot_len < channel.n_tx) {
    throw ValueError("pilot_len = " + std::to_string(pilot_len) + " is shorter than " + n_tx);
  }
  if (pilot_lens.empty()) throw ValueError("pilot_lens must not be empty");
  for (auto l : pilot_lens) {
    if (l < channel.n_tx) throw ValueError("pilot_lens entry " + std::to_string(l) + " is shorter than " + n_tx);
  }
  if (seeds.empty()) throw ValueError("seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ValueError("seeds must be distinct");
  }
  if (estimators.empty()) throw ValueError("estimators must not be empty");
  if (std::set<Estimator>(estimators.begin(), estimators.end()).size() != estimators.size()) {
    throw ValueError("estimators must be distinct");
  }
  if (n_cov_samples == 0) throw ValueError("n_cov_samples must be positive");
  if (lmmse_cov_samples == 0) throw ValueError("lmmse_cov_samples must be positive");
  if (std::find(estimators.begin(), estimators.end(), Estimator::kS2s) != estimators.end()) {
    const std::size_t f = std::size_t{1} << unet.depth;
    if (channel.n_rx % f != 0 || channel.n_tx % f != 0) {
      throw ValueError("channel.n_rx = " + std::to_string(channel.n_rx) + " and " + n_tx +
                       " must be divisible by 2^denoiser.depth = " + std::to_string(f));
    }
  }
}

void apply_small_profile(ExperimentConfig& cfg) {
  cfg.channel.n_rx = 16;
  cfg.channel.n_tx = 8;
  cfg.unet.depth = 3;
  cfg.denoiser.iterations = 500;
}

Cell make_cell(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t axis_index, double snr_db,
               std::size_t pilot_len, std::size_t frame) {
  Cell cell;
  cell.geometry = cfg.channel;
  cell.geometry.seed = seed;
  const Rng channel_rng = make_rng(seed, {kChannelTag});
  if (frame == 0) {
    Rng rng = channel_rng;
    cell.h = sim::gen_channel(cell.geometry, rng);
  } else {
    cell.h = sim::evolve_channel(cell.geometry, cfg.mobility, frame, channel_rng);
    cell.geometry = sim::frame_config(cell.geometry, cfg.mobility, frame);
  }
  cell.x = sim::gen_pilots(cfg.channel.n_tx, pilot_len);
  Rng noise_rng = make_rng(seed, {kNoiseTag, axis_index});
  auto rx = sim::transmit(cell.h, cell.x, snr_db, noise_rng);
  cell.y = std::move(rx.y);
  cell.noise_variance = rx.noise_variance;
  cell.hash = sim::content_hash({&cell.h, &cell.y, &cell.x});
  return cell;
}

Runner::Runner(ExperimentConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

const ComplexMatrix& Runner::scenario_covariance() {
  if (!r_scenario_) {
    Rng rng = make_rng(cfg_.seed_base, {kScenarioTag});
    r_scenario_ = sim::scenario_correlation(cfg_.channel, cfg_.lmmse_cov_samples, rng);
  }
  return *r_scenario_;
}

std::vector<ExperimentResult> Runner::evaluate(const Cell& cell, double axis, std::uint64_t seed,
                                               std::size_t axis_index) {
  std::vector<ExperimentResult> out;
  for (Estimator e : cfg_.estimators) {
    const auto t0 = Clock::now();
    ComplexMatrix h_est;
    switch (e) {
      case Estimator::kLs:
        h_est = est::ls_estimate(cell.y, cell.x);
        break;
      case Estimator::kLmmse:
        h_est = est::lmmse_estimate(cell.y, cell.x, scenario_covariance(), cell.noise_variance);
        break;
      case Estimator::kMmse: {
        Rng rng = make_rng(seed, {kMmseTag, axis_index});
        h_est = est::mmse_oracle(cell.y, cell.x, cell.geometry, cell.noise_variance, cfg_.n_cov_samples, rng);
        break;
      }
      case Estimator::kS2s: {
        s2s::DenoiserConfig dcfg = cfg_.denoiser;
        dcfg.seed = make_rng(seed, {kS2sTag, axis_index})();
        auto res = s2s::denoise(cell.y, cell.x, cfg_.unet, dcfg);
        h_est = std::move(res.h_est);
        traces_.push_back({axis, seed, std::move(res.report.loss_trace)});
        break;
      }
    }
    ExperimentResult r;
    r.scenario = cfg_.scenario;
    r.estimator = e;
    r.axis = axis;
    r.seed = seed;
    r.nmse = est::nmse(h_est, cell.h);
    r.nmse_db = est::nmse_db(r.nmse);
    r.wall_s = cfg_.record_timing ? std::chrono::duration<double>(Clock::now() - t0).count() : 0.0;
    r.input_hash = cell.hash;
    out.push_back(r);
  }
  return out;
}

std::vector<ExperimentResult> Runner::run() {
  std::vector<ExperimentResult> results;
  auto append = [&results](std::vector<ExperimentResult> rows) {
    results.insert(results.end(), rows.begin(), rows.end());
  };
  for (std::uint64_t s : cfg_.seeds) {
    const std::uint64_t seed = cfg_.seed_base + s;
    switch (cfg_.scenario) {
      case Scenario::kSnrSweep:
        for (std::size_t i = 0; i < cfg_.snr_db.size(); ++i) {
          append(evaluate(make_cell(cfg_, seed, i, cfg_.snr_db[i], cfg_.pilot_len), cfg_.snr_db[i], seed, i));
        }
        break;
      case Scenario::kPilotSweep:
        for (std::size_t i = 0; i < cfg_.pilot_lens.size(); ++i) {
          const auto len = cfg_.pilot_lens[i];
          append(evaluate(make_cell(cfg_, seed, i, cfg_.fixed_snr_db, len), static_cast<double>(len), seed, i));
        }
        break;
      case Scenario::kMobility:
        for (std::size_t f = 1; f <= cfg_.mobility.n_frames; ++f) {
          append(evaluate(make_cell(cfg_, seed, f - 1, cfg_.fixed_snr_db, cfg_.pilot_len, f),
                          static_cast<double>(f), seed, f - 1));
        }
        break;
      case Scenario::kDenoiseOnce:
        append(evaluate(make_cell(cfg_, seed, 0, cfg_.fixed_snr_db, cfg_.pilot_len), cfg_.fixed_snr_db, seed, 0));
        break;
    }
  }
  sort_results(results);
  return results;
}

std::vector<ExperimentResult> run_snr_sweep(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.scenario = Scenario::kSnrSweep;
  return Runner(std::move(c)).run();
}

std::vector<ExperimentResult> run_pilot_sweep(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.scenario = Scenario::kPilotSweep;
  return Runner(std::move(c)).run();
}

std::vector<ExperimentResult> run_mobility(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.scenario = Scenario::kMobility;
  return Runner(std::move(c)).run();
}

void sort_results(std::vector<ExperimentResult>& results) {
  std::stable_sort(results.begin(), results.end(), [](const ExperimentResult& a, const ExperimentResult& b) {
    return std::tie(a.axis, a.estimator, a.seed) < std::tie(b.axis, b.estimator, b.seed);
  });
}

std::string format_csv(const std::vector<ExperimentResult>& results) {
  std::string out = kCsvHeader;
  out += '\n';
  char hash[20];
  for (const auto& r : results) {
    std::snprintf(hash, sizeof(hash), "%016" PRIx64, r.input_hash);
    out += std::string(to_string(r.scenario)) + ',' + std::string(to_string(r.estimator)) + ',' + fmt9(r.axis) +
           ',' + std::to_string(r.seed) + ',' + fmt9(r.nmse) + ',' + fmt9(r.nmse_db) + ',' + fmt9(r.wall_s) + ',' +
           hash + '\n';
  }
  return out;
}

void emit_csv(const std::vector<ExperimentResult>& results, const std::filesystem::path& path) {
  if (results.empty()) throw ValueError("no results to write");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << format_csv(results);
  if (!os.flush()) throw IoError("write failed for " + path.string());
}

std::vector<ExperimentResult> parse_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 1;
  auto fail = [&](const std::string& msg) -> IoError {
    return IoError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
  };
  if (!std::getline(is, line) || line != kCsvHeader) throw fail("unexpected header");
  std::vector<ExperimentResult> out;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 8) throw fail("expected 8 fields, got " + std::to_string(f.size()));
    ExperimentResult r;
    try {
      r.scenario = parse_scenario(f[0]);
      r.estimator = parse_estimator(f[1]);
      std::size_t used = 0;
      r.axis = std::stod(f[2]);
      r.seed = std::stoull(f[3], &used);
      if (used != f[3].size()) throw ValueError("bad seed");
      r.nmse = std::stod(f[4]);
      r.nmse_db = std::stod(f[5]);
      r.wall_s = std::stod(f[6]);
      r.input_hash = std::stoull(f[7], &used, 16);
      if (used != f[7].size()) throw ValueError("bad hash");
    } catch (const std::exception& e) {
      throw fail(std::string("malformed row: ") + e.what());
    }
    out.push_back(r);
  }
  return out;
}

void emit_plot_script(Scenario scenario, const std::filesystem::path& csv_path,
                      const std::filesystem::path& script_path) {
  std::ofstream os(script_path, std::ios::binary);
  if (!os) throw IoError("cannot open " + script_path.string() + " for writing");
  const char* xlabel = scenario == Scenario::kPilotSweep ? "pilot length L"
                       : scenario == Scenario::kMobility ? "frame"
                                                         : "SNR (dB)";
  os << "# gnuplot script for " << csv_path.filename().string() << "\n"
     << "# columns: 1 scenario, 2 estimator, 3 axis, 4 seed, 5 nmse, 6 nmse_db, 7 wall_s, 8 input_hash\n"
     << "# each point is the mean NMSE in dB over seeds\n"
     << "set datafile separator ','\n"
     << "set key top right\n"
     << "set grid\n"
     << "set xlabel '" << xlabel << "'\n"
     << "set ylabel 'NMSE (dB)'\n"
     << "data = '" << csv_path.filename().string() << "'\n"
     << "plot for [e in \"ls lmmse mmse s2s\"] data every ::1 using 3:(strcol(2) eq e ? $6 : NaN) "
        "smooth unique with linespoints title e\n";
  if (!os.flush()) throw IoError("write failed for " + script_path.string());
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValueError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace chanest::bench
