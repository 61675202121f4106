// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

// chanest <snr-sweep|pilot-sweep|mobility|denoise-once> --config <path> [options]
// Exit codes: 0 success, 1 invalid arguments or config, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include "chanest/bench/experiment.hpp"
#include "chanest/runtime.hpp"
#include "chanest/s2s/denoiser.hpp"

namespace bench = chanest::bench;

namespace {

constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

void print_summary(const std::vector<bench::ExperimentResult>& results) {
  std::map<std::pair<double, bench::Estimator>, std::vector<double>> cells;
  for (const auto& r : results) cells[{r.axis, r.estimator}].push_back(r.nmse_db);
  std::fprintf(stderr, "%10s  %-6s  %6s  %14s\n", "axis", "est", "seeds", "median NMSE dB");
  for (const auto& [key, values] : cells) {
    std::fprintf(stderr, "%10g  %-6s  %6zu  %14.3f\n", key.first, std::string(bench::to_string(key.second)).c_str(),
                 values.size(), bench::median(values));
  }
}

}  // namespace

int main(int argc, char** argv) {
  chanest::configure_allocator();

  CLI::App app{"Channel estimation experiments: LS, LMMSE, MMSE oracle and one-shot Self2Self denoising."};
  app.require_subcommand(1);
  std::filesystem::path config_path, out_path;
  bool small = false, timing = false;
  std::uint64_t seed_base = 0;
  std::string estimators;

  for (const char* name : {"snr-sweep", "pilot-sweep", "mobility", "denoise-once"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " scenario");
    sub->add_option("--config", config_path, "experiment config (TOML subset)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "CSV output path (default <scenario>.csv)");
    sub->add_flag("--small", small, "16x8 channel, depth-3 network, 500 iterations");
    sub->add_option("--seed-base", seed_base, "offset added to every configured seed");
    sub->add_option("--estimators", estimators, "comma-separated subset of ls,lmmse,mmse,s2s");
    sub->add_flag("--timing", timing, "record wall time per estimator (output is then not reproducible)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string scenario_name = sub->get_name();
  bench::ExperimentConfig cfg;
  try {
    chanest::configure_threads_from_env();
    bench::ExperimentConfig base;
    base.scenario = bench::parse_scenario(scenario_name);
    if (small) bench::apply_small_profile(base);
    cfg = bench::parse_config(config_path, base);
    if (cfg.scenario != base.scenario) {
      throw chanest::ValueError("config sets scenario = \"" + std::string(bench::to_string(cfg.scenario)) +
                                "\" but the command is " + scenario_name);
    }
    if (sub->count("--seed-base") > 0) cfg.seed_base = seed_base;
    if (!estimators.empty()) cfg.estimators = bench::parse_estimator_list(estimators);
    cfg.record_timing = timing;
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "chanest: %s\n", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "chanest: %s\n", e.what());
    return kExitRuntime;
  }

  try {
    if (out_path.empty()) out_path = scenario_name + ".csv";
    bench::Runner runner(cfg);
    std::fprintf(stderr, "chanest: %s, %zux%zu channel, %zu seeds\n", scenario_name.c_str(), cfg.channel.n_rx,
                 cfg.channel.n_tx, cfg.seeds.size());
    const auto results = runner.run();
    bench::emit_csv(results, out_path);
    auto script = out_path;
    script.replace_extension(".gp");
    bench::emit_plot_script(cfg.scenario, out_path, script);
    if (cfg.scenario == bench::Scenario::kDenoiseOnce) {
      for (const auto& trace : runner.traces()) {
        auto trace_path = out_path;
        trace_path.replace_filename(out_path.stem().string() + "_loss_seed" + std::to_string(trace.seed) + ".csv");
        chanest::s2s::write_loss_trace(trace_path, trace.loss);
      }
    }
    print_summary(results);
    std::fprintf(stderr, "chanest: wrote %s\n", out_path.string().c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "chanest: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
