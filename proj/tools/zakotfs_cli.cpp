#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "zakotfs/sweep.hpp"

namespace fs = std::filesystem;
using namespace zakotfs;

namespace {

struct CommonArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string output;
  std::string snr;
  std::string mode;
  std::string modulation;
  int trials = 0;
  long long seed = -1;
  int workers = 0;
  int paths = -1;
  bool print_config = false;
};

void add_common(CLI::App* app, CommonArgs& a) {
  app->add_option("-c,--config", a.config, "key = value configuration file")->check(CLI::ExistingFile);
  app->add_option("-s,--set", a.sets, "override a setting, key=value (repeatable)");
  app->add_option("-o,--output", a.output, "output CSV path");
  app->add_option("--snr", a.snr, "comma-separated SNR list in dB");
  app->add_option("--mode", a.mode, "receivers: proposed, lmmse_modelfree, lmmse_perfect (comma-separated)");
  app->add_option("--modulation", a.modulation, "bpsk or qpsk");
  app->add_option("--trials", a.trials, "trials per SNR")->check(CLI::PositiveNumber);
  app->add_option("--seed", a.seed, "master seed")->check(CLI::NonNegativeNumber);
  app->add_option("-j,--workers", a.workers, "worker threads (default: hardware concurrency)")
      ->check(CLI::PositiveNumber);
  app->add_option("--paths", a.paths, "targets per trial")->check(CLI::NonNegativeNumber);
  app->add_flag("--print-config", a.print_config, "print the resolved configuration and exit");
}

RunConfig resolve(const CommonArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
  if (a.config.empty()) cfg.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (!a.output.empty()) cfg.output = a.output;
  if (!a.snr.empty()) apply_setting(cfg, "snr_db", a.snr);
  if (!a.mode.empty()) apply_setting(cfg, "mode", a.mode);
  if (!a.modulation.empty()) apply_setting(cfg, "modulation", a.modulation);
  if (a.trials > 0) cfg.trials = a.trials;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (a.workers > 0) cfg.workers = a.workers;
  if (a.paths >= 0) cfg.scenario.paths = a.paths;
  cfg.validate();
  return cfg;
}

std::string sidecar(const std::string& csv, const std::string& suffix) {
  fs::path p(csv);
  p.replace_extension();
  return p.string() + suffix;
}

std::ofstream open_out(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

void print_config(const RunConfig& cfg) {
  for (const auto& [k, v] : config_entries(cfg)) std::cout << k << " = " << v << '\n';
}

int do_sweep(const CommonArgs& a) {
  const RunConfig cfg = resolve(a);
  if (a.print_config) {
    print_config(cfg);
    return 0;
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = run_sweep(cfg);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    auto out = open_out(cfg.output);
    write_csv(out, rows);
  }
  {
    auto out = open_out(sidecar(cfg.output, ".timing.csv"));
    write_timing_csv(out, rows);
  }
  {
    auto out = open_out(sidecar(cfg.output, ".json"));
    write_metadata(out, cfg, "sweep");
  }
  write_summary(std::cout, summarize(rows));
  int failed = 0;
  for (const auto& r : rows) failed += r.status != "ok";
  std::fprintf(stdout, "%zu rows written to %s in %.1f s (%d failed trials)\n", rows.size(), cfg.output.c_str(), dt,
               failed);
  return 0;
}

int do_trace(const CommonArgs& a) {
  const RunConfig cfg = resolve(a);
  if (a.print_config) {
    print_config(cfg);
    return 0;
  }
  const auto records = convergence_trace(cfg);
  {
    auto out = open_out(cfg.output);
    write_trace_csv(out, records);
  }
  {
    auto out = open_out(sidecar(cfg.output, ".json"));
    write_metadata(out, cfg, "trace");
  }
  std::fprintf(stdout, "%zu trace rows written to %s\n", records.size(), cfg.output.c_str());
  return 0;
}

int do_selftest() {
  const auto t0 = std::chrono::steady_clock::now();
  int failed = 0;
  for (const auto& item : selftest()) {
    std::fprintf(stdout, "[%s] %s: %s\n", item.passed ? "PASS" : "FAIL", item.name.c_str(), item.detail.c_str());
    failed += !item.passed;
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stdout, "selftest %s in %.2f s\n", failed ? "FAILED" : "passed", dt);
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zak-OTFS bistatic ISAC simulator"};
  app.require_subcommand(1);

  CommonArgs sweep_args, trace_args;
  CLI::App* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep over SNR and trials");
  add_common(sweep, sweep_args);
  CLI::App* trace = app.add_subcommand("trace", "per-iteration objective of accelerated and ordinary runs");
  add_common(trace, trace_args);
  CLI::App* self = app.add_subcommand("selftest", "oracle equivalence checks on a 4x8 grid");
  CLI::App* keys = app.add_subcommand("keys", "list configuration keys with their defaults");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sweep) return do_sweep(sweep_args);
    if (*trace) return do_trace(trace_args);
    if (*self) return do_selftest();
    if (*keys) {
      print_config(RunConfig{});
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
