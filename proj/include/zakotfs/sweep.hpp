#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "zakotfs/channel.hpp"
#include "zakotfs/eval.hpp"
#include "zakotfs/frame.hpp"
#include "zakotfs/isac.hpp"

namespace zakotfs {

enum class Mode { proposed, lmmse_modelfree, lmmse_perfect };

Mode parse_mode(const std::string& name);
std::string to_string(Mode mode);

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  GridConfig grid = default_grid();
  Rect pilot_region{2, 6, 5, 11};
  Rect guard_region{1, 7, 4, 12};
  Modulation modulation = Modulation::BPSK;
  ScenarioSpec scenario;
  IsacOptions solver;
  std::vector<double> snr_db{10.0};
  int trials = 10;
  std::uint64_t seed = 1;
  std::vector<Mode> modes{Mode::proposed};
  int workers = 1;
  std::string output = "results.csv";

  void validate() const;
  FrameLayout layout() const;
};

// Flat `key = value` text; '#' starts a comment. Unknown keys are errors.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);
// Canonical key/value echo of every setting, in schema order.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);
std::vector<std::string> config_keys();

// Everything a trial draws: scenario, payload and received signal.
struct TrialData {
  PathSet paths;
  std::vector<std::uint8_t> bits;
  CVector x_data;
  CVector s;
  CVector r;
  CVector y_dd;
  double sigma2 = 0.0;
};

// The scenario and payload depend on (seed, trial) only, the noise also on the SNR, so every mode and SNR
// sees the same targets and bits.
TrialData synthesize_trial(const RunConfig& cfg, double snr_db, int trial);

struct ResultRow {
  Mode mode = Mode::proposed;
  double snr_db = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;  // per-trial stream key
  int targets = 0;
  int detections = 0;
  int misses = 0;
  int false_alarms = 0;
  double range_sq_err = 0.0;     // Σ over detections, m²
  double velocity_sq_err = 0.0;  // Σ over detections, (m/s)²
  double channel_rel_err = 0.0;
  long long bit_errors = 0;
  long long bit_count = 0;
  int iterations = 0;
  bool converged = false;
  int anm_violations = 0;
  std::string status = "ok";
  double wall_time = 0.0;  // seconds; written to the timing sidecar only
};

ResultRow run_trial(const RunConfig& cfg, Mode mode, double snr_db, int trial);

// Every (mode, snr, trial) row, sorted by that key.
std::vector<ResultRow> run_sweep(const RunConfig& cfg);

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_timing_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_metadata(std::ostream& out, const RunConfig& cfg, const std::string& kind);
std::vector<std::string> csv_columns();

struct Summary {
  Mode mode = Mode::proposed;
  double snr_db = 0.0;
  int trials = 0;
  int failures = 0;
  double ber = 0.0;
  double pd = 0.0;
  double false_alarms_per_trial = 0.0;
  double range_rmse = 0.0;     // m, over matched targets
  double velocity_rmse = 0.0;  // m/s
  double channel_rel_err = 0.0;
  double mean_iterations = 0.0;
  int anm_violations = 0;
};

std::vector<Summary> summarize(const std::vector<ResultRow>& rows);
void write_summary(std::ostream& out, const std::vector<Summary>& summary);

struct TraceRecord {
  std::string variant;  // accelerated or ordinary
  double snr_db = 0.0;
  int trial = 0;
  TraceRow row;
};

// Runs the proposed receiver in accelerated and ordinary mode on the same draws.
std::vector<TraceRecord> convergence_trace(const RunConfig& cfg);
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& records);

struct SelftestItem {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SelftestItem> selftest();

// Runs body(i) for i in [0, count) on up to `workers` threads.
void parallel_for(int count, int workers, const std::function<void(int)>& body);

}  // namespace zakotfs
