#include "zakotfs/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "zakotfs/init.hpp"
#include "zakotfs/modem.hpp"

namespace zakotfs {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  }
}

long long to_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected an integer, got '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) { return static_cast<int>(to_integer(key, v)); }

bool to_bool(const std::string& key, const std::string& v) {
  const std::string l = lower(v);
  if (l == "1" || l == "true" || l == "yes" || l == "on") return true;
  if (l == "0" || l == "false" || l == "no" || l == "off") return false;
  throw ConfigError("'" + key + "': expected a boolean, got '" + v + "'");
}

Rect to_rect(const std::string& key, const std::string& v) {
  const auto parts = split_list(v);
  if (parts.size() != 4) throw ConfigError("'" + key + "': expected l_lo,l_hi,k_lo,k_hi");
  return {to_int(key, parts[0]), to_int(key, parts[1]), to_int(key, parts[2]), to_int(key, parts[3])};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_rect(const Rect& r) {
  return std::to_string(r.l_lo) + "," + std::to_string(r.l_hi) + "," + std::to_string(r.k_lo) + "," +
         std::to_string(r.k_hi);
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define ZK_DOUBLE(name, member)                                                          \
  Field {                                                                                \
    name, [](RunConfig& c, const std::string& v) { c.member = to_double(name, v); },     \
        [](const RunConfig& c) { return fmt(c.member); }                                 \
  }
#define ZK_INT(name, member)                                                             \
  Field {                                                                                \
    name, [](RunConfig& c, const std::string& v) { c.member = to_int(name, v); },        \
        [](const RunConfig& c) { return std::to_string(c.member); }                      \
  }
#define ZK_BOOL(name, member)                                                            \
  Field {                                                                                \
    name, [](RunConfig& c, const std::string& v) { c.member = to_bool(name, v); },       \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }      \
  }

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = {
      ZK_INT("M", grid.M),
      ZK_INT("N", grid.N),
      ZK_DOUBLE("delta_f", grid.delta_f),
      ZK_DOUBLE("f_c", grid.f_c),
      {"pilot_region", [](RunConfig& c, const std::string& v) { c.pilot_region = to_rect("pilot_region", v); },
       [](const RunConfig& c) { return fmt_rect(c.pilot_region); }},
      {"guard_region", [](RunConfig& c, const std::string& v) { c.guard_region = to_rect("guard_region", v); },
       [](const RunConfig& c) { return fmt_rect(c.guard_region); }},
      {"modulation",
       [](RunConfig& c, const std::string& v) {
         try {
           c.modulation = parse_modulation(v);
         } catch (const std::exception& e) {
           throw ConfigError(std::string("'modulation': ") + e.what());
         }
       },
       [](const RunConfig& c) { return to_string(c.modulation); }},
      ZK_INT("paths", scenario.paths),
      ZK_DOUBLE("delay_lo", scenario.delay_lo),
      ZK_DOUBLE("delay_hi", scenario.delay_hi),
      ZK_DOUBLE("doppler_lo", scenario.doppler_lo),
      ZK_DOUBLE("doppler_hi", scenario.doppler_hi),
      ZK_DOUBLE("gain_variance", scenario.gain_variance),
      {"snr_db",
       [](RunConfig& c, const std::string& v) {
         c.snr_db.clear();
         for (const auto& s : split_list(v)) c.snr_db.push_back(to_double("snr_db", s));
       },
       [](const RunConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.snr_db.size(); ++i) out += (i ? "," : "") + fmt(c.snr_db[i]);
         return out;
       }},
      ZK_INT("trials", trials),
      {"seed",
       [](RunConfig& c, const std::string& v) {
         const long long s = to_integer("seed", v);
         if (s < 0) throw ConfigError("'seed' must be non-negative");
         c.seed = static_cast<std::uint64_t>(s);
       },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"mode",
       [](RunConfig& c, const std::string& v) {
         c.modes.clear();
         for (const auto& s : split_list(v)) c.modes.push_back(parse_mode(s));
       },
       [](const RunConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.modes.size(); ++i) out += (i ? "," : "") + to_string(c.modes[i]);
         return out;
       }},
      ZK_INT("workers", workers),
      {"output", [](RunConfig& c, const std::string& v) { c.output = v; },
       [](const RunConfig& c) { return c.output; }},
      ZK_INT("t_max", solver.t_max),
      ZK_BOOL("accelerated", solver.accelerated),
      ZK_BOOL("unscaled_alpha", solver.unscaled_alpha),
      ZK_BOOL("stop_on_small_step", solver.stop_on_small_step),
      ZK_DOUBLE("eta_scale", solver.eta_scale),
      ZK_DOUBLE("eps0_rel", solver.eps0_rel),
      ZK_DOUBLE("eps_min_rel", solver.eps_min_rel),
      ZK_DOUBLE("theta", solver.theta),
      ZK_DOUBLE("rho0_rel", solver.rho0_rel),
      ZK_DOUBLE("rho_growth", solver.rho_growth),
      ZK_INT("rho_period", solver.rho_period),
      ZK_DOUBLE("rho_upb_rel", solver.rho_upb_rel),
      ZK_DOUBLE("delta_rel", solver.delta_rel),
      ZK_DOUBLE("amplitude_kappa", solver.amplitude_kappa),
      ZK_DOUBLE("power_tol", solver.power_tol),
      ZK_DOUBLE("anm_epsilon", solver.anm.epsilon),
      ZK_INT("anm_k_max", solver.anm.K_max),
      ZK_INT("anm_oversampling", solver.anm.oversampling),
      ZK_INT("anm_newton_steps", solver.anm.newton_steps),
      ZK_DOUBLE("anm_merge_radius", solver.anm.merge_radius),
      ZK_BOOL("anm_warm_start", solver.anm_warm_start),
  };
  return fields;
}

#undef ZK_DOUBLE
#undef ZK_INT
#undef ZK_BOOL

std::uint64_t snr_key(double snr_db) { return std::bit_cast<std::uint64_t>(snr_db); }

}  // namespace

Mode parse_mode(const std::string& name) {
  const std::string l = lower(trim(name));
  if (l == "proposed") return Mode::proposed;
  if (l == "lmmse_modelfree") return Mode::lmmse_modelfree;
  if (l == "lmmse_perfect") return Mode::lmmse_perfect;
  throw ConfigError("unknown mode '" + name + "' (proposed, lmmse_modelfree, lmmse_perfect)");
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::proposed:
      return "proposed";
    case Mode::lmmse_modelfree:
      return "lmmse_modelfree";
    case Mode::lmmse_perfect:
      return "lmmse_perfect";
  }
  return "unknown";
}

void RunConfig::validate() const {
  try {
    grid.validate();
    (void)layout();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (snr_db.empty()) throw ConfigError("snr_db must list at least one value");
  if (modes.empty()) throw ConfigError("mode must list at least one receiver");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (scenario.paths < 0) throw ConfigError("paths must be non-negative");
  if (scenario.delay_hi < scenario.delay_lo || scenario.doppler_hi < scenario.doppler_lo)
    throw ConfigError("scenario ranges must have lo <= hi");
  // the estimator searches delay in [0, M) and Doppler in [0, N) bins
  if (scenario.delay_lo < 0.0 || scenario.delay_hi >= grid.M)
    throw ConfigError("delay range must lie in [0, M) bins");
  if (scenario.doppler_lo < 0.0 || scenario.doppler_hi >= grid.N)
    throw ConfigError("doppler range must lie in [0, N) bins");
  if (!(scenario.gain_variance > 0.0)) throw ConfigError("gain_variance must be positive");
  if (solver.t_max < 1) throw ConfigError("t_max must be at least 1");
  if (!(solver.theta > 0.0 && solver.theta <= 1.0)) throw ConfigError("theta must lie in (0, 1]");
  if (!(solver.eta_scale >= 0.0)) throw ConfigError("eta_scale must be non-negative");
  if (!(solver.anm.epsilon > 0.0)) throw ConfigError("anm_epsilon must be positive");
  if (solver.anm.K_max < 1 || solver.anm.oversampling < 1) throw ConfigError("anm budget must be positive");
  if (solver.rho_growth < 1.0) throw ConfigError("rho_growth must be at least 1");
}

FrameLayout RunConfig::layout() const { return build_layout(grid, pilot_region, guard_region); }

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const std::string k = trim(key);
  for (const auto& f : schema())
    if (lower(f.key) == lower(k)) {
      f.set(cfg, trim(value));
      return;
    }
  throw ConfigError("unknown config key '" + k + "'");
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    try {
      apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : schema()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : schema()) out.emplace_back(f.key);
  return out;
}

TrialData synthesize_trial(const RunConfig& cfg, double snr_db, int trial) {
  const auto t = static_cast<std::uint64_t>(trial);
  const FrameLayout layout = cfg.layout();
  const Constellation c = make_constellation(cfg.modulation);
  const ZakModem modem(cfg.grid);

  TrialData d;
  RngStream scene(cfg.seed, {t, 0});
  d.paths = draw_paths(cfg.grid, cfg.scenario, scene);
  d.bits.resize(static_cast<std::size_t>(layout.data_count()) * c.bits_per_symbol);
  for (auto& b : d.bits) b = scene.bit();
  d.x_data = bits_to_symbols(c, d.bits);
  d.s = modem.modulate(assemble_frame(layout, d.x_data));
  d.sigma2 = snr_to_sigma2(snr_db);
  RngStream noise(cfg.seed, {t, 1, snr_key(snr_db)});
  d.r = add_noise(modem.apply_time_channel(d.s, d.paths), d.sigma2, noise);
  d.y_dd = modem.demodulate(d.r);
  return d;
}

ResultRow run_trial(const RunConfig& cfg, Mode mode, double snr_db, int trial) {
  ResultRow row;
  row.mode = mode;
  row.snr_db = snr_db;
  row.trial = trial;
  row.seed = mix_seed(cfg.seed, {static_cast<std::uint64_t>(trial)});
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const TrialData d = synthesize_trial(cfg, snr_db, trial);
    const FrameLayout layout = cfg.layout();
    const Constellation c = make_constellation(cfg.modulation);
    const ZakModem modem(cfg.grid);
    const CMatrix H_true = modem.effective_channel(d.paths).H;
    const double sigma2 = std::max(d.sigma2, kSigma2Floor);

    PathSet est;
    CMatrix H_est;
    CVector x_hat;
    switch (mode) {
      case Mode::proposed: {
        const IsacResult res = run(modem, layout, c, d.r, d.y_dd, sigma2, cfg.solver);
        est = res.paths;
        H_est = res.H_eff;
        x_hat = res.x_data;
        row.iterations = res.iterations;
        row.converged = res.converged;
        for (const auto& tr : res.trace) row.anm_violations += tr.anm_violations;
        break;
      }
      case Mode::lmmse_modelfree: {
        const InitialState init = init_state(modem, layout, c, d.y_dd, sigma2);
        H_est = init.H_hat.H;
        x_hat = hard_decision(c, extract_data(layout, init.x_lmmse));
        break;
      }
      case Mode::lmmse_perfect: {
        H_est = H_true;
        x_hat = hard_decision(c, extract_data(layout, lmmse_detect_robust(H_true, d.y_dd, sigma2)));
        break;
      }
    }
    const TrialMetrics tm = evaluate_trial(d.paths, est, cfg.grid, H_true, H_est, d.bits, symbols_to_bits(c, x_hat));
    row.targets = static_cast<int>(d.paths.size());
    row.detections = tm.detections;
    row.misses = tm.misses;
    row.false_alarms = tm.false_alarms;
    for (double e : tm.range_errors) row.range_sq_err += e * e;
    for (double e : tm.velocity_errors) row.velocity_sq_err += e * e;
    row.channel_rel_err = tm.channel_rel_err;
    row.bit_errors = static_cast<long long>(tm.bit_errors);
    row.bit_count = static_cast<long long>(tm.bit_count);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    row.status = "error: " + msg;
  }
  row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

void parallel_for(int count, int workers, const std::function<void(int)>& body) {
  if (count <= 0) return;
  const int n = std::max(1, std::min(workers, count));
  if (n == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int w = 0; w < n; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<ResultRow> run_sweep(const RunConfig& cfg) {
  cfg.validate();
  struct Job {
    Mode mode;
    double snr;
    int trial;
  };
  std::vector<Job> jobs;
  for (Mode m : cfg.modes)
    for (double snr : cfg.snr_db)
      for (int t = 0; t < cfg.trials; ++t) jobs.push_back({m, snr, t});
  std::vector<ResultRow> rows(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), cfg.workers, [&](int i) {
    const Job& j = jobs[static_cast<std::size_t>(i)];
    rows[static_cast<std::size_t>(i)] = run_trial(cfg, j.mode, j.snr, j.trial);
  });
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::make_tuple(to_string(a.mode), a.snr_db, a.trial) < std::make_tuple(to_string(b.mode), b.snr_db, b.trial);
  });
  return rows;
}

std::vector<std::string> csv_columns() {
  return {"mode",         "snr_db",          "trial",           "seed",       "targets",
          "detections",   "misses",          "false_alarms",    "range_sq_err", "velocity_sq_err",
          "channel_rel_err", "bit_errors",   "bit_count",       "iterations", "converged",
          "anm_violations", "status"};
}

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  const auto cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : rows) {
    out << to_string(r.mode) << ',' << fmt(r.snr_db) << ',' << r.trial << ',' << r.seed << ',' << r.targets << ','
        << r.detections << ',' << r.misses << ',' << r.false_alarms << ',' << fmt(r.range_sq_err) << ','
        << fmt(r.velocity_sq_err) << ',' << fmt(r.channel_rel_err) << ',' << r.bit_errors << ',' << r.bit_count
        << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << r.anm_violations << ',' << r.status
        << '\n';
  }
}

void write_timing_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "mode,snr_db,trial,wall_time_s\n";
  for (const auto& r : rows)
    out << to_string(r.mode) << ',' << fmt(r.snr_db) << ',' << r.trial << ',' << fmt(r.wall_time) << '\n';
}

void write_metadata(std::ostream& out, const RunConfig& cfg, const std::string& kind) {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["version"] = ZAKOTFS_VERSION;
  nlohmann::ordered_json c;
  for (const auto& [k, v] : config_entries(cfg)) c[k] = v;
  j["config"] = c;
  j["snr_definition"] = "unit-energy data symbols; per-sample complex noise variance sigma2 = 10^(-snr_db/10)";
  j["channel_rel_err"] = "relative Frobenius error ||H_est - H_true||_F / ||H_true||_F of the DD effective channel";
  j["range_error"] = "c*|delta tau| with c = 2.998e8 m/s (delay-equivalent path range)";
  j["velocity_error"] = "(c/f_c)*|delta nu|";
  j["gate"] = "a match is a detection iff |delta tau| <= tau_res/2 and |delta nu| <= nu_res/2";
  j["sensing_columns"] = "targets are only estimated by the proposed receiver; baselines report zero detections";
  j["columns"] = csv_columns();
  out << j.dump(2) << '\n';
}

std::vector<Summary> summarize(const std::vector<ResultRow>& rows) {
  std::map<std::pair<std::string, double>, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) groups[{to_string(r.mode), r.snr_db}].push_back(&r);
  std::vector<Summary> out;
  for (const auto& [key, members] : groups) {
    Summary s;
    s.mode = parse_mode(key.first);
    s.snr_db = key.second;
    long long bits = 0, errors = 0, targets = 0, detections = 0, fa = 0;
    double rsq = 0.0, vsq = 0.0, chan = 0.0, iters = 0.0;
    int ok = 0;
    for (const ResultRow* r : members) {
      ++s.trials;
      if (r->status != "ok") {
        ++s.failures;
        continue;
      }
      ++ok;
      bits += r->bit_count;
      errors += r->bit_errors;
      targets += r->targets;
      detections += r->detections;
      fa += r->false_alarms;
      rsq += r->range_sq_err;
      vsq += r->velocity_sq_err;
      chan += r->channel_rel_err;
      iters += r->iterations;
      s.anm_violations += r->anm_violations;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.ber = bits > 0 ? static_cast<double>(errors) / static_cast<double>(bits) : nan;
    s.pd = targets > 0 ? static_cast<double>(detections) / static_cast<double>(targets) : nan;
    s.false_alarms_per_trial = ok > 0 ? static_cast<double>(fa) / ok : nan;
    s.range_rmse = detections > 0 ? std::sqrt(rsq / static_cast<double>(detections)) : nan;
    s.velocity_rmse = detections > 0 ? std::sqrt(vsq / static_cast<double>(detections)) : nan;
    s.channel_rel_err = ok > 0 ? chan / ok : nan;
    s.mean_iterations = ok > 0 ? iters / ok : nan;
    out.push_back(s);
  }
  return out;
}

void write_summary(std::ostream& out, const std::vector<Summary>& summary) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %7s %6s %10s %7s %8s %11s %11s %9s %7s\n", "mode", "snr_db", "trials", "ber",
                "pd", "fa/trial", "range_rmse", "vel_rmse", "chan_err", "iters");
  out << buf;
  for (const auto& s : summary) {
    std::snprintf(buf, sizeof buf, "%-16s %7.2f %6d %10.3e %7.3f %8.3f %11.3f %11.4f %9.4f %7.1f\n",
                  to_string(s.mode).c_str(), s.snr_db, s.trials, s.ber, s.pd, s.false_alarms_per_trial,
                  s.range_rmse, s.velocity_rmse, s.channel_rel_err, s.mean_iterations);
    out << buf;
    if (s.failures > 0) out << "  (" << s.failures << " failed trials)\n";
  }
}

std::vector<TraceRecord> convergence_trace(const RunConfig& cfg) {
  cfg.validate();
  struct Job {
    double snr;
    int trial;
    bool accelerated;
  };
  std::vector<Job> jobs;
  for (double snr : cfg.snr_db)
    for (int t = 0; t < cfg.trials; ++t)
      for (bool acc : {true, false}) jobs.push_back({snr, t, acc});
  std::vector<std::vector<TraceRecord>> parts(jobs.size());
  const FrameLayout layout = cfg.layout();
  const Constellation c = make_constellation(cfg.modulation);
  const ZakModem modem(cfg.grid);
  parallel_for(static_cast<int>(jobs.size()), cfg.workers, [&](int i) {
    const Job& j = jobs[static_cast<std::size_t>(i)];
    const TrialData d = synthesize_trial(cfg, j.snr, j.trial);
    IsacOptions opts = cfg.solver;
    opts.accelerated = j.accelerated;
    const IsacResult res = run(modem, layout, c, d.r, d.y_dd, std::max(d.sigma2, kSigma2Floor), opts);
    for (const auto& row : res.trace)
      parts[static_cast<std::size_t>(i)].push_back({j.accelerated ? "accelerated" : "ordinary", j.snr, j.trial, row});
  });
  std::vector<TraceRecord> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& records) {
  out << "variant,snr_db,trial,t,objective,penalty_objective,h_step,x_step,rho,tuples,mu,mu_bar,iota,iota_bar,eps,"
         "alpha,beta,anm_iterations,anm_violations\n";
  for (const auto& r : records) {
    const TraceRow& w = r.row;
    out << r.variant << ',' << fmt(r.snr_db) << ',' << r.trial << ',' << w.t << ',' << fmt(w.objective) << ','
        << fmt(w.penalty_objective) << ',' << fmt(w.h_step) << ',' << fmt(w.x_step) << ',' << fmt(w.rho) << ','
        << w.tuples << ',' << fmt(w.mu) << ',' << fmt(w.mu_bar) << ',' << fmt(w.iota) << ',' << fmt(w.iota_bar)
        << ',' << fmt(w.eps) << ',' << fmt(w.alpha) << ',' << fmt(w.beta) << ',' << w.anm_iterations << ','
        << w.anm_violations << '\n';
  }
}

namespace {

template <class F>
SelftestItem check(const std::string& name, F&& fn) {
  SelftestItem item;
  item.name = name;
  try {
    const auto [ok, detail] = fn();
    item.passed = ok;
    item.detail = detail;
  } catch (const std::exception& e) {
    item.passed = false;
    item.detail = std::string("exception: ") + e.what();
  }
  return item;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

CVector random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(g(rng), g(rng));
  return v;
}

PathSet random_channel(std::mt19937_64& rng, const GridConfig& grid, int count) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  PathSet p;
  for (int i = 0; i < count; ++i)
    p.push_back({{g(rng), g(rng)}, grid.delay_seconds(2.0 * u(rng)), grid.doppler_hz(2.0 * (2.0 * u(rng) - 1.0))});
  return p;
}

}  // namespace

std::vector<SelftestItem> selftest() {
  GridConfig grid;
  grid.M = 4;
  grid.N = 8;
  const int MN = grid.MN();
  const ZakModem modem(grid);
  std::mt19937_64 rng(2024);
  std::vector<SelftestItem> items;

  items.push_back(check("identity channel round trip", [&] {
    const PathSet identity{{Complex(1.0, 0.0), 0.0, 0.0}};
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
      const CVector x = random_vector(rng, MN);
      const CVector y = modem.demodulate(modem.apply_time_channel(modem.modulate(x), identity));
      worst = std::max(worst, (y - x).norm() / x.norm());
    }
    return std::pair{worst <= 1e-10, "max rel err " + sci(worst)};
  }));

  items.push_back(check("twisted convolution equals the matrix channel", [&] {
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const PathSet paths = random_channel(rng, grid, 1 + t % 2);
      KernelTable kernel = KernelTable::from_paths(grid, paths);
      kernel.truncate(kDefaultSupportThreshold);
      const CVector x = random_vector(rng, MN);
      const CVector ym = modem.effective_channel(paths).H * x;
      worst = std::max(worst, (twisted_convolution(grid, kernel, x) - ym).norm() / ym.norm());
    }
    return std::pair{worst <= 1e-6, "max rel err " + sci(worst)};
  }));

  items.push_back(check("response-sample reconstruction equals the exact channel", [&] {
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const PathSet paths = random_channel(rng, grid, 1 + t % 2);
      const CMatrix H = modem.effective_channel(paths).H;
      const CMatrix Hr = reconstruct_heff_from_response(grid, KernelTable::from_paths(grid, paths)).H;
      worst = std::max(worst, (Hr - H).norm() / H.norm());
    }
    return std::pair{worst <= 1e-8, "max rel err " + sci(worst)};
  }));

  items.push_back(check("structured effective channel equals the dense route", [&] {
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const PathSet paths = random_channel(rng, grid, 1 + t % 3);
      const CMatrix dense = modem.dd_channel(modem.time_channel_matrix(paths));
      worst = std::max(worst, (modem.effective_channel(paths).H - dense).norm() / dense.norm());
    }
    return std::pair{worst <= 1e-10, "max rel err " + sci(worst)};
  }));

  items.push_back(check("forward and adjoint operators are adjoint", [&] {
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const CVector s = random_vector(rng, MN), h = random_vector(rng, MN * MN), u = random_vector(rng, MN);
      const Complex lhs = u.dot(forward_S(modem, s, h));
      worst = std::max(worst, std::abs(lhs - adjoint_S(modem, s, u).dot(h)) / std::abs(lhs));
    }
    return std::pair{worst <= 1e-10, "max rel err " + sci(worst)};
  }));

  items.push_back(check("unit atom equals a unit path", [&] {
    const AtomDictionary dict(grid);
    double worst = 0.0;
    for (const auto& p : random_channel(rng, grid, 10)) {
      const CVector s = random_vector(rng, MN);
      const CVector a = dict.atom_bins(grid.delay_bins(p.tau), grid.doppler_bins(p.nu));
      const CVector want = modem.apply_time_channel(s, {{Complex(1.0, 0.0), p.tau, p.nu}});
      worst = std::max(worst, (forward_S(modem, s, a) - want).norm() / want.norm());
    }
    return std::pair{worst <= 1e-10, "max rel err " + sci(worst)};
  }));

  items.push_back(check("FFT grid scorer equals direct evaluation", [&] {
    const AtomDictionary dict(grid);
    const CVector h = random_vector(rng, MN * MN);
    const double d = (dict.grid_scores(h, 2) - dict.grid_scores_naive(h, 2)).cwiseAbs().maxCoeff();
    return std::pair{d <= 1e-8, "max abs diff " + sci(d)};
  }));

  items.push_back(check("coordinate descent recovers an off-grid atom", [&] {
    const AtomDictionary dict(grid);
    const Complex c0(0.6, 0.8);
    const double tb = 1.37, nb = 2.61;
    SolverBudget b;
    b.epsilon = 1e-6;
    const auto res = coordinate_descent(dict, c0 * dict.atom_bins(tb, nb), 1.0, 1.0, b);
    if (res.rep.tuples.size() != 1) return std::pair{false, std::to_string(res.rep.tuples.size()) + " atoms"};
    const auto& t = res.rep.tuples[0];
    const double e = std::max(std::abs(grid.delay_bins(t.tau) - tb), std::abs(grid.doppler_bins(t.nu) - nb));
    return std::pair{e <= 1e-3 && std::abs(t.c - c0) <= 0.01 && res.report.monotonicity_violations == 0,
                     "location err " + sci(e) + " bins"};
  }));

  items.push_back(check("hungarian equals exhaustive search", [&] {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int bad = 0;
    for (int t = 0; t < 200; ++t) {
      const int n = 1 + t % 5;
      Eigen::MatrixXd c(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) c(i, j) = u(rng);
      double got = 0.0;
      for (const auto& [i, j] : hungarian(c)) got += c(i, j);
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      double best = 1e300;
      do {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += c(i, perm[static_cast<std::size_t>(i)]);
        best = std::min(best, s);
      } while (std::next_permutation(perm.begin(), perm.end()));
      bad += std::abs(got - best) > 1e-12;
    }
    return std::pair{bad == 0, std::to_string(bad) + " mismatches of 200"};
  }));

  items.push_back(check("noiseless perfect-CSI detection is error free", [&] {
    RunConfig cfg;
    cfg.grid = grid;
    cfg.pilot_region = {1, 3, 3, 5};
    cfg.guard_region = {0, 3, 2, 6};
    cfg.modes = {Mode::lmmse_perfect};
    cfg.snr_db = {100.0};
    cfg.trials = 3;
    const auto rows = run_sweep(cfg);
    long long errors = 0;
    for (const auto& r : rows) errors += r.bit_errors + (r.status == "ok" ? 0 : 1);
    return std::pair{errors == 0, std::to_string(errors) + " bit errors"};
  }));

  return items;
}

}  // namespace zakotfs
