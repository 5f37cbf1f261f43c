#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "zakotfs/modem.hpp"

namespace zakotfs {

// Deterministic random stream keyed by a master seed and a tuple of counters,
// so results never depend on which worker draws them.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

  double uniform(double lo, double hi);
  double normal();
  Complex complex_normal(double variance);  // circular, E|z|² = variance
  std::uint8_t bit();
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

struct ScenarioSpec {
  int paths = 1;
  double delay_lo = 0.5;    // second target delay law, in delay-resolution units
  double delay_hi = 1.5;
  double doppler_lo = 0.0;  // all targets, Doppler-resolution units
  double doppler_hi = 1.5;
  double gain_variance = 1.0;
};

// Target 1 sits at zero delay; further targets draw delays from [delay_lo, delay_hi].
PathSet draw_paths(const GridConfig& grid, const ScenarioSpec& spec, RngStream& rng);

CVector add_noise(const CVector& r_clean, double sigma2, RngStream& rng);

// Per-sample noise variance for unit symbol energy.
double snr_to_sigma2(double snr_db);

}  // namespace zakotfs
