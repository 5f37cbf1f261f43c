#include "zakotfs/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace zakotfs {

namespace {
std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t state = seed;
  std::uint64_t h = splitmix64(state);
  for (std::uint64_t k : keys) {
    state ^= h + k * 0xd6e8feb86659fd93ULL;
    h = splitmix64(state);
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys)
    : engine_(mix_seed(seed, keys)) {}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * std::generate_canonical<double, 53>(engine_);
}

double RngStream::normal() { return normal_(engine_); }

Complex RngStream::complex_normal(double variance) {
  const double s = std::sqrt(0.5 * variance);
  const double re = normal();
  const double im = normal();
  return {s * re, s * im};
}

std::uint8_t RngStream::bit() { return static_cast<std::uint8_t>(engine_() >> 63); }

PathSet draw_paths(const GridConfig& grid, const ScenarioSpec& spec, RngStream& rng) {
  if (spec.paths < 0) throw std::invalid_argument("path count must be non-negative");
  PathSet paths;
  for (int i = 0; i < spec.paths; ++i) {
    Path p;
    const double tau_bins = i == 0 ? 0.0 : rng.uniform(spec.delay_lo, spec.delay_hi);
    const double nu_bins = rng.uniform(spec.doppler_lo, spec.doppler_hi);
    p.tau = grid.delay_seconds(tau_bins);
    p.nu = grid.doppler_hz(nu_bins);
    p.gain = rng.complex_normal(spec.gain_variance);
    paths.push_back(p);
  }
  return paths;
}

CVector add_noise(const CVector& r_clean, double sigma2, RngStream& rng) {
  if (sigma2 < 0.0) throw std::invalid_argument("noise variance must be non-negative");
  CVector r = r_clean;
  if (sigma2 == 0.0) return r;
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) += rng.complex_normal(sigma2);
  return r;
}

double snr_to_sigma2(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

}  // namespace zakotfs
