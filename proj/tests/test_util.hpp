#pragma once

#include <random>

#include "zakotfs/modem.hpp"

namespace zakotfs::testing {

inline CVector random_cvector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(g(rng), g(rng));
  return v;
}

inline Complex random_gain(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  return {g(rng), g(rng)};
}

// Random fractional paths with delays in [0, span_l) bins and Dopplers in (−span_k, span_k) bins.
inline PathSet random_paths(std::mt19937_64& rng, const GridConfig& grid, int count, double span_l = 2.0,
                            double span_k = 2.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PathSet p;
  for (int i = 0; i < count; ++i)
    p.push_back({random_gain(rng), grid.delay_seconds(span_l * u(rng)), grid.doppler_hz(span_k * (2 * u(rng) - 1))});
  return p;
}

inline double rel_err(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); }

}  // namespace zakotfs::testing
