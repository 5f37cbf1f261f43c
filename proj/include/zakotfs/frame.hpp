#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "zakotfs/types.hpp"

namespace zakotfs {

struct GridConfig {
  int M = 8;
  int N = 16;
  double delta_f = 30e3;
  double f_c = 24e9;

  int MN() const { return M * N; }
  double T() const { return 1.0 / delta_f; }
  double Fs() const { return M * delta_f; }
  double delay_resolution() const { return 1.0 / (M * delta_f); }
  double doppler_resolution() const { return delta_f / N; }

  // Physical delay/Doppler to fractional bin units (τ·MΔf, ν·NT).
  double delay_bins(double tau) const { return tau * M * delta_f; }
  double doppler_bins(double nu) const { return nu * N / delta_f; }
  double delay_seconds(double bins) const { return bins / (M * delta_f); }
  double doppler_hz(double bins) const { return bins * delta_f / N; }

  // idx(l,k) = k·M + l; identical to column-major storage of an M×N matrix.
  int index(int l, int k) const { return k * M + l; }

  void validate() const;
};

GridConfig default_grid();

struct Rect {
  int l_lo = 0;
  int l_hi = 0;
  int k_lo = 0;
  int k_hi = 0;

  bool contains(int l, int k) const { return l >= l_lo && l <= l_hi && k >= k_lo && k <= k_hi; }
  bool contains(const Rect& inner) const {
    return inner.l_lo >= l_lo && inner.l_hi <= l_hi && inner.k_lo >= k_lo && inner.k_hi <= k_hi;
  }
  int cells() const { return (l_hi - l_lo + 1) * (k_hi - k_lo + 1); }
};

struct FrameLayout {
  int M = 0;
  int N = 0;
  int pilot_l = 0;
  int pilot_k = 0;
  Rect pilot_region;
  Rect guard_region;
  std::vector<int> data_indices;  // linear indices, ascending
  double pilot_amplitude = 0.0;

  int pilot_index() const { return pilot_k * M + pilot_l; }
  int data_count() const { return static_cast<int>(data_indices.size()); }
};

class LayoutError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

FrameLayout build_layout(const GridConfig& grid, const Rect& pilot_region, const Rect& guard_region);

// Pilot at (4,8), pilot region [2,6]x[5,11], guard [1,7]x[4,12] on the 8x16 grid.
FrameLayout default_layout(const GridConfig& grid);

CVector assemble_frame(const FrameLayout& layout, const CVector& data_symbols, double pilot_amplitude);
CVector assemble_frame(const FrameLayout& layout, const CVector& data_symbols);
CVector extract_data(const FrameLayout& layout, const CVector& x_dd);

enum class Modulation { BPSK, QPSK };

struct Constellation {
  Modulation kind = Modulation::BPSK;
  std::vector<Complex> points;  // points[i] carries the bit pattern of i (MSB first)
  int bits_per_symbol = 1;
};

Constellation make_constellation(Modulation kind);
Modulation parse_modulation(const std::string& name);
std::string to_string(Modulation kind);

CVector bits_to_symbols(const Constellation& c, const std::vector<std::uint8_t>& bits);
int nearest_point(const Constellation& c, Complex z);
std::vector<std::uint8_t> symbols_to_bits(const Constellation& c, const CVector& symbols);
CVector hard_decision(const Constellation& c, const CVector& symbols);

Complex project_hull(const Constellation& c, Complex z);
CVector project_hull(const Constellation& c, const CVector& z);

}  // namespace zakotfs
