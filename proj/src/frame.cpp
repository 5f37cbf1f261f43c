#include "zakotfs/frame.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace zakotfs {

void GridConfig::validate() const {
  if (M < 2 || N < 2) throw std::invalid_argument("grid needs M >= 2 and N >= 2");
  if (!(delta_f > 0.0) || !std::isfinite(delta_f)) throw std::invalid_argument("delta_f must be positive");
  if (!(f_c > 0.0) || !std::isfinite(f_c)) throw std::invalid_argument("f_c must be positive");
}

GridConfig default_grid() { return GridConfig{}; }

FrameLayout build_layout(const GridConfig& grid, const Rect& pilot_region, const Rect& guard_region) {
  grid.validate();
  const Rect full{0, grid.M - 1, 0, grid.N - 1};
  for (const Rect* r : {&pilot_region, &guard_region}) {
    if (r->l_lo > r->l_hi || r->k_lo > r->k_hi) throw LayoutError("empty rectangle");
  }
  if (!full.contains(guard_region)) throw LayoutError("guard region exceeds the grid");
  if (!guard_region.contains(pilot_region)) throw LayoutError("pilot region not inside guard region");

  FrameLayout layout;
  layout.M = grid.M;
  layout.N = grid.N;
  layout.pilot_l = grid.M / 2;
  layout.pilot_k = grid.N / 2;
  if (!pilot_region.contains(layout.pilot_l, layout.pilot_k)) throw LayoutError("pilot outside pilot region");
  layout.pilot_region = pilot_region;
  layout.guard_region = guard_region;
  for (int k = 0; k < grid.N; ++k)
    for (int l = 0; l < grid.M; ++l)
      if (!guard_region.contains(l, k)) layout.data_indices.push_back(grid.index(l, k));
  if (layout.data_indices.empty()) throw LayoutError("layout leaves no data cells");
  layout.pilot_amplitude = std::sqrt(static_cast<double>(grid.MN() - layout.data_count()));
  return layout;
}

FrameLayout default_layout(const GridConfig& grid) {
  return build_layout(grid, Rect{2, 6, 5, 11}, Rect{1, 7, 4, 12});
}

CVector assemble_frame(const FrameLayout& layout, const CVector& data_symbols, double pilot_amplitude) {
  if (data_symbols.size() != layout.data_count())
    throw std::invalid_argument("data symbol count " + std::to_string(data_symbols.size()) +
                                " does not match layout (" + std::to_string(layout.data_count()) + ")");
  CVector x = CVector::Zero(layout.M * layout.N);
  x(layout.pilot_index()) = pilot_amplitude;
  for (int i = 0; i < layout.data_count(); ++i) x(layout.data_indices[i]) = data_symbols(i);
  return x;
}

CVector assemble_frame(const FrameLayout& layout, const CVector& data_symbols) {
  return assemble_frame(layout, data_symbols, layout.pilot_amplitude);
}

CVector extract_data(const FrameLayout& layout, const CVector& x_dd) {
  if (x_dd.size() != layout.M * layout.N) throw std::invalid_argument("frame size mismatch");
  CVector d(layout.data_count());
  for (int i = 0; i < layout.data_count(); ++i) d(i) = x_dd(layout.data_indices[i]);
  return d;
}

Constellation make_constellation(Modulation kind) {
  Constellation c;
  c.kind = kind;
  if (kind == Modulation::BPSK) {
    c.bits_per_symbol = 1;
    c.points = {Complex(1, 0), Complex(-1, 0)};
  } else {
    const double a = 1.0 / std::sqrt(2.0);
    c.bits_per_symbol = 2;
    // 00, 01, 10, 11
    c.points = {Complex(a, a), Complex(-a, a), Complex(a, -a), Complex(-a, -a)};
  }
  return c;
}

Modulation parse_modulation(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (s == "bpsk") return Modulation::BPSK;
  if (s == "qpsk") return Modulation::QPSK;
  throw std::invalid_argument("unknown modulation '" + name + "'");
}

std::string to_string(Modulation kind) { return kind == Modulation::BPSK ? "bpsk" : "qpsk"; }

CVector bits_to_symbols(const Constellation& c, const std::vector<std::uint8_t>& bits) {
  const int b = c.bits_per_symbol;
  if (bits.size() % b != 0) throw std::invalid_argument("bit count not divisible by bits per symbol");
  CVector out(static_cast<Eigen::Index>(bits.size() / b));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    int idx = 0;
    for (int j = 0; j < b; ++j) idx = (idx << 1) | (bits[i * b + j] & 1);
    out(i) = c.points[idx];
  }
  return out;
}

int nearest_point(const Constellation& c, Complex z) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(c.points.size()); ++i) {
    const double d = std::norm(z - c.points[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<std::uint8_t> symbols_to_bits(const Constellation& c, const CVector& symbols) {
  const int b = c.bits_per_symbol;
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(symbols.size()) * b);
  for (Eigen::Index i = 0; i < symbols.size(); ++i) {
    const int idx = nearest_point(c, symbols(i));
    for (int j = 0; j < b; ++j) bits[i * b + j] = static_cast<std::uint8_t>((idx >> (b - 1 - j)) & 1);
  }
  return bits;
}

CVector hard_decision(const Constellation& c, const CVector& symbols) {
  CVector out(symbols.size());
  for (Eigen::Index i = 0; i < symbols.size(); ++i) out(i) = c.points[nearest_point(c, symbols(i))];
  return out;
}

Complex project_hull(const Constellation& c, Complex z) {
  if (c.kind == Modulation::BPSK) return {std::clamp(z.real(), -1.0, 1.0), 0.0};
  const double a = 1.0 / std::sqrt(2.0);
  return {std::clamp(z.real(), -a, a), std::clamp(z.imag(), -a, a)};
}

CVector project_hull(const Constellation& c, const CVector& z) {
  CVector out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out(i) = project_hull(c, z(i));
  return out;
}

}  // namespace zakotfs
