#pragma once

#include <functional>
#include <vector>

#include "zakotfs/frame.hpp"
#include "zakotfs/types.hpp"

namespace zakotfs {

struct Path {
  Complex gain{1.0, 0.0};
  double tau = 0.0;  // seconds
  double nu = 0.0;   // Hz
};
using PathSet = std::vector<Path>;

enum class ChannelSource { exact_from_paths, reconstructed_from_samples, reconstructed_from_atoms };

struct EffectiveChannel {
  CMatrix H;
  ChannelSource source = ChannelSource::exact_from_paths;
};

// Twiddle W[l,k] = e^{j2πlk/MN}; W_tilde is its vectorization (idx = kM + l).
struct TwiddleMatrix {
  CMatrix W;
  CVector W_tilde;
};
TwiddleMatrix make_twiddle(const GridConfig& grid);

// Caches the unit-root and DFT tables for one grid. Immutable after construction.
// Σ_{n<L} e^{j2πnx/L}
Complex dirichlet_kernel(int L, double x);

class ZakModem {
 public:
  explicit ZakModem(const GridConfig& grid);

  const GridConfig& grid() const { return grid_; }
  int MN() const { return mn_; }

  // e^{j2π p/MN} for any integer p
  Complex root(long long p) const {
    long long r = p % mn_;
    if (r < 0) r += mn_;
    return roots_[static_cast<std::size_t>(r)];
  }

  CVector modulate(const CVector& x_dd) const;
  CVector demodulate(const CVector& r) const;
  CVector apply_time_channel(const CVector& s, const PathSet& paths) const;

  // Unitary DFT / inverse DFT of length MN.
  CVector dft(const CVector& v) const;
  CVector idft(const CVector& v) const;
  const CMatrix& idft_matrix() const { return FH_; }

  // Time-domain channel T = Σ g D_ν F^H B_τ  (MN×MN).
  CMatrix time_channel_matrix(const PathSet& paths) const;
  // Time-domain channel F^H ⊙ Hmat for a dense channel vector, Hmat[q,j] = h[j·MN + q].
  CMatrix time_channel_matrix(const CVector& h) const;
  // Modulation matrix S_mod with s = S_mod x_dd.
  CMatrix modulation_matrix() const;
  // DD-domain view demodulate ∘ T ∘ modulate of a time-domain channel matrix.
  CMatrix dd_channel(const CMatrix& T) const;

  // Built as Z (F T) Z^H, with F T = Σ g C_ν Diag(b_τ) and C_ν circulant.
  EffectiveChannel effective_channel(const PathSet& paths) const;
  EffectiveChannel effective_channel_from_vector(const CVector& h) const;
  // Inverse of effective_channel(h): the dense channel vector that produces H_eff.
  CVector channel_vector(const CMatrix& H_eff) const;

 private:
  GridConfig grid_;
  int mn_;
  std::vector<Complex> roots_;
  CMatrix FH_;  // unitary inverse DFT matrix
};

CVector modulate(const GridConfig& grid, const CVector& x_dd);
CVector demodulate(const GridConfig& grid, const CVector& r);
CVector apply_time_channel(const GridConfig& grid, const CVector& s, const PathSet& paths);
EffectiveChannel effective_channel_from_paths(const GridConfig& grid, const PathSet& paths);

// Continuous frequency-window ambiguity ∫ A(f) A*(f−ν) e^{j2πfτ} df for a rectangular window on [0, MΔf).
Complex freq_window_ambiguity(const GridConfig& grid, double tau, double nu);
// The same window sampled at the MN subcarrier-grid frequencies f_n = nΔf/N (weight Δf/N each).
Complex sampled_freq_window_ambiguity(const GridConfig& grid, double tau, double nu);
// Σ_{n=0}^{MN-1} e^{-j2πn·arg/MN}
Complex time_window_ambiguity(const GridConfig& grid, double arg);

enum class AmbiguityModel { sampled, continuous };

// h_eff[l,k] before normalization; a unit path at the origin gives MΔf·MN at (0,0).
Complex h_eff_response(const GridConfig& grid, const PathSet& paths, int l, int k,
                       AmbiguityModel model = AmbiguityModel::sampled);
double h_eff_scale(const GridConfig& grid);  // MΔf·MN

// Normalized DD kernel samples h[a,b] = h_eff[a,b]/h_eff_scale over one delay period
// a ∈ [a0, a0+MN) and Doppler offsets b ∈ (−MN, MN).
class KernelTable {
 public:
  KernelTable(const GridConfig& grid, int a0 = 0);

  static KernelTable from_paths(const GridConfig& grid, const PathSet& paths,
                                AmbiguityModel model = AmbiguityModel::sampled);
  static KernelTable from_function(const GridConfig& grid, const std::function<Complex(int, int)>& raw_response,
                                   int a0 = 0);

  const GridConfig& grid() const { return grid_; }
  int a0() const { return a0_; }
  Complex at(int a, int b) const;
  void set(int a, int b, Complex v);

  // Zero every entry whose magnitude is below rel·max|h|.
  void truncate(double rel);

  struct Entry {
    int a;
    int b;
    Complex v;
  };
  std::vector<Entry> nonzeros() const;

 private:
  std::size_t slot(int a, int b) const;
  GridConfig grid_;
  int a0_;
  std::vector<Complex> values_;
};

inline constexpr double kDefaultSupportThreshold = 1e-12;

EffectiveChannel reconstruct_heff_from_response(const GridConfig& grid, const KernelTable& kernel);
CVector twisted_convolution(const GridConfig& grid, const KernelTable& kernel, const CVector& x_dd);

}  // namespace zakotfs
