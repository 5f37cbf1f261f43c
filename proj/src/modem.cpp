#include "zakotfs/modem.hpp"

#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace zakotfs {

namespace {

void check_size(const CVector& v, int n, const char* what) {
  if (v.size() != n)
    throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                                std::to_string(v.size()));
}

Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine;
  return engine;
}

// Σ_{n=n0}^{n0+L-1} e^{jθn}
Complex geometric_sum(double theta, long long n0, long long L) {
  if (L <= 0) return {0.0, 0.0};
  const double half = 0.5 * theta;
  const double s = std::sin(half);
  if (std::abs(s) < 1e-4) {
    Complex acc{0.0, 0.0};
    for (long long n = n0; n < n0 + L; ++n) acc += std::polar(1.0, theta * static_cast<double>(n));
    return acc;
  }
  const double ratio = std::sin(half * static_cast<double>(L)) / s;
  return std::polar(ratio, theta * (static_cast<double>(n0) + 0.5 * static_cast<double>(L - 1)));
}

}  // namespace

TwiddleMatrix make_twiddle(const GridConfig& grid) {
  TwiddleMatrix tw;
  const int MN = grid.MN();
  tw.W.resize(grid.M, grid.N);
  tw.W_tilde.resize(MN);
  for (int k = 0; k < grid.N; ++k)
    for (int l = 0; l < grid.M; ++l) {
      const Complex w = cis2pi(static_cast<double>((l * k) % MN) / MN);
      tw.W(l, k) = w;
      tw.W_tilde(grid.index(l, k)) = w;
    }
  return tw;
}

ZakModem::ZakModem(const GridConfig& grid) : grid_(grid), mn_(grid.MN()) {
  grid_.validate();
  roots_.resize(mn_);
  for (int p = 0; p < mn_; ++p) roots_[p] = cis2pi(static_cast<double>(p) / mn_);
  FH_.resize(mn_, mn_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(mn_));
  for (int n = 0; n < mn_; ++n)
    for (int q = 0; q < mn_; ++q) FH_(q, n) = scale * roots_[(static_cast<long long>(q) * n) % mn_];
}

CVector ZakModem::dft(const CVector& v) const {
  CVector out(v.size());
  fft_engine().fwd(out, v);
  return out / std::sqrt(static_cast<double>(v.size()));
}

CVector ZakModem::idft(const CVector& v) const {
  CVector out(v.size());
  fft_engine().inv(out, v);
  return out * std::sqrt(static_cast<double>(v.size()));
}

// s[mN+k] = M^{-1/2} Σ_l X[l,k] e^{-j2πl(mN+k)/MN}
CVector ZakModem::modulate(const CVector& x_dd) const {
  check_size(x_dd, mn_, "modulate");
  const int M = grid_.M, N = grid_.N;
  const double scale = 1.0 / std::sqrt(static_cast<double>(M));
  CVector s = CVector::Zero(mn_);
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < N; ++k) {
      const int n = m * N + k;
      Complex acc{0.0, 0.0};
      for (int l = 0; l < M; ++l) acc += x_dd(k * M + l) * root(-static_cast<long long>(l) * n);
      s(n) = scale * acc;
    }
  return s;
}

CVector ZakModem::demodulate(const CVector& r) const {
  check_size(r, mn_, "demodulate");
  const int M = grid_.M, N = grid_.N;
  const double scale = 1.0 / std::sqrt(static_cast<double>(M));
  const CVector u = dft(r);
  CVector y(mn_);
  for (int k = 0; k < N; ++k)
    for (int l = 0; l < M; ++l) {
      Complex acc{0.0, 0.0};
      for (int m = 0; m < M; ++m) {
        const int n = m * N + k;
        acc += u(n) * root(static_cast<long long>(l) * n);
      }
      y(k * M + l) = scale * acc;
    }
  return y;
}

CVector ZakModem::apply_time_channel(const CVector& s, const PathSet& paths) const {
  check_size(s, mn_, "apply_time_channel");
  CVector r = CVector::Zero(mn_);
  CVector v(mn_);
  for (const Path& p : paths) {
    const double tb = grid_.delay_bins(p.tau);
    const double nb = grid_.doppler_bins(p.nu);
    for (int n = 0; n < mn_; ++n) v(n) = s(n) * std::polar(1.0, -2.0 * kPi * n * tb / mn_);
    const CVector w = idft(v);
    for (int q = 0; q < mn_; ++q) r(q) += p.gain * std::polar(1.0, 2.0 * kPi * q * nb / mn_) * w(q);
  }
  return r;
}

CMatrix ZakModem::time_channel_matrix(const PathSet& paths) const {
  CMatrix T = CMatrix::Zero(mn_, mn_);
  CVector b(mn_), d(mn_);
  for (const Path& p : paths) {
    const double tb = grid_.delay_bins(p.tau);
    const double nb = grid_.doppler_bins(p.nu);
    for (int n = 0; n < mn_; ++n) {
      b(n) = std::polar(1.0, -2.0 * kPi * n * tb / mn_);
      d(n) = p.gain * std::polar(1.0, 2.0 * kPi * n * nb / mn_);
    }
    T.noalias() += (d * b.transpose()).cwiseProduct(FH_);
  }
  return T;
}

CMatrix ZakModem::time_channel_matrix(const CVector& h) const {
  if (h.size() != static_cast<Eigen::Index>(mn_) * mn_) throw std::invalid_argument("channel vector size mismatch");
  Eigen::Map<const CMatrix> Hmat(h.data(), mn_, mn_);
  return FH_.cwiseProduct(Hmat);
}

CMatrix ZakModem::modulation_matrix() const {
  const int M = grid_.M, N = grid_.N;
  const double scale = 1.0 / std::sqrt(static_cast<double>(M));
  CMatrix S = CMatrix::Zero(mn_, mn_);
  for (int k = 0; k < N; ++k)
    for (int l = 0; l < M; ++l)
      for (int m = 0; m < M; ++m) {
        const int n = m * N + k;
        S(n, k * M + l) = scale * root(-static_cast<long long>(l) * n);
      }
  return S;
}

CMatrix ZakModem::dd_channel(const CMatrix& T) const {
  const int M = grid_.M, N = grid_.N;
  const double scale = 1.0 / std::sqrt(static_cast<double>(M));
  // T·S_mod using the M-sparse columns of S_mod
  CMatrix TS(mn_, mn_);
  for (int k = 0; k < N; ++k)
    for (int l = 0; l < M; ++l) {
      auto col = TS.col(k * M + l);
      col.setZero();
      for (int m = 0; m < M; ++m) {
        const int n = m * N + k;
        col += (scale * root(-static_cast<long long>(l) * n)) * T.col(n);
      }
    }
  CMatrix H(mn_, mn_);
  for (int j = 0; j < mn_; ++j) H.col(j) = demodulate(TS.col(j));
  return H;
}

Complex dirichlet_kernel(int L, double x) {
  const double half = kPi * x / L;
  const double den = std::sin(half);
  if (std::abs(den) < 1e-9) {
    Complex acc{0.0, 0.0};
    for (int n = 0; n < L; ++n) acc += std::polar(1.0, 2.0 * half * n);
    return acc;
  }
  return std::polar(std::sin(L * half) / den, half * (L - 1));
}

EffectiveChannel ZakModem::effective_channel(const PathSet& paths) const {
  const int M = grid_.M, N = grid_.N;
  const double theta = 2.0 * kPi / mn_;
  CMatrix G = CMatrix::Zero(mn_, mn_);
  CVector c(mn_), b(mn_);
  for (const Path& path : paths) {
    const double tb = grid_.delay_bins(path.tau), nb = grid_.doppler_bins(path.nu);
    for (int d = 0; d < mn_; ++d) c(d) = dirichlet_kernel(mn_, d + nb) / static_cast<double>(mn_);
    for (int n = 0; n < mn_; ++n) b(n) = path.gain * std::polar(1.0, -theta * n * tb);
    for (int n = 0; n < mn_; ++n) {
      // column n holds c((n − p) mod MN) for p = 0..MN−1
      for (int p = 0; p <= n; ++p) G(p, n) += c(n - p) * b(n);
      for (int p = n + 1; p < mn_; ++p) G(p, n) += c(n - p + mn_) * b(n);
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(M));
  // W = G Z^H, then H = Z W computed as (W^T Z^T)^T so that both passes combine columns
  CMatrix W(mn_, mn_);
  for (int k = 0; k < N; ++k)
    for (int l = 0; l < M; ++l) {
      auto col = W.col(k * M + l);
      col.setZero();
      for (int m = 0; m < M; ++m) {
        const int n = m * N + k;
        col += (scale * root(-static_cast<long long>(l) * n)) * G.col(n);
      }
    }
  const CMatrix Wt = W.transpose();
  CMatrix Ht(mn_, mn_);
  for (int k = 0; k < N; ++k)
    for (int l = 0; l < M; ++l) {
      auto col = Ht.col(k * M + l);
      col.setZero();
      for (int m = 0; m < M; ++m) {
        const int p = m * N + k;
        col += (scale * root(static_cast<long long>(l) * p)) * Wt.col(p);
      }
    }
  CMatrix H = Ht.transpose();
  return {std::move(H), ChannelSource::exact_from_paths};
}

EffectiveChannel ZakModem::effective_channel_from_vector(const CVector& h) const {
  return {dd_channel(time_channel_matrix(h)), ChannelSource::reconstructed_from_atoms};
}

CVector ZakModem::channel_vector(const CMatrix& H_eff) const {
  if (H_eff.rows() != mn_ || H_eff.cols() != mn_) throw std::invalid_argument("H_eff size mismatch");
  const CMatrix Q = FH_ * modulation_matrix();
  const CMatrix T = Q * H_eff * Q.adjoint() * FH_;
  CVector h(static_cast<Eigen::Index>(mn_) * mn_);
  Eigen::Map<CMatrix> Hmat(h.data(), mn_, mn_);
  // F ⊙ F^H = 1/MN elementwise
  Hmat = static_cast<double>(mn_) * T.cwiseProduct(FH_.conjugate());
  return h;
}

CVector modulate(const GridConfig& grid, const CVector& x_dd) { return ZakModem(grid).modulate(x_dd); }
CVector demodulate(const GridConfig& grid, const CVector& r) { return ZakModem(grid).demodulate(r); }
CVector apply_time_channel(const GridConfig& grid, const CVector& s, const PathSet& paths) {
  return ZakModem(grid).apply_time_channel(s, paths);
}
EffectiveChannel effective_channel_from_paths(const GridConfig& grid, const PathSet& paths) {
  return ZakModem(grid).effective_channel(paths);
}

Complex freq_window_ambiguity(const GridConfig& grid, double tau, double nu) {
  const double B = grid.Fs();
  const double lo = std::max(0.0, nu);
  const double hi = std::min(B, B + nu);
  if (hi <= lo) return {0.0, 0.0};
  const double width = hi - lo;
  const double x = kPi * width * tau;
  const double sinc = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
  return std::polar(width * sinc, kPi * (lo + hi) * tau);
}

Complex sampled_freq_window_ambiguity(const GridConfig& grid, double tau, double nu) {
  const int MN = grid.MN();
  const double step = grid.delta_f / grid.N;
  // indices n with f_n ∈ window and f_n − ν ∈ window; ν on the subcarrier grid
  const long long b = std::llround(nu / step);
  const long long lo = std::max<long long>(0, b);
  const long long hi = std::min<long long>(MN, MN + b);
  return step * geometric_sum(2.0 * kPi * step * tau, lo, hi - lo);
}

Complex time_window_ambiguity(const GridConfig& grid, double arg) {
  const int MN = grid.MN();
  return geometric_sum(-2.0 * kPi * arg / MN, 0, MN);
}

double h_eff_scale(const GridConfig& grid) { return grid.Fs() * grid.MN(); }

Complex h_eff_response(const GridConfig& grid, const PathSet& paths, int l, int k, AmbiguityModel model) {
  const int MN = grid.MN();
  const double tau_l = grid.delay_seconds(l);
  const double nu_k = grid.doppler_hz(k);
  const Complex phase = cis2pi(static_cast<double>((static_cast<long long>(l) * k) % MN) / MN);
  Complex acc{0.0, 0.0};
  for (const Path& p : paths) {
    const Complex y = model == AmbiguityModel::sampled ? sampled_freq_window_ambiguity(grid, tau_l - p.tau, -nu_k)
                                                       : freq_window_ambiguity(grid, tau_l - p.tau, -nu_k);
    acc += p.gain * y * time_window_ambiguity(grid, k - grid.doppler_bins(p.nu));
  }
  return phase * acc;
}

KernelTable::KernelTable(const GridConfig& grid, int a0)
    : grid_(grid), a0_(a0), values_(static_cast<std::size_t>(grid.MN()) * (2 * grid.MN() - 1), Complex{0.0, 0.0}) {}

std::size_t KernelTable::slot(int a, int b) const {
  const int MN = grid_.MN();
  int ar = (a - a0_) % MN;
  if (ar < 0) ar += MN;
  if (b <= -MN || b >= MN) throw std::out_of_range("kernel Doppler offset outside (-MN, MN)");
  return static_cast<std::size_t>(b + MN - 1) * MN + ar;
}

Complex KernelTable::at(int a, int b) const {
  if (b <= -grid_.MN() || b >= grid_.MN()) return {0.0, 0.0};
  return values_[slot(a, b)];
}

void KernelTable::set(int a, int b, Complex v) { values_[slot(a, b)] = v; }

KernelTable KernelTable::from_function(const GridConfig& grid, const std::function<Complex(int, int)>& raw_response,
                                       int a0) {
  KernelTable t(grid, a0);
  const int MN = grid.MN();
  const double scale = 1.0 / h_eff_scale(grid);
  for (int b = -MN + 1; b < MN; ++b)
    for (int a = a0; a < a0 + MN; ++a) t.set(a, b, scale * raw_response(a, b));
  return t;
}

KernelTable KernelTable::from_paths(const GridConfig& grid, const PathSet& paths, AmbiguityModel model) {
  const int a0 = model == AmbiguityModel::sampled ? 0 : -grid.MN() / 2;
  return from_function(
      grid, [&](int a, int b) { return h_eff_response(grid, paths, a, b, model); }, a0);
}

void KernelTable::truncate(double rel) {
  double peak = 0.0;
  for (const Complex& v : values_) peak = std::max(peak, std::abs(v));
  const double floor = rel * peak;
  for (Complex& v : values_)
    if (std::abs(v) < floor) v = Complex{0.0, 0.0};
}

std::vector<KernelTable::Entry> KernelTable::nonzeros() const {
  std::vector<Entry> out;
  const int MN = grid_.MN();
  for (int b = -MN + 1; b < MN; ++b)
    for (int a = a0_; a < a0_ + MN; ++a) {
      const Complex v = values_[slot(a, b)];
      if (v != Complex{0.0, 0.0}) out.push_back({a, b, v});
    }
  return out;
}

namespace {
int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}
int pos_mod(int a, int b) {
  int r = a % b;
  return r < 0 ? r + b : r;
}
}  // namespace

EffectiveChannel reconstruct_heff_from_response(const GridConfig& grid, const KernelTable& kernel) {
  const int M = grid.M, N = grid.N, MN = grid.MN();
  ZakModem modem(grid);
  CMatrix H = CMatrix::Zero(MN, MN);
  const auto entries = kernel.nonzeros();
  for (int k = 0; k < N; ++k)
    for (int l = 0; l < M; ++l) {
      const int col = k * M + l;
      for (const auto& e : entries) {
        // a ≡ l' − l − mM (mod MN), b = k' − k − m̄N
        const int lp = pos_mod(l + e.a, M);
        const int m = pos_mod((lp - l - e.a) / M, N);
        const int kp = pos_mod(k + e.b, N);
        const Complex phase = modem.root(static_cast<long long>(e.b) * (l + m * M)) *
                              modem.root(static_cast<long long>(m) * k * M);
        H(kp * M + lp, col) += phase * e.v;
      }
    }
  return {H, ChannelSource::reconstructed_from_samples};
}

CVector twisted_convolution(const GridConfig& grid, const KernelTable& kernel, const CVector& x_dd) {
  const int M = grid.M, N = grid.N, MN = grid.MN();
  check_size(x_dd, MN, "twisted_convolution");
  ZakModem modem(grid);
  // quasi-periodic extension: X[l0 + nM, k0 + jN] = e^{j2πnk0/N} X[l0,k0]
  auto xq = [&](int l, int k) {
    const int n = floor_div(l, M);
    const int l0 = l - n * M;
    const int k0 = pos_mod(k, N);
    return modem.root(static_cast<long long>(n) * k0 * M) * x_dd(k0 * M + l0);
  };
  CVector y = CVector::Zero(MN);
  const auto entries = kernel.nonzeros();
  for (int kp = 0; kp < N; ++kp)
    for (int lp = 0; lp < M; ++lp) {
      Complex acc{0.0, 0.0};
      for (const auto& e : entries)
        acc += e.v * xq(lp - e.a, kp - e.b) * modem.root(static_cast<long long>(e.b) * (lp - e.a));
      y(kp * M + lp) = acc;
    }
  return y;
}

}  // namespace zakotfs
