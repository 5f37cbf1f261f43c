#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <random>

#include "test_util.hpp"
#include "zakotfs/modem.hpp"

using namespace zakotfs;
using zakotfs::testing::random_cvector;
using zakotfs::testing::random_paths;
using zakotfs::testing::rel_err;

namespace {

GridConfig small_grid() {
  GridConfig g;
  g.M = 4;
  g.N = 8;
  return g;
}

// r[k] = Σ_i Σ_n h_i s_n e^{j2π(n/(NT) + ν_i)(k/(MΔf) − τ_i)}, evaluated term by term
CVector sampled_sum_oracle(const GridConfig& grid, const CVector& s, const PathSet& paths) {
  const int MN = grid.MN();
  CVector r = CVector::Zero(MN);
  for (int k = 0; k < MN; ++k)
    for (const auto& p : paths)
      for (int n = 0; n < MN; ++n) {
        const double f = n / (grid.N * grid.T()) + p.nu;
        const double t = k / (grid.M * grid.delta_f) - p.tau;
        r(k) += p.gain * s(n) * cis2pi(f * t);
      }
  return r;
}

}  // namespace

TEST_CASE("modulation is an isometry and inverts through the identity channel") {
  const auto grid = default_grid();
  ZakModem modem(grid);
  std::mt19937_64 rng(11);
  CHECK(modem.modulate(CVector::Zero(128)).norm() == 0.0);
  CHECK(modem.demodulate(CVector::Zero(128)).norm() == 0.0);
  for (int t = 0; t < 10; ++t) {
    const CVector x = random_cvector(rng, grid.MN());
    const CVector s = modem.modulate(x);
    CHECK(s.norm() == doctest::Approx(x.norm()).epsilon(1e-12));
    const CVector y = modem.demodulate(modem.apply_time_channel(s, {{Complex(1, 0), 0.0, 0.0}}));
    CHECK((y - x).cwiseAbs().maxCoeff() < 1e-10);
    const CVector r = random_cvector(rng, grid.MN());
    CHECK(modem.demodulate(r).norm() == doctest::Approx(r.norm()).epsilon(1e-12));
  }
  CHECK_THROWS_AS(modem.modulate(CVector::Zero(127)), std::invalid_argument);
}

TEST_CASE("twiddle matrix has unit-modulus entries") {
  const auto tw = make_twiddle(default_grid());
  CHECK((tw.W.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-14);
  CHECK(std::abs(tw.W(3, 5) - cis2pi(15.0 / 128)) < 1e-14);
}

TEST_CASE("time-domain channel") {
  const auto grid = small_grid();
  ZakModem modem(grid);
  std::mt19937_64 rng(12);
  const CVector s = random_cvector(rng, grid.MN());
  CHECK(modem.apply_time_channel(s, {}).norm() == 0.0);
  // s holds the subcarrier-domain sequence; a unit path returns its inverse DFT
  const CVector w = modem.idft(s);
  CHECK((modem.apply_time_channel(s, {{Complex(1, 0), 0.0, 0.0}}) - w).norm() < 1e-12);

  const double nu = grid.doppler_hz(0.37);
  CVector expect(grid.MN());
  for (int q = 0; q < grid.MN(); ++q) expect(q) = Complex(0.5, -0.2) * cis2pi(q * nu / grid.Fs()) * w(q);
  CHECK((modem.apply_time_channel(s, {{Complex(0.5, -0.2), 0.0, nu}}) - expect).norm() < 1e-12);

  // Sampled-sum form differs from the vector form by 1/√MN and the constant phase e^{-j2πντ} per path.
  for (int t = 0; t < 5; ++t) {
    const PathSet paths = random_paths(rng, grid, 2);
    PathSet adjusted = paths;
    for (auto& p : adjusted) p.gain *= cis2pi(p.nu * p.tau) / std::sqrt(static_cast<double>(grid.MN()));
    const CVector oracle = sampled_sum_oracle(grid, s, adjusted);
    CHECK((modem.apply_time_channel(s, paths) - oracle).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("effective channel matches the basis-vector oracle") {
  const auto grid = small_grid();
  ZakModem modem(grid);
  std::mt19937_64 rng(13);
  const int MN = grid.MN();

  CHECK((modem.effective_channel({{Complex(1, 0), 0.0, 0.0}}).H - CMatrix::Identity(MN, MN)).norm() < 1e-12);

  const PathSet paths = random_paths(rng, grid, 2);
  const CMatrix H = effective_channel_from_paths(grid, paths).H;
  CMatrix oracle(MN, MN);
  for (int j = 0; j < MN; ++j) {
    const CVector e = CVector::Unit(MN, j);
    oracle.col(j) = modem.demodulate(modem.apply_time_channel(modem.modulate(e), paths));
  }
  CHECK(rel_err(H, oracle) < 1e-12);

  const CMatrix H0 = modem.effective_channel(PathSet{paths[0]}).H;
  const CMatrix H1 = modem.effective_channel(PathSet{paths[1]}).H;
  CHECK(rel_err(H0 + H1, H) < 1e-12);
}

TEST_CASE("structured effective channel agrees with the dense time-domain route") {
  const auto grid = default_grid();
  ZakModem modem(grid);
  std::mt19937_64 rng(15);
  for (int t = 0; t < 4; ++t) {
    PathSet paths = random_paths(rng, grid, 3);
    // on-grid Doppler exercises the coincident branch of the kernel
    if (t == 0) paths[0].nu = grid.doppler_hz(1.0);
    const CMatrix dense = modem.dd_channel(modem.time_channel_matrix(paths));
    CHECK(rel_err(modem.effective_channel(paths).H, dense) < 1e-12);
  }
}

TEST_CASE("dirichlet kernel") {
  for (double x : {0.0, 1e-12, 0.3, 1.0, -2.75, 64.0, 127.9999}) {
    Complex direct{0.0, 0.0};
    for (int n = 0; n < 128; ++n) direct += cis2pi(n * x / 128.0);
    CHECK(std::abs(dirichlet_kernel(128, x) - direct) < 1e-10);
  }
}

TEST_CASE("channel vector round trip") {
  const auto grid = small_grid();
  ZakModem modem(grid);
  std::mt19937_64 rng(14);
  const PathSet paths = random_paths(rng, grid, 2);
  const CMatrix H = modem.effective_channel(paths).H;
  const CVector h = modem.channel_vector(H);
  CHECK(rel_err(modem.effective_channel_from_vector(h).H, H) < 1e-12);
  CHECK(rel_err(modem.time_channel_matrix(h), modem.time_channel_matrix(paths)) < 1e-12);
}

TEST_CASE("window ambiguity kernels") {
  const auto grid = default_grid();
  const int MN = grid.MN();
  for (int m = -2; m <= 2; ++m) CHECK(std::abs(time_window_ambiguity(grid, m * MN) - Complex(MN, 0)) < 1e-9);

  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const double arg = 40 * u(rng);
    Complex direct{0.0, 0.0};
    for (int n = 0; n < MN; ++n) direct += cis2pi(-n * arg / MN);
    CHECK(std::abs(time_window_ambiguity(grid, arg) - direct) < 1e-10);
  }

  const double B = grid.Fs();
  for (int t = 0; t < 20; ++t) {
    const double tau = grid.T() * u(rng);
    const double nu = B * u(rng);
    auto re = [&](double f) { return std::cos(2 * kPi * f * tau); };
    auto im = [&](double f) { return std::sin(2 * kPi * f * tau); };
    const double lo = std::max(0.0, nu), hi = std::min(B, B + nu);
    using boost::math::quadrature::gauss_kronrod;
    const double qr = gauss_kronrod<double, 61>::integrate(re, lo, hi, 15, 1e-13);
    const double qi = gauss_kronrod<double, 61>::integrate(im, lo, hi, 15, 1e-13);
    CHECK(std::abs(freq_window_ambiguity(grid, tau, nu) - Complex(qr, qi)) / B < 1e-6);
  }
}

TEST_CASE("h_eff response at the origin") {
  const auto grid = default_grid();
  const PathSet unit{{Complex(1, 0), 0.0, 0.0}};
  const double expect = grid.Fs() * grid.MN();
  CHECK(std::abs(h_eff_response(grid, unit, 0, 0) - expect) / expect < 1e-12);
  CHECK(std::abs(h_eff_response(grid, unit, 0, 0, AmbiguityModel::continuous) - expect) / expect < 1e-12);
  // the normalized response is the diagonal of the identity effective channel
  CHECK(std::abs(h_eff_response(grid, unit, 0, 0) / h_eff_scale(grid) -
                 effective_channel_from_paths(grid, unit).H(0, 0)) < 1e-12);
}

TEST_CASE("reconstruction from response samples") {
  const auto grid = small_grid();
  const int MN = grid.MN();
  std::mt19937_64 rng(16);

  const PathSet unit{{Complex(1, 0), 0.0, 0.0}};
  CHECK((reconstruct_heff_from_response(grid, KernelTable::from_paths(grid, unit)).H - CMatrix::Identity(MN, MN))
            .norm() < 1e-10);
  CHECK(reconstruct_heff_from_response(grid, KernelTable(grid)).H.norm() == 0.0);

  for (int t = 0; t < 10; ++t) {
    const PathSet paths = random_paths(rng, grid, 1 + t % 2);
    const CMatrix H = effective_channel_from_paths(grid, paths).H;
    const CMatrix Hr = reconstruct_heff_from_response(grid, KernelTable::from_paths(grid, paths)).H;
    CHECK(rel_err(Hr, H) < 1e-8);
  }
}

TEST_CASE("twisted convolution") {
  const auto grid = small_grid();
  const int MN = grid.MN(), M = grid.M;
  ZakModem modem(grid);
  std::mt19937_64 rng(17);
  const CVector x = random_cvector(rng, MN);

  KernelTable delta(grid);
  delta.set(0, 0, 1.0);
  CHECK((twisted_convolution(grid, delta, x) - x).norm() < 1e-12);

  // single tap at (l0,k0): Y[l,k] = X̃[l−l0, k−k0] e^{j2πk0(l−l0)/MN}
  const int l0 = 1, k0 = 3;
  KernelTable tap(grid);
  tap.set(l0, k0, 1.0);
  const CVector y = twisted_convolution(grid, tap, x);
  for (int k = 0; k < grid.N; ++k)
    for (int l = 0; l < M; ++l) {
      int ls = l - l0, phase_n = 0;
      if (ls < 0) {
        ls += M;
        phase_n = -1;
      }
      const int ks = (k - k0 + grid.N) % grid.N;
      const Complex expect =
          x(ks * M + ls) * cis2pi(static_cast<double>(phase_n) * ks / grid.N) * cis2pi(double(k0) * (l - l0) / MN);
      CHECK(std::abs(y(k * M + l) - expect) < 1e-12);
    }

  for (int t = 0; t < 5; ++t) {
    const PathSet paths = random_paths(rng, grid, 1 + t % 2);
    KernelTable kernel = KernelTable::from_paths(grid, paths);
    kernel.truncate(kDefaultSupportThreshold);
    const CVector ym = modem.effective_channel(paths).H * x;
    CHECK((twisted_convolution(grid, kernel, x) - ym).norm() / ym.norm() < 1e-6);
  }
}
