#include <doctest.h>

#include <algorithm>
#include <random>

#include "test_util.hpp"
#include "zakotfs/channel.hpp"
#include "zakotfs/isac.hpp"

using namespace zakotfs;
using zakotfs::testing::random_cvector;
using zakotfs::testing::random_paths;

namespace {

GridConfig small_grid() {
  GridConfig g;
  g.M = 4;
  g.N = 8;
  return g;
}

struct Synthetic {
  PathSet paths;
  CVector x_data, s, h_star, r, y;
};

Synthetic synthesize(const ZakModem& modem, const FrameLayout& layout, const Constellation& c, int P,
                     double sigma2, std::uint64_t seed) {
  const GridConfig& g = modem.grid();
  const AtomDictionary dict(g);
  RngStream rng(seed, {0});
  ScenarioSpec spec;
  spec.paths = P;
  Synthetic out;
  out.paths = draw_paths(g, spec, rng);
  std::vector<std::uint8_t> bits(layout.data_count() * c.bits_per_symbol);
  for (auto& b : bits) b = rng.bit();
  out.x_data = bits_to_symbols(c, bits);
  out.s = modem.modulate(assemble_frame(layout, out.x_data));
  out.h_star = CVector::Zero(static_cast<Eigen::Index>(g.MN()) * g.MN());
  for (const auto& p : out.paths) dict.accumulate_bins(out.h_star, p.gain, g.delay_bins(p.tau), g.doppler_bins(p.nu));
  out.r = sigma2 > 0 ? add_noise(modem.apply_time_channel(out.s, out.paths), sigma2, rng)
                     : modem.apply_time_channel(out.s, out.paths);
  out.y = modem.demodulate(out.r);
  return out;
}

AtomicRepresentation from_paths(const GridConfig& g, const PathSet& paths) {
  const AtomDictionary dict(g);
  AtomicRepresentation U;
  U.h = CVector::Zero(static_cast<Eigen::Index>(g.MN()) * g.MN());
  for (const auto& p : paths) {
    U.tuples.push_back({p.gain, p.tau, p.nu});
    dict.accumulate_bins(U.h, p.gain, g.delay_bins(p.tau), g.doppler_bins(p.nu));
  }
  return U;
}

}  // namespace

TEST_CASE("forward and adjoint operators") {
  const auto g = small_grid();
  const ZakModem modem(g);
  const int MN = g.MN();
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    const CVector s = random_cvector(rng, MN);
    const CVector h = random_cvector(rng, MN * MN);
    const CVector u = random_cvector(rng, MN);
    const Complex lhs = u.dot(forward_S(modem, s, h));
    const Complex rhs = adjoint_S(modem, s, u).dot(h);
    CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-10);
  }
  const CVector s = random_cvector(rng, MN);
  CHECK(forward_S(modem, s, CVector::Zero(MN * MN)).norm() == 0.0);
  CHECK_THROWS(forward_S(modem, s, CVector::Zero(MN)));
  CHECK_THROWS(adjoint_S(modem, CVector::Zero(MN - 1), CVector::Zero(MN)));

  // a unit atom is a unit-gain path through the time-domain channel
  const AtomDictionary dict(g);
  for (const auto& p : random_paths(rng, g, 4, 3.0, 4.0)) {
    const CVector a = dict.atom_bins(g.delay_bins(p.tau), g.doppler_bins(p.nu));
    const CVector want = modem.apply_time_channel(s, {{Complex(1.0, 0.0), p.tau, p.nu}});
    CHECK((forward_S(modem, s, a) - want).norm() / want.norm() < 1e-10);
  }
}

TEST_CASE("frame difference maps to an equal-norm operator difference") {
  const auto g = small_grid();
  const ZakModem modem(g);
  const FrameLayout layout = build_layout(g, Rect{1, 3, 3, 5}, Rect{0, 3, 2, 6});
  const Constellation c = make_constellation(Modulation::QPSK);
  const int MN = g.MN();
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 20; ++trial) {
    const CVector x1 = project_hull(c, random_cvector(rng, layout.data_count()));
    const CVector x2 = project_hull(c, random_cvector(rng, layout.data_count()));
    const CVector ds = modem.modulate(assemble_frame(layout, x1)) - modem.modulate(assemble_frame(layout, x2));
    // S(s) is linear in s; its Frobenius norm is ‖s‖ since every column of F^H has unit norm
    CMatrix S(MN, MN * MN);
    for (int col = 0; col < MN * MN; ++col) {
      CVector e = CVector::Zero(MN * MN);
      e(col) = 1.0;
      S.col(col) = forward_S(modem, ds, e);
    }
    CHECK(S.norm() == doctest::Approx((x1 - x2).norm()).epsilon(1e-10));
  }
}

TEST_CASE("zero momentum history leaves the extrapolation at h") {
  const auto g = default_grid();
  const ZakModem modem(g);
  const FrameLayout layout = default_layout(g);
  const Constellation c = make_constellation(Modulation::QPSK);
  const AtomDictionary dict(g);
  const Synthetic syn = synthesize(modem, layout, c, 2, 0.0, 3);
  const IsacProblem prob{modem, dict, layout, c, syn.r, syn.y, 1.0};
  const double alpha = syn.s.squaredNorm() / g.MN();
  IsacOptions opts;

  IsacState st;
  st.U = from_paths(g, syn.paths);
  st.h = st.U.h;
  st.h_prev = st.h;
  st.U_prev = st.U;
  st.eps = 1e-6;
  const ChannelUpdate no_mom = channel_update(prob, st, syn.s, alpha, 0.0, opts);
  const ChannelUpdate with_mom = channel_update(prob, st, syn.s, alpha, 0.5, opts);
  CHECK((no_mom.U.h - with_mom.U.h).norm() <= 1e-10 * no_mom.U.h.norm());

  // noiseless gradient step at the truth is the truth; the prox keeps the locations
  REQUIRE(no_mom.U.tuples.size() == syn.paths.size());
  for (const auto& p : syn.paths) {
    double best = 1e9;
    for (const auto& t : no_mom.U.tuples)
      best = std::min(best, std::abs(g.delay_bins(t.tau - p.tau)) + std::abs(g.doppler_bins(t.nu - p.nu)));
    CHECK(best < 1e-3);
  }
}

TEST_CASE("structured and dense channel updates agree") {
  const auto g = default_grid();
  const ZakModem modem(g);
  const FrameLayout layout = default_layout(g);
  const Constellation c = make_constellation(Modulation::QPSK);
  const AtomDictionary dict(g);
  const Synthetic syn = synthesize(modem, layout, c, 2, snr_to_sigma2(10.0), 4);
  const InitialState init = init_state(modem, layout, c, syn.y, snr_to_sigma2(10.0));
  const IsacProblem prob{modem, dict, layout, c, syn.r, syn.y, 2.0};
  const double alpha = init.s0.squaredNorm() / g.MN();
  IsacOptions opts;
  opts.anm_warm_start = false;  // the dense route has no atoms to start from

  IsacState st;
  st.h_prev = init.h0;
  st.eps = 1e-4;
  st.h = init.h0;
  const ChannelUpdate first = channel_update(prob, st, init.s0, alpha, 0.0, opts);

  st.U_prev = AtomicRepresentation{{}, init.h0};
  st.U = first.U;
  st.h = first.U.h;
  st.h_prev = init.h0;
  st.h_atomic = false;
  const ChannelUpdate dense = channel_update(prob, st, init.s0, alpha, 0.0, opts);
  st.h_atomic = true;
  const ChannelUpdate structured = channel_update(prob, st, init.s0, alpha, 0.0, opts);
  REQUIRE(dense.U.tuples.size() == structured.U.tuples.size());
  CHECK((dense.U.h - structured.U.h).norm() <= 1e-8 * dense.U.h.norm());
}

TEST_CASE("effective channel from atoms") {
  const auto g = default_grid();
  const ZakModem modem(g);
  std::mt19937_64 rng(63);
  const PathSet paths = random_paths(rng, g, 3);
  const AtomicRepresentation U = from_paths(g, paths);

  const EffectiveChannel H = reconstruct_heff_from_atoms(modem, U);
  CHECK(H.source == ChannelSource::reconstructed_from_atoms);
  const CMatrix exact = modem.effective_channel(paths).H;
  CHECK((H.H - exact).norm() / exact.norm() < 1e-10);

  CHECK(reconstruct_heff_from_atoms(modem, AtomicRepresentation{}).H.norm() == 0.0);

  AtomicRepresentation U2 = U;
  const Complex a(0.7, -1.3);
  for (auto& t : U2.tuples) t.c *= a;
  const CMatrix H2 = reconstruct_heff_from_atoms(modem, U2).H;
  CHECK((H2 - a * H.H).norm() / H2.norm() < 1e-12);
}

TEST_CASE("symbol update") {
  const auto g = default_grid();
  const int MN = g.MN();
  const FrameLayout layout = default_layout(g);
  const Constellation c = make_constellation(Modulation::QPSK);
  std::mt19937_64 rng(64);
  CVector power_vec;

  SUBCASE("fixed point at the truth") {
    std::vector<std::uint8_t> bits(layout.data_count() * 2);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1);
    const CVector x_star = bits_to_symbols(c, bits);
    const CMatrix I = CMatrix::Identity(MN, MN);
    const CVector y = assemble_frame(layout, x_star);
    const SymbolUpdate up = symbol_update(layout, c, y, I, x_star, x_star, 0.0, 0.0, power_vec, 1e-6);
    CHECK((up.x - x_star).norm() < 1e-12);
    CHECK(up.beta == doctest::Approx(1.0).epsilon(1e-4));
  }

  const ZakModem modem(g);
  const CMatrix H = modem.effective_channel(random_paths(rng, g, 2)).H;
  const CVector y = random_cvector(rng, MN);

  SUBCASE("majorant touches from above") {
    const double rho = 0.3;
    const CVector xt = project_hull(c, random_cvector(rng, layout.data_count()));
    const double phi_t = data_fit_penalty(layout, y, H, xt, rho);
    for (int i = 0; i < 100; ++i) {
      const CVector x = project_hull(c, random_cvector(rng, layout.data_count()));
      const double fit = data_fit_penalty(layout, y, H, x, 0.0);
      const double psi = fit - rho * xt.squaredNorm() - 2.0 * rho * (xt.dot(x - xt)).real();
      const double phi = data_fit_penalty(layout, y, H, x, rho);
      CHECK(psi - phi == doctest::Approx(rho * (x - xt).squaredNorm()).epsilon(1e-9));
      CHECK(psi >= phi - 1e-9 * std::abs(phi));
    }
    const double psi_t = data_fit_penalty(layout, y, H, xt, 0.0) - rho * xt.squaredNorm();
    CHECK(psi_t == doctest::Approx(phi_t).epsilon(1e-12));
  }

  SUBCASE("descent without momentum, iterates stay in the hull") {
    CVector x = project_hull(c, random_cvector(rng, layout.data_count()));
    for (int t = 0; t < 50; ++t) {
      const double rho = 0.05 * t;
      const SymbolUpdate up = symbol_update(layout, c, y, H, x, x, rho, 0.0, power_vec, 1e-6);
      CHECK(data_fit_penalty(layout, y, H, up.x, rho) <= data_fit_penalty(layout, y, H, x, rho) + 1e-9);
      CHECK((project_hull(c, up.x) - up.x).norm() == 0.0);
      x = up.x;
    }
  }
}

TEST_CASE("penalty homotopy") {
  CHECK(rho_schedule(4.0, 1.0, 3, 0.5, 10, 2.0, 4.0) == 4.0);
  CHECK(rho_schedule(1.0, 0.1, 3, 0.5, 10, 2.0, 100.0) == 2.0);
  CHECK(rho_schedule(1.0, 1.0, 20, 0.5, 10, 2.0, 100.0) == 2.0);
  CHECK(rho_schedule(1.0, 1.0, 3, 0.5, 10, 2.0, 100.0) == 1.0);
  CHECK(rho_schedule(3.0, 0.0, 3, 0.5, 10, 2.0, 5.0) == 5.0);
}

TEST_CASE("power iteration matches the largest eigenvalue") {
  std::mt19937_64 rng(65);
  for (int trial = 0; trial < 5; ++trial) {
    CMatrix A(40, 30);
    for (int j = 0; j < A.cols(); ++j) A.col(j) = random_cvector(rng, A.rows());
    const Eigen::SelfAdjointEigenSolver<CMatrix> es(A.adjoint() * A);
    const double want = es.eigenvalues().maxCoeff();
    CVector v;
    const double got = lambda_max_power(A, v, 1e-10, 5000);
    CHECK(got >= want * (1 - 1e-6));
    CHECK(got <= want * (1 + 1e-6));
  }
}

TEST_CASE("momentum bounds") {
  MomentumTracker tr(0.1);
  CHECK(tr.bounds().mu_bar == 0.0);
  CHECK(tr.bounds().iota_bar == 0.0);
  tr.observe(2.0, 0.0);
  CHECK(tr.bounds().mu_bar == doctest::Approx(std::sqrt(0.9)));
  CHECK(tr.bounds().iota_bar == 0.0);
  tr.observe(4.0, 3.0);
  tr.observe(3.0, 6.0);
  const MomentumBounds b = tr.bounds();
  CHECK(b.mu_bar == doctest::Approx(std::sqrt(0.5 * 0.9)));
  CHECK(b.iota_bar == doctest::Approx(std::sqrt(0.5 * 0.9)));
  CHECK(tr.alpha_min() == 2.0);
  CHECK(tr.beta_min() == 3.0);
}

TEST_CASE("descent monitor arithmetic") {
  std::vector<TraceRow> rows(3);
  for (auto& r : rows) r.alpha = 2.0;
  rows[0].penalty_objective = 10.0;
  rows[1].penalty_objective = 9.0;
  rows[2].penalty_objective = 9.5;
  rows[2].eps = 0.1;
  DescentCheck chk = check_descent(rows, 0.1);
  CHECK(chk.slack_factor == doctest::Approx(6.0));
  CHECK(chk.violations == 0);
  rows[2].eps = 0.05;
  chk = check_descent(rows, 0.1);
  CHECK(chk.violations == 1);
  CHECK(chk.worst_excess == doctest::Approx(0.2));
}

TEST_CASE("noiseless single target end to end") {
  const auto g = default_grid();
  const ZakModem modem(g);
  const FrameLayout layout = default_layout(g);
  const Constellation c = make_constellation(Modulation::BPSK);
  for (std::uint64_t seed : {11u, 12u}) {
    const Synthetic syn = synthesize(modem, layout, c, 1, 0.0, seed);
    const IsacResult res = run(modem, layout, c, syn.r, syn.y, 1e-6);
    REQUIRE(res.paths.size() == 1);
    CHECK(std::abs(g.delay_bins(res.paths[0].tau - syn.paths[0].tau)) <= 1e-2);
    CHECK(std::abs(g.doppler_bins(res.paths[0].nu - syn.paths[0].nu)) <= 1e-2);
    CHECK((res.x_data - syn.x_data).norm() == 0.0);
    for (const auto& row : res.trace) {
      CHECK(row.mu <= row.mu_bar);
      CHECK(row.iota <= row.iota_bar);
    }
  }
}

TEST_CASE("ordinary mode satisfies the descent monitor") {
  const auto g = default_grid();
  const ZakModem modem(g);
  const FrameLayout layout = default_layout(g);
  const Constellation c = make_constellation(Modulation::QPSK);
  const double sigma2 = snr_to_sigma2(10.0);
  const Synthetic syn = synthesize(modem, layout, c, 2, sigma2, 21);
  IsacOptions opts;
  opts.accelerated = false;
  opts.t_max = 40;
  const IsacResult res = run(modem, layout, c, syn.r, syn.y, sigma2, opts);
  for (std::size_t t = 1; t < res.trace.size(); ++t) {
    CHECK(res.trace[t].eps <= res.trace[t - 1].eps);
    CHECK(res.trace[t].rho >= res.trace[t - 1].rho);
  }
  CHECK(check_descent(res.trace, opts.theta).violations == 0);
}

TEST_CASE("pure noise yields no atoms") {
  const auto g = default_grid();
  const ZakModem modem(g);
  const FrameLayout layout = default_layout(g);
  const Constellation c = make_constellation(Modulation::QPSK);
  const double sigma2 = snr_to_sigma2(10.0);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    RngStream rng(31, {seed});
    const CVector r = add_noise(CVector::Zero(g.MN()), sigma2, rng);
    const CVector y = modem.demodulate(r);
    InitialState init = init_state(modem, layout, c, y, sigma2);

    // the pilot read-off of pure noise is not zero; its atoms die out
    const IsacResult from_estimate = run(modem, layout, c, r, y, sigma2, init);
    CHECK(from_estimate.atoms.tuples.empty());
    CHECK(from_estimate.paths.empty());

    // from h = 0 every gradient step stays below η, so the symbols never move
    init.h0.setZero();
    const IsacResult from_zero = run(modem, layout, c, r, y, sigma2, init);
    CHECK(from_zero.atoms.tuples.empty());
    for (const auto& row : from_zero.trace) CHECK(row.tuples == 0);
    CHECK((from_zero.x_soft - project_hull(c, extract_data(layout, init.x_lmmse))).norm() == 0.0);
  }
}

// Channel-only recovery with the symbols pinned to the truth, started from the model-free initial channel.
TEST_CASE("channel recovery with known symbols within thirty iterations") {
  const auto g = default_grid();
  const ZakModem modem(g);
  const FrameLayout layout = default_layout(g);
  const Constellation c = make_constellation(Modulation::QPSK);
  const AtomDictionary dict(g);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Synthetic syn = synthesize(modem, layout, c, 2, 0.0, 40 + seed);
    const IsacProblem prob{modem, dict, layout, c, syn.r, syn.y, 1.0};
    IsacOptions opts;
    const double alpha = syn.s.squaredNorm() / g.MN();
    MomentumTracker tracker(opts.theta);
    tracker.observe(alpha, 0.0);

    IsacState st;
    st.h = init_state(modem, layout, c, syn.y, kSigma2Floor).h0;
    st.h_prev = st.h;
    for (int t = 0; t < 30; ++t) {
      st.eps = std::max(opts.eps0_rel * prob.eta * std::ldexp(1.0, -t), opts.eps_min_rel * prob.eta);
      const double xi = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * st.xi * st.xi));
      const double mu = std::clamp((st.xi - 1.0) / xi, 0.0, tracker.bounds().mu_bar);
      st.xi = xi;
      const ChannelUpdate up = channel_update(prob, st, syn.s, alpha, mu, opts);
      st.h_prev = st.h;
      st.U_prev = st.U;
      st.h_prev_atomic = st.h_atomic;
      st.U = up.U;
      st.h = up.U.h;
      st.h_atomic = true;
    }
    const double err = (st.h - syn.h_star).norm() / syn.h_star.norm();
    INFO("seed " << seed << " relative error " << err);
    CHECK(err <= 1e-2);
  }
}
