#include "zakotfs/isac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace zakotfs {

CVector forward_S(const ZakModem& modem, const CVector& s, const CVector& h) {
  const int MN = modem.MN();
  if (s.size() != MN || h.size() != static_cast<Eigen::Index>(MN) * MN)
    throw std::invalid_argument("forward_S: size mismatch");
  Eigen::Map<const CMatrix> Hm(h.data(), MN, MN);
  return modem.idft_matrix().cwiseProduct(Hm) * s;
}

CVector adjoint_S(const ZakModem& modem, const CVector& s, const CVector& u) {
  const int MN = modem.MN();
  if (s.size() != MN || u.size() != MN) throw std::invalid_argument("adjoint_S: size mismatch");
  CVector h(static_cast<Eigen::Index>(MN) * MN);
  Eigen::Map<CMatrix> Hm(h.data(), MN, MN);
  Hm.noalias() = modem.idft_matrix().conjugate().cwiseProduct(u * s.adjoint());
  return h;
}

void MomentumTracker::observe(double alpha, double beta) {
  if (alpha > 0.0) {
    a_min_ = seen_a_ ? std::min(a_min_, alpha) : alpha;
    a_max_ = seen_a_ ? std::max(a_max_, alpha) : alpha;
    seen_a_ = true;
  }
  if (beta > 0.0) {
    b_min_ = seen_b_ ? std::min(b_min_, beta) : beta;
    b_max_ = seen_b_ ? std::max(b_max_, beta) : beta;
    seen_b_ = true;
  }
}

MomentumBounds MomentumTracker::bounds() const {
  MomentumBounds b;
  b.theta = theta_;
  b.mu_bar = seen_a_ ? std::sqrt(a_min_ / a_max_ * (1.0 - theta_)) : 0.0;
  b.iota_bar = seen_b_ ? std::sqrt(b_min_ / b_max_ * (1.0 - theta_)) : 0.0;
  return b;
}

double solver_eta(double sigma2, double s_norm2, int MN, double scale) {
  return regularizer_eta(std::sqrt(std::max(sigma2, 0.0)), s_norm2, MN, scale) / std::sqrt(static_cast<double>(MN));
}

namespace {

void append_bins(std::vector<BinAtom>& out, const GridConfig& g, const AtomicRepresentation& U, double scale) {
  for (const auto& t : U.tuples) out.push_back({scale * t.c, g.delay_bins(t.tau), g.doppler_bins(t.nu)});
}

}  // namespace

ChannelUpdate channel_update(const IsacProblem& prob, const IsacState& state, const CVector& s, double alpha,
                             double mu, const IsacOptions& opts) {
  const bool extrapolate = mu > 0.0;
  const CVector h_tilde = extrapolate ? CVector(state.h + mu * (state.h - state.h_prev)) : state.h;
  const CVector v = -(forward_S(prob.modem, s, h_tilde) - prob.r) / alpha;
  SolverBudget budget = opts.anm;
  budget.epsilon = state.eps;
  DescentResult d;
  if (state.h_atomic && (!extrapolate || state.h_prev_atomic)) {
    const GridConfig& g = prob.modem.grid();
    std::vector<BinAtom> atoms;
    append_bins(atoms, g, state.U, extrapolate ? 1.0 + mu : 1.0);
    if (extrapolate) append_bins(atoms, g, state.U_prev, -mu);
    d = coordinate_descent(GradientStepTarget(prob.dict, std::move(atoms), v, s), alpha, prob.eta, budget,
                           opts.anm_warm_start ? state.U.tuples : std::vector<AtomTuple>{});
  } else {
    d = coordinate_descent(prob.dict, CVector(h_tilde + adjoint_S(prob.modem, s, v)), alpha, prob.eta, budget);
  }
  return {std::move(d.rep), d.report, mu};
}

EffectiveChannel reconstruct_heff_from_atoms(const ZakModem& modem, const AtomicRepresentation& U) {
  EffectiveChannel e = modem.effective_channel(U.to_paths());
  e.source = ChannelSource::reconstructed_from_atoms;
  return e;
}

double lambda_max_power(const CMatrix& A, CVector& v, double tol, int max_iter) {
  const Eigen::Index n = A.cols();
  if (v.size() != n || v.norm() == 0.0) v = CVector::Constant(n, Complex(1.0, 0.0));
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const CVector w = A.adjoint() * (A * v);
    const double next = std::real(v.dot(w));
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    if (it > 0 && std::abs(next - lambda) <= tol * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  // Rayleigh quotients approach λ_max from below
  return lambda * (1.0 + 10.0 * tol);
}

namespace {

CMatrix data_columns(const FrameLayout& layout, const CMatrix& H_eff) {
  CMatrix Ht(H_eff.rows(), layout.data_count());
  for (int i = 0; i < layout.data_count(); ++i) Ht.col(i) = H_eff.col(layout.data_indices[i]);
  return Ht;
}

CVector data_observation(const FrameLayout& layout, const CVector& y_dd, const CMatrix& H_eff) {
  return y_dd - layout.pilot_amplitude * H_eff.col(layout.pilot_index());
}

}  // namespace

double data_fit_penalty(const FrameLayout& layout, const CVector& y_dd, const CMatrix& H_eff, const CVector& x,
                        double rho) {
  const CVector e = data_observation(layout, y_dd, H_eff) - data_columns(layout, H_eff) * x;
  return 0.5 * e.squaredNorm() - rho * x.squaredNorm();
}

SymbolUpdate symbol_update(const FrameLayout& layout, const Constellation& constellation, const CVector& y_dd,
                           const CMatrix& H_eff, const CVector& x, const CVector& x_prev, double rho, double iota,
                           CVector& power_vec, double power_tol) {
  const CMatrix Ht = data_columns(layout, H_eff);
  const CVector yd = data_observation(layout, y_dd, H_eff);
  SymbolUpdate out;
  out.beta = lambda_max_power(Ht, power_vec, power_tol);
  out.iota = iota;
  if (!(out.beta > 0.0)) {
    out.x = x;
    return out;
  }
  const CVector x_tilde = iota > 0.0 ? CVector(x + iota * (x - x_prev)) : x;
  const CVector grad = Ht.adjoint() * (Ht * x_tilde - yd) - 2.0 * rho * x;
  out.x = project_hull(constellation, CVector(x_tilde - grad / out.beta));
  return out;
}

double rho_schedule(double rho, double x_step2, int t, double delta, int n, double c, double rho_upb) {
  if (x_step2 <= delta || (n > 0 && t % n == 0)) return std::min(c * rho, rho_upb);
  return rho;
}

IsacResult run(const ZakModem& modem, const FrameLayout& layout, const Constellation& constellation,
               const CVector& r, const CVector& y_dd, double sigma2, const IsacOptions& opts) {
  return run(modem, layout, constellation, r, y_dd, sigma2, init_state(modem, layout, constellation, y_dd, sigma2),
             opts);
}

IsacResult run(const ZakModem& modem, const FrameLayout& layout, const Constellation& constellation,
               const CVector& r, const CVector& y_dd, double sigma2, const InitialState& init,
               const IsacOptions& opts) {
  const GridConfig& grid = modem.grid();
  const int MN = grid.MN();
  const AtomDictionary dict(grid);
  // frame energy is normalized to MN; η is fixed from that nominal energy
  const double eta = solver_eta(sigma2, static_cast<double>(MN), MN, opts.eta_scale);
  const IsacProblem prob{modem, dict, layout, constellation, r, y_dd, eta};
  const double delta = opts.delta_rel * MN;
  const double eps0 = opts.eps0_rel * eta;
  const double eps_min = std::max(opts.eps_min_rel * eta, std::numeric_limits<double>::min());

  IsacState st;
  st.x = init.x0_data;
  st.x_prev = st.x;
  st.h = init.h0;
  st.h_prev = st.h;
  st.power_vec = CVector();
  CVector s = init.s0;
  MomentumTracker momentum(opts.theta);

  IsacResult res;
  res.eta = eta;
  CMatrix H_eff = init.H_hat.H;

  for (int t = 0; t < opts.t_max; ++t) {
    st.t = t;
    st.eps = std::max(eps0 * std::ldexp(1.0, -t), eps_min);
    const double s2 = s.squaredNorm();
    const double alpha = opts.unscaled_alpha ? s2 : s2 / MN;
    momentum.observe(alpha, 0.0);
    MomentumBounds mb = momentum.bounds();

    const double xi = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * st.xi * st.xi));
    const double mu = opts.accelerated ? std::clamp((st.xi - 1.0) / xi, 0.0, mb.mu_bar) : 0.0;
    st.xi = xi;

    ChannelUpdate cu = channel_update(prob, st, s, alpha, mu, opts);
    if (cu.report.hit_kmax) ++res.anm_kmax_flags;
    res.anm_violations += cu.report.monotonicity_violations;
    const double h_step = (cu.U.h - st.h).norm();
    st.h_prev = std::move(st.h);
    st.h = cu.U.h;
    st.U_prev = std::move(st.U);
    st.U = std::move(cu.U);
    st.h_prev_atomic = st.h_atomic;
    st.h_atomic = true;

    H_eff = reconstruct_heff_from_atoms(modem, st.U).H;

    const double zeta = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * st.zeta * st.zeta));
    const double iota_raw = (st.zeta - 1.0) / zeta;
    st.zeta = zeta;
    // β is needed before ι can be clamped, so the bound uses the previous extremes on the first pass
    const Eigen::Index nd = layout.data_count();
    CMatrix Ht(MN, nd);
    for (Eigen::Index i = 0; i < nd; ++i) Ht.col(i) = H_eff.col(layout.data_indices[i]);
    CVector pv = st.power_vec;
    const double beta = lambda_max_power(Ht, pv, opts.power_tol);
    momentum.observe(0.0, beta);
    mb = momentum.bounds();
    const double iota = opts.accelerated ? std::clamp(iota_raw, 0.0, mb.iota_bar) : 0.0;
    if (!st.rho_initialized && beta > 0.0) {
      st.rho = opts.rho0_rel * beta;
      st.rho_upb = opts.rho_upb_rel * beta;
      st.rho_initialized = true;
    }
    const double rho_used = st.rho;
    SymbolUpdate su = symbol_update(layout, constellation, y_dd, H_eff, st.x, st.x_prev, rho_used, iota,
                                    st.power_vec, opts.power_tol);
    const double x_step2 = (su.x - st.x).squaredNorm();
    st.x_prev = std::move(st.x);
    st.x = std::move(su.x);
    if (st.rho_initialized) st.rho = rho_schedule(st.rho, x_step2, t, delta, opts.rho_period, opts.rho_growth, st.rho_upb);

    s = modem.modulate(assemble_frame(layout, st.x));

    TraceRow row;
    row.t = t;
    const double fit = 0.5 * (prob.r - forward_S(modem, s, st.h)).squaredNorm();
    row.objective = fit + eta * st.U.atomic_norm_upper();
    row.penalty_objective = row.objective - rho_used * st.x.squaredNorm();
    row.h_step = h_step;
    row.x_step = std::sqrt(x_step2);
    row.rho = rho_used;
    row.tuples = static_cast<int>(st.U.tuples.size());
    row.mu = mu;
    row.mu_bar = mb.mu_bar;
    row.iota = iota;
    row.iota_bar = mb.iota_bar;
    row.eps = st.eps;
    row.alpha = alpha;
    row.beta = su.beta;
    row.anm_iterations = cu.report.iterations;
    row.anm_violations = cu.report.monotonicity_violations;
    row.anm_certified = cu.report.certified;
    st.trace.push_back(row);

    res.iterations = t + 1;
    if (opts.stop_on_small_step && t > 0 && h_step <= delta) {
      res.converged = true;
      break;
    }
  }

  // floor κ·η/(MN)² stated for the unscaled regularizer
  res.amplitude_floor = opts.amplitude_kappa * eta * std::sqrt(static_cast<double>(MN)) / dict.atom_norm2();
  for (const auto& tu : st.U.tuples)
    if (std::abs(tu.c) >= res.amplitude_floor) res.paths.push_back({tu.c, tu.tau, tu.nu});
  res.atoms = std::move(st.U);
  res.x_soft = st.x;
  res.x_data = hard_decision(constellation, st.x);
  res.H_eff = std::move(H_eff);
  res.trace = std::move(st.trace);
  return res;
}

}  // namespace zakotfs

namespace zakotfs {

DescentCheck check_descent(const std::vector<TraceRow>& trace, double theta, double rel_tol) {
  DescentCheck out;
  if (trace.empty()) return out;
  double alpha_min = trace.front().alpha;
  for (const auto& row : trace) alpha_min = std::min(alpha_min, row.alpha);
  out.slack_factor = 1.0 + 1.0 / (alpha_min * theta);
  for (std::size_t t = 1; t < trace.size(); ++t) {
    const double excess = trace[t].penalty_objective - trace[t - 1].penalty_objective -
                          out.slack_factor * trace[t].eps;
    const double tol = rel_tol * std::max(1.0, std::abs(trace[t - 1].penalty_objective));
    if (excess > tol) {
      ++out.violations;
      out.worst_excess = std::max(out.worst_excess, excess);
    }
  }
  return out;
}

}  // namespace zakotfs
