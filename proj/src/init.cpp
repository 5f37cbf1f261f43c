#include "zakotfs/init.hpp"

#include <Eigen/Cholesky>

namespace zakotfs {

KernelTable PilotEstimate::to_kernel(const GridConfig& grid) const {
  KernelTable t(grid);
  for (int k = k_lo; k <= k_hi; ++k)
    for (int l = l_lo; l <= l_hi; ++l) t.set(l, k, at(l, k));
  return t;
}

PilotEstimate model_free_estimate(const GridConfig& grid, const FrameLayout& layout, const CVector& y_dd) {
  if (y_dd.size() != grid.MN()) throw std::invalid_argument("y_dd size mismatch");
  const int lp = layout.pilot_l, kp = layout.pilot_k, MN = grid.MN();
  PilotEstimate est;
  est.l_lo = layout.pilot_region.l_lo - lp;
  est.l_hi = layout.pilot_region.l_hi - lp;
  est.k_lo = layout.pilot_region.k_lo - kp;
  est.k_hi = layout.pilot_region.k_hi - kp;
  est.h_hat.resize(est.l_hi - est.l_lo + 1, est.k_hi - est.k_lo + 1);
  const double xp = layout.pilot_amplitude;
  for (int k = est.k_lo; k <= est.k_hi; ++k)
    for (int l = est.l_lo; l <= est.l_hi; ++l) {
      const Complex phase = cis2pi(-static_cast<double>(k * lp) / MN);
      est.h_hat(l - est.l_lo, k - est.k_lo) = y_dd(grid.index(l + lp, k + kp)) / xp * phase;
    }
  return est;
}

EffectiveChannel reconstruct_heff_from_estimate(const GridConfig& grid, const PilotEstimate& est) {
  return reconstruct_heff_from_response(grid, est.to_kernel(grid));
}

CVector lmmse_detect(const CMatrix& H, const CVector& y_dd, double sigma2) {
  if (H.rows() != y_dd.size()) throw std::invalid_argument("lmmse: dimension mismatch");
  const double reg = std::max(sigma2, kSigma2Floor);
  CMatrix A = H.adjoint() * H;
  A.diagonal().array() += reg;
  Eigen::LLT<CMatrix> llt(A);
  if (llt.info() != Eigen::Success) throw FactorizationError("lmmse: Cholesky factorization failed");
  return llt.solve(H.adjoint() * y_dd);
}

CVector lmmse_detect_robust(const CMatrix& H, const CVector& y_dd, double sigma2) {
  double reg = std::max(sigma2, kSigma2Floor);
  for (int attempt = 0; attempt < 12; ++attempt, reg *= 10.0) {
    try {
      return lmmse_detect(H, y_dd, reg);
    } catch (const FactorizationError&) {
    }
  }
  throw FactorizationError("lmmse: factorization failed for every regularizer");
}

InitialState init_state(const ZakModem& modem, const FrameLayout& layout, const Constellation& constellation,
                        const CVector& y_dd, double sigma2) {
  const GridConfig& grid = modem.grid();
  InitialState st;
  st.estimate = model_free_estimate(grid, layout, y_dd);
  st.H_hat = reconstruct_heff_from_estimate(grid, st.estimate);
  st.x_lmmse = lmmse_detect_robust(st.H_hat.H, y_dd, sigma2);
  st.x0_data = project_hull(constellation, extract_data(layout, st.x_lmmse));
  st.s0 = modem.modulate(assemble_frame(layout, st.x0_data));
  st.h0 = modem.channel_vector(st.H_hat.H);
  return st;
}

}  // namespace zakotfs
