#pragma once

#include <stdexcept>

#include "zakotfs/frame.hpp"
#include "zakotfs/modem.hpp"

namespace zakotfs {

// Model-free channel response read off the pilot region, indexed by offsets from the pilot.
struct PilotEstimate {
  int l_lo = 0, l_hi = 0, k_lo = 0, k_hi = 0;  // offset ranges (inclusive)
  CMatrix h_hat;                               // (l − l_lo, k − k_lo)

  Complex at(int l, int k) const {
    if (l < l_lo || l > l_hi || k < k_lo || k > k_hi) return {0.0, 0.0};
    return h_hat(l - l_lo, k - k_lo);
  }
  KernelTable to_kernel(const GridConfig& grid) const;
};

PilotEstimate model_free_estimate(const GridConfig& grid, const FrameLayout& layout, const CVector& y_dd);
EffectiveChannel reconstruct_heff_from_estimate(const GridConfig& grid, const PilotEstimate& est);

class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kSigma2Floor = 1e-12;

CVector lmmse_detect(const CMatrix& H, const CVector& y_dd, double sigma2);
// Retries with a tenfold larger regularizer until the factorization succeeds.
CVector lmmse_detect_robust(const CMatrix& H, const CVector& y_dd, double sigma2);

struct InitialState {
  PilotEstimate estimate;
  EffectiveChannel H_hat;
  CVector x_lmmse;  // full-frame soft LMMSE output
  CVector x0_data;  // hull-projected data symbols
  CVector s0;       // modulated frame rebuilt from x0_data
  CVector h0;       // dense channel vector reproducing H_hat
};

InitialState init_state(const ZakModem& modem, const FrameLayout& layout, const Constellation& constellation,
                        const CVector& y_dd, double sigma2);

}  // namespace zakotfs
