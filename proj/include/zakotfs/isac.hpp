#pragma once

#include <vector>

#include "zakotfs/anm.hpp"
#include "zakotfs/frame.hpp"
#include "zakotfs/init.hpp"
#include "zakotfs/modem.hpp"

namespace zakotfs {

// r = (sᵀ ⊗ I) D h, with column block j of D equal to Diag(col_j(F^H)).
CVector forward_S(const ZakModem& modem, const CVector& s, const CVector& h);
CVector adjoint_S(const ZakModem& modem, const CVector& s, const CVector& u);

struct IsacOptions {
  int t_max = 500;
  bool accelerated = true;
  bool unscaled_alpha = false;      // α = ‖s‖² instead of the Lipschitz constant ‖s‖²/MN
  bool stop_on_small_step = true;   // stop once ‖h⁺ − h‖ ≤ δ
  double eta_scale = 1.0;
  double eps0_rel = 1e-2;           // ε₀ = eps0_rel·η
  double eps_min_rel = 1e-9;        // floor on ε^{(t)}, relative to η
  double theta = 0.1;
  double rho0_rel = 0.01;           // ρ⁽⁰⁾ = rho0_rel·β⁽⁰⁾
  double rho_growth = 2.0;
  int rho_period = 10;
  double rho_upb_rel = 10.0;        // ρ_upb = rho_upb_rel·β⁽⁰⁾
  double delta_rel = 1e-6;          // δ = delta_rel·MN
  double amplitude_kappa = 1.0;
  double power_tol = 1e-6;
  SolverBudget anm;
  bool anm_warm_start = true;       // seed each proximal solve with the current atoms
};

struct MomentumBounds {
  double mu_bar = 0.0;
  double iota_bar = 0.0;
  double theta = 0.1;
};

// Running extremes of the step constants, giving μ̄ = √((α_min/α_max)(1−θ)) and likewise ῑ from β.
class MomentumTracker {
 public:
  explicit MomentumTracker(double theta) : theta_(theta) {}
  void observe(double alpha, double beta);
  MomentumBounds bounds() const;
  double alpha_min() const { return a_min_; }
  double beta_min() const { return b_min_; }

 private:
  double theta_;
  double a_min_ = 0.0, a_max_ = 0.0, b_min_ = 0.0, b_max_ = 0.0;
  bool seen_a_ = false, seen_b_ = false;
};

struct TraceRow {
  int t = 0;
  double objective = 0.0;          // ½‖r − S(s)h‖² + η Σ|c|
  double penalty_objective = 0.0;  // objective − ρ‖x‖²
  double h_step = 0.0;             // ‖h⁺ − h‖
  double x_step = 0.0;             // ‖x⁺ − x‖
  double rho = 0.0;                // penalty used in this iteration's symbol update
  int tuples = 0;
  double mu = 0.0, mu_bar = 0.0, iota = 0.0, iota_bar = 0.0;
  double eps = 0.0, alpha = 0.0, beta = 0.0;
  int anm_iterations = 0;
  int anm_violations = 0;
  bool anm_certified = false;
};

struct IsacState {
  int t = 0;
  CVector x, x_prev;  // data symbols
  CVector h, h_prev;
  AtomicRepresentation U, U_prev;
  bool h_atomic = false, h_prev_atomic = false;  // h (h_prev) equals the synthesis of U (U_prev)
  double rho = 0.0, rho_upb = 0.0;
  double xi = 0.0, zeta = 0.0;  // FISTA scalars (index t−1)
  double eps = 0.0;
  bool rho_initialized = false;
  CVector power_vec;  // warm start for λ_max(H̃^H H̃)
  std::vector<TraceRow> trace;
};

struct ChannelUpdate {
  AtomicRepresentation U;
  DescentReport report;
  double mu = 0.0;
};

struct IsacProblem {
  const ZakModem& modem;
  const AtomDictionary& dict;
  const FrameLayout& layout;
  const Constellation& constellation;
  const CVector& r;
  const CVector& y_dd;
  double eta;
};

ChannelUpdate channel_update(const IsacProblem& prob, const IsacState& state, const CVector& s, double alpha,
                             double mu, const IsacOptions& opts);

EffectiveChannel reconstruct_heff_from_atoms(const ZakModem& modem, const AtomicRepresentation& U);

struct SymbolUpdate {
  CVector x;
  double beta = 0.0;
  double iota = 0.0;
};

// One accelerated projected-gradient step on the majorant of ½‖y_d − H̃x‖² − ρ‖x‖².
SymbolUpdate symbol_update(const FrameLayout& layout, const Constellation& constellation, const CVector& y_dd,
                           const CMatrix& H_eff, const CVector& x, const CVector& x_prev, double rho, double iota,
                           CVector& power_vec, double power_tol);

double data_fit_penalty(const FrameLayout& layout, const CVector& y_dd, const CMatrix& H_eff, const CVector& x,
                        double rho);

double rho_schedule(double rho, double x_step2, int t, double delta, int n, double c, double rho_upb);

double lambda_max_power(const CMatrix& A, CVector& v, double tol, int max_iter = 500);

// η used by the solver: σ√π/2·‖s‖², i.e. the regularizer of the unit-modulus dictionary rescaled by 1/√MN
// to the unitary-normalized forward model.
double solver_eta(double sigma2, double s_norm2, int MN, double scale);

struct IsacResult {
  PathSet paths;
  AtomicRepresentation atoms;
  CVector x_soft;
  CVector x_data;
  CMatrix H_eff;
  std::vector<TraceRow> trace;
  int iterations = 0;
  bool converged = false;
  int anm_kmax_flags = 0;
  int anm_violations = 0;
  double eta = 0.0;
  double amplitude_floor = 0.0;
};

IsacResult run(const ZakModem& modem, const FrameLayout& layout, const Constellation& constellation,
               const CVector& r, const CVector& y_dd, double sigma2, const InitialState& init,
               const IsacOptions& opts = {});
IsacResult run(const ZakModem& modem, const FrameLayout& layout, const Constellation& constellation,
               const CVector& r, const CVector& y_dd, double sigma2, const IsacOptions& opts = {});

// Telescoping check on the penalty objective F of the trace rows: F_{t+1} ≤ F_t + (1 + 1/(α_min θ)) ε^{(t)},
// i.e. F plus the remaining ε slack never increases. Meaningful for runs with μ = ι = 0.
struct DescentCheck {
  int violations = 0;
  double worst_excess = 0.0;
  double slack_factor = 0.0;
};

DescentCheck check_descent(const std::vector<TraceRow>& trace, double theta = 0.1, double rel_tol = 1e-9);

}  // namespace zakotfs
