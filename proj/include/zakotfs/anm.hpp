#pragma once

#include <vector>

#include "zakotfs/frame.hpp"
#include "zakotfs/modem.hpp"

namespace zakotfs {

struct AtomTuple {
  Complex c{0.0, 0.0};
  double tau = 0.0;  // seconds
  double nu = 0.0;   // Hz
};

struct AtomicRepresentation {
  std::vector<AtomTuple> tuples;
  CVector h;  // Σ c_i a(τ_i, ν_i), length (MN)²

  double atomic_norm_upper() const;
  PathSet to_paths() const;
};

struct SolverBudget {
  double epsilon = 1e-3;
  int K_max = 20;  // passes: a sweep over the tuples followed by the certificate test
  int oversampling = 4;
  int newton_steps = 10;
  double merge_radius = 0.125;  // in resolution cells, per axis
};

struct DescentReport {
  int iterations = 0;
  int additions = 0;
  int drops = 0;
  int merges = 0;
  bool certified = false;  // stopped on the dual certificate
  bool hit_kmax = false;
  int monotonicity_violations = 0;
  double max_increase = 0.0;  // largest relative objective increase observed
  double objective = 0.0;     // final objective at the working threshold
  double eta_prime = 0.0;
};

struct DescentResult {
  AtomicRepresentation rep;
  CVector h_r;  // residual ĥ − h
  DescentReport report;
};

// Evaluates atoms a(τ,ν) = b_τ ⊗ d_ν, with b_τ[n] = e^{−j2πnτ/(NT)}, d_ν[n] = e^{j2πnν/(MΔf)}.
// Coordinates passed as "bins" are τ·MΔf and ν·NT.
class AtomDictionary {
 public:
  explicit AtomDictionary(const GridConfig& grid);

  const GridConfig& grid() const { return grid_; }
  int MN() const { return mn_; }
  double atom_norm2() const { return static_cast<double>(mn_) * mn_; }

  CVector atom_bins(double tb, double nb) const;
  Complex inner_bins(const CVector& h_r, double tb, double nb) const;  // a^H h_r
  void accumulate_bins(CVector& h, Complex c, double tb, double nb) const;  // h += c·a

  struct Derivatives {
    Complex c, c_t, c_n, c_tt, c_nn, c_tn;
  };
  Derivatives derivatives_bins(const CVector& h_r, double tb, double nb) const;

  // a^H h_r on the γM × γN grid τ = p/γ, ν = q/γ (bins); entry (p, q).
  CMatrix grid_inner(const CVector& h_r, int gamma) const;
  Eigen::MatrixXd grid_scores(const CVector& h_r, int gamma) const;
  Eigen::MatrixXd grid_scores_naive(const CVector& h_r, int gamma) const;

  // a(t1, n1)^H a(t2, n2) in closed form, and its derivatives in (t1, n1).
  Complex cross_bins(double t1, double n1, double t2, double n2) const;
  Derivatives cross_derivatives(double t1, double n1, double t2, double n2) const;
  // G(p, q) += coef · a(p/γ, q/γ)^H a(t2, n2)
  void add_grid_cross(CMatrix& G, Complex coef, double t2, double n2, int gamma) const;

 private:
  void phase_vectors(double tb, double nb, CVector& u, CVector& w) const;
  GridConfig grid_;
  int mn_;
};

// Evaluations of a(τ,ν)^H ĥ for the point ĥ being denoised, in bin coordinates.
class DenoiseTarget {
 public:
  explicit DenoiseTarget(const AtomDictionary& dict) : dict_(dict) {}
  virtual ~DenoiseTarget() = default;
  const AtomDictionary& dictionary() const { return dict_; }
  virtual Complex inner(double tb, double nb) const = 0;
  virtual AtomDictionary::Derivatives derivatives(double tb, double nb) const = 0;
  virtual const CVector& dense() const = 0;
  const CMatrix& grid_inner(int gamma) const;
  double squared_norm() const;

 protected:
  virtual CMatrix compute_grid_inner(int gamma) const { return dict_.grid_inner(dense(), gamma); }
  virtual double compute_squared_norm() const { return dense().squaredNorm(); }
  const AtomDictionary& dict_;

 private:
  mutable int grid_gamma_ = 0;
  mutable CMatrix grid_;
  mutable double norm2_ = -1.0;
};

class DenseTarget final : public DenoiseTarget {
 public:
  DenseTarget(const AtomDictionary& dict, CVector h);
  Complex inner(double tb, double nb) const override;
  AtomDictionary::Derivatives derivatives(double tb, double nb) const override;
  const CVector& dense() const override { return h_; }

 private:
  CVector h_;
};

struct BinAtom {
  Complex c{0.0, 0.0};
  double tb = 0.0, nb = 0.0;
};

// ĥ = Σ d_k a(τ_k, ν_k) + conj(F^H) ⊙ (v s^H), where F is the unitary DFT. This is the shape of a
// gradient step taken from an atomic point, and it is evaluated without touching the dense vector.
class GradientStepTarget final : public DenoiseTarget {
 public:
  GradientStepTarget(const AtomDictionary& dict, std::vector<BinAtom> atoms, const CVector& v, const CVector& s);
  Complex inner(double tb, double nb) const override;
  AtomDictionary::Derivatives derivatives(double tb, double nb) const override;
  const CVector& dense() const override;

 protected:
  CMatrix compute_grid_inner(int gamma) const override;
  double compute_squared_norm() const override;

 private:
  Complex rank_one_inner(double tb, double nb) const;
  std::vector<BinAtom> atoms_;
  CVector v_, s_conj_;
  mutable CVector dense_;
};

Complex atom_inner(const GridConfig& grid, const CVector& h_r, double tau, double nu);
CVector atom_vector(const GridConfig& grid, double tau, double nu);

struct DelayDoppler {
  double tau = 0.0;
  double nu = 0.0;
};

DelayDoppler grid_seed(const AtomDictionary& dict, const CVector& h_r, int gamma = 4);
DelayDoppler newton_refine(const AtomDictionary& dict, const CVector& h_r, double tau0, double nu0, int steps = 10);

struct ConicProjection {
  Complex c{0.0, 0.0};
  double tau = 0.0;
  double nu = 0.0;
  Complex inner{0.0, 0.0};
};

ConicProjection conic_project(const AtomDictionary& dict, const CVector& h_r, double eta_tilde,
                              const SolverBudget& budget = {});

// `start` seeds the active set; an empty start is the plain algorithm.
DescentResult coordinate_descent(const AtomDictionary& dict, const CVector& h_hat, double alpha, double eta,
                                 const SolverBudget& budget, const std::vector<AtomTuple>& start = {});
DescentResult coordinate_descent(const DenoiseTarget& target, double alpha, double eta, const SolverBudget& budget,
                                 const std::vector<AtomTuple>& start = {});

// σ√(MNπ)/2 · ‖s‖² · scale
double regularizer_eta(double sigma, double s_norm2, int MN, double scale = 1.0);

}  // namespace zakotfs
