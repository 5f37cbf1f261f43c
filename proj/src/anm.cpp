#include "zakotfs/anm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/FFT>

namespace zakotfs {

namespace {

Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine;
  return engine;
}

Complex soft_coefficient(Complex z, double eta_tilde, double norm2) {
  const double mag = std::abs(z);
  if (mag <= eta_tilde || mag == 0.0) return {0.0, 0.0};
  return z / norm2 * (1.0 - eta_tilde / mag);
}

}  // namespace

double AtomicRepresentation::atomic_norm_upper() const {
  double s = 0.0;
  for (const auto& t : tuples) s += std::abs(t.c);
  return s;
}

PathSet AtomicRepresentation::to_paths() const {
  PathSet p;
  for (const auto& t : tuples) p.push_back({t.c, t.tau, t.nu});
  return p;
}

AtomDictionary::AtomDictionary(const GridConfig& grid) : grid_(grid), mn_(grid.MN()) { grid_.validate(); }

void AtomDictionary::phase_vectors(double tb, double nb, CVector& u, CVector& w) const {
  u.resize(mn_);
  w.resize(mn_);
  const double theta = 2.0 * kPi / mn_;
  for (int n = 0; n < mn_; ++n) {
    u(n) = std::polar(1.0, theta * n * tb);
    w(n) = std::polar(1.0, -theta * n * nb);
  }
}

CVector AtomDictionary::atom_bins(double tb, double nb) const {
  CVector h = CVector::Zero(static_cast<Eigen::Index>(mn_) * mn_);
  accumulate_bins(h, 1.0, tb, nb);
  return h;
}

Complex AtomDictionary::inner_bins(const CVector& h_r, double tb, double nb) const {
  CVector u, w;
  phase_vectors(tb, nb, u, w);
  Eigen::Map<const CMatrix> Hm(h_r.data(), mn_, mn_);
  return u.transpose() * (Hm.transpose() * w);
}

void AtomDictionary::accumulate_bins(CVector& h, Complex c, double tb, double nb) const {
  CVector u, w;
  phase_vectors(tb, nb, u, w);
  Eigen::Map<CMatrix> Hm(h.data(), mn_, mn_);
  // a[j·MN + q] = conj(u_j)·conj(w_q)
  Hm.noalias() += (c * w.conjugate()) * u.adjoint();
}

AtomDictionary::Derivatives AtomDictionary::derivatives_bins(const CVector& h_r, double tb, double nb) const {
  CVector u, w;
  phase_vectors(tb, nb, u, w);
  const double theta = 2.0 * kPi / mn_;
  CMatrix W(mn_, 3);
  for (int q = 0; q < mn_; ++q) {
    W(q, 0) = w(q);
    W(q, 1) = static_cast<double>(q) * w(q);
    W(q, 2) = static_cast<double>(q) * q * w(q);
  }
  Eigen::Map<const CMatrix> Hm(h_r.data(), mn_, mn_);
  const CMatrix V = Hm.transpose() * W;
  CVector ju(mn_), jju(mn_);
  for (int j = 0; j < mn_; ++j) {
    ju(j) = static_cast<double>(j) * u(j);
    jju(j) = static_cast<double>(j) * j * u(j);
  }
  const Complex jt(0.0, theta);
  Derivatives d;
  d.c = u.transpose() * V.col(0);
  d.c_t = jt * Complex(ju.transpose() * V.col(0));
  d.c_tt = -theta * theta * Complex(jju.transpose() * V.col(0));
  d.c_n = -jt * Complex(u.transpose() * V.col(1));
  d.c_nn = -theta * theta * Complex(u.transpose() * V.col(2));
  d.c_tn = theta * theta * Complex(ju.transpose() * V.col(1));
  return d;
}

CMatrix AtomDictionary::grid_inner(const CVector& h_r, int gamma) const {
  if (gamma < 1) throw std::invalid_argument("oversampling factor must be >= 1");
  const int M = grid_.M, N = grid_.N;
  const int L = gamma * mn_;
  const int P = gamma * M, Q = gamma * N;
  Eigen::Map<const CMatrix> Hm(h_r.data(), mn_, mn_);
  auto& fft = fft_engine();
  std::vector<Complex> in(L), out(L);
  // V(qi, j) = Σ_q Hm(q, j) e^{−j2π q·qi/L}
  CMatrix V(Q, mn_);
  for (int j = 0; j < mn_; ++j) {
    std::fill(in.begin(), in.end(), Complex{0.0, 0.0});
    for (int q = 0; q < mn_; ++q) in[q] = Hm(q, j);
    fft.fwd(out, in);
    for (int qi = 0; qi < Q; ++qi) V(qi, j) = out[qi];
  }
  // c(p, qi) = Σ_j V(qi, j) e^{+j2π j·p/L}
  CMatrix G(P, Q);
  for (int qi = 0; qi < Q; ++qi) {
    std::fill(in.begin(), in.end(), Complex{0.0, 0.0});
    for (int j = 0; j < mn_; ++j) in[j] = V(qi, j);
    fft.inv(out, in);
    for (int p = 0; p < P; ++p) G(p, qi) = out[p] * static_cast<double>(L);
  }
  return G;
}

Eigen::MatrixXd AtomDictionary::grid_scores(const CVector& h_r, int gamma) const {
  return grid_inner(h_r, gamma).cwiseAbs();
}

namespace {

// Σ_{n<L} n^k e^{jθnx}, k = 0, 1, 2
std::array<Complex, 3> dirichlet_moments(int L, double x) {
  const double phi = 2.0 * kPi * std::remainder(x, static_cast<double>(L)) / L;
  std::array<Complex, 3> e{};
  if (std::abs(phi) >= 3e-3) {
    const double l = L;
    const Complex z = std::polar(1.0, phi);
    const Complex zL = std::polar(1.0, phi * L);
    const Complex d = 1.0 - z;
    e[0] = (1.0 - zL) / d;
    e[1] = z * (1.0 - l * zL / z + (l - 1.0) * zL) / (d * d);
    e[2] = (z * (1.0 + z) - zL * ((l - 1.0) * (l - 1.0) * z * z - (2.0 * l * l - 2.0 * l - 1.0) * z + l * l)) /
           (d * d * d);
    return e;
  }
  const Complex z = std::polar(1.0, phi);
  Complex p{1.0, 0.0};
  for (int n = 0; n < L; ++n) {
    const double dn = n;
    e[0] += p;
    e[1] += dn * p;
    e[2] += dn * dn * p;
    p *= z;
  }
  return e;
}

}  // namespace

Complex AtomDictionary::cross_bins(double t1, double n1, double t2, double n2) const {
  return dirichlet_kernel(mn_, t1 - t2) * std::conj(dirichlet_kernel(mn_, n1 - n2));
}

AtomDictionary::Derivatives AtomDictionary::cross_derivatives(double t1, double n1, double t2, double n2) const {
  const auto et = dirichlet_moments(mn_, t1 - t2);
  const auto en = dirichlet_moments(mn_, n1 - n2);
  const Complex a0 = et[0], a1 = et[1], a2 = et[2];
  const Complex b0 = std::conj(en[0]), b1 = std::conj(en[1]), b2 = std::conj(en[2]);
  const double theta = 2.0 * kPi / mn_;
  const Complex jt(0.0, theta);
  Derivatives d;
  d.c = a0 * b0;
  d.c_t = jt * a1 * b0;
  d.c_tt = -theta * theta * a2 * b0;
  d.c_n = -jt * a0 * b1;
  d.c_nn = -theta * theta * a0 * b2;
  d.c_tn = theta * theta * a1 * b1;
  return d;
}

void AtomDictionary::add_grid_cross(CMatrix& G, Complex coef, double t2, double n2, int gamma) const {
  const int P = gamma * grid_.M, Q = gamma * grid_.N;
  CVector dt(P), dn(Q);
  for (int p = 0; p < P; ++p) dt(p) = dirichlet_kernel(mn_, static_cast<double>(p) / gamma - t2);
  for (int q = 0; q < Q; ++q) dn(q) = std::conj(dirichlet_kernel(mn_, static_cast<double>(q) / gamma - n2));
  G.noalias() += (coef * dt) * dn.transpose();
}

Eigen::MatrixXd AtomDictionary::grid_scores_naive(const CVector& h_r, int gamma) const {
  const int P = gamma * grid_.M, Q = gamma * grid_.N;
  Eigen::MatrixXd S(P, Q);
  for (int p = 0; p < P; ++p)
    for (int q = 0; q < Q; ++q) S(p, q) = std::abs(inner_bins(h_r, static_cast<double>(p) / gamma,
                                                               static_cast<double>(q) / gamma));
  return S;
}

const CMatrix& DenoiseTarget::grid_inner(int gamma) const {
  if (grid_gamma_ != gamma) {
    grid_ = compute_grid_inner(gamma);
    grid_gamma_ = gamma;
  }
  return grid_;
}

double DenoiseTarget::squared_norm() const {
  if (norm2_ < 0.0) norm2_ = compute_squared_norm();
  return norm2_;
}

DenseTarget::DenseTarget(const AtomDictionary& dict, CVector h) : DenoiseTarget(dict), h_(std::move(h)) {
  const Eigen::Index n = static_cast<Eigen::Index>(dict.MN()) * dict.MN();
  if (h_.size() != n) throw std::invalid_argument("DenseTarget: vector length must be (MN)^2");
}

Complex DenseTarget::inner(double tb, double nb) const { return dict_.inner_bins(h_, tb, nb); }

AtomDictionary::Derivatives DenseTarget::derivatives(double tb, double nb) const {
  return dict_.derivatives_bins(h_, tb, nb);
}

GradientStepTarget::GradientStepTarget(const AtomDictionary& dict, std::vector<BinAtom> atoms, const CVector& v,
                                       const CVector& s)
    : DenoiseTarget(dict), atoms_(std::move(atoms)), v_(v), s_conj_(s.conjugate()) {
  const int MN = dict.MN();
  if (v.size() != MN || s.size() != MN) throw std::invalid_argument("GradientStepTarget: size mismatch");
}

const CVector& GradientStepTarget::dense() const {
  if (dense_.size() == 0) {
    const int MN = dict_.MN();
    dense_ = CVector::Zero(static_cast<Eigen::Index>(MN) * MN);
    for (const auto& a : atoms_) dict_.accumulate_bins(dense_, a.c, a.tb, a.nb);
    std::vector<Complex> roots(MN);
    for (int p = 0; p < MN; ++p) roots[p] = std::polar(1.0, -2.0 * kPi * p / MN);
    Eigen::Map<CMatrix> Hm(dense_.data(), MN, MN);
    const double scale = 1.0 / std::sqrt(static_cast<double>(MN));
    for (int j = 0; j < MN; ++j) {
      const Complex sj = scale * s_conj_(j);
      for (int q = 0; q < MN; ++q) Hm(q, j) += roots[(static_cast<long>(q) * j) % MN] * v_(q) * sj;
    }
  }
  return dense_;
}

// The masked rank-one part contributes (1/√MN) Σ_q w_q v_q G_q with G = DFT(u ⊙ s̄).
Complex GradientStepTarget::rank_one_inner(double tb, double nb) const {
  const int MN = dict_.MN();
  const double theta = 2.0 * kPi / MN;
  auto& fft = fft_engine();
  std::vector<Complex> in(MN), out(MN);
  const Complex zu = std::polar(1.0, theta * tb);
  Complex p{1.0, 0.0};
  for (int j = 0; j < MN; ++j, p *= zu) in[j] = p * s_conj_(j);
  fft.fwd(out, in);
  const Complex zw = std::polar(1.0, -theta * nb);
  Complex acc{0.0, 0.0};
  p = {1.0, 0.0};
  for (int q = 0; q < MN; ++q, p *= zw) acc += p * v_(q) * out[q];
  return acc / std::sqrt(static_cast<double>(MN));
}

Complex GradientStepTarget::inner(double tb, double nb) const {
  Complex acc = rank_one_inner(tb, nb);
  for (const auto& a : atoms_) acc += a.c * dict_.cross_bins(tb, nb, a.tb, a.nb);
  return acc;
}

// ‖Σ d_k a_k‖² + 2 Re Σ conj(d_k) a_k^H R + ‖R‖², with ‖R‖² = ‖v‖²‖s‖²/MN
double GradientStepTarget::compute_squared_norm() const {
  const int MN = dict_.MN();
  double r = v_.squaredNorm() * s_conj_.squaredNorm() / MN;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const auto& a = atoms_[i];
    r += 2.0 * std::real(std::conj(a.c) * rank_one_inner(a.tb, a.nb));
    r += std::norm(a.c) * dict_.atom_norm2();
    for (std::size_t k = i + 1; k < atoms_.size(); ++k)
      r += 2.0 * std::real(std::conj(a.c) * atoms_[k].c * dict_.cross_bins(a.tb, a.nb, atoms_[k].tb, atoms_[k].nb));
  }
  return std::max(r, 0.0);
}

// For delay p/γ the DFT of u ⊙ s̄ is a stride-γ read of the zero-padded DFT of s̄; the Doppler axis is then
// one zero-padded transform per delay row.
CMatrix GradientStepTarget::compute_grid_inner(int gamma) const {
  if (gamma < 1) throw std::invalid_argument("oversampling factor must be >= 1");
  const auto& g = dict_.grid();
  const int MN = dict_.MN();
  const int L = gamma * MN;
  const int P = gamma * g.M, Q = gamma * g.N;
  auto& fft = fft_engine();
  std::vector<Complex> in(L, Complex{0.0, 0.0}), S(L), out(L);
  for (int j = 0; j < MN; ++j) in[j] = s_conj_(j);
  fft.fwd(S, in);
  CMatrix G(P, Q);
  const double scale = 1.0 / std::sqrt(static_cast<double>(MN));
  for (int p = 0; p < P; ++p) {
    std::fill(in.begin(), in.end(), Complex{0.0, 0.0});
    for (int q = 0; q < MN; ++q) in[q] = v_(q) * S[((static_cast<long>(gamma) * q - p) % L + L) % L];
    fft.fwd(out, in);
    for (int qi = 0; qi < Q; ++qi) G(p, qi) = scale * out[qi];
  }
  for (const auto& a : atoms_) dict_.add_grid_cross(G, a.c, a.tb, a.nb, gamma);
  return G;
}

AtomDictionary::Derivatives GradientStepTarget::derivatives(double tb, double nb) const {
  const int MN = dict_.MN();
  const double theta = 2.0 * kPi / MN;
  auto& fft = fft_engine();
  std::vector<Complex> in0(MN), in1(MN), in2(MN), g0(MN), g1(MN), g2(MN);
  const Complex zu = std::polar(1.0, theta * tb);
  Complex pu{1.0, 0.0};
  for (int j = 0; j < MN; ++j, pu *= zu) {
    const Complex x = pu * s_conj_(j);
    in0[j] = x;
    in1[j] = static_cast<double>(j) * x;
    in2[j] = static_cast<double>(j) * j * x;
  }
  fft.fwd(g0, in0);
  fft.fwd(g1, in1);
  fft.fwd(g2, in2);
  Complex s0{0.0, 0.0}, s1{0.0, 0.0}, s2{0.0, 0.0}, sq{0.0, 0.0}, sqq{0.0, 0.0}, sq1{0.0, 0.0};
  const Complex zw = std::polar(1.0, -theta * nb);
  Complex pw{1.0, 0.0};
  for (int q = 0; q < MN; ++q, pw *= zw) {
    const Complex wv = pw * v_(q);
    const double dq = q;
    s0 += wv * g0[q];
    s1 += wv * g1[q];
    s2 += wv * g2[q];
    sq += dq * wv * g0[q];
    sqq += dq * dq * wv * g0[q];
    sq1 += dq * wv * g1[q];
  }
  const double k = 1.0 / std::sqrt(static_cast<double>(MN));
  const Complex jt(0.0, theta);
  AtomDictionary::Derivatives d;
  d.c = k * s0;
  d.c_t = k * jt * s1;
  d.c_tt = -k * theta * theta * s2;
  d.c_n = -k * jt * sq;
  d.c_nn = -k * theta * theta * sqq;
  d.c_tn = k * theta * theta * sq1;
  for (const auto& a : atoms_) {
    const auto e = dict_.cross_derivatives(tb, nb, a.tb, a.nb);
    d.c += a.c * e.c;
    d.c_t += a.c * e.c_t;
    d.c_n += a.c * e.c_n;
    d.c_tt += a.c * e.c_tt;
    d.c_nn += a.c * e.c_nn;
    d.c_tn += a.c * e.c_tn;
  }
  return d;
}

Complex atom_inner(const GridConfig& grid, const CVector& h_r, double tau, double nu) {
  return AtomDictionary(grid).inner_bins(h_r, grid.delay_bins(tau), grid.doppler_bins(nu));
}

CVector atom_vector(const GridConfig& grid, double tau, double nu) {
  return AtomDictionary(grid).atom_bins(grid.delay_bins(tau), grid.doppler_bins(nu));
}

DelayDoppler grid_seed(const AtomDictionary& dict, const CVector& h_r, int gamma) {
  const Eigen::MatrixXd S = dict.grid_scores(h_r, gamma);
  Eigen::Index p = 0, q = 0;
  S.maxCoeff(&p, &q);
  const auto& g = dict.grid();
  return {g.delay_seconds(static_cast<double>(p) / gamma), g.doppler_hz(static_cast<double>(q) / gamma)};
}

namespace {

struct BinPoint {
  double tb, nb;
};

// Maximizes |c(τ, ν)|² from x; Newton steps when the Hessian is negative definite, otherwise
// gradient ascent with step halving.
template <class Value, class Derivs>
BinPoint newton_bins(const GridConfig& g, Value&& value_c, Derivs&& derivs, BinPoint x, int steps) {
  const double tmax = g.M, nmax = g.N;
  auto clamp = [&](BinPoint p) { return BinPoint{std::clamp(p.tb, 0.0, tmax), std::clamp(p.nb, 0.0, nmax)}; };
  auto value = [&](BinPoint p) { return std::norm(value_c(p.tb, p.nb)); };
  x = clamp(x);
  double f0 = value(x);
  for (int s = 0; s < steps; ++s) {
    const AtomDictionary::Derivatives d = derivs(x.tb, x.nb);
    const double gt = 2.0 * std::real(std::conj(d.c) * d.c_t);
    const double gn = 2.0 * std::real(std::conj(d.c) * d.c_n);
    const double htt = 2.0 * std::real(std::conj(d.c_t) * d.c_t + std::conj(d.c) * d.c_tt);
    const double hnn = 2.0 * std::real(std::conj(d.c_n) * d.c_n + std::conj(d.c) * d.c_nn);
    const double htn = 2.0 * std::real(std::conj(d.c_t) * d.c_n + std::conj(d.c) * d.c_tn);
    if (gt == 0.0 && gn == 0.0) break;

    bool accepted = false;
    BinPoint x1 = x;
    double f1 = f0;
    const double det = htt * hnn - htn * htn;
    if (htt < 0.0 && det > 0.0) {
      const double dt = -(hnn * gt - htn * gn) / det;
      const double dn = -(-htn * gt + htt * gn) / det;
      x1 = clamp({x.tb + dt, x.nb + dn});
      f1 = value(x1);
      accepted = f1 >= f0;
    }
    if (!accepted) {
      double t = 1.0 / std::max({std::abs(htt), std::abs(hnn), std::numeric_limits<double>::min()});
      for (int halving = 0; halving <= 20; ++halving, t *= 0.5) {
        x1 = clamp({x.tb + t * gt, x.nb + t * gn});
        f1 = value(x1);
        if (f1 > f0) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;
    const double moved = std::hypot(x1.tb - x.tb, x1.nb - x.nb);
    x = x1;
    f0 = f1;
    if (moved < 1e-10) break;
  }
  return x;
}

struct BinTuple {
  Complex c;
  double tb, nb;
  Complex b;  // a^H ĥ at (tb, nb)
};

// h_r = ĥ − Σ c_i a_i, evaluated through the target and the closed-form atom cross terms.
class Residual {
 public:
  Residual(const DenoiseTarget& target) : T_(target), dict_(target.dictionary()) {}

  std::vector<BinTuple> U;

  Complex inner(double tb, double nb, std::ptrdiff_t skip = -1) const {
    Complex z = T_.inner(tb, nb);
    for (std::size_t i = 0; i < U.size(); ++i)
      if (static_cast<std::ptrdiff_t>(i) != skip) z -= U[i].c * dict_.cross_bins(tb, nb, U[i].tb, U[i].nb);
    return z;
  }

  AtomDictionary::Derivatives derivatives(double tb, double nb, std::ptrdiff_t skip = -1) const {
    AtomDictionary::Derivatives d = T_.derivatives(tb, nb);
    for (std::size_t i = 0; i < U.size(); ++i) {
      if (static_cast<std::ptrdiff_t>(i) == skip) continue;
      const auto e = dict_.cross_derivatives(tb, nb, U[i].tb, U[i].nb);
      const Complex c = U[i].c;
      d.c -= c * e.c;
      d.c_t -= c * e.c_t;
      d.c_n -= c * e.c_n;
      d.c_tt -= c * e.c_tt;
      d.c_nn -= c * e.c_nn;
      d.c_tn -= c * e.c_tn;
    }
    return d;
  }

  Eigen::MatrixXd grid_scores(int gamma) const {
    CMatrix G = T_.grid_inner(gamma);
    for (const auto& t : U) dict_.add_grid_cross(G, -t.c, t.tb, t.nb, gamma);
    return G.cwiseAbs();
  }

  BinPoint refine(BinPoint x, int steps, std::ptrdiff_t skip = -1) const {
    return newton_bins(
        dict_.grid(), [&](double tb, double nb) { return inner(tb, nb, skip); },
        [&](double tb, double nb) { return derivatives(tb, nb, skip); }, x, steps);
  }

  BinTuple make(Complex c, BinPoint x) const { return {c, x.tb, x.nb, T_.inner(x.tb, x.nb)}; }

  double l1() const {
    double s = 0.0;
    for (const auto& t : U) s += std::abs(t.c);
    return s;
  }

  // ‖ĥ − Σ c_i a_i‖²
  double squared_norm() const {
    double r = T_.squared_norm();
    for (std::size_t i = 0; i < U.size(); ++i) {
      r -= 2.0 * std::real(U[i].c * std::conj(U[i].b));
      r += std::norm(U[i].c) * dict_.atom_norm2();
      for (std::size_t k = i + 1; k < U.size(); ++k)
        r += 2.0 * std::real(std::conj(U[i].c) * U[k].c * dict_.cross_bins(U[i].tb, U[i].nb, U[k].tb, U[k].nb));
    }
    return std::max(r, 0.0);
  }

  // Re⟨h_r, ĥ − h_r⟩ = Re Σ c_i conj(a_i^H h_r)
  double inner_with_fit() const {
    double s = 0.0;
    for (std::size_t i = 0; i < U.size(); ++i) {
      Complex z = U[i].b;
      for (std::size_t k = 0; k < U.size(); ++k)
        z -= (i == k) ? U[k].c * dict_.atom_norm2() : U[k].c * dict_.cross_bins(U[i].tb, U[i].nb, U[k].tb, U[k].nb);
      s += std::real(U[i].c * std::conj(z));
    }
    return s;
  }

 private:
  const DenoiseTarget& T_;
  const AtomDictionary& dict_;
};

}  // namespace

DelayDoppler newton_refine(const AtomDictionary& dict, const CVector& h_r, double tau0, double nu0, int steps) {
  const auto& g = dict.grid();
  const BinPoint x = newton_bins(
      g, [&](double tb, double nb) { return dict.inner_bins(h_r, tb, nb); },
      [&](double tb, double nb) { return dict.derivatives_bins(h_r, tb, nb); },
      {g.delay_bins(tau0), g.doppler_bins(nu0)}, steps);
  return {g.delay_seconds(x.tb), g.doppler_hz(x.nb)};
}

namespace {

struct BinProjection {
  BinPoint x;
  Complex inner;
  Complex c;
};

BinProjection conic_project_bins(const Residual& res, const AtomDictionary& dict, double eta_tilde,
                                 const SolverBudget& budget) {
  const int gamma = budget.oversampling;
  const Eigen::MatrixXd S = res.grid_scores(gamma);
  Eigen::Index p = 0, q = 0;
  S.maxCoeff(&p, &q);
  BinProjection out;
  out.x = res.refine({static_cast<double>(p) / gamma, static_cast<double>(q) / gamma}, budget.newton_steps);
  out.inner = res.inner(out.x.tb, out.x.nb);
  out.c = soft_coefficient(out.inner, eta_tilde, dict.atom_norm2());
  return out;
}

}  // namespace

ConicProjection conic_project(const AtomDictionary& dict, const CVector& h_r, double eta_tilde,
                              const SolverBudget& budget) {
  const DenseTarget target(dict, h_r);
  const Residual res(target);
  const BinProjection bp = conic_project_bins(res, dict, eta_tilde, budget);
  const auto& g = dict.grid();
  return {bp.c, g.delay_seconds(bp.x.tb), g.doppler_hz(bp.x.nb), bp.inner};
}

DescentResult coordinate_descent(const AtomDictionary& dict, const CVector& h_hat, double alpha, double eta,
                                 const SolverBudget& budget, const std::vector<AtomTuple>& start) {
  return coordinate_descent(DenseTarget(dict, h_hat), alpha, eta, budget, start);
}

DescentResult coordinate_descent(const DenoiseTarget& target, double alpha, double eta, const SolverBudget& budget,
                                 const std::vector<AtomTuple>& start) {
  if (!(alpha > 0.0)) throw std::invalid_argument("coordinate_descent: alpha must be positive");
  if (eta < 0.0) throw std::invalid_argument("coordinate_descent: eta must be non-negative");
  if (!(budget.epsilon > 0.0)) throw std::invalid_argument("coordinate_descent: epsilon must be positive");
  const AtomDictionary& dict = target.dictionary();
  const auto& g = dict.grid();
  const double norm2 = dict.atom_norm2();
  const double eps = budget.epsilon;
  const double hh = target.squared_norm();
  const double delta = eta > 0.0 ? eps / (alpha * hh / eta + eps) : 0.0;
  const double eta_p = (1.0 - delta) * eta;
  const double eta_t = eta_p / alpha;

  Residual res(target);
  auto& U = res.U;
  for (const auto& t : start)
    if (t.c != Complex{0.0, 0.0}) U.push_back(res.make(t.c, {g.delay_bins(t.tau), g.doppler_bins(t.nu)}));
  DescentReport rep;
  rep.eta_prime = eta_p;

  auto objective = [&] { return 0.5 * alpha * res.squared_norm() + eta_p * res.l1(); };
  double J = objective();
  auto monitor = [&] {
    const double J1 = objective();
    const double inc = (J1 - J) / std::max(1.0, std::abs(J));
    if (inc > 1e-10) {
      ++rep.monotonicity_violations;
      rep.max_increase = std::max(rep.max_increase, inc);
    }
    J = J1;
  };

  // Re-fit tuple i against its leave-one-out residual; the refitted coefficient may be 0.
  auto refit = [&](std::size_t i) {
    const auto skip = static_cast<std::ptrdiff_t>(i);
    const BinTuple& t = U[i];
    const BinPoint x = res.refine({t.tb, t.nb}, budget.newton_steps, skip);
    const Complex z = res.inner(x.tb, x.nb, skip);
    const Complex z_old = res.inner(t.tb, t.nb, skip);
    // keep the old location when the refit did not improve on it
    if (std::abs(z_old) > std::abs(z)) return BinTuple{soft_coefficient(z_old, eta_t, norm2), t.tb, t.nb, t.b};
    return res.make(soft_coefficient(z, eta_t, norm2), x);
  };

  std::size_t i = 0;
  int k = 0;
  while (k < budget.K_max) {
    if (i < U.size()) {
      const BinTuple t = refit(i);
      if (t.c == Complex{0.0, 0.0}) {
        U.erase(U.begin() + static_cast<std::ptrdiff_t>(i));
        ++rep.drops;
        monitor();
        continue;
      }
      U[i] = t;
      monitor();
      // merge any tuple that converged onto the same peak
      for (std::size_t j = 0; j < U.size(); ++j) {
        if (j == i) continue;
        if (std::abs(U[j].tb - U[i].tb) >= budget.merge_radius || std::abs(U[j].nb - U[i].nb) >= budget.merge_radius)
          continue;
        const std::vector<BinTuple> U_saved = U;
        U.erase(U.begin() + static_cast<std::ptrdiff_t>(j));
        const std::size_t ii = j < i ? i - 1 : i;
        const BinTuple merged = refit(ii);
        U[ii] = merged;
        if (merged.c == Complex{0.0, 0.0}) U.erase(U.begin() + static_cast<std::ptrdiff_t>(ii));
        if (objective() <= J + 1e-12 * std::max(1.0, std::abs(J))) {
          ++rep.merges;
          i = ii;
          monitor();
          break;
        }
        U = U_saved;
      }
      ++i;
      continue;
    }
    ++k;
    const double gap = std::abs(eta * res.l1() - alpha * res.inner_with_fit());
    if (gap < eps) {
      const BinProjection cp = conic_project_bins(res, dict, eta_t, budget);
      bool added = false;
      if (alpha * std::abs(cp.inner) > eta && cp.c != Complex{0.0, 0.0}) {
        U.push_back(res.make(cp.c, cp.x));
        // a violation at rounding level does not lower the objective
        added = objective() < J - 1e-12 * std::max(1.0, std::abs(J));
        if (!added) U.pop_back();
      }
      if (added) {
        ++rep.additions;
        monitor();
        i = 0;
      } else {
        rep.certified = true;
        break;
      }
    } else {
      i = 0;
    }
  }
  rep.iterations = k;
  rep.hit_kmax = !rep.certified;
  rep.objective = J;

  DescentResult out;
  out.rep.h = CVector::Zero(static_cast<Eigen::Index>(dict.MN()) * dict.MN());
  for (const auto& t : U) {
    out.rep.tuples.push_back({t.c, g.delay_seconds(t.tb), g.doppler_hz(t.nb)});
    dict.accumulate_bins(out.rep.h, t.c, t.tb, t.nb);
  }
  out.h_r = target.dense() - out.rep.h;
  out.report = rep;
  return out;
}

double regularizer_eta(double sigma, double s_norm2, int MN, double scale) {
  if (sigma < 0.0) throw std::invalid_argument("sigma must be non-negative");
  return sigma * std::sqrt(MN * kPi) / 2.0 * s_norm2 * scale;
}

}  // namespace zakotfs
