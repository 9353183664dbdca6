#pragma once

#include <vector>

#include "ellgaudin/opalg.hpp"

namespace ellgaudin {

enum class RKind { elliptic_dynamical, classical_r, trig_dynamical, trig_nondynamical, trig_tilde };

// Numeric evaluation context. Theta values used as denominators below `guard`
// in modulus raise SingularityError.
struct FelderContext {
  EllipticParams ep;
  cplx hbar{0.137, 0.071};
  double guard = 0.05;

  cplx th(cplx x) const { return theta(x, ep); }
  cplx den(cplx x) const;  // theta(x), guarded
};

using Lambda = std::vector<cplx>;

// ---------------------------------------------------------------- numeric matrices on C^n (x) C^n

Mat felder_R(int n, cplx u, const Lambda& lambda, const FelderContext& ctx);
Mat classical_r(int n, cplx u, const Lambda& lambda, const FelderContext& ctx);
// sum_{i != j} theta'(l_ij)/theta(l_ij) E_ii (x) E_jj
Mat classical_twist_f(int n, const Lambda& lambda, const FelderContext& ctx);
// r - f
Mat twisted_r(int n, cplx u, const Lambda& lambda, const FelderContext& ctx);
// Antisymmetrizer partner: B(l) R(-hbar; l) = A_2.
Mat r_minus_hbar_B(int n, const Lambda& lambda, const FelderContext& ctx);

// z = exp(2 pi i u), w = exp(2 pi i v), q = exp(pi i hbar), mu_ij = exp(2 pi i l_ij).
Mat trig_R(RKind kind, int n, cplx z, cplx w, const Lambda& lambda, cplx q, double guard = 1e-12);
Mat trig_F(int n, cplx q);
// Diagonal n x n matrix q^{(sum_{j>i} h_j - sum_{j<i} h_j)/2} for numeric weights h.
Mat trig_twist_G(int n, const std::vector<int>& weights, cplx q);

// The flip P on C^n (x) C^n.
Mat flip(int n);

// ---------------------------------------------------------------- expression forms

// R(x; lambda) with lambda_k = Var lam(k): an n^2 x n^2 matrix of expressions.
QMat felder_R_expr(int n, const Expr& x, cplx hbar);
QMat classical_r_expr(int n, const Expr& x);
QMat twisted_r_expr(int n, const Expr& x);
// Trigonometric matrices with z = Var z (spectral) and constant w.
QMat trig_R_expr(RKind kind, int n, const Expr& z, cplx w, cplx q);

// ---------------------------------------------------------------- tensor layouts

// Tensor factors for numeric identities: aux legs first, then an optional
// quantum space; every factor carries a weight table.
struct Layout {
  std::vector<int> dims;
  std::vector<std::vector<std::vector<int>>> weights;
  int n = 0;

  int total() const;
};

Layout aux_layout(int n, int legs, const QuantumSpace* q = nullptr);

// Sum over basis states s of the shift factors of embed(fn(w_s), targets) P_s,
// where w_s is the summed weight of s. This realizes f(lambda + hbar h) for h
// acting on the shift factors.
Mat place_shifted(const Layout& layout, const std::vector<int>& targets, const std::vector<int>& shift_factors,
                  const std::function<Mat(const std::vector<int>&)>& fn);

// Same with an integer multiplier per tensor factor (0 for factors that do not
// shift): w_s = sum_f multipliers[f] * weight_f(s_f).
Mat place_weighted(const Layout& layout, const std::vector<int>& targets, const std::vector<int>& multipliers,
                   const std::function<Mat(const std::vector<int>&)>& fn);

Lambda shifted(const Lambda& lambda, const std::vector<int>& w, cplx step);

// ---------------------------------------------------------------- residual checks

struct CheckOptions {
  int samples = 8;
  std::uint64_t seed = 1;
  SamplingPolicy policy{};
};

ResidualReport dybe_residual(int n, const FelderContext& ctx, const CheckOptions& o);
ResidualReport unitarity_residual(int n, const FelderContext& ctx, const CheckOptions& o);
ResidualReport weight_zero_residual(int n, const FelderContext& ctx, const CheckOptions& o);
ResidualReport dcommute_residual(int n, const FelderContext& ctx, const CheckOptions& o);
// B R(-hbar) = A_2
ResidualReport r_minus_hbar_B_residual(int n, const FelderContext& ctx, const CheckOptions& o);
// R(-hbar) (1 - A_2) = 0
ResidualReport r_minus_hbar_A_residual(int n, const FelderContext& ctx, const CheckOptions& o);

// Richardson extrapolation of (R - 1)/hbar over hbar, hbar/2, hbar/4.
// Polynomial extrapolation to h = 0 through the samples (Neville).
Mat extrapolate(const std::vector<double>& h, const std::vector<Mat>& d);

struct LimitResult {
  double error = 0.0;      // |extrapolate - r|
  double stability = 0.0;  // change of the extrapolate when every step doubles
};
LimitResult classical_limit_at(int n, cplx u, const Lambda& lambda, const FelderContext& ctx,
                               const std::vector<double>& hbars);
ResidualReport classical_limit_residual(int n, const FelderContext& ctx, const CheckOptions& o);
ResidualReport classical_antisymmetry_residual(int n, const FelderContext& ctx, const CheckOptions& o);
ResidualReport cdybe_residual(int n, const FelderContext& ctx, const CheckOptions& o, bool twisted = false);
ResidualReport classical_twist_residual(int n, const FelderContext& ctx, const CheckOptions& o);

// |felder_R - trig_R| at Im tau = im_tau.
double trig_limit_at(int n, double im_tau, const FelderContext& ctx, const CheckOptions& o);
ResidualReport trig_limit_residual(int n, const FelderContext& ctx, const CheckOptions& o);
ResidualReport trig_limit_trend(int n, const FelderContext& ctx, const CheckOptions& o);
ResidualReport trig_fconj_residual(int n, const FelderContext& ctx, const CheckOptions& o);
ResidualReport trig_nondynamical_limit_residual(int n, const FelderContext& ctx, const CheckOptions& o);
ResidualReport trig_dybe_residual(int n, const FelderContext& ctx, const CheckOptions& o);

}  // namespace ellgaudin
