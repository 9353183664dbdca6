#pragma once

#include <memory>

#include "ellgaudin/felder.hpp"

namespace ellgaudin {

// ---------------------------------------------------------------- L-operators

enum class LRole { second_space, inverse };

// L(x; lambda) as a one-leg tensor over the shift ring with quantum space
// `space`; Cartan elements are the diagonal weights of `space`. `build` returns
// coefficients only (no shift monomials).
struct DynamicalLOperator {
  int n = 0;
  QuantumSpace space;
  Ring ring;
  FelderContext ctx;
  std::function<AuxTensor(const Expr&)> build;
  std::shared_ptr<const AuxTensor> at_u;  // build(u)
  std::string label;

  int qdim() const { return space.dim(); }
  // Numeric L(x; lambda) on C^n (x) Q.
  Mat numeric(cplx x, const Lambda& lambda) const;
};

DynamicalLOperator make_lop(int n, QuantumSpace space, const FelderContext& ctx,
                            std::function<AuxTensor(const Expr&, const Ring&)> build, std::string label);

// L(u) = R(u - v; lambda) with one defining site at v, or L(u) = R^{21}(v - u)^{-1}.
DynamicalLOperator lop_from_R(int n, cplx v, const FelderContext& ctx, LRole role = LRole::second_space);
// Identity with a one-dimensional quantum space.
DynamicalLOperator lop_trivial(int n, const FelderContext& ctx);
// L2(u; lambda) L1(u; lambda + hbar h2) on Q1 (x) Q2.
DynamicalLOperator fuse(const DynamicalLOperator& l2, const DynamicalLOperator& l1);
// Ordered fusion of defining sites at vs: L_m ... L_1, each factor shifted by the weights of the later sites.
DynamicalLOperator lop_fused_sites(int n, const std::vector<cplx>& vs, const FelderContext& ctx);

// Weight table (basis -> n-vector) of a quantum space, zero for an empty one.
std::vector<std::vector<int>> weight_table(const QuantumSpace& q, int n);

// ---------------------------------------------------------------- symbolic helpers

// Shifts lambda in the coefficients of entry (r, c) by step * (sum of the
// weights of the column digits on `legs` (1-based) plus, if with_h, the
// quantum column weight).
AuxTensor shift_by_aux_weights(const AuxTensor& t, const std::vector<int>& legs, cplx step, bool with_h = false,
                               const QuantumSpace* space = nullptr);

// e^{-hbar D} on one leg: diag(e^{-hbar d/dlambda_a}).
AuxTensor shift_D(int n, const Ring& ring, int sign = -1);
// e^{k hbar d/du} as a scalar on one leg.
AuxTensor spectral_shift(int n, const Ring& ring, int k, Var x = Var::u);

// Matrix-valued callback on aux^legs (x) Q as an opaque tensor.
AuxTensor opaque_tensor(int n, int legs, const Ring& ring, std::uint16_t mask, OpaqueFn::Callback cb);

// Pointwise inverse with the 1e10 condition guard.
Mat guarded_inverse(const Mat& m, double max_cond = 1e10);

// ---------------------------------------------------------------- Manin matrices and families

// M = e^{-hbar D} L(u) e^{hbar d/du}
AuxTensor manin_from_lop(const DynamicalLOperator& l);
// e^{-hbar d/du} L(u)^{-1} e^{hbar D}
AuxTensor manin_inverse_from_lop(const DynamicalLOperator& l);
// e^{-hbar D} L(x)
AuxTensor lop_D(const DynamicalLOperator& l, const Expr& x);

// LL^{[m,N]} on `total` legs: prod_{i=m+1..N} e^{-hbar D^{(i)}} L^{(i)}(base + hbar(i-m-1)).
AuxTensor L_block(const DynamicalLOperator& l, int m, int N, const Expr& base, int total);

// tr(A^{[0,m]} LL^{[0,m]}(u)); t_0 = 1.
OperatorElem t_m(const DynamicalLOperator& l, int m);
// q_m = tr(A^{[0,m]} M^{(1)} ... M^{(m)}) for a one-leg tensor.
OperatorElem q_m(const AuxTensor& M, int m);
OperatorElem sum_minus_t(const DynamicalLOperator& l);  // sum (-1)^m t_m e^{m hbar d/du}
// L_D(u) L_D(u+hbar) ... L_D(u+(k-1)hbar)
AuxTensor quantum_power(const DynamicalLOperator& l, int k);
AuxTensor power(const AuxTensor& m, int k);

// Fused R row on the first N factors of `layout`: i-major (RprRi) or j-major
// (RprRj) order. Each factor R^{(ij)} sees lambda shifted by hbar times the
// weights of legs i+1..m and j+1..N, plus extra_mult[f] times the weight of
// layout factor f.
enum class RowOrder { i_major, j_major };
Mat fused_R_row(int n, int m, int N, const std::vector<cplx>& us, const std::vector<cplx>& vs, const Lambda& lambda,
                const FelderContext& ctx, RowOrder order, const Layout& layout,
                const std::vector<int>& extra_mult = {});
std::vector<cplx> staircase(cplx base, int count, cplx hbar);

// ---------------------------------------------------------------- residual checks

ResidualReport drll_residual(const DynamicalLOperator& l, const CheckOptions& o);
ResidualReport ehl_residual(const DynamicalLOperator& l, const CheckOptions& o);
ResidualReport rllsym_residual(const DynamicalLOperator& l, const CheckOptions& o);
ResidualReport manin_lop_residual(const DynamicalLOperator& l, const CheckOptions& o, bool inverse);
ResidualReport manin_inverse_product_residual(const DynamicalLOperator& l, const CheckOptions& o);
// A^{[m,N]} M^{(m+1)}...M^{(N)} sandwich (and reversed order when reversed).
ResidualReport ammm_residual(const DynamicalLOperator& l, int m, int N, bool reversed, const CheckOptions& o);
// Staircase sandwiches for L (or for L^{-1} in reversed order).
ResidualReport alll_residual(const DynamicalLOperator& l, int m, int N, bool inverse, const CheckOptions& o);
ResidualReport rprr_order_residual(int n, int m, int N, const FelderContext& ctx, const CheckOptions& o);
// AR_ARA_{m,N} and their inverse forms; which = 'm' or 'N'.
ResidualReport ar_ara_residual(int n, int m, int N, char which, bool inverse, const FelderContext& ctx,
                               const CheckOptions& o);
ResidualReport dreleLL_residual(const DynamicalLOperator& l, int m, int N, const CheckOptions& o);
ResidualReport ht_th_residual(const DynamicalLOperator& l, int m, const CheckOptions& o);
ResidualReport eeea_residual(int n, int m);
ResidualReport det_gener_residual(const DynamicalLOperator& l, const CheckOptions& o);
ResidualReport det_trA_residual(const DynamicalLOperator& l, const CheckOptions& o);
ResidualReport tt_tt0_residual(const DynamicalLOperator& l, int m, int s, const CheckOptions& o);
ResidualReport newton_residual(const AuxTensor& M, int up_to_m, const EllipticParams& ep, const CheckOptions& o);
ResidualReport qpow_residual(const DynamicalLOperator& l, int k, const CheckOptions& o);
// Manin property with one site at w: M = L(z) q^{2z d/dz} for L = R_trig, or
// M = G Ltilde(z) G q^{2z d/dz} for Ltilde = Rtilde_trig and the site's Cartan weights.
AuxTensor trig_manin_matrix(int n, cplx w, bool twisted, cplx hbar);
ResidualReport trig_manin_residual(int n, cplx w, bool twisted, const FelderContext& ctx, const CheckOptions& o);

// Evaluates a - b at sampled points of the union of both variable masks.
Residual sampled_compare(const AuxTensor& a, const AuxTensor& b, const EllipticParams& ep, const CheckOptions& o);
Residual sampled_compare(const OperatorElem& a, const OperatorElem& b, const EllipticParams& ep,
                         const CheckOptions& o);

}  // namespace ellgaudin
