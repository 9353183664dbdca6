#pragma once

#include <map>

#include "ellgaudin/lops.hpp"

namespace ellgaudin {

// ---------------------------------------------------------------- classical L-operators

// Gaudin L-operator over the diff ring of a quantum space built from sites. With
// `traceless`, every e_kk acts as e_kk - (1/n) sum_l e_ll (in h and in the
// diagonal currents).
struct ClassicalLOperator {
  int n = 0;
  QuantumSpace space;
  bool traceless = false;
  Ring ring;
  EllipticParams ep;
  std::function<AuxTensor(const Expr&)> build;  // L(x; lambda), coefficients only

  int qdim() const { return space.dim(); }
  // Action of e_ij on one site (projected when traceless).
  Mat site_action(int site, int i, int j) const;
  // h_k (projected when traceless).
  Mat cartan(int k) const;
  // Numeric L(x; lambda) on C^n (x) V.
  Mat numeric(cplx x, const Lambda& lambda) const;
};

// e+_ij(x; lambda) on V: the diagonal kernel theta'/theta(x - v_k), the
// off-diagonal kernel theta(x - v_k + lambda_ij)/(theta(x - v_k) theta(lambda_ij)).
QMat half_current(const ClassicalLOperator& l, int i, int j, const Expr& x);

ClassicalLOperator gaudin_L(int n, std::vector<Site> sites, bool traceless, const EllipticParams& ep);

// Sum over sites of (id (x) Pi_k) applied to the twisted classical r-matrix,
// plus sum_{i != j} E_ii theta'(lambda_ij)/theta(lambda_ij) h_j.
AuxTensor twisted_form(const ClassicalLOperator& l, const Expr& x);

// L_D(x) = L(x; lambda) - D
AuxTensor gaudin_LD(const ClassicalLOperator& l, const Expr& x);
// d/dx - D + L(x; lambda), with x one of u, v.
AuxTensor classical_manin(const ClassicalLOperator& l, Var x = Var::u);

// s_m(x) for m = 0..n from det(d/dx - D + L) = sum s_m (d/dx)^{n-m}.
std::vector<OperatorElem> char_poly_classical(const ClassicalLOperator& l, Var x = Var::u);
// Reassembles sum_m s_m (d/dx)^{n-m}.
OperatorElem char_poly_total(const std::vector<OperatorElem>& s, Var x, int n);

// Orthogonal projector onto the joint kernel of the h_k.
struct ZeroWeight {
  Mat projector;
  int dim = 0;
};
ZeroWeight zero_weight_projector(const QuantumSpace& space, bool traceless);

// L_D^{[k]} by the recursion L_D^{[k+1]} = L_D L_D^{[k]} + d/dx L_D^{[k]}.
AuxTensor classical_quantum_power(const ClassicalLOperator& l, int k, Var x = Var::u);
// L_D L_D^{[k-1]}
AuxTensor simplified_power(const ClassicalLOperator& l, int k, Var x = Var::u);

// ---------------------------------------------------------------- commutators on W

// Max over normal-form monomials of ||[a, b]_mu P|| for elements whose
// monomials only involve d/dlambda; coefficients are differentiated through
// lambda-jets at the point. Scale: the largest coefficient of a b or b a.
Residual commutator_on_subspace(const OperatorElem& a, const OperatorElem& b, const Point& p, const Mat& P,
                                const EllipticParams& ep, int nlambda, double den_guard = 0.0);

// ---------------------------------------------------------------- residual checks

ResidualReport half_current_residue_residual(const ClassicalLOperator& l, int i, int j);
ResidualReport gaudin_drll_residual(const ClassicalLOperator& l, const CheckOptions& o);
ResidualReport gaudin_ehl_residual(const ClassicalLOperator& l, const CheckOptions& o);
// (L(u) - 1)/hbar extrapolated to hbar = 0 against the Gaudin L of the same
// defining sites. `stability` is folded into the report as a second residual.
struct ClassicalLimitReport {
  ResidualReport report;
  double error = 0.0;
  double stability = 0.0;
};
ClassicalLimitReport gaudin_classical_limit(const std::vector<cplx>& vs, int n, const FelderContext& ctx,
                                            const CheckOptions& o);
ResidualReport classical_manin_residual(const ClassicalLOperator& l, const CheckOptions& o);
ResidualReport cartan_residual_s(const ClassicalLOperator& l, int m, const CheckOptions& o);
// Off-weight-block entries of every coefficient of every s_m.
ResidualReport weight_block_residual(const ClassicalLOperator& l, const CheckOptions& o);
// [s_m(u), s_l(v)] P_W for every listed pair.
ResidualReport commutativity_on_zero_weight(const ClassicalLOperator& l, const std::vector<std::pair<int, int>>& pairs,
                                            const CheckOptions& o);
ResidualReport twisted_gaudin_residual(const ClassicalLOperator& l, const CheckOptions& o);
ResidualReport classical_newton_residual(const ClassicalLOperator& l, const CheckOptions& o);
// M^k = sum_j binom(k, j) L_D^{[j]} d^{k-j}/du^{k-j} for k <= max_k.
ResidualReport classical_qpow_residual(const ClassicalLOperator& l, int max_k, const CheckOptions& o);
// q_n rebuilt from traces of M^k by Newton recursion equals det M.
ResidualReport newton_reconstruction_residual(const ClassicalLOperator& l, const CheckOptions& o);
// [tr L_D^{[k]}(u), tr L_D^{[m]}(v)] P_W for k, m <= max_k, and
// [tr L_D(u)^2, s_m(v)] P_W.
ResidualReport traced_powers_commute_residual(const ClassicalLOperator& l, int max_k, const CheckOptions& o);

// ---------------------------------------------------------------- sl2

// Single dynamical variable lambda = lambda_1 - lambda_2, held in Var l1.
struct Sl2Forms {
  OperatorElem first;       // (d - h+/2)^2 + d/du h+/2 + e+ f+
  OperatorElem symmetric;   // (d - h+/2)^2 + (e+ f+ + f+ e+)/2
  OperatorElem h_coeff;     // theta'(lambda)/theta(lambda) h, the d/du coefficient up to sign
};
// Defining sites of C^2 with the traceless projection; the spectral variable is x.
Sl2Forms sl2_generating_function(const std::vector<cplx>& vs, const EllipticParams& ep, Var x = Var::u);
ResidualReport sl2_forms_residual(const std::vector<cplx>& vs, const EllipticParams& ep, const CheckOptions& o);
ResidualReport sl2_commutation_residual(const std::vector<cplx>& vs, const EllipticParams& ep, const CheckOptions& o);
// General n = 2 pipeline restricted to lambda = lambda_1 - lambda_2 against
// d^2/du^2 - theta'/theta h d/du - S on W.
ResidualReport sl2_crosscheck_residual(const std::vector<cplx>& vs, const EllipticParams& ep, const CheckOptions& o);

}  // namespace ellgaudin
