#pragma once

#include <map>
#include <memory>
#include <vector>

#include "ellgaudin/report.hpp"
#include "ellgaudin/sampling.hpp"
#include "ellgaudin/scalar.hpp"

namespace ellgaudin {

// ---------------------------------------------------------------- quantum space

enum class SiteKind { defining, dual };

struct Site {
  SiteKind kind = SiteKind::defining;
  int dim = 0;
  cplx eval_point{};
  std::vector<std::vector<int>> weights;  // weights[basis][k]
};

Site defining_site(int n, cplx eval_point);
Site dual_site(int n, cplx eval_point);

class QuantumSpace {
 public:
  QuantumSpace() = default;  // one-dimensional, no sites
  QuantumSpace(int n, std::vector<Site> sites);

  int rank() const { return n_; }
  int dim() const { return dim_; }
  const std::vector<Site>& sites() const { return sites_; }
  // Weight of a tensor basis vector (first site is the most significant digit).
  const std::vector<int>& weight(int basis) const { return weights_[basis]; }
  std::vector<int> digits(int basis) const;

  // Tensor product, this space first.
  QuantumSpace tensor(const QuantumSpace& other) const;

  // rho(e_ij) on the whole space: sum over sites of the site action.
  Mat gl_action(int i, int j) const;
  Mat gl_action_on_site(int site, int i, int j) const;
  // Cartan element h_k as a diagonal matrix.
  Mat cartan(int k) const;

 private:
  int n_ = 0;
  int dim_ = 1;
  std::vector<Site> sites_;
  std::vector<std::vector<int>> weights_;
};

// ---------------------------------------------------------------- monomials

// Exponents of e^{hbar d/dx} (shift flavor) or d/dx (diff flavor) per variable.
struct Monomial {
  std::array<std::int8_t, kVarCount> e{};

  static Monomial of(Var x, int power = 1);
  Monomial operator+(const Monomial& o) const;
  Monomial operator-(const Monomial& o) const;
  bool operator<(const Monomial& o) const { return e < o.e; }
  bool operator==(const Monomial& o) const { return e == o.e; }
  bool is_one() const;
  int degree() const;
  int operator[](Var x) const { return e[idx(x)]; }
  std::string str() const;
};

// ---------------------------------------------------------------- coefficients

// Dense dim x dim matrix over ScalarExpr. An empty entry vector is zero.
class QMat {
 public:
  QMat() = default;
  explicit QMat(int dim) : dim_(dim) {}

  static QMat identity(int dim, const Expr& scale = Expr(1.0));
  static QMat from_numeric(const Mat& m, const Expr& scale = Expr(1.0));

  int dim() const { return dim_; }
  bool is_zero() const;
  const Expr& at(int r, int c) const;
  void set(int r, int c, Expr v);
  const std::vector<Expr>& entries() const { return e_; }

  QMat operator+(const QMat& o) const;
  QMat operator-(const QMat& o) const;
  QMat operator*(const QMat& o) const;
  QMat scaled(const Expr& s) const;
  QMat map(const std::function<Expr(const Expr&)>& f) const;
  std::uint16_t mask() const;

  Mat eval(Evaluator& ev) const;

 private:
  int dim_ = 0;
  std::vector<Expr> e_;
  static const Expr kZero;
};

// lambda_k -> lambda_k + hbar * weight_k(column basis vector), so the shift
// acts as if h stood to the right of the coefficient.
QMat weight_shift_substitute(const QMat& f, const QuantumSpace& space, cplx hbar, int sign = 1);

// ---------------------------------------------------------------- ring elements

enum class Flavor { shift, diff };

struct RingSpec {
  Flavor flavor = Flavor::shift;
  int qdim = 1;
  cplx hbar{0.137, 0.071};
};
using Ring = std::shared_ptr<const RingSpec>;

Ring make_ring(Flavor f, int qdim, cplx hbar);

// Coefficient-left normal form: sum over monomials of QMat * monomial.
class OperatorElem {
 public:
  OperatorElem() = default;
  explicit OperatorElem(Ring r) : ring_(std::move(r)) {}

  static OperatorElem scalar(Ring r, const Expr& c);
  static OperatorElem coeff(Ring r, QMat m);
  static OperatorElem monomial(Ring r, const Monomial& m, const Expr& c = Expr(1.0));

  const Ring& ring() const { return ring_; }
  const std::map<Monomial, QMat>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  QMat coefficient(const Monomial& m) const;

  void add_term(const Monomial& m, const QMat& c);

  OperatorElem operator+(const OperatorElem& o) const;
  OperatorElem operator-(const OperatorElem& o) const;
  OperatorElem operator-() const;
  OperatorElem scaled(const Expr& s) const;  // coefficient-side scalar
  // Applies a ScalarExpr map to every coefficient entry.
  OperatorElem map_coefficients(const std::function<QMat(const QMat&)>& f) const;

  std::map<Monomial, Mat> eval(Evaluator& ev) const;

 private:
  Ring ring_;
  std::map<Monomial, QMat> terms_;
};

OperatorElem ring_mul(const OperatorElem& a, const OperatorElem& b);
inline OperatorElem operator*(const OperatorElem& a, const OperatorElem& b) { return ring_mul(a, b); }
OperatorElem commutator(const OperatorElem& a, const OperatorElem& b);

// Shift of a coefficient past a monomial, as used by the shift-flavor product.
Expr shift_by_monomial(const Expr& e, const Monomial& m, const RingSpec& ring);

// Drops monomials whose coefficient is below rel_tol (relative to the largest
// coefficient) at 8 independent sample points.
OperatorElem prune(const OperatorElem& a, const EllipticParams& ep, std::uint64_t seed, double rel_tol = 1e-13);

// Drops derivative caches kept across products.
void clear_diff_cache();

// ---------------------------------------------------------------- auxiliary tensors

// Element of End(C^n)^{legs} (x) OperatorElem. Entry (r, c) with r, c in
// [0, n^legs); leg 1 is the most significant digit.
class AuxTensor {
 public:
  AuxTensor() = default;
  AuxTensor(int n, int legs, Ring ring);

  static AuxTensor identity(int n, int legs, Ring ring);
  static AuxTensor from_numeric(const Mat& m, int n, int legs, Ring ring);
  // Diagonal e^{-hbar D} style factor: entry (a,a) = monomial(a) on one leg.
  static AuxTensor diagonal(int n, Ring ring, const std::function<OperatorElem(int)>& entry);

  int n() const { return n_; }
  int legs() const { return legs_; }
  int size() const { return size_; }
  const Ring& ring() const { return ring_; }

  OperatorElem& at(int r, int c) { return entries_[static_cast<std::size_t>(r) * size_ + c]; }
  const OperatorElem& at(int r, int c) const { return entries_[static_cast<std::size_t>(r) * size_ + c]; }

  AuxTensor operator+(const AuxTensor& o) const;
  AuxTensor operator-(const AuxTensor& o) const;
  AuxTensor operator*(const AuxTensor& o) const;
  AuxTensor scaled(const Expr& s) const;
  AuxTensor map_entries(const std::function<OperatorElem(const OperatorElem&)>& f) const;

  // Sum over monomials; each value is an (n^legs * qdim) square matrix in
  // aux (x) quantum order.
  std::map<Monomial, Mat> eval(Evaluator& ev) const;

 private:
  int n_ = 0;
  int legs_ = 0;
  int size_ = 1;
  Ring ring_;
  std::vector<OperatorElem> entries_;
};

// Places t's legs onto target_legs (1-based, any order) of a total_legs tensor.
AuxTensor embed_legs(const AuxTensor& t, const std::vector<int>& target_legs, int total_legs);
AuxTensor partial_trace(const AuxTensor& t, const std::vector<int>& legs);
OperatorElem trace(const AuxTensor& t);
OperatorElem column_det(const AuxTensor& t);

// ---------------------------------------------------------------- numeric tensor calculus

// Operator on the tensor factors `targets` (in that order) of a space with
// factor dimensions `dims`, extended by identity elsewhere.
Mat embed_numeric(const Mat& x, const std::vector<int>& dims, const std::vector<int>& targets);
// pi(sigma) on (C^n)^{m}: sends e_{i_1} (x) ... (x) e_{i_m} to the vector whose
// slot sigma(k) holds i_k.
Mat permutation_operator(int n, const std::vector<int>& sigma);
Mat antisymmetrizer(int m, int n);
Mat antisymmetrizer_recursive(int m, int n);
// A^{[k,m]}: antisymmetrizer on legs k+1..m of `total` legs.
Mat antisymmetrizer_on(int k, int m, int n, int total);

// ---------------------------------------------------------------- comparisons

// Max over monomials of ||a_mu - b_mu|| / (1 + max(||a_mu||, ||b_mu||)).
Residual compare(const std::map<Monomial, Mat>& a, const std::map<Monomial, Mat>& b);
// Same, for symbolic tensors evaluated at a shared point.
Residual compare_at(const AuxTensor& a, const AuxTensor& b, Evaluator& ev);
Residual compare_at(const OperatorElem& a, const OperatorElem& b, Evaluator& ev);

// Manin relations for a one-leg tensor: the antisymmetrizer sandwich and the
// 2x2 relations, returned separately.
struct ManinResidual {
  Residual sandwich;
  Residual relations;
};
ManinResidual manin_residual_at(const AuxTensor& m, Evaluator& ev);
ResidualReport manin_check(const AuxTensor& m, const EllipticParams& ep, int samples, std::uint64_t seed,
                           const SamplingPolicy& pol = {});

std::uint16_t variable_mask(const AuxTensor& t);
std::uint16_t variable_mask(const OperatorElem& e);

}  // namespace ellgaudin
