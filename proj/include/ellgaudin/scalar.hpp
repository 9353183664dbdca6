#pragma once

#include <atomic>
#include <future>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "ellgaudin/core.hpp"
#include "ellgaudin/report.hpp"
#include "ellgaudin/sampling.hpp"
#include "ellgaudin/theta.hpp"

namespace ellgaudin {

enum class Op : std::uint8_t {
  Const,
  Var,
  Theta,
  Exp,
  Sum,
  Product,
  Quotient,
  Negate,
  IntPow,
  Opaque,
  Subst,  // argument shift applied to a whole subexpression
};

inline constexpr std::uint16_t kOpaqueBit = 1u << 8;

// Per-variable argument shift: additive variables get x + s[x], multiplicative
// ones x * s[x]. Identity entries are 0 and 1 respectively.
struct ShiftMap {
  std::array<cplx, kVarCount> s{};
  std::uint16_t support = 0;

  static ShiftMap identity();
  void set(Var x, cplx amount);  // offset or factor
  Point apply(const Point& p) const;
  ShiftMap then(const ShiftMap& outer) const;  // inner shift followed by outer
  bool is_identity() const { return support == 0; }
};

class OpaqueFn;
struct Node;

// Immutable handle to a shared expression DAG. A default-constructed Expr is the
// structural zero.
class Expr {
 public:
  Expr() = default;
  Expr(cplx c);  // NOLINT(google-explicit-constructor)
  Expr(double c) : Expr(cplx(c)) {}  // NOLINT(google-explicit-constructor)
  explicit Expr(std::shared_ptr<const Node> p) : p_(std::move(p)) {}

  static Expr var(Var x);

  bool is_null() const { return !p_; }
  bool is_zero() const;
  bool is_const() const;
  cplx const_value() const;
  std::uint16_t mask() const;
  const Node* get() const { return p_.get(); }
  const std::shared_ptr<const Node>& ptr() const { return p_; }

 private:
  std::shared_ptr<const Node> p_;
};

struct Node {
  Op op = Op::Const;
  std::uint8_t var = 0;
  int k = 0;  // theta order, integer power, or opaque entry index
  std::uint16_t mask = 0;
  cplx c{};
  std::vector<Expr> args;
  std::shared_ptr<const OpaqueFn> fn;
  ShiftMap shift;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

Expr sum(std::vector<Expr> terms);
Expr product(std::vector<Expr> factors);
Expr theta_of(const Expr& arg, int order = 0);
Expr exp_of(const Expr& arg);
Expr pow_of(const Expr& base, int k);

// theta'(x)/theta(x)
Expr log_deriv_theta(const Expr& arg);

Expr apply_shift(const Expr& e, const ShiftMap& s);
Expr substitute_shift(const Expr& e, Var x, int power, cplx hbar);

// Exact symbolic derivative. Throws CapabilityError on a reachable opaque node.
class DiffCache {
 public:
  Expr get(const Expr& e, Var x);

 private:
  struct Key {
    const Node* n;
    int x;
    bool operator==(const Key& o) const { return n == o.n && x == o.x; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return std::hash<const void*>()(k.n) * 31u + static_cast<std::size_t>(k.x);
    }
  };
  std::unordered_map<Key, Expr, KeyHash> memo_;
  std::vector<Expr> keep_;
};
Expr differentiate(const Expr& e, Var x);

// Memoized evaluation at one base point and any shifted points reached through
// Subst nodes. A denominator factor smaller than den_guard in modulus raises
// SingularityError; with den_guard == 0 only theta factors within 1e-3 of the
// lattice (or exact zeros) do.
class Evaluator {
 public:
  Evaluator(const EllipticParams& ep, const Point& base, double den_guard = 0.0);

  cplx operator()(const Expr& e) {
    retain(e);
    return eval(e.get(), 0);
  }
  cplx at_point(const Expr& e, const Point& p) {
    retain(e);
    return eval(e.get(), intern(p));
  }
  const Point& base() const { return points_[0]; }
  const EllipticParams& params() const { return ep_; }

 private:
  cplx eval(const Node* n, int pid);
  void check_denominator(const Node* d, int pid);
  int intern(const Point& p);
  // Memo keys are node addresses, so evaluated roots stay alive with the memo.
  void retain(const Expr& e) {
    if (e.get() && e.get()->op != Op::Const && e.get()->op != Op::Var) roots_.push_back(e.ptr());
  }

  struct Key {
    const Node* n;
    int pid;
    bool operator==(const Key& o) const { return n == o.n && pid == o.pid; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return std::hash<const void*>()(k.n) ^ (static_cast<std::size_t>(k.pid) * 0x9e3779b97f4a7c15ull);
    }
  };

  EllipticParams ep_;
  double den_guard_;
  std::vector<Point> points_;
  std::unordered_map<Point, int, PointHash> point_ids_;
  std::unordered_map<Key, cplx, KeyHash> memo_;
  std::vector<std::shared_ptr<const Node>> roots_;
};

cplx eval(const Expr& e, const Point& p, const EllipticParams& ep);

// Truncated multivariate Taylor expansions in a chosen set of variables.
class JetLayout {
 public:
  JetLayout(std::vector<Var> vars, int order);

  int order() const { return order_; }
  int nvars() const { return static_cast<int>(vars_.size()); }
  int size() const { return static_cast<int>(index_.size()); }
  int slot(Var x) const { return slot_[idx(x)]; }
  const std::vector<Var>& vars() const { return vars_; }
  const std::vector<int>& multi(int i) const { return index_[i]; }
  int degree(int i) const { return degree_[i]; }
  // -1 if total degree exceeds the order.
  int find(const std::vector<int>& alpha) const;
  std::uint16_t mask() const { return mask_; }

  struct Triple {
    int a, b, c;
  };
  const std::vector<Triple>& products() const { return products_; }

 private:
  std::vector<Var> vars_;
  int order_;
  std::array<int, kVarCount> slot_{};
  std::vector<std::vector<int>> index_;
  std::vector<int> degree_;
  std::vector<int> lookup_;
  std::vector<Triple> products_;
  std::uint16_t mask_ = 0;
};

// Taylor coefficients (not derivatives): c[i] multiplies prod t^alpha_i.
// Size 1 means a constant.
struct Jet {
  std::vector<cplx> c;
  cplx value() const { return c[0]; }
};

class JetEvaluator {
 public:
  JetEvaluator(const EllipticParams& ep, const Point& base, std::shared_ptr<const JetLayout> layout,
               double den_guard = 0.0);

  const Jet& operator()(const Expr& e);
  // d^alpha e at the base point.
  cplx derivative(const Expr& e, const std::vector<int>& alpha);
  const JetLayout& layout() const { return *layout_; }

 private:
  const Jet& eval(const Node* n, int pid);
  void check_denominator(const Node* d, int pid);
  int intern(const Point& p);

  Jet mul(const Jet& a, const Jet& b) const;
  Jet add(const Jet& a, const Jet& b, cplx sb = 1.0) const;
  Jet compose(const std::vector<cplx>& taylor, const Jet& g) const;
  void retain(const Expr& e) {
    if (e.get()) roots_.push_back(e.ptr());
  }

  struct Key {
    const Node* n;
    int pid;
    bool operator==(const Key& o) const { return n == o.n && pid == o.pid; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return std::hash<const void*>()(k.n) ^ (static_cast<std::size_t>(k.pid) * 0x9e3779b97f4a7c15ull);
    }
  };

  EllipticParams ep_;
  std::shared_ptr<const JetLayout> layout_;
  double den_guard_;
  std::vector<Point> points_;
  std::unordered_map<Point, int, PointHash> point_ids_;
  std::unordered_map<Key, Jet, KeyHash> memo_;
  std::vector<std::shared_ptr<const Node>> roots_;
  Jet scratch_;
};

// A matrix-valued function evaluated once per distinct point and shared by all
// of its entries. Thread-safe; concurrent requests for one point wait for a
// single callback invocation.
class OpaqueFn {
 public:
  using Callback = std::function<Mat(const Point&)>;
  OpaqueFn(int dim, std::uint16_t mask, Callback cb);

  Mat value(const Point& p) const;
  int dim() const { return dim_; }
  std::uint16_t mask() const { return mask_; }
  long calls() const { return calls_.load(); }

 private:
  int dim_;
  std::uint16_t mask_;
  Callback cb_;
  mutable std::mutex mu_;
  mutable std::unordered_map<Point, std::shared_future<Mat>, PointHash> cache_;
  mutable std::atomic<long> calls_{0};
};

// dim*dim entries, row-major.
std::vector<Expr> opaque_matrix_fn(std::shared_ptr<const OpaqueFn> fn);
std::vector<Expr> opaque_matrix_fn(int dim, std::uint16_t mask, OpaqueFn::Callback cb);

ResidualReport expr_equal_numeric(const Expr& a, const Expr& b, const EllipticParams& ep, int samples,
                                  std::uint64_t seed, const SamplingPolicy& pol = {});

}  // namespace ellgaudin
