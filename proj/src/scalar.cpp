#include "ellgaudin/scalar.hpp"

#include <cmath>

namespace ellgaudin {

std::string var_name(Var x) {
  switch (x) {
    case Var::u: return "u";
    case Var::v: return "v";
    case Var::z: return "z";
    case Var::w: return "w";
    default: return "lambda" + std::to_string(idx(x) - 3);
  }
}

// ---------------------------------------------------------------- ShiftMap

ShiftMap ShiftMap::identity() {
  ShiftMap m;
  for (int i = 0; i < kVarCount; ++i) m.s[i] = is_multiplicative(i) ? cplx(1.0) : cplx(0.0);
  return m;
}

void ShiftMap::set(Var x, cplx amount) {
  s[idx(x)] = amount;
  const bool ident = is_multiplicative(x) ? amount == cplx(1.0) : amount == cplx(0.0);
  if (ident)
    support &= static_cast<std::uint16_t>(~bit(x));
  else
    support |= bit(x);
}

Point ShiftMap::apply(const Point& p) const {
  Point q = p;
  for (int i = 0; i < kVarCount; ++i) {
    if (!(support & (1u << i))) continue;
    if (is_multiplicative(i))
      q.x[i] *= s[i];
    else
      q.x[i] += s[i];
  }
  return q;
}

ShiftMap ShiftMap::then(const ShiftMap& outer) const {
  ShiftMap r = *this;
  for (int i = 0; i < kVarCount; ++i) {
    if (!(outer.support & (1u << i))) continue;
    const Var x = static_cast<Var>(i);
    r.set(x, is_multiplicative(i) ? s[i] * outer.s[i] : s[i] + outer.s[i]);
  }
  return r;
}

// ---------------------------------------------------------------- construction

namespace {

Expr make(Node&& n) { return Expr(std::make_shared<const Node>(std::move(n))); }

std::uint16_t union_mask(const std::vector<Expr>& args) {
  std::uint16_t m = 0;
  for (const auto& a : args) m |= a.mask();
  return m;
}

}  // namespace

Expr::Expr(cplx c) {
  if (c == cplx(0.0)) return;
  Node n;
  n.op = Op::Const;
  n.c = c;
  p_ = std::make_shared<const Node>(std::move(n));
}

Expr Expr::var(Var x) {
  Node n;
  n.op = Op::Var;
  n.var = static_cast<std::uint8_t>(idx(x));
  n.mask = bit(x);
  return make(std::move(n));
}

bool Expr::is_zero() const { return !p_ || (p_->op == Op::Const && p_->c == cplx(0.0)); }
bool Expr::is_const() const { return !p_ || p_->op == Op::Const; }
cplx Expr::const_value() const { return p_ ? p_->c : cplx(0.0); }
std::uint16_t Expr::mask() const { return p_ ? p_->mask : 0; }

Expr sum(std::vector<Expr> terms) {
  cplx c = 0.0;
  std::vector<Expr> rest;
  rest.reserve(terms.size());
  for (auto& t : terms) {
    if (t.is_null()) continue;
    if (t.is_const())
      c += t.const_value();
    else
      rest.push_back(std::move(t));
  }
  if (c != cplx(0.0)) rest.emplace_back(c);
  if (rest.empty()) return {};
  if (rest.size() == 1) return rest[0];
  Node n;
  n.op = Op::Sum;
  n.mask = union_mask(rest);
  n.args = std::move(rest);
  return make(std::move(n));
}

Expr product(std::vector<Expr> factors) {
  cplx c = 1.0;
  std::vector<Expr> rest;
  rest.reserve(factors.size());
  for (auto& f : factors) {
    if (f.is_zero()) return {};
    if (f.is_const())
      c *= f.const_value();
    else
      rest.push_back(std::move(f));
  }
  if (c == cplx(0.0)) return {};
  if (rest.empty()) return Expr(c);
  if (c == cplx(-1.0) && rest.size() == 1) return -rest[0];
  if (c != cplx(1.0)) rest.insert(rest.begin(), Expr(c));
  if (rest.size() == 1) return rest[0];
  Node n;
  n.op = Op::Product;
  n.mask = union_mask(rest);
  n.args = std::move(rest);
  return make(std::move(n));
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  return sum({a, b});
}

Expr operator-(const Expr& a) {
  if (a.is_zero()) return {};
  if (a.is_const()) return Expr(-a.const_value());
  if (a.get()->op == Op::Negate) return a.get()->args[0];
  Node n;
  n.op = Op::Negate;
  n.mask = a.mask();
  n.args = {a};
  return make(std::move(n));
}

Expr operator-(const Expr& a, const Expr& b) {
  if (b.is_zero()) return a;
  return a + (-b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_zero() || b.is_zero()) return {};
  return product({a, b});
}

Expr operator/(const Expr& a, const Expr& b) {
  if (b.is_zero()) throw SingularityError("division by structural zero");
  if (a.is_zero()) return {};
  if (b.is_const()) return a * Expr(1.0 / b.const_value());
  Node n;
  n.op = Op::Quotient;
  n.mask = static_cast<std::uint16_t>(a.mask() | b.mask());
  n.args = {a, b};
  return make(std::move(n));
}

Expr theta_of(const Expr& arg, int order) {
  if (order < 0) throw UsageError("negative theta derivative order");
  Node n;
  n.op = Op::Theta;
  n.k = order;
  n.mask = arg.mask();
  n.args = {arg.is_null() ? Expr() : arg};
  return make(std::move(n));
}

Expr exp_of(const Expr& arg) {
  if (arg.is_const()) return Expr(std::exp(arg.const_value()));
  Node n;
  n.op = Op::Exp;
  n.mask = arg.mask();
  n.args = {arg};
  return make(std::move(n));
}

Expr pow_of(const Expr& base, int k) {
  if (k == 0) return Expr(1.0);
  if (k == 1) return base;
  if (base.is_zero()) {
    if (k < 0) throw SingularityError("negative power of structural zero");
    return {};
  }
  if (base.is_const()) return Expr(std::pow(base.const_value(), k));
  Node n;
  n.op = Op::IntPow;
  n.k = k;
  n.mask = base.mask();
  n.args = {base};
  return make(std::move(n));
}

Expr log_deriv_theta(const Expr& arg) { return theta_of(arg, 1) / theta_of(arg, 0); }

Expr apply_shift(const Expr& e, const ShiftMap& s) {
  if (e.is_const()) return e;
  ShiftMap eff = ShiftMap::identity();
  for (int i = 0; i < kVarCount; ++i)
    if ((s.support & e.mask()) & (1u << i)) eff.set(static_cast<Var>(i), s.s[i]);
  if (eff.is_identity()) return e;
  const Node* n = e.get();
  if (n->op == Op::Subst) {
    ShiftMap composed = n->shift.then(eff);
    if (composed.is_identity()) return n->args[0];
    Node m;
    m.op = Op::Subst;
    m.mask = n->mask;
    m.args = n->args;
    m.shift = composed;
    return make(std::move(m));
  }
  Node m;
  m.op = Op::Subst;
  m.mask = n->mask;
  m.args = {e};
  m.shift = eff;
  return make(std::move(m));
}

Expr substitute_shift(const Expr& e, Var x, int power, cplx hbar) {
  ShiftMap s = ShiftMap::identity();
  if (is_multiplicative(x))
    s.set(x, std::exp(2.0 * kI * kPi * hbar * static_cast<double>(power)));
  else
    s.set(x, hbar * static_cast<double>(power));
  return apply_shift(e, s);
}

// ---------------------------------------------------------------- differentiation

Expr DiffCache::get(const Expr& e, Var x) {
  if (!(e.mask() & bit(x))) return {};
  const Node* n = e.get();
  const Key key{n, idx(x)};
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  Expr r;
  switch (n->op) {
    case Op::Const: break;
    case Op::Var: r = Expr(1.0); break;
    case Op::Theta: r = theta_of(n->args[0], n->k + 1) * get(n->args[0], x); break;
    case Op::Exp: r = e * get(n->args[0], x); break;
    case Op::Sum: {
      std::vector<Expr> parts;
      parts.reserve(n->args.size());
      for (const auto& a : n->args) parts.push_back(get(a, x));
      r = sum(std::move(parts));
      break;
    }
    case Op::Product: {
      std::vector<Expr> parts;
      for (std::size_t i = 0; i < n->args.size(); ++i) {
        Expr d = get(n->args[i], x);
        if (d.is_zero()) continue;
        std::vector<Expr> f;
        f.reserve(n->args.size());
        for (std::size_t j = 0; j < n->args.size(); ++j) f.push_back(j == i ? d : n->args[j]);
        parts.push_back(product(std::move(f)));
      }
      r = sum(std::move(parts));
      break;
    }
    case Op::Quotient: {
      const Expr& a = n->args[0];
      const Expr& b = n->args[1];
      Expr da = get(a, x);
      Expr db = get(b, x);
      Expr t1 = da.is_zero() ? Expr() : da / b;
      Expr t2 = db.is_zero() ? Expr() : (a * db) / pow_of(b, 2);
      r = t1 - t2;
      break;
    }
    case Op::Negate: r = -get(n->args[0], x); break;
    case Op::IntPow:
      r = Expr(static_cast<double>(n->k)) * pow_of(n->args[0], n->k - 1) * get(n->args[0], x);
      break;
    case Op::Opaque: throw CapabilityError("opaque coefficient cannot be differentiated");
    case Op::Subst: {
      Expr d = apply_shift(get(n->args[0], x), n->shift);
      if (is_multiplicative(x) && (n->shift.support & bit(x))) d = Expr(n->shift.s[idx(x)]) * d;
      r = d;
      break;
    }
  }
  memo_.emplace(key, r);
  keep_.push_back(e);
  return r;
}

Expr differentiate(const Expr& e, Var x) {
  DiffCache c;
  return c.get(e, x);
}

// ---------------------------------------------------------------- evaluation

namespace {

bool near_lattice(cplx u, const EllipticParams& ep, double dist) {
  const double k = std::round(u.imag() / ep.tau.imag());
  cplx x = u - k * ep.tau;
  x -= std::round(x.real());
  return std::abs(x) < dist;
}

}  // namespace

Evaluator::Evaluator(const EllipticParams& ep, const Point& base, double den_guard)
    : ep_(ep), den_guard_(den_guard) {
  points_.push_back(base);
  point_ids_.emplace(base, 0);
}

int Evaluator::intern(const Point& p) {
  auto [it, fresh] = point_ids_.emplace(p, static_cast<int>(points_.size()));
  if (fresh) points_.push_back(p);
  return it->second;
}

void Evaluator::check_denominator(const Node* d, int pid) {
  switch (d->op) {
    case Op::Product:
      for (const auto& a : d->args) check_denominator(a.get(), pid);
      return;
    case Op::Negate: check_denominator(d->args[0].get(), pid); return;
    case Op::IntPow:
      if (d->k > 0) check_denominator(d->args[0].get(), pid);
      return;
    case Op::Const:
      if (d->c == cplx(0.0)) throw SingularityError("zero denominator");
      return;
    case Op::Theta:
      if (d->k == 0) {
        const cplx v = eval(d, pid);
        if (den_guard_ > 0.0) {
          if (std::abs(v) < den_guard_) throw SingularityError("theta denominator below guard");
        } else if (near_lattice(eval(d->args[0].get(), pid), ep_, 1e-3)) {
          throw SingularityError("theta denominator near a lattice point");
        }
        return;
      }
      [[fallthrough]];
    default: {
      const cplx v = eval(d, pid);
      if (std::abs(v) < std::max(den_guard_, 1e-300)) throw SingularityError("denominator below guard");
    }
  }
}

cplx Evaluator::eval(const Node* n, int pid) {
  if (!n) return 0.0;
  switch (n->op) {
    case Op::Const: return n->c;
    case Op::Var: return points_[pid].x[n->var];
    default: break;
  }
  const Key key{n, pid};
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  cplx r = 0.0;
  switch (n->op) {
    case Op::Theta: {
      const cplx a = eval(n->args[0].get(), pid);
      if (n->k == 0) {
        r = theta(a, ep_);
      } else {
        std::vector<cplx> d(static_cast<std::size_t>(n->k) + 1);
        theta_derivatives(a, n->k, ep_, d.data());
        r = d[n->k];
      }
      break;
    }
    case Op::Exp: r = std::exp(eval(n->args[0].get(), pid)); break;
    case Op::Sum:
      for (const auto& a : n->args) r += eval(a.get(), pid);
      break;
    case Op::Product:
      r = 1.0;
      for (const auto& a : n->args) r *= eval(a.get(), pid);
      break;
    case Op::Quotient:
      check_denominator(n->args[1].get(), pid);
      r = eval(n->args[0].get(), pid) / eval(n->args[1].get(), pid);
      break;
    case Op::Negate: r = -eval(n->args[0].get(), pid); break;
    case Op::IntPow: {
      const cplx b = eval(n->args[0].get(), pid);
      if (n->k < 0 && b == cplx(0.0)) throw SingularityError("negative power of zero");
      r = std::pow(b, n->k);
      break;
    }
    case Op::Opaque: {
      // Copy the point before the callback may re-enter interning.
      const Point p = points_[pid].masked(n->fn->mask());
      const int d = n->fn->dim();
      r = n->fn->value(p)(n->k / d, n->k % d);
      break;
    }
    case Op::Subst: {
      const Point p = n->shift.apply(points_[pid]);
      r = eval(n->args[0].get(), intern(p));
      break;
    }
    default: break;
  }
  memo_.emplace(key, r);
  return r;
}

cplx eval(const Expr& e, const Point& p, const EllipticParams& ep) {
  Evaluator ev(ep, p);
  return ev(e);
}

// ---------------------------------------------------------------- jets

JetLayout::JetLayout(std::vector<Var> vars, int order) : vars_(std::move(vars)), order_(order) {
  slot_.fill(-1);
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    slot_[idx(vars_[i])] = static_cast<int>(i);
    mask_ |= bit(vars_[i]);
  }
  const int nv = nvars();
  // Enumerate multi-indices by total degree.
  std::vector<int> cur(nv, 0);
  int radix = order + 1;
  int total = 1;
  for (int i = 0; i < nv; ++i) total *= radix;
  lookup_.assign(total, -1);
  for (int deg = 0; deg <= order; ++deg) {
    for (int code = 0; code < total; ++code) {
      int c = code, s = 0;
      std::vector<int> a(nv);
      for (int i = 0; i < nv; ++i) {
        a[i] = c % radix;
        c /= radix;
        s += a[i];
      }
      if (s != deg) continue;
      lookup_[code] = static_cast<int>(index_.size());
      index_.push_back(a);
      degree_.push_back(deg);
    }
  }
  for (int i = 0; i < size(); ++i) {
    for (int j = 0; j < size(); ++j) {
      if (degree_[i] + degree_[j] > order) continue;
      std::vector<int> s(nv);
      for (int t = 0; t < nv; ++t) s[t] = index_[i][t] + index_[j][t];
      products_.push_back({i, j, find(s)});
    }
  }
}

int JetLayout::find(const std::vector<int>& alpha) const {
  int code = 0, mul = 1, deg = 0;
  for (int i = 0; i < nvars(); ++i) {
    if (alpha[i] < 0) return -1;
    deg += alpha[i];
    if (alpha[i] > order_) return -1;
    code += alpha[i] * mul;
    mul *= order_ + 1;
  }
  if (deg > order_) return -1;
  return lookup_[code];
}

JetEvaluator::JetEvaluator(const EllipticParams& ep, const Point& base,
                           std::shared_ptr<const JetLayout> layout, double den_guard)
    : ep_(ep), layout_(std::move(layout)), den_guard_(den_guard) {
  points_.push_back(base);
  point_ids_.emplace(base, 0);
}

int JetEvaluator::intern(const Point& p) {
  auto [it, fresh] = point_ids_.emplace(p, static_cast<int>(points_.size()));
  if (fresh) points_.push_back(p);
  return it->second;
}

Jet JetEvaluator::mul(const Jet& a, const Jet& b) const {
  if (a.c.size() == 1) {
    Jet r = b;
    for (auto& x : r.c) x *= a.c[0];
    return r;
  }
  if (b.c.size() == 1) {
    Jet r = a;
    for (auto& x : r.c) x *= b.c[0];
    return r;
  }
  Jet r;
  r.c.assign(layout_->size(), 0.0);
  for (const auto& t : layout_->products()) r.c[t.c] += a.c[t.a] * b.c[t.b];
  return r;
}

Jet JetEvaluator::add(const Jet& a, const Jet& b, cplx sb) const {
  if (a.c.size() >= b.c.size()) {
    Jet r = a;
    for (std::size_t i = 0; i < b.c.size(); ++i) r.c[i] += sb * b.c[i];
    return r;
  }
  Jet r = b;
  for (auto& x : r.c) x *= sb;
  for (std::size_t i = 0; i < a.c.size(); ++i) r.c[i] += a.c[i];
  return r;
}

// sum_k taylor[k] (g - g(0))^k
Jet JetEvaluator::compose(const std::vector<cplx>& taylor, const Jet& g) const {
  Jet r;
  if (g.c.size() == 1) {
    r.c = {taylor[0]};
    return r;
  }
  Jet h = g;
  h.c[0] = 0.0;
  r.c.assign(layout_->size(), 0.0);
  r.c[0] = taylor[0];
  Jet pw = h;
  const int K = layout_->order();
  for (int k = 1; k <= K; ++k) {
    for (std::size_t i = 0; i < r.c.size(); ++i) r.c[i] += taylor[k] * pw.c[i];
    if (k < K) pw = mul(pw, h);
  }
  return r;
}

void JetEvaluator::check_denominator(const Node* d, int pid) {
  switch (d->op) {
    case Op::Product:
      for (const auto& a : d->args) check_denominator(a.get(), pid);
      return;
    case Op::Negate: check_denominator(d->args[0].get(), pid); return;
    case Op::IntPow:
      if (d->k > 0) check_denominator(d->args[0].get(), pid);
      return;
    case Op::Const:
      if (d->c == cplx(0.0)) throw SingularityError("zero denominator");
      return;
    case Op::Theta:
      if (d->k == 0) {
        const cplx v = eval(d, pid).value();
        if (den_guard_ > 0.0) {
          if (std::abs(v) < den_guard_) throw SingularityError("theta denominator below guard");
        } else if (near_lattice(eval(d->args[0].get(), pid).value(), ep_, 1e-3)) {
          throw SingularityError("theta denominator near a lattice point");
        }
        return;
      }
      [[fallthrough]];
    default: {
      const cplx v = eval(d, pid).value();
      if (std::abs(v) < std::max(den_guard_, 1e-300)) throw SingularityError("denominator below guard");
    }
  }
}

const Jet& JetEvaluator::operator()(const Expr& e) {
  if (e.is_null()) {
    scratch_.c = {0.0};
    return scratch_;
  }
  retain(e);
  return eval(e.get(), 0);
}

cplx JetEvaluator::derivative(const Expr& e, const std::vector<int>& alpha) {
  const Jet& j = (*this)(e);
  const int i = layout_->find(alpha);
  if (i < 0) throw UsageError("derivative order exceeds jet order");
  if (static_cast<std::size_t>(i) >= j.c.size()) return 0.0;
  double fact = 1.0;
  for (int a : alpha)
    for (int t = 2; t <= a; ++t) fact *= t;
  return j.c[i] * fact;
}

const Jet& JetEvaluator::eval(const Node* n, int pid) {
  const Key key{n, pid};
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  const int K = layout_->order();
  Jet r;
  switch (n->op) {
    case Op::Const: r.c = {n->c}; break;
    case Op::Var: {
      const int s = layout_->slot(static_cast<Var>(n->var));
      if (s < 0 || K == 0) {
        r.c = {points_[pid].x[n->var]};
      } else {
        r.c.assign(layout_->size(), 0.0);
        r.c[0] = points_[pid].x[n->var];
        std::vector<int> a(layout_->nvars(), 0);
        a[s] = 1;
        r.c[layout_->find(a)] = 1.0;
      }
      break;
    }
    case Op::Theta: {
      const Jet g = eval(n->args[0].get(), pid);
      const int need = g.c.size() == 1 ? 0 : K;
      std::vector<cplx> d(static_cast<std::size_t>(n->k + need) + 1);
      theta_derivatives(g.c[0], n->k + need, ep_, d.data());
      std::vector<cplx> taylor(static_cast<std::size_t>(K) + 1, 0.0);
      double fact = 1.0;
      for (int j = 0; j <= need; ++j) {
        if (j > 0) fact *= j;
        taylor[j] = d[n->k + j] / fact;
      }
      r = compose(taylor, g);
      break;
    }
    case Op::Exp: {
      const Jet g = eval(n->args[0].get(), pid);
      std::vector<cplx> taylor(static_cast<std::size_t>(K) + 1);
      const cplx e0 = std::exp(g.c[0]);
      double fact = 1.0;
      for (int j = 0; j <= K; ++j) {
        if (j > 0) fact *= j;
        taylor[j] = e0 / fact;
      }
      r = compose(taylor, g);
      break;
    }
    case Op::Sum: {
      r.c = {0.0};
      for (const auto& a : n->args) r = add(r, eval(a.get(), pid));
      break;
    }
    case Op::Product: {
      r.c = {1.0};
      for (const auto& a : n->args) r = mul(r, eval(a.get(), pid));
      break;
    }
    case Op::Quotient: {
      check_denominator(n->args[1].get(), pid);
      const Jet b = eval(n->args[1].get(), pid);
      std::vector<cplx> taylor(static_cast<std::size_t>(K) + 1);
      const cplx inv = 1.0 / b.c[0];
      cplx pw = inv;
      for (int j = 0; j <= K; ++j) {
        taylor[j] = pw;
        pw *= -inv;
      }
      const Jet a = eval(n->args[0].get(), pid);
      r = mul(a, compose(taylor, b));
      break;
    }
    case Op::Negate: {
      r = eval(n->args[0].get(), pid);
      for (auto& x : r.c) x = -x;
      break;
    }
    case Op::IntPow: {
      const Jet b = eval(n->args[0].get(), pid);
      const cplx b0 = b.c[0];
      if (n->k < 0 && b0 == cplx(0.0)) throw SingularityError("negative power of zero");
      std::vector<cplx> taylor(static_cast<std::size_t>(K) + 1, 0.0);
      // generalized binomial: (b0 + h)^k = sum_j C(k,j) b0^{k-j} h^j
      double binom = 1.0;
      for (int j = 0; j <= K; ++j) {
        if (n->k >= 0 && j > n->k) break;
        taylor[j] = binom * std::pow(b0, n->k - j);
        binom = binom * (n->k - j) / (j + 1);
      }
      r = compose(taylor, b);
      break;
    }
    case Op::Opaque: {
      if (n->fn->mask() & layout_->mask() && K > 0)
        throw CapabilityError("opaque coefficient cannot be expanded in a differentiated variable");
      const Point p = points_[pid].masked(n->fn->mask());
      const int d = n->fn->dim();
      r.c = {n->fn->value(p)(n->k / d, n->k % d)};
      break;
    }
    case Op::Subst: {
      const Point p = n->shift.apply(points_[pid]);
      r = eval(n->args[0].get(), intern(p));
      if (r.c.size() > 1) {
        for (Var x : layout_->vars()) {
          if (!is_multiplicative(x) || !(n->shift.support & bit(x))) continue;
          const int s = layout_->slot(x);
          for (int i = 0; i < layout_->size(); ++i)
            r.c[i] *= std::pow(n->shift.s[idx(x)], layout_->multi(i)[s]);
        }
      }
      break;
    }
  }
  auto [it, ok] = memo_.emplace(key, std::move(r));
  (void)ok;
  return it->second;
}

// ---------------------------------------------------------------- opaque

OpaqueFn::OpaqueFn(int dim, std::uint16_t mask, Callback cb) : dim_(dim), mask_(mask), cb_(std::move(cb)) {
  if (dim < 1) throw UsageError("opaque matrix dimension must be positive");
}

Mat OpaqueFn::value(const Point& p) const {
  std::shared_future<Mat> fut;
  std::promise<Mat> prom;
  bool owner = false;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(p);
    if (it == cache_.end()) {
      fut = prom.get_future().share();
      cache_.emplace(p, fut);
      owner = true;
    } else {
      fut = it->second;
    }
  }
  if (owner) {
    ++calls_;
    try {
      Mat m = cb_(p);
      if (m.rows() != dim_ || m.cols() != dim_) throw UsageError("opaque callback returned wrong shape");
      prom.set_value(std::move(m));
    } catch (const SingularityError&) {
      prom.set_exception(std::current_exception());
    } catch (const std::exception& e) {
      prom.set_exception(std::make_exception_ptr(SingularityError(std::string("opaque callback failed: ") + e.what())));
    }
  }
  return fut.get();
}

std::vector<Expr> opaque_matrix_fn(std::shared_ptr<const OpaqueFn> fn) {
  const int d = fn->dim();
  std::vector<Expr> out;
  out.reserve(static_cast<std::size_t>(d) * d);
  for (int i = 0; i < d * d; ++i) {
    Node n;
    n.op = Op::Opaque;
    n.k = i;
    n.mask = static_cast<std::uint16_t>(fn->mask() | kOpaqueBit);
    n.fn = fn;
    out.push_back(Expr(std::make_shared<const Node>(std::move(n))));
  }
  return out;
}

std::vector<Expr> opaque_matrix_fn(int dim, std::uint16_t mask, OpaqueFn::Callback cb) {
  return opaque_matrix_fn(std::make_shared<const OpaqueFn>(dim, mask, std::move(cb)));
}

ResidualReport expr_equal_numeric(const Expr& a, const Expr& b, const EllipticParams& ep, int samples,
                                  std::uint64_t seed, const SamplingPolicy& pol) {
  ResidualReport rep;
  rep.identity_id = "expr_equal";
  rep.seed = seed;
  Rng rng(seed);
  const std::uint16_t mask = static_cast<std::uint16_t>((a.mask() | b.mask()) & 0xff);
  Residual r = sample_residual(samples, rng, pol, mask, [&](const Point& p) {
    Evaluator ev(ep, p, pol.den_guard);
    Residual one;
    one.add_scalar(ev(a), ev(b));
    return one;
  });
  rep.samples_used = samples;
  rep.set(r);
  return rep;
}

}  // namespace ellgaudin
