#include "ellgaudin/opalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ellgaudin {

// ---------------------------------------------------------------- sites

Site defining_site(int n, cplx eval_point) {
  Site s;
  s.kind = SiteKind::defining;
  s.dim = n;
  s.eval_point = eval_point;
  s.weights.assign(n, std::vector<int>(n, 0));
  for (int a = 0; a < n; ++a) s.weights[a][a] = 1;
  return s;
}

Site dual_site(int n, cplx eval_point) {
  Site s = defining_site(n, eval_point);
  s.kind = SiteKind::dual;
  for (int a = 0; a < n; ++a) s.weights[a][a] = -1;
  return s;
}

QuantumSpace::QuantumSpace(int n, std::vector<Site> sites) : n_(n), sites_(std::move(sites)) {
  if (n < 1 || n > kMaxRank) throw UsageError("rank must be in 1..4");
  dim_ = 1;
  for (const auto& s : sites_) {
    if (s.dim != n || static_cast<int>(s.weights.size()) != n) throw UsageError("site dimension must equal the rank");
    dim_ *= s.dim;
  }
  weights_.assign(dim_, std::vector<int>(n, 0));
  for (int b = 0; b < dim_; ++b) {
    const auto d = digits(b);
    for (std::size_t s = 0; s < sites_.size(); ++s)
      for (int k = 0; k < n; ++k) weights_[b][k] += sites_[s].weights[d[s]][k];
  }
}

std::vector<int> QuantumSpace::digits(int basis) const {
  std::vector<int> d(sites_.size());
  for (int s = static_cast<int>(sites_.size()) - 1; s >= 0; --s) {
    d[s] = basis % sites_[s].dim;
    basis /= sites_[s].dim;
  }
  return d;
}

QuantumSpace QuantumSpace::tensor(const QuantumSpace& other) const {
  const int n = n_ ? n_ : other.n_;
  if (n_ && other.n_ && n_ != other.n_) throw UsageError("rank mismatch in tensor product");
  if (!n) return {};
  auto s = sites_;
  s.insert(s.end(), other.sites_.begin(), other.sites_.end());
  return QuantumSpace(n, std::move(s));
}

Mat QuantumSpace::gl_action_on_site(int site, int i, int j) const {
  const Site& s = sites_.at(site);
  Mat local = Mat::Zero(s.dim, s.dim);
  if (s.kind == SiteKind::defining)
    local(i, j) = 1.0;
  else
    local(j, i) = -1.0;
  std::vector<int> dims;
  for (const auto& t : sites_) dims.push_back(t.dim);
  return embed_numeric(local, dims, {site});
}

Mat QuantumSpace::gl_action(int i, int j) const {
  Mat m = Mat::Zero(dim_, dim_);
  for (std::size_t s = 0; s < sites_.size(); ++s) m += gl_action_on_site(static_cast<int>(s), i, j);
  return m;
}

Mat QuantumSpace::cartan(int k) const {
  Mat m = Mat::Zero(dim_, dim_);
  for (int b = 0; b < dim_; ++b) m(b, b) = n_ ? static_cast<double>(weights_[b][k]) : 0.0;
  return m;
}

// ---------------------------------------------------------------- monomials

Monomial Monomial::of(Var x, int power) {
  Monomial m;
  m.e[idx(x)] = static_cast<std::int8_t>(power);
  return m;
}

Monomial Monomial::operator+(const Monomial& o) const {
  Monomial r;
  for (int i = 0; i < kVarCount; ++i) r.e[i] = static_cast<std::int8_t>(e[i] + o.e[i]);
  return r;
}

Monomial Monomial::operator-(const Monomial& o) const {
  Monomial r;
  for (int i = 0; i < kVarCount; ++i) r.e[i] = static_cast<std::int8_t>(e[i] - o.e[i]);
  return r;
}

bool Monomial::is_one() const {
  return std::all_of(e.begin(), e.end(), [](std::int8_t x) { return x == 0; });
}

int Monomial::degree() const {
  int d = 0;
  for (auto x : e) d += std::abs(x);
  return d;
}

std::string Monomial::str() const {
  std::ostringstream os;
  bool any = false;
  for (int i = 0; i < kVarCount; ++i) {
    if (!e[i]) continue;
    if (any) os << '*';
    os << var_name(static_cast<Var>(i)) << '^' << int(e[i]);
    any = true;
  }
  if (!any) os << '1';
  return os.str();
}

// ---------------------------------------------------------------- QMat

const Expr QMat::kZero{};

QMat QMat::identity(int dim, const Expr& scale) {
  QMat m(dim);
  if (scale.is_zero()) return m;
  for (int i = 0; i < dim; ++i) m.set(i, i, scale);
  return m;
}

QMat QMat::from_numeric(const Mat& x, const Expr& scale) {
  QMat m(static_cast<int>(x.rows()));
  for (int r = 0; r < x.rows(); ++r)
    for (int c = 0; c < x.cols(); ++c)
      if (x(r, c) != cplx(0.0)) m.set(r, c, Expr(x(r, c)) * scale);
  return m;
}

bool QMat::is_zero() const {
  return std::all_of(e_.begin(), e_.end(), [](const Expr& x) { return x.is_zero(); });
}

const Expr& QMat::at(int r, int c) const {
  if (e_.empty()) return kZero;
  return e_[static_cast<std::size_t>(r) * dim_ + c];
}

void QMat::set(int r, int c, Expr v) {
  if (e_.empty()) {
    if (v.is_zero()) return;
    e_.resize(static_cast<std::size_t>(dim_) * dim_);
  }
  e_[static_cast<std::size_t>(r) * dim_ + c] = v.is_zero() ? Expr() : std::move(v);
}

QMat QMat::operator+(const QMat& o) const {
  if (e_.empty()) return o.dim_ ? o : QMat(dim_);
  if (o.e_.empty()) return *this;
  QMat r(dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) r.set(i, j, at(i, j) + o.at(i, j));
  return r;
}

QMat QMat::operator-(const QMat& o) const { return *this + o.scaled(Expr(-1.0)); }

QMat QMat::operator*(const QMat& o) const {
  const int d = std::max(dim_, o.dim_);
  if (e_.empty() || o.e_.empty()) return QMat(d);
  QMat r(d);
  std::vector<Expr> acc;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      acc.clear();
      for (int k = 0; k < d; ++k) {
        const Expr& a = at(i, k);
        if (a.is_zero()) continue;
        const Expr& b = o.at(k, j);
        if (b.is_zero()) continue;
        acc.push_back(a * b);
      }
      if (!acc.empty()) r.set(i, j, sum(acc));
    }
  }
  return r;
}

QMat QMat::scaled(const Expr& s) const {
  if (s.is_zero() || e_.empty()) return QMat(dim_);
  if (s.is_const() && s.const_value() == cplx(1.0)) return *this;
  return map([&](const Expr& x) { return s * x; });
}

QMat QMat::map(const std::function<Expr(const Expr&)>& f) const {
  QMat r(dim_);
  if (e_.empty()) return r;
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j)
      if (!at(i, j).is_zero()) r.set(i, j, f(at(i, j)));
  return r;
}

std::uint16_t QMat::mask() const {
  std::uint16_t m = 0;
  for (const auto& x : e_) m |= x.mask();
  return m;
}

Mat QMat::eval(Evaluator& ev) const {
  Mat m = Mat::Zero(dim_, dim_);
  if (e_.empty()) return m;
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j)
      if (!at(i, j).is_zero()) m(i, j) = ev(at(i, j));
  return m;
}

QMat weight_shift_substitute(const QMat& f, const QuantumSpace& space, cplx hbar, int sign) {
  QMat r(f.dim());
  if (f.is_zero()) return r;
  for (int c = 0; c < f.dim(); ++c) {
    ShiftMap s = ShiftMap::identity();
    if (space.rank())
      for (int k = 0; k < space.rank(); ++k)
        s.set(lam(k), hbar * static_cast<double>(sign * space.weight(c)[k]));
    for (int rr = 0; rr < f.dim(); ++rr)
      if (!f.at(rr, c).is_zero()) r.set(rr, c, apply_shift(f.at(rr, c), s));
  }
  return r;
}

// ---------------------------------------------------------------- ring

Ring make_ring(Flavor f, int qdim, cplx hbar) {
  auto r = std::make_shared<RingSpec>();
  r->flavor = f;
  r->qdim = qdim;
  r->hbar = hbar;
  return r;
}

OperatorElem OperatorElem::scalar(Ring r, const Expr& c) {
  const int d = r->qdim;
  return coeff(std::move(r), QMat::identity(d, c));
}

OperatorElem OperatorElem::coeff(Ring r, QMat m) {
  OperatorElem e(std::move(r));
  e.add_term(Monomial{}, m);
  return e;
}

OperatorElem OperatorElem::monomial(Ring r, const Monomial& m, const Expr& c) {
  OperatorElem e(r);
  e.add_term(m, QMat::identity(r->qdim, c));
  return e;
}

QMat OperatorElem::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  if (it == terms_.end()) return QMat(ring_ ? ring_->qdim : 0);
  return it->second;
}

void OperatorElem::add_term(const Monomial& m, const QMat& c) {
  if (c.is_zero()) return;
  auto it = terms_.find(m);
  if (it == terms_.end()) {
    terms_.emplace(m, c);
    return;
  }
  QMat s = it->second + c;
  if (s.is_zero())
    terms_.erase(it);
  else
    it->second = std::move(s);
}

namespace {

Ring pick_ring(const Ring& a, const Ring& b) {
  if (a && b && a != b && (a->flavor != b->flavor || a->qdim != b->qdim))
    throw UsageError("ring mismatch between operator elements");
  return a ? a : b;
}

}  // namespace

OperatorElem OperatorElem::operator+(const OperatorElem& o) const {
  OperatorElem r(pick_ring(ring_, o.ring_));
  r.terms_ = terms_;
  for (const auto& [m, c] : o.terms_) r.add_term(m, c);
  return r;
}

OperatorElem OperatorElem::operator-() const { return scaled(Expr(-1.0)); }

OperatorElem OperatorElem::operator-(const OperatorElem& o) const { return *this + (-o); }

OperatorElem OperatorElem::scaled(const Expr& s) const {
  OperatorElem r(ring_);
  for (const auto& [m, c] : terms_) r.add_term(m, c.scaled(s));
  return r;
}

OperatorElem OperatorElem::map_coefficients(const std::function<QMat(const QMat&)>& f) const {
  OperatorElem r(ring_);
  for (const auto& [m, c] : terms_) r.add_term(m, f(c));
  return r;
}

std::map<Monomial, Mat> OperatorElem::eval(Evaluator& ev) const {
  std::map<Monomial, Mat> out;
  for (const auto& [m, c] : terms_) out.emplace(m, c.eval(ev));
  return out;
}

Expr shift_by_monomial(const Expr& e, const Monomial& m, const RingSpec& ring) {
  if (m.is_one() || e.is_const()) return e;
  ShiftMap s = ShiftMap::identity();
  for (int i = 0; i < kVarCount; ++i) {
    if (!m.e[i]) continue;
    const Var x = static_cast<Var>(i);
    if (is_multiplicative(x))
      s.set(x, std::exp(2.0 * kI * kPi * ring.hbar * static_cast<double>(m.e[i])));
    else
      s.set(x, ring.hbar * static_cast<double>(m.e[i]));
  }
  return apply_shift(e, s);
}

namespace {

thread_local DiffCache* g_diff = nullptr;

DiffCache& diff_cache() {
  if (!g_diff) g_diff = new DiffCache();
  return *g_diff;
}

Expr derive(const Expr& e, const Monomial& gamma) {
  Expr r = e;
  for (int i = 0; i < kVarCount && !r.is_zero(); ++i)
    for (int k = 0; k < gamma.e[i] && !r.is_zero(); ++k) r = diff_cache().get(r, static_cast<Var>(i));
  return r;
}

double binom(int a, int b) {
  double r = 1.0;
  for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
  return r;
}

// All gamma with 0 <= gamma <= alpha componentwise.
void sub_monomials(const Monomial& alpha, std::vector<Monomial>& out) {
  out.clear();
  out.push_back(Monomial{});
  for (int i = 0; i < kVarCount; ++i) {
    if (alpha.e[i] < 0) throw UsageError("negative derivative exponent");
    const std::size_t base = out.size();
    for (int k = 1; k <= alpha.e[i]; ++k)
      for (std::size_t j = 0; j < base; ++j) {
        Monomial g = out[j];
        g.e[i] = static_cast<std::int8_t>(k);
        out.push_back(g);
      }
  }
}

}  // namespace

void clear_diff_cache() {
  delete g_diff;
  g_diff = nullptr;
}

OperatorElem ring_mul(const OperatorElem& a, const OperatorElem& b) {
  const Ring ring = pick_ring(a.ring(), b.ring());
  OperatorElem c(ring);
  if (a.is_zero() || b.is_zero()) return c;
  if (ring->flavor == Flavor::shift) {
    for (const auto& [alpha, A] : a.terms()) {
      for (const auto& [beta, B] : b.terms()) {
        const QMat shifted = alpha.is_one() ? B : B.map([&](const Expr& x) { return shift_by_monomial(x, alpha, *ring); });
        c.add_term(alpha + beta, A * shifted);
      }
    }
    return c;
  }
  std::vector<Monomial> gammas;
  for (const auto& [alpha, A] : a.terms()) {
    sub_monomials(alpha, gammas);
    for (const auto& [beta, B] : b.terms()) {
      for (const auto& gamma : gammas) {
        double coef = 1.0;
        for (int i = 0; i < kVarCount; ++i) coef *= binom(alpha.e[i], gamma.e[i]);
        const QMat dB = gamma.is_one() ? B : B.map([&](const Expr& x) { return derive(x, gamma); });
        if (dB.is_zero()) continue;
        c.add_term(alpha - gamma + beta, (A * dB).scaled(Expr(coef)));
      }
    }
  }
  return c;
}

OperatorElem commutator(const OperatorElem& a, const OperatorElem& b) { return a * b - b * a; }

std::uint16_t variable_mask(const OperatorElem& e) {
  std::uint16_t m = 0;
  for (const auto& [mono, c] : e.terms()) m |= c.mask();
  return static_cast<std::uint16_t>(m & 0xff);
}

OperatorElem prune(const OperatorElem& a, const EllipticParams& ep, std::uint64_t seed, double rel_tol) {
  if (a.is_zero()) return a;
  Rng rng(seed);
  SamplingPolicy pol;
  const std::uint16_t mask = variable_mask(a);
  std::map<Monomial, double> size;
  for (int s = 0; s < 8; ++s) {
    for (int tries = 0;; ++tries) {
      const Point p = draw_point(rng, pol, mask);
      try {
        Evaluator ev(ep, p, pol.den_guard);
        std::map<Monomial, double> local;
        for (const auto& [m, c] : a.terms()) {
          const Mat v = c.eval(ev);
          local[m] = v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
        }
        for (const auto& [m, v] : local) size[m] = std::max(size[m], v);
        break;
      } catch (const SingularityError&) {
        if (tries + 1 >= pol.max_retries) throw SamplingExhaustedError("pruning could not find regular points");
      }
    }
  }
  double top = 0.0;
  for (const auto& [m, v] : size) top = std::max(top, v);
  OperatorElem r(a.ring());
  for (const auto& [m, c] : a.terms())
    if (size[m] > rel_tol * top) r.add_term(m, c);
  return r;
}

// ---------------------------------------------------------------- aux tensors

namespace {

int ipow(int b, int e) {
  int r = 1;
  while (e-- > 0) r *= b;
  return r;
}

std::vector<int> split(int index, int n, int legs) {
  std::vector<int> d(legs);
  for (int l = legs - 1; l >= 0; --l) {
    d[l] = index % n;
    index /= n;
  }
  return d;
}

int join(const std::vector<int>& d, int n) {
  int r = 0;
  for (int x : d) r = r * n + x;
  return r;
}

}  // namespace

AuxTensor::AuxTensor(int n, int legs, Ring ring) : n_(n), legs_(legs), size_(ipow(n, legs)), ring_(std::move(ring)) {
  entries_.assign(static_cast<std::size_t>(size_) * size_, OperatorElem(ring_));
}

AuxTensor AuxTensor::identity(int n, int legs, Ring ring) {
  AuxTensor t(n, legs, ring);
  for (int i = 0; i < t.size_; ++i) t.at(i, i) = OperatorElem::scalar(ring, Expr(1.0));
  return t;
}

AuxTensor AuxTensor::from_numeric(const Mat& m, int n, int legs, Ring ring) {
  AuxTensor t(n, legs, ring);
  if (m.rows() != t.size_) throw UsageError("numeric matrix does not match leg structure");
  for (int r = 0; r < t.size_; ++r)
    for (int c = 0; c < t.size_; ++c)
      if (m(r, c) != cplx(0.0)) t.at(r, c) = OperatorElem::scalar(ring, Expr(m(r, c)));
  return t;
}

AuxTensor AuxTensor::diagonal(int n, Ring ring, const std::function<OperatorElem(int)>& entry) {
  AuxTensor t(n, 1, ring);
  for (int a = 0; a < n; ++a) t.at(a, a) = entry(a);
  return t;
}

AuxTensor AuxTensor::operator+(const AuxTensor& o) const {
  AuxTensor r = *this;
  for (std::size_t i = 0; i < entries_.size(); ++i) r.entries_[i] = entries_[i] + o.entries_[i];
  return r;
}

AuxTensor AuxTensor::operator-(const AuxTensor& o) const {
  AuxTensor r = *this;
  for (std::size_t i = 0; i < entries_.size(); ++i) r.entries_[i] = entries_[i] - o.entries_[i];
  return r;
}

AuxTensor AuxTensor::operator*(const AuxTensor& o) const {
  if (n_ != o.n_ || legs_ != o.legs_) throw UsageError("aux tensors must share leg structure");
  AuxTensor r(n_, legs_, pick_ring(ring_, o.ring_));
  for (int i = 0; i < size_; ++i) {
    for (int j = 0; j < size_; ++j) {
      OperatorElem acc(r.ring_);
      for (int k = 0; k < size_; ++k) {
        const auto& a = at(i, k);
        if (a.is_zero()) continue;
        const auto& b = o.at(k, j);
        if (b.is_zero()) continue;
        acc = acc + a * b;
      }
      r.at(i, j) = std::move(acc);
    }
  }
  return r;
}

AuxTensor AuxTensor::scaled(const Expr& s) const {
  return map_entries([&](const OperatorElem& e) { return e.scaled(s); });
}

AuxTensor AuxTensor::map_entries(const std::function<OperatorElem(const OperatorElem&)>& f) const {
  AuxTensor r = *this;
  for (auto& e : r.entries_) e = e.is_zero() ? e : f(e);
  return r;
}

std::map<Monomial, Mat> AuxTensor::eval(Evaluator& ev) const {
  const int dq = ring_->qdim;
  const int d = size_ * dq;
  std::map<Monomial, Mat> out;
  for (int r = 0; r < size_; ++r) {
    for (int c = 0; c < size_; ++c) {
      for (const auto& [m, q] : at(r, c).terms()) {
        auto it = out.find(m);
        if (it == out.end()) it = out.emplace(m, Mat::Zero(d, d)).first;
        it->second.block(r * dq, c * dq, dq, dq) = q.eval(ev);
      }
    }
  }
  return out;
}

std::uint16_t variable_mask(const AuxTensor& t) {
  std::uint16_t m = 0;
  for (int r = 0; r < t.size(); ++r)
    for (int c = 0; c < t.size(); ++c) m |= variable_mask(t.at(r, c));
  return m;
}

AuxTensor embed_legs(const AuxTensor& t, const std::vector<int>& target_legs, int total_legs) {
  if (static_cast<int>(target_legs.size()) != t.legs()) throw UsageError("leg count mismatch in embedding");
  std::vector<bool> used(total_legs + 1, false);
  for (int l : target_legs) {
    if (l < 1 || l > total_legs || used[l]) throw UsageError("duplicate or out-of-range target leg");
    used[l] = true;
  }
  const int n = t.n();
  AuxTensor r(n, total_legs, t.ring());
  for (int R = 0; R < r.size(); ++R) {
    const auto rd = split(R, n, total_legs);
    for (int C = 0; C < r.size(); ++C) {
      const auto cd = split(C, n, total_legs);
      bool ok = true;
      for (int l = 1; l <= total_legs && ok; ++l)
        if (!used[l] && rd[l - 1] != cd[l - 1]) ok = false;
      if (!ok) continue;
      std::vector<int> tr, tc;
      for (int l : target_legs) {
        tr.push_back(rd[l - 1]);
        tc.push_back(cd[l - 1]);
      }
      r.at(R, C) = t.at(join(tr, n), join(tc, n));
    }
  }
  return r;
}

AuxTensor partial_trace(const AuxTensor& t, const std::vector<int>& legs) {
  std::vector<bool> traced(t.legs() + 1, false);
  for (int l : legs) {
    if (l < 1 || l > t.legs() || traced[l]) throw UsageError("unknown or repeated leg in partial trace");
    traced[l] = true;
  }
  const int n = t.n();
  const int keep = t.legs() - static_cast<int>(legs.size());
  AuxTensor r(n, keep, t.ring());
  for (int R = 0; R < t.size(); ++R) {
    const auto rd = split(R, n, t.legs());
    for (int C = 0; C < t.size(); ++C) {
      const auto cd = split(C, n, t.legs());
      bool diag = true;
      std::vector<int> kr, kc;
      for (int l = 1; l <= t.legs(); ++l) {
        if (traced[l]) {
          if (rd[l - 1] != cd[l - 1]) diag = false;
        } else {
          kr.push_back(rd[l - 1]);
          kc.push_back(cd[l - 1]);
        }
      }
      if (!diag || t.at(R, C).is_zero()) continue;
      auto& dst = r.at(join(kr, n), join(kc, n));
      dst = dst + t.at(R, C);
    }
  }
  return r;
}

OperatorElem trace(const AuxTensor& t) {
  std::vector<int> all(t.legs());
  std::iota(all.begin(), all.end(), 1);
  return partial_trace(t, all).at(0, 0);
}

OperatorElem column_det(const AuxTensor& t) {
  if (t.legs() != 1) throw UsageError("column determinant needs a one-leg tensor");
  const int n = t.n();
  // F(S) = signed sum over row choices for columns |S|..n-1 with rows in S used.
  std::map<unsigned, OperatorElem> memo;
  std::function<OperatorElem(unsigned)> F = [&](unsigned used) -> OperatorElem {
    const int col = __builtin_popcount(used);
    if (col == n) return OperatorElem::scalar(t.ring(), Expr(1.0));
    if (auto it = memo.find(used); it != memo.end()) return it->second;
    OperatorElem acc(t.ring());
    int free_before = 0;
    for (int r = 0; r < n; ++r) {
      if (used & (1u << r)) continue;
      const auto& m = t.at(r, col);
      if (!m.is_zero()) {
        OperatorElem term = m * F(used | (1u << r));
        acc = (free_before % 2 == 0) ? acc + term : acc - term;
      }
      ++free_before;
    }
    memo.emplace(used, acc);
    return acc;
  };
  return F(0);
}

// ---------------------------------------------------------------- numeric tensors

Mat embed_numeric(const Mat& x, const std::vector<int>& dims, const std::vector<int>& targets) {
  const int L = static_cast<int>(dims.size());
  int total = 1;
  for (int d : dims) total *= d;
  int sub = 1;
  for (int t : targets) sub *= dims.at(t);
  if (x.rows() != sub || x.cols() != sub) throw UsageError("operator size does not match target factors");
  std::vector<int> stride(L);
  {
    int s = 1;
    for (int l = L - 1; l >= 0; --l) {
      stride[l] = s;
      s *= dims[l];
    }
  }
  Mat out = Mat::Zero(total, total);
  std::vector<int> dig(L);
  for (int C = 0; C < total; ++C) {
    int rem = C;
    for (int l = 0; l < L; ++l) {
      dig[l] = rem / stride[l];
      rem %= stride[l];
    }
    int csub = 0;
    int base = C;
    for (int t : targets) {
      csub = csub * dims[t] + dig[t];
      base -= dig[t] * stride[t];
    }
    for (int rs = 0; rs < sub; ++rs) {
      const cplx v = x(rs, csub);
      if (v == cplx(0.0)) continue;
      int R = base;
      int rem2 = rs;
      for (int k = static_cast<int>(targets.size()) - 1; k >= 0; --k) {
        const int t = targets[k];
        R += (rem2 % dims[t]) * stride[t];
        rem2 /= dims[t];
      }
      out(R, C) = v;
    }
  }
  return out;
}

Mat permutation_operator(int n, const std::vector<int>& sigma) {
  const int m = static_cast<int>(sigma.size());
  const int D = ipow(n, m);
  Mat p = Mat::Zero(D, D);
  for (int C = 0; C < D; ++C) {
    const auto d = split(C, n, m);
    std::vector<int> r(m);
    for (int k = 0; k < m; ++k) r[sigma[k]] = d[k];
    p(join(r, n), C) = 1.0;
  }
  return p;
}

Mat antisymmetrizer(int m, int n) {
  if (m < 1) throw UsageError("antisymmetrizer needs at least one leg");
  std::vector<int> sigma(m);
  std::iota(sigma.begin(), sigma.end(), 0);
  const int D = ipow(n, m);
  Mat a = Mat::Zero(D, D);
  double count = 0;
  do {
    int inv = 0;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        if (sigma[i] > sigma[j]) ++inv;
    a += (inv % 2 ? -1.0 : 1.0) * permutation_operator(n, sigma);
    count += 1;
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return a / count;
}

Mat antisymmetrizer_recursive(int m, int n) {
  if (m < 1) throw UsageError("antisymmetrizer needs at least one leg");
  if (m == 1) return Mat::Identity(n, n);
  const Mat prev = embed_numeric(antisymmetrizer_recursive(m - 1, n), std::vector<int>(m, n), [&] {
    std::vector<int> t(m - 1);
    std::iota(t.begin(), t.end(), 0);
    return t;
  }());
  std::vector<int> swap(m);
  std::iota(swap.begin(), swap.end(), 0);
  std::swap(swap[m - 2], swap[m - 1]);
  const Mat p = permutation_operator(n, swap);
  return (prev - static_cast<double>(m - 1) * prev * p * prev) / static_cast<double>(m);
}

Mat antisymmetrizer_on(int k, int m, int n, int total) {
  if (m - k <= 1) return Mat::Identity(ipow(n, total), ipow(n, total));
  std::vector<int> targets;
  for (int l = k; l < m; ++l) targets.push_back(l);
  return embed_numeric(antisymmetrizer(m - k, n), std::vector<int>(total, n), targets);
}

// ---------------------------------------------------------------- comparisons

Residual compare(const std::map<Monomial, Mat>& a, const std::map<Monomial, Mat>& b) {
  Residual r;
  for (const auto& [m, x] : a) {
    auto it = b.find(m);
    if (it == b.end())
      r.add_zero(x, 0.0);
    else
      r.add_matrix(x, it->second);
  }
  for (const auto& [m, y] : b)
    if (!a.count(m)) r.add_zero(y, 0.0);
  return r;
}

Residual compare_at(const AuxTensor& a, const AuxTensor& b, Evaluator& ev) { return compare(a.eval(ev), b.eval(ev)); }

Residual compare_at(const OperatorElem& a, const OperatorElem& b, Evaluator& ev) {
  return compare(a.eval(ev), b.eval(ev));
}

ManinResidual manin_residual_at(const AuxTensor& m, Evaluator& ev) {
  ManinResidual out;
  const int n = m.n();
  const AuxTensor m1 = embed_legs(m, {1}, 2);
  const AuxTensor m2 = embed_legs(m, {2}, 2);
  const AuxTensor a = AuxTensor::from_numeric(antisymmetrizer(2, n), n, 2, m.ring());
  const AuxTensor lhs = a * (m1 * m2);
  const AuxTensor rhs = lhs * a;
  out.sandwich = compare_at(lhs, rhs, ev);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        // entries in one column commute
        out.relations.merge(compare_at(m.at(i, k) * m.at(j, k), m.at(j, k) * m.at(i, k), ev));
        for (int l = k + 1; l < n; ++l) {
          const auto& A = m.at(i, k);
          const auto& B = m.at(i, l);
          const auto& C = m.at(j, k);
          const auto& D = m.at(j, l);
          out.relations.merge(compare_at(A * D - D * A, C * B - B * C, ev));
        }
      }
    }
  }
  return out;
}

ResidualReport manin_check(const AuxTensor& m, const EllipticParams& ep, int samples, std::uint64_t seed,
                           const SamplingPolicy& pol) {
  ResidualReport rep;
  rep.identity_id = "manin";
  rep.seed = seed;
  Rng rng(seed);
  Residual total = sample_residual(samples, rng, pol, variable_mask(m), [&](const Point& p) {
    Evaluator ev(ep, p, pol.den_guard);
    const auto r = manin_residual_at(m, ev);
    Residual x = r.sandwich;
    x.merge(r.relations);
    return x;
  });
  rep.samples_used = samples;
  rep.set(total);
  return rep;
}

}  // namespace ellgaudin
