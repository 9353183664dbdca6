#include "ellgaudin/gaudin.hpp"

#include <cmath>

namespace ellgaudin {

namespace {

Expr lam_diff(int i, int j) { return Expr::var(lam(i)) - Expr::var(lam(j)); }

ResidualReport make_report(std::string id, std::string anchor, const CheckOptions& o) {
  ResidualReport r;
  r.identity_id = std::move(id);
  r.paper_anchor = std::move(anchor);
  r.seed = o.seed;
  r.samples_used = o.samples;
  return r;
}

Lambda lambda_of(const Point& p, int n) {
  Lambda l(n);
  for (int k = 0; k < n; ++k) l[k] = p.lambda(k);
  return l;
}

Point point_at(cplx x, const Lambda& lambda) {
  Point p;
  p[Var::u] = x;
  for (std::size_t k = 0; k < lambda.size(); ++k) p.lambda(static_cast<int>(k)) = lambda[k];
  return p;
}

AuxTensor d_lambda(int n, const Ring& ring) {
  return AuxTensor::diagonal(n, ring, [&](int a) { return OperatorElem::monomial(ring, Monomial::of(lam(a))); });
}

AuxTensor d_spectral(int n, const Ring& ring, Var x, int k = 1) {
  if (k == 0) return AuxTensor::identity(n, 1, ring);
  return AuxTensor::diagonal(n, ring, [&](int) { return OperatorElem::monomial(ring, Monomial::of(x, k)); });
}

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

std::uint16_t all_mask(int n) { return static_cast<std::uint16_t>(bit(Var::u) | bit(Var::v) | lambda_mask(n)); }

}  // namespace

// ---------------------------------------------------------------- classical L-operators

Mat ClassicalLOperator::site_action(int site, int i, int j) const {
  Mat a = space.gl_action_on_site(site, i, j);
  if (traceless && i == j) {
    Mat tr = Mat::Zero(a.rows(), a.cols());
    for (int l = 0; l < n; ++l) tr += space.gl_action_on_site(site, l, l);
    a -= tr / static_cast<double>(n);
  }
  return a;
}

Mat ClassicalLOperator::cartan(int k) const {
  Mat h = Mat::Zero(qdim(), qdim());
  for (std::size_t s = 0; s < space.sites().size(); ++s) h += site_action(static_cast<int>(s), k, k);
  return h;
}

Mat ClassicalLOperator::numeric(cplx x, const Lambda& lambda) const {
  Evaluator ev(ep, point_at(x, lambda));
  const auto m = build(Expr::var(Var::u)).eval(ev);
  auto it = m.find(Monomial{});
  const int d = n * qdim();
  return it == m.end() ? Mat::Zero(d, d) : it->second;
}

QMat half_current(const ClassicalLOperator& l, int i, int j, const Expr& x) {
  QMat acc(l.qdim());
  for (std::size_t k = 0; k < l.space.sites().size(); ++k) {
    const Expr y = x - Expr(l.space.sites()[k].eval_point);
    const Expr kernel = i == j ? log_deriv_theta(y)
                               : theta_of(y + lam_diff(i, j)) / (theta_of(y) * theta_of(lam_diff(i, j)));
    acc = acc + QMat::from_numeric(l.site_action(static_cast<int>(k), i, j), kernel);
  }
  return acc;
}

ClassicalLOperator gaudin_L(int n, std::vector<Site> sites, bool traceless, const EllipticParams& ep) {
  ClassicalLOperator l;
  l.n = n;
  l.space = QuantumSpace(n, std::move(sites));
  l.traceless = traceless;
  l.ring = make_ring(Flavor::diff, l.space.dim(), 0.0);
  l.ep = ep;
  auto self = std::make_shared<ClassicalLOperator>(l);
  l.build = [self](const Expr& x) {
    const int n = self->n;
    AuxTensor t(n, 1, self->ring);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        QMat q = half_current(*self, j, i, x);
        if (i == j)
          for (int k = 0; k < n; ++k)
            if (k != i) q = q + QMat::from_numeric(self->cartan(k), log_deriv_theta(lam_diff(i, k)));
        if (!q.is_zero()) t.at(i, j) = OperatorElem::coeff(self->ring, q);
      }
    return t;
  };
  return l;
}

AuxTensor twisted_form(const ClassicalLOperator& l, const Expr& x) {
  const int n = l.n;
  std::vector<QMat> blocks(n * n, QMat(l.qdim()));
  for (std::size_t k = 0; k < l.space.sites().size(); ++k) {
    const QMat r = twisted_r_expr(n, x - Expr(l.space.sites()[k].eval_point));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) {
            const Expr& e = r.at(a * n + c, b * n + d);
            if (!e.is_zero()) blocks[a * n + b] = blocks[a * n + b] + QMat::from_numeric(l.site_action(static_cast<int>(k), c, d), e);
          }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) blocks[i * n + i] = blocks[i * n + i] + QMat::from_numeric(l.cartan(j), log_deriv_theta(lam_diff(i, j)));
  AuxTensor t(n, 1, l.ring);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (!blocks[a * n + b].is_zero()) t.at(a, b) = OperatorElem::coeff(l.ring, blocks[a * n + b]);
  return t;
}

AuxTensor gaudin_LD(const ClassicalLOperator& l, const Expr& x) { return l.build(x) - d_lambda(l.n, l.ring); }

AuxTensor classical_manin(const ClassicalLOperator& l, Var x) {
  return d_spectral(l.n, l.ring, x) + gaudin_LD(l, Expr::var(x));
}

std::vector<OperatorElem> char_poly_classical(const ClassicalLOperator& l, Var x) {
  const OperatorElem det = column_det(classical_manin(l, x));
  std::vector<OperatorElem> s(l.n + 1, OperatorElem(l.ring));
  for (const auto& [mono, q] : det.terms()) {
    const int p = mono[x];
    s.at(l.n - p).add_term(mono - Monomial::of(x, p), q);
  }
  return s;
}

OperatorElem char_poly_total(const std::vector<OperatorElem>& s, Var x, int n) {
  OperatorElem acc(s.at(0).ring());
  for (int m = 0; m <= n; ++m) acc = acc + s[m] * OperatorElem::monomial(s[m].ring(), Monomial::of(x, n - m));
  return acc;
}

ZeroWeight zero_weight_projector(const QuantumSpace& space, bool traceless) {
  const int n = space.rank();
  ZeroWeight z;
  z.projector = Mat::Zero(space.dim(), space.dim());
  for (int b = 0; b < space.dim(); ++b) {
    bool zero = true;
    if (n) {
      const auto& w = space.weight(b);
      double mean = 0.0;
      for (int k = 0; k < n; ++k) mean += w[k];
      mean /= n;
      for (int k = 0; k < n; ++k) zero = zero && std::abs(w[k] - (traceless ? mean : 0.0)) < 1e-12;
    }
    if (zero) {
      z.projector(b, b) = 1.0;
      ++z.dim;
    }
  }
  return z;
}

AuxTensor classical_quantum_power(const ClassicalLOperator& l, int k, Var x) {
  const AuxTensor LD = gaudin_LD(l, Expr::var(x));
  AuxTensor p = AuxTensor::identity(l.n, 1, l.ring);
  for (int j = 0; j < k; ++j) {
    const AuxTensor dp = p.map_entries([x](const OperatorElem& e) {
      return e.map_coefficients([x](const QMat& q) { return q.map([x](const Expr& c) { return differentiate(c, x); }); });
    });
    p = LD * p + dp;
  }
  return p;
}

AuxTensor simplified_power(const ClassicalLOperator& l, int k, Var x) {
  if (k == 0) return AuxTensor::identity(l.n, 1, l.ring);
  return gaudin_LD(l, Expr::var(x)) * classical_quantum_power(l, k - 1, x);
}

// ---------------------------------------------------------------- commutators on W

namespace {

// Derivative tables of every coefficient of an element: table[alpha][gamma] =
// d^gamma c_alpha at the point.
struct DerivTable {
  std::vector<std::vector<int>> alpha;
  std::vector<std::vector<Mat>> d;
};

std::vector<int> lambda_multi(const Monomial& m, int nl) {
  for (int i = 0; i < kVarCount; ++i)
    if (m.e[i] != 0 && (i < 4 || i >= 4 + nl)) throw UsageError("commutator on W needs d/dlambda monomials only");
  std::vector<int> a(nl);
  for (int k = 0; k < nl; ++k) a[k] = m[lam(k)];
  return a;
}

DerivTable derivatives(const OperatorElem& e, JetEvaluator& je, int nl) {
  const JetLayout& lay = je.layout();
  std::vector<double> fact(lay.size(), 1.0);
  for (int i = 0; i < lay.size(); ++i)
    for (int a : lay.multi(i))
      for (int t = 2; t <= a; ++t) fact[i] *= t;
  DerivTable t;
  for (const auto& [mono, q] : e.terms()) {
    t.alpha.push_back(lambda_multi(mono, nl));
    std::vector<Mat> d(lay.size(), Mat::Zero(q.dim(), q.dim()));
    for (int r = 0; r < q.dim(); ++r)
      for (int c = 0; c < q.dim(); ++c) {
        const Expr& x = q.at(r, c);
        if (x.is_zero()) continue;
        const Jet& j = je(x);
        for (int i = 0; i < static_cast<int>(j.c.size()) && i < lay.size(); ++i) d[i](r, c) = j.c[i] * fact[i];
      }
    t.d.push_back(std::move(d));
  }
  return t;
}

using CoeffMap = std::map<std::vector<int>, Mat>;

// Normal form of a b from derivative tables.
void accumulate_product(const DerivTable& a, const DerivTable& b, const JetLayout& lay, CoeffMap& out) {
  const int nl = lay.nvars();
  for (std::size_t ia = 0; ia < a.alpha.size(); ++ia)
    for (std::size_t ib = 0; ib < b.alpha.size(); ++ib)
      for (int g = 0; g < lay.size(); ++g) {
        const auto& gamma = lay.multi(g);
        double coef = 1.0;
        for (int k = 0; k < nl && coef != 0.0; ++k) coef *= binom(a.alpha[ia][k], gamma[k]);
        if (coef == 0.0) continue;
        std::vector<int> mu(nl);
        for (int k = 0; k < nl; ++k) mu[k] = a.alpha[ia][k] - gamma[k] + b.alpha[ib][k];
        Mat term = coef * (a.d[ia][0] * b.d[ib][g]);
        auto it = out.find(mu);
        if (it == out.end())
          out.emplace(mu, std::move(term));
        else
          it->second += term;
      }
}

int max_degree(const OperatorElem& e) {
  int d = 0;
  for (const auto& [m, q] : e.terms()) d = std::max(d, m.degree());
  return d;
}

}  // namespace

Residual commutator_on_subspace(const OperatorElem& a, const OperatorElem& b, const Point& p, const Mat& P,
                                const EllipticParams& ep, int nlambda, double den_guard) {
  std::vector<Var> vars;
  for (int k = 0; k < nlambda; ++k) vars.push_back(lam(k));
  const int order = std::max(max_degree(a), max_degree(b));
  auto lay = std::make_shared<const JetLayout>(vars, order);
  JetEvaluator je(ep, p, lay, den_guard);
  const DerivTable ta = derivatives(a, je, nlambda);
  const DerivTable tb = derivatives(b, je, nlambda);
  CoeffMap ab, ba;
  accumulate_product(ta, tb, *lay, ab);
  accumulate_product(tb, ta, *lay, ba);
  double scale = 0.0;
  for (const auto& [mu, m] : ab) scale = std::max(scale, max_abs(m));
  for (const auto& [mu, m] : ba) scale = std::max(scale, max_abs(m));
  Residual r;
  for (const auto& [mu, m] : ab) {
    Mat c = m;
    auto it = ba.find(mu);
    if (it != ba.end()) c -= it->second;
    r.add(max_abs(c * P), scale);
  }
  for (const auto& [mu, m] : ba)
    if (!ab.count(mu)) r.add(max_abs(m * P), scale);
  return r;
}

// ---------------------------------------------------------------- residual checks

ResidualReport half_current_residue_residual(const ClassicalLOperator& l, int i, int j) {
  ResidualReport rep;
  rep.identity_id = "hc_residue:" + std::to_string(i + 1) + std::to_string(j + 1);
  rep.paper_anchor = i == j ? "hc_eii_N" : "hc_eij_N";
  rep.samples_used = static_cast<int>(l.space.sites().size());
  const Lambda lm = {{0.11, 0.05}, {-0.23, 0.02}, {0.31, -0.07}, {0.02, 0.13}};
  const QMat hc = half_current(l, i, j, Expr::var(Var::u));
  // symmetric pairs +-eps leave only even powers; extrapolate in eps^2
  const std::vector<double> radii = {0.02, 0.01, 0.005, 0.0025};
  std::vector<double> h2;
  for (double e : radii) h2.push_back(e * e);
  const cplx dir = std::exp(kI * 0.7);
  Residual res;
  for (std::size_t k = 0; k < l.space.sites().size(); ++k) {
    const cplx v = l.space.sites()[k].eval_point;
    std::vector<Mat> vals;
    for (double e : radii) {
      Mat acc = Mat::Zero(l.qdim(), l.qdim());
      for (double sgn : {1.0, -1.0}) {
        Evaluator ev(l.ep, point_at(v + sgn * e * dir, Lambda(lm.begin(), lm.begin() + l.n)));
        acc += 0.5 * sgn * e * dir * hc.eval(ev);
      }
      vals.push_back(acc);
    }
    res.add_matrix(extrapolate(h2, vals), l.site_action(static_cast<int>(k), i, j));
  }
  rep.set(res);
  return rep;
}

ResidualReport gaudin_drll_residual(const ClassicalLOperator& l, const CheckOptions& o) {
  auto rep = make_report("DrLL", "DrLL", o);
  const int n = l.n;
  const Expr U = Expr::var(Var::u), V = Expr::var(Var::v);
  const AuxTensor Lu = embed_legs(l.build(U), {1}, 2);
  const AuxTensor Lv = embed_legs(l.build(V), {2}, 2);
  const AuxTensor D1 = embed_legs(d_lambda(n, l.ring), {1}, 2);
  const AuxTensor D2 = embed_legs(d_lambda(n, l.ring), {2}, 2);
  const QMat r = classical_r_expr(n, U - V);
  AuxTensor R(n, 2, l.ring), H(n, 2, l.ring);
  for (int a = 0; a < n * n; ++a)
    for (int b = 0; b < n * n; ++b) {
      const Expr& e = r.at(a, b);
      if (e.is_zero()) continue;
      R.at(a, b) = OperatorElem::scalar(l.ring, e);
      QMat acc(l.qdim());
      for (int k = 0; k < n; ++k) acc = acc + QMat::from_numeric(l.cartan(k), differentiate(e, lam(k)));
      H.at(a, b) = OperatorElem::coeff(l.ring, acc);
    }
  const AuxTensor A = Lu - D1, B = Lv - D2;
  const AuxTensor S = Lu + Lv;
  rep.set(sampled_compare(A * B - B * A - H, S * R - R * S, l.ep, o));
  return rep;
}

ResidualReport gaudin_ehl_residual(const ClassicalLOperator& l, const CheckOptions& o) {
  auto rep = make_report("EhL_LEh_G", "EhL_LEh_G", o);
  const int n = l.n, dq = l.qdim();
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, bit(Var::u) | lambda_mask(n), [&](const Point& p) {
    const Mat L = l.numeric(p[Var::u], lambda_of(p, n));
    Residual r;
    for (int i = 0; i < n; ++i) {
      Mat e = Mat::Zero(n, n);
      e(i, i) = 1.0;
      const Mat X = embed_numeric(e, {n, dq}, {0}) + embed_numeric(l.cartan(i), {n, dq}, {1});
      r.add_matrix(X * L, L * X);
    }
    return r;
  });
  rep.set(res);
  return rep;
}

ClassicalLimitReport gaudin_classical_limit(const std::vector<cplx>& vs, int n, const FelderContext& ctx,
                                            const CheckOptions& o) {
  ClassicalLimitReport out;
  out.report = make_report("LqLc", "LqLc", o);
  std::vector<Site> sites;
  for (cplx v : vs) sites.push_back(defining_site(n, v));
  const ClassicalLOperator cl = gaudin_L(n, sites, false, ctx.ep);
  const std::vector<double> ladder = {4e-3, 2e-3, 1e-3, 5e-4};
  std::vector<DynamicalLOperator> ls, ls2;
  for (double h : ladder) {
    FelderContext c = ctx;
    c.hbar = h;
    ls.push_back(lop_fused_sites(n, vs, c));
    c.hbar = 2 * h;
    ls2.push_back(lop_fused_sites(n, vs, c));
  }
  Rng rng(o.seed);
  Residual stab;
  const Residual res = sample_residual(o.samples, rng, o.policy, bit(Var::u) | lambda_mask(n), [&](const Point& p) {
    const Lambda lm = lambda_of(p, n);
    const cplx u = p[Var::u];
    const Mat cls = cl.numeric(u, lm);
    const Mat I = Mat::Identity(cls.rows(), cls.cols());
    std::vector<Mat> q, q2;
    std::vector<double> doubled;
    for (std::size_t k = 0; k < ladder.size(); ++k) {
      q.push_back((ls[k].numeric(u, lm) - I) / ladder[k]);
      q2.push_back((ls2[k].numeric(u, lm) - I) / (2 * ladder[k]));
      doubled.push_back(2 * ladder[k]);
    }
    const Mat ex = extrapolate(ladder, q);
    const Mat ex2 = extrapolate(doubled, q2);
    Residual r;
    r.add_matrix(ex, cls);
    Residual s;
    s.add_matrix(ex2, ex);
    stab.merge(s);
    return r;
  });
  out.error = res.max_rel;
  out.stability = stab.max_rel;
  Residual both = res;
  both.merge(stab);
  out.report.set(both);
  return out;
}

ResidualReport classical_manin_residual(const ClassicalLOperator& l, const CheckOptions& o) {
  auto rep = manin_check(classical_manin(l), l.ep, o.samples, o.seed, o.policy);
  rep.identity_id = "Manin_classical";
  rep.paper_anchor = "chpolGaudin";
  return rep;
}

ResidualReport cartan_residual_s(const ClassicalLOperator& l, int m, const CheckOptions& o) {
  auto rep = make_report("hs_sh:m=" + std::to_string(m), "hs_sh", o);
  const auto s = char_poly_classical(l);
  Residual r;
  for (int k = 0; k < l.n; ++k) {
    const OperatorElem h = OperatorElem::coeff(l.ring, QMat::from_numeric(l.cartan(k)));
    r.merge(sampled_compare(h * s.at(m), s.at(m) * h, l.ep, o));
  }
  rep.set(r);
  return rep;
}

ResidualReport weight_block_residual(const ClassicalLOperator& l, const CheckOptions& o) {
  auto rep = make_report("hs_sh_blocks", "hs_sh", o);
  const auto s = char_poly_classical(l);
  const int dq = l.qdim();
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, bit(Var::u) | lambda_mask(l.n), [&](const Point& p) {
    Evaluator ev(l.ep, p, o.policy.den_guard);
    Residual r;
    for (const auto& sm : s)
      for (const auto& [mono, m] : sm.eval(ev)) {
        Mat off = Mat::Zero(dq, dq);
        for (int a = 0; a < dq; ++a)
          for (int b = 0; b < dq; ++b)
            if (l.space.rank() && l.space.weight(a) != l.space.weight(b)) off(a, b) = m(a, b);
        r.add_zero(off, max_abs(m));
      }
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport commutativity_on_zero_weight(const ClassicalLOperator& l, const std::vector<std::pair<int, int>>& pairs,
                                            const CheckOptions& o) {
  auto rep = make_report("ss_ss", "ss_ss", o);
  const ZeroWeight W = zero_weight_projector(l.space, l.traceless);
  if (W.dim == 0) throw UsageError("zero-weight subspace is trivial");
  const auto su = char_poly_classical(l, Var::u);
  const auto sv = char_poly_classical(l, Var::v);
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, all_mask(l.n), [&](const Point& p) {
    Residual r;
    for (auto [m, k] : pairs)
      r.merge(commutator_on_subspace(su.at(m), sv.at(k), p, W.projector, l.ep, l.n, o.policy.den_guard));
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport twisted_gaudin_residual(const ClassicalLOperator& l, const CheckOptions& o) {
  auto rep = make_report("Q_Ltilde", "Q_Ltilde", o);
  const AuxTensor twisted =
      d_spectral(l.n, l.ring, Var::u) - d_lambda(l.n, l.ring) + twisted_form(l, Expr::var(Var::u));
  rep.set(sampled_compare(column_det(classical_manin(l)), column_det(twisted), l.ep, o));
  return rep;
}

ResidualReport classical_newton_residual(const ClassicalLOperator& l, const CheckOptions& o) {
  auto rep = newton_residual(classical_manin(l), l.n + 1, l.ep, o);
  rep.identity_id = "Newton_classical";
  return rep;
}

ResidualReport classical_qpow_residual(const ClassicalLOperator& l, int max_k, const CheckOptions& o) {
  auto rep = make_report("qpow_classical", "qpow_classical", o);
  const AuxTensor M = classical_manin(l);
  std::vector<AuxTensor> P;
  for (int j = 0; j <= max_k; ++j) P.push_back(classical_quantum_power(l, j));
  Residual r;
  AuxTensor Mk = AuxTensor::identity(l.n, 1, l.ring);
  for (int k = 1; k <= max_k; ++k) {
    Mk = Mk * M;
    AuxTensor rhs(l.n, 1, l.ring);
    for (int j = 0; j <= k; ++j) rhs = rhs + (P[j] * d_spectral(l.n, l.ring, Var::u, k - j)).scaled(Expr(binom(k, j)));
    r.merge(sampled_compare(Mk, rhs, l.ep, o));
  }
  // the first two quantum powers are ordinary powers
  r.merge(sampled_compare(P[1], gaudin_LD(l, Expr::var(Var::u)), l.ep, o));
  rep.set(r);
  return rep;
}

ResidualReport newton_reconstruction_residual(const ClassicalLOperator& l, const CheckOptions& o) {
  auto rep = make_report("Newton_reconstruction", "qpow_classical", o);
  const int n = l.n;
  std::vector<OperatorElem> trP;
  for (int j = 0; j <= n; ++j) trP.push_back(trace(classical_quantum_power(l, j)));
  auto du = [&](int k) { return OperatorElem::monomial(l.ring, Monomial::of(Var::u, k)); };
  std::vector<OperatorElem> T(n + 1, OperatorElem(l.ring));
  for (int k = 1; k <= n; ++k)
    for (int j = 0; j <= k; ++j) T[k] = T[k] + (trP[j] * du(k - j)).scaled(Expr(binom(k, j)));
  std::vector<OperatorElem> q = {OperatorElem::scalar(l.ring, Expr(1.0))};
  for (int m = 1; m <= n; ++m) {
    OperatorElem acc(l.ring);
    for (int k = 0; k < m; ++k) {
      const OperatorElem t = q[k] * T[m - k];
      acc = ((m + k + 1) % 2 == 0) ? acc + t : acc - t;
    }
    q.push_back(acc.scaled(Expr(1.0 / m)));
  }
  rep.set(sampled_compare(q[n], char_poly_total(char_poly_classical(l), Var::u, n), l.ep, o));
  return rep;
}

ResidualReport traced_powers_commute_residual(const ClassicalLOperator& l, int max_k, const CheckOptions& o) {
  auto rep = make_report("trLD_powers", "qpow_classical", o);
  const ZeroWeight W = zero_weight_projector(l.space, l.traceless);
  if (W.dim == 0) throw UsageError("zero-weight subspace is trivial");
  std::vector<OperatorElem> tu, tv;
  for (int k = 1; k <= max_k; ++k) {
    tu.push_back(trace(classical_quantum_power(l, k, Var::u)));
    tv.push_back(trace(classical_quantum_power(l, k, Var::v)));
  }
  const OperatorElem sq = trace(simplified_power(l, 2, Var::u));
  const auto sv = char_poly_classical(l, Var::v);
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, all_mask(l.n), [&](const Point& p) {
    Residual r;
    for (const auto& a : tu)
      for (const auto& b : tv) r.merge(commutator_on_subspace(a, b, p, W.projector, l.ep, l.n, o.policy.den_guard));
    for (int m = 1; m <= l.n; ++m)
      r.merge(commutator_on_subspace(sq, sv[m], p, W.projector, l.ep, l.n, o.policy.den_guard));
    return r;
  });
  rep.set(res);
  return rep;
}

// ---------------------------------------------------------------- sl2

namespace {

struct Sl2Space {
  ClassicalLOperator l;  // traceless, n = 2
  Mat h;                 // h_1 - h_2
};

Sl2Space sl2_space(const std::vector<cplx>& vs, const EllipticParams& ep) {
  std::vector<Site> sites;
  for (cplx v : vs) sites.push_back(defining_site(2, v));
  Sl2Space s{gaudin_L(2, sites, true, ep), Mat()};
  s.h = s.l.cartan(0) - s.l.cartan(1);
  return s;
}

}  // namespace

Sl2Forms sl2_generating_function(const std::vector<cplx>& vs, const EllipticParams& ep, Var x) {
  const Sl2Space sp = sl2_space(vs, ep);
  const ClassicalLOperator& l = sp.l;
  const Ring& ring = l.ring;
  const Expr X = Expr::var(x), lm = Expr::var(Var::l1);
  QMat hp(l.qdim()), ep_(l.qdim()), fp(l.qdim());
  for (std::size_t k = 0; k < vs.size(); ++k) {
    const int s = static_cast<int>(k);
    const Expr y = X - Expr(vs[k]);
    hp = hp + QMat::from_numeric(l.site_action(s, 0, 0) - l.site_action(s, 1, 1), log_deriv_theta(y));
    ep_ = ep_ + QMat::from_numeric(l.site_action(s, 0, 1), theta_of(y + lm) / (theta_of(y) * theta_of(lm)));
    fp = fp + QMat::from_numeric(l.site_action(s, 1, 0), theta_of(y - lm) / (theta_of(y) * theta_of(-lm)));
  }
  const OperatorElem d = OperatorElem::monomial(ring, Monomial::of(Var::l1));
  const OperatorElem H = OperatorElem::coeff(ring, hp.scaled(Expr(0.5)));
  const OperatorElem E = OperatorElem::coeff(ring, ep_), F = OperatorElem::coeff(ring, fp);
  const OperatorElem dH =
      OperatorElem::coeff(ring, hp.map([x](const Expr& e) { return differentiate(e, x); }).scaled(Expr(0.5)));
  const OperatorElem X2 = (d - H) * (d - H);
  Sl2Forms f;
  f.first = X2 + dH + E * F;
  f.symmetric = X2 + (E * F + F * E).scaled(Expr(0.5));
  f.h_coeff = OperatorElem::coeff(ring, QMat::from_numeric(sp.h, log_deriv_theta(lm)));
  return f;
}

ResidualReport sl2_forms_residual(const std::vector<cplx>& vs, const EllipticParams& ep, const CheckOptions& o) {
  auto rep = make_report("sl2_forms:N=" + std::to_string(vs.size()), "sl2_forms", o);
  const Sl2Space sp = sl2_space(vs, ep);
  const ZeroWeight W = zero_weight_projector(sp.l.space, true);
  const Sl2Forms f = sl2_generating_function(vs, ep);
  // [e+, f+] = -d/du h+ + (theta'/theta)' h, checked through the form difference
  // 1/2 [e+, f+] + 1/2 d/du h+ = 1/2 (theta'/theta)' h.
  const Expr lm = Expr::var(Var::l1);
  const OperatorElem ideal =
      OperatorElem::coeff(sp.l.ring, QMat::from_numeric(sp.h, differentiate(log_deriv_theta(lm), Var::l1)))
          .scaled(Expr(0.5));
  const OperatorElem diff = f.first - f.symmetric;
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, bit(Var::u) | bit(Var::l1), [&](const Point& p) {
    Evaluator ev(ep, p, o.policy.den_guard);
    Residual r;
    r.merge(compare_at(diff, ideal, ev));
    double scale = 0.0;
    for (const auto& [mono, m] : f.first.eval(ev)) scale = std::max(scale, max_abs(m));
    for (const auto& [mono, m] : diff.eval(ev)) r.add_zero(m * W.projector, scale);
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport sl2_commutation_residual(const std::vector<cplx>& vs, const EllipticParams& ep, const CheckOptions& o) {
  auto rep = make_report("sl2_SS:N=" + std::to_string(vs.size()), "sl2_SS", o);
  const Sl2Space sp = sl2_space(vs, ep);
  const ZeroWeight W = zero_weight_projector(sp.l.space, true);
  if (W.dim == 0) throw UsageError("zero-weight subspace is trivial");
  const Sl2Forms fu = sl2_generating_function(vs, ep, Var::u);
  const Sl2Forms fv = sl2_generating_function(vs, ep, Var::v);
  Rng rng(o.seed);
  const Residual res =
      sample_residual(o.samples, rng, o.policy, bit(Var::u) | bit(Var::v) | bit(Var::l1), [&](const Point& p) {
        Residual r = commutator_on_subspace(fu.symmetric, fv.symmetric, p, W.projector, ep, 1, o.policy.den_guard);
        r.merge(commutator_on_subspace(fu.first, fv.first, p, W.projector, ep, 1, o.policy.den_guard));
        return r;
      });
  rep.set(res);
  return rep;
}

ResidualReport sl2_crosscheck_residual(const std::vector<cplx>& vs, const EllipticParams& ep, const CheckOptions& o) {
  auto rep = make_report("sl2_crosscheck:N=" + std::to_string(vs.size()), "sl2_Q", o);
  const Sl2Space sp = sl2_space(vs, ep);
  const ZeroWeight W = zero_weight_projector(sp.l.space, true);
  const auto s = char_poly_classical(sp.l);
  const Sl2Forms f = sl2_generating_function(vs, ep);
  // restricted general pipeline, keyed by the power of d/dlambda
  auto restrict = [](const std::map<Monomial, Mat>& m) {
    std::map<int, Mat> out;
    for (const auto& [mono, c] : m) {
      const int a = mono[lam(0)], b = mono[lam(1)];
      const Mat t = (b % 2 ? -1.0 : 1.0) * c;
      auto it = out.find(a + b);
      if (it == out.end())
        out.emplace(a + b, t);
      else
        it->second += t;
    }
    return out;
  };
  auto by_power = [](const std::map<Monomial, Mat>& m, double sign) {
    std::map<int, Mat> out;
    for (const auto& [mono, c] : m) out.emplace(mono[Var::l1], sign * c);
    return out;
  };
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, bit(Var::u) | bit(Var::l1), [&](const Point& p) {
    Point pg = p;
    pg.lambda(0) = p[Var::l1];
    pg.lambda(1) = 0.0;
    Evaluator eg(ep, pg, o.policy.den_guard), es(ep, p, o.policy.den_guard);
    Residual r;
    const std::map<int, Mat> want[3] = {{{0, Mat::Identity(sp.l.qdim(), sp.l.qdim())}},
                                        by_power(f.h_coeff.eval(es), -1.0), by_power(f.first.eval(es), -1.0)};
    for (int m = 0; m <= 2; ++m) {
      auto got = restrict(s[m].eval(eg));
      double scale = 0.0;
      for (const auto& [k, c] : got) scale = std::max(scale, max_abs(c));
      for (const auto& [k, c] : want[m]) {
        scale = std::max(scale, max_abs(c));
        auto it = got.find(k);
        if (it == got.end())
          got.emplace(k, -c);
        else
          it->second -= c;
      }
      for (const auto& [k, c] : got) r.add(max_abs(c * W.projector), scale);
    }
    return r;
  });
  rep.set(res);
  return rep;
}

}  // namespace ellgaudin
