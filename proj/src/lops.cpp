#include "ellgaudin/lops.hpp"

#include <Eigen/LU>

namespace ellgaudin {

namespace {

const Expr& U() {
  static const Expr u = Expr::var(Var::u);
  return u;
}
const Expr& V() {
  static const Expr v = Expr::var(Var::v);
  return v;
}

int ipow(int b, int e) {
  int r = 1;
  while (e-- > 0) r *= b;
  return r;
}

std::vector<int> digits_of(int index, int n, int legs) {
  std::vector<int> d(legs);
  for (int l = legs - 1; l >= 0; --l) {
    d[l] = index % n;
    index /= n;
  }
  return d;
}

ResidualReport make_report(std::string id, std::string anchor, const CheckOptions& o) {
  ResidualReport r;
  r.identity_id = std::move(id);
  r.paper_anchor = std::move(anchor);
  r.seed = o.seed;
  r.samples_used = o.samples;
  return r;
}

Point point_at(cplx x, const Lambda& lambda) {
  Point p;
  p[Var::u] = x;
  for (std::size_t k = 0; k < lambda.size(); ++k) p.lambda(static_cast<int>(k)) = lambda[k];
  return p;
}

Lambda lambda_of(const Point& p, int n) {
  Lambda l(n);
  for (int k = 0; k < n; ++k) l[k] = p.lambda(k);
  return l;
}

// Column-wise lambda shift of a matrix of expressions by step * weights[c].
QMat shift_columns(const QMat& q, const std::vector<std::vector<int>>& weights, cplx step) {
  QMat r(q.dim());
  if (q.is_zero()) return r;
  for (int c = 0; c < q.dim(); ++c) {
    ShiftMap s = ShiftMap::identity();
    for (std::size_t k = 0; k < weights[c].size(); ++k)
      if (weights[c][k]) s.set(lam(static_cast<int>(k)), step * static_cast<double>(weights[c][k]));
    for (int rr = 0; rr < q.dim(); ++rr)
      if (!q.at(rr, c).is_zero()) r.set(rr, c, s.is_identity() ? q.at(rr, c) : apply_shift(q.at(rr, c), s));
  }
  return r;
}

// q on the left factor of a (d1 x d2) tensor product, or on the right one.
QMat lift(const QMat& q, int d1, int d2, bool left) {
  QMat r(d1 * d2);
  if (q.is_zero()) return r;
  const int other = left ? d2 : d1;
  for (int i = 0; i < q.dim(); ++i)
    for (int j = 0; j < q.dim(); ++j) {
      const Expr& e = q.at(i, j);
      if (e.is_zero()) continue;
      for (int k = 0; k < other; ++k) {
        if (left) r.set(i * d2 + k, j * d2 + k, e);
        else r.set(k * d2 + i, k * d2 + j, e);
      }
    }
  return r;
}

AuxTensor numeric_aux(const Mat& m, int n, int legs, const Ring& ring) {
  return AuxTensor::from_numeric(m, n, legs, ring);
}

OperatorElem one(const Ring& r) { return OperatorElem::scalar(r, Expr(1.0)); }

}  // namespace

// ---------------------------------------------------------------- L-operators

std::vector<std::vector<int>> weight_table(const QuantumSpace& q, int n) {
  std::vector<std::vector<int>> w(q.dim(), std::vector<int>(n, 0));
  if (q.rank())
    for (int b = 0; b < q.dim(); ++b) w[b] = q.weight(b);
  return w;
}

Mat DynamicalLOperator::numeric(cplx x, const Lambda& lambda) const {
  Evaluator ev(ctx.ep, point_at(x, lambda), ctx.guard);
  const auto m = at_u->eval(ev);
  const int d = n * qdim();
  auto it = m.find(Monomial{});
  return it == m.end() ? Mat::Zero(d, d) : it->second;
}

DynamicalLOperator make_lop(int n, QuantumSpace space, const FelderContext& ctx,
                            std::function<AuxTensor(const Expr&, const Ring&)> build, std::string label) {
  DynamicalLOperator l;
  l.n = n;
  l.space = std::move(space);
  l.ring = make_ring(Flavor::shift, l.space.dim(), ctx.hbar);
  l.ctx = ctx;
  const Ring ring = l.ring;
  l.build = [build, ring](const Expr& x) { return build(x, ring); };
  l.at_u = std::make_shared<const AuxTensor>(l.build(U()));
  l.label = std::move(label);
  return l;
}

DynamicalLOperator lop_from_R(int n, cplx v, const FelderContext& ctx, LRole role) {
  QuantumSpace q(n, {defining_site(n, v)});
  if (role == LRole::second_space) {
    return make_lop(n, q, ctx, [n, v, ctx](const Expr& x, const Ring& ring) {
      const QMat R = felder_R_expr(n, x - Expr(v), ctx.hbar);
      AuxTensor t(n, 1, ring);
      for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) {
          QMat block(n);
          for (int b = 0; b < n; ++b)
            for (int d = 0; d < n; ++d) block.set(b, d, R.at(a * n + b, c * n + d));
          if (!block.is_zero()) t.at(a, c) = OperatorElem::coeff(ring, block);
        }
      return t;
    }, "R");
  }
  return make_lop(n, q, ctx, [n, v, ctx](const Expr& x, const Ring& ring) {
    const Mat P = flip(n);
    const std::uint16_t mask = static_cast<std::uint16_t>(x.mask() | lambda_mask(n));
    return opaque_tensor(n, 1, ring, mask, [=](const Point& p) {
      const cplx xv = eval(x, p, ctx.ep);
      return guarded_inverse(P * felder_R(n, v - xv, lambda_of(p, n), ctx) * P);
    });
  }, "R21inv");
}

DynamicalLOperator lop_trivial(int n, const FelderContext& ctx) {
  return make_lop(n, QuantumSpace(n, {}), ctx, [n](const Expr&, const Ring& ring) {
    return AuxTensor::identity(n, 1, ring);
  }, "1");
}

DynamicalLOperator fuse(const DynamicalLOperator& l2, const DynamicalLOperator& l1) {
  if (l1.n != l2.n) throw UsageError("fused L-operators need the same rank");
  const int n = l1.n;
  const int d1 = l1.qdim(), d2 = l2.qdim();
  const auto w2 = weight_table(l2.space, n);
  std::vector<std::vector<int>> w2_full(d1 * d2);
  for (int c = 0; c < d1 * d2; ++c) w2_full[c] = w2[c % d2];
  const cplx hb = l1.ctx.hbar;
  auto b1 = l1.build;
  auto b2 = l2.build;
  return make_lop(n, l1.space.tensor(l2.space), l1.ctx, [=](const Expr& x, const Ring& ring) {
    const AuxTensor a1 = b1(x), a2 = b2(x);
    AuxTensor f1(n, 1, ring), f2(n, 1, ring);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        const QMat q1 = a1.at(r, c).coefficient(Monomial{});
        const QMat q2 = a2.at(r, c).coefficient(Monomial{});
        if (!q1.is_zero()) f1.at(r, c) = OperatorElem::coeff(ring, shift_columns(lift(q1, d1, d2, true), w2_full, hb));
        if (!q2.is_zero()) f2.at(r, c) = OperatorElem::coeff(ring, lift(q2, d1, d2, false));
      }
    return f2 * f1;
  }, l2.label + "*" + l1.label);
}

DynamicalLOperator lop_fused_sites(int n, const std::vector<cplx>& vs, const FelderContext& ctx) {
  if (vs.empty()) return lop_trivial(n, ctx);
  DynamicalLOperator acc = lop_from_R(n, vs[0], ctx);
  for (std::size_t j = 1; j < vs.size(); ++j) acc = fuse(lop_from_R(n, vs[j], ctx), acc);
  return acc;
}

// ---------------------------------------------------------------- symbolic helpers

AuxTensor shift_by_aux_weights(const AuxTensor& t, const std::vector<int>& legs, cplx step, bool with_h,
                               const QuantumSpace* space) {
  const int n = t.n();
  const int dq = t.ring()->qdim;
  const auto qw = with_h ? weight_table(*space, n) : std::vector<std::vector<int>>(dq, std::vector<int>(n, 0));
  AuxTensor r = t;
  for (int row = 0; row < t.size(); ++row) {
    for (int col = 0; col < t.size(); ++col) {
      const auto& e = t.at(row, col);
      if (e.is_zero()) continue;
      const auto cd = digits_of(col, n, t.legs());
      std::vector<int> aw(n, 0);
      for (int l : legs) aw[cd.at(l - 1)] += 1;
      std::vector<std::vector<int>> w(dq, aw);
      for (int b = 0; b < dq; ++b)
        for (int k = 0; k < n; ++k) w[b][k] += qw[b][k];
      r.at(row, col) = e.map_coefficients([&](const QMat& q) { return shift_columns(q, w, step); });
    }
  }
  return r;
}

AuxTensor shift_D(int n, const Ring& ring, int sign) {
  return AuxTensor::diagonal(n, ring, [&](int a) { return OperatorElem::monomial(ring, Monomial::of(lam(a), sign)); });
}

AuxTensor spectral_shift(int n, const Ring& ring, int k, Var x) {
  return AuxTensor::diagonal(n, ring, [&](int) { return OperatorElem::monomial(ring, Monomial::of(x, k)); });
}

AuxTensor opaque_tensor(int n, int legs, const Ring& ring, std::uint16_t mask, OpaqueFn::Callback cb) {
  const int dq = ring->qdim;
  const int size = ipow(n, legs);
  const int dim = size * dq;
  const auto ex = opaque_matrix_fn(dim, mask, std::move(cb));
  AuxTensor t(n, legs, ring);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      QMat q(dq);
      for (int i = 0; i < dq; ++i)
        for (int j = 0; j < dq; ++j) q.set(i, j, ex[static_cast<std::size_t>(r * dq + i) * dim + c * dq + j]);
      t.at(r, c) = OperatorElem::coeff(ring, q);
    }
  return t;
}

Mat guarded_inverse(const Mat& m, double max_cond) {
  Eigen::PartialPivLU<Mat> lu(m);
  const double rc = lu.rcond();
  if (!(rc > 1.0 / max_cond)) throw SingularityError("matrix inverse exceeds the condition guard");
  return lu.inverse();
}

// ---------------------------------------------------------------- Manin matrices and families

AuxTensor lop_D(const DynamicalLOperator& l, const Expr& x) { return shift_D(l.n, l.ring) * l.build(x); }

AuxTensor manin_from_lop(const DynamicalLOperator& l) {
  return shift_D(l.n, l.ring) * (*l.at_u) * spectral_shift(l.n, l.ring, 1);
}

AuxTensor manin_inverse_from_lop(const DynamicalLOperator& l) {
  const int n = l.n;
  const int d = n * l.qdim();
  auto lp = std::make_shared<DynamicalLOperator>(l);
  const AuxTensor inv = opaque_tensor(n, 1, l.ring, static_cast<std::uint16_t>(bit(Var::u) | lambda_mask(n)),
                                      [lp, d](const Point& p) {
                                        const Mat x = lp->numeric(p[Var::u], lambda_of(p, lp->n));
                                        if (x.rows() != d) throw UsageError("L-operator size mismatch");
                                        return guarded_inverse(x);
                                      });
  return spectral_shift(n, l.ring, -1) * inv * shift_D(n, l.ring, +1);
}

AuxTensor L_block(const DynamicalLOperator& l, int m, int N, const Expr& base, int total) {
  AuxTensor acc = AuxTensor::identity(l.n, total, l.ring);
  for (int i = m + 1; i <= N; ++i) {
    const Expr x = (i == m + 1) ? base : base + Expr(l.ctx.hbar * static_cast<double>(i - m - 1));
    acc = acc * embed_legs(lop_D(l, x), {i}, total);
  }
  return acc;
}

OperatorElem t_m(const DynamicalLOperator& l, int m) {
  if (m == 0) return one(l.ring);
  if (m > l.n) return OperatorElem(l.ring);
  const AuxTensor a = numeric_aux(antisymmetrizer(m, l.n), l.n, m, l.ring);
  return trace(a * L_block(l, 0, m, U(), m));
}

OperatorElem q_m(const AuxTensor& M, int m) {
  if (m == 0) return one(M.ring());
  if (m > M.n()) return OperatorElem(M.ring());
  AuxTensor prod = embed_legs(M, {1}, m);
  for (int i = 2; i <= m; ++i) prod = prod * embed_legs(M, {i}, m);
  return trace(numeric_aux(antisymmetrizer(m, M.n()), M.n(), m, M.ring()) * prod);
}

OperatorElem sum_minus_t(const DynamicalLOperator& l) {
  OperatorElem acc(l.ring);
  for (int m = 0; m <= l.n; ++m) {
    const OperatorElem t = t_m(l, m) * OperatorElem::monomial(l.ring, Monomial::of(Var::u, m));
    acc = (m % 2 == 0) ? acc + t : acc - t;
  }
  return acc;
}

AuxTensor quantum_power(const DynamicalLOperator& l, int k) {
  AuxTensor acc = AuxTensor::identity(l.n, 1, l.ring);
  for (int j = 0; j < k; ++j) acc = acc * lop_D(l, j == 0 ? U() : U() + Expr(l.ctx.hbar * static_cast<double>(j)));
  return acc;
}

AuxTensor power(const AuxTensor& m, int k) {
  AuxTensor acc = AuxTensor::identity(m.n(), m.legs(), m.ring());
  for (int j = 0; j < k; ++j) acc = acc * m;
  return acc;
}

std::vector<cplx> staircase(cplx base, int count, cplx hbar) {
  std::vector<cplx> r(count);
  for (int i = 0; i < count; ++i) r[i] = base + hbar * static_cast<double>(i);
  return r;
}

Mat fused_R_row(int n, int m, int N, const std::vector<cplx>& us, const std::vector<cplx>& vs, const Lambda& lambda,
                const FelderContext& ctx, RowOrder order, const Layout& layout, const std::vector<int>& extra_mult) {
  const int nf = static_cast<int>(layout.dims.size());
  if (static_cast<int>(us.size()) != m || static_cast<int>(vs.size()) != N - m)
    throw UsageError("fused row needs m points u and N-m points v");
  auto factor = [&](int i, int j) {  // 1-based legs
    std::vector<int> mult(nf, 0);
    if (!extra_mult.empty())
      for (int f = 0; f < nf; ++f) mult[f] = extra_mult.at(f);
    for (int l = i + 1; l <= m; ++l) mult[l - 1] += 1;
    for (int l = j + 1; l <= N; ++l) mult[l - 1] += 1;
    const cplx x = us[i - 1] - vs[j - m - 1];
    return place_weighted(layout, {i - 1, j - 1}, mult,
                          [&](const std::vector<int>& w) { return felder_R(n, x, shifted(lambda, w, ctx.hbar), ctx); });
  };
  Mat acc = Mat::Identity(layout.total(), layout.total());
  if (order == RowOrder::i_major) {
    for (int i = 1; i <= m; ++i)
      for (int j = N; j >= m + 1; --j) acc = acc * factor(i, j);
  } else {
    for (int j = N; j >= m + 1; --j)
      for (int i = 1; i <= m; ++i) acc = acc * factor(i, j);
  }
  return acc;
}

// ---------------------------------------------------------------- sampled comparison

Residual sampled_compare(const AuxTensor& a, const AuxTensor& b, const EllipticParams& ep, const CheckOptions& o) {
  Rng rng(o.seed);
  const std::uint16_t mask = variable_mask(a) | variable_mask(b);
  return sample_residual(o.samples, rng, o.policy, mask, [&](const Point& p) {
    Evaluator ev(ep, p, o.policy.den_guard);
    return compare_at(a, b, ev);
  });
}

Residual sampled_compare(const OperatorElem& a, const OperatorElem& b, const EllipticParams& ep,
                         const CheckOptions& o) {
  Rng rng(o.seed);
  const std::uint16_t mask = variable_mask(a) | variable_mask(b);
  return sample_residual(o.samples, rng, o.policy, mask, [&](const Point& p) {
    Evaluator ev(ep, p, o.policy.den_guard);
    return compare_at(a, b, ev);
  });
}

// ---------------------------------------------------------------- residual checks

namespace {

std::uint16_t uvl_mask(int n) { return static_cast<std::uint16_t>(bit(Var::u) | bit(Var::v) | lambda_mask(n)); }

// L^{(leg)}(x; lambda + hbar * (weights of shift legs)) on the layout; leg is 0-based.
Mat place_L(const DynamicalLOperator& l, const Layout& lay, int leg, cplx x, const Lambda& lambda,
            const std::vector<int>& shift_legs, bool inverse = false) {
  const int q = static_cast<int>(lay.dims.size()) - 1;
  return place_shifted(lay, {leg, q}, shift_legs, [&](const std::vector<int>& w) {
    const Mat m = l.numeric(x, shifted(lambda, w, l.ctx.hbar));
    return inverse ? guarded_inverse(m) : m;
  });
}

std::string ms(int m, int N) { return ":m=" + std::to_string(m) + ",N=" + std::to_string(N); }

}  // namespace

ResidualReport drll_residual(const DynamicalLOperator& l, const CheckOptions& o) {
  auto rep = make_report("DRLL", "DRLL", o);
  const int n = l.n;
  const Layout lay = aux_layout(n, 2, &l.space);
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, uvl_mask(n), [&](const Point& p) {
    const cplx u = p[Var::u], v = p[Var::v];
    const Lambda lm = lambda_of(p, n);
    auto R = [&](const std::vector<int>& shift) {
      return place_shifted(lay, {0, 1}, shift,
                           [&](const std::vector<int>& w) { return felder_R(n, u - v, shifted(lm, w, l.ctx.hbar), l.ctx); });
    };
    const Mat lhs = R({}) * place_L(l, lay, 0, u, lm, {1}) * place_L(l, lay, 1, v, lm, {});
    const Mat rhs = place_L(l, lay, 1, v, lm, {0}) * place_L(l, lay, 0, u, lm, {}) * R({2});
    Residual r;
    r.add_matrix(lhs, rhs);
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport ehl_residual(const DynamicalLOperator& l, const CheckOptions& o) {
  auto rep = make_report("EhL_LEh", "EhL_LEh", o);
  const int n = l.n, dq = l.qdim();
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, bit(Var::u) | lambda_mask(n), [&](const Point& p) {
    const Mat L = l.numeric(p[Var::u], lambda_of(p, n));
    Residual r;
    for (int i = 0; i < n; ++i) {
      Mat e = Mat::Zero(n, n);
      e(i, i) = 1.0;
      Mat h = Mat::Zero(dq, dq);
      const auto w = weight_table(l.space, n);
      for (int b = 0; b < dq; ++b) h(b, b) = static_cast<double>(w[b][i]);
      const Mat X = embed_numeric(e, {n, dq}, {0}) + embed_numeric(h, {n, dq}, {1});
      r.add_matrix(X * L, L * X);
    }
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport rllsym_residual(const DynamicalLOperator& l, const CheckOptions& o) {
  auto rep = make_report("RLLSym", "RLLSym", o);
  const int n = l.n;
  const QMat Re = felder_R_expr(n, U() - V(), l.ctx.hbar);
  AuxTensor R(n, 2, l.ring);
  for (int r = 0; r < n * n; ++r)
    for (int c = 0; c < n * n; ++c)
      if (!Re.at(r, c).is_zero()) R.at(r, c) = OperatorElem::scalar(l.ring, Re.at(r, c));
  const AuxTensor Rh = shift_by_aux_weights(R, {}, l.ctx.hbar, true, &l.space);
  const AuxTensor L1 = embed_legs(lop_D(l, U()), {1}, 2);
  const AuxTensor L2 = embed_legs(lop_D(l, V()), {2}, 2);
  rep.set(sampled_compare(R * L1 * L2, L2 * L1 * Rh, l.ctx.ep, o));
  return rep;
}

ResidualReport manin_lop_residual(const DynamicalLOperator& l, const CheckOptions& o, bool inverse) {
  const AuxTensor M = inverse ? manin_inverse_from_lop(l) : manin_from_lop(l);
  auto rep = manin_check(M, l.ctx.ep, o.samples, o.seed, o.policy);
  rep.identity_id = inverse ? "MDLopIn_Manin" : "AMM_AMMA";
  rep.paper_anchor = inverse ? "MDLopIn" : "AMM_AMMA";
  return rep;
}

ResidualReport manin_inverse_product_residual(const DynamicalLOperator& l, const CheckOptions& o) {
  auto rep = make_report("MDLopIn", "MDLopIn", o);
  const AuxTensor M = manin_from_lop(l);
  const AuxTensor Mi = manin_inverse_from_lop(l);
  const AuxTensor I = AuxTensor::identity(l.n, 1, l.ring);
  Residual r = sampled_compare(M * Mi, I, l.ctx.ep, o);
  r.merge(sampled_compare(Mi * M, I, l.ctx.ep, o));
  rep.set(r);
  return rep;
}

ResidualReport ammm_residual(const DynamicalLOperator& l, int m, int N, bool reversed, const CheckOptions& o) {
  auto rep = make_report(std::string(reversed ? "AMMM_AMMMA_Nm" : "AMMM_AMMMA") + ms(m, N),
                         reversed ? "AMMM_AMMMA_Nm" : "AMMM_AMMMA", o);
  const AuxTensor M = manin_from_lop(l);
  const AuxTensor A = numeric_aux(antisymmetrizer_on(m, N, l.n, N), l.n, N, l.ring);
  AuxTensor prod = AuxTensor::identity(l.n, N, l.ring);
  for (int k = 0; k < N - m; ++k) {
    const int leg = reversed ? N - k : m + 1 + k;
    prod = prod * embed_legs(M, {leg}, N);
  }
  const AuxTensor lhs = A * prod;
  rep.set(sampled_compare(lhs, lhs * A, l.ctx.ep, o));
  return rep;
}

ResidualReport alll_residual(const DynamicalLOperator& l, int m, int N, bool inverse, const CheckOptions& o) {
  auto rep = make_report(std::string(inverse ? "ALLL_ALLLA_inv_Nm" : "ALLL_ALLLA") + ms(m, N),
                         inverse ? "ALLL_ALLLA_inv_Nm" : "ALLL_ALLLA", o);
  const int n = l.n;
  const Layout lay = aux_layout(n, N, &l.space);
  std::vector<int> aux_targets;
  for (int k = m; k < N; ++k) aux_targets.push_back(k);
  const Mat A = embed_numeric(antisymmetrizer(N - m, n), lay.dims, aux_targets);
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, bit(Var::u) | lambda_mask(n), [&](const Point& p) {
    const Lambda lm = lambda_of(p, n);
    Mat X = Mat::Identity(lay.total(), lay.total());
    for (int k = 0; k < N - m; ++k) {
      const int i = inverse ? N - k : m + 1 + k;  // 1-based leg
      std::vector<int> later;
      for (int t = i + 1; t <= N; ++t) later.push_back(t - 1);
      const cplx x = p[Var::u] + l.ctx.hbar * static_cast<double>(i - m - 1);
      X = X * place_L(l, lay, i - 1, x, lm, later, inverse);
    }
    Residual r;
    r.add_matrix(A * X, A * X * A);
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport rprr_order_residual(int n, int m, int N, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("RprRi_RprRj" + ms(m, N), "RprRj", o);
  const Layout lay = aux_layout(n, N);
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, lambda_mask(n), [&](const Point& p) {
    std::vector<cplx> us(m), vs(N - m);
    for (auto& x : us) x = draw_additive(rng, o.policy);
    for (auto& x : vs) x = draw_additive(rng, o.policy);
    const Lambda lm = lambda_of(p, n);
    Residual r;
    r.add_matrix(fused_R_row(n, m, N, us, vs, lm, ctx, RowOrder::i_major, lay),
                 fused_R_row(n, m, N, us, vs, lm, ctx, RowOrder::j_major, lay));
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport ar_ara_residual(int n, int m, int N, char which, bool inverse, const FelderContext& ctx,
                               const CheckOptions& o) {
  const std::string tag = std::string(inverse ? "AR_ARA_inv_" : "AR_ARA_") + which;
  auto rep = make_report(tag + ms(m, N), tag, o);
  const Layout lay = aux_layout(n, N);
  const Mat A = which == 'm' ? antisymmetrizer_on(0, m, n, N) : antisymmetrizer_on(m, N, n, N);
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, uvl_mask(n), [&](const Point& p) {
    const Lambda lm = lambda_of(p, n);
    const Mat R = fused_R_row(n, m, N, staircase(p[Var::u], m, ctx.hbar), staircase(p[Var::v], N - m, ctx.hbar), lm,
                              ctx, RowOrder::i_major, lay);
    const Mat X = inverse ? guarded_inverse(R) : R;
    Residual r;
    r.add_matrix(A * X, A * X * A);
    return r;
  });
  rep.set(res);
  return rep;
}

namespace {

// Numeric fused row as an opaque tensor on aux^N (x) Q with extra multipliers;
// when times_inverse, returns R(extra) R(no extra)^{-1}.
AuxTensor row_tensor(const DynamicalLOperator& l, int m, int N, const std::vector<int>& extra, bool times_inverse) {
  const int n = l.n;
  const Layout lay = aux_layout(n, N, &l.space);
  const FelderContext ctx = l.ctx;
  return opaque_tensor(n, N, l.ring, uvl_mask(n), [=](const Point& p) {
    const Lambda lm = lambda_of(p, n);
    const auto us = staircase(p[Var::u], m, ctx.hbar);
    const auto vs = staircase(p[Var::v], N - m, ctx.hbar);
    const Mat R = fused_R_row(n, m, N, us, vs, lm, ctx, RowOrder::i_major, lay, extra);
    if (!times_inverse) return R;
    return Mat(R * guarded_inverse(fused_R_row(n, m, N, us, vs, lm, ctx, RowOrder::i_major, lay)));
  });
}

}  // namespace

ResidualReport dreleLL_residual(const DynamicalLOperator& l, int m, int N, const CheckOptions& o) {
  auto rep = make_report("DReLLeLL" + ms(m, N), "DReLLeLL", o);
  std::vector<int> minus_all(N + 1, -1), plus_h(N + 1, 0);
  minus_all[N] = 0;
  plus_h[N] = 1;
  const AuxTensor Lu = L_block(l, 0, m, U(), N);
  const AuxTensor Lv = L_block(l, m, N, V(), N);
  const AuxTensor lhs = row_tensor(l, m, N, minus_all, false) * Lu * Lv;
  const AuxTensor rhs = Lv * Lu * row_tensor(l, m, N, plus_h, false);
  rep.set(sampled_compare(lhs, rhs, l.ctx.ep, o));
  return rep;
}

ResidualReport ht_th_residual(const DynamicalLOperator& l, int m, const CheckOptions& o) {
  auto rep = make_report("ht_th:m=" + std::to_string(m), "ht_th", o);
  const OperatorElem t = t_m(l, m);
  Residual r;
  for (int k = 0; k < l.n; ++k) {
    const OperatorElem h = OperatorElem::coeff(l.ring, QMat::from_numeric(l.space.cartan(k)));
    r.merge(sampled_compare(h * t, t * h, l.ctx.ep, o));
  }
  rep.set(r);
  return rep;
}

ResidualReport eeea_residual(int n, int m) {
  ResidualReport rep;
  rep.identity_id = "EEEA_AEEE:m=" + std::to_string(m);
  rep.paper_anchor = "EEEA_AEEE";
  rep.samples_used = 1;
  const Mat A = antisymmetrizer(m, n);
  Residual r;
  for (int j = 0; j < n; ++j) {
    Mat e = Mat::Zero(n, n);
    e(j, j) = 1.0;
    Mat E = Mat::Zero(A.rows(), A.cols());
    for (int l = 0; l < m; ++l) E += embed_numeric(e, std::vector<int>(m, n), {l});
    r.add_matrix(E * A, A * E);
  }
  rep.set(r);
  return rep;
}

ResidualReport det_gener_residual(const DynamicalLOperator& l, const CheckOptions& o) {
  auto rep = make_report("det_gener", "det_gener", o);
  const AuxTensor M = manin_from_lop(l);
  const OperatorElem det = column_det(AuxTensor::identity(l.n, 1, l.ring) - M);
  rep.set(sampled_compare(det, sum_minus_t(l), l.ctx.ep, o));
  return rep;
}

ResidualReport det_trA_residual(const DynamicalLOperator& l, const CheckOptions& o) {
  auto rep = make_report("det_trA", "det_trA", o);
  const AuxTensor M = manin_from_lop(l);
  rep.set(sampled_compare(column_det(M), q_m(M, l.n), l.ctx.ep, o));
  return rep;
}

ResidualReport tt_tt0_residual(const DynamicalLOperator& l, int m, int s, const CheckOptions& o) {
  auto rep = make_report("tt_tt0:m=" + std::to_string(m) + ",s=" + std::to_string(s), "tt_tt0", o);
  const int N = m + s;
  if (s == 0) {
    rep.samples_used = 0;
    return rep;
  }
  const int n = l.n;
  const AuxTensor AA = numeric_aux(antisymmetrizer_on(0, m, n, N) * antisymmetrizer_on(m, N, n, N), n, N, l.ring);
  const AuxTensor Lu = L_block(l, 0, m, U(), N);
  const AuxTensor Lv = L_block(l, m, N, V(), N);
  std::vector<int> plus_h(N + 1, 0);
  plus_h[N] = 1;
  const OperatorElem lhs = trace(AA * Lu * Lv);
  const OperatorElem rhs = trace(AA * Lv * Lu * row_tensor(l, m, N, plus_h, true));
  rep.set(sampled_compare(lhs, rhs, l.ctx.ep, o));
  return rep;
}

ResidualReport newton_residual(const AuxTensor& M, int up_to_m, const EllipticParams& ep, const CheckOptions& o) {
  auto rep = make_report("Newton", "Newton", o);
  std::vector<OperatorElem> q;
  std::vector<OperatorElem> trp;  // tr(M^k)
  AuxTensor pw = AuxTensor::identity(M.n(), 1, M.ring());
  trp.push_back(trace(pw));
  for (int k = 1; k <= up_to_m; ++k) {
    pw = pw * M;
    trp.push_back(trace(pw));
  }
  for (int k = 0; k <= up_to_m; ++k) q.push_back(q_m(M, k));
  // scaled by the largest summand: for m > n both sides vanish
  std::vector<OperatorElem> lhs, rhs;
  std::vector<std::vector<OperatorElem>> terms(up_to_m + 1);
  for (int m = 1; m <= up_to_m; ++m) {
    OperatorElem acc(M.ring());
    for (int k = 0; k < m; ++k) {
      const OperatorElem t = q[k] * trp[m - k];
      terms[m].push_back(t);
      acc = ((m + k + 1) % 2 == 0) ? acc + t : acc - t;
    }
    lhs.push_back(q[m].scaled(Expr(static_cast<double>(m))));
    rhs.push_back(acc);
  }
  std::uint16_t mask = variable_mask(M);
  Rng rng(o.seed);
  const Residual r = sample_residual(o.samples, rng, o.policy, mask, [&](const Point& p) {
    Evaluator ev(ep, p, o.policy.den_guard);
    Residual res;
    for (int m = 1; m <= up_to_m; ++m) {
      const auto a = lhs[m - 1].eval(ev), b = rhs[m - 1].eval(ev);
      double scale = 0.0;
      for (const auto& t : terms[m])
        for (const auto& [mono, x] : t.eval(ev)) scale = std::max(scale, x.cwiseAbs().maxCoeff());
      for (const auto& [mono, x] : a) scale = std::max(scale, x.cwiseAbs().maxCoeff());
      double diff = 0.0;
      for (const auto& [mono, x] : a) {
        auto it = b.find(mono);
        diff = std::max(diff, (it == b.end() ? x : Mat(x - it->second)).cwiseAbs().maxCoeff());
      }
      for (const auto& [mono, x] : b)
        if (!a.count(mono)) diff = std::max(diff, x.cwiseAbs().maxCoeff());
      res.add(diff, scale);
    }
    return res;
  });
  rep.set(r);
  return rep;
}

ResidualReport qpow_residual(const DynamicalLOperator& l, int k, const CheckOptions& o) {
  auto rep = make_report("qpow:k=" + std::to_string(k), "qpow", o);
  const AuxTensor M = manin_from_lop(l);
  rep.set(sampled_compare(power(M, k), quantum_power(l, k) * spectral_shift(l.n, l.ring, k), l.ctx.ep, o));
  return rep;
}

// ---------------------------------------------------------------- trigonometric Manin matrices

AuxTensor trig_manin_matrix(int n, cplx w, bool twisted, cplx hbar) {
  const cplx q = std::exp(kI * kPi * hbar);
  const QuantumSpace space(n, {defining_site(n, w)});
  const Ring ring = make_ring(Flavor::shift, n, hbar);
  const QMat R = trig_R_expr(twisted ? RKind::trig_tilde : RKind::trig_nondynamical, n, Expr::var(Var::z), w, q);
  AuxTensor L(n, 1, ring);
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c) {
      QMat block(n);
      for (int b = 0; b < n; ++b)
        for (int d = 0; d < n; ++d) block.set(b, d, R.at(a * n + b, c * n + d));
      if (!block.is_zero()) L.at(a, c) = OperatorElem::coeff(ring, block);
    }
  if (twisted) {
    // G_ii is diagonal on the site with entries read off its weights.
    const AuxTensor G = AuxTensor::diagonal(n, ring, [&](int i) {
      Mat g = Mat::Zero(n, n);
      for (int b = 0; b < n; ++b) g(b, b) = trig_twist_G(n, space.weight(b), q)(i, i);
      return OperatorElem::coeff(ring, QMat::from_numeric(g));
    });
    L = G * L * G;
  }
  return L * spectral_shift(n, ring, 1, Var::z);
}

ResidualReport trig_manin_residual(int n, cplx w, bool twisted, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = manin_check(trig_manin_matrix(n, w, twisted, ctx.hbar), ctx.ep, o.samples, o.seed, o.policy);
  rep.identity_id = twisted ? "trig_Manin_GLG" : "trig_Manin";
  rep.paper_anchor = twisted ? "Rtildetrig" : "Rtrig";
  return rep;
}

}  // namespace ellgaudin
