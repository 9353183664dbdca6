#include "ellgaudin/felder.hpp"

#include <algorithm>
#include <cmath>

namespace ellgaudin {

cplx FelderContext::den(cplx x) const {
  const cplx t = theta(x, ep);
  if (std::abs(t) < guard) throw SingularityError("theta denominator below guard");
  return t;
}

namespace {

int pair(int n, int a, int b) { return a * n + b; }

void check_lambda(int n, const Lambda& lambda) {
  if (static_cast<int>(lambda.size()) < n) throw UsageError("too few dynamical parameters");
}

Lambda draw_lambda(const Point& p, int n) {
  Lambda l(n);
  for (int k = 0; k < n; ++k) l[k] = p.lambda(k);
  return l;
}

std::uint16_t spectral_mask(int n) { return static_cast<std::uint16_t>(bit(Var::u) | bit(Var::v) | lambda_mask(n)); }

ResidualReport make_report(const char* id, const char* anchor, const CheckOptions& o) {
  ResidualReport r;
  r.identity_id = id;
  r.paper_anchor = anchor;
  r.seed = o.seed;
  r.samples_used = o.samples;
  return r;
}

double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

Mat flip(int n) { return permutation_operator(n, {1, 0}); }

// ---------------------------------------------------------------- numeric matrices

Mat felder_R(int n, cplx u, const Lambda& lambda, const FelderContext& ctx) {
  check_lambda(n, lambda);
  const int d = n * n;
  Mat R = Mat::Zero(d, d);
  const cplx hb = ctx.hbar;
  const cplx tu = ctx.den(u);
  const cplx diag = ctx.th(u + hb) / tu;
  const cplx th_h = ctx.th(hb);
  for (int i = 0; i < n; ++i) R(pair(n, i, i), pair(n, i, i)) = diag;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const cplx lij = lambda[i] - lambda[j];
      R(pair(n, i, j), pair(n, i, j)) = ctx.th(lij + hb) / ctx.den(lij);
      // E_ij (x) E_ji maps e_j (x) e_i to e_i (x) e_j
      R(pair(n, i, j), pair(n, j, i)) = ctx.th(u - lij) * th_h / (tu * ctx.den(-lij));
    }
  return R;
}

Mat classical_r(int n, cplx u, const Lambda& lambda, const FelderContext& ctx) {
  check_lambda(n, lambda);
  Mat r = Mat::Zero(n * n, n * n);
  const cplx tu = ctx.den(u);
  const cplx ld = theta_deriv(1, u, ctx.ep) / tu;
  for (int i = 0; i < n; ++i) r(pair(n, i, i), pair(n, i, i)) = ld;
  r += classical_twist_f(n, lambda, ctx);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const cplx lij = lambda[i] - lambda[j];
      r(pair(n, i, j), pair(n, j, i)) = ctx.th(u - lij) / (tu * ctx.den(-lij));
    }
  return r;
}

Mat classical_twist_f(int n, const Lambda& lambda, const FelderContext& ctx) {
  Mat f = Mat::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const cplx lij = lambda[i] - lambda[j];
      f(pair(n, i, j), pair(n, i, j)) = theta_deriv(1, lij, ctx.ep) / ctx.den(lij);
    }
  return f;
}

Mat twisted_r(int n, cplx u, const Lambda& lambda, const FelderContext& ctx) {
  check_lambda(n, lambda);
  Mat r = Mat::Zero(n * n, n * n);
  const cplx tu = ctx.den(u);
  const cplx ld = theta_deriv(1, u, ctx.ep) / tu;
  for (int i = 0; i < n; ++i) r(pair(n, i, i), pair(n, i, i)) = ld;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const cplx lij = lambda[i] - lambda[j];
      r(pair(n, i, j), pair(n, j, i)) = ctx.th(u - lij) / (tu * ctx.den(-lij));
    }
  return r;
}

Mat r_minus_hbar_B(int n, const Lambda& lambda, const FelderContext& ctx) {
  Mat B = Mat::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const cplx lij = lambda[i] - lambda[j];
      B(pair(n, i, j), pair(n, i, j)) = 0.5 * ctx.th(lij) / ctx.den(lij + ctx.hbar);
    }
  return B;
}

Mat trig_R(RKind kind, int n, cplx z, cplx w, const Lambda& lambda, cplx q, double guard) {
  Mat R = Mat::Zero(n * n, n * n);
  const cplx zw = z - w;
  if (std::abs(zw) < guard) throw SingularityError("z close to w");
  const cplx qi = 1.0 / q;
  const cplx diag = (z * q - w * qi) / zw;
  for (int i = 0; i < n; ++i) R(pair(n, i, i), pair(n, i, i)) = diag;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      switch (kind) {
        case RKind::trig_dynamical: {
          check_lambda(n, lambda);
          const cplx mu = std::exp(2.0 * kI * kPi * (lambda[i] - lambda[j]));
          if (std::abs(mu - 1.0) < guard) throw SingularityError("mu close to 1");
          R(pair(n, i, j), pair(n, i, j)) = (mu * q - qi) / (mu - 1.0);
          R(pair(n, i, j), pair(n, j, i)) = (q - qi) * (z - w * mu) / (zw * (1.0 - mu));
          break;
        }
        case RKind::trig_nondynamical:
        case RKind::trig_tilde: {
          if (i < j) {
            const bool tilde = kind == RKind::trig_tilde;
            R(pair(n, i, j), pair(n, i, j)) = tilde ? cplx(1.0) : q;
            R(pair(n, j, i), pair(n, j, i)) = tilde ? cplx(1.0) : qi;
            R(pair(n, i, j), pair(n, j, i)) = (q - qi) * w / zw;
            R(pair(n, j, i), pair(n, i, j)) = (q - qi) * z / zw;
          }
          break;
        }
        default: throw UsageError("not a trigonometric kind");
      }
    }
  }
  return R;
}

Mat trig_F(int n, cplx q) {
  Mat F = Mat::Identity(n * n, n * n);
  const cplx sq = std::sqrt(q);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      F(pair(n, i, j), pair(n, i, j)) = sq;
      F(pair(n, j, i), pair(n, j, i)) = 1.0 / sq;
    }
  return F;
}

Mat trig_twist_G(int n, const std::vector<int>& weights, cplx q) {
  if (static_cast<int>(weights.size()) != n) throw UsageError("weight vector length must equal n");
  Mat G = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    int e = 0;
    for (int j = i + 1; j < n; ++j) e += weights[j];
    for (int j = 0; j < i; ++j) e -= weights[j];
    G(i, i) = std::pow(q, 0.5 * e);
  }
  return G;
}

// ---------------------------------------------------------------- expression forms

namespace {

Expr lam_diff(int i, int j) { return Expr::var(lam(i)) - Expr::var(lam(j)); }

}  // namespace

QMat felder_R_expr(int n, const Expr& x, cplx hbar) {
  QMat R(n * n);
  const Expr hb(hbar);
  const Expr tx = theta_of(x);
  const Expr diag = theta_of(x + hb) / tx;
  const Expr th_h = theta_of(hb);
  for (int i = 0; i < n; ++i) R.set(pair(n, i, i), pair(n, i, i), diag);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const Expr lij = lam_diff(i, j);
      R.set(pair(n, i, j), pair(n, i, j), theta_of(lij + hb) / theta_of(lij));
      R.set(pair(n, i, j), pair(n, j, i), theta_of(x - lij) * th_h / (tx * theta_of(-lij)));
    }
  return R;
}

QMat twisted_r_expr(int n, const Expr& x) {
  QMat r(n * n);
  const Expr tx = theta_of(x);
  const Expr ld = theta_of(x, 1) / tx;
  for (int i = 0; i < n; ++i) r.set(pair(n, i, i), pair(n, i, i), ld);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const Expr lij = lam_diff(i, j);
      r.set(pair(n, i, j), pair(n, j, i), theta_of(x - lij) / (tx * theta_of(-lij)));
    }
  return r;
}

namespace {

QMat twist_f_expr(int n) {
  QMat f(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) f.set(pair(n, i, j), pair(n, i, j), log_deriv_theta(lam_diff(i, j)));
  return f;
}

}  // namespace

QMat classical_r_expr(int n, const Expr& x) { return twisted_r_expr(n, x) + twist_f_expr(n); }

QMat trig_R_expr(RKind kind, int n, const Expr& z, cplx w, cplx q) {
  QMat R(n * n);
  const cplx qi = 1.0 / q;
  const Expr W(w);
  const Expr zw = z - W;
  const Expr diag = (z * Expr(q) - Expr(w * qi)) / zw;
  for (int i = 0; i < n; ++i) R.set(pair(n, i, i), pair(n, i, i), diag);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (kind == RKind::trig_dynamical) {
        const Expr mu = exp_of(Expr(2.0 * kI * kPi) * lam_diff(i, j));
        R.set(pair(n, i, j), pair(n, i, j), (mu * Expr(q) - Expr(qi)) / (mu - Expr(1.0)));
        R.set(pair(n, i, j), pair(n, j, i), Expr(q - qi) * (z - W * mu) / (zw * (Expr(1.0) - mu)));
      } else if (i < j) {
        const bool tilde = kind == RKind::trig_tilde;
        R.set(pair(n, i, j), pair(n, i, j), tilde ? Expr(1.0) : Expr(q));
        R.set(pair(n, j, i), pair(n, j, i), tilde ? Expr(1.0) : Expr(qi));
        R.set(pair(n, i, j), pair(n, j, i), Expr((q - qi) * w) / zw);
        R.set(pair(n, j, i), pair(n, i, j), Expr(q - qi) * z / zw);
      }
    }
  return R;
}

// ---------------------------------------------------------------- layouts

int Layout::total() const {
  int t = 1;
  for (int d : dims) t *= d;
  return t;
}

Layout aux_layout(int n, int legs, const QuantumSpace* q) {
  Layout l;
  l.n = n;
  std::vector<std::vector<int>> aux(n, std::vector<int>(n, 0));
  for (int a = 0; a < n; ++a) aux[a][a] = 1;
  for (int i = 0; i < legs; ++i) {
    l.dims.push_back(n);
    l.weights.push_back(aux);
  }
  if (q) {
    l.dims.push_back(q->dim());
    std::vector<std::vector<int>> w(q->dim());
    for (int b = 0; b < q->dim(); ++b) w[b] = q->rank() ? q->weight(b) : std::vector<int>(n, 0);
    l.weights.push_back(w);
  }
  return l;
}

Mat place_shifted(const Layout& layout, const std::vector<int>& targets, const std::vector<int>& shift_factors,
                  const std::function<Mat(const std::vector<int>&)>& fn) {
  std::vector<int> mult(layout.dims.size(), 0);
  for (int f : shift_factors) mult.at(f) = 1;
  return place_weighted(layout, targets, mult, fn);
}

Mat place_weighted(const Layout& layout, const std::vector<int>& targets, const std::vector<int>& multipliers,
                   const std::function<Mat(const std::vector<int>&)>& fn) {
  const int n = layout.n;
  const int nf = static_cast<int>(layout.dims.size());
  if (static_cast<int>(multipliers.size()) != nf) throw UsageError("one multiplier per tensor factor expected");
  if (std::all_of(multipliers.begin(), multipliers.end(), [](int m) { return m == 0; }))
    return embed_numeric(fn(std::vector<int>(n, 0)), layout.dims, targets);
  const int total = layout.total();
  std::map<std::vector<int>, Mat> cache;
  Mat out(total, total);
  std::vector<int> digit(nf);
  for (int col = 0; col < total; ++col) {
    int rem = col;
    for (int f = nf - 1; f >= 0; --f) {
      digit[f] = rem % layout.dims[f];
      rem /= layout.dims[f];
    }
    std::vector<int> w(n, 0);
    for (int f = 0; f < nf; ++f)
      if (multipliers[f])
        for (int j = 0; j < n; ++j) w[j] += multipliers[f] * layout.weights[f][digit[f]][j];
    auto it = cache.find(w);
    if (it == cache.end()) it = cache.emplace(w, embed_numeric(fn(w), layout.dims, targets)).first;
    out.col(col) = it->second.col(col);
  }
  return out;
}

Lambda shifted(const Lambda& lambda, const std::vector<int>& w, cplx step) {
  Lambda r = lambda;
  for (std::size_t k = 0; k < r.size() && k < w.size(); ++k) r[k] += step * static_cast<double>(w[k]);
  return r;
}

// ---------------------------------------------------------------- residual checks

ResidualReport dybe_residual(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("DYBE", "DYBE", o);
  Rng rng(o.seed);
  const Layout lay = aux_layout(n, 3);
  const Residual res = sample_residual(o.samples, rng, o.policy, spectral_mask(n), [&](const Point& p) {
    const cplx u1 = p[Var::u], u2 = p[Var::v], u3 = draw_additive(rng, o.policy);
    const Lambda l = draw_lambda(p, n);
    auto R = [&](cplx x) {
      return [&, x](const std::vector<int>& w) { return felder_R(n, x, shifted(l, w, ctx.hbar), ctx); };
    };
    const Mat lhs = place_shifted(lay, {0, 1}, {}, R(u1 - u2)) * place_shifted(lay, {0, 2}, {1}, R(u1 - u3)) *
                    place_shifted(lay, {1, 2}, {}, R(u2 - u3));
    const Mat rhs = place_shifted(lay, {1, 2}, {0}, R(u2 - u3)) * place_shifted(lay, {0, 2}, {}, R(u1 - u3)) *
                    place_shifted(lay, {0, 1}, {2}, R(u1 - u2));
    Residual r;
    r.add_matrix(lhs, rhs);
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport unitarity_residual(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("R21R12", "R21R12", o);
  Rng rng(o.seed);
  const Mat P = flip(n);
  const Residual res = sample_residual(o.samples, rng, o.policy, spectral_mask(n), [&](const Point& p) {
    const cplx u = p[Var::u];
    const Lambda l = draw_lambda(p, n);
    const Mat lhs = P * felder_R(n, -u, l, ctx) * P * felder_R(n, u, l, ctx);
    const cplx s = ctx.th(u + ctx.hbar) * ctx.th(u - ctx.hbar) / (ctx.den(u) * ctx.th(u));
    Residual r;
    r.add_matrix(lhs, s * Mat::Identity(n * n, n * n));
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport weight_zero_residual(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("EER_REE", "EER_REE", o);
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, spectral_mask(n), [&](const Point& p) {
    const Mat R = felder_R(n, p[Var::u], draw_lambda(p, n), ctx);
    Residual r;
    for (int i = 0; i < n; ++i) {
      Mat e = Mat::Zero(n, n);
      e(i, i) = 1.0;
      const Mat E = embed_numeric(e, {n, n}, {0}) + embed_numeric(e, {n, n}, {1});
      r.add_matrix(E * R, R * E);
    }
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport dcommute_residual(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("DR_RD", "DR_RD", o);
  auto ring = make_ring(Flavor::diff, 1, ctx.hbar);
  const QMat Re = felder_R_expr(n, Expr::var(Var::u), ctx.hbar);
  AuxTensor R(n, 2, ring), D(n, 2, ring);
  for (int r = 0; r < n * n; ++r) {
    for (int c = 0; c < n * n; ++c) {
      const Expr& e = Re.at(r, c);
      if (!e.is_zero()) R.at(r, c) = OperatorElem::scalar(ring, e);
    }
    const int a = r / n, b = r % n;
    D.at(r, r) = OperatorElem::monomial(ring, Monomial::of(lam(a))) + OperatorElem::monomial(ring, Monomial::of(lam(b)));
  }
  const AuxTensor lhs = D * R;
  const AuxTensor rhs = R * D;
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, spectral_mask(n), [&](const Point& p) {
    Evaluator ev(ctx.ep, p, o.policy.den_guard);
    return compare_at(lhs, rhs, ev);
  });
  rep.set(res);
  return rep;
}

ResidualReport r_minus_hbar_B_residual(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("R_mhbar_B", "R_mhbar", o);
  Rng rng(o.seed);
  const Mat A = antisymmetrizer(2, n);
  const Residual res = sample_residual(o.samples, rng, o.policy, lambda_mask(n), [&](const Point& p) {
    const Lambda l = draw_lambda(p, n);
    Residual r;
    r.add_matrix(r_minus_hbar_B(n, l, ctx) * felder_R(n, -ctx.hbar, l, ctx), A);
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport r_minus_hbar_A_residual(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("R_mhbar_A", "R_mhbar", o);
  Rng rng(o.seed);
  const Mat A = antisymmetrizer(2, n);
  const Residual res = sample_residual(o.samples, rng, o.policy, lambda_mask(n), [&](const Point& p) {
    const Mat R = felder_R(n, -ctx.hbar, draw_lambda(p, n), ctx);
    Residual r;
    r.add_matrix(R * A, R);
    return r;
  });
  rep.set(res);
  return rep;
}

namespace {

}  // namespace

Mat extrapolate(const std::vector<double>& h, const std::vector<Mat>& d) {
  std::vector<Mat> p = d;
  const int m = static_cast<int>(h.size());
  for (int k = 1; k < m; ++k)
    for (int i = 0; i < m - k; ++i) p[i] = (h[i + k] * p[i] - h[i] * p[i + 1]) / (h[i + k] - h[i]);
  return p[0];
}

namespace {

Mat difference_quotient(int n, cplx u, const Lambda& l, const FelderContext& ctx, double hb) {
  FelderContext c = ctx;
  c.hbar = hb;
  return (felder_R(n, u, l, c) - Mat::Identity(n * n, n * n)) / hb;
}

}  // namespace

LimitResult classical_limit_at(int n, cplx u, const Lambda& lambda, const FelderContext& ctx,
                               const std::vector<double>& hbars) {
  if (hbars.size() < 2) throw UsageError("extrapolation needs at least two step sizes");
  std::vector<Mat> d;
  for (double h : hbars) d.push_back(difference_quotient(n, u, lambda, ctx, h));
  const Mat ext = extrapolate(hbars, d);
  const Mat r = classical_r(n, u, lambda, ctx);
  LimitResult out;
  out.error = max_abs(ext - r) / (1.0 + max_abs(r));
  // the same ladder with every step doubled, so the smallest one doubles too
  std::vector<double> h2;
  std::vector<Mat> d2;
  for (double h : hbars) {
    h2.push_back(2.0 * h);
    d2.push_back(difference_quotient(n, u, lambda, ctx, 2.0 * h));
  }
  out.stability = max_abs(extrapolate(h2, d2) - ext) / (1.0 + max_abs(r));
  return out;
}

ResidualReport classical_limit_residual(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("cderm_limit", "cderm", o);
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, spectral_mask(n), [&](const Point& p) {
    const auto lr = classical_limit_at(n, p[Var::u], draw_lambda(p, n), ctx, {1e-2, 5e-3, 2.5e-3});
    Residual r;
    r.max_abs = lr.error;
    r.max_rel = lr.error;
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport classical_antisymmetry_residual(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("cderm_antisym", "cderm", o);
  Rng rng(o.seed);
  const Mat P = flip(n);
  const Residual res = sample_residual(o.samples, rng, o.policy, spectral_mask(n), [&](const Point& p) {
    const Lambda l = draw_lambda(p, n);
    const cplx u = p[Var::u];
    const Mat s = classical_r(n, u, l, ctx) + P * classical_r(n, -u, l, ctx) * P;
    Mat x = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) x(i, i) = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Mat X = embed_numeric(x, {n, n}, {0}) + embed_numeric(x, {n, n}, {1});
    Residual r;
    r.add_matrix(s * X, X * s);
    return r;
  });
  rep.set(res);
  return rep;
}

namespace {

// [[a, b]] + D(c) in the three-leg evaluation representation.
struct ClassicalTriple {
  Mat a12, a13, a23;                          // values
  std::vector<Mat> d12, d13, d23;             // d/d lambda_k
};

ClassicalTriple triple(int n, const std::function<QMat(const Expr&)>& make, const Point& p, cplx w,
                       const FelderContext& ctx, double guard) {
  ClassicalTriple t;
  const Expr U = Expr::var(Var::u), V = Expr::var(Var::v), W(w);
  const QMat m12 = make(U - V), m13 = make(U - W), m23 = make(V - W);
  Evaluator ev(ctx.ep, p, guard);
  const std::vector<int> dims = {n, n, n};
  t.a12 = embed_numeric(m12.eval(ev), dims, {0, 1});
  t.a13 = embed_numeric(m13.eval(ev), dims, {0, 2});
  t.a23 = embed_numeric(m23.eval(ev), dims, {1, 2});
  for (int k = 0; k < n; ++k) {
    auto d = [&](const QMat& m) { return m.map([&](const Expr& e) { return differentiate(e, lam(k)); }); };
    t.d12.push_back(embed_numeric(d(m12).eval(ev), dims, {0, 1}));
    t.d13.push_back(embed_numeric(d(m13).eval(ev), dims, {0, 2}));
    t.d23.push_back(embed_numeric(d(m23).eval(ev), dims, {1, 2}));
  }
  return t;
}

Mat comm(const Mat& a, const Mat& b) { return a * b - b * a; }

Mat double_bracket(const ClassicalTriple& a, const ClassicalTriple& b) {
  return comm(a.a12, b.a13) + comm(a.a12, b.a23) + comm(a.a13, b.a23);
}

double bracket_scale(const ClassicalTriple& a, const ClassicalTriple& b) {
  return std::max({max_abs(a.a12) * max_abs(b.a13), max_abs(a.a12) * max_abs(b.a23), max_abs(a.a13) * max_abs(b.a23)});
}

Mat dyn_term(int n, const ClassicalTriple& a, double* scale) {
  const std::vector<int> dims = {n, n, n};
  Mat out = Mat::Zero(n * n * n, n * n * n);
  for (int k = 0; k < n; ++k) {
    Mat e = Mat::Zero(n, n);
    e(k, k) = 1.0;
    out += -embed_numeric(e, dims, {0}) * a.d23[k] + embed_numeric(e, dims, {1}) * a.d13[k] -
           embed_numeric(e, dims, {2}) * a.d12[k];
    if (scale) *scale = std::max({*scale, max_abs(a.d23[k]), max_abs(a.d13[k]), max_abs(a.d12[k])});
  }
  return out;
}

}  // namespace

ResidualReport cdybe_residual(int n, const FelderContext& ctx, const CheckOptions& o, bool twisted) {
  auto rep = make_report(twisted ? "CDYBE_twisted" : "CDYBE", "CDYBE", o);
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, spectral_mask(n), [&](const Point& p) {
    const cplx w = draw_additive(rng, o.policy);
    auto make = [&](const Expr& x) { return twisted ? twisted_r_expr(n, x) : classical_r_expr(n, x); };
    const ClassicalTriple t = triple(n, make, p, w, ctx, o.policy.den_guard);
    double scale = bracket_scale(t, t);
    const Mat total = double_bracket(t, t) + dyn_term(n, t, &scale);
    Residual r;
    r.add_zero(total, scale);
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport classical_twist_residual(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("cdtwist", "cdtwist", o);
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, spectral_mask(n), [&](const Point& p) {
    const cplx w = draw_additive(rng, o.policy);
    const ClassicalTriple f = triple(n, [&](const Expr&) { return twist_f_expr(n); }, p, w, ctx, o.policy.den_guard);
    const ClassicalTriple rt =
        triple(n, [&](const Expr& x) { return twisted_r_expr(n, x); }, p, w, ctx, o.policy.den_guard);
    Residual r;
    r.add_zero(double_bracket(f, f), bracket_scale(f, f));
    r.add_zero(double_bracket(rt, f) + double_bracket(f, rt), std::max(bracket_scale(rt, f), bracket_scale(f, rt)));
    double s = 0.0;
    const Mat d = dyn_term(n, f, &s);
    r.add_zero(d, s);
    // r~ = r - f, numerically
    const Lambda l = draw_lambda(p, n);
    const cplx x = p[Var::u] - p[Var::v];
    r.add_matrix(twisted_r(n, x, l, ctx), classical_r(n, x, l, ctx) - classical_twist_f(n, l, ctx));
    return r;
  });
  rep.set(res);
  return rep;
}

// ---------------------------------------------------------------- trigonometric

namespace {

cplx q_of(const FelderContext& ctx) { return std::exp(kI * kPi * ctx.hbar); }
cplx e2pi(cplx x) { return std::exp(2.0 * kI * kPi * x); }

}  // namespace

double trig_limit_at(int n, double im_tau, const FelderContext& ctx, const CheckOptions& o) {
  FelderContext c = ctx;
  c.ep = EllipticParams::make({0.0, im_tau}, ctx.ep.series_tol, ctx.ep.max_terms);
  Rng rng(o.seed);
  const Residual res = sample_residual(o.samples, rng, o.policy, spectral_mask(n), [&](const Point& p) {
    // Pull u and v apart vertically so the tau corrections stay above rounding.
    const cplx u = p[Var::u] + cplx(0.0, 1.2);
    const cplx v = p[Var::v] - cplx(0.0, 1.2);
    const Lambda l = draw_lambda(p, n);
    Residual r;
    r.add_matrix(felder_R(n, u - v, l, c), trig_R(RKind::trig_dynamical, n, e2pi(u), e2pi(v), l, q_of(c)));
    return r;
  });
  return res.max_rel;
}

ResidualReport trig_limit_residual(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("trig_limit", "RtrigD", o);
  const double r8 = trig_limit_at(n, 8.0, ctx, o);
  rep.max_abs = r8;
  rep.max_rel = r8;
  return rep;
}

ResidualReport trig_limit_trend(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("trig_trend", "RtrigD", o);
  const double r6 = trig_limit_at(n, 6.0, ctx, o);
  const double r8 = trig_limit_at(n, 8.0, ctx, o);
  // ratio below one certifies the decrease
  rep.max_abs = r8;
  rep.max_rel = r6 > 0.0 ? r8 / r6 : (r8 > 0.0 ? INFINITY : 0.0);
  return rep;
}

ResidualReport trig_fconj_residual(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("Fconj", "Rtildetrig", o);
  Rng rng(o.seed);
  const cplx q = q_of(ctx);
  const Mat F = trig_F(n, q);
  const Mat F21 = flip(n) * F * flip(n);
  const Mat Fi = F.inverse();
  const Residual res = sample_residual(o.samples, rng, o.policy, bit(Var::u) | bit(Var::v), [&](const Point& p) {
    const cplx z = e2pi(p[Var::u]), w = e2pi(p[Var::v]);
    Residual r;
    r.add_matrix(F21 * trig_R(RKind::trig_nondynamical, n, z, w, {}, q, o.policy.den_guard) * Fi,
                 trig_R(RKind::trig_tilde, n, z, w, {}, q, o.policy.den_guard));
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport trig_nondynamical_limit_residual(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("trig_nondyn", "Rtrig", o);
  Rng rng(o.seed);
  const cplx q = q_of(ctx);
  const Residual res = sample_residual(o.samples, rng, o.policy, spectral_mask(n), [&](const Point& p) {
    Lambda l = draw_lambda(p, n);
    // Im(lambda_k - lambda_{k+1}) = -6
    for (int k = 0; k < n; ++k) l[k] = cplx(l[k].real(), 6.0 * k);
    const cplx z = e2pi(p[Var::u]), w = e2pi(p[Var::v]);
    Residual r;
    r.add_matrix(trig_R(RKind::trig_dynamical, n, z, w, l, q, o.policy.den_guard),
                 trig_R(RKind::trig_nondynamical, n, z, w, {}, q, o.policy.den_guard));
    return r;
  });
  rep.set(res);
  return rep;
}

ResidualReport trig_dybe_residual(int n, const FelderContext& ctx, const CheckOptions& o) {
  auto rep = make_report("trig_DYBE", "RtrigD", o);
  Rng rng(o.seed);
  const cplx q = q_of(ctx);
  const Layout lay = aux_layout(n, 3);
  const Residual res = sample_residual(o.samples, rng, o.policy, spectral_mask(n), [&](const Point& p) {
    const cplx z1 = e2pi(p[Var::u]), z2 = e2pi(p[Var::v]), z3 = e2pi(draw_additive(rng, o.policy));
    const Lambda l = draw_lambda(p, n);
    auto R = [&](cplx a, cplx b) {
      return [&, a, b](const std::vector<int>& w) {
        return trig_R(RKind::trig_dynamical, n, a, b, shifted(l, w, ctx.hbar), q, o.policy.den_guard);
      };
    };
    const Mat lhs = place_shifted(lay, {0, 1}, {}, R(z1, z2)) * place_shifted(lay, {0, 2}, {1}, R(z1, z3)) *
                    place_shifted(lay, {1, 2}, {}, R(z2, z3));
    const Mat rhs = place_shifted(lay, {1, 2}, {0}, R(z2, z3)) * place_shifted(lay, {0, 2}, {}, R(z1, z3)) *
                    place_shifted(lay, {0, 1}, {2}, R(z1, z2));
    Residual r;
    r.add_matrix(lhs, rhs);
    return r;
  });
  rep.set(res);
  return rep;
}

}  // namespace ellgaudin
