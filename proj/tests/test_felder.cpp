#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ellgaudin/felder.hpp"

using namespace ellgaudin;

namespace {

FelderContext ctx_for(cplx tau = {0.0, 1.1}) {
  FelderContext c;
  c.ep = EllipticParams::make(tau);
  return c;
}

CheckOptions opts(int samples = 6, std::uint64_t seed = 3) {
  CheckOptions o;
  o.samples = samples;
  o.seed = seed;
  return o;
}

// R entry <a b| R |c d> straight from the defining formula, weights summed by hand.
cplx r_entry(int a, int b, int c, int d, cplx u, const Lambda& l, const FelderContext& ctx) {
  const cplx h = ctx.hbar;
  auto t = [&](cplx x) { return theta(x, ctx.ep); };
  if (a == b && c == d && a == c) return t(u + h) / t(u);
  if (a == c && b == d) return t(l[a] - l[b] + h) / t(l[a] - l[b]);
  if (a == d && b == c && a != b) {
    const cplx lab = l[a] - l[b];
    return t(u - lab) * t(h) / (t(u) * t(-lab));
  }
  return 0.0;
}

// Three-leg product with the lambda shift read off the right-most index of the
// given leg, looping over indices directly.
cplx dybe_side(bool lhs, int n, const int out[3], const int in[3], const cplx us[3], const Lambda& l,
               const FelderContext& ctx) {
  auto lam_plus = [&](int basis) {
    Lambda s = l;
    s[basis] += ctx.hbar;
    return s;
  };
  cplx acc = 0.0;
  for (int x0 = 0; x0 < n; ++x0)
    for (int x1 = 0; x1 < n; ++x1)
      for (int x2 = 0; x2 < n; ++x2)
        for (int y0 = 0; y0 < n; ++y0)
          for (int y1 = 0; y1 < n; ++y1)
            for (int y2 = 0; y2 < n; ++y2) {
              // mid states: after first factor (x), after second (y)
              const int X[3] = {x0, x1, x2}, Y[3] = {y0, y1, y2};
              cplx f1, f2, f3;
              if (lhs) {
                // R12(l) R13(l + h E2) R23(l)
                f1 = (out[2] == X[2]) ? r_entry(out[0], out[1], X[0], X[1], us[0] - us[1], l, ctx) : 0.0;
                f2 = (X[1] == Y[1]) ? r_entry(X[0], X[2], Y[0], Y[2], us[0] - us[2], lam_plus(Y[1]), ctx) : 0.0;
                f3 = (Y[0] == in[0]) ? r_entry(Y[1], Y[2], in[1], in[2], us[1] - us[2], l, ctx) : 0.0;
              } else {
                // R23(l + h E1) R13(l) R12(l + h E3)
                f1 = (out[0] == X[0]) ? r_entry(out[1], out[2], X[1], X[2], us[1] - us[2], lam_plus(X[0]), ctx) : 0.0;
                f2 = (X[1] == Y[1]) ? r_entry(X[0], X[2], Y[0], Y[2], us[0] - us[2], l, ctx) : 0.0;
                f3 = (Y[2] == in[2]) ? r_entry(Y[0], Y[1], in[0], in[1], us[0] - us[1], lam_plus(in[2]), ctx) : 0.0;
              }
              acc += f1 * f2 * f3;
            }
  return acc;
}

}  // namespace

TEST_CASE("felder R matches entrywise formula") {
  const auto ctx = ctx_for();
  const Lambda l = {{0.11, 0.05}, {-0.23, 0.02}, {0.31, -0.07}};
  const cplx u{0.27, 0.13};
  const int n = 3;
  const Mat R = felder_R(n, u, l, ctx);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) CHECK(std::abs(R(a * n + b, c * n + d) - r_entry(a, b, c, d, u, l, ctx)) < 1e-13);
}

TEST_CASE("DYBE holds entrywise by direct index loops") {
  const auto ctx = ctx_for();
  const int n = 2;
  const Lambda l = {{0.11, 0.05}, {-0.23, 0.02}};
  const cplx us[3] = {{0.21, 0.1}, {-0.17, 0.04}, {0.05, -0.12}};
  double worst = 0.0, scale = 0.0;
  for (int o = 0; o < 8; ++o)
    for (int i = 0; i < 8; ++i) {
      const int out[3] = {o >> 2 & 1, o >> 1 & 1, o & 1};
      const int in[3] = {i >> 2 & 1, i >> 1 & 1, i & 1};
      const cplx a = dybe_side(true, n, out, in, us, l, ctx);
      const cplx b = dybe_side(false, n, out, in, us, l, ctx);
      worst = std::max(worst, std::abs(a - b));
      scale = std::max(scale, std::abs(a));
    }
  CHECK(scale > 0.1);
  CHECK(worst / (1 + scale) < 1e-11);
}

TEST_CASE("place_shifted agrees with the direct DYBE loops") {
  const auto ctx = ctx_for();
  const int n = 2;
  const Lambda l = {{0.11, 0.05}, {-0.23, 0.02}};
  const cplx u1{0.21, 0.1}, u3{0.05, -0.12};
  const Layout lay = aux_layout(n, 3);
  const Mat m = place_shifted(lay, {0, 2}, {1}, [&](const std::vector<int>& w) {
    return felder_R(n, u1 - u3, shifted(l, w, ctx.hbar), ctx);
  });
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      const int ro[3] = {r >> 2 & 1, r >> 1 & 1, r & 1}, co[3] = {c >> 2 & 1, c >> 1 & 1, c & 1};
      Lambda s = l;
      s[co[1]] += ctx.hbar;
      const cplx want = ro[1] == co[1] ? r_entry(ro[0], ro[2], co[0], co[2], u1 - u3, s, ctx) : 0.0;
      CHECK(std::abs(m(r, c) - want) < 1e-13);
    }
}

TEST_CASE("elliptic R identities") {
  const auto ctx = ctx_for();
  for (int n : {2, 3}) {
    CAPTURE(n);
    CHECK(dybe_residual(n, ctx, opts()).max_rel < 1e-10);
    CHECK(unitarity_residual(n, ctx, opts()).max_rel < 1e-10);
    CHECK(weight_zero_residual(n, ctx, opts()).max_rel < 1e-12);
    CHECK(r_minus_hbar_B_residual(n, ctx, opts()).max_rel < 1e-10);
    CHECK(r_minus_hbar_A_residual(n, ctx, opts()).max_rel < 1e-10);
  }
  CHECK(dcommute_residual(2, ctx, opts(4)).max_rel < 1e-10);
}

TEST_CASE("identities hold for a tilted modulus") {
  const auto ctx = ctx_for({0.2, 0.9});
  CHECK(dybe_residual(2, ctx, opts(4, 9)).max_rel < 1e-10);
  CHECK(unitarity_residual(3, ctx, opts(4, 9)).max_rel < 1e-10);
}

TEST_CASE("DYBE detects a wrong shift direction") {
  auto ctx = ctx_for();
  const int n = 2;
  const Layout lay = aux_layout(n, 3);
  const Lambda l = {{0.11, 0.05}, {-0.23, 0.02}};
  const cplx u1{0.21, 0.1}, u2{-0.17, 0.04}, u3{0.05, -0.12};
  auto R = [&](cplx x, cplx step) {
    return [&, x, step](const std::vector<int>& w) { return felder_R(n, x, shifted(l, w, step), ctx); };
  };
  const Mat lhs = place_shifted(lay, {0, 1}, {}, R(u1 - u2, ctx.hbar)) *
                  place_shifted(lay, {0, 2}, {1}, R(u1 - u3, -ctx.hbar)) *
                  place_shifted(lay, {1, 2}, {}, R(u2 - u3, ctx.hbar));
  const Mat rhs = place_shifted(lay, {1, 2}, {0}, R(u2 - u3, ctx.hbar)) *
                  place_shifted(lay, {0, 2}, {}, R(u1 - u3, ctx.hbar)) *
                  place_shifted(lay, {0, 1}, {2}, R(u1 - u2, ctx.hbar));
  Residual r;
  r.add_matrix(lhs, rhs);
  CHECK(r.max_rel > 1e-3);
}

TEST_CASE("R at minus hbar has rank of the antisymmetric square") {
  const auto ctx = ctx_for();
  const Lambda l = {{0.11, 0.05}, {-0.23, 0.02}, {0.31, -0.07}};
  const Mat R = felder_R(3, -ctx.hbar, l, ctx);
  Eigen::JacobiSVD<Mat> svd(R);
  const auto s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) rank += s(i) > 1e-10 * s(0);
  CHECK(rank == 3);
}

TEST_CASE("classical limit") {
  const auto ctx = ctx_for();
  const Lambda l = {{0.11, 0.05}, {-0.23, 0.02}};
  const auto lr = classical_limit_at(2, {0.27, 0.13}, l, ctx, {1e-2, 5e-3, 2.5e-3});
  CHECK(lr.error < 1e-5);
  CHECK(lr.stability < 1e-5);
  // one step of first order only is visibly worse
  FelderContext c = ctx;
  c.hbar = 1e-2;
  const Mat d = (felder_R(2, {0.27, 0.13}, l, c) - Mat::Identity(4, 4)) / 1e-2;
  CHECK((d - classical_r(2, {0.27, 0.13}, l, ctx)).cwiseAbs().maxCoeff() > 10 * lr.error);
  CHECK(classical_limit_residual(3, ctx, opts(4)).max_rel < 1e-5);
}

TEST_CASE("classical r: antisymmetry, CDYBE and twist") {
  const auto ctx = ctx_for();
  for (int n : {2, 3}) {
    CAPTURE(n);
    CHECK(classical_antisymmetry_residual(n, ctx, opts()).max_rel < 1e-10);
    CHECK(cdybe_residual(n, ctx, opts(4)).max_rel < 1e-9);
    CHECK(cdybe_residual(n, ctx, opts(4), true).max_rel < 1e-9);
    CHECK(classical_twist_residual(n, ctx, opts(4)).max_rel < 1e-9);
  }
}

TEST_CASE("CDYBE fails without the dynamical term") {
  // Nonzero f alone does not satisfy CYBE: the twist bracket [[f,f]] + D(f) is
  // only zero because D(f) vanishes, while r needs D(r) to cancel [[r,r]].
  const auto ctx = ctx_for();
  const int n = 2;
  const Lambda l = {{0.11, 0.05}, {-0.23, 0.02}};
  const std::vector<int> dims = {n, n, n};
  const cplx u{0.21, 0.1}, v{-0.17, 0.04}, w{0.05, -0.12};
  const Mat a12 = embed_numeric(classical_r(n, u - v, l, ctx), dims, {0, 1});
  const Mat a13 = embed_numeric(classical_r(n, u - w, l, ctx), dims, {0, 2});
  const Mat a23 = embed_numeric(classical_r(n, v - w, l, ctx), dims, {1, 2});
  auto c = [](const Mat& a, const Mat& b) { Mat m = a * b - b * a; return m; };
  const Mat cybe = c(a12, a13) + c(a12, a23) + c(a13, a23);
  CHECK(cybe.cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("trigonometric degenerations") {
  const auto ctx = ctx_for();
  for (int n : {2, 3}) {
    CAPTURE(n);
    const double r6 = trig_limit_at(n, 6.0, ctx, opts());
    const double r8 = trig_limit_at(n, 8.0, ctx, opts());
    CHECK(r8 < 1e-6);
    CHECK(r8 < r6);
    CHECK(trig_limit_trend(n, ctx, opts()).max_rel < 1.0);
    CHECK(trig_fconj_residual(n, ctx, opts()).max_rel < 1e-12);
    CHECK(trig_nondynamical_limit_residual(n, ctx, opts()).max_rel < 1e-4);
    CHECK(trig_dybe_residual(n, ctx, opts()).max_rel < 1e-10);
  }
}

TEST_CASE("trig twist G and F") {
  const cplx q = std::exp(kI * kPi * cplx(0.137, 0.071));
  const Mat G = trig_twist_G(3, {1, 0, 2}, q);
  CHECK(std::abs(G(0, 0) - std::pow(q, 1.0)) < 1e-14);   // (0 + 2)/2
  CHECK(std::abs(G(1, 1) - std::pow(q, 0.5)) < 1e-14);   // (2 - 1)/2
  CHECK(std::abs(G(2, 2) - std::pow(q, -0.5)) < 1e-14);  // (0 - 1)/2
  const Mat F = trig_F(2, q);
  CHECK(std::abs(F(1, 1) * F(2, 2) - 1.0) < 1e-14);
  CHECK_THROWS_AS(trig_twist_G(3, {1, 0}, q), UsageError);
}

TEST_CASE("expression forms agree with numeric matrices") {
  const auto ctx = ctx_for();
  Rng rng(5);
  const Point p = draw_point(rng, SamplingPolicy{}, 0xff);
  const int n = 3;
  Lambda l(n);
  for (int k = 0; k < n; ++k) l[k] = p.lambda(k);
  Evaluator ev(ctx.ep, p);
  const Expr U = Expr::var(Var::u);
  Residual r;
  r.add_matrix(felder_R_expr(n, U, ctx.hbar).eval(ev), felder_R(n, p[Var::u], l, ctx));
  r.add_matrix(classical_r_expr(n, U).eval(ev), classical_r(n, p[Var::u], l, ctx));
  r.add_matrix(twisted_r_expr(n, U).eval(ev), twisted_r(n, p[Var::u], l, ctx));
  const cplx q = std::exp(kI * kPi * ctx.hbar);
  const cplx w = std::exp(2.0 * kI * kPi * cplx(0.1, 0.2));
  for (RKind k : {RKind::trig_dynamical, RKind::trig_nondynamical, RKind::trig_tilde})
    r.add_matrix(trig_R_expr(k, n, Expr::var(Var::z), w, q).eval(ev), trig_R(k, n, p[Var::z], w, l, q));
  CHECK(r.max_rel < 1e-13);
}

TEST_CASE("guarded denominators raise singularity") {
  const auto ctx = ctx_for();
  const Lambda l = {{0.11, 0.05}, {0.11, 0.05}};
  CHECK_THROWS_AS(felder_R(2, {0.3, 0.1}, l, ctx), SingularityError);
  CHECK_THROWS_AS(felder_R(2, {0.01, 0.0}, {{0.1, 0}, {-0.2, 0}}, ctx), SingularityError);
  CHECK_THROWS_AS(felder_R(3, {0.2, 0.0}, {{0.1, 0}, {-0.2, 0}}, ctx), UsageError);
}
