#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ellgaudin/opalg.hpp"

using namespace ellgaudin;

namespace {

const EllipticParams kP = EllipticParams::make({0.0, 1.1});
const cplx kH{0.137, 0.071};
const Expr U = Expr::var(Var::u);
const Expr L1 = Expr::var(Var::l1);
const Expr L2 = Expr::var(Var::l2);

Point sample_point(std::uint64_t seed) {
  Rng rng(seed);
  return draw_point(rng, SamplingPolicy{}, 0xff);
}

double rel(const Residual& r) { return r.max_rel; }

OperatorElem random_elem(Rng& rng, const Ring& ring) {
  const std::vector<Expr> pool = {theta_of(U + Expr(0.3)), theta_of(L1 - L2 + Expr(0.21), 1), exp_of(L1),
                                  U * L2 + Expr(0.5), theta_of(U - L1 + Expr(0.17))};
  OperatorElem e(ring);
  const int nterms = 2;
  for (int t = 0; t < nterms; ++t) {
    Monomial m;
    m.e[idx(Var::u)] = static_cast<std::int8_t>(rng.next() % 2);
    m.e[idx(Var::l1)] = static_cast<std::int8_t>(rng.next() % 2);
    QMat q(ring->qdim);
    for (int i = 0; i < ring->qdim; ++i)
      for (int j = 0; j < ring->qdim; ++j) q.set(i, j, pool[rng.next() % pool.size()] * Expr(rng.uniform(-1, 1)));
    e.add_term(m, q);
  }
  return e;
}

}  // namespace

TEST_CASE("site weight tables") {
  const Site d = defining_site(3, 0.1);
  const Site u = dual_site(3, 0.2);
  for (int a = 0; a < 3; ++a)
    for (int k = 0; k < 3; ++k) {
      CHECK(d.weights[a][k] == (a == k ? 1 : 0));
      CHECK(u.weights[a][k] == (a == k ? -1 : 0));
    }
  const QuantumSpace q(2, {defining_site(2, 0.1), dual_site(2, 0.4)});
  CHECK(q.dim() == 4);
  // basis (0,1): e_1 (x) e_2^* has weight (1,-1)
  CHECK(q.weight(1) == std::vector<int>{1, -1});
  CHECK((q.cartan(0) - q.gl_action(0, 0)).norm() == 0.0);
  // representation property [e_01, e_10] = e_00 - e_11
  const Mat c = q.gl_action(0, 1) * q.gl_action(1, 0) - q.gl_action(1, 0) * q.gl_action(0, 1);
  CHECK((c - (q.gl_action(0, 0) - q.gl_action(1, 1))).norm() < 1e-15);
}

TEST_CASE("shift flavor moves coefficients past shifts") {
  auto ring = make_ring(Flavor::shift, 1, kH);
  const auto S = OperatorElem::monomial(ring, Monomial::of(Var::u));
  const auto th = OperatorElem::scalar(ring, theta_of(U));
  const auto lhs = S * th;
  Point p;
  p[Var::u] = 0.2;
  Evaluator ev(kP, p);
  const auto val = lhs.eval(ev);
  REQUIRE(val.size() == 1);
  CHECK(std::abs(val.at(Monomial::of(Var::u))(0, 0) - theta(0.2 + kH, kP)) < 1e-12);
}

TEST_CASE("diff flavor obeys Leibniz") {
  auto ring = make_ring(Flavor::diff, 1, kH);
  const auto D = OperatorElem::monomial(ring, Monomial::of(Var::u));
  const auto th = OperatorElem::scalar(ring, theta_of(U));
  const auto prod = D * th;
  Point p;
  p[Var::u] = {0.2, 0.1};
  Evaluator ev(kP, p);
  const auto val = prod.eval(ev);
  CHECK(std::abs(val.at(Monomial{})(0, 0) - theta_deriv(1, p[Var::u], kP)) < 1e-12);
  CHECK(std::abs(val.at(Monomial::of(Var::u))(0, 0) - theta(p[Var::u], kP)) < 1e-12);
  // second order: d^2 f = f'' + 2 f' d + f d^2
  const auto D2 = OperatorElem::monomial(ring, Monomial::of(Var::u, 2));
  const auto v2 = (D2 * th).eval(ev);
  CHECK(std::abs(v2.at(Monomial{})(0, 0) - theta_deriv(2, p[Var::u], kP)) < 1e-11);
  CHECK(std::abs(v2.at(Monomial::of(Var::u))(0, 0) - 2.0 * theta_deriv(1, p[Var::u], kP)) < 1e-11);
}

TEST_CASE("ring axioms numerically") {
  for (Flavor f : {Flavor::shift, Flavor::diff}) {
    auto ring = make_ring(f, 2, kH);
    Rng rng(5);
    for (int t = 0; t < 3; ++t) {
      const auto a = random_elem(rng, ring), b = random_elem(rng, ring), c = random_elem(rng, ring);
      Evaluator ev(kP, sample_point(100 + t));
      CHECK(rel(compare_at((a * b) * c, a * (b * c), ev)) < 1e-10);
      CHECK(rel(compare_at(a * (b + c), a * b + a * c, ev)) < 1e-10);
      CHECK(rel(compare_at((a + b) * c, a * c + b * c, ev)) < 1e-10);
    }
  }
}

TEST_CASE("ring mismatch is rejected") {
  auto r1 = make_ring(Flavor::shift, 1, kH);
  auto r2 = make_ring(Flavor::diff, 1, kH);
  CHECK_THROWS_AS(OperatorElem::scalar(r1, 1.0) * OperatorElem::scalar(r2, 1.0), UsageError);
}

TEST_CASE("antisymmetrizers") {
  CHECK((antisymmetrizer(1, 3) - Mat::Identity(3, 3)).norm() == 0.0);
  // two legs, n=2, against the displayed sum
  Mat ref = Mat::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      if (i == j) continue;
      Mat Eii = Mat::Zero(2, 2), Ejj = Mat::Zero(2, 2), Eij = Mat::Zero(2, 2), Eji = Mat::Zero(2, 2);
      Eii(i, i) = 1;
      Ejj(j, j) = 1;
      Eij(i, j) = 1;
      Eji(j, i) = 1;
      Mat a = Mat::Zero(4, 4), b = Mat::Zero(4, 4);
      for (int r = 0; r < 2; ++r)
        for (int s = 0; s < 2; ++s) {
          a.block(r * 2, s * 2, 2, 2) = Eii(r, s) * Ejj;
          b.block(r * 2, s * 2, 2, 2) = Eij(r, s) * Eji;
        }
      ref += 0.5 * (a - b);
    }
  CHECK((antisymmetrizer(2, 2) - ref).norm() < 1e-15);
  for (int n = 2; n <= 3; ++n)
    for (int m = 1; m <= 4; ++m) {
      const Mat A = antisymmetrizer(m, n);
      CHECK((A * A - A).cwiseAbs().maxCoeff() < 1e-13);
      CHECK((A - A.adjoint()).cwiseAbs().maxCoeff() < 1e-13);
      const double binom = m > n ? 0.0 : (n == 3 && m == 2 ? 3.0 : (n == 3 && m == 3 ? 1.0 : (m == 1 ? n : 1.0)));
      CHECK(std::abs(A.trace().real() - binom) < 1e-12);
      CHECK((antisymmetrizer_recursive(m, n) - A).cwiseAbs().maxCoeff() < 1e-13);
    }
  // rank C(3,3) = 1 via eigenvalues
  Eigen::SelfAdjointEigenSolver<Mat> es(antisymmetrizer(3, 3));
  int rank = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) rank += es.eigenvalues()(i) > 0.5;
  CHECK(rank == 1);
}

TEST_CASE("leg embedding and traces") {
  auto ring = make_ring(Flavor::shift, 1, kH);
  Mat e12 = Mat::Zero(2, 2);
  e12(0, 1) = 1.0;
  const auto t = AuxTensor::from_numeric(e12, 2, 1, ring);
  const auto same = embed_legs(t, {1}, 1);
  Evaluator ev(kP, Point{});
  CHECK(rel(compare_at(same, t, ev)) == 0.0);
  // E_12 on leg 2 sends e_j (x) e_2 to e_j (x) e_1
  const auto t2 = embed_legs(t, {2}, 2);
  for (int j = 0; j < 2; ++j) {
    CHECK(!t2.at(j * 2 + 0, j * 2 + 1).is_zero());
    CHECK(t2.at(j * 2 + 1, j * 2 + 0).is_zero());
  }
  CHECK_THROWS_AS(embed_legs(embed_legs(t, {1}, 2), {1, 1}, 2), UsageError);
  CHECK_THROWS_AS(embed_legs(t, {3}, 2), UsageError);

  const auto id = AuxTensor::identity(2, 1, ring);
  CHECK(trace(id).eval(ev).at(Monomial{})(0, 0) == cplx(2.0));
  const auto A2 = AuxTensor::from_numeric(antisymmetrizer(2, 2), 2, 2, ring);
  CHECK(std::abs(trace(A2).eval(ev).at(Monomial{})(0, 0) - 1.0) < 1e-15);
  // flipping legs equals conjugation by the flip
  Mat x(4, 4);
  Rng rng(3);
  for (int i = 0; i < 16; ++i) x(i / 4, i % 4) = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
  const auto X = AuxTensor::from_numeric(x, 2, 2, ring);
  const Mat P = permutation_operator(2, {1, 0});
  const auto flipped = embed_legs(X, {2, 1}, 2);
  CHECK((flipped.eval(ev).at(Monomial{}) - P * x * P).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(partial_trace(X, {3}), UsageError);
}

TEST_CASE("numeric embedding matches Kronecker products") {
  Mat a(2, 2), b(3, 3);
  a << 1, 2, 3, 4;
  b << 1, 0, 2, 0, 1, 0, 5, 0, 1;
  const Mat ab = embed_numeric(a, {2, 3}, {0}) * embed_numeric(b, {2, 3}, {1});
  Mat kron = Mat::Zero(6, 6);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) kron.block(i * 3, j * 3, 3, 3) = a(i, j) * b;
  CHECK((ab - kron).norm() < 1e-15);
}

TEST_CASE("column determinant") {
  auto ring = make_ring(Flavor::shift, 1, kH);
  Evaluator ev(kP, Point{});
  CHECK(column_det(AuxTensor::identity(3, 1, ring)).eval(ev).at(Monomial{})(0, 0) == cplx(1.0));
  Mat m(2, 2);
  m << 2.0, 3.0, 5.0, 7.0;
  CHECK(column_det(AuxTensor::from_numeric(m, 2, 1, ring)).eval(ev).at(Monomial{})(0, 0) == cplx(14.0 - 15.0));
  Mat m3(3, 3);
  m3 << 1, 2, 3, 0, 4, 5, 1, 0, 6;
  CHECK(std::abs(column_det(AuxTensor::from_numeric(m3, 3, 1, ring)).eval(ev).at(Monomial{})(0, 0) - m3.determinant()) < 1e-12);
  // column order is kept: for [[a, b], [c, d]] the result is a d - c b
  auto dring = make_ring(Flavor::diff, 1, kH);
  AuxTensor t(2, 1, dring);
  t.at(0, 0) = OperatorElem::monomial(dring, Monomial::of(Var::u));
  t.at(1, 1) = OperatorElem::scalar(dring, theta_of(U));
  t.at(0, 1) = OperatorElem::scalar(dring, 1.0);
  t.at(1, 0) = OperatorElem::scalar(dring, 1.0);
  Point p;
  p[Var::u] = {0.3, 0.1};
  Evaluator ev2(kP, p);
  const auto d = column_det(t).eval(ev2);
  CHECK(std::abs(d.at(Monomial{})(0, 0) - (theta_deriv(1, p[Var::u], kP) - 1.0)) < 1e-12);
}

TEST_CASE("weight shift substitution") {
  const QuantumSpace q(2, {defining_site(2, 0.1)});
  QMat f(2);
  f.set(0, 0, theta_of(L1));
  f.set(1, 1, theta_of(L1));
  const QMat g = weight_shift_substitute(f, q, kH);
  Point p;
  p.lambda(0) = {0.11, 0.02};
  Evaluator ev(kP, p);
  CHECK(std::abs(ev(g.at(0, 0)) - theta(p.lambda(0) + kH, kP)) < 1e-14);
  CHECK(std::abs(ev(g.at(1, 1)) - theta(p.lambda(0), kP)) < 1e-14);
  const QMat back = weight_shift_substitute(g, q, kH, -1);
  CHECK(back.at(0, 0).get() == f.at(0, 0).get());
  const QuantumSpace trivial(2, {});
  QMat one(1);
  one.set(0, 0, theta_of(L1));
  CHECK(weight_shift_substitute(one, trivial, kH).at(0, 0).get() == one.at(0, 0).get());
}

TEST_CASE("manin check on commuting and corrupted matrices") {
  auto ring = make_ring(Flavor::shift, 1, kH);
  AuxTensor m(2, 1, ring);
  m.at(0, 0) = OperatorElem::scalar(ring, theta_of(U + L1));
  m.at(0, 1) = OperatorElem::scalar(ring, theta_of(U - L2));
  m.at(1, 0) = OperatorElem::scalar(ring, exp_of(L1));
  m.at(1, 1) = OperatorElem::scalar(ring, U);
  CHECK(manin_check(m, kP, 4, 1).max_rel == 0.0);
  m.at(1, 1) = m.at(1, 1) + OperatorElem::monomial(ring, Monomial::of(Var::u));
  CHECK(manin_check(m, kP, 4, 1).max_rel > 1e-3);
}

TEST_CASE("pruning drops numerically zero terms") {
  auto ring = make_ring(Flavor::shift, 1, kH);
  auto e = OperatorElem::scalar(ring, theta_of(U + Expr(1.0)) + theta_of(U)) +
           OperatorElem::monomial(ring, Monomial::of(Var::u), theta_of(U));
  const auto p = prune(e, kP, 3);
  CHECK(p.terms().size() == 1);
  CHECK(p.terms().count(Monomial::of(Var::u)) == 1);
}
