// One line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "ellgaudin/ellgaudin.h"
#include "ellgaudin/gaudin.hpp"

using namespace ellgaudin;

namespace {

struct Outcome {
  double worst = 0.0;  // max over checks of max_rel / tol
  std::string detail;
  bool ok = true;
};

struct Criterion {
  int number;
  const char* title;
  double time_limit_s;  // 0: none
  std::function<void(Outcome&)> body;
};

void need(Outcome& o, const std::string& what, double value, double tol) {
  const bool pass = value < tol;
  o.worst = std::max(o.worst, value / tol);
  if (!pass) {
    o.ok = false;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s=%.3e>=%.0e; ", what.c_str(), value, tol);
    o.detail += buf;
  }
}

void need(Outcome& o, const ResidualReport& r, double tol) {
  if (r.status != "ok") {
    o.ok = false;
    o.detail += r.identity_id + " error: " + r.message + "; ";
    return;
  }
  need(o, r.identity_id, r.max_rel, tol);
}

CheckOptions opts(int samples, std::uint64_t seed) {
  CheckOptions o;
  o.samples = samples;
  o.seed = seed;
  return o;
}

FelderContext context(cplx tau = {0.0, 1.1}) {
  FelderContext c;
  c.ep = EllipticParams::make(tau);
  return c;
}

const cplx v1{0.1, 0.0}, v2{0.45, 0.0}, v3{-0.3, 0.0}, v4{0.27, 0.0};

std::vector<DynamicalLOperator> lops_for(int n, const FelderContext& ctx) {
  return {lop_from_R(n, v1, ctx), lop_fused_sites(n, {v1, v2}, ctx), lop_from_R(n, v1, ctx, LRole::inverse)};
}

std::vector<Criterion> criteria() {
  return {
      {1, "theta axioms (oddness, quasi-periodicity in 1 and tau, theta'(0)=1), 100 points, two moduli", 5.0,
       [](Outcome& o) {
         for (cplx tau : {cplx(0.0, 1.1), cplx(0.2, 0.9)})
           for (const auto& r : theta_axiom_residuals(100, EllipticParams::make(tau), 11)) need(o, r, 1e-10);
       }},
      {2, "DYBE, unitarity, weight zero, D-commutation, n=2,3, 8 points", 20.0,
       [](Outcome& o) {
         const auto ctx = context();
         for (int n : {2, 3}) {
           const auto p = opts(8, 21 + n);
           need(o, dybe_residual(n, ctx, p), 1e-9);
           need(o, unitarity_residual(n, ctx, p), 1e-9);
           need(o, weight_zero_residual(n, ctx, p), 1e-9);
           need(o, dcommute_residual(n, ctx, p), 1e-9);
         }
       }},
      {3, "R(-hbar) factorization B R(-hbar) = A and R(-hbar) A = R(-hbar), n=2,3", 0.0,
       [](Outcome& o) {
         const auto ctx = context();
         for (int n : {2, 3}) {
           need(o, r_minus_hbar_B_residual(n, ctx, opts(8, 31)), 1e-10);
           need(o, r_minus_hbar_A_residual(n, ctx, opts(8, 32)), 1e-10);
         }
       }},
      {4, "Manin property of e^{-hbar D} L e^{hbar d/du} for R, fused RR, inverse R; inverse Manin matrix", 0.0,
       [](Outcome& o) {
         const auto ctx = context();
         for (int n : {2, 3}) {
           for (const auto& L : lops_for(n, ctx)) need(o, manin_lop_residual(L, opts(6, 41), false), 1e-9);
           const auto L = lop_from_R(n, v1, ctx);
           need(o, manin_lop_residual(L, opts(6, 42), true), 1e-9);
           need(o, manin_inverse_product_residual(L, opts(6, 43)), 1e-9);
         }
       }},
      {5, "fused ordering RprRi = RprRj, ALLL_ALLLA and AR_ARA sandwiches at staircase points, N <= 4", 0.0,
       [](Outcome& o) {
         const auto ctx = context();
         for (int n : {2, 3}) {
           const auto p = opts(3, 51);
           for (auto [m, N] : {std::pair{1, 3}, {2, 4}, {1, 4}}) need(o, rprr_order_residual(n, m, N, ctx, p), 1e-9);
           for (auto [m, N, w] : {std::tuple{2, 3, 'm'}, {2, 4, 'm'}, {1, 3, 'N'}, {2, 4, 'N'}})
             for (bool inv : {false, true}) need(o, ar_ara_residual(n, m, N, w, inv, ctx, p), 1e-9);
           const auto L = lop_from_R(n, v1, ctx);
           for (auto [m, N] : {std::pair{0, 2}, {1, 3}, {0, 3}})
             for (bool inv : {false, true}) need(o, alll_residual(L, m, N, inv, opts(2, 52)), 1e-9);
         }
         const auto L2 = lop_from_R(2, v1, ctx);
         for (bool inv : {false, true}) need(o, alll_residual(L2, 1, 4, inv, opts(2, 53)), 1e-9);
       }},
      {6, "column det of 1-M equals sum (-1)^m t_m e^{m hbar d/du}; det_trA", 0.0,
       [](Outcome& o) {
         const auto ctx = context();
         for (int n : {2, 3}) {
           const auto L = lop_from_R(n, v1, ctx);
           need(o, det_gener_residual(L, opts(4, 61)), 1e-8);
           need(o, det_trA_residual(L, opts(4, 62)), 1e-9);
         }
       }},
      {7, "trace exchange tt_tt0 for (m,s) in {(1,1),(1,2),(2,1)}, n=2", 120.0,
       [](Outcome& o) {
         const auto L = lop_from_R(2, v1, context());
         for (auto [m, s] : {std::pair{1, 1}, {1, 2}, {2, 1}}) need(o, tt_tt0_residual(L, m, s, opts(4, 71)), 1e-8);
       }},
      {8, "Newton identities m <= n+1 (quantum and classical); M^k = L_D^{[k]} e^{k hbar d/du}, k <= 3", 0.0,
       [](Outcome& o) {
         const auto ctx = context();
         for (int n : {2, 3}) {
           const auto L = lop_from_R(n, v1, ctx);
           need(o, newton_residual(manin_from_lop(L), n + 1, ctx.ep, opts(4, 81)), 1e-9);
           for (int k = 1; k <= 3; ++k) need(o, qpow_residual(L, k, opts(3, 82)), 1e-9);
           const auto g = gaudin_L(n, {defining_site(n, v1), dual_site(n, v2)}, false, ctx.ep);
           need(o, classical_newton_residual(g, opts(4, 83)), 1e-9);
         }
       }},
      {9, "Cartan commutation ht_th for t_m and hs_sh for s_m", 0.0,
       [](Outcome& o) {
         const auto ctx = context();
         for (int n : {2, 3}) {
           const auto L = lop_fused_sites(n, {v1, v2}, ctx);
           const auto g = gaudin_L(n, {defining_site(n, v1), dual_site(n, v2)}, false, ctx.ep);
           for (int m = 1; m <= n; ++m) {
             need(o, ht_th_residual(L, m, opts(3, 91)), 1e-10);
             need(o, cartan_residual_s(g, m, opts(3, 92)), 1e-10);
           }
         }
       }},
      {10, "classical degeneration (R-1)/hbar -> r; CDYBE; classical twist", 0.0,
       [](Outcome& o) {
         const auto ctx = context();
         for (int n : {2, 3}) {
           need(o, classical_limit_residual(n, ctx, opts(4, 101)), 1e-5);
           need(o, cdybe_residual(n, ctx, opts(6, 102)), 1e-9);
           need(o, cdybe_residual(n, ctx, opts(6, 103), true), 1e-9);
           need(o, classical_twist_residual(n, ctx, opts(6, 104)), 1e-9);
         }
       }},
      {11, "Gaudin DrLL and EhL_LEh_G for {2 x defining}, {defining + dual}, n=2,3", 0.0,
       [](Outcome& o) {
         const auto ep = context().ep;
         for (int n : {2, 3})
           for (bool dual : {false, true}) {
             const auto g =
                 gaudin_L(n, {defining_site(n, v1), dual ? dual_site(n, v2) : defining_site(n, v2)}, false, ep);
             need(o, gaudin_drll_residual(g, opts(6, 111)), 1e-9);
             need(o, gaudin_ehl_residual(g, opts(6, 112)), 1e-9);
           }
       }},
      {12, "Gaudin commutativity on the zero-weight subspace: n=2 defining+dual; n=3 traceless, 3 sites", 60.0,
       [](Outcome& o) {
         const auto ep = context().ep;
         const auto g2 = gaudin_L(2, {defining_site(2, v1), dual_site(2, v2)}, false, ep);
         need(o, commutativity_on_zero_weight(g2, {{1, 1}, {1, 2}, {2, 1}, {2, 2}}, opts(4, 121)), 1e-8);
         const auto g3 = gaudin_L(3, {defining_site(3, v1), defining_site(3, v2), defining_site(3, v3)}, true, ep);
         std::vector<std::pair<int, int>> pairs;
         for (int a = 1; a <= 3; ++a)
           for (int b = 1; b <= 3; ++b) pairs.push_back({a, b});
         need(o, commutativity_on_zero_weight(g3, pairs, opts(4, 122)), 1e-8);
         for (std::uint64_t seed = 1; seed <= 5; ++seed)
           need(o, commutativity_on_zero_weight(g2, {{1, 2}, {2, 2}}, opts(2, 1230 + seed)), 1e-8);
       }},
      {13, "twist identity: twisted and untwisted determinants agree, n=2,3", 0.0,
       [](Outcome& o) {
         const auto ep = context().ep;
         need(o, twisted_gaudin_residual(gaudin_L(2, {defining_site(2, v1), defining_site(2, v2)}, false, ep),
                                         opts(4, 131)),
              1e-8);
         need(o, twisted_gaudin_residual(gaudin_L(3, {defining_site(3, v1), dual_site(3, v2)}, false, ep),
                                         opts(4, 132)),
              1e-8);
         need(o, twisted_gaudin_residual(
                     gaudin_L(3, {defining_site(3, v1), defining_site(3, v2), defining_site(3, v3)}, true, ep),
                     opts(2, 133)),
              1e-8);
       }},
      {14, "sl2: both forms agree on W; [S(u), S(v)] P_W on (C^2)^2, (C^2)^4; general-pipeline cross-check", 0.0,
       [](Outcome& o) {
         const auto ep = context().ep;
         for (const auto& vs : {std::vector<cplx>{v1, v2}, std::vector<cplx>{v1, v2, v3, v4}}) {
           need(o, sl2_forms_residual(vs, ep, opts(4, 141)), 1e-8);
           need(o, sl2_commutation_residual(vs, ep, opts(4, 142)), 1e-8);
           need(o, sl2_crosscheck_residual(vs, ep, opts(4, 143)), 1e-8);
         }
       }},
      {15, "classical quantum powers: recursion, Newton reconstruction, traced powers commute on W", 0.0,
       [](Outcome& o) {
         const auto ep = context().ep;
         for (int n : {2, 3}) {
           const auto g = gaudin_L(n, {defining_site(n, v1), dual_site(n, v2)}, false, ep);
           need(o, classical_qpow_residual(g, 3, opts(4, 151)), 1e-8);
           need(o, newton_reconstruction_residual(g, opts(4, 152)), 1e-8);
           need(o, traced_powers_commute_residual(g, 2, opts(3, 153)), 1e-8);
         }
       }},
      {16, "trigonometric suite: tau -> i infinity limit and trend, F-conjugation, Manin, lambda limit", 0.0,
       [](Outcome& o) {
         const auto ctx = context();
         const cplx w = std::exp(kI * 0.7);
         for (int n : {2, 3}) {
           const auto p = opts(6, 161);
           need(o, trig_limit_residual(n, ctx, p), 1e-6);
           const double r6 = trig_limit_at(n, 6.0, ctx, p), r8 = trig_limit_at(n, 8.0, ctx, p);
           need(o, "trend r8/r6", r8 / r6, 1.0);
           need(o, trig_fconj_residual(n, ctx, p), 1e-12);
           need(o, trig_manin_residual(n, w, false, ctx, p), 1e-9);
           need(o, trig_manin_residual(n, w, true, ctx, p), 1e-9);
           need(o, trig_nondynamical_limit_residual(n, ctx, p), 1e-4);
         }
       }},
      {17, "CLI determinism: identical config and seed give identical JSON; default run exits zero", 300.0,
       [](Outcome& o) {
         eg_config* c = nullptr;
         if (eg_config_new(&c) != EG_OK) {
           o.ok = false;
           o.detail = eg_last_error();
           return;
         }
         std::string doc[2];
         for (int k = 0; k < 2; ++k) {
           eg_result* r = nullptr;
           if (eg_run(c, &r) != EG_OK) {
             o.ok = false;
             o.detail = eg_last_error();
             break;
           }
           const char* j = nullptr;
           eg_result_json(r, 0, &j);
           doc[k] = j;
           need(o, "exit status", eg_result_exit_status(r), 1);
           eg_result_free(r);
         }
         eg_config_free(c);
         if (doc[0] != doc[1] || doc[0].empty()) {
           o.ok = false;
           o.detail += "reports differ; ";
         }
       }},
  };
}

}  // namespace

int main(int argc, char** argv) {
  int only = argc > 1 ? std::atoi(argv[1]) : 0;
  int failed = 0;
  for (const auto& c : criteria()) {
    if (only && c.number != only) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail += std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit_s > 0.0 && s >= c.time_limit_s) {
      o.ok = false;
      char buf[64];
      std::snprintf(buf, sizeof buf, "took %.1f s >= %.0f s; ", s, c.time_limit_s);
      o.detail += buf;
    }
    if (!o.ok) ++failed;
    std::printf("[%s] %2d  %s  (worst residual/tol %.2e, %.2f s)%s%s\n", o.ok ? "PASS" : "FAIL", c.number, c.title,
                o.worst, s, o.detail.empty() ? "" : "  ", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
