#include "ellgaudin/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <set>
#include <thread>

#include "ellgaudin/gaudin.hpp"
#include "ellgaudin/sampling.hpp"
#include "json.hpp"

namespace ellgaudin {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- parsing

namespace {

double to_double(const std::string& s, const std::string& whole) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw UsageError("cannot parse complex number '" + whole + "'");
  return x;
}

}  // namespace

cplx parse_complex(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) throw UsageError("empty complex number");
  if (s.back() != 'i') return {to_double(s, text), 0.0};
  s.pop_back();
  // split at the last sign that is neither leading nor part of an exponent
  std::size_t k = std::string::npos;
  for (std::size_t i = s.size(); i-- > 1;)
    if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') {
      k = i;
      break;
    }
  const std::string re = k == std::string::npos ? "" : s.substr(0, k);
  std::string im = k == std::string::npos ? s : s.substr(k);
  if (im.empty() || im == "+" || im == "-") im += "1";
  return {re.empty() ? 0.0 : to_double(re, text), to_double(im, text)};
}

std::vector<SiteSpec> parse_sites(const std::string& s) {
  std::vector<SiteSpec> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const std::size_t at = item.find('@');
    if (at == std::string::npos) throw UsageError("site '" + item + "' must be kind@point");
    const std::string kind = item.substr(0, at);
    if (kind != "defining" && kind != "dual") throw UsageError("site kind must be defining or dual, got '" + kind + "'");
    out.push_back({kind == "dual", parse_complex(item.substr(at + 1))});
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<std::string> parse_suites(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t comma = csv.find(',', pos);
    std::string item = csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"theta", "felder", "manin", "commfam", "gaudin",
                                                 "sl2",   "trig",   "newton", "all"};
  return names;
}

void RunConfig::validate() const {
  if (n < 1 || n > 3) throw UsageError("n must be in 1..3");
  if (!(tol > 0.0)) throw UsageError("tol must be positive");
  if (samples < 1) throw UsageError("samples must be at least 1");
  if (threads < 0) throw UsageError("threads must be non-negative");
  if (tau.imag() <= 0.0) throw UsageError("Im tau must be positive");
  if (suites.empty()) throw UsageError("no suites selected");
  for (const auto& s : suites)
    if (std::find(suite_names().begin(), suite_names().end(), s) == suite_names().end())
      throw UsageError("unknown suite '" + s + "'");
  if (sites.size() < 2) throw UsageError("at least two sites are required");
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j)
      if (std::abs(sites[i].point - sites[j].point) < 1e-3) throw UsageError("site points must be distinct");
}

// ---------------------------------------------------------------- catalogue

double class_base(TolClass c) {
  switch (c) {
    case TolClass::elliptic: return 1e-9;
    case TolClass::determinant: return 1e-8;
    case TolClass::limit: return 1e-5;
    case TolClass::trend: return 1.0;
  }
  return 1e-9;
}

const std::vector<CatalogueEntry>& catalogue() {
  using T = TolClass;
  static const std::vector<CatalogueEntry> c = {
      {"theta_odd", "theta: oddness", "theta", T::elliptic},
      {"theta_qp_1", "theta: quasi-periodicity u+1", "theta", T::elliptic},
      {"theta_qp_tau", "theta: quasi-periodicity u+tau", "theta", T::elliptic},
      {"theta_norm", "theta: theta'(0)=1", "theta", T::elliptic},
      {"DYBE", "DYBE", "felder", T::elliptic},
      {"R21R12", "R21R12", "felder", T::elliptic},
      {"EER_REE", "EER_REE", "felder", T::elliptic},
      {"DR_RD", "DR_RD", "felder", T::elliptic},
      {"R_mhbar_B", "R_mhbar", "felder", T::elliptic},
      {"R_mhbar_A", "R_mhbar", "felder", T::elliptic},
      {"cderm_limit", "cderm", "felder", T::limit},
      {"cderm_antisym", "cderm", "felder", T::elliptic},
      {"CDYBE", "CDYBE", "felder", T::elliptic},
      {"CDYBE_twisted", "cdtwist", "felder", T::elliptic},
      {"cdtwist", "lem_cdtwist", "felder", T::elliptic},
      {"DRLL", "DRLL", "manin", T::elliptic},
      {"EhL_LEh", "EhL_LEh", "manin", T::elliptic},
      {"RLLSym", "RLLSym", "manin", T::elliptic},
      {"AMM_AMMA", "AMM_AMMA", "manin", T::elliptic},
      {"MDLopIn_Manin", "MDLopIn", "manin", T::determinant},
      {"MDLopIn", "M_inv", "manin", T::determinant},
      {"AMMM_AMMMA", "lem_AMMM_AMMMA", "manin", T::elliptic},
      {"AMMM_AMMMA_Nm", "lem_AMMM_AMMMA", "manin", T::elliptic},
      {"ALLL_ALLLA", "ALLL_ALLLA", "manin", T::elliptic},
      {"ALLL_ALLLA_inv_Nm", "ALLL_ALLLA", "manin", T::determinant},
      {"RprRi_RprRj", "RprRj", "manin", T::elliptic},
      {"AR_ARA_m", "AR_ARA_m", "manin", T::elliptic},
      {"AR_ARA_N", "AR_ARA_N", "manin", T::elliptic},
      {"AR_ARA_inv_m", "AR_ARA_m", "manin", T::determinant},
      {"AR_ARA_inv_N", "AR_ARA_N", "manin", T::determinant},
      {"EEEA_AEEE", "EEEA_AEEE", "manin", T::elliptic},
      {"ht_th", "ht_th", "commfam", T::elliptic},
      {"DReLLeLL", "DReLLeLL", "commfam", T::determinant},
      {"tt_tt0", "tt_tt0", "commfam", T::determinant},
      {"det_gener", "det_gener", "commfam", T::determinant},
      {"det_trA", "det_trA", "commfam", T::elliptic},
      {"Newton", "q_mdef", "newton", T::elliptic},
      {"qpow", "quantum powers", "newton", T::elliptic},
      {"Newton_classical", "q_mdef", "newton", T::elliptic},
      {"qpow_classical", "classical quantum powers", "newton", T::determinant},
      {"Newton_reconstruction", "classical quantum powers", "newton", T::determinant},
      {"hc_residue", "hc_eij", "gaudin", T::elliptic},
      {"DrLL", "DrLL", "gaudin", T::elliptic},
      {"EhL_LEh_G", "EhL_LEh_G", "gaudin", T::elliptic},
      {"LqLc", "LqLc", "gaudin", T::limit},
      {"Manin_classical", "chpolGaudin", "gaudin", T::elliptic},
      {"hs_sh", "hs_sh", "gaudin", T::elliptic},
      {"hs_sh_blocks", "hs_sh", "gaudin", T::elliptic},
      {"ss_ss", "ss_ss", "gaudin", T::determinant},
      {"Q_Ltilde", "Q_Ltilde", "gaudin", T::determinant},
      {"trLD_powers", "classical quantum powers", "gaudin", T::determinant},
      {"sl2_forms", "sl2 S_lambda", "sl2", T::determinant},
      {"sl2_SS", "sl2 S_lambda", "sl2", T::determinant},
      {"sl2_crosscheck", "sl2 Q", "sl2", T::determinant},
      {"trig_limit", "RtrigD", "trig", T::limit},
      {"trig_trend", "RtrigD", "trig", T::trend},
      {"Fconj", "Rtildetrig", "trig", T::elliptic},
      {"trig_nondyn", "Rtrig", "trig", T::limit},
      {"trig_DYBE", "RtrigD", "trig", T::elliptic},
      {"trig_Manin", "Rtrig", "trig", T::elliptic},
      {"trig_Manin_GLG", "Rtildetrig", "trig", T::elliptic},
  };
  return c;
}

namespace {

const CatalogueEntry& entry_for(const std::string& id) {
  const std::string base = id.substr(0, id.find(':'));
  for (const auto& e : catalogue())
    if (e.id == base) return e;
  throw Error(ErrorCode::internal, "identity '" + id + "' is missing from the catalogue");
}

// ---------------------------------------------------------------- tasks

struct Task {
  std::string key;  // seed tag; unique
  std::string suite;
  int min_n = 1;
  std::function<std::vector<ResidualReport>(const CheckOptions&)> fn;
};

using Reports = std::vector<ResidualReport>;

Reports one(ResidualReport r) { return {std::move(r)}; }

std::string with_param(const std::string& id, const std::string& p) {
  return id + (id.find(':') == std::string::npos ? ":" : ",") + p;
}

std::vector<cplx> points_of(const RunConfig& c) {
  std::vector<cplx> v;
  for (const auto& s : c.sites) v.push_back(s.point);
  return v;
}

std::vector<Site> sites_of(const RunConfig& c) {
  std::vector<Site> v;
  for (const auto& s : c.sites) v.push_back(s.dual ? dual_site(c.n, s.point) : defining_site(c.n, s.point));
  return v;
}

// Sites as configured, falling back to the traceless projection when the
// plain zero-weight subspace is trivial.
ClassicalLOperator gaudin_for(const RunConfig& c, const EllipticParams& ep) {
  const QuantumSpace q(c.n, sites_of(c));
  const bool traceless = zero_weight_projector(q, false).dim == 0;
  return gaudin_L(c.n, sites_of(c), traceless, ep);
}

std::vector<Task> build_tasks(const RunConfig& c) {
  FelderContext ctx;
  ctx.ep = EllipticParams::make(c.tau);
  ctx.hbar = c.hbar;
  const int n = c.n;
  const std::vector<cplx> pts = points_of(c);
  const cplx v1 = pts[0], v2 = pts[1];
  std::vector<Task> t;
  auto add = [&](std::string key, std::string suite, int min_n, auto fn) {
    t.push_back({std::move(key), std::move(suite), min_n, fn});
  };

  // theta
  add("theta_axioms", "theta", 1, [ep = ctx.ep, c](const CheckOptions& o) {
    return theta_axiom_residuals(std::max(100, c.samples), ep, o.seed);
  });

  // felder
  add("DYBE", "felder", 1, [=](const CheckOptions& o) { return one(dybe_residual(n, ctx, o)); });
  add("R21R12", "felder", 1, [=](const CheckOptions& o) { return one(unitarity_residual(n, ctx, o)); });
  add("EER_REE", "felder", 1, [=](const CheckOptions& o) { return one(weight_zero_residual(n, ctx, o)); });
  add("DR_RD", "felder", 1, [=](const CheckOptions& o) { return one(dcommute_residual(n, ctx, o)); });
  add("R_mhbar_B", "felder", 2, [=](const CheckOptions& o) { return one(r_minus_hbar_B_residual(n, ctx, o)); });
  add("R_mhbar_A", "felder", 2, [=](const CheckOptions& o) { return one(r_minus_hbar_A_residual(n, ctx, o)); });
  add("cderm_limit", "felder", 1, [=](const CheckOptions& o) { return one(classical_limit_residual(n, ctx, o)); });
  add("cderm_antisym", "felder", 1,
      [=](const CheckOptions& o) { return one(classical_antisymmetry_residual(n, ctx, o)); });
  add("CDYBE", "felder", 1, [=](const CheckOptions& o) { return one(cdybe_residual(n, ctx, o)); });
  add("CDYBE_twisted", "felder", 1, [=](const CheckOptions& o) { return one(cdybe_residual(n, ctx, o, true)); });
  add("cdtwist", "felder", 1, [=](const CheckOptions& o) { return one(classical_twist_residual(n, ctx, o)); });

  // manin: three L-operators
  struct LSpec {
    std::string tag;
    std::function<DynamicalLOperator()> make;
  };
  const std::vector<LSpec> ls = {
      {"L=R", [=] { return lop_from_R(n, v1, ctx); }},
      {"L=RR", [=] { return lop_fused_sites(n, {v1, v2}, ctx); }},
      {"L=Rinv", [=] { return lop_from_R(n, v1, ctx, LRole::inverse); }},
  };
  for (const auto& l : ls) {
    auto tagged = [tag = l.tag](ResidualReport r) {
      r.identity_id = with_param(r.identity_id, tag);
      return Reports{std::move(r)};
    };
    const auto make = l.make;
    add("DRLL:" + l.tag, "manin", 1, [=](const CheckOptions& o) { return tagged(drll_residual(make(), o)); });
    add("EhL_LEh:" + l.tag, "manin", 1, [=](const CheckOptions& o) { return tagged(ehl_residual(make(), o)); });
    add("RLLSym:" + l.tag, "manin", 1, [=](const CheckOptions& o) { return tagged(rllsym_residual(make(), o)); });
    add("AMM_AMMA:" + l.tag, "manin", 1,
        [=](const CheckOptions& o) { return tagged(manin_lop_residual(make(), o, false)); });
  }
  add("MDLopIn_Manin", "manin", 1, [=](const CheckOptions& o) {
    return one(manin_lop_residual(lop_from_R(n, v1, ctx), o, true));
  });
  add("MDLopIn", "manin", 1, [=](const CheckOptions& o) {
    return one(manin_inverse_product_residual(lop_from_R(n, v1, ctx), o));
  });
  for (auto [m, N] : std::vector<std::pair<int, int>>{{0, 2}, {1, 3}}) {
    const std::string ms = ":m=" + std::to_string(m) + ",N=" + std::to_string(N);
    add("AMMM" + ms, "manin", 2, [=](const CheckOptions& o) {
      const auto L = lop_from_R(n, v1, ctx);
      return Reports{ammm_residual(L, m, N, false, o), ammm_residual(L, m, N, true, o)};
    });
    add("ALLL" + ms, "manin", 2, [=](const CheckOptions& o) {
      const auto L = lop_from_R(n, v1, ctx);
      return Reports{alll_residual(L, m, N, false, o), alll_residual(L, m, N, true, o)};
    });
  }
  for (auto [m, N] : std::vector<std::pair<int, int>>{{1, 3}, {2, 4}})
    add("RprRi" + std::to_string(m) + std::to_string(N), "manin", 1,
        [=](const CheckOptions& o) { return one(rprr_order_residual(n, m, N, ctx, o)); });
  for (auto [m, N, which] : std::vector<std::tuple<int, int, char>>{{2, 3, 'm'}, {1, 3, 'N'}, {2, 4, 'N'}})
    add(std::string("AR_ARA_") + which + std::to_string(m) + std::to_string(N), "manin", 1,
        [=](const CheckOptions& o) {
          return Reports{ar_ara_residual(n, m, N, which, false, ctx, o), ar_ara_residual(n, m, N, which, true, ctx, o)};
        });
  add("EEEA_AEEE", "manin", 2, [=](const CheckOptions&) {
    Reports r;
    for (int m = 2; m <= 3; ++m) r.push_back(eeea_residual(n, m));
    return r;
  });

  // commuting family
  add("ht_th", "commfam", 1, [=](const CheckOptions& o) {
    const auto L = lop_fused_sites(n, {v1, v2}, ctx);
    Reports r;
    for (int m = 1; m <= n; ++m) r.push_back(ht_th_residual(L, m, o));
    return r;
  });
  add("DReLLeLL", "commfam", 1,
      [=](const CheckOptions& o) { return one(dreleLL_residual(lop_from_R(n, v1, ctx), 1, 2, o)); });
  for (auto [m, s] : std::vector<std::pair<int, int>>{{1, 1}, {1, 2}, {2, 1}})
    add("tt_tt0:" + std::to_string(m) + std::to_string(s), "commfam", 1,
        [=](const CheckOptions& o) { return one(tt_tt0_residual(lop_from_R(n, v1, ctx), m, s, o)); });
  add("det_gener", "commfam", 1,
      [=](const CheckOptions& o) { return one(det_gener_residual(lop_from_R(n, v1, ctx), o)); });
  add("det_trA", "commfam", 1, [=](const CheckOptions& o) { return one(det_trA_residual(lop_from_R(n, v1, ctx), o)); });

  // Newton identities and quantum powers
  add("Newton", "newton", 1, [=](const CheckOptions& o) {
    return one(newton_residual(manin_from_lop(lop_from_R(n, v1, ctx)), n + 1, ctx.ep, o));
  });
  add("qpow", "newton", 1, [=](const CheckOptions& o) {
    const auto L = lop_from_R(n, v1, ctx);
    Reports r;
    for (int k = 1; k <= 3; ++k) r.push_back(qpow_residual(L, k, o));
    return r;
  });
  add("Newton_classical", "newton", 1,
      [=](const CheckOptions& o) { return one(classical_newton_residual(gaudin_for(c, ctx.ep), o)); });
  add("qpow_classical", "newton", 1,
      [=](const CheckOptions& o) { return one(classical_qpow_residual(gaudin_for(c, ctx.ep), 3, o)); });
  add("Newton_reconstruction", "newton", 1,
      [=](const CheckOptions& o) { return one(newton_reconstruction_residual(gaudin_for(c, ctx.ep), o)); });

  // Gaudin
  add("hc_residue", "gaudin", 1, [=](const CheckOptions&) {
    const auto l = gaudin_for(c, ctx.ep);
    Reports r;
    r.push_back(half_current_residue_residual(l, 0, 0));
    if (n > 1) {
      r.push_back(half_current_residue_residual(l, 0, 1));
      r.push_back(half_current_residue_residual(l, 1, 0));
    }
    return r;
  });
  add("DrLL", "gaudin", 1, [=](const CheckOptions& o) { return one(gaudin_drll_residual(gaudin_for(c, ctx.ep), o)); });
  add("EhL_LEh_G", "gaudin", 1,
      [=](const CheckOptions& o) { return one(gaudin_ehl_residual(gaudin_for(c, ctx.ep), o)); });
  add("LqLc", "gaudin", 1, [=](const CheckOptions& o) {
    // defining sites at the configured points
    return one(gaudin_classical_limit({v1, v2}, n, ctx, o).report);
  });
  add("Manin_classical", "gaudin", 1,
      [=](const CheckOptions& o) { return one(classical_manin_residual(gaudin_for(c, ctx.ep), o)); });
  add("hs_sh", "gaudin", 1, [=](const CheckOptions& o) {
    const auto l = gaudin_for(c, ctx.ep);
    Reports r;
    for (int m = 1; m <= n; ++m) r.push_back(cartan_residual_s(l, m, o));
    return r;
  });
  add("hs_sh_blocks", "gaudin", 1,
      [=](const CheckOptions& o) { return one(weight_block_residual(gaudin_for(c, ctx.ep), o)); });
  add("ss_ss", "gaudin", 1, [=](const CheckOptions& o) {
    std::vector<std::pair<int, int>> pairs;
    for (int a = 1; a <= n; ++a)
      for (int b = 1; b <= n; ++b) pairs.push_back({a, b});
    return one(commutativity_on_zero_weight(gaudin_for(c, ctx.ep), pairs, o));
  });
  add("Q_Ltilde", "gaudin", 1,
      [=](const CheckOptions& o) { return one(twisted_gaudin_residual(gaudin_for(c, ctx.ep), o)); });
  add("trLD_powers", "gaudin", 1,
      [=](const CheckOptions& o) { return one(traced_powers_commute_residual(gaudin_for(c, ctx.ep), 2, o)); });

  // sl2 on (C^2)^{(x) N}, N = 2, 4
  const std::vector<cplx> vs2 = {v1, v2};
  std::vector<cplx> vs4 = vs2;
  for (cplx extra : {cplx(-0.3, 0.0), cplx(0.27, 0.0)})
    if (std::none_of(vs4.begin(), vs4.end(), [&](cplx x) { return std::abs(x - extra) < 1e-3; })) vs4.push_back(extra);
  for (const auto& vs : {vs2, vs4}) {
    const std::string N = std::to_string(vs.size());
    add("sl2_forms:" + N, "sl2", 1, [=](const CheckOptions& o) { return one(sl2_forms_residual(vs, ctx.ep, o)); });
    add("sl2_SS:" + N, "sl2", 1, [=](const CheckOptions& o) { return one(sl2_commutation_residual(vs, ctx.ep, o)); });
    add("sl2_crosscheck:" + N, "sl2", 1,
        [=](const CheckOptions& o) { return one(sl2_crosscheck_residual(vs, ctx.ep, o)); });
  }

  // trigonometric degeneration
  const cplx w = std::exp(kI * 0.7);
  add("trig_limit", "trig", 1, [=](const CheckOptions& o) { return one(trig_limit_residual(n, ctx, o)); });
  add("trig_trend", "trig", 1, [=](const CheckOptions& o) { return one(trig_limit_trend(n, ctx, o)); });
  add("Fconj", "trig", 1, [=](const CheckOptions& o) { return one(trig_fconj_residual(n, ctx, o)); });
  add("trig_nondyn", "trig", 1, [=](const CheckOptions& o) { return one(trig_nondynamical_limit_residual(n, ctx, o)); });
  add("trig_DYBE", "trig", 1, [=](const CheckOptions& o) { return one(trig_dybe_residual(n, ctx, o)); });
  add("trig_Manin", "trig", 1, [=](const CheckOptions& o) { return one(trig_manin_residual(n, w, false, ctx, o)); });
  add("trig_Manin_GLG", "trig", 1,
      [=](const CheckOptions& o) { return one(trig_manin_residual(n, w, true, ctx, o)); });
  return t;
}

bool selected(const RunConfig& c, const std::string& suite) {
  for (const auto& s : c.suites)
    if (s == "all" || s == suite) return true;
  return false;
}

ResidualReport error_report(const Task& t, const std::string& msg, std::uint64_t seed) {
  ResidualReport r;
  // the key carries the parameters, so it doubles as a unique id
  r.identity_id = t.key;
  r.status = "error";
  r.message = msg;
  r.seed = seed;
  r.max_abs = r.max_rel = INFINITY;
  return r;
}

}  // namespace

int RunResult::passed() const {
  return static_cast<int>(std::count_if(reports.begin(), reports.end(), [](const auto& r) { return r.pass; }));
}
int RunResult::failed() const { return static_cast<int>(reports.size()) - passed(); }

RunResult run(const RunConfig& config) {
  config.validate();
  RunResult out;
  out.config = config;
  std::vector<Task> tasks;
  for (auto& t : build_tasks(config))
    if (selected(config, t.suite) && config.n >= t.min_n) tasks.push_back(std::move(t));

  std::vector<Reports> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      CheckOptions o;
      o.samples = config.samples;
      o.seed = derive_seed(config.seed, t.key);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        results[i] = t.fn(o);
      } catch (const std::exception& e) {
        results[i] = {error_report(t, e.what(), o.seed)};
      }
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      for (auto& r : results[i]) {
        r.wall_time_ms = ms / static_cast<double>(results[i].size());
        r.seed = o.seed;
      }
    }
  };
  unsigned nthreads = config.threads ? static_cast<unsigned>(config.threads) : std::thread::hardware_concurrency();
  nthreads = std::max(1u, std::min<unsigned>(nthreads, static_cast<unsigned>(tasks.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < nthreads; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  const double scale = config.tol / 1e-9;
  std::set<std::string> seen;
  for (auto& rs : results)
    for (auto& r : rs) {
      if (r.status == "ok") {
        const CatalogueEntry& e = entry_for(r.identity_id);
        r.paper_anchor = e.anchor;
        r.finalize(class_base(e.tol_class) * scale);
      } else {
        r.finalize(config.tol);
      }
      if (!seen.insert(r.identity_id).second)
        throw Error(ErrorCode::internal, "duplicate identity id '" + r.identity_id + "'");
      out.reports.push_back(std::move(r));
    }
  std::sort(out.reports.begin(), out.reports.end(),
            [](const auto& a, const auto& b) { return a.identity_id < b.identity_id; });
  return out;
}

// ---------------------------------------------------------------- JSON

namespace {

json cjson(cplx z) { return json::array({z.real(), z.imag()}); }

cplx from_cjson(const json& j) {
  if (j.is_string()) return parse_complex(j.get<std::string>());
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
  throw UsageError("complex values are [re, im] pairs or strings");
}

// Non-finite residuals have no JSON number; they are written as strings.
json num(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

double from_num(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  return NAN;
}

json config_json(const RunConfig& c) {
  json j;
  j["n"] = c.n;
  j["suites"] = c.suites;
  j["tau"] = cjson(c.tau);
  j["hbar"] = cjson(c.hbar);
  j["seed"] = c.seed;
  j["tol"] = c.tol;
  j["samples"] = c.samples;
  json sites = json::array();
  for (const auto& s : c.sites) sites.push_back({{"kind", s.dual ? "dual" : "defining"}, {"point", cjson(s.point)}});
  j["sites"] = sites;
  return j;
}

}  // namespace

void apply_config_json(RunConfig& c, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "n") c.n = v.get<int>();
      else if (k == "suites") c.suites = v.is_string() ? parse_suites(v.get<std::string>()) : v.get<std::vector<std::string>>();
      else if (k == "tau") c.tau = from_cjson(v);
      else if (k == "hbar") c.hbar = from_cjson(v);
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "tol") c.tol = v.get<double>();
      else if (k == "samples") c.samples = v.get<int>();
      else if (k == "threads") c.threads = v.get<int>();
      else if (k == "output_path") c.output_path = v.get<std::string>();
      else if (k == "sites") {
        if (v.is_string()) {
          c.sites = parse_sites(v.get<std::string>());
        } else {
          c.sites.clear();
          for (const auto& s : v) {
            const std::string kind = s.at("kind").get<std::string>();
            if (kind != "defining" && kind != "dual") throw UsageError("site kind must be defining or dual");
            c.sites.push_back({kind == "dual", from_cjson(s.at("point"))});
          }
        }
      } else {
        throw UsageError("unknown config key '" + k + "'");
      }
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
}

std::string serialize(const RunResult& r, bool include_timing) {
  json j;
  j["schema"] = 1;
  j["config"] = config_json(r.config);
  json reps = json::array();
  for (const auto& x : r.reports) {
    json e;
    e["identity_id"] = x.identity_id;
    e["paper_anchor"] = x.paper_anchor;
    e["samples_used"] = x.samples_used;
    e["max_abs"] = num(x.max_abs);
    e["max_rel"] = num(x.max_rel);
    e["tol"] = num(x.tol);
    e["pass"] = x.pass;
    e["wall_time_ms"] = include_timing ? x.wall_time_ms : 0.0;
    e["seed"] = x.seed;
    e["status"] = x.status;
    if (!x.message.empty()) e["message"] = x.message;
    reps.push_back(e);
  }
  j["reports"] = reps;
  j["summary"] = {{"passed", r.passed()}, {"failed", r.failed()}};
  return j.dump(2) + "\n";
}

RunResult deserialize(const std::string& text) {
  RunResult r;
  try {
    const json j = json::parse(text);
    if (j.at("schema").get<int>() != 1) throw UsageError("unsupported report schema");
    apply_config_json(r.config, j.at("config").dump());
    for (const auto& e : j.at("reports")) {
      ResidualReport x;
      x.identity_id = e.at("identity_id").get<std::string>();
      x.paper_anchor = e.at("paper_anchor").get<std::string>();
      x.samples_used = e.at("samples_used").get<int>();
      x.max_abs = from_num(e.at("max_abs"));
      x.max_rel = from_num(e.at("max_rel"));
      x.tol = from_num(e.at("tol"));
      x.pass = e.at("pass").get<bool>();
      x.wall_time_ms = e.at("wall_time_ms").get<double>();
      x.seed = e.at("seed").get<std::uint64_t>();
      x.status = e.at("status").get<std::string>();
      if (e.contains("message")) x.message = e.at("message").get<std::string>();
      r.reports.push_back(std::move(x));
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed report document: ") + e.what());
  }
  return r;
}

}  // namespace ellgaudin
