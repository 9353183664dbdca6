#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "ellgaudin/runner.hpp"

using namespace ellgaudin;

TEST_CASE("complex literals") {
  CHECK(parse_complex("0+1.1i") == cplx(0.0, 1.1));
  CHECK(parse_complex("0.137+0.071i") == cplx(0.137, 0.071));
  CHECK(parse_complex("-0.2i") == cplx(0.0, -0.2));
  CHECK(parse_complex("i") == cplx(0.0, 1.0));
  CHECK(parse_complex("2-i") == cplx(2.0, -1.0));
  CHECK(parse_complex("3") == cplx(3.0, 0.0));
  CHECK(parse_complex("1e-3-2e-2i") == cplx(1e-3, -2e-2));
  CHECK(parse_complex(" 0.5 + 1e+1i ") == cplx(0.5, 10.0));
  CHECK_THROWS_AS(parse_complex("abc"), UsageError);
  CHECK_THROWS_AS(parse_complex("1+2j"), UsageError);
  CHECK_THROWS_AS(parse_complex(""), UsageError);
}

TEST_CASE("site lists") {
  const auto s = parse_sites("defining@0.1,dual@0.45+0.02i");
  REQUIRE(s.size() == 2);
  CHECK(!s[0].dual);
  CHECK(s[1].dual);
  CHECK(s[1].point == cplx(0.45, 0.02));
  CHECK_THROWS_AS(parse_sites("adjoint@0.1"), UsageError);
  CHECK_THROWS_AS(parse_sites("defining"), UsageError);
}

TEST_CASE("config validation") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [](auto mutate) {
    RunConfig x;
    mutate(x);
    CHECK_THROWS_AS(x.validate(), UsageError);
  };
  bad([](RunConfig& x) { x.n = 4; });
  bad([](RunConfig& x) { x.tol = 0.0; });
  bad([](RunConfig& x) { x.samples = 0; });
  bad([](RunConfig& x) { x.suites = {"bogus"}; });
  bad([](RunConfig& x) { x.tau = {0.0, -1.0}; });
  bad([](RunConfig& x) { x.sites = {{false, 0.1}, {true, 0.1}}; });
}

TEST_CASE("config JSON overlay") {
  RunConfig c;
  apply_config_json(c, R"({"n": 3, "suites": "theta,trig", "tau": "0.2+0.9i", "seed": 42,
                           "sites": [{"kind": "dual", "point": [0.3, 0.0]}, {"kind": "defining", "point": "0.6"}]})");
  CHECK(c.n == 3);
  CHECK(c.suites == std::vector<std::string>{"theta", "trig"});
  CHECK(c.tau == cplx(0.2, 0.9));
  CHECK(c.seed == 42);
  CHECK(c.sites.size() == 2);
  CHECK(c.sites[0].dual);
  CHECK(c.tol == 1e-9);
  CHECK_THROWS_AS(apply_config_json(c, R"({"colour": 1})"), UsageError);
  CHECK_THROWS_AS(apply_config_json(c, "{"), UsageError);
}

TEST_CASE("catalogue") {
  const auto& cat = catalogue();
  CHECK(cat.size() >= 25);
  std::set<std::string> ids;
  for (const auto& e : cat) {
    CHECK(ids.insert(e.id).second);
    CHECK(!e.anchor.empty());
  }
  CHECK(ids.count("DYBE"));
  CHECK(ids.count("Q_Ltilde"));
}

TEST_CASE("empty report list serializes") {
  RunResult r;
  const std::string s = serialize(r);
  CHECK(s.find("\"reports\": []") != std::string::npos);
  CHECK(s.find("\"passed\": 0") != std::string::npos);
  CHECK(s.find("\"schema\": 1") != std::string::npos);
}

TEST_CASE("serialize round trip") {
  RunConfig c;
  c.suites = {"theta", "felder"};
  c.samples = 3;
  const RunResult r = run(c);
  REQUIRE(!r.reports.empty());
  const RunResult back = deserialize(serialize(r));
  REQUIRE(back.reports.size() == r.reports.size());
  for (std::size_t i = 0; i < r.reports.size(); ++i) {
    const auto &a = r.reports[i], &b = back.reports[i];
    CHECK(a.identity_id == b.identity_id);
    CHECK(a.paper_anchor == b.paper_anchor);
    CHECK(a.samples_used == b.samples_used);
    CHECK(a.max_abs == b.max_abs);
    CHECK(a.max_rel == b.max_rel);
    CHECK(a.tol == b.tol);
    CHECK(a.pass == b.pass);
    CHECK(a.wall_time_ms == b.wall_time_ms);
    CHECK(a.seed == b.seed);
    CHECK(a.status == b.status);
  }
  CHECK(back.config.n == c.n);
  CHECK(back.config.suites == c.suites);
}

TEST_CASE("reports: sorted, unique, pass iff max_rel < tol") {
  RunConfig c;
  c.samples = 2;
  const RunResult r = run(c);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < r.reports.size(); ++i) {
    const auto& x = r.reports[i];
    CHECK(ids.insert(x.identity_id).second);
    if (i) CHECK(r.reports[i - 1].identity_id < x.identity_id);
    CHECK(x.pass == (x.status == "ok" && x.max_rel < x.tol));
  }
  CHECK(r.exit_status() == 0);
}

TEST_CASE("determinism and seed dependence") {
  RunConfig c;
  c.suites = {"felder", "gaudin"};
  c.samples = 2;
  const std::string a = serialize(run(c), false), b = serialize(run(c), false);
  CHECK(a == b);
  c.threads = 1;
  CHECK(serialize(run(c), false) == a);
  c.seed = 2;
  CHECK(serialize(run(c), false) != a);
}

TEST_CASE("unattainable tolerance fails") {
  RunConfig c;
  c.suites = {"theta"};
  c.tol = 1e-30;
  const RunResult r = run(c);
  CHECK(r.failed() > 0);
  CHECK(r.exit_status() != 0);
}

TEST_CASE("tolerance classes scale with tol") {
  RunConfig c;
  c.suites = {"trig"};
  c.samples = 2;
  c.tol = 1e-7;
  for (const auto& r : run(c).reports) {
    const std::string base = r.identity_id.substr(0, r.identity_id.find(':'));
    if (base == "trig_limit") CHECK(r.tol == doctest::Approx(1e-3));
    if (base == "Fconj") CHECK(r.tol == doctest::Approx(1e-7));
  }
}
