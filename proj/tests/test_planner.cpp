#include <doctest.h>

#include <chrono>
#include <set>

#include "oracle.hpp"
#include "polnarr/narrative_graph.hpp"
#include "support.hpp"

using namespace polnarr;
using namespace polnarr::testing;

namespace {

ResolvedQuery hipaa_resolved(const std::string& stem, const SolveOverrides& o = {}) {
  QuerySpec q = hipaa_query(stem);
  if (o.horizon) q.horizon = o.horizon;
  if (o.max_narratives) q.max_narratives = o.max_narratives;
  if (o.allow_noncompliant) q.require_compliant = !*o.allow_noncompliant;
  if (o.report_blocked) q.report_blocked = o.report_blocked;
  if (o.intentionality) q.intentionality = o.intentionality;
  if (o.timeout_ms) q.timeout_ms = o.timeout_ms;
  return resolve_query(hipaa().model, q);
}

SolveResult solve(const std::string& stem, const SolveOverrides& o = {}) {
  return enumerate_narratives(hipaa().model, hipaa_resolved(stem, o));
}

bool mentions_authorize_by_alice(const Narrative& n) {
  for (const auto& e : n.event_instances())
    if (e.action == "authorize" && !e.args.empty() && e.args[0] == "alice") return true;
  return false;
}

std::vector<std::string> golden_events(const Json& doc, std::size_t i) {
  std::vector<std::string> out;
  for (const auto& e : doc["narratives"][i]["events"]) {
    EventInstance ev{e["t"].get<int>(), e["action"].get<std::string>(),
                     e["args"].get<std::vector<std::string>>()};
    out.push_back(std::to_string(ev.time) + ":" + ev.str());
  }
  return out;
}

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_SUITE("planner") {

TEST_CASE("q1: an acquisition, an authorization, then a permitted sale") {
  auto start = std::chrono::steady_clock::now();
  SolveResult r = solve("q1");
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));
  CHECK_FALSE(r.truncated);
  REQUIRE(r.narratives.size() == 1);
  const Narrative& n = r.narratives[0];
  REQUIRE(n.events.size() == 3);
  CHECK(n.events[0].event.action == "get_treatment");
  CHECK(n.events[1].event.action == "authorize");
  CHECK(n.events[2].event.action == "sell_info");
  CHECK(n.events[2].verdict.transmission);
  CHECK(n.events[2].verdict.permits() == std::vector<std::string>{"164.508"});
  CHECK(n.compliant());

  Json golden = Json::parse(read_text(hipaa().dir + "/golden/q1.json"));
  REQUIRE(golden["narratives"].size() == r.narratives.size());
  CHECK(sorted(keys(n.event_instances())) == sorted(golden_events(golden, 0)));
}

TEST_CASE("q2 is q1 without the narratives where alice authorizes") {
  for (bool noncompliant : {false, true}) {
    for (int horizon : {3, 4}) {
      CAPTURE(noncompliant);
      CAPTURE(horizon);
      SolveOverrides o;
      o.horizon = horizon;
      o.allow_noncompliant = noncompliant;
      o.max_narratives = 1000000;
      SolveResult q1 = solve("q1", o);
      SolveResult q2 = solve("q2", o);
      REQUIRE_FALSE(q1.truncated);
      REQUIRE_FALSE(q2.truncated);
      std::set<std::string> expected;
      for (std::size_t i = 0; i < q1.narratives.size(); ++i)
        if (!mentions_authorize_by_alice(q1.narratives[i])) expected.insert(sequence_keys(q1)[i]);
      auto got = sequence_keys(q2);
      CHECK(std::set<std::string>(got.begin(), got.end()) == expected);
      CHECK(got.size() == expected.size());
      for (const Narrative& n : q2.narratives) CHECK_FALSE(mentions_authorize_by_alice(n));
      if (noncompliant) CHECK_FALSE(expected.empty());
    }
  }
  Json golden = Json::parse(read_text(hipaa().dir + "/golden/q2.json"));
  CHECK(golden["narratives"].empty());
}

TEST_CASE("q3: a permitted disclosure and a branch blocked by quitting") {
  SolveResult r = solve("q3");
  REQUIRE_FALSE(r.narratives.empty());
  bool permitted = false;
  for (const Narrative& n : r.narratives)
    for (const auto& e : n.events)
      if (e.event.action == "disclose") {
        CHECK(e.verdict.compliant);
        permitted = permitted || e.verdict.permits() == std::vector<std::string>{"164.512(b)(v)(A)"};
      }
  CHECK(permitted);

  bool quit_block = false;
  for (const BlockReport& b : r.blocks) {
    CHECK(b.target.action == "disclose");
    CHECK(b.target.time == static_cast<int>(b.prefix.size()) + 1);
    CHECK_FALSE(b.verdict.compliant);
    for (const auto& t : b.cause.terminated)
      if (t.fluent == Atom{"employs", {"acme", "bob"}} && t.terminated_by.action == "quit_job") {
        quit_block = true;
        REQUIRE_FALSE(b.cause.failing.empty());
        CHECK(b.cause.failing[0].clause_id == "164.512(b)(v)(A)");
      }
  }
  CHECK(quit_block);
}

TEST_CASE("subsumption: psychotherapy notes still match phi clauses and add the specific one") {
  QuerySpec q = hipaa_query("q1");
  q.infos = std::vector<Symbol>{"psychotherapy_notes"};
  q.must = {*parse_pattern("information_sold(_, _, alice, psychotherapy_notes)").value};
  SolveResult r = enumerate_narratives(hipaa().model, resolve_query(hipaa().model, q));
  SolveResult base = solve("q1");
  CHECK(r.narratives.size() <= base.narratives.size());
  REQUIRE(r.narratives.size() == 1);
  const Verdict& sale = r.narratives[0].events.back().verdict;
  CHECK(sale.permits() == std::vector<std::string>{"164.508", "164.508(a)(2)"});
}

TEST_CASE("narratives satisfy the trajectory invariants") {
  MicroDomainGenerator gen(4242);
  int checked = 0;
  for (int i = 0; i < 60; ++i) {
    MicroDomain d = gen.next();
    PolicyModel m = policy(d.policy);
    ResolvedQuery q = resolve_query(m, query(d.query, m));
    q.max_narratives = 1000;
    SolveResult r = enumerate_narratives(m, q);
    auto names = entity_names(q.domain);
    ActionCatalog catalog(m);
    for (const Narrative& n : r.narratives) {
      ++checked;
      REQUIRE(n.states.size() == n.events.size() + 1);
      CHECK(n.states[0] == initial_state(q.domain));
      std::vector<EventInstance> history;
      for (std::size_t k = 0; k < n.events.size(); ++k) {
        const EventInstance& e = n.events[k].event;
        CHECK(e.time == static_cast<int>(k) + 1);
        GroundAction ga = instantiate(*catalog.find(e.action), e.args);
        State next = apply_event(m, n.states[k], ga, e.time, history, names);
        CHECK(next == n.states[k + 1]);
        history.push_back(e);
      }
      if (q.require_compliant) {
        CHECK(n.compliant());
        CHECK(n.unmet.empty());
      }
      for (const auto& p : q.never)
        for (const auto& e : history) CHECK_FALSE(matches(p, e));
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("preconditions are enforced by apply_event") {
  const PolicyModel& m = hipaa().model;
  ResolvedQuery q = hipaa_resolved("q1");
  auto names = entity_names(q.domain);
  ActionCatalog catalog(m);
  GroundAction sell = instantiate(*catalog.find("sell_info"), {"sgh", "adco", "alice", "phi", "marketing"});
  try {
    apply_event(m, initial_state(q.domain), sell, 1, {}, names);
    FAIL("expected PreconditionViolated");
  } catch (const ModelError& e) {
    CHECK(e.code() == "PreconditionViolated");
  }
}

TEST_CASE("the narrative limit caps emission") {
  SolveOverrides o;
  o.max_narratives = 2;
  SolveResult r = solve("q3", o);
  CHECK(r.narratives.size() == 2);
  SolveResult all = solve("q3");
  auto first = sequence_keys(all);
  first.resize(2);
  CHECK(sequence_keys(r) == first);
}

TEST_CASE("a tiny timeout truncates the search") {
  SolveOverrides o;
  o.horizon = 8;
  o.timeout_ms = 1;
  SolveResult r = solve("q3", o);
  CHECK(r.truncated);
}

TEST_CASE("intentionality keeps only narratives serving a goal") {
  SolveOverrides o;
  o.intentionality = true;
  o.horizon = 4;
  o.max_narratives = 100000;
  SolveResult with = solve("q3", o);
  o.intentionality = false;
  SolveResult without = solve("q3", o);
  auto kw = sequence_keys(with), kwo = sequence_keys(without);
  CHECK_FALSE(kw.empty());
  CHECK(kw.size() <= kwo.size());
  const auto goals = hipaa_resolved("q3").goals;
  for (std::size_t i = 0; i < with.narratives.size(); ++i) {
    CHECK(check_intentionality(with.narratives[i], goals));
    CHECK(std::find(kwo.begin(), kwo.end(), kw[i]) != kwo.end());
  }
  for (const Narrative& n : without.narratives)
    if (!check_intentionality(n, goals))
      CHECK(std::find(kw.begin(), kw.end(), sequence_keys(SolveResult{{n}, {}, false, 0})[0]) == kw.end());
}

TEST_CASE("explain_blocked finds every block the combined pass reports") {
  ResolvedQuery q = hipaa_resolved("q3");
  SolveResult r = enumerate_narratives(hipaa().model, q);
  std::vector<BlockReport> alone = explain_blocked(hipaa().model, q);
  auto key = [](const BlockReport& b) {
    std::string k;
    for (const auto& s : keys(b.prefix)) k += s + ";";
    return k + "!" + b.target.str();
  };
  std::set<std::string> all;
  for (const auto& b : alone) all.insert(key(b));
  for (const auto& b : r.blocks) CHECK(all.count(key(b)));
  CHECK(alone.size() >= r.blocks.size());
}

TEST_CASE("causal links point from producers to later readers") {
  SolveResult r = solve("q1");
  const Narrative& n = r.narratives.at(0);
  for (const CausalLink& l : n.causal_links) {
    CHECK(l.producer < l.consumer);
    CHECK(n.states[static_cast<std::size_t>(l.consumer) - 1].holds(l.fluent));
    if (l.producer > 0) {
      const auto& made = n.events[static_cast<std::size_t>(l.producer) - 1].initiated;
      CHECK(std::find(made.begin(), made.end(), l.fluent) != made.end());
    }
  }
  const CausalLink auth{2, Atom{"authorized", {"alice", "sgh", "adco", "phi", "marketing"}}, 3};
  CHECK(std::find(n.causal_links.begin(), n.causal_links.end(), auth) != n.causal_links.end());
}

TEST_CASE("enumeration is deterministic") {
  for (const char* stem : {"q1", "q2", "q3"}) {
    SolveRun a = run_solve(hipaa().model, hipaa_query(stem));
    SolveRun b = run_solve(hipaa().model, hipaa_query(stem));
    CHECK(a.document.dump() == b.document.dump());
  }
}

}
