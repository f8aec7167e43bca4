// Acceptance runner: one PASS/FAIL line per criterion. Exits non-zero when
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <functional>
#include <iostream>
#include <set>

#include "clause_oracle.hpp"
#include "oracle.hpp"
#include "polnarr/narrative_graph.hpp"
#include "support.hpp"

using namespace polnarr;
using namespace polnarr::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

ResolvedQuery resolved(const std::string& stem, std::size_t max_narratives = 0) {
  QuerySpec q = hipaa_query(stem);
  if (max_narratives) q.max_narratives = max_narratives;
  return resolve_query(hipaa().model, q);
}

std::vector<std::string> golden_multiset(const Json& doc) {
  std::vector<std::string> out;
  for (const auto& n : doc["narratives"])
    for (const auto& e : n["events"]) {
      EventInstance ev{e["t"].get<int>(), e["action"].get<std::string>(),
                       e["args"].get<std::vector<std::string>>()};
      out.push_back(std::to_string(ev.time) + ":" + ev.str());
    }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome q1_golden() {
  const auto start = std::chrono::steady_clock::now();
  SolveRun run = run_solve(hipaa().model, hipaa_query("q1"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& ns = run.result.narratives;
  bool shape = std::any_of(ns.begin(), ns.end(), [](const Narrative& n) {
    if (n.events.size() < 3) return false;
    const auto& e = n.events;
    const std::size_t k = e.size();
    const bool acquired = std::any_of(e.begin(), e.end() - 2, [](const EventRecord& r) {
      return r.event.action == "get_treatment";
    });
    return acquired && e[k - 2].event.action == "authorize" && e[k - 1].event.action == "sell_info" &&
           e[k - 1].verdict.permits() == std::vector<std::string>{"164.508"};
  });
  Json golden = Json::parse(read_text(hipaa().dir + "/golden/q1.json"));
  bool multiset = golden_multiset(run.document) == golden_multiset(golden);
  return {shape && multiset && secs < 10.0,
          std::to_string(ns.size()) + " narrative(s) in " + std::to_string(secs) + " s; multiset " +
              (multiset ? "matches" : "differs")};
}

Outcome q2_golden() {
  SolveResult q1 = enumerate_narratives(hipaa().model, resolved("q1", 1000000));
  SolveResult q2 = enumerate_narratives(hipaa().model, resolved("q2", 1000000));
  auto k1 = sequence_keys(q1), k2 = sequence_keys(q2);
  std::set<std::string> expected;
  for (std::size_t i = 0; i < q1.narratives.size(); ++i) {
    auto evs = q1.narratives[i].event_instances();
    if (std::none_of(evs.begin(), evs.end(), [](const EventInstance& e) {
          return e.action == "authorize" && e.args.at(0) == "alice";
        }))
      expected.insert(k1[i]);
  }
  bool clean = k2.size() == expected.size() && std::set<std::string>(k2.begin(), k2.end()) == expected;
  Json golden = Json::parse(read_text(hipaa().dir + "/golden/q2.json"));
  for (const auto& n : golden["narratives"])
    for (const auto& e : n["events"])
      if (e["action"] == "authorize" && e["args"][0] == "alice") clean = false;
  return {clean && !q1.truncated && !q2.truncated,
          "q1 " + std::to_string(k1.size()) + ", q2 " + std::to_string(k2.size()) + ", expected " +
              std::to_string(expected.size())};
}

Outcome q3_golden() {
  ResolvedQuery q = resolved("q3");
  SolveResult r = enumerate_narratives(hipaa().model, q);
  NarrativeGraph g = merge(hipaa().model, r.narratives, r.blocks);
  bool path = std::any_of(g.nodes.begin(), g.nodes.end(), [](const GraphNode& n) {
    return n.kind == NodeKind::Event && n.event.action == "disclose" && n.verdict.compliant &&
           !n.narratives.empty() && n.verdict.permits() == std::vector<std::string>{"164.512(b)(v)(A)"};
  });
  bool blocked = false;
  for (const GraphBlock& b : g.blocks) {
    bool quit_cause = false;
    for (const auto& t : b.report.cause.terminated)
      quit_cause = quit_cause || (t.fluent == Atom{"employs", {"acme", "bob"}} &&
                                  t.terminated_by.action == "quit_job");
    bool edge = std::any_of(g.edges.begin(), g.edges.end(), [&](const GraphEdge& e) {
      return e.from == b.at && e.to == b.node && e.kind == EdgeKind::Blocked;
    });
    blocked = blocked || (quit_cause && edge);
  }
  return {path && blocked, std::to_string(r.narratives.size()) + " narrative(s), " +
                               std::to_string(g.blocks.size()) + " blocked branch(es)"};
}

Outcome oracle_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  MicroDomainGenerator gen(20261015);
  int compared = 0, mismatched = 0;
  for (int i = 0; i < 60; ++i) {
    MicroDomain d = gen.next();
    PolicyModel m = policy(d.policy);
    ResolvedQuery q = resolve_query(m, query(d.query, m));
    q.max_narratives = 1000000;
    q.timeout_ms = 60000;
    auto expected = brute_force_narratives(m, q);
    auto got = sequence_keys(enumerate_narratives(m, q));
    std::sort(expected.begin(), expected.end());
    std::sort(got.begin(), got.end());
    ++compared;
    mismatched += got != expected;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {compared >= 50 && mismatched == 0 && secs < 60.0,
          std::to_string(compared) + " domains, " + std::to_string(mismatched) + " mismatched, " +
              std::to_string(secs) + " s"};
}

Outcome partition() {
  std::size_t bad = partition_violations(20261015, 1000, [](const std::string& text) { return policy(text); });
  return {bad == 0, "1000 instances, " + std::to_string(bad) + " violation(s)"};
}

Outcome obligations() {
  auto loaded = parse_policy_files({data_path("obligations.ppol")});
  if (!loaded) return {false, "test policy does not load"};
  const PolicyModel& m = *loaded.value;
  auto open = parse_query_file(data_path("obligations.pq"), m);
  auto closed = parse_query_file(data_path("obligations_never.pq"), m);
  if (!open || !closed) return {false, "queries do not load"};
  std::size_t n_open = enumerate_narratives(m, resolve_query(m, *open.value)).narratives.size();
  std::size_t n_closed = enumerate_narratives(m, resolve_query(m, *closed.value)).narratives.size();
  TraceFile late = trace_from_json(Json::parse(read_text(data_path("late_notice.json"))), m);
  TraceReport r = check_trace(m, late.domain, late.events);
  bool flipped = !r.compliant && r.unmet_obligations.size() == 1 && r.verdicts.size() > 1 &&
                 r.verdicts[1].forbids() == std::vector<std::string>{"notice"} &&
                 r.verdicts[1].clauses[0].failed == FailedComponent::Obligation;
  return {n_open >= 1 && n_closed == 0 && flipped,
          "without never " + std::to_string(n_open) + ", with never " + std::to_string(n_closed) +
              ", audit flip " + (flipped ? "yes" : "no")};
}

Outcome audit_golden() {
  const std::string dir = hipaa().dir + "/traces/";
  ProcessResult bad = run_command(cli("audit --pack hipaa --trace '" + dir + "unauthorized_sale.json'"));
  ProcessResult good = run_command(cli("audit --pack hipaa --trace '" + dir + "q1_authorized.json'"));
  bool named = false;
  try {
    Json j = Json::parse(bad.out);
    for (const auto& f : j["requirement_failures"]) named = named || f["clause"] == "164.508";
  } catch (const std::exception&) {
  }
  return {bad.exit_code == 3 && named && good.exit_code == 0,
          "unauthorized exit " + std::to_string(bad.exit_code) + ", authorized exit " +
              std::to_string(good.exit_code)};
}

Outcome subsumption() {
  QuerySpec q = hipaa_query("q1");
  q.infos = std::vector<Symbol>{"psychotherapy_notes"};
  q.must = {*parse_pattern("information_sold(_, _, alice, psychotherapy_notes)").value};
  SolveResult r = enumerate_narratives(hipaa().model, resolve_query(hipaa().model, q));
  SolveResult base = enumerate_narratives(hipaa().model, resolved("q1"));
  constexpr std::size_t kPinned = 1;
  bool both = !r.narratives.empty();
  for (const Narrative& n : r.narratives) {
    const Verdict& v = n.events.back().verdict;
    auto p = v.permits();
    both = both && std::count(p.begin(), p.end(), "164.508") && std::count(p.begin(), p.end(), "164.508(a)(2)");
  }
  return {both && r.narratives.size() <= base.narratives.size() && r.narratives.size() == kPinned,
          std::to_string(r.narratives.size()) + " narrative(s) vs " + std::to_string(base.narratives.size())};
}

Outcome determinism() {
  const std::string dir = hipaa().dir + "/traces/";
  const std::vector<std::string> commands = {
      "solve --pack hipaa --query q1.pq",
      "solve --pack hipaa --query q2.pq",
      "solve --pack hipaa --query q3.pq",
      "audit --pack hipaa --trace '" + dir + "unauthorized_sale.json'",
      "audit --pack hipaa --trace '" + dir + "q1_authorized.json'",
  };
  int differing = 0;
  for (const auto& c : commands) {
    ProcessResult a = run_command(cli(c)), b = run_command(cli(c));
    differing += a.out != b.out || a.out.empty();
  }
  for (const char* stem : {"q1", "q2"})
    differing += run_command(cli(std::string("solve --pack hipaa --query ") + stem + ".pq")).out !=
                 read_text(hipaa().dir + "/golden/" + stem + ".json");
  return {differing == 0, std::to_string(commands.size()) + " commands, " + std::to_string(differing) +
                              " differing"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"q1-golden", q1_golden},       {"q2-golden", q2_golden},
      {"q3-golden", q3_golden},       {"oracle-equivalence", oracle_equivalence},
      {"clause-partition", partition}, {"obligation-semantics", obligations},
      {"audit-golden", audit_golden}, {"subsumption", subsumption},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << "\n";
  }
  return failed == 0 ? 0 : 1;
}
