#pragma once

// Bounded-horizon narrative enumeration.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polnarr/adjudicator.hpp"
#include "polnarr/core_model.hpp"
#include "polnarr/eval.hpp"
#include "polnarr/grounder.hpp"
#include "polnarr/query.hpp"

namespace polnarr {

struct EventRecord {
  EventInstance event;
  Verdict verdict;
  std::vector<Symbol> participants;
  std::vector<Atom> initiated;
  std::vector<Atom> terminated;
  ReadLog pre_reads;  // precondition evaluation
  ReadLog adj_reads;  // clause adjudication
};

/// `producer` initiated `fluent`, which `consumer` read. Times are event
/// steps; producer 0 is the initial state.
struct CausalLink {
  int producer = 0;
  Atom fluent;
  int consumer = 0;
  auto operator<=>(const CausalLink&) const = default;
  bool operator==(const CausalLink&) const = default;
};

struct Narrative {
  std::vector<EventRecord> events;  // times 1..k; steps k+1..horizon are no-ops
  std::vector<State> states;        // s0..sk
  int horizon = 0;
  ObligationLedger ledger;
  std::vector<ObligationEntry> unmet;  // finalize(ledger, horizon)
  std::vector<CausalLink> causal_links;

  std::vector<EventInstance> event_instances() const;
  std::vector<Verdict> verdicts() const;
  bool compliant() const;
};

struct TerminatedFluent {
  Atom fluent;
  EventInstance terminated_by;
  bool operator==(const TerminatedFluent&) const = default;
};

struct BlockCause {
  bool no_applicable_clause = false;
  std::vector<ClauseVerdict> failing;  // clauses forbidding the target
  std::vector<TerminatedFluent> terminated;  // fluents the failing requirements missed
  bool operator==(const BlockCause&) const = default;
  std::string key() const;
};

struct BlockReport {
  std::vector<EventInstance> prefix;
  EventInstance target;  // at time prefix.size() + 1
  BlockCause cause;
  Verdict verdict;
};

struct SolveResult {
  std::vector<Narrative> narratives;
  std::vector<BlockReport> blocks;
  bool truncated = false;  // timeout hit before the search finished
  std::size_t nodes = 0;   // search nodes visited
};

/// Precondition-checked transition. Throws ModelError("PreconditionViolated")
/// naming the failing atom.
State apply_event(const PolicyModel& model, const State& state, const GroundAction& action,
                  int time, const std::vector<EventInstance>& history = {},
                  const std::vector<Symbol>& entities = {});

/// Every event lies on a causal chain ending in a fluent (or event) matching
/// a goal of one of its participants. Participants without goals of their
/// own cooperate towards every declared goal.
bool check_intentionality(const Narrative& n, const std::map<Symbol, std::vector<Pattern>>& goals);

/// Depth-first enumeration in ground-action order. Blocked targets are collected in
/// the same pass when `report_blocked` is set.
SolveResult enumerate_narratives(const PolicyModel& model, const ResolvedQuery& query);

/// Blocked-branch reports only (no narrative emission limit applies).
std::vector<BlockReport> explain_blocked(const PolicyModel& model, const ResolvedQuery& query);

/// Reads-from links of a finished narrative.
std::vector<CausalLink> causal_links(const PolicyModel& model,
                                     const std::vector<EventRecord>& events,
                                     const std::vector<State>& states);

}  // namespace polnarr
