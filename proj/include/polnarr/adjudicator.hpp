#pragma once

// Clause adjudication of transmissions, the obligation ledger, and audit of
// complete event traces.

#include <optional>
#include <string>
#include <vector>

#include "polnarr/core_model.hpp"
#include "polnarr/eval.hpp"
#include "polnarr/grounder.hpp"
#include "polnarr/query.hpp"

namespace polnarr {

enum class ClauseStatus { Permits, Forbids, NotApplicable };

/// Component responsible for a `forbids`.
enum class FailedComponent { None, Requirement, Obligation };

const char* to_string(ClauseStatus s);
const char* to_string(FailedComponent c);

struct ClauseVerdict {
  std::string clause_id;
  ClauseStatus status = ClauseStatus::NotApplicable;
  bool category = false;
  bool exception = false;
  bool requirement = false;
  FailedComponent failed = FailedComponent::None;
  std::string failing_atom;  // requirement failure, printed with bindings

  bool operator==(const ClauseVerdict&) const = default;
};

struct Verdict {
  EventInstance event;
  bool transmission = false;
  std::vector<ClauseVerdict> clauses;  // in policy order; empty for non-transmissions
  bool compliant = true;

  std::vector<std::string> permits() const;
  std::vector<std::string> forbids() const;
  bool operator==(const Verdict&) const = default;
};

/// Overall compliance of a transmission verdict under a combination mode.
bool combine(const std::vector<ClauseVerdict>& clauses, Combination mode);

struct ObligationEntry {
  std::string clause_id;
  EventInstance trigger;
  Pattern required;             // ground apart from wildcards
  std::optional<int> deadline;  // absolute step; nullopt = horizon
  std::optional<int> discharged_at;

  bool operator==(const ObligationEntry&) const = default;
};

struct ObligationLedger {
  std::vector<ObligationEntry> pending;
  std::vector<ObligationEntry> discharged;

  bool operator==(const ObligationLedger&) const = default;
};

struct Adjudication {
  Verdict verdict;
  std::vector<ObligationEntry> new_entries;
};

/// Everything besides the event that a verdict depends on.
struct AdjudicationContext {
  const PolicyModel& model;
  const State& state_before;
  const std::vector<EventInstance>& history;
  const std::vector<Symbol>& entities;
  Combination combination = Combination::Strict;
  ReadLog* log = nullptr;
};

Adjudication adjudicate(const GroundAction& action, int time, const AdjudicationContext& ctx);

/// Bindings of a clause's category variables to a transmission's parties.
Bindings clause_bindings(const Clause& clause, const GroundTransmission& tx);

/// Move pending entries matched by `event` (strictly after the trigger and
/// no later than the deadline) to discharged. Fluent obligations are
/// discharged by `state_after` when given.
ObligationLedger discharge(const ObligationLedger& ledger, const EventInstance& event,
                           const State* state_after = nullptr);

/// Pending entries due by `end_step`.
std::vector<ObligationEntry> finalize(const ObligationLedger& ledger, int end_step);

/// Flip the triggering clause of each unmet entry from permits to forbids
/// and recompute overall compliance.
void apply_unmet(std::vector<Verdict>& verdicts, const std::vector<ObligationEntry>& unmet,
                 Combination mode);

struct RequirementFailure {
  EventInstance event;
  std::string clause_id;
  std::string failing_atom;
  bool operator==(const RequirementFailure&) const = default;
};

struct TraceReport {
  bool compliant = true;
  std::vector<Verdict> verdicts;  // one per event
  std::vector<std::string> broken_clauses;  // clauses forbidding some event, sorted
  std::vector<RequirementFailure> requirement_failures;
  std::vector<ObligationEntry> unmet_obligations;
};

/// Replay `events` from the domain's initial state. Throws
/// ModelError("IllFormedTrace") for unknown actions, bad arity,
/// non-increasing times or violated preconditions.
TraceReport check_trace(const PolicyModel& model, const Domain& domain,
                        const std::vector<EventInstance>& events,
                        Combination mode = Combination::Strict);

}  // namespace polnarr
