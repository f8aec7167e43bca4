#pragma once

// JSON documents shared by the command line and the HTTP service, and the
// solve pipeline both of them run.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "polnarr/adjudicator.hpp"
#include "polnarr/diagnostics.hpp"
#include "polnarr/narrative_graph.hpp"
#include "polnarr/planner.hpp"
#include "polnarr/query.hpp"

namespace polnarr {

using Json = nlohmann::ordered_json;

/// Thrown for documents that parse as JSON but do not fit the schema.
/// code is "BadRequest" or "InvalidTrace"/"InvalidQuery" with diagnostics.
struct DocumentError : ModelError {
  std::vector<Diagnostic> diagnostics;
  DocumentError(std::string code, std::string message, std::vector<Diagnostic> diags = {})
      : ModelError(std::move(code), std::move(message)), diagnostics(std::move(diags)) {}
};

Json to_json(const Diagnostic& d);
Json to_json(const std::vector<Diagnostic>& ds);
Json to_json(const EventInstance& e);
Json to_json(const Verdict& v);
Json to_json(const ObligationEntry& e);
Json to_json(const BlockReport& b);
Json to_json(const TraceReport& r);
Json to_json(const PolicyModel& model, const Labels& labels, const NarrativeGraph& g);

/// Roles, infos, purposes, predicates, entities, actions, clauses, templates.
Json model_summary(const PolicyModel& model);

/// Overrides from the command line or a request's "limits"/"options".
struct SolveOverrides {
  std::optional<int> horizon;
  std::optional<std::size_t> max_narratives;
  std::optional<std::size_t> max_blocks;
  std::optional<long> timeout_ms;
  std::optional<Combination> combination;
  std::optional<bool> allow_noncompliant;
  std::optional<bool> report_blocked;
  std::optional<bool> intentionality;
};

struct SolveRun {
  std::string name;
  ResolvedQuery query;
  SolveResult result;
  NarrativeGraph graph;
  Json document;
};

/// Resolve, enumerate, merge and serialize. Throws ModelError("InvalidValue")
/// for a horizon below 1.
SolveRun run_solve(const PolicyModel& model, const QuerySpec& spec,
                   const SolveOverrides& overrides = {});

/// Human-readable rendering of a solve run.
std::string solve_text(const PolicyModel& model, const SolveRun& run);

/// Exit status of `solve`: 0 with narratives, 2 without.
int solve_exit_code(const SolveRun& run);

/// Structured query: {name, horizon, entities:[{id, roles, label}], facts,
/// infos, purposes, must, never, goals:{actor:[...]}, targets,
/// limits:{max_narratives, max_blocks, timeout_ms}, options:{require_compliant,
/// report_blocked, intentionality}, combination}. Patterns are DSL strings.
QuerySpec query_from_json(const Json& j, const PolicyModel& model);
Json query_to_json(const QuerySpec& q);

/// A trace to audit and the domain it runs in.
struct TraceFile {
  Domain domain;
  std::vector<EventInstance> events;
};

/// {entities:[{id, roles:[...]}], fluents:[...], events:[{t, action, args}]}.
/// Entities and fluents add to the policy's own.
TraceFile trace_from_json(const Json& j, const PolicyModel& model);

Combination parse_combination(const std::string& s);
const char* to_string(Combination c);

}  // namespace polnarr
