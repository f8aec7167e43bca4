#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polnarr/core_model.hpp"

namespace polnarr {

/// Finite world a search runs over.
struct Domain {
  std::vector<EntityDecl> entities;  // with initial (asserted) roles
  std::vector<Atom> facts;           // initial non-role fluents
  std::vector<Symbol> infos;         // info constants available to parameters
  std::vector<Symbol> purposes;
  int horizon = 1;

  const EntityDecl* find_entity(std::string_view name) const;
  bool operator==(const Domain&) const = default;
};

/// How per-clause statuses combine into an overall verdict.
enum class Combination {
  Strict,      // some clause permits and none forbids
  Permissive,  // no clause forbids
};

struct QuerySpec {
  std::string name;
  std::optional<int> horizon;
  std::vector<EntityDecl> entities;  // in addition to the policy's entities
  std::vector<Atom> facts;
  std::optional<std::vector<Symbol>> infos;     // nullopt = every declared info type
  std::optional<std::vector<Symbol>> purposes;  // nullopt = every declared purpose
  std::vector<Pattern> must;   // event or fluent patterns
  std::vector<Pattern> never;
  std::map<Symbol, std::vector<Pattern>> goals;
  std::vector<Pattern> targets;  // transmissions to explain when blocked

  std::optional<std::size_t> max_narratives;
  std::optional<std::size_t> max_blocks;
  std::optional<long> timeout_ms;
  std::optional<bool> require_compliant;
  std::optional<bool> report_blocked;
  std::optional<bool> intentionality;
  std::optional<Combination> combination;

  bool operator==(const QuerySpec&) const = default;
};

/// QuerySpec with every default resolved.
struct ResolvedQuery {
  Domain domain;
  std::vector<Pattern> must;
  std::vector<Pattern> never;
  std::map<Symbol, std::vector<Pattern>> goals;
  std::vector<Pattern> targets;
  std::size_t max_narratives = 10;
  std::size_t max_blocks = 100;
  long timeout_ms = 30000;
  bool require_compliant = true;
  bool report_blocked = false;
  bool intentionality = false;
  Combination combination = Combination::Strict;
};

inline constexpr int kDefaultHorizon = 3;

/// Merge the policy's entities/facts with the query's and apply defaults.
ResolvedQuery resolve_query(const PolicyModel& model, const QuerySpec& query);

}  // namespace polnarr
