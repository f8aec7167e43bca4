#pragma once

// Condition evaluation over a state and event history, with an optional log
// of everything the evaluation looked at.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polnarr/core_model.hpp"

namespace polnarr {

using Bindings = std::map<Symbol, Symbol>;

/// One observation made while evaluating a condition.
struct Read {
  enum class Kind {
    Fluent,   // fluent pattern (ground apart from wildcards)
    Role,     // role closure of `holder`, tested against `pattern` (empty name: all roles)
    History,  // events matching `patterns` in the history
    Order,    // relative origin times of fluents matching `patterns`
  };
  Kind kind = Kind::Fluent;
  Pattern pattern;
  std::vector<Pattern> patterns;  // History: one or two event patterns
  Symbol holder;
  bool positive = false;  // Fluent: some atom matched; History: condition held

  bool operator==(const Read& o) const {
    return kind == o.kind && pattern == o.pattern && patterns == o.patterns &&
           holder == o.holder && positive == o.positive;
  }
};

using ReadLog = std::vector<Read>;

struct EvalEnv {
  const PolicyModel& model;
  const State& state;
  const std::vector<EventInstance>& history;  // events strictly before now
  const std::vector<Symbol>& entities;         // range of entity quantifiers
  ReadLog* log = nullptr;
};

/// Replace bound variables by constants. Variables bound by an inner
/// `exists` are left alone.
Pattern substitute(const Pattern& p, const Bindings& b);
Term substitute(const Term& t, const Bindings& b);
Condition substitute(const Condition& c, const Bindings& b);

/// Whether ground arguments (plus the fluent's origin time, for timed
/// patterns that carry one extra argument) match a pattern.
bool matches(const Pattern& p, const std::vector<Symbol>& args, std::optional<int> origin = {});
bool matches(const Pattern& p, const Atom& a, std::optional<int> origin = {});
bool matches(const Pattern& p, const EventInstance& e);

/// Evaluate `c` under `b`. Unbound variables behave as wildcards.
bool evaluate(const Condition& c, const Bindings& b, const EvalEnv& env);

/// The smallest failing sub-condition (walking into conjunctions), printed
/// with bindings applied; nullopt when `c` holds.
std::optional<std::string> explain_failure(const Condition& c, const Bindings& b,
                                           const EvalEnv& env);

/// Whether a Role read's outcome can depend on `holder` holding `role`.
bool role_read_depends_on(const Read& r, const RoleRef& role, const PolicyModel& model);

/// Closed roles of `entity` in a state.
std::set<RoleRef> closed_roles(const Symbol& entity, const State& state, const PolicyModel& model);

}  // namespace polnarr
