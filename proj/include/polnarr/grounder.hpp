#pragma once

// Instantiation of action schemas over a finite domain.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "polnarr/core_model.hpp"
#include "polnarr/eval.hpp"
#include "polnarr/query.hpp"

namespace polnarr {

inline constexpr std::size_t kDefaultGroundingCap = 1'000'000;

/// Declared schemas plus the role-assumption schemas `assume_<role>`
/// generated for every assumable role.
class ActionCatalog {
 public:
  explicit ActionCatalog(const PolicyModel& model);

  const std::vector<ActionSchema>& schemas() const { return schemas_; }
  const ActionSchema* find(std::string_view name) const;

 private:
  std::vector<ActionSchema> schemas_;
};

struct GroundTransmission {
  Symbol sender, receiver, subject, info, purpose;
  bool operator==(const GroundTransmission&) const = default;
};

struct GroundAction {
  Symbol action;
  std::vector<Symbol> args;
  Bindings bindings;        // param var -> value
  Condition precondition;   // role constraints included, statically simplified
  std::vector<Atom> initiates;
  std::vector<Atom> terminates;
  std::vector<Symbol> participants;
  std::optional<GroundTransmission> transmission;
  bool synthesized = false;

  EventInstance at(int time) const { return EventInstance{time, action, args}; }
  /// `action(a,b,...)`
  std::string key() const { return at(0).str(); }
};

/// Ground actions sorted by schema name, then bound arguments.
struct Grounding {
  std::vector<GroundAction> actions;
  std::map<Symbol, std::set<RoleRef>> possible_roles;

  const GroundAction* find(const Symbol& action, const std::vector<Symbol>& args) const;
};

/// Names of every entity in the domain, in declaration order.
std::vector<Symbol> entity_names(const Domain& domain);

/// Initial state: asserted roles and facts, all with origin 0.
State initial_state(const Domain& domain);

/// Sound over-approximation of the roles each entity can hold at any
/// reachable state (closed under parents).
std::map<Symbol, std::set<RoleRef>> possible_roles(const PolicyModel& model,
                                                   const ActionCatalog& catalog,
                                                   const Domain& domain);

/// Throws ModelError("DomainTooLarge") when more than `cap` bindings would
/// be examined.
Grounding ground(const PolicyModel& model, const Domain& domain,
                 std::size_t cap = kDefaultGroundingCap);

/// Instantiate one schema with explicit arguments, without pruning. Throws
/// ModelError (UnknownAction, ArityMismatch).
GroundAction instantiate(const ActionSchema& schema, const std::vector<Symbol>& args);

/// state' = (state - terminates) + initiates; initiated fluents take origin
/// `time`. No precondition check.
State apply_effects(const State& state, const GroundAction& action, int time);

}  // namespace polnarr
