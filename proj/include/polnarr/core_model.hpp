#pragma once

// Domain ontology shared by every stage: roles, information types, fluents,
// action schemas, clauses and the ground values the search works with.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace polnarr {

using Symbol = std::string;

struct SourceSpan {
  std::string file;
  int line_start = 1;
  int col_start = 1;
  int line_end = 1;
  int col_end = 1;

  bool operator==(const SourceSpan&) const = default;
};

/// Raised by model queries given references that do not resolve.
class ModelError : public std::runtime_error {
 public:
  ModelError(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// ---------------------------------------------------------------------------
// Patterns
// ---------------------------------------------------------------------------

struct Term {
  enum class Kind { Var, Const, Wildcard };
  Kind kind = Kind::Const;
  std::string text;

  static Term var(std::string name) { return {Kind::Var, std::move(name)}; }
  static Term constant(std::string name) { return {Kind::Const, std::move(name)}; }
  static Term wildcard() { return {Kind::Wildcard, "_"}; }

  bool is_var() const { return kind == Kind::Var; }
  bool is_const() const { return kind == Kind::Const; }
  bool is_wildcard() const { return kind == Kind::Wildcard; }

  bool operator==(const Term&) const = default;
  auto operator<=>(const Term&) const = default;
};

/// A name applied to terms: fluent, event or role pattern. The span is
/// informational and ignored by comparisons.
struct Pattern {
  Symbol name;
  std::vector<Term> args;
  SourceSpan span;

  bool operator==(const Pattern& o) const { return name == o.name && args == o.args; }
  bool operator<(const Pattern& o) const {
    return std::tie(name, args) < std::tie(o.name, o.args);
  }
  bool ground() const;
  std::string str() const;
};

// ---------------------------------------------------------------------------
// Ground values
// ---------------------------------------------------------------------------

/// A parameterized role as held by an entity: `workforce_member(sgh)`.
struct RoleRef {
  Symbol name;
  std::vector<Symbol> args;

  auto operator<=>(const RoleRef&) const = default;
  bool operator==(const RoleRef&) const = default;
  std::string str() const;
};

/// Ground fluent. Role assertions are fluents with predicate `role` and
/// arguments (holder, role name, role args...).
struct Atom {
  Symbol pred;
  std::vector<Symbol> args;

  auto operator<=>(const Atom&) const = default;
  bool operator==(const Atom&) const = default;
  std::string str() const;
};

inline constexpr std::string_view kRolePredicate = "role";
inline constexpr std::string_view kRootRole = "entity";

Atom role_atom(const Symbol& holder, const RoleRef& role);
/// (holder, role) when the atom is a role assertion.
std::optional<std::pair<Symbol, RoleRef>> as_role(const Atom& atom);

/// Closed-world set of ground fluents, each tagged with the step that
/// initiated it (0 for initial conditions).
class State {
 public:
  bool holds(const Atom& atom) const { return fluents_.count(atom) != 0; }
  std::optional<int> origin(const Atom& atom) const;
  void initiate(const Atom& atom, int time) { fluents_[atom] = time; }
  void terminate(const Atom& atom) { fluents_.erase(atom); }

  /// Asserted (not closed) roles of an entity.
  std::set<RoleRef> roles_of(const Symbol& entity) const;

  const std::map<Atom, int>& fluents() const { return fluents_; }
  std::size_t size() const { return fluents_.size(); }
  /// Set equality, ignoring origin times.
  bool same_atoms(const State& other) const;
  std::string key() const;

  bool operator==(const State&) const = default;

 private:
  std::map<Atom, int> fluents_;
};

struct EventInstance {
  int time = 0;
  Symbol action;
  std::vector<Symbol> args;

  auto operator<=>(const EventInstance&) const = default;
  bool operator==(const EventInstance&) const = default;
  /// `action(a,b,...)` without the time.
  std::string str() const;
};

// ---------------------------------------------------------------------------
// Declarations
// ---------------------------------------------------------------------------

/// Sort of an action parameter or quantified variable.
struct ParamSort {
  enum class Kind { Role, Info, Purpose };
  Kind kind = Kind::Role;
  Pattern role;  // constraint role when kind == Role; may mention earlier params

  bool operator==(const ParamSort&) const = default;
};

struct Param {
  Symbol var;
  ParamSort sort;
  bool operator==(const Param&) const = default;
};

struct Condition {
  enum class Kind {
    True,
    False,
    And,
    Or,
    Not,
    Holds,           // atoms[0] fluent pattern holds in the current state
    RoleHolds,       // terms[0] holds role atoms[0] (closure)
    Compatible,      // terms[0] may take role atoms[0] without a kind conflict
    Subsumes,        // info terms[0] subsumes info terms[1]
    Occurred,        // an event matching atoms[0] is in the history
    OccurredBefore,  // events matching atoms[0] then atoms[1], in that order
    Earlier,         // fluents atoms[0], atoms[1] hold; first initiated earlier
    Equal,
    NotEqual,
    Exists,  // var ranging over sort: children[0]
  };

  Kind kind = Kind::True;
  std::vector<Condition> children;
  std::vector<Pattern> atoms;
  std::vector<Term> terms;
  Symbol var;
  ParamSort sort;

  static Condition always() { return {}; }
  static Condition never_() {
    Condition c;
    c.kind = Kind::False;
    return c;
  }
  static Condition conj(std::vector<Condition> parts);
  static Condition disj(std::vector<Condition> parts);
  static Condition negate(Condition inner);
  static Condition holds(Pattern p);
  static Condition role_holds(Term holder, Pattern role);

  bool operator==(const Condition&) const = default;
};

struct RoleDecl {
  Symbol name;
  std::vector<Param> params;  // each constrained by a role pattern
  std::vector<Pattern> parents;
  bool person_like = false;
  bool organization_like = false;
  bool assumable = false;

  bool operator==(const RoleDecl&) const = default;
};

struct InfoDecl {
  Symbol name;
  std::optional<Symbol> parent;
  std::string label;
  bool operator==(const InfoDecl&) const = default;
};

struct PurposeDecl {
  Symbol name;
  std::string label;
  bool operator==(const PurposeDecl&) const = default;
};

enum class ValueSort { Entity, Info, Purpose };

struct PredicateDecl {
  Symbol name;
  std::vector<ValueSort> args;
  bool timed = false;  // origin time may be matched as an extra last argument
  bool operator==(const PredicateDecl&) const = default;
};

struct EntityDecl {
  Symbol name;
  std::vector<RoleRef> roles;
  std::string label;
  bool operator==(const EntityDecl&) const = default;
};

struct TransmissionProfile {
  Symbol sender;
  Symbol receiver;
  Symbol subject;
  Symbol info;
  Term purpose;
  bool operator==(const TransmissionProfile&) const = default;
};

struct ActionSchema {
  Symbol name;
  std::vector<Param> params;
  std::vector<Symbol> participants;
  Condition precondition;
  std::vector<Pattern> initiates;  // role effects use the flattened `role` form
  std::vector<Pattern> terminates;
  std::optional<TransmissionProfile> transmission;
  bool synthesized = false;  // role-assumption action generated by the grounder

  bool operator==(const ActionSchema&) const = default;
  std::optional<std::size_t> param_index(const Symbol& var) const;
};

/// Clause category: roles of the three parties, an info bound matched
/// through subsumption, and a purpose.
struct CategoryPattern {
  Symbol sender_var;
  Pattern sender_role;
  Symbol receiver_var;
  Pattern receiver_role;
  Symbol subject_var;
  Pattern subject_role;
  Symbol info_var;
  Symbol info_bound;
  Term purpose;
  bool operator==(const CategoryPattern&) const = default;
};

struct ObligationSpec {
  Pattern required;         // event or fluent pattern over category vars
  std::optional<int> within;  // relative deadline; nullopt = horizon
  bool operator==(const ObligationSpec&) const = default;
};

struct Clause {
  std::string id;
  CategoryPattern category;
  Condition exception = Condition::never_();
  Condition requirement = Condition::always();
  std::vector<ObligationSpec> obligations;
  std::string excerpt;  // statute text shown alongside citations

  bool operator==(const Clause&) const = default;
};

struct Template {
  Symbol action;
  std::string text;
  bool operator==(const Template&) const = default;
};

/// Validated policy. Built by the DSL front end; immutable afterwards.
class PolicyModel {
 public:
  std::vector<RoleDecl> roles;
  std::vector<InfoDecl> infos;
  std::vector<PurposeDecl> purposes;
  std::vector<PredicateDecl> predicates;
  std::vector<EntityDecl> entities;
  std::vector<Atom> facts;
  std::vector<ActionSchema> actions;
  std::vector<Clause> clauses;
  std::vector<Template> templates;

  /// Declaration spans by "kind:name", for diagnostics only.
  std::map<std::string, SourceSpan> spans;

  /// Rebuild lookup indexes after the vectors change.
  void reindex();

  const RoleDecl* find_role(std::string_view name) const;
  const InfoDecl* find_info(std::string_view name) const;
  const PurposeDecl* find_purpose(std::string_view name) const;
  const PredicateDecl* find_predicate(std::string_view name) const;
  const EntityDecl* find_entity(std::string_view name) const;
  const ActionSchema* find_action(std::string_view name) const;
  const Clause* find_clause(std::string_view id) const;
  const Template* find_template(std::string_view action) const;

  bool operator==(const PolicyModel& o) const;

 private:
  std::map<std::string, std::size_t, std::less<>> role_index_, info_index_, purpose_index_,
      predicate_index_, entity_index_, action_index_, clause_index_, template_index_;
};

// ---------------------------------------------------------------------------
// Ontology operations
// ---------------------------------------------------------------------------

/// Least superset of `asserted` closed under parent edges, plus the root
/// role. Throws ModelError (UnknownRole, ArityMismatch).
std::set<RoleRef> role_closure(const Symbol& entity, const std::set<RoleRef>& asserted,
                               const PolicyModel& model);

/// False when the closed role set mixes person-like and organization-like roles.
bool kind_consistent(const Symbol& entity, const std::set<RoleRef>& roles,
                     const PolicyModel& model);

/// True iff `specific` reaches `general` through zero or more parent edges.
/// Throws ModelError (UnknownInfoType).
bool info_subsumes(const Symbol& general, const Symbol& specific, const PolicyModel& model);

/// Whether `role` (possibly containing wildcards) matches a ground RoleRef.
bool role_matches(const Pattern& role, const RoleRef& ref);

/// Display label for an entity/info/purpose constant, falling back to the name.
std::string label_of(const PolicyModel& model, const Symbol& constant);

}  // namespace polnarr
