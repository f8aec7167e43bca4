#include "polnarr/core_model.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <tuple>

namespace polnarr {

namespace {

std::string join_args(const std::vector<std::string>& args) {
  std::string out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ',';
    out += args[i];
  }
  return out;
}

template <typename Index, typename Vec>
auto* lookup(const Index& index, const Vec& vec, std::string_view key) {
  auto it = index.find(key);
  return it == index.end() ? nullptr : &vec[it->second];
}

}  // namespace

bool Pattern::ground() const {
  return std::all_of(args.begin(), args.end(), [](const Term& t) { return t.is_const(); });
}

std::string Pattern::str() const {
  if (args.empty()) return name;
  std::vector<std::string> parts;
  for (const auto& t : args) parts.push_back(t.text);
  return name + "(" + join_args(parts) + ")";
}

std::string RoleRef::str() const {
  return args.empty() ? name : name + "(" + join_args(args) + ")";
}

std::string Atom::str() const {
  if (auto r = as_role(*this)) return "role(" + r->first + "," + r->second.str() + ")";
  return args.empty() ? pred : pred + "(" + join_args(args) + ")";
}

std::string EventInstance::str() const {
  return args.empty() ? action : action + "(" + join_args(args) + ")";
}

Atom role_atom(const Symbol& holder, const RoleRef& role) {
  Atom a{Symbol(kRolePredicate), {holder, role.name}};
  a.args.insert(a.args.end(), role.args.begin(), role.args.end());
  return a;
}

std::optional<std::pair<Symbol, RoleRef>> as_role(const Atom& atom) {
  if (atom.pred != kRolePredicate || atom.args.size() < 2) return std::nullopt;
  RoleRef ref{atom.args[1], {atom.args.begin() + 2, atom.args.end()}};
  return std::make_pair(atom.args[0], std::move(ref));
}

std::optional<int> State::origin(const Atom& atom) const {
  auto it = fluents_.find(atom);
  if (it == fluents_.end()) return std::nullopt;
  return it->second;
}

std::set<RoleRef> State::roles_of(const Symbol& entity) const {
  std::set<RoleRef> out;
  Atom lo{Symbol(kRolePredicate), {entity}};
  for (auto it = fluents_.lower_bound(lo); it != fluents_.end(); ++it) {
    const Atom& a = it->first;
    if (a.pred != kRolePredicate || a.args.empty() || a.args[0] != entity) break;
    if (auto r = as_role(a)) out.insert(r->second);
  }
  return out;
}

bool State::same_atoms(const State& other) const {
  if (fluents_.size() != other.fluents_.size()) return false;
  return std::equal(fluents_.begin(), fluents_.end(), other.fluents_.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; });
}

std::string State::key() const {
  std::string out;
  for (const auto& [atom, t] : fluents_) {
    out += atom.str();
    out += ';';
  }
  return out;
}

std::optional<std::size_t> ActionSchema::param_index(const Symbol& var) const {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].var == var) return i;
  return std::nullopt;
}

Condition Condition::conj(std::vector<Condition> parts) {
  if (parts.empty()) return always();
  if (parts.size() == 1) return std::move(parts.front());
  Condition c;
  c.kind = Kind::And;
  c.children = std::move(parts);
  return c;
}

Condition Condition::disj(std::vector<Condition> parts) {
  if (parts.empty()) return never_();
  if (parts.size() == 1) return std::move(parts.front());
  Condition c;
  c.kind = Kind::Or;
  c.children = std::move(parts);
  return c;
}

Condition Condition::negate(Condition inner) {
  Condition c;
  c.kind = Kind::Not;
  c.children.push_back(std::move(inner));
  return c;
}

Condition Condition::holds(Pattern p) {
  Condition c;
  c.kind = Kind::Holds;
  c.atoms.push_back(std::move(p));
  return c;
}

Condition Condition::role_holds(Term holder, Pattern role) {
  Condition c;
  c.kind = Kind::RoleHolds;
  c.terms.push_back(std::move(holder));
  c.atoms.push_back(std::move(role));
  return c;
}

void PolicyModel::reindex() {
  auto build = [](auto& index, const auto& vec, auto key) {
    index.clear();
    for (std::size_t i = 0; i < vec.size(); ++i) index.emplace(key(vec[i]), i);
  };
  build(role_index_, roles, [](const RoleDecl& d) { return d.name; });
  build(info_index_, infos, [](const InfoDecl& d) { return d.name; });
  build(purpose_index_, purposes, [](const PurposeDecl& d) { return d.name; });
  build(predicate_index_, predicates, [](const PredicateDecl& d) { return d.name; });
  build(entity_index_, entities, [](const EntityDecl& d) { return d.name; });
  build(action_index_, actions, [](const ActionSchema& d) { return d.name; });
  build(clause_index_, clauses, [](const Clause& d) { return d.id; });
  build(template_index_, templates, [](const Template& d) { return d.action; });
}

const RoleDecl* PolicyModel::find_role(std::string_view n) const {
  return lookup(role_index_, roles, n);
}
const InfoDecl* PolicyModel::find_info(std::string_view n) const {
  return lookup(info_index_, infos, n);
}
const PurposeDecl* PolicyModel::find_purpose(std::string_view n) const {
  return lookup(purpose_index_, purposes, n);
}
const PredicateDecl* PolicyModel::find_predicate(std::string_view n) const {
  return lookup(predicate_index_, predicates, n);
}
const EntityDecl* PolicyModel::find_entity(std::string_view n) const {
  return lookup(entity_index_, entities, n);
}
const ActionSchema* PolicyModel::find_action(std::string_view n) const {
  return lookup(action_index_, actions, n);
}
const Clause* PolicyModel::find_clause(std::string_view n) const {
  return lookup(clause_index_, clauses, n);
}
const Template* PolicyModel::find_template(std::string_view n) const {
  return lookup(template_index_, templates, n);
}

bool PolicyModel::operator==(const PolicyModel& o) const {
  return roles == o.roles && infos == o.infos && purposes == o.purposes &&
         predicates == o.predicates && entities == o.entities && facts == o.facts &&
         actions == o.actions && clauses == o.clauses && templates == o.templates;
}

std::set<RoleRef> role_closure(const Symbol& entity, const std::set<RoleRef>& asserted,
                               const PolicyModel& model) {
  std::set<RoleRef> out;
  std::deque<RoleRef> work(asserted.begin(), asserted.end());
  while (!work.empty()) {
    RoleRef ref = std::move(work.front());
    work.pop_front();
    if (out.count(ref)) continue;
    const RoleDecl* decl = model.find_role(ref.name);
    if (!decl) {
      if (ref.name == kRootRole && ref.args.empty()) {
        out.insert(ref);
        continue;
      }
      throw ModelError("UnknownRole", "entity '" + entity + "': unknown role '" + ref.name + "'");
    }
    if (decl->params.size() != ref.args.size())
      throw ModelError("ArityMismatch", "role '" + ref.name + "' expects " +
                                            std::to_string(decl->params.size()) +
                                            " argument(s), got " + std::to_string(ref.args.size()));
    for (const Pattern& parent : decl->parents) {
      RoleRef p{parent.name, {}};
      for (const Term& t : parent.args) {
        if (t.is_var()) {
          auto idx = std::find_if(decl->params.begin(), decl->params.end(),
                                  [&](const Param& prm) { return prm.var == t.text; });
          p.args.push_back(idx == decl->params.end()
                               ? t.text
                               : ref.args[static_cast<std::size_t>(idx - decl->params.begin())]);
        } else {
          p.args.push_back(t.text);
        }
      }
      work.push_back(std::move(p));
    }
    out.insert(std::move(ref));
  }
  out.insert(RoleRef{Symbol(kRootRole), {}});
  return out;
}

bool kind_consistent(const Symbol&, const std::set<RoleRef>& roles, const PolicyModel& model) {
  bool person = false;
  bool organization = false;
  for (const RoleRef& r : roles) {
    if (const RoleDecl* d = model.find_role(r.name)) {
      person = person || d->person_like;
      organization = organization || d->organization_like;
    }
  }
  return !(person && organization);
}

bool info_subsumes(const Symbol& general, const Symbol& specific, const PolicyModel& model) {
  if (!model.find_info(general))
    throw ModelError("UnknownInfoType", "unknown information type '" + general + "'");
  const InfoDecl* cur = model.find_info(specific);
  if (!cur) throw ModelError("UnknownInfoType", "unknown information type '" + specific + "'");
  // Validation guarantees a forest; the bound guards against unvalidated input.
  for (std::size_t steps = 0; cur && steps <= model.infos.size(); ++steps) {
    if (cur->name == general) return true;
    cur = cur->parent ? model.find_info(*cur->parent) : nullptr;
  }
  return false;
}

bool role_matches(const Pattern& role, const RoleRef& ref) {
  if (role.name != ref.name || role.args.size() != ref.args.size()) return false;
  for (std::size_t i = 0; i < ref.args.size(); ++i) {
    const Term& t = role.args[i];
    if (t.is_const() && t.text != ref.args[i]) return false;
  }
  return true;
}

std::string label_of(const PolicyModel& model, const Symbol& constant) {
  if (const auto* e = model.find_entity(constant); e && !e->label.empty()) return e->label;
  if (const auto* i = model.find_info(constant); i && !i->label.empty()) return i->label;
  if (const auto* p = model.find_purpose(constant); p && !p->label.empty()) return p->label;
  return constant;
}

}  // namespace polnarr
