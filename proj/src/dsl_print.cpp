#include <sstream>

#include "polnarr/dsl.hpp"

namespace polnarr {

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\')
      out += '\\', out += c;
    else if (c == '\n')
      out += "\\n";
    else
      out += c;
  }
  return out + '"';
}

std::string term(const Term& t) { return t.is_wildcard() ? "_" : t.text; }

std::string pattern(const Pattern& p) {
  if (p.args.empty()) return p.name;
  std::string out = p.name + "(";
  for (std::size_t i = 0; i < p.args.size(); ++i) {
    if (i) out += ", ";
    out += term(p.args[i]);
  }
  return out + ")";
}

/// Flattened role fluents print in their nested surface form.
std::string effect(const Pattern& p) {
  if (p.name != kRolePredicate || p.args.size() < 2) return pattern(p);
  Pattern role{p.args[1].text, {p.args.begin() + 2, p.args.end()}, {}};
  return "role(" + term(p.args[0]) + ", " + pattern(role) + ")";
}

std::string sort(const ParamSort& s) {
  switch (s.kind) {
    case ParamSort::Kind::Info: return "info";
    case ParamSort::Kind::Purpose: return "purpose";
    default: return pattern(s.role);
  }
}

std::string params(const std::vector<Param>& ps) {
  std::string out = "(";
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (i) out += ", ";
    out += ps[i].var + ": " + sort(ps[i].sort);
  }
  return out + ")";
}

std::string condition(const Condition& c);

std::string operand(const Condition& c) {
  bool compound = c.kind == Condition::Kind::And || c.kind == Condition::Kind::Or;
  return compound ? "(" + condition(c) + ")" : condition(c);
}

std::string condition(const Condition& c) {
  using K = Condition::Kind;
  switch (c.kind) {
    case K::True: return "true";
    case K::False: return "false";
    case K::And:
    case K::Or: {
      std::string out;
      for (std::size_t i = 0; i < c.children.size(); ++i) {
        if (i) out += c.kind == K::And ? " and " : " or ";
        out += operand(c.children[i]);
      }
      return out;
    }
    case K::Not: return "not " + operand(c.children[0]);
    case K::Holds: return pattern(c.atoms[0]);
    case K::RoleHolds: return "role(" + term(c.terms[0]) + ", " + pattern(c.atoms[0]) + ")";
    case K::Compatible:
      return "compatible(" + term(c.terms[0]) + ", " + pattern(c.atoms[0]) + ")";
    case K::Subsumes: return "subsumes(" + term(c.terms[0]) + ", " + term(c.terms[1]) + ")";
    case K::Occurred: return "occurred(" + pattern(c.atoms[0]) + ")";
    case K::OccurredBefore:
      return "occurred_before(" + pattern(c.atoms[0]) + ", " + pattern(c.atoms[1]) + ")";
    case K::Earlier: return "earlier(" + pattern(c.atoms[0]) + ", " + pattern(c.atoms[1]) + ")";
    case K::Equal: return term(c.terms[0]) + " = " + term(c.terms[1]);
    case K::NotEqual: return term(c.terms[0]) + " != " + term(c.terms[1]);
    case K::Exists:
      return "exists " + c.var + ": " + sort(c.sort) + " {" + condition(c.children[0]) + "}";
  }
  return "true";
}

std::string list(const std::vector<Pattern>& ps) {
  std::string out;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (i) out += ", ";
    out += effect(ps[i]);
  }
  return out;
}

}  // namespace

std::string print_condition(const Condition& c) { return condition(c); }
std::string print_pattern(const Pattern& p) { return effect(p); }

std::string print_policy(const PolicyModel& m) {
  std::ostringstream os;
  for (const auto& r : m.roles) {
    os << "role " << r.name;
    if (!r.params.empty()) os << params(r.params);
    if (!r.parents.empty()) {
      os << " < ";
      for (std::size_t i = 0; i < r.parents.size(); ++i)
        os << (i ? ", " : "") << pattern(r.parents[i]);
    }
    std::vector<std::string> tags;
    if (r.person_like) tags.push_back("person_like");
    if (r.organization_like) tags.push_back("organization_like");
    if (r.assumable) tags.push_back("assumable");
    if (!tags.empty()) {
      os << " [";
      for (std::size_t i = 0; i < tags.size(); ++i) os << (i ? ", " : "") << tags[i];
      os << "]";
    }
    os << ".\n";
  }
  for (const auto& i : m.infos) {
    os << "info " << i.name;
    if (i.parent) os << " < " << *i.parent;
    if (!i.label.empty()) os << ' ' << quote(i.label);
    os << ".\n";
  }
  for (const auto& p : m.purposes) {
    os << "purpose " << p.name;
    if (!p.label.empty()) os << ' ' << quote(p.label);
    os << ".\n";
  }
  for (const auto& p : m.predicates) {
    static const char* names[] = {"entity", "info", "purpose"};
    os << "pred " << p.name;
    if (!p.args.empty()) {
      os << '(';
      for (std::size_t i = 0; i < p.args.size(); ++i)
        os << (i ? ", " : "") << names[static_cast<int>(p.args[i])];
      os << ')';
    }
    if (p.timed) os << " @time";
    os << ".\n";
  }
  for (const auto& e : m.entities) {
    os << "entity " << e.name;
    for (std::size_t i = 0; i < e.roles.size(); ++i) {
      os << (i ? ", " : ": ") << e.roles[i].name;
      if (!e.roles[i].args.empty()) {
        os << '(';
        for (std::size_t j = 0; j < e.roles[i].args.size(); ++j)
          os << (j ? ", " : "") << e.roles[i].args[j];
        os << ')';
      }
    }
    if (!e.label.empty()) os << ' ' << quote(e.label);
    os << ".\n";
  }
  for (const auto& f : m.facts) {
    Pattern p{f.pred, {}, {}};
    for (const auto& a : f.args) p.args.push_back(Term::constant(a));
    os << "fact " << effect(p) << ".\n";
  }
  for (const auto& a : m.actions) {
    if (a.synthesized) continue;
    os << "action " << a.name << params(a.params);
    if (!a.participants.empty()) {
      os << "\n  agents ";
      for (std::size_t i = 0; i < a.participants.size(); ++i)
        os << (i ? ", " : "") << a.participants[i];
    }
    if (a.precondition.kind != Condition::Kind::True)
      os << "\n  pre " << condition(a.precondition);
    if (!a.initiates.empty()) os << "\n  initiates " << list(a.initiates);
    if (!a.terminates.empty()) os << "\n  terminates " << list(a.terminates);
    if (a.transmission) {
      const auto& t = *a.transmission;
      os << "\n  transmits from " << t.sender << " to " << t.receiver << " about " << t.subject
         << " info " << t.info << " for " << term(t.purpose);
    }
    os << ".\n";
  }
  for (const auto& c : m.clauses) {
    const auto& k = c.category;
    os << "clause " << quote(c.id);
    if (!c.excerpt.empty()) os << ' ' << quote(c.excerpt);
    os << "\n  category: sender " << k.sender_var << ": " << pattern(k.sender_role)
       << ", receiver " << k.receiver_var << ": " << pattern(k.receiver_role) << ", subject "
       << k.subject_var << ": " << pattern(k.subject_role) << ", info " << k.info_var
       << " <= " << k.info_bound << ", purpose " << term(k.purpose);
    if (c.exception.kind != Condition::Kind::False)
      os << "\n  exception: " << condition(c.exception);
    if (c.requirement.kind != Condition::Kind::True)
      os << "\n  requirement: " << condition(c.requirement);
    if (!c.obligations.empty()) {
      os << "\n  obligation: ";
      for (std::size_t i = 0; i < c.obligations.size(); ++i) {
        const auto& o = c.obligations[i];
        os << (i ? ", " : "") << pattern(o.required);
        if (o.within) os << " within " << *o.within;
      }
    }
    os << ".\n";
  }
  for (const auto& t : m.templates) os << "template " << t.action << ' ' << quote(t.text) << ".\n";
  return os.str();
}

const EntityDecl* Domain::find_entity(std::string_view name) const {
  for (const auto& e : entities)
    if (e.name == name) return &e;
  return nullptr;
}

ResolvedQuery resolve_query(const PolicyModel& model, const QuerySpec& q) {
  ResolvedQuery r;
  r.domain.entities = model.entities;
  r.domain.entities.insert(r.domain.entities.end(), q.entities.begin(), q.entities.end());
  r.domain.facts = model.facts;
  r.domain.facts.insert(r.domain.facts.end(), q.facts.begin(), q.facts.end());
  if (q.infos) {
    r.domain.infos = *q.infos;
  } else {
    for (const auto& i : model.infos) r.domain.infos.push_back(i.name);
  }
  if (q.purposes) {
    r.domain.purposes = *q.purposes;
  } else {
    for (const auto& p : model.purposes) r.domain.purposes.push_back(p.name);
  }
  r.domain.horizon = q.horizon.value_or(kDefaultHorizon);
  r.must = q.must;
  r.never = q.never;
  r.goals = q.goals;
  r.targets = q.targets;
  if (q.max_narratives) r.max_narratives = *q.max_narratives;
  if (q.max_blocks) r.max_blocks = *q.max_blocks;
  if (q.timeout_ms) r.timeout_ms = *q.timeout_ms;
  if (q.require_compliant) r.require_compliant = *q.require_compliant;
  if (q.report_blocked) r.report_blocked = *q.report_blocked;
  if (q.intentionality) r.intentionality = *q.intentionality;
  else r.intentionality = !q.goals.empty();
  if (q.combination) r.combination = *q.combination;
  return r;
}

}  // namespace polnarr
