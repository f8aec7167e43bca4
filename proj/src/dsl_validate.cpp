#include <algorithm>
#include <functional>
#include <map>
#include <regex>
#include <set>

#include "polnarr/dsl.hpp"

namespace polnarr {

namespace {

using Sorts = std::map<Symbol, ValueSort>;

const char* sort_name(ValueSort s) {
  switch (s) {
    case ValueSort::Entity: return "entity";
    case ValueSort::Info: return "info";
    case ValueSort::Purpose: return "purpose";
  }
  return "?";
}

ValueSort value_sort_of(const ParamSort& s) {
  switch (s.kind) {
    case ParamSort::Kind::Info: return ValueSort::Info;
    case ParamSort::Kind::Purpose: return ValueSort::Purpose;
    default: return ValueSort::Entity;
  }
}

class Validator {
 public:
  Validator(const PolicyModel& model, std::vector<Diagnostic>& out,
            const std::vector<EntityDecl>* extra_entities = nullptr)
      : m_(model), out_(out) {
    for (const auto& e : model.entities) entity_names_.insert(e.name);
    if (extra_entities)
      for (const auto& e : *extra_entities) entity_names_.insert(e.name);
  }

  void error(const std::string& code, const std::string& msg, const SourceSpan& span) {
    out_.push_back({Severity::Error, code, msg, span});
  }

  SourceSpan span(const std::string& key) const {
    auto it = m_.spans.find(key);
    return it == m_.spans.end() ? SourceSpan{} : it->second;
  }

  static SourceSpan pick(const SourceSpan& specific, const SourceSpan& fallback) {
    return specific.file.empty() ? fallback : specific;
  }

  // --- terms ---------------------------------------------------------------

  /// Checks a term expected to carry `expected`; `where` locates errors.
  void check_term(const Term& t, ValueSort expected, const Sorts& vars, bool allow_wildcard,
                  const SourceSpan& where) {
    if (t.is_wildcard()) {
      if (!allow_wildcard) error("UnboundVariable", "wildcard not allowed here", where);
      return;
    }
    if (t.is_var()) {
      auto it = vars.find(t.text);
      if (it == vars.end()) {
        error("UnboundVariable", "variable '" + t.text + "' is not bound", where);
      } else if (it->second != expected) {
        error("SortMismatch",
              "variable '" + t.text + "' is " + sort_name(it->second) + ", used as " +
                  sort_name(expected),
              where);
      }
      return;
    }
    switch (expected) {
      case ValueSort::Info:
        if (!m_.find_info(t.text))
          error("UnknownInfoType", "unknown information type '" + t.text + "'", where);
        break;
      case ValueSort::Purpose:
        if (!m_.find_purpose(t.text))
          error("UnknownPurpose", "unknown purpose '" + t.text + "'", where);
        break;
      case ValueSort::Entity:
        if (check_entity_constants_ && !entity_names_.count(t.text))
          error("UnknownEntity", "unknown entity '" + t.text + "'", where);
        break;
    }
  }

  // --- role patterns -------------------------------------------------------

  void check_role_pattern(const Pattern& role, const Sorts& vars, bool allow_wildcard,
                          const SourceSpan& where) {
    const SourceSpan sp = pick(role.span, where);
    const RoleDecl* d = m_.find_role(role.name);
    if (!d) {
      if (role.name == kRootRole && role.args.empty()) return;
      error("UnresolvedRole", "unknown role '" + role.name + "'", sp);
      return;
    }
    if (d->params.size() != role.args.size()) {
      error("ArityMismatch",
            "role '" + role.name + "' expects " + std::to_string(d->params.size()) +
                " argument(s), got " + std::to_string(role.args.size()),
            sp);
      return;
    }
    for (std::size_t i = 0; i < role.args.size(); ++i)
      check_term(role.args[i], value_sort_of(d->params[i].sort), vars, allow_wildcard, sp);
  }

  void check_sort(const ParamSort& s, const Sorts& vars, const SourceSpan& where) {
    if (s.kind == ParamSort::Kind::Role) check_role_pattern(s.role, vars, false, where);
  }

  // --- fluent / event patterns ---------------------------------------------

  /// Flattened role fluent: role(H, name, args...).
  void check_role_fluent(const Pattern& p, const Sorts& vars, bool allow_wildcard,
                         const SourceSpan& where) {
    if (p.args.size() < 2 || !p.args[1].is_const()) {
      error("ArityMismatch", "role fluent needs a holder and a role", where);
      return;
    }
    check_term(p.args[0], ValueSort::Entity, vars, allow_wildcard, where);
    Pattern role{p.args[1].text, {p.args.begin() + 2, p.args.end()}, p.span};
    check_role_pattern(role, vars, allow_wildcard, where);
  }

  void check_fluent(const Pattern& p, const Sorts& vars, bool allow_wildcard,
                    const SourceSpan& where) {
    const SourceSpan sp = pick(p.span, where);
    if (p.name == kRolePredicate) return check_role_fluent(p, vars, allow_wildcard, sp);
    const PredicateDecl* d = m_.find_predicate(p.name);
    if (!d) {
      error("UnknownPredicate", "unknown predicate '" + p.name + "'", sp);
      return;
    }
    used_preds_.insert(p.name);
    bool with_time = d->timed && p.args.size() == d->args.size() + 1;
    if (p.args.size() != d->args.size() && !with_time) {
      error("ArityMismatch",
            "predicate '" + p.name + "' expects " + std::to_string(d->args.size()) +
                " argument(s), got " + std::to_string(p.args.size()),
            sp);
      return;
    }
    for (std::size_t i = 0; i < d->args.size(); ++i)
      check_term(p.args[i], d->args[i], vars, allow_wildcard, sp);
    if (with_time) {
      const Term& t = p.args.back();
      if (t.is_const() && !std::all_of(t.text.begin(), t.text.end(), ::isdigit))
        error("SortMismatch", "time argument must be an integer", sp);
      if (t.is_var() && !vars.count(t.text))
        error("UnboundVariable", "variable '" + t.text + "' is not bound", sp);
    }
  }

  void check_event(const Pattern& p, const Sorts& vars, bool allow_wildcard,
                   const SourceSpan& where) {
    const SourceSpan sp = pick(p.span, where);
    const ActionSchema* a = m_.find_action(p.name);
    if (!a) {
      error("UnknownAction", "unknown action '" + p.name + "'", sp);
      return;
    }
    if (a->params.size() != p.args.size()) {
      error("ArityMismatch",
            "action '" + p.name + "' expects " + std::to_string(a->params.size()) +
                " argument(s), got " + std::to_string(p.args.size()),
            sp);
      return;
    }
    for (std::size_t i = 0; i < p.args.size(); ++i)
      check_term(p.args[i], value_sort_of(a->params[i].sort), vars, allow_wildcard, sp);
  }

  /// Either kind of pattern, as used by must/never and obligations.
  void check_fluent_or_event(const Pattern& p, const Sorts& vars, const SourceSpan& where) {
    if (m_.find_action(p.name))
      check_event(p, vars, true, where);
    else if (m_.find_predicate(p.name) || p.name == kRolePredicate)
      check_fluent(p, vars, true, where);
    else
      error("UnknownPredicate", "'" + p.name + "' is neither an action nor a predicate",
            pick(p.span, where));
  }

  // --- conditions ----------------------------------------------------------

  void check_condition(const Condition& c, const Sorts& vars, const SourceSpan& where) {
    using K = Condition::Kind;
    switch (c.kind) {
      case K::True:
      case K::False: return;
      case K::And:
      case K::Or:
      case K::Not:
        for (const auto& ch : c.children) check_condition(ch, vars, where);
        return;
      case K::Holds: check_fluent(c.atoms[0], vars, true, where); return;
      case K::RoleHolds:
      case K::Compatible:
        check_term(c.terms[0], ValueSort::Entity, vars, false, where);
        check_role_pattern(c.atoms[0], vars, true, where);
        return;
      case K::Subsumes:
        check_term(c.terms[0], ValueSort::Info, vars, false, where);
        check_term(c.terms[1], ValueSort::Info, vars, false, where);
        return;
      case K::Occurred:
      case K::OccurredBefore:
        for (const auto& a : c.atoms) check_event(a, vars, true, where);
        return;
      case K::Earlier:
        for (const auto& a : c.atoms) check_fluent(a, vars, true, where);
        return;
      case K::Equal:
      case K::NotEqual:
        for (const Term& t : c.terms) {
          if (t.is_var() && !vars.count(t.text))
            error("UnboundVariable", "variable '" + t.text + "' is not bound", where);
          if (t.is_wildcard()) error("UnboundVariable", "wildcard in comparison", where);
        }
        if (c.terms[0].is_var() && c.terms[1].is_var()) {
          auto a = vars.find(c.terms[0].text), b = vars.find(c.terms[1].text);
          if (a != vars.end() && b != vars.end() && a->second != b->second)
            error("SortMismatch",
                  "comparing " + std::string(sort_name(a->second)) + " '" + a->first + "' with " +
                      sort_name(b->second) + " '" + b->first + "'",
                  where);
        }
        for (int i = 0; i < 2; ++i) {
          const Term& v = c.terms[i];
          const Term& k = c.terms[1 - i];
          if (v.is_var() && k.is_const())
            if (auto it = vars.find(v.text); it != vars.end())
              check_term(k, it->second, vars, false, where);
        }
        return;
      case K::Exists: {
        if (vars.count(c.var))
          error("DuplicateDeclaration", "variable '" + c.var + "' shadows an outer binding",
                where);
        check_sort(c.sort, vars, where);
        Sorts inner = vars;
        inner[c.var] = value_sort_of(c.sort);
        check_condition(c.children[0], inner, where);
        return;
      }
    }
  }

  // --- declarations --------------------------------------------------------

  template <typename Vec, typename Key>
  void check_duplicates(const Vec& vec, const std::string& kind, Key key) {
    std::set<std::string> seen;
    for (const auto& d : vec) {
      const std::string k = key(d);
      if (!seen.insert(k).second)
        error("DuplicateDeclaration", kind + " '" + k + "' is declared more than once",
              span(kind + ":" + k));
    }
  }

  void check_roles() {
    for (const RoleDecl& r : m_.roles) {
      const SourceSpan sp = span("role:" + r.name);
      if (r.name == kRootRole && !r.parents.empty())
        error("HierarchyCycle", "the root role cannot have parents", sp);
      Sorts vars;
      for (const Param& p : r.params) {
        if (vars.count(p.var))
          error("DuplicateDeclaration", "parameter '" + p.var + "' repeated", sp);
        check_sort(p.sort, vars, sp);
        vars[p.var] = value_sort_of(p.sort);
      }
      for (const Pattern& parent : r.parents) check_role_pattern(parent, vars, false, sp);
      if (r.person_like && r.organization_like)
        error("KindConflict", "role '" + r.name + "' is both person-like and organization-like",
              sp);
    }
    // Cycles and kind conflicts over the name-level hierarchy.
    std::map<Symbol, std::set<Symbol>> ancestors;
    for (const RoleDecl& r : m_.roles) {
      std::set<Symbol>& anc = ancestors[r.name];
      std::vector<Symbol> work;
      for (const auto& p : r.parents) work.push_back(p.name);
      bool cycle = false;
      while (!work.empty()) {
        Symbol n = work.back();
        work.pop_back();
        if (n == r.name) cycle = true;
        if (!anc.insert(n).second) continue;
        if (const RoleDecl* d = m_.find_role(n))
          for (const auto& p : d->parents) work.push_back(p.name);
      }
      const SourceSpan sp = span("role:" + r.name);
      if (cycle) {
        error("HierarchyCycle", "role '" + r.name + "' is its own ancestor", sp);
        continue;
      }
      bool person = r.person_like, org = r.organization_like;
      for (const auto& a : anc)
        if (const RoleDecl* d = m_.find_role(a)) {
          person = person || d->person_like;
          org = org || d->organization_like;
        }
      if (person && org && !(r.person_like && r.organization_like))
        error("KindConflict",
              "role '" + r.name + "' inherits both person-like and organization-like roles", sp);
    }
  }

  void check_infos() {
    for (const InfoDecl& i : m_.infos) {
      const SourceSpan sp = span("info:" + i.name);
      if (i.parent && !m_.find_info(*i.parent)) {
        error("UnknownInfoType", "unknown parent information type '" + *i.parent + "'", sp);
        continue;
      }
      const InfoDecl* cur = &i;
      for (std::size_t steps = 0; cur && cur->parent; ++steps) {
        cur = m_.find_info(*cur->parent);
        if (cur == &i || steps > m_.infos.size()) {
          error("HierarchyCycle", "information type '" + i.name + "' is its own ancestor", sp);
          break;
        }
      }
    }
  }

  void check_name_clashes(const std::vector<EntityDecl>& entities) {
    for (const auto& e : entities) {
      if (m_.find_info(e.name) || m_.find_purpose(e.name))
        error("NameClash",
              "entity '" + e.name + "' reuses the name of an information type or purpose",
              span("entity:" + e.name));
    }
    for (const auto& p : m_.purposes)
      if (m_.find_info(p.name))
        error("NameClash", "purpose '" + p.name + "' reuses the name of an information type",
              span("purpose:" + p.name));
  }

  /// Roles on declared entities: resolvable, kind-consistent, and with
  /// arguments satisfying the parameter constraints.
  void check_entities(const std::vector<EntityDecl>& entities,
                      const std::vector<EntityDecl>& all, const std::vector<Atom>& facts,
                      const std::function<SourceSpan(const std::string&)>& span_for) {
    std::map<Symbol, std::set<RoleRef>> asserted;
    for (const auto& e : all)
      for (const auto& r : e.roles) asserted[e.name].insert(r);
    for (const Atom& f : facts)
      if (auto r = as_role(f)) asserted[r->first].insert(r->second);

    for (const EntityDecl& e : entities) {
      const SourceSpan sp = span_for("entity:" + e.name);
      bool ok = true;
      for (const RoleRef& r : e.roles) {
        Pattern pat{r.name, {}, {}};
        for (const auto& a : r.args) pat.args.push_back(Term::constant(a));
        std::size_t before = out_.size();
        check_role_pattern(pat, {}, false, sp);
        ok = ok && out_.size() == before;
      }
      if (!ok) continue;
      std::set<RoleRef> closed;
      try {
        closed = role_closure(e.name, asserted[e.name], m_);
      } catch (const ModelError& err) {
        error(err.code(), err.what(), sp);
        continue;
      }
      if (!kind_consistent(e.name, closed, m_))
        error("KindConflict",
              "entity '" + e.name + "' holds both person-like and organization-like roles", sp);
      for (const RoleRef& r : e.roles) check_role_constraints(r, asserted, sp);
    }
  }

  void check_role_constraints(const RoleRef& r, std::map<Symbol, std::set<RoleRef>>& asserted,
                              const SourceSpan& sp) {
    const RoleDecl* d = m_.find_role(r.name);
    if (!d) return;
    for (std::size_t i = 0; i < d->params.size(); ++i) {
      const ParamSort& s = d->params[i].sort;
      if (s.kind != ParamSort::Kind::Role) continue;
      Pattern need = s.role;
      for (Term& t : need.args)
        if (t.is_var())
          for (std::size_t j = 0; j < i; ++j)
            if (d->params[j].var == t.text) t = Term::constant(r.args[j]);
      std::set<RoleRef> closed;
      try {
        closed = role_closure(r.args[i], asserted[r.args[i]], m_);
      } catch (const ModelError&) {
        continue;
      }
      bool found = std::any_of(closed.begin(), closed.end(),
                               [&](const RoleRef& h) { return role_matches(need, h); });
      if (!found)
        error("ConstraintViolation",
              "role '" + r.str() + "' requires '" + r.args[i] + "' to hold '" + need.str() + "'",
              sp);
    }
  }

  void check_facts(const std::vector<Atom>& facts,
                   const std::function<SourceSpan(const std::string&)>& span_for) {
    for (const Atom& f : facts) {
      Pattern p{f.pred, {}, {}};
      for (const auto& a : f.args) p.args.push_back(Term::constant(a));
      check_fluent(p, {}, false, span_for("fact:" + f.str()));
    }
  }

  void check_actions() {
    for (const ActionSchema& a : m_.actions) {
      const SourceSpan sp = span("action:" + a.name);
      Sorts vars;
      for (const Param& p : a.params) {
        if (vars.count(p.var))
          error("DuplicateDeclaration", "parameter '" + p.var + "' repeated", sp);
        check_sort(p.sort, vars, sp);
        vars[p.var] = value_sort_of(p.sort);
      }
      for (const auto& v : a.participants) {
        auto it = vars.find(v);
        if (it == vars.end())
          error("UnboundVariable", "participant '" + v + "' is not a parameter", sp);
        else if (it->second != ValueSort::Entity)
          error("SortMismatch", "participant '" + v + "' is not an entity", sp);
      }
      check_condition(a.precondition, vars, sp);
      for (const auto& e : a.initiates) check_fluent(e, vars, false, sp);
      for (const auto& e : a.terminates) check_fluent(e, vars, false, sp);
      if (a.transmission) {
        const auto& t = *a.transmission;
        for (const auto* v : {&t.sender, &t.receiver, &t.subject})
          check_term(Term::var(*v), ValueSort::Entity, vars, false, sp);
        check_term(Term::var(t.info), ValueSort::Info, vars, false, sp);
        check_term(t.purpose, ValueSort::Purpose, vars, false, sp);
      }
    }
  }

  void check_clauses() {
    for (const Clause& c : m_.clauses) {
      const SourceSpan sp = span("clause:" + c.id);
      const auto& cat = c.category;
      Sorts vars;
      auto bind = [&](const Symbol& v, ValueSort s) {
        if (v.empty()) return;
        if (!vars.emplace(v, s).second)
          error("DuplicateDeclaration", "category variable '" + v + "' repeated", sp);
      };
      bind(cat.sender_var, ValueSort::Entity);
      bind(cat.receiver_var, ValueSort::Entity);
      bind(cat.subject_var, ValueSort::Entity);
      bind(cat.info_var, ValueSort::Info);
      if (cat.purpose.is_var()) bind(cat.purpose.text, ValueSort::Purpose);
      for (const Pattern* role : {&cat.sender_role, &cat.receiver_role, &cat.subject_role})
        if (!role->name.empty()) check_role_pattern(*role, vars, true, sp);
      if (!cat.info_bound.empty() && !m_.find_info(cat.info_bound))
        error("UnknownInfoType", "unknown information type '" + cat.info_bound + "'", sp);
      if (cat.purpose.is_const()) check_term(cat.purpose, ValueSort::Purpose, vars, false, sp);
      check_condition(c.exception, vars, sp);
      check_condition(c.requirement, vars, sp);
      for (const auto& o : c.obligations) {
        check_fluent_or_event(o.required, vars, sp);
        if (o.within && *o.within < 1)
          error("InvalidValue", "obligation deadline must be >= 1", sp);
      }
    }
  }

  void check_templates() {
    static const std::regex placeholder(R"(\{([^{}]*)\})");
    for (const Template& t : m_.templates) {
      const SourceSpan sp = span("template:" + t.action);
      const ActionSchema* a = m_.find_action(t.action);
      if (!a) {
        error("UnknownAction", "template for unknown action '" + t.action + "'", sp);
        continue;
      }
      for (auto it = std::sregex_iterator(t.text.begin(), t.text.end(), placeholder);
           it != std::sregex_iterator(); ++it) {
        std::string name = (*it)[1].str();
        if (name == "clause_ids" || name == "time" || a->param_index(name)) continue;
        error("UnknownPlaceholder",
              "template for '" + t.action + "' uses unknown placeholder '{" + name + "}'", sp);
      }
    }
  }

  void warn_unused() {
    for (const auto& p : m_.predicates)
      if (!used_preds_.count(p.name))
        out_.push_back({Severity::Warning, "UnusedDeclaration",
                        "predicate '" + p.name + "' is never used", span("pred:" + p.name)});
  }

  void run_policy() {
    check_duplicates(m_.roles, "role", [](const RoleDecl& d) { return d.name; });
    check_duplicates(m_.infos, "info", [](const InfoDecl& d) { return d.name; });
    check_duplicates(m_.purposes, "purpose", [](const PurposeDecl& d) { return d.name; });
    check_duplicates(m_.predicates, "pred", [](const PredicateDecl& d) { return d.name; });
    check_duplicates(m_.entities, "entity", [](const EntityDecl& d) { return d.name; });
    check_duplicates(m_.actions, "action", [](const ActionSchema& d) { return d.name; });
    check_duplicates(m_.clauses, "clause", [](const Clause& d) { return d.id; });
    check_duplicates(m_.templates, "template", [](const Template& d) { return d.action; });
    for (const auto& p : m_.predicates)
      if (p.name == kRolePredicate)
        error("NameClash", "'role' is reserved", span("pred:" + p.name));
    for (const auto& a : m_.actions)
      if (m_.find_predicate(a.name) || a.name == kRolePredicate)
        error("NameClash", "action '" + a.name + "' reuses a predicate name",
              span("action:" + a.name));
    check_roles();
    check_infos();
    if (has_errors(out_)) return;  // later checks rely on a sound hierarchy
    check_name_clashes(m_.entities);
    auto sp = [this](const std::string& k) { return span(k); };
    check_entities(m_.entities, m_.entities, m_.facts, sp);
    check_entity_constants_ = true;
    check_facts(m_.facts, sp);
    check_entity_constants_ = false;
    check_actions();
    check_clauses();
    check_templates();
    if (!has_errors(out_)) warn_unused();
  }

  void run_query(const QuerySpec& q) {
    std::vector<EntityDecl> all = m_.entities;
    std::set<Symbol> seen;
    for (const auto& e : m_.entities) seen.insert(e.name);
    for (const auto& e : q.entities) {
      if (!seen.insert(e.name).second)
        error("DuplicateDeclaration", "entity '" + e.name + "' is declared more than once",
              SourceSpan{});
      all.push_back(e);
    }
    std::vector<Atom> facts = m_.facts;
    facts.insert(facts.end(), q.facts.begin(), q.facts.end());
    auto nospan = [](const std::string&) { return SourceSpan{}; };
    check_name_clashes(q.entities);
    check_entities(q.entities, all, facts, nospan);
    check_entity_constants_ = true;
    check_facts(q.facts, nospan);
    if (q.infos)
      for (const auto& i : *q.infos)
        if (!m_.find_info(i)) error("UnknownInfoType", "unknown information type '" + i + "'", {});
    if (q.purposes)
      for (const auto& p : *q.purposes)
        if (!m_.find_purpose(p)) error("UnknownPurpose", "unknown purpose '" + p + "'", {});
    for (const auto* list : {&q.must, &q.never})
      for (const auto& p : *list) check_fluent_or_event(p, {}, {});
    for (const auto& p : q.targets) check_event(p, {}, true, {});
    for (const auto& [actor, goals] : q.goals) {
      if (!entity_names_.count(actor)) error("UnknownEntity", "unknown entity '" + actor + "'", {});
      for (const auto& p : goals) check_fluent_or_event(p, {}, {});
    }
  }

 private:
  const PolicyModel& m_;
  std::vector<Diagnostic>& out_;
  std::set<Symbol> entity_names_;
  std::set<Symbol> used_preds_;
  bool check_entity_constants_ = false;
};

}  // namespace

std::vector<Diagnostic> validate(const PolicyModel& model) {
  PolicyModel indexed = model;
  indexed.reindex();
  std::vector<Diagnostic> out;
  Validator(indexed, out).run_policy();
  return out;
}

std::vector<Diagnostic> validate_query(const QuerySpec& query, const PolicyModel& model) {
  std::vector<Diagnostic> out;
  Validator(model, out, &query.entities).run_query(query);
  return out;
}

}  // namespace polnarr
