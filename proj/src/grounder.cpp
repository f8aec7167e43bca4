#include "polnarr/grounder.hpp"

#include <algorithm>
#include <functional>

namespace polnarr {

namespace {

Atom to_atom(const Pattern& p, const Bindings& b) {
  Atom a{p.name, {}};
  for (const Term& t : p.args) {
    Term s = substitute(t, b);
    a.args.push_back(s.text);
  }
  return a;
}

ActionSchema assume_schema(const RoleDecl& role) {
  ActionSchema s;
  s.name = "assume_" + role.name;
  s.synthesized = true;
  Pattern role_pat{role.name, {}, {}};
  Symbol holder = "Holder";
  while (std::any_of(role.params.begin(), role.params.end(),
                     [&](const Param& p) { return p.var == holder; }))
    holder += "_";
  s.params.push_back(Param{holder, ParamSort{ParamSort::Kind::Role, Pattern{"entity", {}, {}}}});
  for (const Param& p : role.params) {
    s.params.push_back(p);
    role_pat.args.push_back(Term::var(p.var));
  }
  s.participants = {holder};
  Pattern fluent{Symbol(kRolePredicate), {Term::var(holder), Term::constant(role.name)}, {}};
  fluent.args.insert(fluent.args.end(), role_pat.args.begin(), role_pat.args.end());
  Condition compatible;
  compatible.kind = Condition::Kind::Compatible;
  compatible.terms = {Term::var(holder)};
  compatible.atoms = {role_pat};
  s.precondition = Condition::conj({Condition::negate(Condition::holds(fluent)), compatible});
  s.initiates = {fluent};
  return s;
}

bool holds_possibly(const std::map<Symbol, std::set<RoleRef>>& possible, const Symbol& e,
                    const Pattern& role) {
  if (role.name == kRootRole && role.args.empty()) return true;
  auto it = possible.find(e);
  if (it == possible.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [&](const RoleRef& r) { return role_matches(role, r); });
}

/// Candidate values for each parameter, respecting role constraints under
/// `possible`. Calls `visit` for each complete binding.
class BindingEnumerator {
 public:
  BindingEnumerator(const ActionSchema& s, const Domain& d,
                    const std::map<Symbol, std::set<RoleRef>>& possible, std::size_t cap)
      : s_(s), d_(d), possible_(possible), cap_(cap), names_(entity_names(d)) {}

  void run(const std::function<void(const Bindings&, const std::vector<Symbol>&)>& visit) {
    Bindings b;
    std::vector<Symbol> args;
    step(0, b, args, visit);
  }

  std::size_t examined() const { return examined_; }

 private:
  const ActionSchema& s_;
  const Domain& d_;
  const std::map<Symbol, std::set<RoleRef>>& possible_;
  std::size_t cap_;
  std::vector<Symbol> names_;
  std::size_t examined_ = 0;

  void step(std::size_t i, Bindings& b, std::vector<Symbol>& args,
            const std::function<void(const Bindings&, const std::vector<Symbol>&)>& visit) {
    if (i == s_.params.size()) {
      visit(b, args);
      return;
    }
    const Param& p = s_.params[i];
    const std::vector<Symbol>* values = &names_;
    if (p.sort.kind == ParamSort::Kind::Info) values = &d_.infos;
    if (p.sort.kind == ParamSort::Kind::Purpose) values = &d_.purposes;
    Pattern role = substitute(p.sort.role, b);
    for (const Symbol& v : *values) {
      if (++examined_ > cap_)
        throw ModelError("DomainTooLarge", "grounding '" + s_.name + "' exceeds " +
                                               std::to_string(cap_) + " instantiations");
      if (p.sort.kind == ParamSort::Kind::Role && !holds_possibly(possible_, v, role)) continue;
      b[p.var] = v;
      args.push_back(v);
      step(i + 1, b, args, visit);
      args.pop_back();
      b.erase(p.var);
    }
  }
};

/// Static simplification with everything known at grounding time.
Condition simplify(const Condition& c, const PolicyModel& model,
                   const std::map<Symbol, std::set<RoleRef>>& possible) {
  using K = Condition::Kind;
  switch (c.kind) {
    case K::And: {
      std::vector<Condition> parts;
      for (const auto& ch : c.children) {
        Condition s = simplify(ch, model, possible);
        if (s.kind == K::False) return Condition::never_();
        if (s.kind != K::True) parts.push_back(std::move(s));
      }
      return Condition::conj(std::move(parts));
    }
    case K::Or: {
      std::vector<Condition> parts;
      for (const auto& ch : c.children) {
        Condition s = simplify(ch, model, possible);
        if (s.kind == K::True) return Condition::always();
        if (s.kind != K::False) parts.push_back(std::move(s));
      }
      return Condition::disj(std::move(parts));
    }
    case K::Not: {
      Condition s = simplify(c.children[0], model, possible);
      if (s.kind == K::True) return Condition::never_();
      if (s.kind == K::False) return Condition::always();
      return Condition::negate(std::move(s));
    }
    case K::Equal:
    case K::NotEqual:
      if (c.terms[0].is_const() && c.terms[1].is_const()) {
        bool eq = c.terms[0].text == c.terms[1].text;
        return (c.kind == K::Equal) == eq ? Condition::always() : Condition::never_();
      }
      return c;
    case K::Subsumes:
      if (c.terms[0].is_const() && c.terms[1].is_const()) {
        bool ok = false;
        try {
          ok = info_subsumes(c.terms[0].text, c.terms[1].text, model);
        } catch (const ModelError&) {
        }
        return ok ? Condition::always() : Condition::never_();
      }
      return c;
    case K::RoleHolds:
      if (c.terms[0].is_const() && !holds_possibly(possible, c.terms[0].text, c.atoms[0]))
        return Condition::never_();
      if (c.atoms[0].name == kRootRole && c.atoms[0].args.empty()) return Condition::always();
      return c;
    case K::Exists: {
      Condition out = c;
      out.children[0] = simplify(c.children[0], model, possible);
      if (out.children[0].kind == K::False) return Condition::never_();
      return out;
    }
    default: return c;
  }
}

GroundAction build(const ActionSchema& s, const Bindings& b, const std::vector<Symbol>& args) {
  GroundAction g;
  g.action = s.name;
  g.args = args;
  g.bindings = b;
  g.synthesized = s.synthesized;
  std::vector<Condition> pre;
  for (const Param& p : s.params)
    if (p.sort.kind == ParamSort::Kind::Role)
      pre.push_back(Condition::role_holds(Term::var(p.var), p.sort.role));
  pre.push_back(s.precondition);
  g.precondition = substitute(Condition::conj(std::move(pre)), b);
  for (const auto& e : s.initiates) g.initiates.push_back(to_atom(e, b));
  for (const auto& e : s.terminates) g.terminates.push_back(to_atom(e, b));
  for (const auto& v : s.participants) g.participants.push_back(b.at(v));
  if (s.transmission) {
    const auto& t = *s.transmission;
    g.transmission = GroundTransmission{b.at(t.sender), b.at(t.receiver), b.at(t.subject),
                                        b.at(t.info), substitute(t.purpose, b).text};
  }
  return g;
}

}  // namespace

ActionCatalog::ActionCatalog(const PolicyModel& model) {
  schemas_ = model.actions;
  for (const RoleDecl& r : model.roles)
    if (r.assumable && !model.find_action("assume_" + r.name)) schemas_.push_back(assume_schema(r));
  std::sort(schemas_.begin(), schemas_.end(),
            [](const ActionSchema& a, const ActionSchema& b) { return a.name < b.name; });
}

const ActionSchema* ActionCatalog::find(std::string_view name) const {
  auto it = std::lower_bound(schemas_.begin(), schemas_.end(), name,
                             [](const ActionSchema& a, std::string_view n) { return a.name < n; });
  return it != schemas_.end() && it->name == name ? &*it : nullptr;
}

const GroundAction* Grounding::find(const Symbol& action, const std::vector<Symbol>& args) const {
  auto it = std::lower_bound(actions.begin(), actions.end(), std::tie(action, args),
                             [](const GroundAction& g, const auto& key) {
                               return std::tie(g.action, g.args) < key;
                             });
  return it != actions.end() && it->action == action && it->args == args ? &*it : nullptr;
}

std::vector<Symbol> entity_names(const Domain& domain) {
  std::vector<Symbol> out;
  for (const auto& e : domain.entities) out.push_back(e.name);
  return out;
}

State initial_state(const Domain& domain) {
  State s;
  for (const auto& e : domain.entities)
    for (const auto& r : e.roles) s.initiate(role_atom(e.name, r), 0);
  for (const auto& f : domain.facts) s.initiate(f, 0);
  return s;
}

std::map<Symbol, std::set<RoleRef>> possible_roles(const PolicyModel& model,
                                                   const ActionCatalog& catalog,
                                                   const Domain& domain) {
  std::map<Symbol, std::set<RoleRef>> asserted;
  for (const auto& e : domain.entities) asserted[e.name];
  State s0 = initial_state(domain);
  for (const auto& [atom, t] : s0.fluents())
    if (auto r = as_role(atom)) asserted[r->first].insert(r->second);

  auto close_all = [&] {
    std::map<Symbol, std::set<RoleRef>> out;
    for (const auto& [e, roles] : asserted) {
      try {
        out[e] = role_closure(e, roles, model);
      } catch (const ModelError&) {
        out[e] = roles;
        out[e].insert(RoleRef{Symbol(kRootRole), {}});
      }
    }
    return out;
  };

  // Fixpoint over role-granting effects. Bindings respect parameter
  // constraints under the current approximation, which only grows.
  auto possible = close_all();
  for (bool changed = true; changed;) {
    changed = false;
    for (const ActionSchema& schema : catalog.schemas()) {
      std::vector<const Pattern*> grants;
      for (const auto& e : schema.initiates)
        if (e.name == kRolePredicate) grants.push_back(&e);
      if (grants.empty()) continue;
      BindingEnumerator en(schema, domain, possible, kDefaultGroundingCap);
      en.run([&](const Bindings& b, const std::vector<Symbol>&) {
        for (const Pattern* g : grants) {
          Atom a = to_atom(*g, b);
          auto r = as_role(a);
          if (!r || !asserted.count(r->first)) continue;
          if (asserted[r->first].insert(r->second).second) changed = true;
        }
      });
    }
    if (changed) possible = close_all();
  }
  return possible;
}

Grounding ground(const PolicyModel& model, const Domain& domain, std::size_t cap) {
  ActionCatalog catalog(model);
  Grounding out;
  out.possible_roles = possible_roles(model, catalog, domain);
  std::size_t budget = cap;
  for (const ActionSchema& s : catalog.schemas()) {
    BindingEnumerator en(s, domain, out.possible_roles, budget);
    en.run([&](const Bindings& b, const std::vector<Symbol>& args) {
      GroundAction g = build(s, b, args);
      g.precondition = simplify(g.precondition, model, out.possible_roles);
      if (g.precondition.kind != Condition::Kind::False) out.actions.push_back(std::move(g));
    });
    budget -= std::min(budget, en.examined());
  }
  std::sort(out.actions.begin(), out.actions.end(),
            [](const GroundAction& a, const GroundAction& b) {
              return std::tie(a.action, a.args) < std::tie(b.action, b.args);
            });
  return out;
}

GroundAction instantiate(const ActionSchema& schema, const std::vector<Symbol>& args) {
  if (args.size() != schema.params.size())
    throw ModelError("ArityMismatch", "action '" + schema.name + "' expects " +
                                          std::to_string(schema.params.size()) +
                                          " argument(s), got " + std::to_string(args.size()));
  Bindings b;
  for (std::size_t i = 0; i < args.size(); ++i) b[schema.params[i].var] = args[i];
  return build(schema, b, args);
}

State apply_effects(const State& state, const GroundAction& action, int time) {
  State out = state;
  for (const auto& a : action.terminates) out.terminate(a);
  for (const auto& a : action.initiates) out.initiate(a, time);
  return out;
}

}  // namespace polnarr
