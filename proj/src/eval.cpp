#include "polnarr/eval.hpp"

#include <algorithm>

#include "polnarr/dsl.hpp"

namespace polnarr {

namespace {

bool term_matches(const Term& t, const Symbol& value) {
  return !t.is_const() || t.text == value;
}

template <typename F>
void for_each_fluent(const State& s, const Symbol& pred, F&& f) {
  const auto& fl = s.fluents();
  for (auto it = fl.lower_bound(Atom{pred, {}}); it != fl.end() && it->first.pred == pred; ++it)
    if (!f(it->first, it->second)) return;
}

bool any_fluent(const Pattern& p, const State& s) {
  bool found = false;
  for_each_fluent(s, p.name, [&](const Atom& a, int origin) {
    found = matches(p, a, origin);
    return !found;
  });
  return found;
}

void log_read(const EvalEnv& env, Read r) {
  if (env.log) env.log->push_back(std::move(r));
}

bool eval(const Condition& c, const Bindings& b, const EvalEnv& env);

bool eval_exists(const Condition& c, const Bindings& b, const EvalEnv& env) {
  Bindings inner = b;
  auto attempt = [&](const Symbol& v) {
    inner[c.var] = v;
    return eval(c.children[0], inner, env);
  };
  switch (c.sort.kind) {
    case ParamSort::Kind::Info:
      for (const auto& i : env.model.infos)
        if (attempt(i.name)) return true;
      return false;
    case ParamSort::Kind::Purpose:
      for (const auto& p : env.model.purposes)
        if (attempt(p.name)) return true;
      return false;
    case ParamSort::Kind::Role: {
      Pattern role = substitute(c.sort.role, b);
      for (const auto& e : env.entities) {
        auto roles = closed_roles(e, env.state, env.model);
        bool holds = std::any_of(roles.begin(), roles.end(),
                                 [&](const RoleRef& r) { return role_matches(role, r); });
        log_read(env, Read{Read::Kind::Role, role, {}, e, holds});
        if (holds && attempt(e)) return true;
      }
      return false;
    }
  }
  return false;
}

bool eval(const Condition& c, const Bindings& b, const EvalEnv& env) {
  using K = Condition::Kind;
  switch (c.kind) {
    case K::True: return true;
    case K::False: return false;
    case K::And:
      for (const auto& ch : c.children)
        if (!eval(ch, b, env)) return false;
      return true;
    case K::Or:
      for (const auto& ch : c.children)
        if (eval(ch, b, env)) return true;
      return false;
    case K::Not: return !eval(c.children[0], b, env);
    case K::Holds: {
      Pattern p = substitute(c.atoms[0], b);
      bool found = any_fluent(p, env.state);
      log_read(env, Read{Read::Kind::Fluent, p, {}, {}, found});
      return found;
    }
    case K::RoleHolds: {
      Term holder = substitute(c.terms[0], b);
      Pattern role = substitute(c.atoms[0], b);
      auto check = [&](const Symbol& e) {
        auto roles = closed_roles(e, env.state, env.model);
        bool ok = std::any_of(roles.begin(), roles.end(),
                              [&](const RoleRef& r) { return role_matches(role, r); });
        log_read(env, Read{Read::Kind::Role, role, {}, e, ok});
        return ok;
      };
      if (holder.is_const()) return check(holder.text);
      return std::any_of(env.entities.begin(), env.entities.end(), check);
    }
    case K::Compatible: {
      Term holder = substitute(c.terms[0], b);
      Pattern role = substitute(c.atoms[0], b);
      if (!holder.is_const() || !role.ground()) return false;
      RoleRef ref{role.name, {}};
      for (const auto& t : role.args) ref.args.push_back(t.text);
      auto asserted = env.state.roles_of(holder.text);
      asserted.insert(ref);
      bool ok = false;
      try {
        ok = kind_consistent(holder.text, role_closure(holder.text, asserted, env.model),
                             env.model);
      } catch (const ModelError&) {
        ok = false;
      }
      log_read(env, Read{Read::Kind::Role, {}, {}, holder.text, ok});
      return ok;
    }
    case K::Subsumes: {
      Term g = substitute(c.terms[0], b), s = substitute(c.terms[1], b);
      if (!g.is_const() || !s.is_const()) return false;
      try {
        return info_subsumes(g.text, s.text, env.model);
      } catch (const ModelError&) {
        return false;
      }
    }
    case K::Occurred: {
      Pattern p = substitute(c.atoms[0], b);
      bool found = std::any_of(env.history.begin(), env.history.end(),
                               [&](const EventInstance& e) { return matches(p, e); });
      log_read(env, Read{Read::Kind::History, {}, {p}, {}, found});
      return found;
    }
    case K::OccurredBefore: {
      Pattern p1 = substitute(c.atoms[0], b), p2 = substitute(c.atoms[1], b);
      bool found = false;
      std::optional<int> first;
      for (const auto& e : env.history) {
        if (first && e.time > *first && matches(p2, e)) {
          found = true;
          break;
        }
        if (!first && matches(p1, e)) first = e.time;
      }
      log_read(env, Read{Read::Kind::History, {}, {p1, p2}, {}, found});
      return found;
    }
    case K::Earlier: {
      Pattern p1 = substitute(c.atoms[0], b), p2 = substitute(c.atoms[1], b);
      std::optional<int> min1, max2;
      for_each_fluent(env.state, p1.name, [&](const Atom& a, int o) {
        if (matches(p1, a, o)) min1 = min1 ? std::min(*min1, o) : o;
        return true;
      });
      for_each_fluent(env.state, p2.name, [&](const Atom& a, int o) {
        if (matches(p2, a, o)) max2 = max2 ? std::max(*max2, o) : o;
        return true;
      });
      log_read(env, Read{Read::Kind::Fluent, p1, {}, {}, min1.has_value()});
      log_read(env, Read{Read::Kind::Fluent, p2, {}, {}, max2.has_value()});
      log_read(env, Read{Read::Kind::Order, {}, {p1, p2}, {}, min1 && max2 && *min1 < *max2});
      return min1 && max2 && *min1 < *max2;
    }
    case K::Equal:
    case K::NotEqual: {
      Term l = substitute(c.terms[0], b), r = substitute(c.terms[1], b);
      bool eq = l.is_const() && r.is_const() && l.text == r.text;
      return c.kind == K::Equal ? eq : !eq;
    }
    case K::Exists: return eval_exists(c, b, env);
  }
  return false;
}

}  // namespace

bool role_read_depends_on(const Read& r, const RoleRef& role, const PolicyModel& model) {
  if (r.pattern.name.empty()) return true;
  try {
    for (const RoleRef& c : role_closure(r.holder, {role}, model))
      if (role_matches(r.pattern, c)) return true;
  } catch (const ModelError&) {
  }
  return false;
}

Term substitute(const Term& t, const Bindings& b) {
  if (!t.is_var()) return t;
  auto it = b.find(t.text);
  return it == b.end() ? t : Term::constant(it->second);
}

Pattern substitute(const Pattern& p, const Bindings& b) {
  Pattern out{p.name, {}, p.span};
  out.args.reserve(p.args.size());
  for (const auto& t : p.args) out.args.push_back(substitute(t, b));
  return out;
}

Condition substitute(const Condition& c, const Bindings& b) {
  if (b.empty()) return c;
  Condition out = c;
  for (auto& t : out.terms) t = substitute(t, b);
  for (auto& a : out.atoms) a = substitute(a, b);
  if (c.kind == Condition::Kind::Exists) {
    out.sort.role = substitute(c.sort.role, b);
    Bindings inner = b;
    inner.erase(c.var);
    out.children[0] = substitute(c.children[0], inner);
    return out;
  }
  for (auto& ch : out.children) ch = substitute(ch, b);
  return out;
}

bool matches(const Pattern& p, const std::vector<Symbol>& args, std::optional<int> origin) {
  if (p.args.size() == args.size()) {
    for (std::size_t i = 0; i < args.size(); ++i)
      if (!term_matches(p.args[i], args[i])) return false;
    return true;
  }
  if (p.args.size() == args.size() + 1 && origin) {
    for (std::size_t i = 0; i < args.size(); ++i)
      if (!term_matches(p.args[i], args[i])) return false;
    return term_matches(p.args.back(), std::to_string(*origin));
  }
  return false;
}

bool matches(const Pattern& p, const Atom& a, std::optional<int> origin) {
  return p.name == a.pred && matches(p, a.args, origin);
}

bool matches(const Pattern& p, const EventInstance& e) {
  return p.name == e.action && p.args.size() == e.args.size() && matches(p, e.args);
}

bool evaluate(const Condition& c, const Bindings& b, const EvalEnv& env) { return eval(c, b, env); }

std::optional<std::string> explain_failure(const Condition& c, const Bindings& b,
                                           const EvalEnv& env) {
  EvalEnv quiet{env.model, env.state, env.history, env.entities, nullptr};
  if (eval(c, b, quiet)) return std::nullopt;
  if (c.kind == Condition::Kind::And)
    for (const auto& ch : c.children)
      if (!eval(ch, b, quiet)) return explain_failure(ch, b, quiet);
  return print_condition(substitute(c, b));
}

std::set<RoleRef> closed_roles(const Symbol& entity, const State& state,
                               const PolicyModel& model) {
  auto asserted = state.roles_of(entity);
  try {
    return role_closure(entity, asserted, model);
  } catch (const ModelError&) {
    asserted.insert(RoleRef{Symbol(kRootRole), {}});
    return asserted;
  }
}

}  // namespace polnarr
