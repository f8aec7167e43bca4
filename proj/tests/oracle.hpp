#pragma once

// Random micro-domains and an exhaustive enumerator used as an oracle for
// the planner. The oracle generates every executable event sequence up to
// the horizon and filters complete sequences one at a time; it shares only
// the condition evaluator, adjudicator and effect application with the
// library.

#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "polnarr/adjudicator.hpp"
#include "polnarr/grounder.hpp"
#include "polnarr/planner.hpp"

namespace polnarr::testing {

struct MicroDomain {
  std::string policy;
  std::string query;
};

class MicroDomainGenerator {
 public:
  explicit MicroDomainGenerator(unsigned seed) : rng_(seed) {}

  MicroDomain next() {
    MicroDomain d;
    actions_.clear();
    std::string& p = d.policy;
    p += "role actor.\nrole staff < actor.\nrole org.\n";
    p += "info data.\ninfo secret < data.\n";
    p += "purpose p1.\npurpose p2.\n";
    p += "pred f(entity).\npred g(entity, entity).\npred h(entity, info).\n";
    const int n_entities = pick(2, 3);
    p += "entity e1: staff.\nentity e2: actor.\n";
    if (n_entities == 3) p += "entity e3: " + pick_of({"org", "actor", "staff"}) + ".\n";
    if (coin(0.5)) p += "fact f(e1).\n";
    if (coin(0.6)) p += "fact h(e1, " + pick_of({"data", "secret"}) + ").\n";
    if (coin(0.3)) p += "fact g(e2, e1).\n";

    const int n_actions = pick(1, 4);
    bool has_tx = false;
    for (int i = 0; i < n_actions; ++i) {
      int kind = (i == 0 && coin(0.75)) ? 4 : pick(0, 5);
      if (kind == 4 && has_tx) kind = pick(0, 3);
      has_tx = has_tx || kind == 4;
      p += action(kind, i);
    }
    if (has_tx) {
      const int n_clauses = pick(1, 2);
      for (int i = 0; i < n_clauses; ++i) p += clause(i);
    }

    std::string& q = d.query;
    q += "horizon " + std::to_string(pick(1, 4)) + ".\n";
    const int n_must = pick(0, 2);
    for (int i = 0; i < n_must; ++i) q += "must " + must_pattern() + ".\n";
    if (coin(0.3)) q += "never " + never_pattern(n_entities) + ".\n";
    if (coin(0.25)) q += "option allow_noncompliant.\n";
    if (coin(0.25)) q += "combination permissive.\n";
    return d;
  }

 private:
  std::mt19937 rng_;
  std::vector<std::pair<std::string, int>> actions_;  // name, arity

  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
  std::string pick_of(std::initializer_list<const char*> xs) {
    auto it = xs.begin();
    std::advance(it, pick(0, static_cast<int>(xs.size()) - 1));
    return *it;
  }
  std::string role() { return pick_of({"entity", "actor", "staff", "org"}); }

  std::string action(int kind, int i) {
    const std::string idx = std::to_string(i);
    switch (kind) {
      case 0: {
        std::string name = "sf" + idx;
        actions_.push_back({name, 1});
        std::string extra = coin(0.4) ? " and " + pick_of({"h(X, data)", "not g(X, X)"}) : "";
        return "action " + name + "(X: " + role() + ") pre not f(X)" + extra + " initiates f(X).\n";
      }
      case 1: {
        std::string name = "cf" + idx;
        actions_.push_back({name, 1});
        std::string also = coin(0.4) ? " initiates h(X, data)" : "";
        return "action " + name + "(X: " + role() + ") pre f(X) terminates f(X)" + also + ".\n";
      }
      case 2: {
        std::string name = "lg" + idx;
        actions_.push_back({name, 2});
        std::string extra = coin(0.5) ? " and " + pick_of({"f(X)", "not f(Y)", "h(Y, _)"}) : "";
        return "action " + name + "(X: " + role() + ", Y: " + role() +
               ") agents X, Y pre X != Y and not g(X, Y)" + extra + " initiates g(X, Y).\n";
      }
      case 3: {
        std::string name = "lh" + idx;
        actions_.push_back({name, 2});
        std::string extra = coin(0.5) ? " and f(X)" : "";
        return "action " + name + "(X: " + role() + ", I: info) pre not h(X, I)" + extra +
               " initiates h(X, I).\n";
      }
      case 4: {
        std::string name = "tx" + idx;
        actions_.push_back({name, 3});
        std::string purpose = pick_of({"p1", "p2"});
        return "action " + name + "(X: " + role() + ", Y: " + role() +
               ", I: info) agents X pre X != Y and not h(Y, I) and exists A: info {h(X, A) and "
               "subsumes(A, I)} initiates h(Y, I) transmits from X to Y about X info I for " +
               purpose + ".\n";
      }
      default: {
        std::string name = "ul" + idx;
        actions_.push_back({name, 2});
        std::string also = coin(0.5) ? " initiates f(Y)" : "";
        return "action " + name + "(X: " + role() + ", Y: " + role() +
               ") pre g(X, Y) terminates g(X, Y)" + also + ".\n";
      }
    }
  }

  std::string clause(int i) {
    std::string c = "clause \"c" + std::to_string(i) + "\" category: sender S: " +
                    pick_of({"entity", "actor", "staff"}) + ", receiver R: " +
                    pick_of({"entity", "actor", "org"}) + ", subject P: entity, info I <= " +
                    pick_of({"data", "data", "secret"}) + ", purpose " +
                    pick_of({"Pu", "p1", "p2"});
    if (coin(0.3)) c += " exception: " + pick_of({"f(R)", "g(R, S)", "I = secret"});
    c += " requirement: " + pick_of({"g(S, R)", "f(S)", "not f(R)", "h(S, data)", "f(S) or g(R, S)"});
    if (coin(0.35)) {
      std::vector<std::string> opts = {"f(R)"};
      for (const auto& [name, arity] : actions_)
        if (arity == 1) opts.push_back(name + "(R)");
      std::string o = opts[static_cast<std::size_t>(pick(0, static_cast<int>(opts.size()) - 1))];
      c += " obligation: " + o + (coin(0.7) ? " within " + std::to_string(pick(1, 2)) : "");
    }
    return c + ".\n";
  }

  std::string must_pattern() {
    int k = pick(0, 4);
    if (k == 0) return "f(_)";
    if (k == 1) return "g(_, _)";
    if (k == 2) return "h(e2, _)";
    const auto& [name, arity] = actions_[static_cast<std::size_t>(pick(0, static_cast<int>(actions_.size()) - 1))];
    std::string out = name + "(";
    for (int i = 0; i < arity; ++i) out += i ? ", _" : "_";
    return out + ")";
  }

  std::string never_pattern(int n_entities) {
    if (coin(0.5)) return "f(e" + std::to_string(pick(1, n_entities)) + ")";
    const auto& [name, arity] = actions_[static_cast<std::size_t>(pick(0, static_cast<int>(actions_.size()) - 1))];
    std::string out = name + "(e" + std::to_string(pick(1, n_entities));
    for (int i = 1; i < arity; ++i) out += ", _";
    return out + ")";
  }
};

/// Every narrative the planner should produce, as "t:action(args);..."
/// strings. Ignores max_narratives and the timeout; intentionality is not
/// modelled.
inline std::vector<std::string> brute_force_narratives(const PolicyModel& model,
                                                       const ResolvedQuery& q) {
  const Domain& dom = q.domain;
  const int T = dom.horizon;
  const std::vector<Symbol> entities = entity_names(dom);
  ActionCatalog catalog(model);

  // Every argument tuple of every schema, unfiltered.
  std::vector<GroundAction> candidates;
  for (const ActionSchema& s : catalog.schemas()) {
    std::vector<Symbol> args;
    std::function<void(std::size_t)> fill = [&](std::size_t i) {
      if (i == s.params.size()) {
        candidates.push_back(instantiate(s, args));
        return;
      }
      const auto kind = s.params[i].sort.kind;
      const auto& values = kind == ParamSort::Kind::Info      ? dom.infos
                           : kind == ParamSort::Kind::Purpose ? dom.purposes
                                                              : entities;
      for (const auto& v : values) {
        args.push_back(v);
        fill(i + 1);
        args.pop_back();
      }
    };
    fill(0);
  }

  std::vector<Pattern> must_ev, must_fl, never_ev, never_fl;
  for (const auto& p : q.must) (catalog.find(p.name) ? must_ev : must_fl).push_back(p);
  for (const auto& p : q.never) (catalog.find(p.name) ? never_ev : never_fl).push_back(p);

  auto holds = [](const Pattern& p, const State& s) {
    for (const auto& [a, origin] : s.fluents())
      if (a.pred == p.name && matches(p, a, origin)) return true;
    return false;
  };

  // Filter one complete sequence, replaying it from the initial state.
  auto accept = [&](const std::vector<const GroundAction*>& seq) {
    std::vector<State> states{initial_state(dom)};
    std::vector<EventInstance> history;
    std::vector<Verdict> verdicts;
    std::vector<std::vector<ObligationEntry>> owed;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const int t = static_cast<int>(i) + 1;
      AdjudicationContext ctx{model, states.back(), history, entities, q.combination, nullptr};
      Adjudication adj = adjudicate(*seq[i], t, ctx);
      verdicts.push_back(adj.verdict);
      owed.push_back(adj.new_entries);
      states.push_back(apply_effects(states.back(), *seq[i], t));
      history.push_back(seq[i]->at(t));
    }
    for (const auto& p : never_ev)
      for (const auto& e : history)
        if (matches(p, e)) return false;
    for (const auto& p : never_fl)
      for (const auto& s : states)
        if (holds(p, s)) return false;
    for (const auto& p : must_ev)
      if (std::none_of(history.begin(), history.end(), [&](const EventInstance& e) { return matches(p, e); }))
        return false;
    for (const auto& p : must_fl)
      if (std::none_of(states.begin(), states.end(), [&](const State& s) { return holds(p, s); }))
        return false;
    if (!q.require_compliant) return true;
    for (const auto& v : verdicts)
      if (!v.compliant) return false;
    // An obligation is met by a later event, or a state after one, inside its window.
    for (std::size_t i = 0; i < owed.size(); ++i) {
      for (const auto& o : owed[i]) {
        const int deadline = o.deadline.value_or(T);
        if (deadline > T) continue;
        bool met = false;
        for (std::size_t j = i + 1; j < history.size() && !met; ++j) {
          if (history[j].time > deadline) break;
          met = matches(o.required, history[j]) || holds(o.required, states[j + 1]);
        }
        if (!met) return false;
      }
    }
    return true;
  };

  std::vector<std::string> out;
  std::vector<const GroundAction*> seq;
  std::vector<State> states{initial_state(dom)};
  std::vector<EventInstance> history;
  std::function<void()> walk = [&] {
    if (accept(seq)) {
      std::string k;
      for (std::size_t i = 0; i < seq.size(); ++i)
        k += std::to_string(i + 1) + ":" + seq[i]->key() + ";";
      out.push_back(k);
    }
    if (static_cast<int>(seq.size()) >= T) return;
    const int t = static_cast<int>(seq.size()) + 1;
    for (const GroundAction& ga : candidates) {
      EvalEnv env{model, states.back(), history, entities, nullptr};
      if (!evaluate(ga.precondition, {}, env)) continue;
      seq.push_back(&ga);
      states.push_back(apply_effects(states.back(), ga, t));
      history.push_back(ga.at(t));
      walk();
      history.pop_back();
      states.pop_back();
      seq.pop_back();
    }
  };
  walk();
  return out;
}

}  // namespace polnarr::testing
