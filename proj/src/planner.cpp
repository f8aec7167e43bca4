#include "polnarr/planner.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <set>

namespace polnarr {

namespace {

bool fluent_pattern_holds(const Pattern& p, const State& s) {
  const auto& fl = s.fluents();
  for (auto it = fl.lower_bound(Atom{p.name, {}}); it != fl.end() && it->first.pred == p.name;
       ++it)
    if (matches(p, it->first, it->second)) return true;
  return false;
}

/// Fluent reads that came back empty, i.e. what a failing condition missed.
void missed_atoms(const ReadLog& log, std::vector<Pattern>& fluents, std::vector<Symbol>& holders) {
  for (const Read& r : log) {
    if (r.positive) continue;
    if (r.kind == Read::Kind::Fluent) fluents.push_back(r.pattern);
    if (r.kind == Read::Kind::Role) holders.push_back(r.holder);
  }
}

class Search {
 public:
  Search(const PolicyModel& model, const ResolvedQuery& query, bool emit)
      : m_(model),
        q_(query),
        g_(ground(model, query.domain)),
        entities_(entity_names(query.domain)),
        emit_(emit),
        start_(std::chrono::steady_clock::now()) {
    ActionCatalog catalog(model);
    for (const auto& p : q_.must)
      (catalog.find(p.name) ? must_events_ : must_fluents_).push_back(p);
    for (const auto& p : q_.never)
      (catalog.find(p.name) ? never_events_ : never_fluents_).push_back(p);
    if (q_.report_blocked) {
      for (const auto& t : q_.targets) {
        std::vector<const GroundAction*> acts;
        for (const auto& ga : g_.actions)
          if (matches(t, ga.at(0))) acts.push_back(&ga);
        targets_.push_back(std::move(acts));
      }
    }
  }

  SolveResult run() {
    State s0 = initial_state(q_.domain);
    for (const auto& p : never_fluents_)
      if (fluent_pattern_holds(p, s0)) return std::move(out_);
    // visit() holds references into these across recursive pushes.
    states_.reserve(horizon() + 1);
    events_.reserve(horizon());
    history_.reserve(horizon());
    states_.push_back(std::move(s0));
    ObligationLedger ledger;
    visit(ledger, {});
    return std::move(out_);
  }

 private:
  const PolicyModel& m_;
  const ResolvedQuery& q_;
  Grounding g_;
  std::vector<Symbol> entities_;
  bool emit_;
  std::chrono::steady_clock::time_point start_;
  std::vector<Pattern> must_events_, must_fluents_, never_events_, never_fluents_;
  std::vector<std::vector<const GroundAction*>> targets_;

  std::vector<EventRecord> events_;
  std::vector<State> states_;
  std::vector<EventInstance> history_;
  std::set<std::string> block_seen_;
  SolveResult out_;
  bool stop_ = false;
  bool narratives_full_ = false;

  int horizon() const { return q_.domain.horizon; }

  bool timed_out() {
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start_);
    return elapsed.count() > q_.timeout_ms;
  }

  bool must_satisfied() const {
    for (const auto& p : must_events_)
      if (std::none_of(history_.begin(), history_.end(),
                       [&](const EventInstance& e) { return matches(p, e); }))
        return false;
    for (const auto& p : must_fluents_)
      if (std::none_of(states_.begin(), states_.end(),
                       [&](const State& s) { return fluent_pattern_holds(p, s); }))
        return false;
    return true;
  }

  void maybe_emit(const ObligationLedger& ledger) {
    if (narratives_full_ || !must_satisfied()) return;
    auto unmet = finalize(ledger, horizon());
    if (!unmet.empty() && q_.require_compliant) return;
    Narrative n;
    n.events = events_;
    n.states = states_;
    n.horizon = horizon();
    n.ledger = ledger;
    n.unmet = unmet;
    if (!unmet.empty()) {
      auto verdicts = n.verdicts();
      apply_unmet(verdicts, unmet, q_.combination);
      for (std::size_t i = 0; i < verdicts.size(); ++i) n.events[i].verdict = verdicts[i];
    }
    n.causal_links = causal_links(m_, n.events, n.states);
    if (q_.intentionality && !q_.goals.empty() && !check_intentionality(n, q_.goals)) return;
    out_.narratives.push_back(std::move(n));
    if (out_.narratives.size() >= q_.max_narratives) {
      narratives_full_ = true;
      // Keep going for blocked targets until those are full too.
      stop_ = targets_.empty() || out_.blocks.size() >= q_.max_blocks;
    }
  }

  BlockCause make_cause(const GroundAction& target, const Verdict& verdict,
                        const EvalEnv& env) const {
    BlockCause cause;
    for (const auto& c : verdict.clauses)
      if (c.status == ClauseStatus::Forbids) cause.failing.push_back(c);
    cause.no_applicable_clause = cause.failing.empty();
    std::vector<Pattern> fluents;
    std::vector<Symbol> holders;
    for (const auto& c : cause.failing) {
      const Clause* clause = m_.find_clause(c.clause_id);
      if (!clause || c.failed != FailedComponent::Requirement) continue;
      ReadLog log;
      EvalEnv logged{env.model, env.state, env.history, env.entities, &log};
      evaluate(clause->requirement, clause_bindings(*clause, *target.transmission), logged);
      missed_atoms(log, fluents, holders);
    }
    // The latest terminator of each missed atom that no longer holds.
    std::set<Atom> seen;
    for (auto it = events_.rbegin(); it != events_.rend(); ++it) {
      for (const Atom& a : it->terminated) {
        if (env.state.holds(a) || seen.count(a)) continue;
        bool missed = std::any_of(fluents.begin(), fluents.end(),
                                  [&](const Pattern& p) { return matches(p, a); });
        if (!missed && as_role(a))
          missed = std::find(holders.begin(), holders.end(), a.args[0]) != holders.end();
        if (!missed) continue;
        seen.insert(a);
        cause.terminated.push_back({a, it->event});
      }
    }
    return cause;
  }

  /// Blocked targets at the current prefix. Returns this prefix's causes so
  /// children only report changes.
  std::map<std::string, std::string> check_targets(
      const std::map<std::string, std::string>& parent_causes) {
    std::map<std::string, std::string> causes;
    if (targets_.empty() || static_cast<int>(events_.size()) >= horizon()) return causes;
    const State& state = states_.back();
    EvalEnv env{m_, state, history_, entities_, nullptr};
    const int t = static_cast<int>(events_.size()) + 1;
    for (const auto& acts : targets_) {
      for (const GroundAction* ga : acts) {
        if (!evaluate(ga->precondition, {}, env)) continue;
        AdjudicationContext ctx{m_, state, history_, entities_, q_.combination, nullptr};
        Adjudication adj = adjudicate(*ga, t, ctx);
        if (adj.verdict.compliant) continue;
        BlockCause cause = make_cause(*ga, adj.verdict, env);
        std::string ck = cause.key();
        const std::string tk = ga->key();
        causes[tk] = ck;
        auto parent = parent_causes.find(tk);
        if (parent != parent_causes.end() && parent->second == ck) continue;
        if (!block_seen_.insert(tk + "|" + state.key() + "|" + ck).second) continue;
        if (out_.blocks.size() >= q_.max_blocks) continue;
        out_.blocks.push_back(BlockReport{history_, adj.verdict.event, std::move(cause),
                                          std::move(adj.verdict)});
        if (narratives_full_ && out_.blocks.size() >= q_.max_blocks) stop_ = true;
      }
    }
    return causes;
  }

  bool kind_ok(const GroundAction& ga, const State& next) const {
    std::set<Symbol> changed;
    for (const auto* list : {&ga.initiates, &ga.terminates})
      for (const Atom& a : *list)
        if (auto r = as_role(a)) changed.insert(r->first);
    for (const Symbol& e : changed)
      if (!kind_consistent(e, closed_roles(e, next, m_), m_)) return false;
    return true;
  }

  bool never_violated(const EventInstance& ev, const State& next) const {
    for (const auto& p : never_events_)
      if (matches(p, ev)) return true;
    for (const auto& p : never_fluents_)
      if (fluent_pattern_holds(p, next)) return true;
    return false;
  }

  void visit(const ObligationLedger& ledger,
             const std::map<std::string, std::string>& parent_causes) {
    ++out_.nodes;
    if (timed_out()) {
      out_.truncated = true;
      stop_ = true;
      return;
    }
    if (emit_) maybe_emit(ledger);
    if (stop_) return;
    auto causes = check_targets(parent_causes);
    const int depth = static_cast<int>(events_.size());
    if (depth >= horizon()) return;
    const int t = depth + 1;
    const State& state = states_.back();

    for (const GroundAction& ga : g_.actions) {
      EventRecord rec;
      rec.event = ga.at(t);
      EvalEnv env{m_, state, history_, entities_, &rec.pre_reads};
      if (!evaluate(ga.precondition, {}, env)) continue;
      AdjudicationContext ctx{m_, state, history_, entities_, q_.combination, &rec.adj_reads};
      Adjudication adj = adjudicate(ga, t, ctx);
      if (q_.require_compliant && !adj.verdict.compliant) continue;
      State next = apply_effects(state, ga, t);
      if (!kind_ok(ga, next) || never_violated(rec.event, next)) continue;

      ObligationLedger led = ledger;
      led.pending.insert(led.pending.end(), adj.new_entries.begin(), adj.new_entries.end());
      led = discharge(led, rec.event, &next);
      if (q_.require_compliant &&
          std::any_of(led.pending.begin(), led.pending.end(),
                      [&](const ObligationEntry& e) { return e.deadline && *e.deadline <= t; }))
        continue;

      rec.verdict = std::move(adj.verdict);
      rec.participants = ga.participants;
      rec.initiated = ga.initiates;
      rec.terminated = ga.terminates;
      events_.push_back(std::move(rec));
      states_.push_back(std::move(next));
      history_.push_back(events_.back().event);
      visit(led, causes);
      history_.pop_back();
      states_.pop_back();
      events_.pop_back();
      if (stop_) return;
    }
  }
};

}  // namespace

std::vector<EventInstance> Narrative::event_instances() const {
  std::vector<EventInstance> out;
  for (const auto& e : events) out.push_back(e.event);
  return out;
}

std::vector<Verdict> Narrative::verdicts() const {
  std::vector<Verdict> out;
  for (const auto& e : events) out.push_back(e.verdict);
  return out;
}

bool Narrative::compliant() const {
  return unmet.empty() && std::all_of(events.begin(), events.end(),
                                      [](const EventRecord& e) { return e.verdict.compliant; });
}

std::string BlockCause::key() const {
  std::string k = no_applicable_clause ? "none;" : "";
  for (const auto& c : failing)
    k += c.clause_id + ":" + to_string(c.failed) + ":" + c.failing_atom + ";";
  k += "|";
  for (const auto& t : terminated) k += t.fluent.str() + "@" + t.terminated_by.str() + ";";
  return k;
}

State apply_event(const PolicyModel& model, const State& state, const GroundAction& action,
                  int time, const std::vector<EventInstance>& history,
                  const std::vector<Symbol>& entities) {
  EvalEnv env{model, state, history, entities, nullptr};
  if (auto why = explain_failure(action.precondition, {}, env))
    throw ModelError("PreconditionViolated",
                     action.key() + " at t=" + std::to_string(time) + ": " + *why);
  return apply_effects(state, action, time);
}

std::vector<CausalLink> causal_links(const PolicyModel& model,
                                     const std::vector<EventRecord>& events,
                                     const std::vector<State>& states) {
  // Each positive read is supported by its earliest established match.
  std::set<CausalLink> links;
  for (std::size_t i = 0; i < events.size() && i < states.size(); ++i) {
    const State& before = states[i];
    const int consumer = events[i].event.time;
    for (const ReadLog* log : {&events[i].pre_reads, &events[i].adj_reads}) {
      for (const Read& r : *log) {
        if (!r.positive) continue;
        std::optional<CausalLink> best;
        auto offer = [&](const Atom& a, int origin) {
          CausalLink l{origin, a, consumer};
          if (!best || l < *best) best = l;
        };
        if (r.kind == Read::Kind::Fluent) {
          const auto& fl = before.fluents();
          for (auto it = fl.lower_bound(Atom{r.pattern.name, {}});
               it != fl.end() && it->first.pred == r.pattern.name; ++it)
            if (matches(r.pattern, it->first, it->second)) offer(it->first, it->second);
        } else if (r.kind == Read::Kind::Role) {
          for (const RoleRef& role : before.roles_of(r.holder)) {
            if (!role_read_depends_on(r, role, model)) continue;
            Atom a = role_atom(r.holder, role);
            offer(a, *before.origin(a));
          }
        }
        if (best) links.insert(*best);
      }
    }
  }
  return {links.begin(), links.end()};
}

bool check_intentionality(const Narrative& n,
                          const std::map<Symbol, std::vector<Pattern>>& goals) {
  std::vector<Pattern> all;
  for (const auto& [actor, ps] : goals) all.insert(all.end(), ps.begin(), ps.end());
  if (all.empty()) return true;
  std::map<int, std::set<int>> succ;
  for (const auto& l : n.causal_links)
    if (l.producer > 0) succ[l.producer].insert(l.consumer);
  std::map<int, const EventRecord*> by_time;
  for (const auto& e : n.events) by_time[e.event.time] = &e;

  auto achieves = [&](const EventRecord& e, const std::vector<Pattern>& ps) {
    for (const auto& p : ps) {
      if (matches(p, e.event)) return true;
      for (const Atom& a : e.initiated)
        if (matches(p, a, e.event.time)) return true;
    }
    return false;
  };

  for (const auto& e : n.events) {
    std::vector<Pattern> mine;
    for (const auto& who : e.participants)
      if (auto it = goals.find(who); it != goals.end())
        mine.insert(mine.end(), it->second.begin(), it->second.end());
    const auto& wanted = mine.empty() ? all : mine;
    std::set<int> seen{e.event.time};
    std::deque<int> work{e.event.time};
    bool ok = false;
    while (!work.empty() && !ok) {
      int t = work.front();
      work.pop_front();
      if (auto it = by_time.find(t); it != by_time.end() && achieves(*it->second, wanted)) ok = true;
      for (int nx : succ[t])
        if (seen.insert(nx).second) work.push_back(nx);
    }
    if (!ok) return false;
  }
  return true;
}

SolveResult enumerate_narratives(const PolicyModel& model, const ResolvedQuery& query) {
  return Search(model, query, true).run();
}

std::vector<BlockReport> explain_blocked(const PolicyModel& model, const ResolvedQuery& query) {
  ResolvedQuery q = query;
  q.report_blocked = true;
  return Search(model, q, false).run().blocks;
}

}  // namespace polnarr
