#include "polnarr/adjudicator.hpp"

#include <algorithm>
#include <set>

#include "polnarr/dsl.hpp"

namespace polnarr {

namespace {

/// The category as a condition over the clause's own variables.
Condition category_condition(const CategoryPattern& cat) {
  std::vector<Condition> parts;
  parts.push_back(Condition::role_holds(Term::var(cat.sender_var), cat.sender_role));
  parts.push_back(Condition::role_holds(Term::var(cat.receiver_var), cat.receiver_role));
  parts.push_back(Condition::role_holds(Term::var(cat.subject_var), cat.subject_role));
  Condition sub;
  sub.kind = Condition::Kind::Subsumes;
  sub.terms = {Term::constant(cat.info_bound), Term::var(cat.info_var)};
  parts.push_back(sub);
  return Condition::conj(std::move(parts));
}

}  // namespace

const char* to_string(ClauseStatus s) {
  switch (s) {
    case ClauseStatus::Permits: return "permits";
    case ClauseStatus::Forbids: return "forbids";
    case ClauseStatus::NotApplicable: return "not_applicable";
  }
  return "?";
}

const char* to_string(FailedComponent c) {
  switch (c) {
    case FailedComponent::None: return "none";
    case FailedComponent::Requirement: return "requirement";
    case FailedComponent::Obligation: return "obligation";
  }
  return "?";
}

std::vector<std::string> Verdict::permits() const {
  std::vector<std::string> out;
  for (const auto& c : clauses)
    if (c.status == ClauseStatus::Permits) out.push_back(c.clause_id);
  return out;
}

std::vector<std::string> Verdict::forbids() const {
  std::vector<std::string> out;
  for (const auto& c : clauses)
    if (c.status == ClauseStatus::Forbids) out.push_back(c.clause_id);
  return out;
}

bool combine(const std::vector<ClauseVerdict>& clauses, Combination mode) {
  bool any_permit = false;
  for (const auto& c : clauses) {
    if (c.status == ClauseStatus::Forbids) return false;
    any_permit = any_permit || c.status == ClauseStatus::Permits;
  }
  return mode == Combination::Permissive || any_permit;
}

Bindings clause_bindings(const Clause& clause, const GroundTransmission& tx) {
  const CategoryPattern& cat = clause.category;
  Bindings b{{cat.sender_var, tx.sender},
             {cat.receiver_var, tx.receiver},
             {cat.subject_var, tx.subject},
             {cat.info_var, tx.info}};
  if (cat.purpose.is_var()) b[cat.purpose.text] = tx.purpose;
  return b;
}

Adjudication adjudicate(const GroundAction& action, int time, const AdjudicationContext& ctx) {
  Adjudication out;
  out.verdict.event = action.at(time);
  if (!action.transmission) return out;
  const GroundTransmission& tx = *action.transmission;
  out.verdict.transmission = true;
  EvalEnv env{ctx.model, ctx.state_before, ctx.history, ctx.entities, ctx.log};

  for (const Clause& clause : ctx.model.clauses) {
    const CategoryPattern& cat = clause.category;
    ClauseVerdict v;
    v.clause_id = clause.id;
    Bindings b = clause_bindings(clause, tx);
    bool purpose_ok = !cat.purpose.is_const() || cat.purpose.text == tx.purpose;
    v.category = purpose_ok && evaluate(category_condition(cat), b, env);
    if (v.category) v.exception = evaluate(clause.exception, b, env);
    if (v.category && !v.exception) {
      v.requirement = evaluate(clause.requirement, b, env);
      if (v.requirement) {
        v.status = ClauseStatus::Permits;
        for (const auto& o : clause.obligations) {
          ObligationEntry e;
          e.clause_id = clause.id;
          e.trigger = out.verdict.event;
          e.required = substitute(o.required, b);
          if (o.within) e.deadline = time + *o.within;
          out.new_entries.push_back(std::move(e));
        }
      } else {
        v.status = ClauseStatus::Forbids;
        v.failed = FailedComponent::Requirement;
        v.failing_atom = explain_failure(clause.requirement, b, env).value_or("");
      }
    }
    out.verdict.clauses.push_back(std::move(v));
  }
  out.verdict.compliant = combine(out.verdict.clauses, ctx.combination);
  return out;
}

ObligationLedger discharge(const ObligationLedger& ledger, const EventInstance& event,
                           const State* state_after) {
  ObligationLedger out;
  out.discharged = ledger.discharged;
  for (const auto& e : ledger.pending) {
    bool in_window = event.time > e.trigger.time && (!e.deadline || event.time <= *e.deadline);
    bool hit = matches(e.required, event);
    if (!hit && state_after) {
      const auto& fl = state_after->fluents();
      for (auto it = fl.lower_bound(Atom{e.required.name, {}});
           it != fl.end() && it->first.pred == e.required.name; ++it)
        if (matches(e.required, it->first, it->second)) {
          hit = true;
          break;
        }
    }
    if (in_window && hit) {
      ObligationEntry d = e;
      d.discharged_at = event.time;
      out.discharged.push_back(std::move(d));
    } else {
      out.pending.push_back(e);
    }
  }
  return out;
}

std::vector<ObligationEntry> finalize(const ObligationLedger& ledger, int end_step) {
  std::vector<ObligationEntry> out;
  for (const auto& e : ledger.pending)
    if (e.deadline.value_or(end_step) <= end_step) out.push_back(e);
  return out;
}

void apply_unmet(std::vector<Verdict>& verdicts, const std::vector<ObligationEntry>& unmet,
                 Combination mode) {
  for (const auto& e : unmet) {
    for (auto& v : verdicts) {
      if (v.event != e.trigger) continue;
      for (auto& c : v.clauses)
        if (c.clause_id == e.clause_id && c.status == ClauseStatus::Permits) {
          c.status = ClauseStatus::Forbids;
          c.failed = FailedComponent::Obligation;
        }
      v.compliant = combine(v.clauses, mode);
    }
  }
}

TraceReport check_trace(const PolicyModel& model, const Domain& domain,
                        const std::vector<EventInstance>& events, Combination mode) {
  ActionCatalog catalog(model);
  auto entities = entity_names(domain);
  State state = initial_state(domain);
  std::vector<EventInstance> history;
  ObligationLedger ledger;
  TraceReport report;
  int last = 0;
  for (const auto& ev : events) {
    const std::string where = "event at t=" + std::to_string(ev.time) + " (" + ev.str() + ")";
    if (ev.time <= last)
      throw ModelError("IllFormedTrace", where + ": times must be positive and strictly increasing");
    const ActionSchema* schema = catalog.find(ev.action);
    if (!schema) throw ModelError("IllFormedTrace", where + ": unknown action '" + ev.action + "'");
    if (schema->params.size() != ev.args.size())
      throw ModelError("IllFormedTrace", where + ": expected " +
                                             std::to_string(schema->params.size()) +
                                             " argument(s)");
    GroundAction g = instantiate(*schema, ev.args);
    EvalEnv env{model, state, history, entities, nullptr};
    if (auto why = explain_failure(g.precondition, {}, env))
      throw ModelError("IllFormedTrace", where + ": precondition fails: " + *why);
    AdjudicationContext ctx{model, state, history, entities, mode, nullptr};
    Adjudication adj = adjudicate(g, ev.time, ctx);
    ledger.pending.insert(ledger.pending.end(), adj.new_entries.begin(), adj.new_entries.end());
    report.verdicts.push_back(std::move(adj.verdict));
    state = apply_effects(state, g, ev.time);
    ledger = discharge(ledger, ev, &state);
    history.push_back(ev);
    last = ev.time;
  }
  report.unmet_obligations = finalize(ledger, last);
  apply_unmet(report.verdicts, report.unmet_obligations, mode);
  std::set<std::string> broken;
  for (const auto& v : report.verdicts) {
    report.compliant = report.compliant && v.compliant;
    for (const auto& c : v.clauses) {
      if (c.status != ClauseStatus::Forbids) continue;
      broken.insert(c.clause_id);
      if (c.failed == FailedComponent::Requirement)
        report.requirement_failures.push_back({v.event, c.clause_id, c.failing_atom});
    }
  }
  report.compliant = report.compliant && report.unmet_obligations.empty();
  report.broken_clauses.assign(broken.begin(), broken.end());
  return report;
}

}  // namespace polnarr
