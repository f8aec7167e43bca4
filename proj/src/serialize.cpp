#include "polnarr/serialize.hpp"

#include <sstream>

#include "polnarr/dsl.hpp"

namespace polnarr {

namespace {

Json strings(const std::vector<std::string>& xs) {
  Json out = Json::array();
  for (const auto& x : xs) out.push_back(x);
  return out;
}

Json indices(const std::vector<std::size_t>& xs) {
  Json out = Json::array();
  for (auto x : xs) out.push_back(x);
  return out;
}

Json patterns(const std::vector<Pattern>& ps) {
  Json out = Json::array();
  for (const auto& p : ps) out.push_back(print_pattern(p));
  return out;
}

Json event_fields(const EventInstance& e) {
  return Json{{"t", e.time}, {"action", e.action}, {"args", strings(e.args)}};
}

Json clause_json(const ClauseVerdict& c) {
  Json j{{"id", c.clause_id}, {"status", to_string(c.status)}};
  if (c.failed != FailedComponent::None) j["failed"] = to_string(c.failed);
  if (!c.failing_atom.empty()) j["failing_atom"] = c.failing_atom;
  return j;
}

Json resolved_query_json(const std::string& name, const ResolvedQuery& q) {
  Json goals = Json::object();
  for (const auto& [actor, ps] : q.goals) goals[actor] = patterns(ps);
  return Json{{"name", name},
              {"horizon", q.domain.horizon},
              {"must", patterns(q.must)},
              {"never", patterns(q.never)},
              {"goals", goals},
              {"targets", patterns(q.targets)},
              {"limits",
               {{"max_narratives", q.max_narratives},
                {"max_blocks", q.max_blocks},
                {"timeout_ms", q.timeout_ms}}},
              {"options",
               {{"require_compliant", q.require_compliant},
                {"report_blocked", q.report_blocked},
                {"intentionality", q.intentionality}}},
              {"combination", to_string(q.combination)}};
}

// ---------------------------------------------------------------------------
// Reading
// ---------------------------------------------------------------------------

const Json& field(const Json& j, const char* key) {
  static const Json null;
  auto it = j.find(key);
  return it == j.end() ? null : *it;
}

[[noreturn]] void bad(const std::string& what) { throw DocumentError("BadRequest", what); }

std::string as_string(const Json& j, const std::string& what) {
  if (!j.is_string()) bad(what + " must be a string");
  return j.get<std::string>();
}

std::vector<std::string> as_strings(const Json& j, const std::string& what) {
  std::vector<std::string> out;
  if (j.is_null()) return out;
  if (!j.is_array()) bad(what + " must be an array of strings");
  for (const auto& x : j) out.push_back(as_string(x, what + " entry"));
  return out;
}

template <typename T>
std::optional<T> opt_number(const Json& j, const std::string& what) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_number_integer()) bad(what + " must be an integer");
  return j.get<T>();
}

std::optional<bool> opt_bool(const Json& j, const std::string& what) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_boolean()) bad(what + " must be a boolean");
  return j.get<bool>();
}

/// Collects diagnostics from string fragments parsed with the DSL.
struct FragmentParser {
  std::string doc;
  std::vector<Diagnostic> diags;

  std::optional<Pattern> pattern(const std::string& text, const std::string& where) {
    auto p = parse_pattern(text);
    relabel(p.diagnostics, where);
    return p.value;
  }
  std::optional<RoleRef> role(const std::string& text, const std::string& where) {
    auto r = parse_role_ref(text);
    relabel(r.diagnostics, where);
    return r.value;
  }
  std::vector<Pattern> patterns(const Json& j, const std::string& where) {
    std::vector<Pattern> out;
    for (const auto& s : as_strings(j, where))
      if (auto p = pattern(s, where)) out.push_back(*p);
    return out;
  }
  std::optional<Atom> fact(const std::string& text, const std::string& where) {
    auto p = pattern(text, where);
    if (!p) return std::nullopt;
    if (!p->ground()) {
      diags.push_back({Severity::Error, "NonGroundFact", "fact '" + text + "' has variables",
                       SourceSpan{doc + ":" + where}});
      return std::nullopt;
    }
    Atom a{p->name, {}};
    for (const auto& t : p->args) a.args.push_back(t.text);
    return a;
  }
  std::vector<EntityDecl> entities(const Json& j) {
    std::vector<EntityDecl> out;
    if (j.is_null()) return out;
    if (!j.is_array()) bad("entities must be an array");
    for (std::size_t i = 0; i < j.size(); ++i) {
      const Json& e = j[i];
      if (!e.is_object()) bad("entities[" + std::to_string(i) + "] must be an object");
      EntityDecl d;
      d.name = as_string(field(e, "id"), "entity id");
      if (!field(e, "label").is_null()) d.label = as_string(field(e, "label"), "entity label");
      for (const auto& r : as_strings(field(e, "roles"), "entity roles"))
        if (auto ref = role(r, "entities[" + std::to_string(i) + "]")) d.roles.push_back(*ref);
      out.push_back(std::move(d));
    }
    return out;
  }
  std::vector<Atom> facts(const Json& j, const std::string& where) {
    std::vector<Atom> out;
    for (const auto& s : as_strings(j, where))
      if (auto a = fact(s, where)) out.push_back(*a);
    return out;
  }

 private:
  void relabel(std::vector<Diagnostic>& ds, const std::string& where) {
    for (auto& d : ds) {
      d.span.file = doc + ":" + where;
      diags.push_back(d);
    }
  }
};

}  // namespace

Combination parse_combination(const std::string& s) {
  if (s == "strict") return Combination::Strict;
  if (s == "permissive") return Combination::Permissive;
  throw ModelError("InvalidValue", "combination must be 'strict' or 'permissive', not '" + s + "'");
}

const char* to_string(Combination c) {
  return c == Combination::Strict ? "strict" : "permissive";
}

Json to_json(const Diagnostic& d) {
  return Json{{"severity", d.severity == Severity::Error ? "error" : "warning"},
              {"code", d.code},
              {"message", d.message},
              {"file", d.span.file},
              {"line", d.span.line_start},
              {"col", d.span.col_start}};
}

Json to_json(const std::vector<Diagnostic>& ds) {
  Json out = Json::array();
  for (const auto& d : ds) out.push_back(to_json(d));
  return out;
}

Json to_json(const EventInstance& e) { return event_fields(e); }

Json to_json(const Verdict& v) {
  Json clauses = Json::array();
  for (const auto& c : v.clauses) clauses.push_back(clause_json(c));
  return Json{{"transmission", v.transmission},
              {"compliant", v.compliant},
              {"permits", strings(v.permits())},
              {"forbids", strings(v.forbids())},
              {"clauses", clauses}};
}

Json to_json(const ObligationEntry& e) {
  Json j{{"clause", e.clause_id}, {"trigger", to_json(e.trigger)}, {"required", print_pattern(e.required)}};
  j["deadline"] = e.deadline ? Json(*e.deadline) : Json(nullptr);
  j["discharged_at"] = e.discharged_at ? Json(*e.discharged_at) : Json(nullptr);
  return j;
}

Json to_json(const BlockReport& b) {
  Json prefix = Json::array();
  for (const auto& e : b.prefix) prefix.push_back(to_json(e));
  Json failing = Json::array();
  for (const auto& c : b.cause.failing) failing.push_back(clause_json(c));
  Json terminated = Json::array();
  for (const auto& t : b.cause.terminated)
    terminated.push_back({{"fluent", t.fluent.str()}, {"terminated_by", to_json(t.terminated_by)}});
  return Json{{"prefix", prefix},
              {"target", to_json(b.target)},
              {"cause",
               {{"no_applicable_clause", b.cause.no_applicable_clause},
                {"failing", failing},
                {"terminated", terminated}}},
              {"verdict", to_json(b.verdict)}};
}

Json to_json(const TraceReport& r) {
  Json verdicts = Json::array();
  for (const auto& v : r.verdicts) {
    Json j = event_fields(v.event);
    j["verdict"] = to_json(v);
    verdicts.push_back(std::move(j));
  }
  Json failures = Json::array();
  for (const auto& f : r.requirement_failures) {
    Json j = event_fields(f.event);
    j["clause"] = f.clause_id;
    j["failing_atom"] = f.failing_atom;
    failures.push_back(std::move(j));
  }
  Json unmet = Json::array();
  for (const auto& e : r.unmet_obligations) unmet.push_back(to_json(e));
  return Json{{"compliant", r.compliant},
              {"events", verdicts},
              {"broken_clauses", strings(r.broken_clauses)},
              {"requirement_failures", failures},
              {"unmet_obligations", unmet}};
}

Json to_json(const PolicyModel& model, const Labels& labels, const NarrativeGraph& g) {
  Json nodes = Json::array();
  for (const auto& n : g.nodes) {
    Json j{{"id", n.id}, {"kind", to_string(n.kind)}};
    j["parent"] = n.parent.empty() ? Json(nullptr) : Json(n.parent);
    j["depth"] = n.depth;
    if (n.kind != NodeKind::Root) {
      j["event"] = to_json(n.event);
      j["text"] = render_event(model, labels, n.event, n.verdict);
      j["verdict"] = to_json(n.verdict);
    }
    j["branch"] = n.branch;
    j["narratives"] = indices(n.narratives);
    j["ends"] = indices(n.ends);
    nodes.push_back(std::move(j));
  }
  Json edges = Json::array();
  for (const auto& e : g.edges)
    edges.push_back({{"from", e.from},
                     {"to", e.to},
                     {"kind", to_string(e.kind)},
                     {"fluents", strings(e.fluents)},
                     {"narratives", indices(e.narratives)}});
  Json blocks = Json::array();
  for (const auto& b : g.blocks) {
    Json j{{"at", b.at}, {"node", b.node}, {"summary", b.summary}};
    const Json report = to_json(b.report);
    for (auto& [k, v] : report.items()) j[k] = v;
    blocks.push_back(std::move(j));
  }
  return Json{{"nodes", nodes}, {"edges", edges}, {"blocks", blocks}};
}

Json model_summary(const PolicyModel& model) {
  Json roles = Json::array();
  for (const auto& r : model.roles) {
    Json params = Json::array();
    for (const auto& p : r.params) params.push_back({{"var", p.var}, {"role", print_pattern(p.sort.role)}});
    Json tags = Json::array();
    if (r.person_like) tags.push_back("person_like");
    if (r.organization_like) tags.push_back("organization_like");
    if (r.assumable) tags.push_back("assumable");
    roles.push_back({{"name", r.name}, {"params", params}, {"parents", patterns(r.parents)}, {"tags", tags}});
  }
  Json infos = Json::array();
  for (const auto& i : model.infos) {
    Json j{{"name", i.name}, {"label", i.label}};
    j["parent"] = i.parent ? Json(*i.parent) : Json(nullptr);
    infos.push_back(std::move(j));
  }
  Json purposes = Json::array();
  for (const auto& p : model.purposes) purposes.push_back({{"name", p.name}, {"label", p.label}});
  Json predicates = Json::array();
  for (const auto& p : model.predicates) {
    Json args = Json::array();
    for (auto s : p.args)
      args.push_back(s == ValueSort::Entity ? "entity" : s == ValueSort::Info ? "info" : "purpose");
    predicates.push_back({{"name", p.name}, {"args", args}, {"timed", p.timed}});
  }
  Json entities = Json::array();
  for (const auto& e : model.entities) {
    Json rs = Json::array();
    for (const auto& r : e.roles) rs.push_back(r.str());
    entities.push_back({{"id", e.name}, {"roles", rs}, {"label", e.label}});
  }
  Json actions = Json::array();
  for (const auto& a : model.actions) {
    Json params = Json::array();
    for (const auto& p : a.params) {
      std::string sort = p.sort.kind == ParamSort::Kind::Info      ? "info"
                         : p.sort.kind == ParamSort::Kind::Purpose ? "purpose"
                                                                   : print_pattern(p.sort.role);
      params.push_back({{"var", p.var}, {"sort", sort}});
    }
    actions.push_back({{"name", a.name},
                       {"params", params},
                       {"participants", strings(a.participants)},
                       {"transmission", a.transmission.has_value()}});
  }
  Json clauses = Json::array();
  for (const auto& c : model.clauses)
    clauses.push_back({{"id", c.id},
                       {"excerpt", c.excerpt},
                       {"exception", print_condition(c.exception)},
                       {"requirement", print_condition(c.requirement)},
                       {"obligations", c.obligations.size()}});
  Json templates = Json::object();
  for (const auto& t : model.templates) templates[t.action] = t.text;
  return Json{{"roles", roles},         {"infos", infos},     {"purposes", purposes},
              {"predicates", predicates}, {"entities", entities}, {"actions", actions},
              {"clauses", clauses},     {"templates", templates}};
}

SolveRun run_solve(const PolicyModel& model, const QuerySpec& spec, const SolveOverrides& o) {
  QuerySpec q = spec;
  if (o.horizon) q.horizon = o.horizon;
  if (o.max_narratives) q.max_narratives = o.max_narratives;
  if (o.max_blocks) q.max_blocks = o.max_blocks;
  if (o.timeout_ms) q.timeout_ms = o.timeout_ms;
  if (o.combination) q.combination = o.combination;
  if (o.allow_noncompliant) q.require_compliant = !*o.allow_noncompliant;
  if (o.report_blocked) q.report_blocked = o.report_blocked;
  if (o.intentionality) q.intentionality = o.intentionality;
  if (q.horizon && *q.horizon < 1)
    throw ModelError("InvalidValue", "horizon must be at least 1");

  SolveRun run;
  run.name = q.name;
  run.query = resolve_query(model, q);
  run.result = enumerate_narratives(model, run.query);
  run.graph = merge(model, run.result.narratives, run.result.blocks);

  const Labels labels = make_labels(model, run.query.domain);
  Json narratives = Json::array();
  for (const auto& n : run.result.narratives) {
    Json events = Json::array();
    for (const auto& e : n.events) {
      Json j = event_fields(e.event);
      j["text"] = render_event(model, labels, e.event, e.verdict);
      j["verdict"] = to_json(e.verdict);
      events.push_back(std::move(j));
    }
    Json links = Json::array();
    for (const auto& l : n.causal_links)
      links.push_back({{"producer", l.producer}, {"fluent", l.fluent.str()}, {"consumer", l.consumer}});
    Json unmet = Json::array();
    for (const auto& e : n.unmet) unmet.push_back(to_json(e));
    narratives.push_back({{"events", events},
                          {"text", render_text(model, labels, n)},
                          {"compliant", n.compliant()},
                          {"causal_links", links},
                          {"unmet_obligations", unmet}});
  }
  run.document = Json{{"query", resolved_query_json(run.name, run.query)},
                      {"narratives", narratives},
                      {"graph", to_json(model, labels, run.graph)},
                      {"truncated", run.result.truncated}};
  return run;
}

std::string solve_text(const PolicyModel& model, const SolveRun& run) {
  const Labels labels = make_labels(model, run.query.domain);
  std::ostringstream os;
  os << "query " << (run.name.empty() ? "(unnamed)" : run.name) << ": "
     << run.result.narratives.size() << " narrative(s)";
  if (run.query.report_blocked) os << ", " << run.result.blocks.size() << " blocked branch(es)";
  if (run.result.truncated) os << " (search truncated)";
  os << "\n";
  for (std::size_t i = 0; i < run.result.narratives.size(); ++i) {
    os << "\nNarrative " << i + 1 << ":\n";
    std::istringstream lines(render_text(model, labels, run.result.narratives[i]));
    for (std::string line; std::getline(lines, line);) os << "  " << line << "\n";
  }
  for (const auto& b : run.result.blocks) {
    os << "\nBlocked after";
    if (b.prefix.empty()) os << " the start";
    os << ":\n";
    for (const auto& e : b.prefix) os << "  " << render_event(model, labels, e, Verdict{}) << "\n";
    os << "  cannot: " << render_event(model, labels, b.target, b.verdict) << "\n";
    if (b.cause.no_applicable_clause) os << "  no clause applies\n";
    for (const auto& c : b.cause.failing) {
      os << "  " << c.clause_id << " " << to_string(c.failed);
      if (!c.failing_atom.empty()) os << " fails on " << c.failing_atom;
      os << "\n";
    }
    for (const auto& t : b.cause.terminated)
      os << "  " << t.fluent.str() << " ended by "
         << render_event(model, labels, t.terminated_by, Verdict{}) << "\n";
  }
  return os.str();
}

int solve_exit_code(const SolveRun& run) { return run.result.narratives.empty() ? 2 : 0; }

QuerySpec query_from_json(const Json& j, const PolicyModel& model) {
  if (!j.is_object()) bad("query must be a JSON object");
  FragmentParser fp{"query", {}};
  QuerySpec q;
  if (!field(j, "name").is_null()) q.name = as_string(field(j, "name"), "name");
  q.horizon = opt_number<int>(field(j, "horizon"), "horizon");
  q.entities = fp.entities(field(j, "entities"));
  q.facts = fp.facts(field(j, "facts"), "facts");
  if (!field(j, "infos").is_null()) q.infos = as_strings(field(j, "infos"), "infos");
  if (!field(j, "purposes").is_null()) q.purposes = as_strings(field(j, "purposes"), "purposes");
  q.must = fp.patterns(field(j, "must"), "must");
  q.never = fp.patterns(field(j, "never"), "never");
  q.targets = fp.patterns(field(j, "targets"), "targets");
  const Json& goals = field(j, "goals");
  if (!goals.is_null()) {
    if (!goals.is_object()) bad("goals must map actors to pattern arrays");
    for (const auto& [actor, ps] : goals.items()) q.goals[actor] = fp.patterns(ps, "goals");
  }
  const Json& limits = field(j, "limits");
  if (!limits.is_null() && !limits.is_object()) bad("limits must be an object");
  if (limits.is_object()) {
    q.max_narratives = opt_number<std::size_t>(field(limits, "max_narratives"), "max_narratives");
    q.max_blocks = opt_number<std::size_t>(field(limits, "max_blocks"), "max_blocks");
    q.timeout_ms = opt_number<long>(field(limits, "timeout_ms"), "timeout_ms");
  }
  const Json& options = field(j, "options");
  if (!options.is_null() && !options.is_object()) bad("options must be an object");
  if (options.is_object()) {
    q.require_compliant = opt_bool(field(options, "require_compliant"), "require_compliant");
    q.report_blocked = opt_bool(field(options, "report_blocked"), "report_blocked");
    q.intentionality = opt_bool(field(options, "intentionality"), "intentionality");
  }
  if (!field(j, "combination").is_null()) {
    try {
      q.combination = parse_combination(as_string(field(j, "combination"), "combination"));
    } catch (const ModelError& e) {
      bad(e.what());
    }
  }
  auto check_min = [&](auto value, const char* name) {
    if (value && static_cast<long>(*value) < 1)
      fp.diags.push_back({Severity::Error, "InvalidValue", std::string(name) + " must be at least 1",
                          SourceSpan{"query"}});
  };
  check_min(q.horizon, "horizon");
  check_min(q.max_narratives, "max_narratives");
  check_min(q.max_blocks, "max_blocks");
  check_min(q.timeout_ms, "timeout_ms");
  if (!has_errors(fp.diags)) {
    auto more = validate_query(q, model);
    fp.diags.insert(fp.diags.end(), more.begin(), more.end());
  }
  if (has_errors(fp.diags)) throw DocumentError("InvalidQuery", "query has errors", fp.diags);
  return q;
}

Json query_to_json(const QuerySpec& q) {
  Json j = Json::object();
  if (!q.name.empty()) j["name"] = q.name;
  if (q.horizon) j["horizon"] = *q.horizon;
  if (!q.entities.empty()) {
    Json es = Json::array();
    for (const auto& e : q.entities) {
      Json rs = Json::array();
      for (const auto& r : e.roles) rs.push_back(r.str());
      Json ej{{"id", e.name}, {"roles", rs}};
      if (!e.label.empty()) ej["label"] = e.label;
      es.push_back(std::move(ej));
    }
    j["entities"] = es;
  }
  if (!q.facts.empty()) {
    Json fs = Json::array();
    for (const auto& f : q.facts) fs.push_back(f.str());
    j["facts"] = fs;
  }
  if (q.infos) j["infos"] = strings(*q.infos);
  if (q.purposes) j["purposes"] = strings(*q.purposes);
  j["must"] = patterns(q.must);
  j["never"] = patterns(q.never);
  Json goals = Json::object();
  for (const auto& [actor, ps] : q.goals) goals[actor] = patterns(ps);
  j["goals"] = goals;
  j["targets"] = patterns(q.targets);
  Json limits = Json::object();
  if (q.max_narratives) limits["max_narratives"] = *q.max_narratives;
  if (q.max_blocks) limits["max_blocks"] = *q.max_blocks;
  if (q.timeout_ms) limits["timeout_ms"] = *q.timeout_ms;
  j["limits"] = limits;
  Json options = Json::object();
  if (q.require_compliant) options["require_compliant"] = *q.require_compliant;
  if (q.report_blocked) options["report_blocked"] = *q.report_blocked;
  if (q.intentionality) options["intentionality"] = *q.intentionality;
  j["options"] = options;
  if (q.combination) j["combination"] = to_string(*q.combination);
  return j;
}

TraceFile trace_from_json(const Json& j, const PolicyModel& model) {
  if (!j.is_object()) bad("trace must be a JSON object");
  FragmentParser fp{"trace", {}};
  QuerySpec q;
  q.entities = fp.entities(field(j, "entities"));
  q.facts = fp.facts(field(j, "fluents"), "fluents");
  TraceFile out;
  const Json& events = field(j, "events");
  if (!events.is_array()) bad("events must be an array");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Json& e = events[i];
    const std::string where = "events[" + std::to_string(i) + "]";
    if (!e.is_object()) bad(where + " must be an object");
    auto t = opt_number<int>(field(e, "t"), where + ".t");
    if (!t) bad(where + ".t is required");
    out.events.push_back(EventInstance{*t, as_string(field(e, "action"), where + ".action"),
                                       as_strings(field(e, "args"), where + ".args")});
  }
  if (!has_errors(fp.diags)) {
    auto more = validate_query(q, model);
    fp.diags.insert(fp.diags.end(), more.begin(), more.end());
  }
  if (has_errors(fp.diags)) throw DocumentError("InvalidTrace", "trace has errors", fp.diags);
  out.domain = resolve_query(model, q).domain;
  return out;
}

}  // namespace polnarr
