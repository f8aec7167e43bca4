#include "polnarr/pack.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "polnarr/dsl.hpp"
#include "polnarr/serialize.hpp"

namespace fs = std::filesystem;

namespace polnarr {

namespace {

/// Predicates read by `c`, with the polarity they are read at.
void collect_reads(const Condition& c, bool negated, std::map<Symbol, bool>& out) {
  using K = Condition::Kind;
  switch (c.kind) {
    case K::Holds:
    case K::Earlier:
      for (const auto& a : c.atoms) out[a.name] = out[a.name] || negated;
      break;
    case K::Not: collect_reads(c.children[0], !negated, out); break;
    default:
      for (const auto& ch : c.children) collect_reads(ch, negated, out);
  }
}

/// Whether `c` can hold once the predicates in `have` have been brought
/// about. Negative tests are assumed satisfiable.
bool reachable(const Condition& c, const std::set<Symbol>& have) {
  using K = Condition::Kind;
  switch (c.kind) {
    case K::False: return false;
    case K::Holds: return have.count(c.atoms[0].name) != 0;
    case K::Earlier: return have.count(c.atoms[0].name) && have.count(c.atoms[1].name);
    case K::Not: return true;
    case K::And:
      return std::all_of(c.children.begin(), c.children.end(),
                         [&](const Condition& ch) { return reachable(ch, have); });
    case K::Or:
      return std::any_of(c.children.begin(), c.children.end(),
                         [&](const Condition& ch) { return reachable(ch, have); });
    case K::Exists: return reachable(c.children[0], have);
    default: return true;
  }
}

bool initiates(const ActionSchema& a, const Symbol& pred) {
  return std::any_of(a.initiates.begin(), a.initiates.end(),
                     [&](const Pattern& p) { return p.name == pred; });
}

bool terminates(const ActionSchema& a, const Symbol& pred) {
  return std::any_of(a.terminates.begin(), a.terminates.end(),
                     [&](const Pattern& p) { return p.name == pred; });
}

}  // namespace

std::string pack_root() {
  if (const char* env = std::getenv("POLNARR_PACK_DIR"); env && *env) return env;
  return POLNARR_DEFAULT_PACK_DIR;
}

std::string pack_dir(const std::string& name) {
  if (name.find('/') != std::string::npos || fs::is_directory(name)) return name;
  return (fs::path(pack_root()) / name).string();
}

Pack load_pack(const std::string& dir) {
  Pack pack;
  pack.dir = dir;
  pack.name = fs::path(dir).filename().string();
  if (pack.name.empty()) pack.name = fs::path(dir).parent_path().filename().string();
  std::vector<std::string> paths;
  for (const auto& f : kPackPolicyFiles) {
    fs::path p = fs::path(dir) / f;
    if (!fs::is_regular_file(p))
      throw ModelError("PackIncomplete", "pack '" + pack.name + "' is missing " + f);
    paths.push_back(p.string());
  }
  auto parsed = parse_policy_files(paths);
  if (!parsed)
    throw DocumentError("InvalidPolicy", "pack '" + pack.name + "' does not validate",
                        parsed.diagnostics);
  pack.model = std::move(*parsed.value);
  pack.warnings = parsed.diagnostics;

  std::vector<fs::path> queries;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pq") queries.push_back(entry.path());
  std::sort(queries.begin(), queries.end());
  for (const auto& p : queries) {
    auto q = parse_query_file(p.string(), pack.model);
    if (!q) throw DocumentError("InvalidPolicy", "pack query " + p.filename().string() + " has errors",
                                q.diagnostics);
    const std::string stem = p.stem().string();
    bool fixture = q.value->must.empty() && q.value->never.empty() && q.value->targets.empty();
    (fixture ? pack.fixtures : pack.queries)[stem] = std::move(*q.value);
  }
  return pack;
}

Pack load_builtin_pack() { return load_pack(pack_dir("hipaa")); }

std::vector<AuditEntry> latent_action_audit(const PolicyModel& model) {
  std::map<Symbol, bool> read;  // predicate -> read negated somewhere
  for (const auto& c : model.clauses) {
    collect_reads(c.requirement, false, read);
    collect_reads(c.exception, false, read);
    for (const auto& o : c.obligations)
      if (model.find_predicate(o.required.name)) read[o.required.name] = read[o.required.name];
  }

  std::set<Symbol> have;
  for (const auto& f : model.facts) have.insert(f.pred);
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& a : model.actions) {
      if (!reachable(a.precondition, have)) continue;
      for (const auto& p : a.initiates) grew = have.insert(p.name).second || grew;
    }
  }

  std::vector<AuditEntry> out;
  for (const auto& [pred, negated] : read) {
    AuditEntry e;
    e.predicate = pred;
    e.negated = negated;
    std::set<Symbol> without = have;
    without.erase(pred);
    for (const auto& a : model.actions) {
      if (initiates(a, pred)) {
        e.initiators.push_back(a.name);
        if (reachable(a.precondition, without)) e.acquirers.push_back(a.name);
      }
      if (terminates(a, pred)) e.terminators.push_back(a.name);
    }
    bool initial = std::any_of(model.facts.begin(), model.facts.end(),
                               [&](const Atom& f) { return f.pred == pred; });
    if (!initial && e.acquirers.empty()) e.gaps.push_back("never initiated");
    if (negated && e.terminators.empty()) e.gaps.push_back("never terminated");
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace polnarr
