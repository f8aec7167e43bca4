#pragma once

// Policy packs: a directory of policy files plus canned queries, and the
// latent-action audit run over a model.

#include <map>
#include <string>
#include <vector>

#include "polnarr/diagnostics.hpp"
#include "polnarr/query.hpp"

namespace polnarr {

inline const std::vector<std::string> kPackPolicyFiles = {
    "hierarchy.ppol", "actions.ppol", "clauses.ppol", "templates.ppol"};

struct Pack {
  std::string name;
  std::string dir;
  PolicyModel model;
  std::map<std::string, QuerySpec> queries;   // every *.pq other than fixtures, by stem
  std::map<std::string, QuerySpec> fixtures;  // *.pq declaring entities but no must/never/target
  std::vector<Diagnostic> warnings;
};

/// Directory holding packs: $POLNARR_PACK_DIR, else the build-time default.
std::string pack_root();

/// `name` under pack_root(), or `name` itself when it is a directory path.
std::string pack_dir(const std::string& name);

/// Throws ModelError("PackIncomplete") naming a missing policy file and
/// DocumentError("InvalidPolicy") when files fail to parse or validate.
Pack load_pack(const std::string& dir);

/// The shipped HIPAA pack.
Pack load_builtin_pack();

struct AuditEntry {
  Symbol predicate;
  std::vector<Symbol> initiators;   // actions initiating it
  std::vector<Symbol> acquirers;    // initiators reachable without already holding it
  std::vector<Symbol> terminators;  // actions terminating it
  bool negated = false;             // read under negation by some clause
  std::vector<std::string> gaps;    // "never initiated", "never terminated"
};

/// For each predicate a clause requirement, exception or obligation reads:
/// whether some action can bring it about from the initial facts, and, when
/// a clause reads it negated, whether some action ends it.
std::vector<AuditEntry> latent_action_audit(const PolicyModel& model);

}  // namespace polnarr
