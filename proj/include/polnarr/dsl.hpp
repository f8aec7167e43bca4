#pragma once

// Policy (.ppol) and query (.pq) front end.
//
// Statements end with '.', '#' starts a comment. Policy statements:
//
//   include "other.ppol".
//   role workforce_member(CE: covered_entity) < person [assumable].
//   info psychotherapy_notes < phi "psychotherapy notes".
//   purpose marketing.
//   pred has_info(entity, entity, info) @time.
//   entity sgh: healthcare_provider, organization "the hospital".
//   fact employs(acme, bob).
//   action get_treatment(Person: person, CE: covered_entity)
//     agents Person, CE
//     pre Person != CE
//     initiates has_info(CE, Person, phi).
//   clause "164.508" "excerpt"
//     category: sender S: covered_entity, receiver R: entity,
//               subject P: person, info I <= phi, purpose Pu
//     exception: Pu = treatment
//     requirement: authorized(P, S, R, I, Pu)
//     obligation: notify(S, P) within 2.
//   template get_treatment "{Person} is treated by {CE}".
//
// Query statements: include, entity, fact, `domain info: a, b.`,
// `domain purpose: x.`, `horizon 3.`, `must p.`, `never p.`,
// `goal alice: p, q.`, `target p.`, `limit narratives|blocks|timeout N.`,
// `option name [on|off].`, `combination strict|permissive.`, `name "q1".`

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polnarr/core_model.hpp"
#include "polnarr/diagnostics.hpp"
#include "polnarr/query.hpp"

namespace polnarr {

/// Resolves an include path to file text; nullopt when it cannot be read.
using SourceLoader = std::function<std::optional<std::string>(const std::string& path)>;

SourceLoader filesystem_loader();
/// Loader that refuses every include (used for uploaded text).
SourceLoader no_include_loader();

Parsed<PolicyModel> parse_policy(std::string_view text, const std::string& file = "<input>",
                                 const SourceLoader& loader = filesystem_loader());

/// Parse several files as one policy (a file set sharing one namespace).
Parsed<PolicyModel> parse_policy_files(const std::vector<std::string>& paths,
                                       const SourceLoader& loader = filesystem_loader());

Parsed<QuerySpec> parse_query(std::string_view text, const PolicyModel& model,
                              const std::string& file = "<query>",
                              const SourceLoader& loader = filesystem_loader());

Parsed<QuerySpec> parse_query_file(const std::string& path, const PolicyModel& model,
                                   const SourceLoader& loader = filesystem_loader());

/// Check every PolicyModel invariant. Empty iff the model is valid and has
/// no unused declarations; errors and warnings are distinguished by severity.
std::vector<Diagnostic> validate(const PolicyModel& model);

/// Check a query's patterns and fixtures against a model.
std::vector<Diagnostic> validate_query(const QuerySpec& query, const PolicyModel& model);

/// Canonical DSL text for a model; parses back to an equal model.
std::string print_policy(const PolicyModel& model);

/// Surface syntax of a condition or pattern, as used in policy text.
std::string print_condition(const Condition& c);
std::string print_pattern(const Pattern& p);

/// A single pattern such as `authorize(alice, *, *, *, *)`.
Parsed<Pattern> parse_pattern(std::string_view text);

/// A ground role reference such as `workforce_member(sgh)`.
Parsed<RoleRef> parse_role_ref(std::string_view text);

}  // namespace polnarr
