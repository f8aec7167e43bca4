#include <doctest.h>

#include <map>

#include "oracle.hpp"
#include "support.hpp"

using namespace polnarr;
using namespace polnarr::testing;

namespace {

bool has_code(const std::vector<Diagnostic>& ds, const std::string& code) {
  return std::any_of(ds.begin(), ds.end(), [&](const Diagnostic& d) { return d.code == code; });
}

std::vector<Diagnostic> policy_errors(std::string_view text) {
  return parse_policy(text, "<test>", no_include_loader()).diagnostics;
}

SourceLoader map_loader(std::map<std::string, std::string> files) {
  return [files = std::move(files)](const std::string& path) -> std::optional<std::string> {
    for (const auto& [name, text] : files)
      if (path.size() >= name.size() && path.compare(path.size() - name.size(), name.size(), name) == 0)
        return text;
    return std::nullopt;
  };
}

const char* kSmall = R"(
role person [person_like].
role provider.
info phi.
purpose care.
pred has(entity, entity, info).
entity ann: person "Ann".
entity doc: provider.
action treat(P: person, D: provider)
  agents P, D
  pre P != D and not has(D, P, phi)
  initiates has(D, P, phi).
action send(S: provider, R: entity, P: person, I: info, Pu: purpose)
  agents S
  pre has(S, P, I) and not has(R, P, I)
  initiates has(R, P, I)
  transmits from S to R about P info I for Pu.
clause "c1" "excerpt text"
  category: sender S: provider, receiver R: entity, subject P: person, info I <= phi, purpose Pu
  exception: Pu = care
  requirement: has(S, P, I)
  obligation: treat(P, S) within 2.
template treat "{P} is treated by {D}".
template send "{S} sends {P}'s {I} to {R}".
)";

}  // namespace

TEST_SUITE("dsl") {

TEST_CASE("a small policy parses into the expected model") {
  PolicyModel m = policy(kSmall);
  REQUIRE(m.find_action("send"));
  const ActionSchema& send = *m.find_action("send");
  CHECK(send.params.size() == 5);
  REQUIRE(send.transmission);
  CHECK(send.transmission->sender == "S");
  CHECK(send.transmission->purpose == Term::var("Pu"));
  CHECK(send.participants == std::vector<Symbol>{"S"});
  REQUIRE(m.find_clause("c1"));
  const Clause& c = *m.find_clause("c1");
  CHECK(c.excerpt == "excerpt text");
  CHECK(c.category.info_bound == "phi");
  REQUIRE(c.obligations.size() == 1);
  CHECK(c.obligations[0].within == 2);
  CHECK(c.obligations[0].required.str() == "treat(P,S)");
  CHECK(m.find_entity("ann")->label == "Ann");
  CHECK(m.find_role("person")->person_like);
}

TEST_CASE("printing then parsing gives back an equal model") {
  SUBCASE("hand-written policy") {
    PolicyModel m = policy(kSmall);
    CHECK(policy(print_policy(m)) == m);
  }
  SUBCASE("the shipped pack") {
    const PolicyModel& m = hipaa().model;
    PolicyModel back = policy(print_policy(m));
    CHECK(back == m);
    CHECK(print_policy(back) == print_policy(m));
  }
  SUBCASE("random micro-domains") {
    MicroDomainGenerator gen(7);
    for (int i = 0; i < 40; ++i) {
      PolicyModel m = policy(gen.next().policy);
      CHECK(policy(print_policy(m)) == m);
    }
  }
}

TEST_CASE("syntax errors carry file, line and column") {
  auto p = parse_policy("role person.\nrole staff < .\n", "x.ppol", no_include_loader());
  CHECK_FALSE(p);
  REQUIRE(!p.diagnostics.empty());
  const Diagnostic& d = p.diagnostics.front();
  CHECK(d.code == "SyntaxError");
  CHECK(d.span.file == "x.ppol");
  CHECK(d.span.line_start == 2);
  CHECK(d.span.col_start > 1);
  CHECK(format_diagnostic(d).rfind("x.ppol:2:", 0) == 0);
}

TEST_CASE("parsing continues past an error to report later ones") {
  auto ds = policy_errors("role a <.\nrole b.\nrole c < .\n");
  CHECK(std::count_if(ds.begin(), ds.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; }) >= 2);
}

TEST_CASE("validation errors are reported by code") {
  CHECK(has_code(policy_errors("role a < b.\nrole b < a.\n"), "HierarchyCycle"));
  CHECK(has_code(policy_errors("info x < y.\ninfo y < x.\n"), "HierarchyCycle"));
  CHECK(has_code(policy_errors("role a.\nrole a.\n"), "DuplicateDeclaration"));
  CHECK(has_code(policy_errors("role a < ghost.\n"), "UnresolvedRole"));
  CHECK(has_code(policy_errors("role a [shiny].\n"), "UnknownTag"));
  CHECK(has_code(policy_errors("role a [person_like, organization_like].\n"), "KindConflict"));
  CHECK(has_code(policy_errors("info phi.\npurpose phi.\n"), "NameClash"));
  CHECK(has_code(policy_errors("pred f(entity).\naction a(X: entity) pre g(X) initiates f(X).\n"),
                 "UnknownPredicate"));
  CHECK(has_code(policy_errors("pred f(entity).\naction a(X: entity) pre f(Y) initiates f(X).\n"),
                 "UnboundVariable"));
  CHECK(has_code(policy_errors("pred f(entity).\naction a(X: entity) initiates f(X, X).\n"),
                 "ArityMismatch"));
  CHECK(has_code(policy_errors("pred f(info).\ninfo i.\naction a(X: entity) initiates f(X).\n"),
                 "SortMismatch"));
  CHECK(has_code(policy_errors("pred f(entity).\nentity e: nobody.\n"), "UnresolvedRole"));
  CHECK(has_code(policy_errors("pred f(entity).\nfact f(ghost).\n"), "UnknownEntity"));
  CHECK(has_code(policy_errors("pred f(entity).\naction a(X: entity) initiates f(X).\n"
                               "template a \"{Y}\".\n"),
                 "UnknownPlaceholder"));
  CHECK(has_code(policy_errors("role p.\ninfo i.\nclause \"c\" category: sender S: p, info I <= i.\n"),
                 "IncompleteCategory"));
}

TEST_CASE("role constraints of entity roles are checked") {
  auto ds = policy_errors(
      "role person.\nrole org.\nrole employer(P: person).\n"
      "entity acme: org, employer(acme).\n");
  CHECK(has_code(ds, "ConstraintViolation"));
}

TEST_CASE("unused declarations are warnings, not errors") {
  auto p = parse_policy("role lonely.\ninfo i.\n", "<t>", no_include_loader());
  CHECK(p);
  CHECK_FALSE(has_errors(p.diagnostics));
}

TEST_CASE("includes resolve relative to the including file") {
  auto loader = map_loader({{"base.ppol", "role person.\ninfo phi.\n"},
                            {"main.ppol", "include \"base.ppol\".\nentity ann: person.\n"}});
  auto p = parse_policy("include \"main.ppol\".\n", "dir/top.ppol", loader);
  REQUIRE_MESSAGE(p, diag_text(p.diagnostics));
  CHECK(p.value->find_entity("ann"));
  CHECK(p.value->find_info("phi"));
}

TEST_CASE("include problems are diagnosed") {
  CHECK(has_code(parse_policy("include \"nope.ppol\".\n", "<t>", map_loader({})).diagnostics,
                 "IncludeNotFound"));
  auto loop = map_loader({{"a.ppol", "include \"b.ppol\".\n"}, {"b.ppol", "include \"a.ppol\".\n"}});
  CHECK(has_code(parse_policy("include \"a.ppol\".\n", "<t>", loop).diagnostics, "IncludeCycle"));
  CHECK_FALSE(parse_policy("include \"a.ppol\".\n", "<t>", no_include_loader()));
}

TEST_CASE("queries parse with every statement kind") {
  PolicyModel m = policy(kSmall);
  QuerySpec q = query(R"(
    name "demo".
    horizon 3.
    entity bea: person.
    fact has(doc, bea, phi).
    domain info: phi.
    domain purpose: care.
    must send(doc, _, bea, phi, _).
    never treat(*, *).
    goal doc: has(ann, bea, _).
    target send(doc, ann, bea, phi, care).
    limit narratives 4.
    limit blocks 9.
    limit timeout 500.
    option report_blocked.
    option intentionality off.
    combination permissive.
  )", m);
  CHECK(q.name == "demo");
  CHECK(q.horizon == 3);
  CHECK(q.entities.size() == 1);
  CHECK(q.facts == std::vector<Atom>{Atom{"has", {"doc", "bea", "phi"}}});
  CHECK(q.infos == std::vector<Symbol>{"phi"});
  CHECK(q.must.size() == 1);
  CHECK(q.never.front().args.size() == 2);
  CHECK(q.never.front().args[0].is_wildcard());
  CHECK(q.goals.at("doc").size() == 1);
  CHECK(q.max_narratives == 4u);
  CHECK(q.max_blocks == 9u);
  CHECK(q.timeout_ms == 500);
  CHECK(q.report_blocked == true);
  CHECK(q.intentionality == false);
  CHECK(q.combination == Combination::Permissive);
}

TEST_CASE("query references are validated against the model") {
  PolicyModel m = policy(kSmall);
  auto bad = [&](const char* text, const char* code) {
    auto q = parse_query(text, m, "<q>", no_include_loader());
    CHECK_MESSAGE(has_code(q.diagnostics, code), text);
  };
  bad("must nothing(ann).", "UnknownPredicate");
  bad("must has(ann).", "ArityMismatch");
  bad("must has(ghost, ann, phi).", "UnknownEntity");
  bad("domain info: dna.", "UnknownInfoType");
  bad("domain purpose: fun.", "UnknownPurpose");
  bad("horizon 0.", "InvalidValue");
  bad("option turbo.", "SyntaxError");
  bad("fact has(ann, _, phi).", "NonGroundFact");
}

TEST_CASE("single patterns and role references parse on their own") {
  auto p = parse_pattern("authorize(alice, *, *, *, *)");
  REQUIRE(p);
  CHECK(p.value->name == "authorize");
  CHECK(p.value->args[1].is_wildcard());
  CHECK(print_pattern(*p.value) == "authorize(alice, _, _, _, _)");
  auto r = parse_role_ref("workforce_member(sgh)");
  REQUIRE(r);
  CHECK(*r.value == RoleRef{"workforce_member", {"sgh"}});
  CHECK_FALSE(parse_role_ref("workforce_member(X)"));
  CHECK_FALSE(parse_pattern("f(a,"));
}

}
