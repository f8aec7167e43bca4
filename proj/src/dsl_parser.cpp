#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "polnarr/dsl.hpp"

namespace polnarr {

namespace {

enum class Tok {
  Ident,
  Var,
  Wild,
  String,
  Int,
  Dot,
  Comma,
  Colon,
  LParen,
  RParen,
  LBracket,
  RBracket,
  LBrace,
  RBrace,
  Lt,
  Le,
  Eq,
  Neq,
  At,
  End,
  Bad,
};

const char* tok_name(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Var: return "variable";
    case Tok::Wild: return "wildcard";
    case Tok::String: return "string";
    case Tok::Int: return "integer";
    case Tok::Dot: return "'.'";
    case Tok::Comma: return "','";
    case Tok::Colon: return "':'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::Lt: return "'<'";
    case Tok::Le: return "'<='";
    case Tok::Eq: return "'='";
    case Tok::Neq: return "'!='";
    case Tok::At: return "'@'";
    case Tok::End: return "end of input";
    case Tok::Bad: return "invalid character";
  }
  return "?";
}

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 1, col = 1, end_line = 1, end_col = 1;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto ident_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (c == '"') {
      t.kind = Tok::String;
      advance(1);
      bool closed = false;
      while (i < src.size()) {
        char d = src[i];
        if (d == '"') {
          advance(1);
          closed = true;
          break;
        }
        if (d == '\\' && i + 1 < src.size()) {
          char e = src[i + 1];
          t.text += e == 'n' ? '\n' : e;
          advance(2);
          continue;
        }
        if (d == '\n') break;
        t.text += d;
        advance(1);
      }
      if (!closed) {
        t.kind = Tok::Bad;
        t.text = "unterminated string";
      }
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      t.kind = Tok::Int;
      while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) {
        t.text += src[i];
        advance(1);
      }
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < src.size() && ident_char(src[i])) {
        t.text += src[i];
        advance(1);
      }
      if (t.text == "_")
        t.kind = Tok::Wild;
      else if (std::isupper(static_cast<unsigned char>(t.text[0])) || t.text[0] == '_')
        t.kind = Tok::Var;
      else
        t.kind = Tok::Ident;
    } else {
      auto two = src.substr(i, 2);
      if (two == "<=") {
        t.kind = Tok::Le;
      } else if (two == "!=") {
        t.kind = Tok::Neq;
      } else {
        switch (c) {
          case '.': t.kind = Tok::Dot; break;
          case ',': t.kind = Tok::Comma; break;
          case ':': t.kind = Tok::Colon; break;
          case '(': t.kind = Tok::LParen; break;
          case ')': t.kind = Tok::RParen; break;
          case '[': t.kind = Tok::LBracket; break;
          case ']': t.kind = Tok::RBracket; break;
          case '{': t.kind = Tok::LBrace; break;
          case '}': t.kind = Tok::RBrace; break;
          case '<': t.kind = Tok::Lt; break;
          case '=': t.kind = Tok::Eq; break;
          case '*': t.kind = Tok::Wild; break;
          case '@': t.kind = Tok::At; break;
          default: t.kind = Tok::Bad; break;
        }
      }
      std::size_t len = (t.kind == Tok::Le || t.kind == Tok::Neq) ? 2 : 1;
      t.text = std::string(src.substr(i, len));
      advance(len);
    }
    t.end_line = line;
    t.end_col = col;
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::End;
  end.line = end.end_line = line;
  end.col = end.end_col = col;
  out.push_back(end);
  return out;
}

struct SyntaxFailure {};

enum class Mode { Policy, Query };

/// Shared state for one parse across included files.
struct ParseSession {
  Mode mode;
  const SourceLoader& loader;
  std::vector<Diagnostic> diags;
  std::vector<std::string> include_stack;
  std::set<std::string> included;
  PolicyModel model;  // policy mode target
  QuerySpec query;    // query mode target
};

std::string directory_of(const std::string& file) {
  auto parent = std::filesystem::path(file).parent_path();
  return parent.string();
}

std::string resolve_relative(const std::string& base_file, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p.lexically_normal().string();
  auto dir = directory_of(base_file);
  if (dir.empty()) return p.lexically_normal().string();
  return (std::filesystem::path(dir) / p).lexically_normal().string();
}

void parse_source(ParseSession& session, std::string_view text, const std::string& file);

class Parser {
 public:
  Parser(ParseSession& session, std::vector<Token> toks, std::string file)
      : s_(session), toks_(std::move(toks)), file_(std::move(file)) {}

  void run() {
    while (!at(Tok::End)) {
      std::size_t start = pos_;
      try {
        statement();
      } catch (const SyntaxFailure&) {
        resync();
      }
      if (pos_ == start) ++pos_;  // always make progress
    }
  }

  // Standalone entry points used by parse_pattern/parse_role_ref.
  Pattern standalone_pattern() {
    Pattern p = pattern();
    if (at(Tok::Dot)) next();
    expect(Tok::End, "end of pattern");
    return p;
  }

 private:
  ParseSession& s_;
  std::vector<Token> toks_;
  std::string file_;
  std::size_t pos_ = 0;

  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(std::size_t n = 1) const {
    return toks_[std::min(pos_ + n, toks_.size() - 1)];
  }
  bool at(Tok k) const { return cur().kind == k; }
  bool at_word(std::string_view w) const { return at(Tok::Ident) && cur().text == w; }
  Token next() {
    Token t = cur();
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }

  SourceSpan span_of(const Token& a, const Token& b) const {
    return SourceSpan{file_, a.line, a.col, b.end_line, b.end_col};
  }
  SourceSpan span_from(std::size_t start) const {
    const Token& a = toks_[start];
    const Token& b = toks_[pos_ > start ? pos_ - 1 : start];
    return span_of(a, b);
  }

  [[noreturn]] void fail(const std::string& msg) {
    const Token& t = cur();
    std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    if (t.kind == Tok::Bad) found = t.text == "unterminated string" ? t.text : "'" + t.text + "'";
    s_.diags.push_back({Severity::Error, "SyntaxError", msg + ", found " + found, span_of(t, t)});
    throw SyntaxFailure{};
  }

  Token expect(Tok k, const std::string& what) {
    if (!at(k)) fail(std::string("expected ") + what + " (" + tok_name(k) + ")");
    return next();
  }
  void expect_word(std::string_view w) {
    if (!at_word(w)) fail("expected '" + std::string(w) + "'");
    next();
  }

  void resync() {
    while (!at(Tok::End) && !at(Tok::Dot)) next();
    if (at(Tok::Dot)) next();
  }

  void record_span(const std::string& key, std::size_t start) {
    s_.model.spans.emplace(key, span_from(start));
  }

  // --- terms & patterns ----------------------------------------------------

  Term term() {
    const Token& t = cur();
    switch (t.kind) {
      case Tok::Var: return Term::var(next().text);
      case Tok::Ident: return Term::constant(next().text);
      case Tok::Int: return Term::constant(next().text);
      case Tok::Wild: next(); return Term::wildcard();
      default: fail("expected a term");
    }
  }

  Pattern pattern() {
    std::size_t start = pos_;
    Pattern p;
    p.name = expect(Tok::Ident, "a name").text;
    if (at(Tok::LParen)) {
      next();
      if (!at(Tok::RParen)) {
        p.args.push_back(term());
        while (at(Tok::Comma)) {
          next();
          p.args.push_back(term());
        }
      }
      expect(Tok::RParen, "')'");
    }
    p.span = span_from(start);
    return p;
  }

  /// `role(Holder, name(args))` flattened to role(Holder, name, args...).
  Pattern role_effect() {
    std::size_t start = pos_;
    expect_word("role");
    expect(Tok::LParen, "'('");
    Term holder = term();
    expect(Tok::Comma, "','");
    Pattern r = pattern();
    expect(Tok::RParen, "')'");
    Pattern p;
    p.name = std::string(kRolePredicate);
    p.args.push_back(holder);
    p.args.push_back(Term::constant(r.name));
    p.args.insert(p.args.end(), r.args.begin(), r.args.end());
    p.span = span_from(start);
    return p;
  }

  ParamSort sort() {
    ParamSort s;
    if (at_word("info") && peek().kind != Tok::LParen) {
      next();
      s.kind = ParamSort::Kind::Info;
    } else if (at_word("purpose") && peek().kind != Tok::LParen) {
      next();
      s.kind = ParamSort::Kind::Purpose;
    } else {
      s.kind = ParamSort::Kind::Role;
      s.role = pattern();
    }
    return s;
  }

  Param param() {
    Param p;
    p.var = expect(Tok::Var, "a parameter variable").text;
    expect(Tok::Colon, "':'");
    p.sort = sort();
    return p;
  }

  std::vector<Param> param_list() {
    std::vector<Param> out;
    expect(Tok::LParen, "'('");
    if (!at(Tok::RParen)) {
      out.push_back(param());
      while (at(Tok::Comma)) {
        next();
        out.push_back(param());
      }
    }
    expect(Tok::RParen, "')'");
    return out;
  }

  RoleRef role_ref() {
    Pattern p = pattern();
    RoleRef r{p.name, {}};
    for (const Term& t : p.args) {
      if (!t.is_const()) {
        s_.diags.push_back({Severity::Error, "SyntaxError",
                            "role arguments of an entity must be entity names", p.span});
        throw SyntaxFailure{};
      }
      r.args.push_back(t.text);
    }
    return r;
  }

  // --- conditions ----------------------------------------------------------

  Condition condition() {
    std::vector<Condition> parts{conjunction()};
    while (at_word("or")) {
      next();
      parts.push_back(conjunction());
    }
    if (parts.size() == 1) return std::move(parts.front());
    Condition c;
    c.kind = Condition::Kind::Or;
    c.children = std::move(parts);
    return c;
  }

  Condition conjunction() {
    std::vector<Condition> parts{unary()};
    while (at_word("and")) {
      next();
      parts.push_back(unary());
    }
    if (parts.size() == 1) return std::move(parts.front());
    Condition c;
    c.kind = Condition::Kind::And;
    c.children = std::move(parts);
    return c;
  }

  Condition comparison(Term lhs) {
    Condition c;
    if (at(Tok::Eq))
      c.kind = Condition::Kind::Equal;
    else if (at(Tok::Neq))
      c.kind = Condition::Kind::NotEqual;
    else
      fail("expected '=' or '!='");
    next();
    c.terms = {std::move(lhs), term()};
    return c;
  }

  Condition unary() {
    if (at_word("not")) {
      next();
      return Condition::negate(unary());
    }
    if (at(Tok::LParen)) {
      next();
      Condition c = condition();
      expect(Tok::RParen, "')'");
      return c;
    }
    if (at_word("true") && peek().kind != Tok::LParen && peek().kind != Tok::Eq &&
        peek().kind != Tok::Neq) {
      next();
      return Condition::always();
    }
    if (at_word("false") && peek().kind != Tok::LParen && peek().kind != Tok::Eq &&
        peek().kind != Tok::Neq) {
      next();
      return Condition::never_();
    }
    if (at_word("exists") && peek().kind == Tok::Var) {
      next();
      Condition c;
      c.kind = Condition::Kind::Exists;
      c.var = next().text;
      expect(Tok::Colon, "':'");
      c.sort = sort();
      expect(Tok::LBrace, "'{'");
      c.children.push_back(condition());
      expect(Tok::RBrace, "'}'");
      return c;
    }
    if (at(Tok::Var) || at(Tok::Wild) || at(Tok::Int)) return comparison(term());
    if (!at(Tok::Ident)) fail("expected a condition");
    if (peek().kind == Tok::Eq || peek().kind == Tok::Neq) return comparison(term());

    const std::string name = cur().text;
    Condition c;
    if (name == "role" || name == "compatible") {
      next();
      c.kind = name == "role" ? Condition::Kind::RoleHolds : Condition::Kind::Compatible;
      expect(Tok::LParen, "'('");
      c.terms.push_back(term());
      expect(Tok::Comma, "','");
      c.atoms.push_back(pattern());
      expect(Tok::RParen, "')'");
      return c;
    }
    if (name == "subsumes") {
      next();
      c.kind = Condition::Kind::Subsumes;
      expect(Tok::LParen, "'('");
      c.terms.push_back(term());
      expect(Tok::Comma, "','");
      c.terms.push_back(term());
      expect(Tok::RParen, "')'");
      return c;
    }
    if (name == "occurred" || name == "occurred_before" || name == "earlier") {
      next();
      c.kind = name == "occurred"          ? Condition::Kind::Occurred
               : name == "occurred_before" ? Condition::Kind::OccurredBefore
                                           : Condition::Kind::Earlier;
      expect(Tok::LParen, "'('");
      c.atoms.push_back(pattern());
      if (c.kind != Condition::Kind::Occurred) {
        expect(Tok::Comma, "','");
        c.atoms.push_back(pattern());
      }
      expect(Tok::RParen, "')'");
      return c;
    }
    return Condition::holds(pattern());
  }

  // --- statements ----------------------------------------------------------

  void statement() {
    if (!at(Tok::Ident)) fail("expected a statement keyword");
    const std::string kw = cur().text;
    if (kw == "include") return include_stmt();
    if (kw == "entity") return entity_stmt();
    if (kw == "fact") return fact_stmt();
    if (s_.mode == Mode::Policy) {
      if (kw == "role") return role_stmt();
      if (kw == "info") return info_stmt();
      if (kw == "purpose") return purpose_stmt();
      if (kw == "pred") return pred_stmt();
      if (kw == "action") return action_stmt();
      if (kw == "clause") return clause_stmt();
      if (kw == "template") return template_stmt();
    } else {
      if (kw == "domain") return domain_stmt();
      if (kw == "horizon") return horizon_stmt();
      if (kw == "must" || kw == "never" || kw == "target") return pattern_stmt();
      if (kw == "goal") return goal_stmt();
      if (kw == "limit") return limit_stmt();
      if (kw == "option") return option_stmt();
      if (kw == "combination") return combination_stmt();
      if (kw == "name") return name_stmt();
    }
    fail(std::string("unknown ") + (s_.mode == Mode::Policy ? "policy" : "query") +
         " statement '" + kw + "'");
  }

  void end_stmt() { expect(Tok::Dot, "'.' ending the statement"); }

  void include_stmt() {
    std::size_t start = pos_;
    next();
    std::string path = expect(Tok::String, "an include path").text;
    end_stmt();
    SourceSpan span = span_from(start);
    std::string resolved = resolve_relative(file_, path);
    if (std::find(s_.include_stack.begin(), s_.include_stack.end(), resolved) !=
        s_.include_stack.end()) {
      s_.diags.push_back({Severity::Error, "IncludeCycle", "include cycle through '" + path + "'",
                          span});
      return;
    }
    if (s_.included.count(resolved)) return;
    auto text = s_.loader(resolved);
    if (!text) {
      s_.diags.push_back(
          {Severity::Error, "IncludeNotFound", "cannot read included file '" + path + "'", span});
      return;
    }
    parse_source(s_, *text, resolved);
  }

  void role_stmt() {
    std::size_t start = pos_;
    next();
    RoleDecl d;
    d.name = expect(Tok::Ident, "a role name").text;
    if (at(Tok::LParen)) d.params = param_list();
    if (at(Tok::Lt)) {
      next();
      d.parents.push_back(pattern());
      while (at(Tok::Comma)) {
        next();
        d.parents.push_back(pattern());
      }
    }
    if (at(Tok::LBracket)) {
      next();
      do {
        if (at(Tok::Comma)) next();
        Token tag = expect(Tok::Ident, "a role tag");
        if (tag.text == "person_like")
          d.person_like = true;
        else if (tag.text == "organization_like")
          d.organization_like = true;
        else if (tag.text == "assumable")
          d.assumable = true;
        else
          s_.diags.push_back({Severity::Error, "UnknownTag", "unknown role tag '" + tag.text + "'",
                              span_of(tag, tag)});
      } while (at(Tok::Comma));
      expect(Tok::RBracket, "']'");
    }
    end_stmt();
    record_span("role:" + d.name, start);
    s_.model.roles.push_back(std::move(d));
  }

  void info_stmt() {
    std::size_t start = pos_;
    next();
    InfoDecl d;
    d.name = expect(Tok::Ident, "an information type name").text;
    if (at(Tok::Lt)) {
      next();
      d.parent = expect(Tok::Ident, "a parent information type").text;
    }
    if (at(Tok::String)) d.label = next().text;
    end_stmt();
    record_span("info:" + d.name, start);
    s_.model.infos.push_back(std::move(d));
  }

  void purpose_stmt() {
    std::size_t start = pos_;
    next();
    PurposeDecl d;
    d.name = expect(Tok::Ident, "a purpose name").text;
    if (at(Tok::String)) d.label = next().text;
    end_stmt();
    record_span("purpose:" + d.name, start);
    s_.model.purposes.push_back(std::move(d));
  }

  ValueSort value_sort() {
    Token t = expect(Tok::Ident, "an argument sort");
    if (t.text == "entity") return ValueSort::Entity;
    if (t.text == "info") return ValueSort::Info;
    if (t.text == "purpose") return ValueSort::Purpose;
    --pos_;
    fail("expected 'entity', 'info' or 'purpose'");
  }

  void pred_stmt() {
    std::size_t start = pos_;
    next();
    PredicateDecl d;
    d.name = expect(Tok::Ident, "a predicate name").text;
    if (at(Tok::LParen)) {
      next();
      if (!at(Tok::RParen)) {
        d.args.push_back(value_sort());
        while (at(Tok::Comma)) {
          next();
          d.args.push_back(value_sort());
        }
      }
      expect(Tok::RParen, "')'");
    }
    if (at(Tok::At)) {
      next();
      expect_word("time");
      d.timed = true;
    }
    end_stmt();
    record_span("pred:" + d.name, start);
    s_.model.predicates.push_back(std::move(d));
  }

  void entity_stmt() {
    std::size_t start = pos_;
    next();
    EntityDecl d;
    d.name = expect(Tok::Ident, "an entity name").text;
    if (at(Tok::Colon)) {
      next();
      d.roles.push_back(role_ref());
      while (at(Tok::Comma)) {
        next();
        d.roles.push_back(role_ref());
      }
    }
    if (at(Tok::String)) d.label = next().text;
    end_stmt();
    record_span("entity:" + d.name, start);
    if (s_.mode == Mode::Policy)
      s_.model.entities.push_back(std::move(d));
    else
      s_.query.entities.push_back(std::move(d));
  }

  void fact_stmt() {
    std::size_t start = pos_;
    next();
    Pattern p = at_word("role") && peek().kind == Tok::LParen ? role_effect() : pattern();
    end_stmt();
    Atom a{p.name, {}};
    for (const Term& t : p.args) {
      if (!t.is_const()) {
        s_.diags.push_back({Severity::Error, "NonGroundFact", "facts must be ground", p.span});
        return;
      }
      a.args.push_back(t.text);
    }
    record_span("fact:" + a.str(), start);
    if (s_.mode == Mode::Policy)
      s_.model.facts.push_back(std::move(a));
    else
      s_.query.facts.push_back(std::move(a));
  }

  std::vector<Pattern> effect_list() {
    std::vector<Pattern> out;
    do {
      if (at(Tok::Comma)) next();
      if (at_word("role") && peek().kind == Tok::LParen)
        out.push_back(role_effect());
      else
        out.push_back(pattern());
    } while (at(Tok::Comma));
    return out;
  }

  void action_stmt() {
    std::size_t start = pos_;
    next();
    ActionSchema a;
    a.name = expect(Tok::Ident, "an action name").text;
    a.params = at(Tok::LParen) ? param_list() : std::vector<Param>{};
    bool have_pre = false;
    while (!at(Tok::Dot)) {
      if (at_word("agents")) {
        next();
        a.participants.push_back(expect(Tok::Var, "a participant variable").text);
        while (at(Tok::Comma)) {
          next();
          a.participants.push_back(expect(Tok::Var, "a participant variable").text);
        }
      } else if (at_word("pre")) {
        next();
        if (have_pre) fail("duplicate 'pre' section");
        have_pre = true;
        a.precondition = condition();
      } else if (at_word("initiates")) {
        next();
        auto e = effect_list();
        a.initiates.insert(a.initiates.end(), e.begin(), e.end());
      } else if (at_word("terminates")) {
        next();
        auto e = effect_list();
        a.terminates.insert(a.terminates.end(), e.begin(), e.end());
      } else if (at_word("transmits")) {
        next();
        TransmissionProfile t;
        expect_word("from");
        t.sender = expect(Tok::Var, "the sender variable").text;
        expect_word("to");
        t.receiver = expect(Tok::Var, "the receiver variable").text;
        expect_word("about");
        t.subject = expect(Tok::Var, "the subject variable").text;
        expect_word("info");
        t.info = expect(Tok::Var, "the info variable").text;
        expect_word("for");
        t.purpose = term();
        a.transmission = std::move(t);
      } else {
        fail("expected an action section (agents, pre, initiates, terminates, transmits) or '.'");
      }
    }
    end_stmt();
    record_span("action:" + a.name, start);
    s_.model.actions.push_back(std::move(a));
  }

  void clause_stmt() {
    std::size_t start = pos_;
    next();
    Clause c;
    c.id = expect(Tok::String, "a clause id string").text;
    if (at(Tok::String)) c.excerpt = next().text;
    expect_word("category");
    expect(Tok::Colon, "':'");
    bool seen[5] = {false, false, false, false, false};
    do {
      if (at(Tok::Comma)) next();
      Token part = expect(Tok::Ident, "a category part");
      auto role_part = [&](Symbol& var, Pattern& role) {
        var = expect(Tok::Var, "a variable").text;
        expect(Tok::Colon, "':'");
        role = pattern();
      };
      if (part.text == "sender") {
        role_part(c.category.sender_var, c.category.sender_role);
        seen[0] = true;
      } else if (part.text == "receiver") {
        role_part(c.category.receiver_var, c.category.receiver_role);
        seen[1] = true;
      } else if (part.text == "subject") {
        role_part(c.category.subject_var, c.category.subject_role);
        seen[2] = true;
      } else if (part.text == "info") {
        c.category.info_var = expect(Tok::Var, "the info variable").text;
        expect(Tok::Le, "'<='");
        c.category.info_bound = expect(Tok::Ident, "an information type").text;
        seen[3] = true;
      } else if (part.text == "purpose") {
        c.category.purpose = term();
        seen[4] = true;
      } else {
        --pos_;
        fail("expected sender, receiver, subject, info or purpose");
      }
    } while (at(Tok::Comma));
    if (!std::all_of(std::begin(seen), std::end(seen), [](bool b) { return b; })) {
      s_.diags.push_back({Severity::Error, "IncompleteCategory",
                          "clause '" + c.id +
                              "' category must give sender, receiver, subject, info and purpose",
                          span_from(start)});
    }
    while (!at(Tok::Dot)) {
      if (at_word("exception")) {
        next();
        expect(Tok::Colon, "':'");
        c.exception = condition();
      } else if (at_word("requirement")) {
        next();
        expect(Tok::Colon, "':'");
        c.requirement = condition();
      } else if (at_word("obligation")) {
        next();
        expect(Tok::Colon, "':'");
        do {
          if (at(Tok::Comma)) next();
          ObligationSpec o;
          o.required = pattern();
          if (at_word("within")) {
            next();
            o.within = std::stoi(expect(Tok::Int, "a step count").text);
          } else if (at_word("by")) {
            next();
            expect_word("horizon");
          }
          c.obligations.push_back(std::move(o));
        } while (at(Tok::Comma));
      } else {
        fail("expected exception, requirement, obligation or '.'");
      }
    }
    end_stmt();
    record_span("clause:" + c.id, start);
    s_.model.clauses.push_back(std::move(c));
  }

  void template_stmt() {
    std::size_t start = pos_;
    next();
    Template t;
    t.action = expect(Tok::Ident, "an action name").text;
    t.text = expect(Tok::String, "template text").text;
    end_stmt();
    record_span("template:" + t.action, start);
    s_.model.templates.push_back(std::move(t));
  }

  // --- query statements ----------------------------------------------------

  std::vector<Symbol> name_list() {
    std::vector<Symbol> out;
    out.push_back(expect(Tok::Ident, "a name").text);
    while (at(Tok::Comma)) {
      next();
      out.push_back(expect(Tok::Ident, "a name").text);
    }
    return out;
  }

  void domain_stmt() {
    next();
    Token which = expect(Tok::Ident, "'info' or 'purpose'");
    expect(Tok::Colon, "':'");
    auto names = name_list();
    end_stmt();
    std::optional<std::vector<Symbol>>* slot = nullptr;
    if (which.text == "info")
      slot = &s_.query.infos;
    else if (which.text == "purpose")
      slot = &s_.query.purposes;
    else {
      s_.diags.push_back({Severity::Error, "SyntaxError",
                          "domain statement must name 'info' or 'purpose'", span_of(which, which)});
      return;
    }
    if (!*slot) *slot = std::vector<Symbol>{};
    for (auto& n : names)
      if (std::find((*slot)->begin(), (*slot)->end(), n) == (*slot)->end())
        (*slot)->push_back(n);
  }

  int positive_int(const char* what) {
    Token t = expect(Tok::Int, what);
    int v = 0;
    try {
      v = std::stoi(t.text);
    } catch (...) {
      v = 0;
    }
    if (v < 1) {
      s_.diags.push_back(
          {Severity::Error, "InvalidValue", std::string(what) + " must be >= 1", span_of(t, t)});
      throw SyntaxFailure{};
    }
    return v;
  }

  void horizon_stmt() {
    next();
    s_.query.horizon = positive_int("horizon");
    end_stmt();
  }

  void pattern_stmt() {
    std::string kw = next().text;
    Pattern p = pattern();
    end_stmt();
    if (kw == "must")
      s_.query.must.push_back(std::move(p));
    else if (kw == "never")
      s_.query.never.push_back(std::move(p));
    else
      s_.query.targets.push_back(std::move(p));
  }

  void goal_stmt() {
    next();
    Symbol actor = expect(Tok::Ident, "an actor name").text;
    expect(Tok::Colon, "':'");
    auto& goals = s_.query.goals[actor];
    goals.push_back(pattern());
    while (at(Tok::Comma)) {
      next();
      goals.push_back(pattern());
    }
    end_stmt();
  }

  void limit_stmt() {
    next();
    Token which = expect(Tok::Ident, "'narratives', 'blocks' or 'timeout'");
    int v = positive_int("limit");
    end_stmt();
    if (which.text == "narratives")
      s_.query.max_narratives = static_cast<std::size_t>(v);
    else if (which.text == "blocks")
      s_.query.max_blocks = static_cast<std::size_t>(v);
    else if (which.text == "timeout")
      s_.query.timeout_ms = v;
    else
      s_.diags.push_back({Severity::Error, "SyntaxError", "unknown limit '" + which.text + "'",
                          span_of(which, which)});
  }

  void option_stmt() {
    next();
    Token which = expect(Tok::Ident, "an option name");
    bool on = true;
    if (at_word("on") || at_word("off")) on = next().text == "on";
    end_stmt();
    if (which.text == "report_blocked")
      s_.query.report_blocked = on;
    else if (which.text == "require_compliant")
      s_.query.require_compliant = on;
    else if (which.text == "allow_noncompliant")
      s_.query.require_compliant = !on;
    else if (which.text == "intentionality")
      s_.query.intentionality = on;
    else
      s_.diags.push_back({Severity::Error, "SyntaxError", "unknown option '" + which.text + "'",
                          span_of(which, which)});
  }

  void combination_stmt() {
    next();
    Token which = expect(Tok::Ident, "'strict' or 'permissive'");
    end_stmt();
    if (which.text == "strict")
      s_.query.combination = Combination::Strict;
    else if (which.text == "permissive")
      s_.query.combination = Combination::Permissive;
    else
      s_.diags.push_back({Severity::Error, "SyntaxError",
                          "combination must be 'strict' or 'permissive'", span_of(which, which)});
  }

  void name_stmt() {
    next();
    s_.query.name = expect(Tok::String, "a query name").text;
    end_stmt();
  }
};

void parse_source(ParseSession& session, std::string_view text, const std::string& file) {
  session.include_stack.push_back(file);
  session.included.insert(file);
  Parser(session, lex(text), file).run();
  session.include_stack.pop_back();
}

}  // namespace

SourceLoader filesystem_loader() {
  return [](const std::string& path) -> std::optional<std::string> {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
}

SourceLoader no_include_loader() {
  return [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
}

namespace {

Parsed<PolicyModel> finish_policy(ParseSession& session) {
  Parsed<PolicyModel> out;
  if (has_errors(session.diags)) {
    out.diagnostics = std::move(session.diags);
    return out;
  }
  session.model.reindex();
  auto diags = validate(session.model);
  out.diagnostics = std::move(diags);
  if (!has_errors(out.diagnostics)) out.value = std::move(session.model);
  return out;
}

}  // namespace

Parsed<PolicyModel> parse_policy(std::string_view text, const std::string& file,
                                 const SourceLoader& loader) {
  ParseSession session{Mode::Policy, loader, {}, {}, {}, {}, {}};
  parse_source(session, text, file);
  return finish_policy(session);
}

Parsed<PolicyModel> parse_policy_files(const std::vector<std::string>& paths,
                                       const SourceLoader& loader) {
  ParseSession session{Mode::Policy, loader, {}, {}, {}, {}, {}};
  for (const auto& raw : paths) {
    std::string path = std::filesystem::path(raw).lexically_normal().string();
    if (session.included.count(path)) continue;
    auto text = loader(path);
    if (!text) {
      session.diags.push_back({Severity::Error, "FileNotFound", "cannot read '" + raw + "'",
                               SourceSpan{raw, 1, 1, 1, 1}});
      continue;
    }
    parse_source(session, *text, path);
  }
  return finish_policy(session);
}

Parsed<QuerySpec> parse_query(std::string_view text, const PolicyModel& model,
                              const std::string& file, const SourceLoader& loader) {
  ParseSession session{Mode::Query, loader, {}, {}, {}, {}, {}};
  parse_source(session, text, file);
  Parsed<QuerySpec> out;
  if (has_errors(session.diags)) {
    out.diagnostics = std::move(session.diags);
    return out;
  }
  out.diagnostics = validate_query(session.query, model);
  for (auto& d : out.diagnostics)
    if (d.span.file.empty()) d.span.file = file;
  if (!has_errors(out.diagnostics)) out.value = std::move(session.query);
  return out;
}

Parsed<QuerySpec> parse_query_file(const std::string& path, const PolicyModel& model,
                                   const SourceLoader& loader) {
  auto text = loader(path);
  if (!text) {
    Parsed<QuerySpec> out;
    out.diagnostics.push_back({Severity::Error, "FileNotFound", "cannot read '" + path + "'",
                               SourceSpan{path, 1, 1, 1, 1}});
    return out;
  }
  auto parsed = parse_query(*text, model, path, loader);
  if (parsed.value && parsed.value->name.empty())
    parsed.value->name = std::filesystem::path(path).stem().string();
  return parsed;
}

Parsed<Pattern> parse_pattern(std::string_view text) {
  ParseSession session{Mode::Query, no_include_loader(), {}, {}, {}, {}, {}};
  Parsed<Pattern> out;
  Parser parser(session, lex(text), "<pattern>");
  try {
    out.value = parser.standalone_pattern();
  } catch (const SyntaxFailure&) {
  }
  out.diagnostics = std::move(session.diags);
  if (has_errors(out.diagnostics)) out.value.reset();
  return out;
}

Parsed<RoleRef> parse_role_ref(std::string_view text) {
  Parsed<RoleRef> out;
  auto p = parse_pattern(text);
  out.diagnostics = std::move(p.diagnostics);
  if (!p.value) return out;
  RoleRef r{p.value->name, {}};
  for (const Term& t : p.value->args) {
    if (!t.is_const()) {
      out.diagnostics.push_back({Severity::Error, "NonGroundRole",
                                 "role reference must be ground: " + std::string(text),
                                 p.value->span});
      return out;
    }
    r.args.push_back(t.text);
  }
  out.value = std::move(r);
  return out;
}

std::string format_diagnostic(const Diagnostic& d) {
  std::ostringstream ss;
  ss << d.span.file << ':' << d.span.line_start << ':' << d.span.col_start << ": "
     << (d.severity == Severity::Warning ? "warning " : "") << d.code << ": " << d.message;
  return ss.str();
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

}  // namespace polnarr
