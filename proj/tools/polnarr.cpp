// polnarr command line: check | solve | audit | serve.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "polnarr/dsl.hpp"
#include "polnarr/pack.hpp"
#include "polnarr/serialize.hpp"
#include "polnarr/service.hpp"

namespace fs = std::filesystem;
using namespace polnarr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDiagnostics = 1;
constexpr int kExitNoResults = 2;
constexpr int kExitNonCompliant = 3;
constexpr int kExitUsage = 64;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void print_diagnostics(const std::vector<Diagnostic>& ds) {
  for (const auto& d : ds) std::cerr << format_diagnostic(d) << "\n";
}

struct PolicySource {
  std::string pack;
  std::vector<std::string> files;
  std::string dir;  // pack directory, for resolving query files

  void add_options(CLI::App* cmd) {
    cmd->add_option("--pack", pack, "Policy pack name or directory (e.g. hipaa)");
    cmd->add_option("--policy", files, "Policy file(s)");
  }

  /// Load or print diagnostics and return nullopt.
  std::optional<PolicyModel> load() {
    if (pack.empty() == files.empty())
      throw UsageError("give exactly one of --pack or --policy");
    if (!pack.empty()) {
      dir = pack_dir(pack);
      if (!fs::is_directory(dir)) {
        std::cerr << dir << ": UnknownPack: no such pack directory\n";
        return std::nullopt;
      }
      try {
        Pack p = load_pack(dir);
        print_diagnostics(p.warnings);
        return std::move(p.model);
      } catch (const DocumentError& e) {
        print_diagnostics(e.diagnostics);
        std::cerr << dir << ": " << e.code() << ": " << e.what() << "\n";
      } catch (const ModelError& e) {
        std::cerr << dir << ": " << e.code() << ": " << e.what() << "\n";
      }
      return std::nullopt;
    }
    auto parsed = parse_policy_files(files);
    print_diagnostics(parsed.diagnostics);
    if (!parsed) return std::nullopt;
    return std::move(*parsed.value);
  }
};

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Expand pack directories given to `check` into their policy files.
std::vector<std::string> policy_files(const std::vector<std::string>& paths,
                                      std::vector<Diagnostic>& diags) {
  std::vector<std::string> out;
  for (const auto& p : paths) {
    if (!fs::is_directory(p)) {
      out.push_back(p);
      continue;
    }
    for (const auto& f : kPackPolicyFiles) {
      fs::path file = fs::path(p) / f;
      if (fs::is_regular_file(file)) out.push_back(file.string());
      else diags.push_back({Severity::Error, "PackIncomplete", "missing " + f, SourceSpan{p}});
    }
  }
  return out;
}

int cmd_check(const std::vector<std::string>& paths, bool latent) {
  std::vector<Diagnostic> diags;
  auto files = policy_files(paths, diags);
  if (has_errors(diags)) {
    print_diagnostics(diags);
    return kExitDiagnostics;
  }
  auto parsed = parse_policy_files(files);
  print_diagnostics(parsed.diagnostics);
  if (!parsed) return kExitDiagnostics;
  const PolicyModel& m = *parsed.value;
  std::cout << "ok: " << m.roles.size() << " roles, " << m.actions.size() << " actions, "
            << m.clauses.size() << " clauses, " << m.templates.size() << " templates\n";
  if (latent) {
    Json report = Json::array();
    for (const auto& e : latent_action_audit(m)) {
      report.push_back({{"predicate", e.predicate},
                        {"initiators", e.initiators},
                        {"acquirers", e.acquirers},
                        {"terminators", e.terminators},
                        {"negated", e.negated},
                        {"gaps", e.gaps}});
    }
    std::cout << report.dump(2) << "\n";
  }
  return kExitOk;
}

struct SolveArgs {
  PolicySource source;
  std::string query_file;
  std::string query_text;
  std::optional<int> horizon;
  std::optional<std::size_t> max_narratives;
  std::optional<std::size_t> max_blocks;
  std::optional<long> timeout_ms;
  std::string format = "json";
  std::string combination;
  bool allow_noncompliant = false;
  bool report_blocked = false;
};

/// A path as given, or relative to the pack directory when only that exists.
std::string in_pack(const PolicySource& source, const std::string& path) {
  if (!fs::exists(path) && !source.dir.empty() && fs::exists(fs::path(source.dir) / path))
    return (fs::path(source.dir) / path).string();
  return path;
}

int cmd_solve(SolveArgs& a) {
  if (a.query_file.empty() == a.query_text.empty())
    throw UsageError("give exactly one of --query or --query-text");
  auto model = a.source.load();
  if (!model) return kExitDiagnostics;

  Parsed<QuerySpec> q;
  if (!a.query_file.empty()) {
    q = parse_query_file(in_pack(a.source, a.query_file), *model);
  } else {
    std::string base = a.source.dir.empty() ? "<query>" : (fs::path(a.source.dir) / "<query>").string();
    q = parse_query(a.query_text, *model, base);
  }
  print_diagnostics(q.diagnostics);
  if (!q) return kExitDiagnostics;

  SolveOverrides o;
  o.horizon = a.horizon;
  o.max_narratives = a.max_narratives;
  o.max_blocks = a.max_blocks;
  o.timeout_ms = a.timeout_ms;
  if (!a.combination.empty()) o.combination = parse_combination(a.combination);
  if (a.allow_noncompliant) o.allow_noncompliant = true;
  if (a.report_blocked) o.report_blocked = true;

  SolveRun run = run_solve(*model, *q.value, o);
  if (a.format == "json") {
    std::cout << run.document.dump(2) << "\n";
  } else if (a.format == "text") {
    std::cout << solve_text(*model, run);
  } else {
    std::cout << to_dot(*model, make_labels(*model, run.query.domain), run.graph);
  }
  if (run.result.truncated) std::cerr << "warning: search timed out; results are partial\n";
  return solve_exit_code(run);
}

int cmd_audit(PolicySource& source, const std::string& trace_path, const std::string& combination) {
  auto model = source.load();
  if (!model) return kExitDiagnostics;
  auto text = read_file(in_pack(source, trace_path));
  if (!text) {
    std::cerr << trace_path << ": FileNotFound: cannot read trace\n";
    return kExitDiagnostics;
  }
  try {
    Json j = Json::parse(*text);
    TraceFile trace = trace_from_json(j, *model);
    Combination mode = combination.empty() ? Combination::Strict : parse_combination(combination);
    TraceReport report = check_trace(*model, trace.domain, trace.events, mode);
    std::cout << to_json(report).dump(2) << "\n";
    return report.compliant ? kExitOk : kExitNonCompliant;
  } catch (const Json::parse_error& e) {
    std::cerr << trace_path << ": BadRequest: " << e.what() << "\n";
  } catch (const DocumentError& e) {
    print_diagnostics(e.diagnostics);
    std::cerr << trace_path << ": " << e.code() << ": " << e.what() << "\n";
  } catch (const ModelError& e) {
    std::cerr << trace_path << ": " << e.code() << ": " << e.what() << "\n";
  }
  return kExitDiagnostics;
}

int cmd_serve(PolicySource& source, const std::string& host, int port, ServiceConfig config) {
  Service service(std::move(config));
  if (!source.pack.empty() || !source.files.empty()) {
    auto model = source.load();
    if (!model) return kExitDiagnostics;
    std::cerr << "preloaded policy " << service.add_policy(std::move(*model), source.dir) << "\n";
  }
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!service.listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
    return kExitDiagnostics;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polnarr: explore the consequences of a policy as narratives"};
  app.require_subcommand(1);

  std::vector<std::string> check_paths;
  bool latent = false;
  auto* check = app.add_subcommand("check", "Validate policy files or pack directories");
  check->add_option("paths", check_paths, "Policy files or pack directories")->required();
  check->add_flag("--latent", latent, "Also print the latent-action coverage report");

  SolveArgs solve_args;
  auto* solve = app.add_subcommand("solve", "Enumerate narratives for a query");
  solve_args.source.add_options(solve);
  solve->add_option("--query", solve_args.query_file, "Query file (.pq); pack-relative names work");
  solve->add_option("--query-text", solve_args.query_text, "Query given inline");
  solve->add_option("--horizon", solve_args.horizon, "Override the horizon")->check(CLI::PositiveNumber);
  solve->add_option("--max-narratives", solve_args.max_narratives)->check(CLI::PositiveNumber);
  solve->add_option("--max-blocks", solve_args.max_blocks)->check(CLI::PositiveNumber);
  solve->add_option("--timeout-ms", solve_args.timeout_ms)->check(CLI::PositiveNumber);
  solve->add_option("--format", solve_args.format)->check(CLI::IsMember({"json", "text", "dot"}));
  solve->add_option("--combination", solve_args.combination)
      ->check(CLI::IsMember({"strict", "permissive"}));
  solve->add_flag("--allow-noncompliant", solve_args.allow_noncompliant,
                  "Keep narratives with non-compliant transmissions");
  solve->add_flag("--report-blocked", solve_args.report_blocked, "Explain blocked targets");

  PolicySource audit_source;
  std::string trace_path, audit_combination;
  auto* audit = app.add_subcommand("audit", "Check a recorded trace against the policy");
  audit_source.add_options(audit);
  audit->add_option("--trace", trace_path, "Trace file (JSON)")->required();
  audit->add_option("--combination", audit_combination)->check(CLI::IsMember({"strict", "permissive"}));

  PolicySource serve_source;
  std::string host = "127.0.0.1";
  int port = 8080;
  ServiceConfig config;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve_source.add_options(serve);
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(1, 65535));
  serve->add_option("--max-body", config.max_body, "Request body limit in bytes");
  serve->add_option("--timeout-ms", config.default_timeout_ms, "Default solve timeout");
  serve->add_option("--ui-dir", config.ui_dir, "Static files to serve under /");

  if (argc <= 1) {
    std::cerr << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*check) return cmd_check(check_paths, latent);
    if (*solve) return cmd_solve(solve_args);
    if (*audit) return cmd_audit(audit_source, trace_path, audit_combination);
    if (*serve) return cmd_serve(serve_source, host, port, std::move(config));
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const ModelError& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return kExitDiagnostics;
  }
  return kExitUsage;
}
