#pragma once

// Helpers shared by the test suites and the acceptance runner.

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <string>
#include <vector>

#include "polnarr/dsl.hpp"
#include "polnarr/pack.hpp"
#include "polnarr/serialize.hpp"

namespace polnarr::testing {

inline std::string data_path(const std::string& name) {
  return (std::filesystem::path(POLNARR_TEST_DATA) / name).string();
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string diag_text(const std::vector<Diagnostic>& ds) {
  std::string out;
  for (const auto& d : ds) out += format_diagnostic(d) + "\n";
  return out;
}

/// Parse inline policy text; throws with the diagnostics on failure.
inline PolicyModel policy(std::string_view text) {
  auto p = parse_policy(text, "<test>", no_include_loader());
  if (!p) throw std::runtime_error("policy does not parse:\n" + diag_text(p.diagnostics));
  return std::move(*p.value);
}

inline QuerySpec query(std::string_view text, const PolicyModel& model) {
  auto q = parse_query(text, model, "<test>", no_include_loader());
  if (!q) throw std::runtime_error("query does not parse:\n" + diag_text(q.diagnostics));
  return std::move(*q.value);
}

inline const Pack& hipaa() {
  static const Pack pack = load_builtin_pack();
  return pack;
}

inline QuerySpec hipaa_query(const std::string& stem) {
  auto q = parse_query_file((std::filesystem::path(hipaa().dir) / (stem + ".pq")).string(),
                            hipaa().model);
  if (!q) throw std::runtime_error(stem + " does not parse:\n" + diag_text(q.diagnostics));
  return std::move(*q.value);
}

inline std::vector<std::string> keys(const std::vector<EventInstance>& evs) {
  std::vector<std::string> out;
  for (const auto& e : evs) out.push_back(std::to_string(e.time) + ":" + e.str());
  return out;
}

/// Event sequences of a solve result, one string per narrative.
inline std::vector<std::string> sequence_keys(const SolveResult& r) {
  std::vector<std::string> out;
  for (const auto& n : r.narratives) {
    std::string k;
    for (const auto& s : keys(n.event_instances())) k += s + ";";
    out.push_back(k);
  }
  return out;
}

struct ProcessResult {
  int exit_code = -1;
  std::string out;
};

/// Run a shell command, capturing stdout. stderr goes to /dev/null unless
/// the command redirects it.
inline ProcessResult run_command(const std::string& cmd) {
  ProcessResult r;
  const bool redirects = cmd.find("2>") != std::string::npos;
  FILE* pipe = popen((redirects ? cmd : cmd + " 2>/dev/null").c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string cli(const std::string& args) {
  return std::string("'") + POLNARR_CLI + "' " + args;
}

}  // namespace polnarr::testing
