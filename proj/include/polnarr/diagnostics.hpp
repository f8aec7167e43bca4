#pragma once

#include <optional>
#include <string>
#include <vector>

#include "polnarr/core_model.hpp"

namespace polnarr {

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string code;
  std::string message;
  SourceSpan span;
};

/// `file:line:col: code: message`
std::string format_diagnostic(const Diagnostic& d);
bool has_errors(const std::vector<Diagnostic>& diags);

/// A value or the diagnostics explaining why there is none. Warnings may
/// accompany a value.
template <typename T>
struct Parsed {
  std::optional<T> value;
  std::vector<Diagnostic> diagnostics;

  explicit operator bool() const { return value.has_value(); }
};

}  // namespace polnarr
