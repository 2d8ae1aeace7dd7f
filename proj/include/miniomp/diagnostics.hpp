#pragma once

#include <compare>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace miniomp {

struct SourcePos {
  int line = 1;
  int column = 1;

  auto operator<=>(const SourcePos&) const = default;
};

enum class DiagnosticKind {
  LexError,
  ParseError,
  DanglingDirective,
  TypeError,
  DirectiveSyntaxError,
  ConflictingSharing,
  NotALoop,
  NonCanonicalLoop,
  UnknownVariable,
  OrphanedWorksharing,
  InvalidTarget,
  InvalidReduction,
};

std::string_view to_string(DiagnosticKind kind);

/// A compile-time problem tied to a source position. `subject` carries the
/// offending name (variable, clause word) when one exists.
struct Diagnostic {
  DiagnosticKind kind;
  SourcePos pos;
  std::string message;
  std::string subject;
};

/// "line:column: error: <kind>: message"
std::string format_diagnostic(const Diagnostic& d);

/// Thrown by every compile phase. Phases that can keep going after an error
/// (directive validation, dangling directives) report all of them at once.
class CompileError : public std::runtime_error {
public:
  explicit CompileError(Diagnostic d);
  explicit CompileError(std::vector<Diagnostic> ds);

  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }
  const Diagnostic& first() const { return diagnostics_.front(); }

private:
  std::vector<Diagnostic> diagnostics_;
};

enum class TrapKind {
  OutOfBounds,
  DivisionByZero,
  IntegerOverflow,
  InvalidLoop,
  InvalidConversion,
  InvalidArrayLength,
  MissingReturn,
  UnresolvedExtern,
  ExternFailure,
};

std::string_view to_string(TrapKind kind);

/// A runtime fault raised while executing user code.
class Trap : public std::runtime_error {
public:
  Trap(TrapKind kind, std::string message, SourcePos pos = {});

  TrapKind kind() const noexcept { return kind_; }
  SourcePos pos() const noexcept { return pos_; }

private:
  TrapKind kind_;
  SourcePos pos_;
};

/// Raised when a program calls an extern whose resolved symbol has no
/// registered callback. `symbol()` is the mangled name that was looked up.
class UnresolvedExtern : public Trap {
public:
  UnresolvedExtern(std::string symbol, SourcePos pos = {});

  const std::string& symbol() const noexcept { return symbol_; }

private:
  std::string symbol_;
};

}  // namespace miniomp
