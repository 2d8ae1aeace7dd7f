#include "miniomp/diagnostics.hpp"

#include <algorithm>

namespace miniomp {

std::string_view to_string(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::LexError: return "LexError";
    case DiagnosticKind::ParseError: return "ParseError";
    case DiagnosticKind::DanglingDirective: return "DanglingDirective";
    case DiagnosticKind::TypeError: return "TypeError";
    case DiagnosticKind::DirectiveSyntaxError: return "DirectiveSyntaxError";
    case DiagnosticKind::ConflictingSharing: return "ConflictingSharing";
    case DiagnosticKind::NotALoop: return "NotALoop";
    case DiagnosticKind::NonCanonicalLoop: return "NonCanonicalLoop";
    case DiagnosticKind::UnknownVariable: return "UnknownVariable";
    case DiagnosticKind::OrphanedWorksharing: return "OrphanedWorksharing";
    case DiagnosticKind::InvalidTarget: return "InvalidTarget";
    case DiagnosticKind::InvalidReduction: return "InvalidReduction";
  }
  return "Unknown";
}

std::string format_diagnostic(const Diagnostic& d) {
  std::string out = std::to_string(d.pos.line) + ":" + std::to_string(d.pos.column) +
                    ": error: " + std::string(to_string(d.kind)) + ": " + d.message;
  return out;
}

namespace {

std::string join_messages(const std::vector<Diagnostic>& ds) {
  std::string out;
  for (const auto& d : ds) {
    if (!out.empty()) out += '\n';
    out += format_diagnostic(d);
  }
  return out;
}

std::vector<Diagnostic> sorted(std::vector<Diagnostic> ds) {
  std::stable_sort(ds.begin(), ds.end(),
                   [](const Diagnostic& a, const Diagnostic& b) { return a.pos < b.pos; });
  return ds;
}

}  // namespace

CompileError::CompileError(Diagnostic d) : CompileError(std::vector<Diagnostic>{std::move(d)}) {}

CompileError::CompileError(std::vector<Diagnostic> ds)
    : std::runtime_error(join_messages(sorted(ds))), diagnostics_(sorted(std::move(ds))) {}

std::string_view to_string(TrapKind kind) {
  switch (kind) {
    case TrapKind::OutOfBounds: return "OutOfBounds";
    case TrapKind::DivisionByZero: return "DivisionByZero";
    case TrapKind::IntegerOverflow: return "IntegerOverflow";
    case TrapKind::InvalidLoop: return "InvalidLoop";
    case TrapKind::InvalidConversion: return "InvalidConversion";
    case TrapKind::InvalidArrayLength: return "InvalidArrayLength";
    case TrapKind::MissingReturn: return "MissingReturn";
    case TrapKind::UnresolvedExtern: return "UnresolvedExtern";
    case TrapKind::ExternFailure: return "ExternFailure";
  }
  return "Unknown";
}

Trap::Trap(TrapKind kind, std::string message, SourcePos pos)
    : std::runtime_error(std::move(message)), kind_(kind), pos_(pos) {}

UnresolvedExtern::UnresolvedExtern(std::string symbol, SourcePos pos)
    : Trap(TrapKind::UnresolvedExtern, "unresolved extern symbol '" + symbol + "'", pos),
      symbol_(std::move(symbol)) {}

}  // namespace miniomp
