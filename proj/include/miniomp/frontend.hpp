#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "miniomp/ast.hpp"
#include "miniomp/diagnostics.hpp"

namespace miniomp {

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

enum class TokenKind {
  Identifier,
  IntLiteral,
  FloatLiteral,
  StringLiteral,
  Keyword,
  Operator,
  Punctuation,
  DirectiveComment,
  EndOfFile,
};

std::string_view to_string(TokenKind kind);

inline constexpr std::string_view kDirectiveSentinel = "//#omp";

struct Token {
  TokenKind kind;
  std::string text;  // exact source spelling (string literals keep their quotes)
  int line = 1;
  int column = 1;
  std::size_t offset = 0;  // byte offset of text within the source

  SourcePos pos() const { return {line, column}; }
};

/// Split MK source into tokens. Whitespace and plain `//` comments are
/// dropped; `//#omp` comments survive as one DirectiveComment token each.
/// Throws CompileError(LexError).
std::vector<Token> tokenize(std::string_view source);

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Build a Program from a token stream ending in EndOfFile. Directive comments
/// attach to the next statement of the same block. Throws CompileError with a
/// ParseError, or with every DanglingDirective found.
Program parse(std::span<const Token> tokens);

/// tokenize + parse.
Program parse_source(std::string_view source);

/// Type-check and name-resolve a parsed program. Reports every TypeError at
/// once. Does not look inside directive text.
void analyze(const Program& program);

/// tokenize + parse + analyze.
Program load_program(std::string_view source);

/// Copy of the program with every attached directive removed.
Program strip_directives(const Program& program);

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

/// MK source text that reparses to a structurally identical program,
/// directives included.
std::string pretty_print(const Program& program);

/// Indented structural dump (no positions). Two programs are structurally
/// identical iff their dumps are equal.
std::string dump_ast(const Program& program);
std::string dump_stmt(const Stmt& stmt, int indent = 0);

/// MK source spelling of a single expression.
std::string expr_to_source(const Expr& e);

/// Shortest round-trip spelling of a double, always containing '.' or 'e'
/// when finite.
std::string format_float(double v);

// ---------------------------------------------------------------------------
// Typing rules shared by the checker, the lowering pass and the engine
// ---------------------------------------------------------------------------

/// Result type of `lhs op rhs`, or nullopt if the operands are ill-typed.
/// int op float widens to float.
std::optional<Type> binary_result_type(BinaryOp op, Type lhs, Type rhs);
std::optional<Type> unary_result_type(UnaryOp op, Type operand);

/// True if a value of type `from` may initialize/assign/pass as `to`.
bool assignable(Type to, Type from);

bool is_builtin(std::string_view name);
/// Builtins with no side effects and no dependence on team state; only these
/// may appear in worksharing loop bounds.
bool is_pure_builtin(std::string_view name);
/// Result type of builtin `name` applied to `args`, or nullopt if ill-typed.
std::optional<Type> builtin_result_type(std::string_view name, std::span<const Type> args);

}  // namespace miniomp
