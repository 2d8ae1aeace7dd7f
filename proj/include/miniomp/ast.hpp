#pragma once

// Abstract syntax tree for MK, the kernel language. Nodes are immutable once
// built and held through shared_ptr<const>, so lowering can splice original
// subtrees into new trees without copying them.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "miniomp/diagnostics.hpp"

namespace miniomp {

enum class Type : std::uint8_t { Void, Int, Float, Bool, IntArray, FloatArray };

std::string_view to_string(Type t);

constexpr bool is_array(Type t) { return t == Type::IntArray || t == Type::FloatArray; }
constexpr bool is_numeric(Type t) { return t == Type::Int || t == Type::Float; }
constexpr Type element_type(Type t) { return t == Type::IntArray ? Type::Int : Type::Float; }

struct Expr;
struct Stmt;
using ExprPtr = std::shared_ptr<const Expr>;
using StmtPtr = std::shared_ptr<const Stmt>;

// ---- expressions ----

struct IntLit {
  std::int64_t value;
};
struct FloatLit {
  double value;
};
struct BoolLit {
  bool value;
};
/// Only legal as a print argument.
struct StringLit {
  std::string value;
};
struct VarRef {
  std::string name;
};
struct IndexExpr {
  std::string array;
  ExprPtr index;
};

enum class UnaryOp { Neg, Not };
struct UnaryExpr {
  UnaryOp op;
  ExprPtr operand;
};

enum class BinaryOp { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge, And, Or };
std::string_view to_string(BinaryOp op);

struct BinaryExpr {
  BinaryOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};
/// Builtin, extern or user function call.
struct CallExpr {
  std::string callee;
  std::vector<ExprPtr> args;
};

struct Expr {
  using Node = std::variant<IntLit, FloatLit, BoolLit, StringLit, VarRef, IndexExpr, UnaryExpr,
                            BinaryExpr, CallExpr>;
  SourcePos pos;
  Node node;
};

// ---- statements ----

/// A raw directive comment attached to a statement: the text after the
/// "//#omp" sentinel, and where the comment started.
struct DirectiveText {
  std::string text;
  SourcePos pos;
};

struct VarDecl {
  std::string name;
  Type type;
  ExprPtr length;  // arrays only; evaluated once at declaration
  ExprPtr init;    // scalars only; absent means zero
};
struct Assign {
  std::string name;
  ExprPtr value;
};
struct IndexAssign {
  std::string array;
  ExprPtr index;
  ExprPtr value;
};
struct IfStmt {
  ExprPtr cond;
  StmtPtr then_branch;
  StmtPtr else_branch;  // block, nested if, or null
};
struct WhileStmt {
  ExprPtr cond;
  StmtPtr body;
};
/// for var in lower..upper [step step] body
struct ForStmt {
  std::string var;
  ExprPtr lower;
  ExprPtr upper;
  ExprPtr step;  // null means 1
  StmtPtr body;
};
struct BlockStmt {
  std::vector<StmtPtr> stmts;
};
struct CallStmt {
  ExprPtr call;
};
struct ReturnStmt {
  ExprPtr value;  // null for bare return
};
struct PrintStmt {
  std::vector<ExprPtr> args;
};
/// Lowered form of a directive target: hand the named environment to the
/// runtime and run region `region`.
struct ForkStmt {
  int region;
  std::vector<std::string> args;
};
/// Body shell of a worksharing region: iterate the chunks the runtime hands
/// this member, binding `var` to each iteration value.
struct WorkshareLoopStmt {
  std::string var;
  StmtPtr body;
};

struct Stmt {
  using Node = std::variant<VarDecl, Assign, IndexAssign, IfStmt, WhileStmt, ForStmt, BlockStmt,
                            CallStmt, ReturnStmt, PrintStmt, ForkStmt, WorkshareLoopStmt>;
  SourcePos pos;
  std::vector<DirectiveText> directives;
  Node node;

  bool has_directive() const { return !directives.empty(); }
  /// Attached fragments joined by single spaces, in source order.
  std::string directive_text() const;
};

struct Param {
  std::string name;
  Type type;
};

struct FunctionDecl {
  std::string name;
  std::vector<Param> params;
  Type return_type = Type::Void;
  StmtPtr body;  // always a BlockStmt
  SourcePos pos;
};

enum class ExternAbi { Native, Fortran };

struct ExternDecl {
  std::string name;
  ExternAbi abi = ExternAbi::Native;
  std::vector<Param> params;
  Type return_type = Type::Void;
  SourcePos pos;
};

struct Program {
  std::vector<ExternDecl> externs;
  std::vector<FunctionDecl> functions;

  const FunctionDecl* find_function(std::string_view name) const;
  const ExternDecl* find_extern(std::string_view name) const;
};

// Construction helpers used by the parser and the lowering pass.
template <class Node>
ExprPtr make_expr(SourcePos pos, Node node) {
  return std::make_shared<const Expr>(Expr{pos, std::move(node)});
}

template <class Node>
StmtPtr make_stmt(SourcePos pos, Node node, std::vector<DirectiveText> directives = {}) {
  return std::make_shared<const Stmt>(Stmt{pos, std::move(directives), std::move(node)});
}

}  // namespace miniomp
