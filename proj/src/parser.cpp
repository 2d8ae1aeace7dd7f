#include <charconv>
#include <string>

#include "miniomp/frontend.hpp"

namespace miniomp {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::string decode_string(std::string_view raw) {
  std::string out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    char c = raw[i];
    if (c == '\\') {
      char e = raw[++i];
      out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
    } else {
      out += c;
    }
  }
  return out;
}

int precedence(BinaryOp op) {
  switch (op) {
    case BinaryOp::Or: return 1;
    case BinaryOp::And: return 2;
    case BinaryOp::Eq:
    case BinaryOp::Ne: return 3;
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge: return 4;
    case BinaryOp::Add:
    case BinaryOp::Sub: return 5;
    case BinaryOp::Mul:
    case BinaryOp::Div:
    case BinaryOp::Mod: return 6;
  }
  return 0;
}

std::optional<BinaryOp> binary_op_for(std::string_view text) {
  if (text == "||") return BinaryOp::Or;
  if (text == "&&") return BinaryOp::And;
  if (text == "==") return BinaryOp::Eq;
  if (text == "!=") return BinaryOp::Ne;
  if (text == "<") return BinaryOp::Lt;
  if (text == "<=") return BinaryOp::Le;
  if (text == ">") return BinaryOp::Gt;
  if (text == ">=") return BinaryOp::Ge;
  if (text == "+") return BinaryOp::Add;
  if (text == "-") return BinaryOp::Sub;
  if (text == "*") return BinaryOp::Mul;
  if (text == "/") return BinaryOp::Div;
  if (text == "%") return BinaryOp::Mod;
  return std::nullopt;
}

class Parser {
public:
  explicit Parser(std::span<const Token> tokens) : toks_(tokens) {}

  Program run() {
    if (toks_.empty() || toks_.back().kind != TokenKind::EndOfFile) {
      SourcePos pos = toks_.empty() ? SourcePos{} : toks_.back().pos();
      throw CompileError(
          Diagnostic{DiagnosticKind::ParseError, pos, "token stream must end with end-of-file", ""});
    }
    Program program;
    while (!check(TokenKind::EndOfFile)) {
      if (check(TokenKind::DirectiveComment)) {
        dangling(advance());
      } else if (check_word("extern")) {
        program.externs.push_back(parse_extern());
      } else if (check_word("fn")) {
        program.functions.push_back(parse_function());
      } else {
        fail("expected 'fn' or 'extern'");
      }
    }
    if (!dangling_.empty()) throw CompileError(std::move(dangling_));
    return program;
  }

private:
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[i];
  }
  const Token& advance() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool check(TokenKind kind) const { return peek().kind == kind; }
  bool check_word(std::string_view text) const {
    const Token& t = peek();
    return (t.kind == TokenKind::Keyword || t.kind == TokenKind::Operator ||
            t.kind == TokenKind::Punctuation) &&
           t.text == text;
  }

  [[noreturn]] void fail(const std::string& expected) const {
    const Token& t = peek();
    std::string found = t.kind == TokenKind::EndOfFile ? "end of file" : "'" + t.text + "'";
    throw CompileError(
        Diagnostic{DiagnosticKind::ParseError, t.pos(), expected + ", found " + found, t.text});
  }

  const Token& expect(std::string_view text) {
    if (!check_word(text)) fail("expected '" + std::string(text) + "'");
    return advance();
  }
  const Token& expect_identifier(std::string_view what) {
    if (!check(TokenKind::Identifier)) fail("expected " + std::string(what));
    return advance();
  }

  void dangling(const Token& t) {
    dangling_.push_back(Diagnostic{DiagnosticKind::DanglingDirective, t.pos(),
                                   "directive comment is not followed by a statement",
                                   trim(std::string_view(t.text).substr(kDirectiveSentinel.size()))});
  }

  // ---- declarations ----

  Type parse_type() {
    if (check_word("int")) return advance(), Type::Int;
    if (check_word("float")) return advance(), Type::Float;
    if (check_word("bool")) return advance(), Type::Bool;
    if (check_word("[")) {
      advance();
      Type t;
      if (check_word("int")) {
        t = Type::IntArray;
      } else if (check_word("float")) {
        t = Type::FloatArray;
      } else {
        fail("expected array element type 'int' or 'float'");
      }
      advance();
      expect("]");
      return t;
    }
    fail("expected a type");
  }

  std::vector<Param> parse_params() {
    std::vector<Param> params;
    expect("(");
    if (!check_word(")")) {
      while (true) {
        std::string name = expect_identifier("parameter name").text;
        expect(":");
        params.push_back(Param{name, parse_type()});
        if (!check_word(",")) break;
        advance();
      }
    }
    expect(")");
    return params;
  }

  ExternDecl parse_extern() {
    ExternDecl decl;
    decl.pos = expect("extern").pos();
    if (check(TokenKind::Identifier)) {
      const Token& abi = advance();
      if (abi.text == "fortran") {
        decl.abi = ExternAbi::Fortran;
      } else if (abi.text == "native") {
        decl.abi = ExternAbi::Native;
      } else {
        throw CompileError(Diagnostic{DiagnosticKind::ParseError, abi.pos(),
                                      "unknown extern ABI '" + abi.text + "'", abi.text});
      }
    }
    expect("fn");
    decl.name = expect_identifier("extern function name").text;
    decl.params = parse_params();
    if (check_word("->")) {
      advance();
      decl.return_type = parse_type();
    }
    expect(";");
    return decl;
  }

  FunctionDecl parse_function() {
    FunctionDecl fn;
    fn.pos = expect("fn").pos();
    fn.name = expect_identifier("function name").text;
    fn.params = parse_params();
    if (check_word("->")) {
      advance();
      fn.return_type = parse_type();
    }
    fn.body = parse_block();
    return fn;
  }

  // ---- statements ----

  StmtPtr parse_block() {
    SourcePos pos = expect("{").pos();
    std::vector<StmtPtr> stmts;
    std::vector<DirectiveText> pending;
    std::vector<const Token*> pending_tokens;
    while (true) {
      if (check(TokenKind::DirectiveComment)) {
        const Token& t = advance();
        pending.push_back(DirectiveText{trim(std::string_view(t.text).substr(kDirectiveSentinel.size())),
                                        t.pos()});
        pending_tokens.push_back(&t);
        continue;
      }
      if (check_word("}") || check(TokenKind::EndOfFile)) {
        for (const Token* t : pending_tokens) dangling(*t);
        break;
      }
      stmts.push_back(parse_statement(std::move(pending)));
      pending.clear();
      pending_tokens.clear();
    }
    expect("}");
    return make_stmt(pos, BlockStmt{std::move(stmts)});
  }

  StmtPtr parse_statement(std::vector<DirectiveText> directives) {
    const Token& t = peek();
    SourcePos pos = t.pos();
    if (check_word("var")) return parse_var_decl(std::move(directives));
    if (check_word("{")) {
      StmtPtr block = parse_block();
      return make_stmt(pos, std::get<BlockStmt>(block->node), std::move(directives));
    }
    if (check_word("if")) return parse_if(std::move(directives));
    if (check_word("while")) {
      advance();
      ExprPtr cond = parse_expr();
      StmtPtr body = parse_block();
      return make_stmt(pos, WhileStmt{cond, body}, std::move(directives));
    }
    if (check_word("for")) {
      advance();
      std::string var = expect_identifier("loop variable").text;
      expect("in");
      ExprPtr lower = parse_expr();
      expect("..");
      ExprPtr upper = parse_expr();
      ExprPtr step;
      if (check_word("step")) {
        advance();
        step = parse_expr();
      }
      StmtPtr body = parse_block();
      return make_stmt(pos, ForStmt{var, lower, upper, step, body}, std::move(directives));
    }
    if (check_word("return")) {
      advance();
      ExprPtr value;
      if (!check_word(";")) value = parse_expr();
      expect(";");
      return make_stmt(pos, ReturnStmt{value}, std::move(directives));
    }
    if (check_word("print")) {
      advance();
      expect("(");
      std::vector<ExprPtr> args;
      if (!check_word(")")) {
        while (true) {
          args.push_back(parse_expr());
          if (!check_word(",")) break;
          advance();
        }
      }
      expect(")");
      expect(";");
      return make_stmt(pos, PrintStmt{std::move(args)}, std::move(directives));
    }
    if (check(TokenKind::Identifier)) {
      const Token& next = peek(1);
      if (next.text == "(" && next.kind == TokenKind::Punctuation) {
        ExprPtr call = parse_postfix();
        expect(";");
        return make_stmt(pos, CallStmt{call}, std::move(directives));
      }
      std::string name = advance().text;
      if (check_word("[")) {
        advance();
        ExprPtr index = parse_expr();
        expect("]");
        expect("=");
        ExprPtr value = parse_expr();
        expect(";");
        return make_stmt(pos, IndexAssign{name, index, value}, std::move(directives));
      }
      expect("=");
      ExprPtr value = parse_expr();
      expect(";");
      return make_stmt(pos, Assign{name, value}, std::move(directives));
    }
    fail("expected a statement");
  }

  StmtPtr parse_var_decl(std::vector<DirectiveText> directives) {
    SourcePos pos = expect("var").pos();
    std::string name = expect_identifier("variable name").text;
    expect(":");
    if (check_word("[")) {
      advance();
      Type t;
      if (check_word("int")) {
        t = Type::IntArray;
      } else if (check_word("float")) {
        t = Type::FloatArray;
      } else {
        fail("expected array element type 'int' or 'float'");
      }
      advance();
      expect(";");
      ExprPtr length = parse_expr();
      expect("]");
      expect(";");
      return make_stmt(pos, VarDecl{name, t, length, nullptr}, std::move(directives));
    }
    Type t = parse_type();
    ExprPtr init;
    if (check_word("=")) {
      advance();
      init = parse_expr();
    }
    expect(";");
    return make_stmt(pos, VarDecl{name, t, nullptr, init}, std::move(directives));
  }

  StmtPtr parse_if(std::vector<DirectiveText> directives) {
    SourcePos pos = expect("if").pos();
    ExprPtr cond = parse_expr();
    StmtPtr then_branch = parse_block();
    StmtPtr else_branch;
    if (check_word("else")) {
      advance();
      else_branch = check_word("if") ? parse_if({}) : parse_block();
    }
    return make_stmt(pos, IfStmt{cond, then_branch, else_branch}, std::move(directives));
  }

  // ---- expressions ----

  ExprPtr parse_expr(int min_prec = 1) {
    ExprPtr lhs = parse_unary();
    while (true) {
      const Token& t = peek();
      if (t.kind != TokenKind::Operator) break;
      auto op = binary_op_for(t.text);
      if (!op || precedence(*op) < min_prec) break;
      SourcePos pos = advance().pos();
      ExprPtr rhs = parse_expr(precedence(*op) + 1);
      lhs = make_expr(pos, BinaryExpr{*op, lhs, rhs});
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (check_word("-") || check_word("!")) {
      const Token& t = advance();
      UnaryOp op = t.text == "-" ? UnaryOp::Neg : UnaryOp::Not;
      return make_expr(t.pos(), UnaryExpr{op, parse_unary()});
    }
    return parse_postfix();
  }

  ExprPtr parse_postfix() {
    const Token& t = peek();
    SourcePos pos = t.pos();
    switch (t.kind) {
      case TokenKind::IntLiteral: {
        advance();
        std::int64_t v = 0;
        std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        return make_expr(pos, IntLit{v});
      }
      case TokenKind::FloatLiteral: {
        advance();
        double v = 0;
        std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        return make_expr(pos, FloatLit{v});
      }
      case TokenKind::StringLiteral:
        advance();
        return make_expr(pos, StringLit{decode_string(t.text)});
      case TokenKind::Keyword:
        if (t.text == "true" || t.text == "false") {
          advance();
          return make_expr(pos, BoolLit{t.text == "true"});
        }
        break;
      case TokenKind::Identifier: {
        std::string name = advance().text;
        if (check_word("(")) {
          advance();
          std::vector<ExprPtr> args;
          if (!check_word(")")) {
            while (true) {
              args.push_back(parse_expr());
              if (!check_word(",")) break;
              advance();
            }
          }
          expect(")");
          return make_expr(pos, CallExpr{name, std::move(args)});
        }
        if (check_word("[")) {
          advance();
          ExprPtr index = parse_expr();
          expect("]");
          return make_expr(pos, IndexExpr{name, index});
        }
        return make_expr(pos, VarRef{name});
      }
      case TokenKind::Punctuation:
        if (t.text == "(") {
          advance();
          ExprPtr inner = parse_expr();
          expect(")");
          return inner;
        }
        break;
      default:
        break;
    }
    fail("expected an expression");
  }

  std::span<const Token> toks_;
  std::size_t pos_ = 0;
  std::vector<Diagnostic> dangling_;
};

}  // namespace

Program parse(std::span<const Token> tokens) { return Parser(tokens).run(); }

Program parse_source(std::string_view source) {
  auto tokens = tokenize(source);
  return parse(tokens);
}

Program load_program(std::string_view source) {
  Program p = parse_source(source);
  analyze(p);
  return p;
}

}  // namespace miniomp
