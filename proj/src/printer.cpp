#include <charconv>
#include <cmath>
#include <sstream>

#include "miniomp/frontend.hpp"

namespace miniomp {

std::string_view to_string(Type t) {
  switch (t) {
    case Type::Void: return "void";
    case Type::Int: return "int";
    case Type::Float: return "float";
    case Type::Bool: return "bool";
    case Type::IntArray: return "[int]";
    case Type::FloatArray: return "[float]";
  }
  return "?";
}

std::string_view to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Mod: return "%";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::And: return "&&";
    case BinaryOp::Or: return "||";
  }
  return "?";
}

std::string Stmt::directive_text() const {
  std::string out;
  for (const auto& d : directives) {
    if (!out.empty()) out += ' ';
    out += d.text;
  }
  return out;
}

const FunctionDecl* Program::find_function(std::string_view name) const {
  for (const auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

const ExternDecl* Program::find_extern(std::string_view name) const {
  for (const auto& e : externs) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::string format_float(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace {

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
    default: return 6;
  }
}

std::string escape(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      default: out += c;
    }
  }
  return out + "\"";
}

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

// ---- source printer ----

std::string source_expr(const Expr& e, int parent_prec = 0, bool right = false);

std::string source_args(const std::vector<ExprPtr>& args) {
  std::string out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ", ";
    out += source_expr(*args[i]);
  }
  return out;
}

std::string source_expr(const Expr& e, int parent_prec, bool right) {
  return std::visit(
      overloaded{
          [](const IntLit& n) { return std::to_string(n.value); },
          [](const FloatLit& n) { return format_float(n.value); },
          [](const BoolLit& n) { return std::string(n.value ? "true" : "false"); },
          [](const StringLit& n) { return escape(n.value); },
          [](const VarRef& n) { return n.name; },
          [](const IndexExpr& n) { return n.array + "[" + source_expr(*n.index) + "]"; },
          [](const UnaryExpr& n) {
            std::string inner = source_expr(*n.operand, 7);
            return std::string(n.op == UnaryOp::Neg ? "-" : "!") + inner;
          },
          [&](const BinaryExpr& n) {
            int p = precedence(n.op);
            std::string s = source_expr(*n.lhs, p, false) + " " + std::string(to_string(n.op)) + " " +
                            source_expr(*n.rhs, p, true);
            bool parens = p < parent_prec || (right && p == parent_prec);
            return parens ? "(" + s + ")" : s;
          },
          [](const CallExpr& n) { return n.callee + "(" + source_args(n.args) + ")"; },
      },
      e.node);
}

std::string params_text(const std::vector<Param>& params) {
  std::string out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i) out += ", ";
    out += params[i].name + ": " + std::string(to_string(params[i].type));
  }
  return out;
}

class SourcePrinter {
public:
  std::string str() const { return out_.str(); }

  void block_body(const Stmt& block, int indent) {
    for (const auto& s : std::get<BlockStmt>(block.node).stmts) stmt(*s, indent);
  }

  void stmt(const Stmt& s, int indent) {
    std::string pad(indent * 4, ' ');
    for (const auto& d : s.directives) out_ << pad << kDirectiveSentinel << " " << d.text << "\n";
    out_ << pad;
    std::visit(
        overloaded{
            [&](const VarDecl& n) {
              if (is_array(n.type)) {
                out_ << "var " << n.name << ": [" << to_string(element_type(n.type)) << "; "
                     << source_expr(*n.length) << "];\n";
              } else {
                out_ << "var " << n.name << ": " << to_string(n.type);
                if (n.init) out_ << " = " << source_expr(*n.init);
                out_ << ";\n";
              }
            },
            [&](const Assign& n) { out_ << n.name << " = " << source_expr(*n.value) << ";\n"; },
            [&](const IndexAssign& n) {
              out_ << n.array << "[" << source_expr(*n.index) << "] = " << source_expr(*n.value) << ";\n";
            },
            [&](const IfStmt& n) { if_chain(n, indent); },
            [&](const WhileStmt& n) {
              out_ << "while " << source_expr(*n.cond) << " {\n";
              block_body(*n.body, indent + 1);
              out_ << pad << "}\n";
            },
            [&](const ForStmt& n) {
              out_ << "for " << n.var << " in " << source_expr(*n.lower) << ".." << source_expr(*n.upper);
              if (n.step) out_ << " step " << source_expr(*n.step);
              out_ << " {\n";
              block_body(*n.body, indent + 1);
              out_ << pad << "}\n";
            },
            [&](const BlockStmt&) {
              out_ << "{\n";
              block_body(s, indent + 1);
              out_ << pad << "}\n";
            },
            [&](const CallStmt& n) { out_ << source_expr(*n.call) << ";\n"; },
            [&](const ReturnStmt& n) {
              out_ << "return";
              if (n.value) out_ << " " << source_expr(*n.value);
              out_ << ";\n";
            },
            [&](const PrintStmt& n) { out_ << "print(" << source_args(n.args) << ");\n"; },
            [&](const ForkStmt& n) {
              out_ << "// fork region " << n.region << " (";
              for (std::size_t i = 0; i < n.args.size(); ++i) out_ << (i ? ", " : "") << n.args[i];
              out_ << ")\n";
            },
            [&](const WorkshareLoopStmt& n) {
              out_ << "// workshare " << n.var << " {\n";
              block_body(*n.body, indent + 1);
              out_ << pad << "// }\n";
            },
        },
        s.node);
  }

  void if_chain(const IfStmt& n, int indent) {
    std::string pad(indent * 4, ' ');
    out_ << "if " << source_expr(*n.cond) << " {\n";
    block_body(*n.then_branch, indent + 1);
    out_ << pad << "}";
    if (n.else_branch) {
      if (const auto* nested = std::get_if<IfStmt>(&n.else_branch->node)) {
        out_ << " else ";
        if_chain(*nested, indent);
        return;
      }
      out_ << " else {\n";
      block_body(*n.else_branch, indent + 1);
      out_ << pad << "}";
    }
    out_ << "\n";
  }

  void program(const Program& p) {
    for (const auto& e : p.externs) {
      out_ << "extern " << (e.abi == ExternAbi::Fortran ? "fortran " : "") << "fn " << e.name << "("
           << params_text(e.params) << ")";
      if (e.return_type != Type::Void) out_ << " -> " << to_string(e.return_type);
      out_ << ";\n";
    }
    if (!p.externs.empty()) out_ << "\n";
    for (std::size_t i = 0; i < p.functions.size(); ++i) {
      const auto& f = p.functions[i];
      if (i) out_ << "\n";
      out_ << "fn " << f.name << "(" << params_text(f.params) << ")";
      if (f.return_type != Type::Void) out_ << " -> " << to_string(f.return_type);
      out_ << " {\n";
      block_body(*f.body, 1);
      out_ << "}\n";
    }
  }

private:
  std::ostringstream out_;
};

// ---- structural dump ----

std::string dump_expr(const Expr& e) {
  return std::visit(
      overloaded{
          [](const IntLit& n) { return std::to_string(n.value); },
          [](const FloatLit& n) { return format_float(n.value); },
          [](const BoolLit& n) { return std::string(n.value ? "true" : "false"); },
          [](const StringLit& n) { return escape(n.value); },
          [](const VarRef& n) { return n.name; },
          [](const IndexExpr& n) { return "(index " + n.array + " " + dump_expr(*n.index) + ")"; },
          [](const UnaryExpr& n) {
            return std::string(n.op == UnaryOp::Neg ? "(neg " : "(not ") + dump_expr(*n.operand) + ")";
          },
          [](const BinaryExpr& n) {
            return "(" + std::string(to_string(n.op)) + " " + dump_expr(*n.lhs) + " " + dump_expr(*n.rhs) +
                   ")";
          },
          [](const CallExpr& n) {
            std::string s = "(call " + n.callee;
            for (const auto& a : n.args) s += " " + dump_expr(*a);
            return s + ")";
          },
      },
      e.node);
}

void dump_into(std::ostringstream& out, const Stmt& s, int indent) {
  std::string pad(indent * 2, ' ');
  for (const auto& d : s.directives) out << pad << "@omp " << escape(d.text) << "\n";
  out << pad;
  std::visit(
      overloaded{
          [&](const VarDecl& n) {
            out << "var " << n.name << " " << to_string(n.type);
            if (n.length) out << " length=" << dump_expr(*n.length);
            if (n.init) out << " init=" << dump_expr(*n.init);
            out << "\n";
          },
          [&](const Assign& n) { out << "assign " << n.name << " " << dump_expr(*n.value) << "\n"; },
          [&](const IndexAssign& n) {
            out << "store " << n.array << " " << dump_expr(*n.index) << " " << dump_expr(*n.value) << "\n";
          },
          [&](const IfStmt& n) {
            out << "if " << dump_expr(*n.cond) << "\n";
            dump_into(out, *n.then_branch, indent + 1);
            if (n.else_branch) {
              out << pad << "else\n";
              dump_into(out, *n.else_branch, indent + 1);
            }
          },
          [&](const WhileStmt& n) {
            out << "while " << dump_expr(*n.cond) << "\n";
            dump_into(out, *n.body, indent + 1);
          },
          [&](const ForStmt& n) {
            out << "for " << n.var << " " << dump_expr(*n.lower) << " " << dump_expr(*n.upper) << " "
                << (n.step ? dump_expr(*n.step) : "default") << "\n";
            dump_into(out, *n.body, indent + 1);
          },
          [&](const BlockStmt& n) {
            out << "block\n";
            for (const auto& c : n.stmts) dump_into(out, *c, indent + 1);
          },
          [&](const CallStmt& n) { out << "call-stmt " << dump_expr(*n.call) << "\n"; },
          [&](const ReturnStmt& n) {
            out << "return";
            if (n.value) out << " " << dump_expr(*n.value);
            out << "\n";
          },
          [&](const PrintStmt& n) {
            out << "print";
            for (const auto& a : n.args) out << " " << dump_expr(*a);
            out << "\n";
          },
          [&](const ForkStmt& n) {
            out << "fork " << n.region << " (";
            for (std::size_t i = 0; i < n.args.size(); ++i) out << (i ? " " : "") << n.args[i];
            out << ")\n";
          },
          [&](const WorkshareLoopStmt& n) {
            out << "workshare " << n.var << "\n";
            dump_into(out, *n.body, indent + 1);
          },
      },
      s.node);
}

}  // namespace

std::string pretty_print(const Program& program) {
  SourcePrinter p;
  p.program(program);
  return p.str();
}

std::string expr_to_source(const Expr& e) { return source_expr(e); }

std::string dump_stmt(const Stmt& stmt, int indent) {
  std::ostringstream out;
  dump_into(out, stmt, indent);
  return out.str();
}

std::string dump_ast(const Program& program) {
  std::ostringstream out;
  out << "program\n";
  for (const auto& e : program.externs) {
    out << "  extern " << (e.abi == ExternAbi::Fortran ? "fortran" : "native") << " " << e.name << " ("
        << params_text(e.params) << ") -> " << to_string(e.return_type) << "\n";
  }
  for (const auto& f : program.functions) {
    out << "  fn " << f.name << " (" << params_text(f.params) << ") -> " << to_string(f.return_type)
        << "\n";
    dump_into(out, *f.body, 2);
  }
  return out.str();
}

}  // namespace miniomp
