#include <map>
#include <set>

#include "miniomp/frontend.hpp"

namespace miniomp {

std::optional<Type> unary_result_type(UnaryOp op, Type operand) {
  if (op == UnaryOp::Neg && is_numeric(operand)) return operand;
  if (op == UnaryOp::Not && operand == Type::Bool) return Type::Bool;
  return std::nullopt;
}

std::optional<Type> binary_result_type(BinaryOp op, Type lhs, Type rhs) {
  switch (op) {
    case BinaryOp::Add:
    case BinaryOp::Sub:
    case BinaryOp::Mul:
    case BinaryOp::Div:
      if (!is_numeric(lhs) || !is_numeric(rhs)) return std::nullopt;
      return lhs == Type::Int && rhs == Type::Int ? Type::Int : Type::Float;
    case BinaryOp::Mod:
      if (lhs == Type::Int && rhs == Type::Int) return Type::Int;
      return std::nullopt;
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge:
      if (is_numeric(lhs) && is_numeric(rhs)) return Type::Bool;
      return std::nullopt;
    case BinaryOp::Eq:
    case BinaryOp::Ne:
      if ((is_numeric(lhs) && is_numeric(rhs)) || (lhs == Type::Bool && rhs == Type::Bool)) {
        return Type::Bool;
      }
      return std::nullopt;
    case BinaryOp::And:
    case BinaryOp::Or:
      if (lhs == Type::Bool && rhs == Type::Bool) return Type::Bool;
      return std::nullopt;
  }
  return std::nullopt;
}

bool assignable(Type to, Type from) {
  return to == from || (to == Type::Float && from == Type::Int);
}

namespace {

const std::set<std::string_view, std::less<>> kPureBuiltins = {
    "sqrt", "log", "abs", "floor", "min", "max", "split_seed", "rand_uniform"};
const std::set<std::string_view, std::less<>> kTeamBuiltins = {"now_seconds", "tid", "team_size",
                                                                 "max_threads"};

}  // namespace

bool is_builtin(std::string_view name) {
  return kPureBuiltins.contains(name) || kTeamBuiltins.contains(name);
}

bool is_pure_builtin(std::string_view name) { return kPureBuiltins.contains(name); }

std::optional<Type> builtin_result_type(std::string_view name, std::span<const Type> args) {
  auto unary_numeric = [&]() { return args.size() == 1 && is_numeric(args[0]); };
  if (name == "sqrt" || name == "log") {
    if (unary_numeric()) return Type::Float;
  } else if (name == "abs") {
    if (unary_numeric()) return args[0];
  } else if (name == "floor") {
    if (unary_numeric()) return Type::Int;
  } else if (name == "min" || name == "max") {
    if (args.size() == 2 && is_numeric(args[0]) && is_numeric(args[1])) {
      return args[0] == Type::Int && args[1] == Type::Int ? Type::Int : Type::Float;
    }
  } else if (name == "split_seed") {
    if (args.size() == 1 && args[0] == Type::Int) return Type::Int;
  } else if (name == "rand_uniform") {
    if (args.size() == 1 && args[0] == Type::Int) return Type::Float;
  } else if (name == "now_seconds") {
    if (args.empty()) return Type::Float;
  } else if (name == "tid" || name == "team_size" || name == "max_threads") {
    if (args.empty()) return Type::Int;
  }
  return std::nullopt;
}

namespace {

struct VarInfo {
  Type type;
  bool induction = false;
};

class Checker {
public:
  explicit Checker(const Program& p) : program_(p) {}

  void run() {
    check_declarations();
    for (const auto& f : program_.functions) check_function(f);
    if (!diags_.empty()) throw CompileError(std::move(diags_));
  }

private:
  void error(SourcePos pos, std::string message, std::string subject = "") {
    diags_.push_back(Diagnostic{DiagnosticKind::TypeError, pos, std::move(message), std::move(subject)});
  }

  void check_declarations() {
    std::set<std::string> names;
    int mains = 0;
    for (const auto& e : program_.externs) {
      if (is_builtin(e.name)) error(e.pos, "extern '" + e.name + "' collides with a builtin", e.name);
      if (!names.insert(e.name).second) error(e.pos, "duplicate declaration of '" + e.name + "'", e.name);
      if (is_array(e.return_type)) error(e.pos, "functions cannot return arrays", e.name);
    }
    for (const auto& f : program_.functions) {
      if (is_builtin(f.name)) error(f.pos, "function '" + f.name + "' collides with a builtin", f.name);
      if (!names.insert(f.name).second) error(f.pos, "duplicate declaration of '" + f.name + "'", f.name);
      if (is_array(f.return_type)) error(f.pos, "functions cannot return arrays", f.name);
      if (f.name == "main") {
        ++mains;
        if (!f.params.empty()) error(f.pos, "'main' must take no parameters", "main");
        if (f.return_type != Type::Void && f.return_type != Type::Int) {
          error(f.pos, "'main' must return nothing or int", "main");
        }
      }
    }
    if (mains != 1) error({1, 1}, "program must define exactly one function 'main'", "main");
  }

  void check_function(const FunctionDecl& f) {
    scopes_.clear();
    scopes_.emplace_back();
    return_type_ = f.return_type;
    for (const auto& p : f.params) declare(p.name, VarInfo{p.type}, f.pos);
    check_block(*f.body);
  }

  const VarInfo* lookup(std::string_view name) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto found = it->find(std::string(name));
      if (found != it->end()) return &found->second;
    }
    return nullptr;
  }

  void declare(const std::string& name, VarInfo info, SourcePos pos) {
    if (lookup(name)) {
      error(pos, "'" + name + "' is already declared in an enclosing scope", name);
      return;
    }
    scopes_.back().emplace(name, info);
  }

  void check_block(const Stmt& block) {
    scopes_.emplace_back();
    for (const auto& s : std::get<BlockStmt>(block.node).stmts) check_stmt(*s);
    scopes_.pop_back();
  }

  void expect_type(const Expr& e, Type want, std::string_view what) {
    auto t = type_of(e);
    if (t && !assignable(want, *t)) {
      error(e.pos, std::string(what) + " must be " + std::string(to_string(want)) + ", found " +
                       std::string(to_string(*t)));
    }
  }

  void check_stmt(const Stmt& s) {
    if (const auto* n = std::get_if<VarDecl>(&s.node)) {
      if (n->type == Type::Void) error(s.pos, "variables cannot be void", n->name);
      if (n->length) expect_type(*n->length, Type::Int, "array length");
      if (n->init) expect_type(*n->init, n->type, "initializer of '" + n->name + "'");
      declare(n->name, VarInfo{n->type}, s.pos);
    } else if (const auto* n = std::get_if<Assign>(&s.node)) {
      const VarInfo* v = lookup(n->name);
      if (!v) {
        error(s.pos, "assignment to undeclared variable '" + n->name + "'", n->name);
      } else if (v->induction) {
        error(s.pos, "loop variable '" + n->name + "' cannot be assigned", n->name);
      } else if (is_array(v->type)) {
        error(s.pos, "array variable '" + n->name + "' cannot be reassigned", n->name);
      } else {
        expect_type(*n->value, v->type, "value assigned to '" + n->name + "'");
      }
    } else if (const auto* n = std::get_if<IndexAssign>(&s.node)) {
      const VarInfo* v = lookup(n->array);
      if (!v || !is_array(v->type)) {
        error(s.pos, "'" + n->array + "' is not an array variable", n->array);
      } else {
        expect_type(*n->value, element_type(v->type), "stored element");
      }
      expect_type(*n->index, Type::Int, "array index");
    } else if (const auto* n = std::get_if<IfStmt>(&s.node)) {
      expect_type(*n->cond, Type::Bool, "if condition");
      check_block(*n->then_branch);
      if (n->else_branch) {
        if (std::holds_alternative<IfStmt>(n->else_branch->node)) {
          check_stmt(*n->else_branch);
        } else {
          check_block(*n->else_branch);
        }
      }
    } else if (const auto* n = std::get_if<WhileStmt>(&s.node)) {
      expect_type(*n->cond, Type::Bool, "while condition");
      check_block(*n->body);
    } else if (const auto* n = std::get_if<ForStmt>(&s.node)) {
      expect_int(*n->lower, "loop lower bound");
      expect_int(*n->upper, "loop upper bound");
      if (n->step) expect_int(*n->step, "loop step");
      scopes_.emplace_back();
      declare(n->var, VarInfo{Type::Int, true}, s.pos);
      check_block(*n->body);
      scopes_.pop_back();
    } else if (std::holds_alternative<BlockStmt>(s.node)) {
      check_block(s);
    } else if (const auto* n = std::get_if<CallStmt>(&s.node)) {
      type_of(*n->call);
    } else if (const auto* n = std::get_if<ReturnStmt>(&s.node)) {
      if (return_type_ == Type::Void && n->value) {
        error(s.pos, "function returning nothing cannot return a value");
      } else if (return_type_ != Type::Void && !n->value) {
        error(s.pos, "missing return value");
      } else if (n->value) {
        expect_type(*n->value, return_type_, "returned value");
      }
    } else if (const auto* n = std::get_if<PrintStmt>(&s.node)) {
      for (const auto& a : n->args) {
        if (std::holds_alternative<StringLit>(a->node)) continue;
        auto t = type_of(*a);
        if (t && (is_array(*t) || *t == Type::Void)) error(a->pos, "print arguments must be scalars");
      }
    }
  }

  void expect_int(const Expr& e, std::string_view what) {
    auto t = type_of(e);
    if (t && *t != Type::Int) error(e.pos, std::string(what) + " must be int");
  }

  std::optional<Type> type_of(const Expr& e) {
    if (std::holds_alternative<IntLit>(e.node)) return Type::Int;
    if (std::holds_alternative<FloatLit>(e.node)) return Type::Float;
    if (std::holds_alternative<BoolLit>(e.node)) return Type::Bool;
    if (std::holds_alternative<StringLit>(e.node)) {
      error(e.pos, "string literals are only allowed as print arguments");
      return std::nullopt;
    }
    if (const auto* n = std::get_if<VarRef>(&e.node)) {
      const VarInfo* v = lookup(n->name);
      if (!v) {
        error(e.pos, "use of undeclared variable '" + n->name + "'", n->name);
        return std::nullopt;
      }
      return v->type;
    }
    if (const auto* n = std::get_if<IndexExpr>(&e.node)) {
      expect_type(*n->index, Type::Int, "array index");
      const VarInfo* v = lookup(n->array);
      if (!v || !is_array(v->type)) {
        error(e.pos, "'" + n->array + "' is not an array variable", n->array);
        return std::nullopt;
      }
      return element_type(v->type);
    }
    if (const auto* n = std::get_if<UnaryExpr>(&e.node)) {
      auto t = type_of(*n->operand);
      if (!t) return std::nullopt;
      auto r = unary_result_type(n->op, *t);
      if (!r) error(e.pos, "invalid operand type " + std::string(to_string(*t)) + " for unary operator");
      return r;
    }
    if (const auto* n = std::get_if<BinaryExpr>(&e.node)) {
      auto l = type_of(*n->lhs);
      auto r = type_of(*n->rhs);
      if (!l || !r) return std::nullopt;
      auto t = binary_result_type(n->op, *l, *r);
      if (!t) {
        error(e.pos, "invalid operand types " + std::string(to_string(*l)) + " and " +
                         std::string(to_string(*r)) + " for '" + std::string(to_string(n->op)) + "'");
      }
      return t;
    }
    const auto& call = std::get<CallExpr>(e.node);
    std::vector<Type> args;
    bool ok = true;
    for (const auto& a : call.args) {
      auto t = type_of(*a);
      ok = ok && t.has_value();
      args.push_back(t.value_or(Type::Void));
    }
    const std::vector<Param>* params = nullptr;
    Type ret = Type::Void;
    if (const auto* f = program_.find_function(call.callee)) {
      params = &f->params;
      ret = f->return_type;
    } else if (const auto* x = program_.find_extern(call.callee)) {
      params = &x->params;
      ret = x->return_type;
    } else if (is_builtin(call.callee)) {
      if (!ok) return std::nullopt;
      auto t = builtin_result_type(call.callee, args);
      if (!t) error(e.pos, "invalid arguments to builtin '" + call.callee + "'", call.callee);
      return t;
    } else {
      error(e.pos, "call to unknown function '" + call.callee + "'", call.callee);
      return std::nullopt;
    }
    if (params->size() != args.size()) {
      error(e.pos, "'" + call.callee + "' expects " + std::to_string(params->size()) + " arguments, got " +
                       std::to_string(args.size()), call.callee);
    } else if (ok) {
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (!assignable((*params)[i].type, args[i])) {
          error(call.args[i]->pos, "argument " + std::to_string(i + 1) + " of '" + call.callee +
                                       "' must be " + std::string(to_string((*params)[i].type)));
        }
      }
    }
    return ret;
  }

  const Program& program_;
  std::vector<std::map<std::string, VarInfo>> scopes_;
  Type return_type_ = Type::Void;
  std::vector<Diagnostic> diags_;
};

StmtPtr strip(const StmtPtr& s) {
  if (!s) return s;
  Stmt copy = *s;
  copy.directives.clear();
  if (auto* n = std::get_if<BlockStmt>(&copy.node)) {
    for (auto& c : n->stmts) c = strip(c);
  } else if (auto* n = std::get_if<IfStmt>(&copy.node)) {
    n->then_branch = strip(n->then_branch);
    n->else_branch = strip(n->else_branch);
  } else if (auto* n = std::get_if<WhileStmt>(&copy.node)) {
    n->body = strip(n->body);
  } else if (auto* n = std::get_if<ForStmt>(&copy.node)) {
    n->body = strip(n->body);
  } else if (auto* n = std::get_if<WorkshareLoopStmt>(&copy.node)) {
    n->body = strip(n->body);
  }
  return std::make_shared<const Stmt>(std::move(copy));
}

}  // namespace

void analyze(const Program& program) { Checker(program).run(); }

Program strip_directives(const Program& program) {
  Program out = program;
  for (auto& f : out.functions) f.body = strip(f.body);
  return out;
}

}  // namespace miniomp
