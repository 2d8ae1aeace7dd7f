#include "miniomp/transform.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "miniomp/frontend.hpp"

namespace miniomp {

std::string_view to_string(CaptureMode m) {
  switch (m) {
    case CaptureMode::SharedRef: return "shared";
    case CaptureMode::PrivateZero: return "private";
    case CaptureMode::FirstprivateCopy: return "firstprivate";
    case CaptureMode::ReductionSlot: return "reduction";
  }
  return "?";
}

namespace {

class FreeVariableWalker {
public:
  explicit FreeVariableWalker(const std::vector<std::string>& exclude)
      : declared_(exclude.begin(), exclude.end()) {}

  std::vector<std::string> result() && { return std::move(free_); }

  void use(const std::string& name) {
    if (declared_.contains(name) || seen_.contains(name)) return;
    seen_.insert(name);
    free_.push_back(name);
  }

  void expr(const ExprPtr& e) {
    if (!e) return;
    if (const auto* n = std::get_if<VarRef>(&e->node)) {
      use(n->name);
    } else if (const auto* n = std::get_if<IndexExpr>(&e->node)) {
      use(n->array);
      expr(n->index);
    } else if (const auto* n = std::get_if<UnaryExpr>(&e->node)) {
      expr(n->operand);
    } else if (const auto* n = std::get_if<BinaryExpr>(&e->node)) {
      expr(n->lhs);
      expr(n->rhs);
    } else if (const auto* n = std::get_if<CallExpr>(&e->node)) {
      for (const auto& a : n->args) expr(a);
    }
  }

  void stmt(const StmtPtr& s) {
    if (!s) return;
    std::visit(
        [&](const auto& n) {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, VarDecl>) {
            expr(n.length);
            expr(n.init);
            declared_.insert(n.name);
          } else if constexpr (std::is_same_v<N, Assign>) {
            expr(n.value);
            use(n.name);
          } else if constexpr (std::is_same_v<N, IndexAssign>) {
            use(n.array);
            expr(n.index);
            expr(n.value);
          } else if constexpr (std::is_same_v<N, IfStmt>) {
            expr(n.cond);
            stmt(n.then_branch);
            stmt(n.else_branch);
          } else if constexpr (std::is_same_v<N, WhileStmt>) {
            expr(n.cond);
            stmt(n.body);
          } else if constexpr (std::is_same_v<N, ForStmt>) {
            expr(n.lower);
            expr(n.upper);
            expr(n.step);
            declared_.insert(n.var);
            stmt(n.body);
          } else if constexpr (std::is_same_v<N, BlockStmt>) {
            for (const auto& c : n.stmts) stmt(c);
          } else if constexpr (std::is_same_v<N, CallStmt>) {
            expr(n.call);
          } else if constexpr (std::is_same_v<N, ReturnStmt>) {
            expr(n.value);
          } else if constexpr (std::is_same_v<N, PrintStmt>) {
            for (const auto& a : n.args) expr(a);
          } else if constexpr (std::is_same_v<N, ForkStmt>) {
            for (const auto& a : n.args) use(a);
          } else if constexpr (std::is_same_v<N, WorkshareLoopStmt>) {
            declared_.insert(n.var);
            stmt(n.body);
          }
        },
        s->node);
  }

private:
  std::set<std::string> declared_;
  std::set<std::string> seen_;
  std::vector<std::string> free_;
};

void bound_names(const ExprPtr& e, std::vector<std::string>& out) {
  if (!e) return;
  auto add = [&](const std::string& n) {
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  };
  if (const auto* n = std::get_if<VarRef>(&e->node)) {
    add(n->name);
  } else if (const auto* n = std::get_if<IndexExpr>(&e->node)) {
    add(n->array);
    bound_names(n->index, out);
  } else if (const auto* n = std::get_if<UnaryExpr>(&e->node)) {
    bound_names(n->operand, out);
  } else if (const auto* n = std::get_if<BinaryExpr>(&e->node)) {
    bound_names(n->lhs, out);
    bound_names(n->rhs, out);
  } else if (const auto* n = std::get_if<CallExpr>(&e->node)) {
    for (const auto& a : n->args) bound_names(a, out);
  }
}

StmtPtr without_directives(const Stmt& s) {
  Stmt copy = s;
  copy.directives.clear();
  return std::make_shared<const Stmt>(std::move(copy));
}

using TypeMap = std::map<std::string, Type, std::less<>>;

class Lowerer {
public:
  LoweredProgram run(const Program& p) {
    LoweredProgram out;
    out.host = p;
    for (auto& f : out.host.functions) {
      scopes_.assign(1, {});
      for (const auto& param : f.params) scopes_.back()[param.name] = param.type;
      inside_parallel_ = false;
      inside_worksharing_ = false;
      f.body = block(f.body);
    }
    if (!errors_.empty()) throw CompileError(std::move(errors_));
    out.regions = std::move(regions_);
    return out;
  }

private:
  TypeMap visible() const {
    TypeMap all;
    for (const auto& s : scopes_) all.insert(s.begin(), s.end());
    return all;
  }

  void record(const CompileError& e) {
    for (const auto& d : e.diagnostics()) errors_.push_back(d);
  }

  StmtPtr block(const StmtPtr& s) {
    scopes_.emplace_back();
    Stmt copy = *s;
    for (auto& c : std::get<BlockStmt>(copy.node).stmts) c = stmt(c);
    scopes_.pop_back();
    return std::make_shared<const Stmt>(std::move(copy));
  }

  StmtPtr stmt(const StmtPtr& s) {
    if (!s) return s;
    if (s->has_directive()) {
      if (auto forked = directive_target(s)) return forked;
      // The directive was rejected; keep lowering the statement to find
      // further problems underneath it.
      return plain(without_directives(*s));
    }
    return plain(s);
  }

  StmtPtr plain(const StmtPtr& s) {
    Stmt copy = *s;
    if (auto* n = std::get_if<VarDecl>(&copy.node)) {
      scopes_.back()[n->name] = n->type;
    } else if (std::holds_alternative<BlockStmt>(copy.node)) {
      return block(s);
    } else if (auto* n = std::get_if<IfStmt>(&copy.node)) {
      n->then_branch = block(n->then_branch);
      if (n->else_branch) {
        n->else_branch = std::holds_alternative<IfStmt>(n->else_branch->node) ? stmt(n->else_branch)
                                                                               : block(n->else_branch);
      }
    } else if (auto* n = std::get_if<WhileStmt>(&copy.node)) {
      n->body = block(n->body);
    } else if (auto* n = std::get_if<ForStmt>(&copy.node)) {
      scopes_.push_back({{n->var, Type::Int}});
      n->body = block(n->body);
      scopes_.pop_back();
    }
    return std::make_shared<const Stmt>(std::move(copy));
  }

  StmtPtr directive_target(const StmtPtr& s) {
    const SourcePos pos = s->directives.front().pos;
    std::optional<CheckedDirective> checked;
    try {
      Directive d = parse_directive(s->directive_text(), pos);
      checked = validate_directive(d, *s, DirectiveSite{visible(), inside_parallel_, inside_worksharing_});
    } catch (const CompileError& e) {
      record(e);
      return nullptr;
    }

    const int id = static_cast<int>(regions_.size());
    regions_.emplace_back();

    const bool saved_parallel = inside_parallel_;
    const bool saved_worksharing = inside_worksharing_;
    inside_parallel_ = true;
    inside_worksharing_ = checked->directive.kind != DirectiveKind::Parallel;

    TypeMap types = visible();
    StmtPtr lowered;
    if (const auto* loop = std::get_if<ForStmt>(&s->node); loop && inside_worksharing_) {
      scopes_.push_back({{loop->var, Type::Int}});
      lowered = block(loop->body);
      scopes_.pop_back();
    } else {
      lowered = plain(without_directives(*s));
    }

    inside_parallel_ = saved_parallel;
    inside_worksharing_ = saved_worksharing;

    try {
      regions_[id] = outline(*s, *checked, id, types, lowered);
    } catch (const CompileError& e) {
      record(e);
      return nullptr;
    }
    return make_stmt(s->pos, ForkStmt{id, fork_arguments(regions_[id])});
  }

  std::vector<TypeMap> scopes_;
  bool inside_parallel_ = false;
  bool inside_worksharing_ = false;
  std::vector<OutlinedRegion> regions_;
  std::vector<Diagnostic> errors_;
};

}  // namespace

std::vector<std::string> free_variables(const Stmt& body, const std::vector<std::string>& exclude) {
  FreeVariableWalker w(exclude);
  w.stmt(std::make_shared<const Stmt>(body));
  return std::move(w).result();
}

std::vector<Capture> classify_captures(const Stmt& body, const CheckedDirective& d, const TypeMap& types,
                                       const std::vector<std::string>& exclude) {
  std::vector<Capture> captures;
  std::vector<Diagnostic> errors;
  for (const auto& name : free_variables(body, exclude)) {
    auto t = types.find(name);
    if (t == types.end()) {
      errors.push_back(Diagnostic{DiagnosticKind::UnknownVariable, d.directive.pos,
                                  "'" + name + "' is not visible at the directive", name});
      continue;
    }
    Capture c;
    c.name = name;
    c.type = t->second;
    c.slot = static_cast<int>(captures.size());
    switch (sharing_role(d.directive, name).value_or(SharingRole::Shared)) {
      case SharingRole::Shared: c.mode = CaptureMode::SharedRef; break;
      case SharingRole::Private: c.mode = CaptureMode::PrivateZero; break;
      case SharingRole::Firstprivate: c.mode = CaptureMode::FirstprivateCopy; break;
      case SharingRole::Reduction:
        c.mode = CaptureMode::ReductionSlot;
        c.op = reduction_op(d.directive, name);
        break;
    }
    captures.push_back(std::move(c));
  }
  if (!errors.empty()) throw CompileError(std::move(errors));
  return captures;
}

OutlinedRegion outline(const Stmt& target, const CheckedDirective& d, int id, const TypeMap& types,
                       StmtPtr lowered_body) {
  OutlinedRegion r;
  r.id = id;
  r.kind = d.directive.kind;
  r.directive = d.directive;
  r.pos = d.directive.pos;
  r.num_threads = d.directive.num_threads();

  if (r.kind == DirectiveKind::Parallel) {
    r.body = lowered_body ? lowered_body : without_directives(target);
    r.captures = classify_captures(*r.body, d, types);
    return r;
  }

  const auto* loop = std::get_if<ForStmt>(&target.node);
  if (!loop) {
    throw CompileError(Diagnostic{DiagnosticKind::NotALoop, d.directive.pos,
                                  "worksharing directive must precede a counted for loop", ""});
  }
  StmtPtr loop_body = lowered_body ? lowered_body : loop->body;
  r.body = make_stmt(target.pos, WorkshareLoopStmt{loop->var, loop_body});
  r.captures = classify_captures(*r.body, d, types);

  WorkshareLoop w;
  w.var = loop->var;
  w.lower = loop->lower;
  w.upper = loop->upper;
  w.step = loop->step;
  if (const auto* s = d.directive.schedule()) {
    w.schedule = s->kind;
    w.chunk = s->chunk;
  }
  r.loop = std::move(w);
  return r;
}

std::vector<std::string> fork_arguments(const OutlinedRegion& region) {
  std::vector<std::string> args;
  for (const auto& c : region.captures) args.push_back(c.name);
  if (region.loop) {
    bound_names(region.loop->lower, args);
    bound_names(region.loop->upper, args);
    bound_names(region.loop->step, args);
  }
  return args;
}

LoweredProgram lower_program(const Program& p) { return Lowerer().run(p); }

std::string dump_omp(const LoweredProgram& p) {
  std::ostringstream out;
  for (const auto& r : p.regions) {
    out << "region " << r.id << "\n";
    out << "  kind: " << to_string(r.kind) << "\n";
    out << "  directive: " << to_string(r.directive) << "\n";
    out << "  num_threads: " << (r.num_threads ? std::to_string(*r.num_threads) : "default") << "\n";
    if (r.loop) {
      out << "  loop: " << r.loop->var << " in " << expr_to_source(*r.loop->lower) << ".."
          << expr_to_source(*r.loop->upper) << " step "
          << (r.loop->step ? expr_to_source(*r.loop->step) : "1") << "\n";
      out << "  schedule: " << to_string(r.loop->schedule);
      if (r.loop->chunk) out << ", " << *r.loop->chunk;
      out << "\n";
    } else {
      out << "  loop: none\n";
      out << "  schedule: none\n";
    }
    out << "  captures:";
    if (r.captures.empty()) out << " none";
    out << "\n";
    for (const auto& c : r.captures) {
      out << "    " << c.name << " : " << to_string(c.type) << " : " << to_string(c.mode);
      if (c.op) out << "(" << to_string(*c.op) << ")";
      out << " : " << c.slot << "\n";
    }
  }
  return out.str();
}

}  // namespace miniomp
