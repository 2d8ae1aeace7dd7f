#include "miniomp/directives.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "miniomp/frontend.hpp"

namespace miniomp {

std::string_view to_string(DirectiveKind k) {
  switch (k) {
    case DirectiveKind::Parallel: return "parallel";
    case DirectiveKind::For: return "for";
    case DirectiveKind::ParallelFor: return "parallel for";
  }
  return "?";
}

std::string_view to_string(ReductionOp op) {
  switch (op) {
    case ReductionOp::Add: return "+";
    case ReductionOp::Mul: return "*";
    case ReductionOp::Min: return "min";
    case ReductionOp::Max: return "max";
  }
  return "?";
}

std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Static: return "static";
    case ScheduleKind::Dynamic: return "dynamic";
    case ScheduleKind::Guided: return "guided";
  }
  return "?";
}

const ScheduleClause* Directive::schedule() const {
  for (const auto& c : clauses) {
    if (const auto* s = std::get_if<ScheduleClause>(&c)) return s;
  }
  return nullptr;
}

std::optional<std::int64_t> Directive::num_threads() const {
  for (const auto& c : clauses) {
    if (const auto* n = std::get_if<NumThreadsClause>(&c)) return n->count;
  }
  return std::nullopt;
}

bool operator==(const Directive& a, const Directive& b) {
  if (a.kind != b.kind || a.clauses.size() != b.clauses.size()) return false;
  auto ca = a.clauses;
  auto cb = b.clauses;
  std::sort(ca.begin(), ca.end());
  std::sort(cb.begin(), cb.end());
  return ca == cb;
}

namespace {

// ---------------------------------------------------------------------------
// Directive text scanner
// ---------------------------------------------------------------------------

class DirectiveParser {
public:
  DirectiveParser(std::string_view raw, SourcePos pos) : raw_(raw), base_(pos) {}

  Directive run() {
    Directive d;
    d.pos = base_;
    std::string first = word("a directive name");
    if (first == "parallel") {
      skip_space();
      if (peek_word() == "for") {
        word("for");
        d.kind = DirectiveKind::ParallelFor;
      } else {
        d.kind = DirectiveKind::Parallel;
      }
    } else if (first == "for") {
      d.kind = DirectiveKind::For;
    } else {
      fail("unknown directive '" + first + "'", first, start_);
    }

    while (true) {
      skip_space();
      if (at_end()) break;
      if (peek() == ',' && !d.clauses.empty()) {
        ++pos_;
        skip_space();
      }
      d.clauses.push_back(clause(d.kind));
    }

    int schedules = 0;
    int thread_counts = 0;
    for (const auto& c : d.clauses) {
      schedules += std::holds_alternative<ScheduleClause>(c);
      thread_counts += std::holds_alternative<NumThreadsClause>(c);
    }
    if (schedules > 1) fail("more than one schedule clause", "schedule", 0);
    if (thread_counts > 1) fail("more than one num_threads clause", "num_threads", 0);
    if (d.kind == DirectiveKind::Parallel && schedules > 0) {
      fail("schedule clause requires a worksharing loop", "schedule", 0);
    }
    return d;
  }

private:
  bool at_end() const { return pos_ >= raw_.size(); }
  char peek() const { return at_end() ? '\0' : raw_[pos_]; }

  static bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

  void skip_space() {
    while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\r' || peek() == '\n')) ++pos_;
  }

  [[noreturn]] void fail(const std::string& message, std::string subject, std::size_t at) const {
    // "//#omp " precedes the raw text on the source line.
    SourcePos p{base_.line, base_.column + static_cast<int>(kDirectiveSentinel.size() + 1 + at)};
    throw CompileError(Diagnostic{DiagnosticKind::DirectiveSyntaxError, p, message, std::move(subject)});
  }

  std::string peek_word() const {
    std::size_t p = pos_;
    while (p < raw_.size() && ident_char(raw_[p])) ++p;
    return std::string(raw_.substr(pos_, p - pos_));
  }

  std::string word(std::string_view what) {
    skip_space();
    start_ = pos_;
    if (!ident_start(peek())) {
      fail("expected " + std::string(what), at_end() ? "" : std::string(1, peek()), pos_);
    }
    while (ident_char(peek())) ++pos_;
    return std::string(raw_.substr(start_, pos_ - start_));
  }

  void expect(char c) {
    skip_space();
    if (peek() != c) {
      fail(std::string("expected '") + c + "'", at_end() ? "" : std::string(1, peek()), pos_);
    }
    ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  std::int64_t positive_integer(std::string_view what) {
    skip_space();
    std::size_t start = pos_;
    if (peek() == '-' || peek() == '+') ++pos_;
    while (peek() >= '0' && peek() <= '9') ++pos_;
    std::string_view text = raw_.substr(start, pos_ - start);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || p != text.data() + text.size()) {
      fail("expected a positive integer " + std::string(what), std::string(text), start);
    }
    if (v < 1) fail("non-positive " + std::string(what), std::string(text), start);
    return v;
  }

  std::vector<std::string> name_list() {
    std::vector<std::string> names;
    std::set<std::string> seen;
    while (true) {
      std::size_t at = pos_;
      std::string n = word("a variable name");
      if (!seen.insert(n).second) fail("duplicate name '" + n + "' in clause", n, at);
      names.push_back(std::move(n));
      if (!accept(',')) break;
    }
    return names;
  }

  Clause clause(DirectiveKind kind) {
    std::size_t at = pos_;
    std::string name = word("a clause");
    expect('(');
    Clause c;
    if (name == "shared") {
      c = SharedClause{name_list()};
    } else if (name == "private") {
      c = PrivateClause{name_list()};
    } else if (name == "firstprivate") {
      c = FirstprivateClause{name_list()};
    } else if (name == "reduction") {
      skip_space();
      std::size_t op_at = pos_;
      ReductionOp op;
      if (accept('+')) {
        op = ReductionOp::Add;
      } else if (accept('*')) {
        op = ReductionOp::Mul;
      } else {
        std::string w = ident_start(peek()) ? word("a reduction operator") : std::string(1, peek());
        if (w == "min") {
          op = ReductionOp::Min;
        } else if (w == "max") {
          op = ReductionOp::Max;
        } else {
          fail("unknown reduction operator '" + w + "'", w, op_at);
        }
      }
      expect(':');
      c = ReductionClause{op, name_list()};
    } else if (name == "schedule") {
      std::size_t kind_at = pos_;
      std::string k = word("a schedule kind");
      ScheduleKind sk;
      if (k == "static") {
        sk = ScheduleKind::Static;
      } else if (k == "dynamic") {
        sk = ScheduleKind::Dynamic;
      } else if (k == "guided") {
        sk = ScheduleKind::Guided;
      } else {
        fail("unknown schedule kind '" + k + "'", k, kind_at);
      }
      std::optional<std::int64_t> chunk;
      if (accept(',')) chunk = positive_integer("chunk size");
      c = ScheduleClause{sk, chunk};
    } else if (name == "num_threads") {
      if (kind == DirectiveKind::For) fail("num_threads is not allowed on a worksharing loop", name, at);
      c = NumThreadsClause{positive_integer("thread count")};
    } else {
      fail("unknown clause '" + name + "'", name, at);
    }
    expect(')');
    return c;
  }

  std::string_view raw_;
  SourcePos base_;
  std::size_t pos_ = 0;
  std::size_t start_ = 0;
};

std::string name_list_text(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) out += (i ? ", " : "") + names[i];
  return out;
}

// ---------------------------------------------------------------------------
// AST scans used by validation
// ---------------------------------------------------------------------------

void expr_names(const Expr& e, std::set<std::string>& vars, bool& has_impure_call) {
  if (const auto* n = std::get_if<VarRef>(&e.node)) {
    vars.insert(n->name);
  } else if (const auto* n = std::get_if<IndexExpr>(&e.node)) {
    vars.insert(n->array);
    expr_names(*n->index, vars, has_impure_call);
  } else if (const auto* n = std::get_if<UnaryExpr>(&e.node)) {
    expr_names(*n->operand, vars, has_impure_call);
  } else if (const auto* n = std::get_if<BinaryExpr>(&e.node)) {
    expr_names(*n->lhs, vars, has_impure_call);
    expr_names(*n->rhs, vars, has_impure_call);
  } else if (const auto* n = std::get_if<CallExpr>(&e.node)) {
    if (!is_pure_builtin(n->callee)) has_impure_call = true;
    for (const auto& a : n->args) expr_names(*a, vars, has_impure_call);
  }
}

void call_array_args(const Expr& e, std::set<std::string>& passed) {
  if (const auto* n = std::get_if<CallExpr>(&e.node)) {
    if (!is_builtin(n->callee)) {
      for (const auto& a : n->args) {
        if (const auto* v = std::get_if<VarRef>(&a->node)) passed.insert(v->name);
      }
    }
    for (const auto& a : n->args) call_array_args(*a, passed);
  } else if (const auto* n = std::get_if<UnaryExpr>(&e.node)) {
    call_array_args(*n->operand, passed);
  } else if (const auto* n = std::get_if<BinaryExpr>(&e.node)) {
    call_array_args(*n->lhs, passed);
    call_array_args(*n->rhs, passed);
  } else if (const auto* n = std::get_if<IndexExpr>(&e.node)) {
    call_array_args(*n->index, passed);
  }
}

/// Names a statement assigns or stores into (`out`), and names it hands to
/// non-builtin calls (`passed`), which may mutate them if they are arrays.
void written_names(const Stmt& s, std::set<std::string>& out, std::set<std::string>& passed) {
  auto exprs = [&](const ExprPtr& e) {
    if (e) call_array_args(*e, passed);
  };
  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, Assign>) {
          out.insert(n.name);
          exprs(n.value);
        } else if constexpr (std::is_same_v<N, IndexAssign>) {
          out.insert(n.array);
          exprs(n.index);
          exprs(n.value);
        } else if constexpr (std::is_same_v<N, VarDecl>) {
          exprs(n.length);
          exprs(n.init);
        } else if constexpr (std::is_same_v<N, IfStmt>) {
          exprs(n.cond);
          written_names(*n.then_branch, out, passed);
          if (n.else_branch) written_names(*n.else_branch, out, passed);
        } else if constexpr (std::is_same_v<N, WhileStmt>) {
          exprs(n.cond);
          written_names(*n.body, out, passed);
        } else if constexpr (std::is_same_v<N, ForStmt>) {
          exprs(n.lower);
          exprs(n.upper);
          exprs(n.step);
          written_names(*n.body, out, passed);
        } else if constexpr (std::is_same_v<N, BlockStmt>) {
          for (const auto& c : n.stmts) written_names(*c, out, passed);
        } else if constexpr (std::is_same_v<N, CallStmt>) {
          exprs(n.call);
        } else if constexpr (std::is_same_v<N, ReturnStmt>) {
          exprs(n.value);
        } else if constexpr (std::is_same_v<N, PrintStmt>) {
          for (const auto& a : n.args) exprs(a);
        } else if constexpr (std::is_same_v<N, ForkStmt>) {
          for (const auto& a : n.args) out.insert(a);
        } else if constexpr (std::is_same_v<N, WorkshareLoopStmt>) {
          written_names(*n.body, out, passed);
        }
      },
      s.node);
}

bool contains_return(const Stmt& s) {
  return std::visit(
      [&](const auto& n) -> bool {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, ReturnStmt>) {
          return true;
        } else if constexpr (std::is_same_v<N, IfStmt>) {
          return contains_return(*n.then_branch) || (n.else_branch && contains_return(*n.else_branch));
        } else if constexpr (std::is_same_v<N, WhileStmt> || std::is_same_v<N, ForStmt> ||
                             std::is_same_v<N, WorkshareLoopStmt>) {
          return contains_return(*n.body);
        } else if constexpr (std::is_same_v<N, BlockStmt>) {
          return std::any_of(n.stmts.begin(), n.stmts.end(),
                             [](const StmtPtr& c) { return contains_return(*c); });
        } else {
          return false;
        }
      },
      s.node);
}

std::optional<std::int64_t> literal_int(const Expr& e) {
  if (const auto* n = std::get_if<IntLit>(&e.node)) return n->value;
  if (const auto* n = std::get_if<UnaryExpr>(&e.node); n && n->op == UnaryOp::Neg) {
    if (auto v = literal_int(*n->operand)) return -*v;
  }
  return std::nullopt;
}

template <class F>
void for_each_named(const Directive& d, F&& f) {
  for (const auto& c : d.clauses) {
    std::visit(
        [&](const auto& cl) {
          using C = std::decay_t<decltype(cl)>;
          if constexpr (std::is_same_v<C, SharedClause>) {
            for (const auto& n : cl.names) f(n, SharingRole::Shared);
          } else if constexpr (std::is_same_v<C, PrivateClause>) {
            for (const auto& n : cl.names) f(n, SharingRole::Private);
          } else if constexpr (std::is_same_v<C, FirstprivateClause>) {
            for (const auto& n : cl.names) f(n, SharingRole::Firstprivate);
          } else if constexpr (std::is_same_v<C, ReductionClause>) {
            for (const auto& n : cl.names) f(n, SharingRole::Reduction);
          }
        },
        c);
  }
}

}  // namespace

Directive parse_directive(std::string_view raw, SourcePos pos) { return DirectiveParser(raw, pos).run(); }

std::string to_string(const Directive& d) {
  std::string out(to_string(d.kind));
  for (const auto& c : d.clauses) {
    out += ' ';
    std::visit(
        [&](const auto& cl) {
          using C = std::decay_t<decltype(cl)>;
          if constexpr (std::is_same_v<C, SharedClause>) {
            out += "shared(" + name_list_text(cl.names) + ")";
          } else if constexpr (std::is_same_v<C, PrivateClause>) {
            out += "private(" + name_list_text(cl.names) + ")";
          } else if constexpr (std::is_same_v<C, FirstprivateClause>) {
            out += "firstprivate(" + name_list_text(cl.names) + ")";
          } else if constexpr (std::is_same_v<C, ReductionClause>) {
            out += "reduction(" + std::string(to_string(cl.op)) + ": " + name_list_text(cl.names) + ")";
          } else if constexpr (std::is_same_v<C, ScheduleClause>) {
            out += "schedule(" + std::string(to_string(cl.kind));
            if (cl.chunk) out += ", " + std::to_string(*cl.chunk);
            out += ")";
          } else if constexpr (std::is_same_v<C, NumThreadsClause>) {
            out += "num_threads(" + std::to_string(cl.count) + ")";
          }
        },
        c);
  }
  return out;
}

std::optional<SharingRole> sharing_role(const Directive& d, std::string_view name) {
  std::optional<SharingRole> best;
  for_each_named(d, [&](const std::string& n, SharingRole role) {
    if (n == name && (!best || static_cast<int>(role) > static_cast<int>(*best))) best = role;
  });
  return best;
}

std::optional<ReductionOp> reduction_op(const Directive& d, std::string_view name) {
  for (const auto& c : d.clauses) {
    if (const auto* r = std::get_if<ReductionClause>(&c)) {
      if (std::find(r->names.begin(), r->names.end(), name) != r->names.end()) return r->op;
    }
  }
  return std::nullopt;
}

CheckedDirective validate_directive(const Directive& d, const Stmt& target, const DirectiveSite& site) {
  std::vector<Diagnostic> errors;
  auto error = [&](DiagnosticKind kind, std::string message, std::string subject = "") {
    errors.push_back(Diagnostic{kind, d.pos, std::move(message), std::move(subject)});
  };

  const bool loop_kind = d.kind != DirectiveKind::Parallel;
  const ForStmt* loop = std::get_if<ForStmt>(&target.node);

  if (d.kind == DirectiveKind::For) {
    if (!site.inside_parallel) {
      error(DiagnosticKind::OrphanedWorksharing, "'for' directive is not inside a parallel region");
    } else if (site.inside_worksharing) {
      error(DiagnosticKind::InvalidTarget, "worksharing loop nested directly inside another worksharing loop");
    }
  }

  if (loop_kind) {
    if (!loop) {
      error(DiagnosticKind::NotALoop, std::string("'") + std::string(to_string(d.kind)) +
                                          "' directive must precede a counted for loop");
    } else {
      if (loop->step) {
        if (auto v = literal_int(*loop->step); v && *v < 1) {
          error(DiagnosticKind::NonCanonicalLoop, "loop step must be at least 1", loop->var);
        }
      }
      std::set<std::string> bound_vars;
      bool impure = false;
      for (const auto* e : {loop->lower.get(), loop->upper.get(), loop->step.get()}) {
        if (e) expr_names(*e, bound_vars, impure);
      }
      if (impure) {
        error(DiagnosticKind::NonCanonicalLoop, "loop bounds may only call pure builtins", loop->var);
      }
      std::set<std::string> written;
      std::set<std::string> passed;
      written_names(*loop->body, written, passed);
      for (const auto& v : bound_vars) {
        auto t = site.visible.find(v);
        const bool array_arg = passed.contains(v) && t != site.visible.end() && is_array(t->second);
        if (written.contains(v) || array_arg) {
          error(DiagnosticKind::NonCanonicalLoop, "loop bound depends on '" + v + "', which the body modifies", v);
        }
      }
    }
  } else if (std::holds_alternative<VarDecl>(target.node) || std::holds_alternative<ReturnStmt>(target.node)) {
    error(DiagnosticKind::InvalidTarget, "'parallel' cannot apply to a declaration or return statement");
  }

  if (contains_return(target)) {
    error(DiagnosticKind::InvalidTarget, "return is not allowed inside a parallel region or worksharing loop");
  }

  std::map<std::string, SharingRole> roles;
  std::set<std::string> reported;
  for_each_named(d, [&](const std::string& name, SharingRole role) {
    if (loop_kind && loop && name == loop->var) {
      if (reported.insert(name).second) {
        error(DiagnosticKind::ConflictingSharing,
              "loop variable '" + name + "' is implicitly private and cannot appear in a clause", name);
      }
      return;
    }
    auto [it, inserted] = roles.emplace(name, role);
    // Repeating a name in the same plain role is harmless; two reduction
    // clauses on one name leave the operator ambiguous.
    const bool clash = !inserted && (it->second != role || role == SharingRole::Reduction);
    if (clash && reported.insert(name).second) {
      error(DiagnosticKind::ConflictingSharing, "'" + name + "' appears in more than one data-sharing role", name);
    }
    if (!site.visible.contains(name)) {
      if (reported.insert(name).second) {
        error(DiagnosticKind::UnknownVariable, "'" + name + "' is not visible at the directive", name);
      }
      return;
    }
    if (role == SharingRole::Reduction) {
      Type t = site.visible.find(name)->second;
      if (t != Type::Int && t != Type::Float && reported.insert(name).second) {
        error(DiagnosticKind::InvalidReduction, "reduction variable '" + name + "' must be int or float", name);
      }
    }
  });

  if (!errors.empty()) throw CompileError(std::move(errors));
  return CheckedDirective{d};
}

}  // namespace miniomp
