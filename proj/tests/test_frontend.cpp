#include <gtest/gtest.h>

#include <functional>

#include "corpus.hpp"
#include "miniomp/frontend.hpp"

using namespace miniomp;

namespace {

std::vector<std::pair<TokenKind, std::string>> kinds_and_text(std::string_view src) {
  std::vector<std::pair<TokenKind, std::string>> out;
  for (const auto& t : tokenize(src)) out.emplace_back(t.kind, t.text);
  return out;
}

Diagnostic first_error(std::string_view src) {
  try {
    load_program(src);
  } catch (const CompileError& e) {
    return e.first();
  }
  ADD_FAILURE() << "expected a diagnostic for:\n" << src;
  return {};
}

std::vector<Diagnostic> all_errors(std::string_view src) {
  try {
    load_program(src);
  } catch (const CompileError& e) {
    return e.diagnostics();
  }
  return {};
}

void visit_stmts(const StmtPtr& s, const std::function<void(const Stmt&)>& f) {
  if (!s) return;
  f(*s);
  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, IfStmt>) {
          visit_stmts(n.then_branch, f);
          visit_stmts(n.else_branch, f);
        } else if constexpr (std::is_same_v<N, WhileStmt> || std::is_same_v<N, ForStmt> ||
                             std::is_same_v<N, WorkshareLoopStmt>) {
          visit_stmts(n.body, f);
        } else if constexpr (std::is_same_v<N, BlockStmt>) {
          for (const auto& c : n.stmts) visit_stmts(c, f);
        }
      },
      s->node);
}

std::vector<std::filesystem::path> all_programs() {
  auto files = testsupport::corpus_files();
  for (const char* k : {"mandelbrot", "ep", "is", "cg"}) files.push_back(std::filesystem::path(MINIOMP_KERNEL_DIR) / (std::string(k) + ".mk"));
  return files;
}

}  // namespace

TEST(Tokenize, AssignmentStatement) {
  const std::vector<std::pair<TokenKind, std::string>> expected = {
      {TokenKind::Identifier, "x"}, {TokenKind::Operator, "="}, {TokenKind::IntLiteral, "1"},
      {TokenKind::Punctuation, ";"}, {TokenKind::EndOfFile, ""}};
  EXPECT_EQ(kinds_and_text("x = 1;"), expected);
}

TEST(Tokenize, DirectiveCommentIsOneToken) {
  auto toks = tokenize("//#omp parallel\nx = 1;");
  ASSERT_FALSE(toks.empty());
  EXPECT_EQ(toks[0].kind, TokenKind::DirectiveComment);
  EXPECT_EQ(toks[0].text, "//#omp parallel");
  EXPECT_EQ(toks[1].line, 2);
}

TEST(Tokenize, PlainCommentsAreSkipped) {
  for (const auto& t : tokenize("// plain note\nx = 1;")) EXPECT_NE(t.kind, TokenKind::DirectiveComment);
  for (const auto& t : tokenize("//#ompx not a directive\nx = 1;")) EXPECT_NE(t.kind, TokenKind::DirectiveComment);
}

TEST(Tokenize, LiteralsAndKeywords) {
  auto toks = kinds_and_text("var f: float = 2.5e-3; while true {} \"hi there\"");
  EXPECT_EQ(toks[0], std::make_pair(TokenKind::Keyword, std::string("var")));
  EXPECT_EQ(toks[5], std::make_pair(TokenKind::FloatLiteral, std::string("2.5e-3")));
  EXPECT_EQ(toks[7], std::make_pair(TokenKind::Keyword, std::string("while")));
  EXPECT_EQ(toks[11], std::make_pair(TokenKind::StringLiteral, std::string("\"hi there\"")));
}

TEST(Tokenize, CrlfLineEndings) {
  auto toks = tokenize("x = 1;\r\n//#omp parallel\r\ny = 2;\r\n");
  ASSERT_GE(toks.size(), 6u);
  EXPECT_EQ(toks[4].kind, TokenKind::DirectiveComment);
  EXPECT_EQ(toks[4].text, "//#omp parallel");
  EXPECT_EQ(toks[5].line, 3);
  EXPECT_EQ(toks[5].column, 1);
}

// Token texts sit at their offsets, and everything between tokens is
// whitespace or a plain comment.
TEST(Tokenize, TokensReconstructSource) {
  for (const auto& path : all_programs()) {
    const std::string src = testsupport::read_file(path);
    std::size_t cursor = 0;
    for (const auto& t : tokenize(src)) {
      ASSERT_EQ(src.compare(t.offset, t.text.size(), t.text), 0) << path << " token " << t.text;
      std::string_view gap(src.data() + cursor, t.offset - cursor);
      while (!gap.empty()) {
        if (gap.starts_with("//")) {
          ASSERT_FALSE(gap.starts_with("//#omp")) << path;
          const auto nl = gap.find('\n');
          gap.remove_prefix(nl == std::string_view::npos ? gap.size() : nl);
        } else {
          ASSERT_TRUE(gap.front() == ' ' || gap.front() == '\t' || gap.front() == '\n' || gap.front() == '\r')
              << path << " stray text before " << t.text << " at " << t.line << ":" << t.column;
          gap.remove_prefix(1);
        }
      }
      cursor = t.offset + t.text.size();
    }
    EXPECT_EQ(cursor, src.size()) << path;
  }
}

TEST(Parse, MinimalProgram) {
  Program p = parse_source("fn main() { print(1); }");
  ASSERT_EQ(p.functions.size(), 1u);
  EXPECT_EQ(p.functions[0].name, "main");
  const auto& body = std::get<BlockStmt>(p.functions[0].body->node);
  ASSERT_EQ(body.stmts.size(), 1u);
  EXPECT_TRUE(std::holds_alternative<PrintStmt>(body.stmts[0]->node));
}

TEST(Parse, DirectiveAttachesToNextStatement) {
  Program p = parse_source("fn main() {\n  var a: [int; 4];\n  //#omp parallel\n\n  { a[0] = 1; }\n}");
  const auto& body = std::get<BlockStmt>(p.functions[0].body->node);
  ASSERT_EQ(body.stmts.size(), 2u);
  EXPECT_FALSE(body.stmts[0]->has_directive());
  ASSERT_TRUE(body.stmts[1]->has_directive());
  EXPECT_EQ(body.stmts[1]->directive_text(), "parallel");
  EXPECT_TRUE(std::holds_alternative<BlockStmt>(body.stmts[1]->node));
  EXPECT_EQ(body.stmts[1]->directives[0].pos, (SourcePos{3, 3}));
}

TEST(Parse, ConsecutiveDirectivesConcatenate) {
  Program p = parse_source(
      "fn main() {\n  var s: int = 0;\n  //#omp parallel for\n  //#omp reduction(+: s)\n  for i in 0..4 { s = s + i; }\n}");
  const auto& body = std::get<BlockStmt>(p.functions[0].body->node);
  EXPECT_EQ(body.stmts[1]->directives.size(), 2u);
  EXPECT_EQ(body.stmts[1]->directive_text(), "parallel for reduction(+: s)");
}

TEST(Parse, DanglingDirectiveAtEndOfBlock) {
  auto d = first_error("fn main() {\n  print(1);\n  //#omp parallel\n}");
  EXPECT_EQ(d.kind, DiagnosticKind::DanglingDirective);
  EXPECT_EQ(d.pos, (SourcePos{3, 3}));
}

TEST(Parse, EveryDanglingDirectiveIsReported) {
  auto ds = all_errors("fn main() {\n  //#omp parallel\n  //#omp for\n}\n//#omp parallel\n");
  ASSERT_EQ(ds.size(), 3u);
  for (const auto& d : ds) EXPECT_EQ(d.kind, DiagnosticKind::DanglingDirective);
  EXPECT_EQ(ds[2].pos, (SourcePos{5, 1}));
}

TEST(Parse, ExternDeclarations) {
  Program p = parse_source(
      "extern fortran fn dcopy(n: int, a: [float], b: [float]);\nextern fn clock() -> float;\nfn main() {}");
  ASSERT_EQ(p.externs.size(), 2u);
  EXPECT_EQ(p.externs[0].abi, ExternAbi::Fortran);
  EXPECT_EQ(p.externs[0].params.size(), 3u);
  EXPECT_EQ(p.externs[1].abi, ExternAbi::Native);
  EXPECT_EQ(p.externs[1].return_type, Type::Float);
}

struct BrokenInput {
  const char* source;
  DiagnosticKind kind;
  SourcePos pos;
};

// Every lex and parse error points at its offending token.
TEST(Parse, ErrorPositions) {
  const std::vector<BrokenInput> cases = {
      {"fn main() { var x: int = 1 }", DiagnosticKind::ParseError, {1, 28}},
      {"fn main() { var x: int = 1 @ 2; }", DiagnosticKind::LexError, {1, 28}},
      {"fn main() { print(\"abc); }", DiagnosticKind::LexError, {1, 19}},
      {"fn main() {\n  var y: int = 3;\n  y = (1 + ;\n}", DiagnosticKind::ParseError, {3, 12}},
      {"fn main() {\n    while {\n    }\n}", DiagnosticKind::ParseError, {2, 11}},
      {"fn main() {\n  var q: float = 1.5e;\n}", DiagnosticKind::LexError, {2, 18}},
      {"fn f( {\n}", DiagnosticKind::ParseError, {1, 7}},
      {"fn main() { var a: [int; 3]; a[0 = 2; }", DiagnosticKind::ParseError, {1, 34}},
      {"fn main() {\n\tvar x: int = 0;\n\tx = x +* 2;\n}", DiagnosticKind::ParseError, {3, 9}},
      {"fn main() { for i in 0.. { } }", DiagnosticKind::ParseError, {1, 26}},
      {"fn main() {\n  var s: int = 1;\n}\n}", DiagnosticKind::ParseError, {4, 1}},
  };
  for (const auto& c : cases) {
    auto d = first_error(c.source);
    EXPECT_EQ(d.kind, c.kind) << c.source;
    EXPECT_EQ(d.pos, c.pos) << c.source << "\n" << format_diagnostic(d);
  }
}

TEST(Sema, TypeErrors) {
  const std::vector<const char*> bad = {
      "fn main() { var x: int = 1.5; }",
      "fn main() { var x: int = 0; x = true; }",
      "fn main() { print(y); }",
      "fn main() { var x: int = 0; var x: int = 1; }",
      "fn main() { for i in 0..3 { i = 2; } }",
      "fn f(a: int) -> int { return a; } fn main() { print(f(1, 2)); }",
      "fn main() { var b: bool = 1 < 2.0 + true; }",
      "fn main() { var s: int = \"text\"; }",
      "fn helper() {}",
      "fn main(x: int) {}",
      "fn main() { var a: [int; 2]; a[0] = 1.0; }",
      "fn main() { if 1 { } }",
  };
  for (const char* src : bad) EXPECT_EQ(first_error(src).kind, DiagnosticKind::TypeError) << src;
}

TEST(Sema, AcceptsWideningAndBuiltins) {
  EXPECT_NO_THROW(load_program(
      "fn main() { var f: float = 3; var i: int = floor(sqrt(f)); var r: float = rand_uniform(split_seed(i));"
      " print(min(i, 2), max(f, 1.0), abs(-2), log(2.0), tid(), team_size(), max_threads(), now_seconds() >= 0.0, r); }"));
}

TEST(Sema, ReportsAllTypeErrors) {
  auto ds = all_errors("fn main() {\n  var x: int = 1.5;\n  var y: bool = 2;\n}");
  EXPECT_EQ(ds.size(), 2u);
}

// pretty_print output reparses to the same tree, directives included.
TEST(RoundTrip, CorpusAndKernels) {
  for (const auto& path : all_programs()) {
    Program p = load_program(testsupport::read_file(path));
    const std::string printed = pretty_print(p);
    Program q = parse_source(printed);
    EXPECT_EQ(dump_ast(p), dump_ast(q)) << path;
    EXPECT_EQ(printed, pretty_print(q)) << path;
  }
}

TEST(RoundTrip, DirectivePreservation) {
  for (const auto& path : all_programs()) {
    const std::string src = testsupport::read_file(path);
    std::size_t tokens = 0;
    for (const auto& t : tokenize(src)) tokens += t.kind == TokenKind::DirectiveComment;
    std::size_t attached = 0;
    Program p = parse_source(src);
    for (const auto& f : p.functions) visit_stmts(f.body, [&](const Stmt& s) { attached += s.directives.size(); });
    EXPECT_EQ(tokens, attached) << path;
    EXPECT_GT(tokens, 0u) << path;
  }
  const std::string dangling = "fn main() {\n  //#omp parallel\n  print(1);\n  //#omp parallel\n}";
  std::size_t tokens = 0;
  for (const auto& t : tokenize(dangling)) tokens += t.kind == TokenKind::DirectiveComment;
  EXPECT_EQ(tokens, 2u);
  EXPECT_EQ(all_errors(dangling).size(), 1u);
}

TEST(RoundTrip, StripDirectivesRemovesEveryAttachment) {
  for (const auto& path : all_programs()) {
    Program p = strip_directives(load_program(testsupport::read_file(path)));
    std::size_t attached = 0;
    for (const auto& f : p.functions) visit_stmts(f.body, [&](const Stmt& s) { attached += s.directives.size(); });
    EXPECT_EQ(attached, 0u) << path;
  }
}

TEST(FormatFloat, ShortestRoundTrip) {
  EXPECT_EQ(format_float(1.0), "1.0");
  EXPECT_EQ(format_float(0.1), "0.1");
  EXPECT_EQ(format_float(-2.5), "-2.5");
  EXPECT_EQ(format_float(1e300), "1e+300");
  for (double v : {0.1 + 0.2, 1.0 / 3.0, 6.02214076e23, -1e-7}) EXPECT_EQ(std::stod(format_float(v)), v);
}
