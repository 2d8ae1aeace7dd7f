#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "corpus.hpp"
#include "miniomp/exec.hpp"
#include "miniomp/frontend.hpp"
#include "miniomp/transform.hpp"
#include "reference.hpp"

using namespace miniomp;

namespace {

std::string run_text(std::string_view src, std::optional<int> threads = std::nullopt, bool serialize = false) {
  RunConfig cfg;
  cfg.threads = threads;
  cfg.serialize = serialize;
  return run_source(src, cfg).printed;
}

TrapKind trap_of(std::string_view src, std::optional<int> threads = 1) {
  try {
    run_text(src, threads);
  } catch (const Trap& t) {
    return t.kind();
  }
  ADD_FAILURE() << "no trap from:\n" << src;
  return TrapKind::ExternFailure;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

bool is_float_token(const std::string& w) {
  return w.find_first_of(".e") != std::string::npos && w.find_first_of("0123456789") != std::string::npos;
}

// Integers and words must match exactly; floats within relative `tol`.
std::optional<std::string> compare_outputs(const std::string& base, const std::string& got, double tol) {
  auto a = split_ws(base);
  auto b = split_ws(got);
  if (a.size() != b.size()) return "different token counts";
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] == b[k]) continue;
    if (!is_float_token(a[k]) || !is_float_token(b[k])) return "token " + a[k] + " vs " + b[k];
    const double x = std::stod(a[k]);
    const double y = std::stod(b[k]);
    if (std::abs(x - y) > tol * std::abs(x)) return "float " + a[k] + " vs " + b[k];
  }
  return std::nullopt;
}

const char* kSumTo55 =
    "fn main() {\n  var s: int = 0;\n  //#omp parallel for reduction(+: s)\n  for i in 1..11 { s = s + i; }\n  print(s);\n}\n";

}  // namespace

TEST(Run, Arithmetic) { EXPECT_EQ(run_text("fn main() { print(2+3); }"), "5\n"); }

TEST(Run, ReductionSumAnyTeamSize) {
  for (int t : {1, 2, 4}) EXPECT_EQ(run_text(kSumTo55, t), "55\n") << t;
}

TEST(Run, PrivateLeavesHostUntouched) {
  const std::string src = std::string(kSumTo55).replace(std::string(kSumTo55).find("reduction(+: s)"), 15, "private(s)");
  for (int t : {1, 2, 4}) EXPECT_EQ(run_text(src, t), "0\n") << t;
  // The directive-stripped program is intentionally different.
  reference::Result serial = reference::run(load_program(src));
  EXPECT_EQ(serial.printed, "55\n");
}

TEST(Run, PrivateArrayIsZeroedFirstprivateIsCopied) {
  const char* src =
      "fn main() {\n"
      "  var a: [int; 3];\n  var b: [int; 3];\n  var seen: [int; 8];\n"
      "  a[1] = 5; b[1] = 7;\n"
      "  //#omp parallel private(a) firstprivate(b) shared(seen) num_threads(4)\n"
      "  {\n    seen[tid()] = a[1] * 100 + b[1];\n    a[1] = 9; b[1] = 9;\n  }\n"
      "  print(a[1], b[1], seen[0], seen[1], seen[2], seen[3]);\n}\n";
  EXPECT_EQ(run_text(src), "5 7 7 7 7 7\n");
}

TEST(Run, ReductionCombinesWithOriginalValue) {
  EXPECT_EQ(run_text("fn main() { var s: int = 100; var m: float = 2.0; var lo: int = -4;\n"
                     "//#omp parallel for reduction(+: s) reduction(*: m) reduction(min: lo)\n"
                     "for i in 1..5 { s = s + i; m = m * 2.0; lo = min(lo, i); }\n print(s, m, lo); }",
                     3),
            "110 32.0 -4\n");
}

TEST(Run, TidAssignmentIsPermutation) {
  const char* src =
      "fn main() {\n  var out: [int; 4];\n  for k in 0..4 { out[k] = -1; }\n"
      "  //#omp parallel shared(out)\n  { out[tid()] = tid(); }\n"
      "  print(out[0], out[1], out[2], out[3]);\n}\n";
  EXPECT_EQ(run_text(src, 4), "0 1 2 3\n");
}

TEST(Run, TeamSizeResolution) {
  const char* src =
      "fn main() {\n  var n: int = 0;\n  //#omp parallel reduction(+: n)\n  { n = n + 1; }\n"
      "  var m: int = 0;\n  //#omp parallel num_threads(3) reduction(+: m)\n  { m = m + 1; }\n  print(n, m);\n}\n";
  EXPECT_EQ(run_text(src, 5), "5 3\n");
  EXPECT_EQ(run_text(src, 5, true), "1 1\n");
}

TEST(Run, WorkshareInsideRegionUsesTeam) {
  const char* src =
      "fn main() {\n  var owner: [int; 8];\n  var total: int = 0;\n"
      "  //#omp parallel num_threads(4) shared(owner)\n  {\n"
      "    //#omp for schedule(static, 2) reduction(+: total)\n"
      "    for i in 0..8 { owner[i] = tid(); total = total + i; }\n  }\n"
      "  print(owner[0], owner[1], owner[2], owner[3], owner[4], owner[5], owner[6], owner[7], total);\n}\n";
  EXPECT_EQ(run_text(src), "0 0 1 1 2 2 3 3 28\n");
}

TEST(Run, NestedRegionWarnsOnce) {
  RunConfig cfg;
  cfg.threads = 8;
  ProgramOutput out = run_source(testsupport::read_file(testsupport::corpus_dir() / "nested.mk"), cfg);
  EXPECT_EQ(out.printed, "every member ran a team of one true\n");
  ASSERT_EQ(out.warnings.size(), 1u);
  EXPECT_TRUE(out.warnings[0].starts_with("miniomp: warning:"));
}

TEST(Run, StreamReceivesLines) {
  std::ostringstream sink;
  RunConfig cfg;
  cfg.stream = &sink;
  ProgramOutput out = run_source("fn main() { print(\"a\", 1); print(2.5, true); }", cfg);
  EXPECT_EQ(sink.str(), "a 1\n2.5 true\n");
  EXPECT_EQ(out.printed, sink.str());
}

TEST(Run, MainReturnValueIsExitStatus) {
  EXPECT_EQ(run_source("fn main() -> int { return 7; }").exit_status, 7);
  EXPECT_EQ(run_source("fn main() { }").exit_status, 0);
}

TEST(Run, RandomBuiltinsMatchIndependentSpelling) {
  for (std::int64_t i : {0LL, 1LL, 2LL, 12345LL, -1LL, 1LL << 40}) {
    EXPECT_EQ(split_seed(i), reference::split_seed(i)) << i;
    const double u = rand_uniform(split_seed(i));
    EXPECT_EQ(u, reference::rand_uniform(reference::split_seed(i)));
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  // First output of SplitMix64 seeded with 0.
  EXPECT_EQ(static_cast<std::uint64_t>(split_seed(0)), 0xE220A8397B1DCDAFull);
}

TEST(Traps, Kinds) {
  EXPECT_EQ(trap_of("fn main() { var a: [int; 3]; a[3] = 1; }"), TrapKind::OutOfBounds);
  EXPECT_EQ(trap_of("fn main() { var a: [int; 3]; print(a[-1]); }"), TrapKind::OutOfBounds);
  EXPECT_EQ(trap_of("fn main() { var z: int = 0; print(1 / z); }"), TrapKind::DivisionByZero);
  EXPECT_EQ(trap_of("fn main() { var z: int = 0; print(1 % z); }"), TrapKind::DivisionByZero);
  EXPECT_EQ(trap_of("fn main() { var x: int = 9223372036854775807; print(x + 1); }"), TrapKind::IntegerOverflow);
  EXPECT_EQ(trap_of("fn main() { var x: int = 4611686018427387904; print(x * 2); }"), TrapKind::IntegerOverflow);
  EXPECT_EQ(trap_of("fn main() { var x: int = -9223372036854775807 - 1; print(-x); }"), TrapKind::IntegerOverflow);
  EXPECT_EQ(trap_of("fn main() { var s: int = 0; for i in 0..5 step s { print(i); } }"), TrapKind::InvalidLoop);
  EXPECT_EQ(trap_of("fn main() { var f: float = 1e300; print(floor(f)); }"), TrapKind::InvalidConversion);
  EXPECT_EQ(trap_of("fn main() { var n: int = -1; var a: [int; n]; }"), TrapKind::InvalidArrayLength);
  EXPECT_EQ(trap_of("fn f(x: int) -> int { if x > 0 { return 1; } } fn main() { print(f(0)); }"),
            TrapKind::MissingReturn);
}

TEST(Traps, PositionAndPrefixOutput) {
  std::ostringstream sink;
  RunConfig cfg;
  cfg.stream = &sink;
  try {
    run_source("fn main() {\n  print(1);\n  var a: [int; 2];\n  a[5] = 0;\n}", cfg);
    FAIL();
  } catch (const Trap& t) {
    EXPECT_EQ(t.kind(), TrapKind::OutOfBounds);
    EXPECT_EQ(t.pos().line, 4);
  }
  EXPECT_EQ(sink.str(), "1\n");
}

TEST(Traps, RegionTrapPropagatesAfterJoin) {
  const char* src =
      "fn main() {\n  var a: [int; 4];\n  //#omp parallel for schedule(static)\n"
      "  for i in 0..8 { a[i] = i; }\n}\n";
  for (int t : {1, 2, 4, 8}) EXPECT_EQ(trap_of(src, t), TrapKind::OutOfBounds) << t;
}

TEST(Traps, ReductionOverflowAtWriteBack) {
  const char* src =
      "fn main() {\n  var s: int = 9223372036854775000;\n  //#omp parallel for reduction(+: s)\n"
      "  for i in 0..4 { s = s + 500; }\n  print(s);\n}\n";
  for (int t : {1, 4}) EXPECT_EQ(trap_of(src, t), TrapKind::IntegerOverflow) << t;
}

TEST(Externs, BindingRule) {
  EXPECT_EQ(bind_extern("dcopy", ExternAbi::Fortran), "dcopy_");
  EXPECT_EQ(bind_extern("clock", ExternAbi::Native), "clock");
}

TEST(Externs, UnresolvedReportsMangledSymbol) {
  const char* src = "extern fortran fn saxpy(n: int);\nfn main() {\n  print(1);\n  saxpy(3);\n}\n";
  try {
    run_text(src);
    FAIL();
  } catch (const UnresolvedExtern& e) {
    EXPECT_EQ(e.symbol(), "saxpy_");
    EXPECT_EQ(e.kind(), TrapKind::UnresolvedExtern);
    EXPECT_NE(std::string(e.what()).find("saxpy_"), std::string::npos);
    EXPECT_EQ(e.pos().line, 4);
  }
  // A callback under the unmangled name does not satisfy a fortran extern.
  ExternRegistry reg;
  reg.add("saxpy", 1, [](std::span<const Value>) -> Value { return {}; });
  RunConfig cfg;
  cfg.externs = &reg;
  EXPECT_THROW(run_source(src, cfg), UnresolvedExtern);
}

TEST(Externs, DemoDcopyAndNativeCallback) {
  const char* src =
      "extern fortran fn dcopy(n: int, a: [float], b: [float]);\nextern fortran fn wtime() -> float;\n"
      "extern native fn clock() -> int;\n"
      "fn main() {\n  var a: [float; 3];\n  var b: [float; 3];\n  a[0] = 1.5; a[2] = -2.0;\n"
      "  dcopy(3, a, b);\n  print(b[0], b[1], b[2], wtime() > 0.0, clock());\n}\n";
  ExternRegistry reg = ExternRegistry::with_demo_externs();
  reg.add("clock", 0, [](std::span<const Value>) -> Value { return std::int64_t{42}; });
  RunConfig cfg;
  cfg.externs = &reg;
  EXPECT_EQ(run_source(src, cfg).printed, "1.5 0.0 -2.0 true 42\n");
}

TEST(Externs, FailuresBecomeTraps) {
  ExternRegistry reg;
  reg.add("boom", 0, [](std::span<const Value>) -> Value { throw std::runtime_error("nope"); });
  reg.add("two", 2, [](std::span<const Value>) -> Value { return std::int64_t{0}; });
  reg.add("wrong", 0, [](std::span<const Value>) -> Value { return 1.5; });
  RunConfig cfg;
  cfg.externs = &reg;
  auto kind = [&](const char* src) {
    try {
      run_source(src, cfg);
    } catch (const Trap& t) {
      return t.kind();
    }
    return TrapKind::OutOfBounds;
  };
  EXPECT_EQ(kind("extern fn boom(); fn main() { boom(); }"), TrapKind::ExternFailure);
  EXPECT_EQ(kind("extern fn two(a: int) -> int; fn main() { print(two(1)); }"), TrapKind::ExternFailure);
  EXPECT_EQ(kind("extern fn wrong() -> int; fn main() { print(wrong()); }"), TrapKind::ExternFailure);
}

// Lowered program on one-member teams against the directive-blind oracle.
TEST(SerialEquivalence, CorpusMatchesReference) {
  for (const auto& path : testsupport::corpus_files()) {
    Program p = load_program(testsupport::read_file(path));
    reference::Result expected = reference::run(p);
    ASSERT_FALSE(expected.trap) << path;
    RunConfig cfg;
    cfg.serialize = true;
    EXPECT_EQ(run_lowered(lower_program(p), cfg).printed, expected.printed) << path;
    cfg.serialize = false;
    cfg.threads = 1;
    EXPECT_EQ(run_lowered(lower_program(p), cfg).printed, expected.printed) << path;
  }
}

TEST(SerialEquivalence, SmallKernelsMatchReference) {
  // Shrunk parameters keep the tree-walking oracle fast.
  const std::map<std::string, std::map<std::string, std::int64_t>> params = {
      {"mandelbrot", {{"grid_size", 48}, {"max_iter", 200}}},
      {"ep", {{"pair_count", 4096}}},
      {"is", {{"key_count", 4096}, {"bucket_count", 64}, {"key_range", 1024}}},
      {"cg", {{"order", 256}, {"cg_iterations", 25}}},
  };
  for (const auto& [name, values] : params) {
    Program p = load_program(testsupport::read_file(std::filesystem::path(MINIOMP_KERNEL_DIR) / (name + ".mk")));
    reference::Options opts;
    opts.int_externs = values;
    reference::Result expected = reference::run(p, opts);
    ASSERT_FALSE(expected.trap) << name;
    ExternRegistry reg;
    for (const auto& [k, v] : values) {
      reg.add(k, 0, [v](std::span<const Value>) -> Value { return v; });
    }
    RunConfig cfg;
    cfg.externs = &reg;
    cfg.serialize = true;
    EXPECT_EQ(run_lowered(lower_program(p), cfg).printed, expected.printed) << name;
  }
}

TEST(SerialEquivalence, TrapsMatchReference) {
  for (const char* src : {"fn main() { var a: [int; 3]; print(1); a[3] = 1; }",
                          "fn main() { var z: int = 0; var s: int = 0;\n//#omp parallel for reduction(+: s)\nfor i in 0..4 { s = s + 1 / z; } }"}) {
    Program p = load_program(src);
    reference::Result expected = reference::run(p);
    ASSERT_TRUE(expected.trap);
    RunConfig cfg;
    cfg.serialize = true;
    try {
      run_lowered(lower_program(p), cfg);
      FAIL() << src;
    } catch (const Trap& t) {
      EXPECT_EQ(t.kind(), *expected.trap) << src;
    }
  }
}

// Team size changes only float association.
TEST(TeamSizeInvariance, Corpus) {
  for (const auto& path : testsupport::corpus_files()) {
    const std::string src = testsupport::read_file(path);
    const std::string base = run_text(src, 1);
    for (int t : {2, 3, 4, 8}) {
      auto problem = compare_outputs(base, run_text(src, t), 1e-10);
      EXPECT_FALSE(problem) << path << " T=" << t << ": " << *problem;
    }
  }
}

// Unsynchronized shared updates: values are indeterminate but the region
// finishes, nothing traps, and unrelated variables stay intact.
TEST(RaceSafety, UnsynchronizedSharedWrites) {
  const char* src =
      "fn main() {\n  var hits: int = 0;\n  var fsum: float = 0.0;\n  var bystander: int = 1234567;\n"
      "  var cells: [int; 16];\n  var guard: [int; 4];\n  guard[0] = 11; guard[3] = 44;\n"
      "  //#omp parallel for schedule(dynamic, 3) shared(hits, fsum, cells)\n"
      "  for i in 0..20000 {\n    hits = hits + 1;\n    fsum = fsum + 0.5;\n"
      "    cells[i % 16] = cells[(i * 7) % 16] + 1;\n  }\n"
      "  print(hits >= 1 && hits <= 20000, fsum >= 0.5 && fsum <= 10000.0, bystander, guard[0], guard[3]);\n}\n";
  for (int round = 0; round < 10; ++round) {
    EXPECT_EQ(run_text(src, 8), "true true 1234567 11 44\n");
  }
}

TEST(PrintAtomicity, LinesNeverInterleave) {
  const char* src =
      "fn main() {\n  //#omp parallel num_threads(8)\n  {\n    var me: int = tid();\n"
      "    for k in 0..200 {\n      print(\"member\", me, \"line\", k, \"xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx\", me * 1.5);\n    }\n  }\n}\n";
  std::ostringstream sink;
  RunConfig cfg;
  cfg.stream = &sink;
  ProgramOutput out = run_source(src, cfg);
  std::set<std::string> expected;
  for (int me = 0; me < 8; ++me) {
    for (int k = 0; k < 200; ++k) {
      std::ostringstream line;
      line << "member " << me << " line " << k << " xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx "
           << format_float(me * 1.5);
      expected.insert(line.str());
    }
  }
  std::istringstream in(out.printed);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line); ++lines) ASSERT_TRUE(expected.contains(line)) << line;
  EXPECT_EQ(lines, 1600u);
  EXPECT_EQ(sink.str(), out.printed);
}
